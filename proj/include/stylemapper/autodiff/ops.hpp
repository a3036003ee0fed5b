#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stylemapper/autodiff/tensor.hpp"

// Differentiable primitives. Image-like tensors are NCHW, row-major.
namespace stylemapper::ad {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

[[noreturn]] inline void shape_fail(const std::string& op, const std::string& what, const Shape& a, const Shape& b = {}) {
  std::string msg = op + ": " + what + " (" + shape_str(a);
  if (!b.empty()) msg += " vs " + shape_str(b);
  msg += ")";
  throw ShapeError(msg);
}

inline void require_rank(const std::string& op, const Shape& s, std::size_t r) {
  if (s.size() != r) shape_fail(op, "expected rank " + std::to_string(r), s);
}

inline void require_same(const std::string& op, const Shape& a, const Shape& b) {
  if (a != b) shape_fail(op, "shape mismatch", a, b);
}

template <typename T>
Node<T>* grad_target(Node<T>& self, std::size_t k) {
  Node<T>* p = self.parents[k].get();
  if (!p->requires_grad) return nullptr;
  p->ensure_grad();
  return p;
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename T, class F, class D>
Tensor<T> unary(const std::string& op, const Tensor<T>& x, F f, D dfdx) {
  std::vector<T> out(x.size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(op, x.shape(), std::move(out), {x}, [dfdx](Node<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * dfdx(p->value[i], self.value[i]);
    }
  });
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same("add", a.shape(), b.shape());
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* p = detail::grad_target(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same("sub", a.shape(), b.shape());
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* p = detail::grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
    if (auto* p = detail::grad_target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same("mul", a.shape(), b.shape());
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>* pa = self.parents[0].get();
    Node<T>* pb = self.parents[1].get();
    if (auto* p = detail::grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * pb->value[i];
    }
    if (auto* p = detail::grad_target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * pa->value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  return detail::unary<T>(
      "scale", x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  return detail::unary<T>(
      "add_scalar", x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary<T>(
      "sigmoid", x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size()) detail::shape_fail("reshape", "element count differs", x.shape(), shape);
  return make_result<T>("reshape", std::move(shape), x.values(), {x}, [](Node<T>& self) {
    if (auto* p = detail::grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.values()) acc += v;
  return make_result<T>("sum", {1}, {acc}, {x}, [](Node<T>& self) {
    if (auto* p = detail::grad_target(self, 0)) {
      for (auto& g : p->grad) g += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

// Weighted sum of scalars, used to combine loss terms.
template <typename T>
Tensor<T> weighted_sum(const std::vector<Tensor<T>>& terms, const std::vector<T>& weights) {
  if (terms.size() != weights.size() || terms.empty()) throw ShapeError("weighted_sum: terms/weights size mismatch");
  T acc = T(0);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k].size() != 1) detail::shape_fail("weighted_sum", "terms must be scalars", terms[k].shape());
    acc += weights[k] * terms[k].item();
  }
  return make_result<T>("weighted_sum", {1}, {acc}, terms, [weights](Node<T>& self) {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (auto* p = detail::grad_target(self, k)) p->grad[0] += weights[k] * self.grad[0];
    }
  });
}

// Mean absolute difference; the subgradient at a tie is 0.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same("l1_loss", a.shape(), b.shape());
  T acc = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.values()[i] - b.values()[i]);
  const T inv = T(1) / static_cast<T>(a.size());
  return make_result<T>("l1_loss", {1}, {acc * inv}, {a, b}, [inv](Node<T>& self) {
    Node<T>* pa = self.parents[0].get();
    Node<T>* pb = self.parents[1].get();
    const T g = self.grad[0] * inv;
    auto sgn = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
    if (auto* p = detail::grad_target(self, 0)) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += g * sgn(pa->value[i] - pb->value[i]);
    }
    if (auto* p = detail::grad_target(self, 1)) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] -= g * sgn(pa->value[i] - pb->value[i]);
    }
  });
}

// [m,k] x [k,n] -> [m,n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank("matmul", a.shape(), 2);
  detail::require_rank("matmul", b.shape(), 2);
  if (a.dim(1) != b.dim(0)) detail::shape_fail("matmul", "inner dimensions differ", a.shape(), b.shape());
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<T> out(static_cast<std::size_t>(m * n));
  detail::MapMat<T>(out.data(), m, n).noalias() =
      detail::CMapMat<T>(a.values().data(), m, k) * detail::CMapMat<T>(b.values().data(), k, n);
  return make_result<T>("matmul", {a.dim(0), b.dim(1)}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    detail::CMapMat<T> g(self.grad.data(), m, n);
    Node<T>* pa = self.parents[0].get();
    Node<T>* pb = self.parents[1].get();
    if (auto* p = detail::grad_target(self, 0)) {
      detail::MapMat<T>(p->grad.data(), m, k).noalias() += g * detail::CMapMat<T>(pb->value.data(), k, n).transpose();
    }
    if (auto* p = detail::grad_target(self, 1)) {
      detail::MapMat<T>(p->grad.data(), k, n).noalias() += detail::CMapMat<T>(pa->value.data(), m, k).transpose() * g;
    }
  });
}

// x [N,in], weight [out,in], bias [out] -> [N,out]
template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  detail::require_rank("fully_connected", x.shape(), 2);
  detail::require_rank("fully_connected", weight.shape(), 2);
  if (x.dim(1) != weight.dim(1)) detail::shape_fail("fully_connected", "input features differ", x.shape(), weight.shape());
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    detail::shape_fail("fully_connected", "bias does not match output features", bias.shape(), weight.shape());
  }
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(x.dim(1));
  const auto out_f = static_cast<Eigen::Index>(weight.dim(0));
  std::vector<T> out(static_cast<std::size_t>(n * out_f));
  detail::MapMat<T> o(out.data(), n, out_f);
  o.noalias() = detail::CMapMat<T>(x.values().data(), n, in) *
                detail::CMapMat<T>(weight.values().data(), out_f, in).transpose();
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < out_f; ++c) o(r, c) += bias.values()[static_cast<std::size_t>(c)];
  }
  return make_result<T>("fully_connected", {x.dim(0), weight.dim(0)}, std::move(out), {x, weight, bias},
                        [n, in, out_f](Node<T>& self) {
                          detail::CMapMat<T> g(self.grad.data(), n, out_f);
                          Node<T>* px = self.parents[0].get();
                          Node<T>* pw = self.parents[1].get();
                          if (auto* p = detail::grad_target(self, 0)) {
                            detail::MapMat<T>(p->grad.data(), n, in).noalias() +=
                                g * detail::CMapMat<T>(pw->value.data(), out_f, in);
                          }
                          if (auto* p = detail::grad_target(self, 1)) {
                            detail::MapMat<T>(p->grad.data(), out_f, in).noalias() +=
                                g.transpose() * detail::CMapMat<T>(px->value.data(), n, in);
                          }
                          if (auto* p = detail::grad_target(self, 2)) {
                            for (Eigen::Index r = 0; r < n; ++r) {
                              for (Eigen::Index c = 0; c < out_f; ++c) p->grad[static_cast<std::size_t>(c)] += g(r, c);
                            }
                          }
                        });
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, k, stride, pad, ho, wo;
  std::size_t patch() const { return cin * k * k; }
  std::size_t columns() const { return n * ho * wo; }
};

namespace detail {

// cols[(ci*k + ki)*k + kj][b*ho*wo + oy*wo + ox] = x[b, ci, oy*s - p + ki, ox*s - p + kj] (0 outside)
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* cols) {
  const std::size_t ncol = g.columns();
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        T* row = cols + ((ci * g.k + ki) * g.k + kj) * ncol;
        for (std::size_t b = 0; b < g.n; ++b) {
          const T* src = x + (b * g.cin + ci) * g.h * g.w;
          T* dst = row + b * plane;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
            T* d = dst + oy * g.wo;
            if (iy < 0 || iy >= static_cast<long>(g.h)) {
              std::fill(d, d + g.wo, T(0));
              continue;
            }
            const T* s = src + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
              d[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? T(0) : s[ix];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* dx) {
  const std::size_t ncol = g.columns();
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const T* row = cols + ((ci * g.k + ki) * g.k + kj) * ncol;
        for (std::size_t b = 0; b < g.n; ++b) {
          T* dst = dx + (b * g.cin + ci) * g.h * g.w;
          const T* src = row + b * plane;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            T* d = dst + static_cast<std::size_t>(iy) * g.w;
            const T* s = src + oy * g.wo;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
              if (ix >= 0 && ix < static_cast<long>(g.w)) d[ix] += s[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

namespace detail {

// Stride-1 convolution without an im2col buffer. The batch is laid out as one tall
// zero-padded image per channel (samples stacked vertically), so every kernel tap is a
// contiguous window of that buffer and the convolution becomes k*k GEMMs of
// [Cout x Cin] by [Cin x L]. Grid positions that straddle a row or sample boundary
// are computed and then discarded.
struct ShiftedLayout {
  std::size_t hp, wp, rows, grid, stride;
  explicit ShiftedLayout(const ConvGeometry& g)
      : hp(g.h + 2 * g.pad),
        wp(g.w + 2 * g.pad),
        rows(g.n * hp - g.k + 1),
        grid(rows * wp),
        stride(g.n * hp * wp + g.k) {}
  std::size_t grid_index(const ConvGeometry& g, std::size_t b, std::size_t y, std::size_t x) const {
    (void)g;
    return (b * hp + y) * wp + x;
  }
};

template <typename T>
std::vector<T> pad_stack(const ConvGeometry& g, const ShiftedLayout& lay, const T* x) {
  std::vector<T> xp(g.cin * lay.stride, T(0));
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    for (std::size_t b = 0; b < g.n; ++b) {
      const T* src = x + (b * g.cin + ci) * g.h * g.w;
      T* dst = xp.data() + ci * lay.stride + (b * lay.hp + g.pad) * lay.wp + g.pad;
      for (std::size_t y = 0; y < g.h; ++y) std::copy_n(src + y * g.w, g.w, dst + y * lay.wp);
    }
  }
  return xp;
}

// weight [Cout,Cin,k,k] -> taps [k*k][Cout][Cin]
template <typename T>
std::vector<T> weight_taps(const ConvGeometry& g, const T* w) {
  const std::size_t kk = g.k * g.k;
  std::vector<T> taps(kk * g.cout * g.cin);
  for (std::size_t co = 0; co < g.cout; ++co) {
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      for (std::size_t t = 0; t < kk; ++t) taps[(t * g.cout + co) * g.cin + ci] = w[(co * g.cin + ci) * kk + t];
    }
  }
  return taps;
}

template <typename T>
using StridedCMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
std::vector<T> conv_shifted_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias) {
  const ShiftedLayout lay(g);
  const auto xp = pad_stack(g, lay, x);
  const auto taps = weight_taps(g, w);
  const auto Co = static_cast<Eigen::Index>(g.cout), Ci = static_cast<Eigen::Index>(g.cin);
  const auto L = static_cast<Eigen::Index>(lay.grid);
  RowMat<T> grid = RowMat<T>::Zero(Co, L);
  for (std::size_t ki = 0; ki < g.k; ++ki) {
    for (std::size_t kj = 0; kj < g.k; ++kj) {
      const std::size_t t = ki * g.k + kj;
      grid.noalias() += CMapMat<T>(taps.data() + t * g.cout * g.cin, Co, Ci) *
                        StridedCMap<T>(xp.data() + ki * lay.wp + kj, Ci, L, Eigen::OuterStride<>(static_cast<Eigen::Index>(lay.stride)));
    }
  }
  const std::size_t plane = g.ho * g.wo;
  std::vector<T> out(g.n * g.cout * plane);
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      T* dst = out.data() + (b * g.cout + co) * plane;
      const T* src = grid.data() + co * lay.grid;
      for (std::size_t y = 0; y < g.ho; ++y) {
        const T* s = src + lay.grid_index(g, b, y, 0);
        for (std::size_t xx = 0; xx < g.wo; ++xx) dst[y * g.wo + xx] = s[xx] + bias[co];
      }
    }
  }
  return out;
}

template <typename T>
void conv_shifted_backward(const ConvGeometry& g, const T* gout, const T* x, const T* w, T* dx, T* dw, T* db) {
  const ShiftedLayout lay(g);
  const auto Co = static_cast<Eigen::Index>(g.cout), Ci = static_cast<Eigen::Index>(g.cin);
  const auto L = static_cast<Eigen::Index>(lay.grid);
  const auto S = Eigen::OuterStride<>(static_cast<Eigen::Index>(lay.stride));
  const std::size_t plane = g.ho * g.wo;
  RowMat<T> grid = RowMat<T>::Zero(Co, L);
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      const T* src = gout + (b * g.cout + co) * plane;
      T* dst = grid.data() + co * lay.grid;
      for (std::size_t y = 0; y < g.ho; ++y) std::copy_n(src + y * g.wo, g.wo, dst + lay.grid_index(g, b, y, 0));
    }
  }
  if (db) {
    for (Eigen::Index co = 0; co < Co; ++co) db[co] += grid.row(co).sum();
  }
  const std::size_t kk = g.k * g.k;
  if (dw) {
    const auto xp = pad_stack(g, lay, x);
    RowMat<T> tap_grad(Co, Ci);
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        tap_grad.noalias() = grid * StridedCMap<T>(xp.data() + ki * lay.wp + kj, Ci, L, S).transpose();
        const std::size_t t = ki * g.k + kj;
        for (std::size_t co = 0; co < g.cout; ++co) {
          for (std::size_t ci = 0; ci < g.cin; ++ci) dw[(co * g.cin + ci) * kk + t] += tap_grad(co, ci);
        }
      }
    }
  }
  if (dx) {
    const auto taps = weight_taps(g, w);
    std::vector<T> dxp(g.cin * lay.stride, T(0));
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const std::size_t t = ki * g.k + kj;
        StridedMap<T>(dxp.data() + ki * lay.wp + kj, Ci, L, S).noalias() +=
            CMapMat<T>(taps.data() + t * g.cout * g.cin, Co, Ci).transpose() * grid;
      }
    }
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      for (std::size_t b = 0; b < g.n; ++b) {
        T* dst = dx + (b * g.cin + ci) * g.h * g.w;
        const T* src = dxp.data() + ci * lay.stride + (b * lay.hp + g.pad) * lay.wp + g.pad;
        for (std::size_t y = 0; y < g.h; ++y) {
          for (std::size_t xx = 0; xx < g.w; ++xx) dst[y * g.w + xx] += src[y * lay.wp + xx];
        }
      }
    }
  }
}

template <typename T>
std::vector<T> conv_im2col_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias) {
  const auto K = static_cast<Eigen::Index>(g.patch());
  const auto C = static_cast<Eigen::Index>(g.columns());
  const auto Co = static_cast<Eigen::Index>(g.cout);
  std::vector<T> cols(g.patch() * g.columns());
  im2col(g, x, cols.data());
  RowMat<T> res(Co, C);
  res.noalias() = CMapMat<T>(w, Co, K) * CMapMat<T>(cols.data(), K, C);
  const std::size_t plane = g.ho * g.wo;
  std::vector<T> out(g.n * g.cout * plane);
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      const T* src = res.data() + co * g.columns() + b * plane;
      T* dst = out.data() + (b * g.cout + co) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] + bias[co];
    }
  }
  return out;
}

template <typename T>
void conv_im2col_backward(const ConvGeometry& g, const T* gout, const T* x, const T* w, T* dx, T* dw, T* db) {
  const auto K = static_cast<Eigen::Index>(g.patch());
  const auto C = static_cast<Eigen::Index>(g.columns());
  const auto Co = static_cast<Eigen::Index>(g.cout);
  const std::size_t plane = g.ho * g.wo;
  // Output grad rearranged to [Cout, N*Ho*Wo].
  RowMat<T> go(Co, C);
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      const T* src = gout + (b * g.cout + co) * plane;
      std::copy(src, src + plane, go.data() + co * g.columns() + b * plane);
    }
  }
  if (db) {
    for (Eigen::Index co = 0; co < Co; ++co) db[co] += go.row(co).sum();
  }
  if (dw) {
    std::vector<T> cols(g.patch() * g.columns());
    im2col(g, x, cols.data());
    MapMat<T>(dw, Co, K).noalias() += go * CMapMat<T>(cols.data(), K, C).transpose();
  }
  if (dx) {
    RowMat<T> dcols(K, C);
    dcols.noalias() = CMapMat<T>(w, Co, K).transpose() * go;
    col2im(g, dcols.data(), dx);
  }
}

}  // namespace detail

// Cross-correlation (deep-learning convention) with zero padding.
// x [N,Cin,H,W], weight [Cout,Cin,k,k], bias [Cout] -> [N,Cout,Ho,Wo]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride = 1,
                 std::size_t pad = 0) {
  detail::require_rank("conv2d", x.shape(), 4);
  detail::require_rank("conv2d", weight.shape(), 4);
  if (weight.dim(1) != x.dim(1)) detail::shape_fail("conv2d", "input channels differ", x.shape(), weight.shape());
  if (weight.dim(2) != weight.dim(3)) detail::shape_fail("conv2d", "kernel must be square", weight.shape());
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    detail::shape_fail("conv2d", "bias does not match output channels", bias.shape(), weight.shape());
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const std::size_t k = weight.dim(2);
  if (x.dim(2) + 2 * pad < k || x.dim(3) + 2 * pad < k) {
    detail::shape_fail("conv2d", "kernel larger than padded input", x.shape(), weight.shape());
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), k, stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - k) / stride + 1;
  g.wo = (g.w + 2 * pad - k) / stride + 1;

  const bool shifted = stride == 1;
  auto out = shifted ? detail::conv_shifted_forward(g, x.values().data(), weight.values().data(), bias.values().data())
                     : detail::conv_im2col_forward(g, x.values().data(), weight.values().data(), bias.values().data());
  return make_result<T>("conv2d", {g.n, g.cout, g.ho, g.wo}, std::move(out), {x, weight, bias},
                        [g, shifted](Node<T>& self) {
                          Node<T>* px = self.parents[0].get();
                          Node<T>* pw = self.parents[1].get();
                          auto* gx = detail::grad_target(self, 0);
                          auto* gw = detail::grad_target(self, 1);
                          auto* gb = detail::grad_target(self, 2);
                          T* dx = gx ? gx->grad.data() : nullptr;
                          T* dw = gw ? gw->grad.data() : nullptr;
                          T* db = gb ? gb->grad.data() : nullptr;
                          if (shifted) {
                            detail::conv_shifted_backward(g, self.grad.data(), px->value.data(), pw->value.data(), dx, dw, db);
                          } else {
                            detail::conv_im2col_backward(g, self.grad.data(), px->value.data(), pw->value.data(), dx, dw, db);
                          }
                        });
}

// Nearest-neighbour x2 upsampling, [N,C,H,W] -> [N,C,2H,2W].
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  detail::require_rank("upsample2x", x.shape(), 4);
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2), w = x.dim(3);
  std::vector<T> out(planes * 4 * h * w);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.values().data() + p * h * w;
    T* dst = out.data() + p * 4 * h * w;
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
    }
  }
  return make_result<T>("upsample2x", {x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), {x},
                        [planes, h, w](Node<T>& self) {
                          if (auto* p = detail::grad_target(self, 0)) {
                            for (std::size_t q = 0; q < planes; ++q) {
                              const T* g = self.grad.data() + q * 4 * h * w;
                              T* d = p->grad.data() + q * h * w;
                              for (std::size_t y = 0; y < 2 * h; ++y) {
                                for (std::size_t xx = 0; xx < 2 * w; ++xx) d[(y / 2) * w + xx / 2] += g[y * 2 * w + xx];
                              }
                            }
                          }
                        });
}

// Per-sample, per-channel normalization to zero mean and unit variance (biased variance + eps).
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps = T(1e-5)) {
  detail::require_rank("instance_norm", x.shape(), 4);
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t hw = x.dim(2) * x.dim(3);
  std::vector<T> out(x.size());
  std::vector<T> inv_std(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.values().data() + p * hw;
    T m = T(0);
    for (std::size_t i = 0; i < hw; ++i) m += src[i];
    m /= static_cast<T>(hw);
    T var = T(0);
    for (std::size_t i = 0; i < hw; ++i) var += (src[i] - m) * (src[i] - m);
    var /= static_cast<T>(hw);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[p] = is;
    T* dst = out.data() + p * hw;
    for (std::size_t i = 0; i < hw; ++i) dst[i] = (src[i] - m) * is;
  }
  return make_result<T>("instance_norm", x.shape(), std::move(out), {x},
                        [planes, hw, inv_std = std::move(inv_std)](Node<T>& self) {
                          if (auto* p = detail::grad_target(self, 0)) {
                            for (std::size_t q = 0; q < planes; ++q) {
                              const T* g = self.grad.data() + q * hw;
                              const T* y = self.value.data() + q * hw;
                              T mg = T(0), mgy = T(0);
                              for (std::size_t i = 0; i < hw; ++i) {
                                mg += g[i];
                                mgy += g[i] * y[i];
                              }
                              mg /= static_cast<T>(hw);
                              mgy /= static_cast<T>(hw);
                              T* d = p->grad.data() + q * hw;
                              for (std::size_t i = 0; i < hw; ++i) d[i] += inv_std[q] * (g[i] - mg - y[i] * mgy);
                            }
                          }
                        });
}

// y[n,c,:,:] = x[n,c,:,:] * scale[n,c] + shift[n,c]
template <typename T>
Tensor<T> channel_affine(const Tensor<T>& x, const Tensor<T>& scale_nc, const Tensor<T>& shift_nc) {
  detail::require_rank("channel_affine", x.shape(), 4);
  const Shape nc{x.dim(0), x.dim(1)};
  detail::require_same("channel_affine", scale_nc.shape(), nc);
  detail::require_same("channel_affine", shift_nc.shape(), nc);
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t hw = x.dim(2) * x.dim(3);
  std::vector<T> out(x.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const T a = scale_nc.values()[p], b = shift_nc.values()[p];
    for (std::size_t i = 0; i < hw; ++i) out[p * hw + i] = x.values()[p * hw + i] * a + b;
  }
  return make_result<T>("channel_affine", x.shape(), std::move(out), {x, scale_nc, shift_nc},
                        [planes, hw](Node<T>& self) {
                          Node<T>* px = self.parents[0].get();
                          Node<T>* ps = self.parents[1].get();
                          auto* gx = detail::grad_target(self, 0);
                          auto* gs = detail::grad_target(self, 1);
                          auto* gb = detail::grad_target(self, 2);
                          for (std::size_t q = 0; q < planes; ++q) {
                            const T* g = self.grad.data() + q * hw;
                            const T* xv = px->value.data() + q * hw;
                            if (gx) {
                              for (std::size_t i = 0; i < hw; ++i) gx->grad[q * hw + i] += g[i] * ps->value[q];
                            }
                            if (gs || gb) {
                              T sg = T(0), sgx = T(0);
                              for (std::size_t i = 0; i < hw; ++i) {
                                sg += g[i];
                                sgx += g[i] * xv[i];
                              }
                              if (gs) gs->grad[q] += sgx;
                              if (gb) gb->grad[q] += sg;
                            }
                          }
                        });
}

// [N,C,H,W] -> [N,C]
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  detail::require_rank("global_avg_pool", x.shape(), 4);
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t hw = x.dim(2) * x.dim(3);
  std::vector<T> out(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    T acc = T(0);
    for (std::size_t i = 0; i < hw; ++i) acc += x.values()[p * hw + i];
    out[p] = acc / static_cast<T>(hw);
  }
  return make_result<T>("global_avg_pool", {x.dim(0), x.dim(1)}, std::move(out), {x}, [planes, hw](Node<T>& self) {
    if (auto* p = detail::grad_target(self, 0)) {
      for (std::size_t q = 0; q < planes; ++q) {
        const T g = self.grad[q] / static_cast<T>(hw);
        for (std::size_t i = 0; i < hw; ++i) p->grad[q * hw + i] += g;
      }
    }
  });
}

// Gathers rows along the leading dimension (repeats allowed).
template <typename T>
Tensor<T> select_batch(const Tensor<T>& x, const std::vector<std::size_t>& indices) {
  if (x.rank() < 1 || indices.empty()) throw ShapeError("select_batch: need a batched tensor and at least one index");
  const std::size_t row = x.size() / x.dim(0);
  for (auto i : indices) {
    if (i >= x.dim(0)) detail::shape_fail("select_batch", "index " + std::to_string(i) + " out of range", x.shape());
  }
  Shape shape = x.shape();
  shape[0] = indices.size();
  std::vector<T> out(indices.size() * row);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(indices[r] * row), row,
                out.begin() + static_cast<std::ptrdiff_t>(r * row));
  }
  return make_result<T>("select_batch", std::move(shape), std::move(out), {x}, [indices, row](Node<T>& self) {
    if (auto* p = detail::grad_target(self, 0)) {
      for (std::size_t r = 0; r < indices.size(); ++r) {
        for (std::size_t i = 0; i < row; ++i) p->grad[indices[r] * row + i] += self.grad[r * row + i];
      }
    }
  });
}

// Stacks tensors of identical shape [1,...] or [...] along the leading dimension.
template <typename T>
Tensor<T> concat_batch(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t lead = 0;
  std::vector<T> out;
  for (const auto& p : parts) {
    Shape t(p.shape().begin() + 1, p.shape().end());
    detail::require_same("concat_batch", t, tail);
    lead += p.dim(0);
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  Shape shape = parts[0].shape();
  shape[0] = lead;
  return make_result<T>("concat_batch", std::move(shape), std::move(out), parts, [](Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t len = self.parents[k]->value.size();
      if (auto* p = detail::grad_target(self, k)) {
        for (std::size_t i = 0; i < len; ++i) p->grad[i] += self.grad[off + i];
      }
      off += len;
    }
  });
}

// Columns [offset, offset+len) of a [N,F] tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t offset, std::size_t len) {
  detail::require_rank("slice_cols", x.shape(), 2);
  if (len == 0 || offset + len > x.dim(1)) detail::shape_fail("slice_cols", "column range out of bounds", x.shape());
  const std::size_t n = x.dim(0), f = x.dim(1);
  std::vector<T> out(n * len);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < len; ++c) out[r * len + c] = x.values()[r * f + offset + c];
  }
  return make_result<T>("slice_cols", {n, len}, std::move(out), {x}, [n, f, offset, len](Node<T>& self) {
    if (auto* p = detail::grad_target(self, 0)) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < len; ++c) p->grad[r * f + offset + c] += self.grad[r * len + c];
      }
    }
  });
}

}  // namespace stylemapper::ad
