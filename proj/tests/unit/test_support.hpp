#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "stylemapper/autodiff/ops.hpp"
#include "stylemapper/losses.hpp"
#include "stylemapper/model.hpp"

namespace testing_support {

using namespace stylemapper;

inline Image random_image(std::mt19937_64& rng, std::size_t w, std::size_t h, double lo = 0.0, double hi = 255.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> px(w * h);
  for (auto& p : px) p = d(rng);
  return Image(w, h, std::move(px));
}

inline Image random_integer_image(std::mt19937_64& rng, std::size_t w, std::size_t h) {
  std::uniform_int_distribution<int> d(0, 255);
  std::vector<double> px(w * h);
  for (auto& p : px) p = d(rng);
  return Image(w, h, std::move(px));
}

template <typename T>
ad::Tensor<T> random_tensor(std::mt19937_64& rng, ad::Shape shape, double lo = -1.0, double hi = 1.0, bool grad = true) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<T> v(ad::numel(shape));
  for (auto& x : v) x = static_cast<T>(d(rng));
  return ad::Tensor<T>::from(std::move(v), std::move(shape), grad);
}

inline StyleCode random_code(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  StyleCode c;
  for (auto& x : c) x = d(rng);
  return c;
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
};

// Central differences on `count` entries (all if 0) of each input, compared with the
// analytic gradient produced by one backward sweep.
inline GradCheckResult grad_check(const std::function<ad::Tensor<double>()>& f, std::vector<ad::Tensor<double>> inputs,
                                  double step, std::size_t count = 0, std::uint64_t seed = 1, double floor = 1e-6) {
  for (auto& x : inputs) x.zero_grad();
  ad::backward(f());
  std::mt19937_64 rng(seed);
  GradCheckResult r;
  for (auto& x : inputs) {
    const auto analytic = x.grad();
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (count && count < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(count);
    }
    for (auto i : idx) {
      auto& v = x.mutable_values();
      const double orig = v[i];
      v[i] = orig + step;
      const double up = f().item();
      v[i] = orig - step;
      const double down = f().item();
      v[i] = orig;
      const double numeric = (up - down) / (2 * step);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(numeric - analytic[i]) / denom);
      ++r.checked;
    }
  }
  return r;
}

// Test double: content code is the image itself, style code is a constant, and the
// decoder returns the content unchanged. Transfer through it is the identity.
template <typename T>
struct IdentityStub {
  using scalar_type = T;
  ad::Tensor<T> encode_content(const ad::Tensor<T>& x) const { return x; }
  ad::Tensor<T> encode_style(const ad::Tensor<T>& x) const {
    return ad::Tensor<T>::full({x.dim(0), kStyleDim}, T(1));
  }
  ad::Tensor<T> decode(const ad::Tensor<T>& c, const ad::Tensor<T>&) const { return c; }
};

// Test double that "knows" one target style: decoding applies it to the content image.
template <typename T>
struct PerfectTransferStub {
  using scalar_type = T;
  TransformSpec spec;
  ad::Tensor<T> encode_content(const ad::Tensor<T>& x) const { return x; }
  ad::Tensor<T> encode_style(const ad::Tensor<T>& x) const { return ad::Tensor<T>::full({x.dim(0), kStyleDim}, T(1)); }
  ad::Tensor<T> decode(const ad::Tensor<T>& c, const ad::Tensor<T>&) const {
    std::vector<Image> out;
    for (std::size_t n = 0; n < c.dim(0); ++n) out.push_back(apply_transform(spec, tensor_to_image(c, n)));
    return images_to_tensor<T>(out);
  }
};

// Test double with exact knowledge of one QuadBatch: the content code of T(x_i) is x_i,
// the style code flags raw (0) versus transformed (1), and decoding re-applies T when
// the style flag is set. Every loss term is zero for that batch.
template <typename T>
struct BatchOracleStub {
  using scalar_type = T;
  QuadBatch batch;

  static bool same(const Image& a, const Image& b) { return mean_abs_error(a, b) < 1e-9; }
  Image raw_of(const Image& img) const {
    if (same(img, batch.t_x1)) return batch.x1;
    if (same(img, batch.t_x2)) return batch.x2;
    return img;
  }
  bool is_transformed(const Image& img) const { return same(img, batch.t_x1) || same(img, batch.t_x2); }

  ad::Tensor<T> encode_content(const ad::Tensor<T>& x) const {
    std::vector<Image> out;
    for (std::size_t n = 0; n < x.dim(0); ++n) out.push_back(raw_of(tensor_to_image(x, n)));
    return images_to_tensor<T>(out);
  }
  ad::Tensor<T> encode_style(const ad::Tensor<T>& x) const {
    std::vector<T> v;
    for (std::size_t n = 0; n < x.dim(0); ++n) {
      for (std::size_t i = 0; i < kStyleDim; ++i) v.push_back(is_transformed(tensor_to_image(x, n)) ? T(1) : T(0));
    }
    return ad::Tensor<T>::from(std::move(v), {x.dim(0), kStyleDim});
  }
  ad::Tensor<T> decode(const ad::Tensor<T>& c, const ad::Tensor<T>& s) const {
    std::vector<Image> out;
    for (std::size_t n = 0; n < c.dim(0); ++n) {
      const auto img = tensor_to_image(c, n);
      out.push_back(s.values()[n * kStyleDim] > T(0.5) ? apply_transform(batch.spec, img) : img);
    }
    return images_to_tensor<T>(out);
  }
};

}  // namespace testing_support
