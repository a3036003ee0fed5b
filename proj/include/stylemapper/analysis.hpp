#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stylemapper/inference.hpp"

namespace stylemapper {

inline double cosine_similarity(const StyleCode& a, const StyleCode& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < kStyleDim; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw std::invalid_argument("cosine_similarity: zero-norm style code");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

struct SimilarityMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;

  double operator()(std::size_t i, std::size_t j) const { return values.at(i).at(j); }
  std::size_t size() const { return labels.size(); }
};

// codes[s][k]: code of image k under style s. Entry (i,j) is the mean over k of
// cos(codes[i][k], codes[j][k]).
inline SimilarityMatrix similarity_matrix(const std::vector<std::string>& labels,
                                          const std::vector<std::vector<StyleCode>>& codes) {
  if (codes.size() != labels.size()) throw std::invalid_argument("similarity_matrix: label count mismatch");
  if (codes.empty() || codes[0].empty()) throw std::invalid_argument("similarity_matrix: no codes");
  const std::size_t s = codes.size(), n = codes[0].size();
  for (const auto& c : codes) {
    if (c.size() != n) throw std::invalid_argument("similarity_matrix: ragged code sets");
  }
  SimilarityMatrix m{labels, std::vector<std::vector<double>>(s, std::vector<double>(s, 0.0))};
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i; j < s; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < n; ++k) acc += cosine_similarity(codes[i][k], codes[j][k]);
      m.values[i][j] = m.values[j][i] = acc / static_cast<double>(n);
    }
  }
  return m;
}

template <StyleTransferModel M>
SimilarityMatrix cross_style_matrix(const M& model, const std::vector<Image>& test_imgs,
                                    const std::vector<TransformSpec>& specs) {
  if (test_imgs.empty()) throw std::invalid_argument("cross_style_matrix: no images");
  if (specs.size() < 2) throw std::invalid_argument("cross_style_matrix: need at least 2 styles");
  std::vector<std::string> labels;
  std::vector<std::vector<StyleCode>> codes;
  for (const auto& spec : specs) {
    labels.push_back(spec.to_string());
    codes.push_back(encode_styles(model, apply_transform_all(spec, test_imgs)));
  }
  return similarity_matrix(labels, codes);
}

struct SimilarityStats {
  double mean = 0;
  double stddev = 0;
  std::size_t pairs = 0;
};

// Mean and (population) standard deviation of cosine similarity over unordered pairs.
inline SimilarityStats same_style_stats(const std::vector<StyleCode>& codes) {
  if (codes.size() < 2) throw std::invalid_argument("same_style_stats: need at least 2 images");
  std::vector<double> sims;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    for (std::size_t j = i + 1; j < codes.size(); ++j) sims.push_back(cosine_similarity(codes[i], codes[j]));
  }
  double mean = 0;
  for (double s : sims) mean += s;
  mean /= static_cast<double>(sims.size());
  double var = 0;
  for (double s : sims) var += (s - mean) * (s - mean);
  var /= static_cast<double>(sims.size());
  return {mean, std::sqrt(var), sims.size()};
}

template <StyleTransferModel M>
SimilarityStats same_style_stats(const M& model, const std::vector<Image>& test_imgs, const TransformSpec& spec) {
  if (test_imgs.size() < 2) throw std::invalid_argument("same_style_stats: need at least 2 images");
  return same_style_stats(encode_styles(model, apply_transform_all(spec, test_imgs)));
}

// ---- PCA ----

using DenseMatrix = std::vector<std::vector<double>>;

struct EigenResult {
  std::vector<double> values;   // descending
  DenseMatrix vectors;          // vectors[k] is the k-th eigenvector
};

// Cyclic Jacobi rotations for a small symmetric matrix.
inline EigenResult symmetric_eigen(DenseMatrix a, double tol = 1e-15, std::size_t max_sweeps = 100) {
  const std::size_t n = a.size();
  DenseMatrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0, scale = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) (i == j ? scale : off) += a[i][j] * a[i][j];
    }
    if (off <= tol * tol * std::max(scale, std::numeric_limits<double>::min())) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  EigenResult r;
  for (auto i : idx) {
    r.values.push_back(a[i][i]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
    r.vectors.push_back(std::move(col));
  }
  return r;
}

struct Point2D {
  double x = 0;
  double y = 0;
};

struct Embedding2D {
  std::vector<Point2D> points;
  std::vector<std::string> labels;
  StyleCode mean{};
  std::array<StyleCode, 2> components{};
  std::vector<double> eigenvalues;  // all of them, descending

  double explained_variance_ratio() const {
    double total = 0;
    for (double e : eigenvalues) total += std::max(e, 0.0);
    return total > 0 ? (eigenvalues[0] + eigenvalues[1]) / total : 0.0;
  }
};

inline Embedding2D pca_2d(const std::vector<StyleCode>& codes, std::vector<std::string> labels = {}) {
  if (codes.size() < 3) throw std::invalid_argument("pca_2d: need at least 3 codes");
  if (!labels.empty() && labels.size() != codes.size()) throw std::invalid_argument("pca_2d: label count mismatch");
  const std::size_t n = codes.size(), d = kStyleDim;
  Embedding2D e;
  for (const auto& c : codes) {
    for (std::size_t i = 0; i < d; ++i) e.mean[i] += c[i] / static_cast<double>(n);
  }
  DenseMatrix cov(d, std::vector<double>(d, 0.0));
  for (const auto& c : codes) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += (c[i] - e.mean[i]) * (c[j] - e.mean[j]);
    }
  }
  for (auto& row : cov) {
    for (auto& x : row) x /= static_cast<double>(n - 1);
  }
  const auto eig = symmetric_eigen(cov);
  const double top = std::max(eig.values[0], 0.0);
  if (!(top > 0) || eig.values[1] <= 1e-12 * top) throw std::invalid_argument("pca_2d: insufficient variance");
  e.eigenvalues = eig.values;
  for (std::size_t k = 0; k < 2; ++k) {
    auto v = eig.vectors[k];
    std::size_t big = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (std::abs(v[i]) > std::abs(v[big])) big = i;
    }
    const double sign = v[big] < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i) e.components[k][i] = sign * v[i];
  }
  for (const auto& c : codes) {
    Point2D p;
    for (std::size_t i = 0; i < d; ++i) {
      p.x += (c[i] - e.mean[i]) * e.components[0][i];
      p.y += (c[i] - e.mean[i]) * e.components[1][i];
    }
    e.points.push_back(p);
  }
  e.labels = labels.empty() ? std::vector<std::string>(n) : std::move(labels);
  return e;
}

// Maps a 2-D embedding point back into code space.
inline StyleCode pca_reconstruct(const Embedding2D& e, const Point2D& p) {
  StyleCode c = e.mean;
  for (std::size_t i = 0; i < kStyleDim; ++i) c[i] += p.x * e.components[0][i] + p.y * e.components[1][i];
  return c;
}

// ---- RBF support vector classifier ----

struct SvcOptions {
  double C = 1.0;
  double gamma = 0;  // 0 selects 1 / (2 * mean pairwise squared distance)
  double tol = 1e-6;
  std::size_t max_iter = 10'000'000;
};

struct SvcModel {
  std::vector<Point2D> points;
  std::vector<double> y;  // +1 / -1
  std::vector<double> alpha;
  std::string positive_label, negative_label;
  double rho = 0;
  double gamma = 0;
  double C = 1;
  std::size_t iterations = 0;

  double kernel(const Point2D& a, const Point2D& b) const {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return std::exp(-gamma * (dx * dx + dy * dy));
  }

  double decision(const Point2D& p) const {
    double f = -rho;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (alpha[i] != 0) f += alpha[i] * y[i] * kernel(points[i], p);
    }
    return f;
  }

  std::string predict(const Point2D& p) const { return decision(p) > 0 ? positive_label : negative_label; }
};

struct SvcResult {
  SvcModel model;
  double accuracy = 0;
  double kkt_residual = 0;  // largest violation of the optimality conditions
};

inline double rbf_gamma_heuristic(const std::vector<Point2D>& pts) {
  double acc = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
      acc += dx * dx + dy * dy;
      ++pairs;
    }
  }
  const double mean = pairs ? acc / static_cast<double>(pairs) : 0.0;
  return mean > 0 ? 1.0 / (2.0 * mean) : 1.0;
}

// Max over points of the complementary-slackness violation, plus any bound violation.
inline double svc_kkt_residual(const SvcModel& m) {
  double worst = 0;
  const double eps = 1e-9;
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    const double a = m.alpha[i];
    worst = std::max({worst, -a, a - m.C});
    const double margin = m.y[i] * m.decision(m.points[i]);
    if (a <= eps) worst = std::max(worst, 1 - margin);
    else if (a >= m.C - eps) worst = std::max(worst, margin - 1);
    else worst = std::max(worst, std::abs(margin - 1));
  }
  double balance = 0;
  for (std::size_t i = 0; i < m.points.size(); ++i) balance += m.alpha[i] * m.y[i];
  return std::max(worst, std::abs(balance));
}

// Dual solver with second-order working-set selection.
inline SvcResult svc_discriminate(const Embedding2D& emb, const SvcOptions& opt = {}) {
  const std::size_t n = emb.points.size();
  if (emb.labels.size() != n) throw std::invalid_argument("svc_discriminate: label count mismatch");
  std::vector<std::string> classes;
  for (const auto& l : emb.labels) {
    if (std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
  }
  if (classes.size() < 2) throw std::invalid_argument("svc_discriminate: single-class input");
  if (classes.size() > 2) throw std::invalid_argument("svc_discriminate: more than two classes");

  SvcModel m;
  m.points = emb.points;
  m.positive_label = classes[0];
  m.negative_label = classes[1];
  m.C = opt.C;
  m.gamma = opt.gamma > 0 ? opt.gamma : rbf_gamma_heuristic(emb.points);
  for (const auto& l : emb.labels) m.y.push_back(l == m.positive_label ? 1.0 : -1.0);
  m.alpha.assign(n, 0.0);

  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) K[i * n + j] = m.kernel(m.points[i], m.points[j]);
  }
  const auto& y = m.y;
  auto& a = m.alpha;
  const double C = m.C;
  std::vector<double> G(n, -1.0);  // gradient of 0.5 a'Qa - e'a
  auto in_up = [&](std::size_t t) { return (y[t] > 0 && a[t] < C) || (y[t] < 0 && a[t] > 0); };
  auto in_low = [&](std::size_t t) { return (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < C); };
  const double tau = 1e-12;

  std::size_t iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * G[t] >= gmax) {
        gmax = -y[t] * G[t];
        i = t;
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * G[t];
      gmin = std::min(gmin, v);
      if (i == n) continue;
      const double b = gmax - v;
      if (b > 0) {
        double quad = K[i * n + i] + K[t * n + t] - 2 * K[i * n + t];
        if (quad <= 0) quad = tau;
        const double obj = -(b * b) / quad;
        if (obj <= best) {
          best = obj;
          j = t;
        }
      }
    }
    if (i == n || j == n || gmax - gmin < opt.tol) break;

    const double ai = a[i], aj = a[j];
    const double Qij = y[i] * y[j] * K[i * n + j];
    if (y[i] != y[j]) {
      double quad = K[i * n + i] + K[j * n + j] + 2 * Qij;
      if (quad <= 0) quad = tau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) { a[j] = 0; a[i] = diff; }
      } else if (a[i] < 0) {
        a[i] = 0;
        a[j] = -diff;
      }
      if (diff > 0) {
        if (a[i] > C) { a[i] = C; a[j] = C - diff; }
      } else if (a[j] > C) {
        a[j] = C;
        a[i] = C + diff;
      }
    } else {
      double quad = K[i * n + i] + K[j * n + j] - 2 * Qij;
      if (quad <= 0) quad = tau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) { a[i] = C; a[j] = sum - C; }
        if (a[j] > C) { a[j] = C; a[i] = sum - C; }
      } else {
        if (a[j] < 0) { a[j] = 0; a[i] = sum; }
        if (a[i] < 0) { a[i] = 0; a[j] = sum; }
      }
    }
    const double di = a[i] - ai, dj = a[j] - aj;
    for (std::size_t t = 0; t < n; ++t) {
      G[t] += y[t] * (y[i] * K[i * n + t] * di + y[j] * K[j * n + t] * dj);
    }
  }
  m.iterations = iter;

  // Bias from free vectors; midpoint of the feasible interval otherwise.
  double sum_free = 0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (a[t] > 0 && a[t] < C) {
      sum_free += yg;
      ++n_free;
    } else if ((a[t] >= C && y[t] < 0) || (a[t] <= 0 && y[t] > 0)) {
      ub = std::min(ub, yg);
    } else {
      lb = std::max(lb, yg);
    }
  }
  m.rho = n_free ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2;

  SvcResult r;
  std::size_t correct = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if ((m.decision(m.points[t]) > 0 ? 1.0 : -1.0) == y[t]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  r.kkt_residual = svc_kkt_residual(m);
  r.model = std::move(m);
  return r;
}

struct RasterBounds {
  double x0, x1, y0, y1;
};

inline RasterBounds embedding_bounds(const std::vector<Point2D>& pts, double margin = 0.1) {
  RasterBounds b{pts.at(0).x, pts[0].x, pts[0].y, pts[0].y};
  for (const auto& p : pts) {
    b.x0 = std::min(b.x0, p.x);
    b.x1 = std::max(b.x1, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.y1 = std::max(b.y1, p.y);
  }
  const double mx = std::max(b.x1 - b.x0, 1e-9) * margin, my = std::max(b.y1 - b.y0, 1e-9) * margin;
  return {b.x0 - mx, b.x1 + mx, b.y0 - my, b.y1 + my};
}

// Decision regions (positive 255, negative 0) with training points drawn at 96 / 160.
inline Image decision_raster(const SvcModel& m, std::size_t size = 256) {
  const auto b = embedding_bounds(m.points);
  std::vector<double> px(size * size);
  auto to_x = [&](std::size_t c) { return b.x0 + (b.x1 - b.x0) * (static_cast<double>(c) + 0.5) / static_cast<double>(size); };
  auto to_y = [&](std::size_t r) { return b.y1 - (b.y1 - b.y0) * (static_cast<double>(r) + 0.5) / static_cast<double>(size); };
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) px[r * size + c] = m.decision({to_x(c), to_y(r)}) > 0 ? 255.0 : 0.0;
  }
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    const auto c = static_cast<long>((m.points[i].x - b.x0) / (b.x1 - b.x0) * static_cast<double>(size));
    const auto r = static_cast<long>((b.y1 - m.points[i].y) / (b.y1 - b.y0) * static_cast<double>(size));
    for (long dr = -1; dr <= 1; ++dr) {
      for (long dc = -1; dc <= 1; ++dc) {
        const long rr = r + dr, cc = c + dc;
        if (rr >= 0 && cc >= 0 && rr < static_cast<long>(size) && cc < static_cast<long>(size)) {
          px[static_cast<std::size_t>(rr) * size + static_cast<std::size_t>(cc)] = m.y[i] > 0 ? 160.0 : 96.0;
        }
      }
    }
  }
  return Image(size, size, std::move(px));
}

}  // namespace stylemapper
