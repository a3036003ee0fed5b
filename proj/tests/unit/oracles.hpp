#pragma once

// Independent brute-force reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "stylemapper/inference.hpp"
#include "stylemapper/transforms.hpp"

namespace oracles {

using namespace stylemapper;

// Direct per-pixel formulas, written independently of the library.
inline double oracle_pointwise(const TransformSpec& spec, double v, double img_max) {
  switch (spec.family) {
    case Family::Linear: {
      const auto p = std::get<params::Linear>(spec.params);
      return p.slope * v + p.intercept;
    }
    case Family::Negative: {
      const auto p = std::get<params::Negative>(spec.params);
      return p.slope * v + p.intercept;
    }
    case Family::Log: {
      const auto p = std::get<params::Log>(spec.params);
      return p.scale * (255.0 / std::log(1.0 + img_max)) * std::log(1.0 + v);
    }
    case Family::PowerLaw: return 255.0 * std::pow(v / 255.0, std::get<params::PowerLaw>(spec.params).gamma);
    case Family::PiecewiseLinear: {
      const auto p = std::get<params::PiecewiseLinear>(spec.params);
      if (v < p.r1) return v * p.s1 / p.r1;
      if (v < p.r2) return p.s1 + (v - p.r1) * (p.s2 - p.s1) / (p.r2 - p.r1);
      return p.s2 + (v - p.r2) * (255.0 - p.s2) / (255.0 - p.r2);
    }
    case Family::Exp: {
      const auto p = std::get<params::Exp>(spec.params);
      return p.a * std::exp(p.b * v);
    }
    default: throw std::logic_error("not pointwise");
  }
}

// Nested-loop 2-D convolution (kernel flipped), zero padding.
inline std::vector<double> oracle_convolve(const Image& img, const std::array<std::array<double, 3>, 3>& k) {
  const long w = static_cast<long>(img.width()), h = static_cast<long>(img.height());
  std::vector<double> out(img.size(), 0.0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0;
      for (long i = -1; i <= 1; ++i) {
        for (long j = -1; j <= 1; ++j) {
          const long sy = y - i, sx = x - j;
          if (sy < 0 || sx < 0 || sy >= h || sx >= w) continue;
          acc += k[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j + 1)] *
                 img.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy));
        }
      }
      out[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  return out;
}

inline std::vector<double> oracle_normalize(const std::vector<double>& raw) {
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  if (*lo >= 0 && *hi <= 255) return raw;
  std::vector<double> out(raw.size(), 0.0);
  if (*hi == *lo) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - *lo) * 255.0 / (*hi - *lo);
  return out;
}

inline std::vector<double> oracle_apply(const TransformSpec& spec, const Image& img) {
  if (spec.family == Family::SobelX) return oracle_normalize(oracle_convolve(img, {{{1, 0, -1}, {2, 0, -2}, {1, 0, -1}}}));
  if (spec.family == Family::SobelY) return oracle_normalize(oracle_convolve(img, {{{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}}}));
  const double mx = *std::max_element(img.pixels().begin(), img.pixels().end());
  std::vector<double> raw;
  for (double v : img.pixels()) raw.push_back(oracle_pointwise(spec, v, mx));
  return oracle_normalize(raw);
}

// Quadratic-time representative code: argmin_i sum_j mean|c_i - c_j|, no shortcuts.
inline std::size_t brute_force_representative(const std::vector<StyleCode>& codes) {
  std::size_t best = 0;
  double best_total = 1e300;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    double total = 0;
    for (std::size_t j = 0; j < codes.size(); ++j) {
      double d = 0;
      for (std::size_t k = 0; k < kStyleDim; ++k) d += std::abs(codes[i][k] - codes[j][k]);
      total += d / kStyleDim;
    }
    if (total < best_total) {
      best_total = total;
      best = i;
    }
  }
  return best;
}

}  // namespace oracles
