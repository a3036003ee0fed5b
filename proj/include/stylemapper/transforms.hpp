#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stylemapper/image.hpp"

namespace stylemapper {

enum class Family { Linear, Negative, Log, PowerLaw, PiecewiseLinear, SobelX, SobelY, Exp };

// The seven families used to simulate training styles; Exp is evaluation-only.
inline constexpr std::array<Family, 7> kTrainingFamilies = {Family::Linear,          Family::Negative, Family::Log,
                                                            Family::PowerLaw,        Family::PiecewiseLinear,
                                                            Family::SobelX,          Family::SobelY};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::Linear: return "linear";
    case Family::Negative: return "negative";
    case Family::Log: return "log";
    case Family::PowerLaw: return "powerlaw";
    case Family::PiecewiseLinear: return "piecewise";
    case Family::SobelX: return "sobelx";
    case Family::SobelY: return "sobely";
    case Family::Exp: return "exp";
  }
  return "?";
}

inline Family parse_family(std::string_view name) {
  for (auto f : {Family::Linear, Family::Negative, Family::Log, Family::PowerLaw, Family::PiecewiseLinear,
                 Family::SobelX, Family::SobelY, Family::Exp}) {
    if (family_name(f) == name) return f;
  }
  if (name == "gamma" || name == "power") return Family::PowerLaw;
  if (name == "pw" || name == "piecewise-linear") return Family::PiecewiseLinear;
  throw std::invalid_argument("unknown transform family '" + std::string(name) + "'");
}

inline bool is_invertible(Family f) {
  return f == Family::Linear || f == Family::Negative || f == Family::Log || f == Family::PowerLaw ||
         f == Family::PiecewiseLinear;
}

namespace params {
struct Linear {
  double slope = 1.0;
  double intercept = 0.0;
};
struct Negative {
  double slope = -1.0;
  double intercept = 255.0;
};
// Multiplier on the per-image log scale constant.
struct Log {
  double scale = 1.0;
};
struct PowerLaw {
  double gamma = 0.5;
};
struct PiecewiseLinear {
  double r1 = 75, r2 = 150, s1 = 55, s2 = 225;
};
struct None {};
struct Exp {
  double a = 2.3;
  double b = 0.02;
};
}  // namespace params

using TransformParams = std::variant<params::Linear, params::Negative, params::Log, params::PowerLaw,
                                     params::PiecewiseLinear, params::None, params::Exp>;

// One simulated style: a family plus its sampled or fixed parameters.
struct TransformSpec {
  Family family = Family::Linear;
  TransformParams params = params::Linear{};

  static TransformSpec linear(double m, double b) { return {Family::Linear, params::Linear{m, b}}; }
  static TransformSpec negative(double m, double b) { return {Family::Negative, params::Negative{m, b}}; }
  static TransformSpec log(double a) { return {Family::Log, params::Log{a}}; }
  static TransformSpec power_law(double gamma) { return {Family::PowerLaw, params::PowerLaw{gamma}}; }
  static TransformSpec piecewise(double r1, double r2, double s1, double s2) {
    return {Family::PiecewiseLinear, params::PiecewiseLinear{r1, r2, s1, s2}};
  }
  static TransformSpec sobel_x() { return {Family::SobelX, params::None{}}; }
  static TransformSpec sobel_y() { return {Family::SobelY, params::None{}}; }
  static TransformSpec exp(double a, double b) { return {Family::Exp, params::Exp{a, b}}; }

  void validate() const {
    switch (family) {
      case Family::Log:
        if (!(std::get<params::Log>(params).scale > 0)) throw std::invalid_argument("log scale factor must be > 0");
        break;
      case Family::PowerLaw:
        if (!(std::get<params::PowerLaw>(params).gamma > 0)) throw std::invalid_argument("gamma must be > 0");
        break;
      case Family::PiecewiseLinear: {
        const auto& p = std::get<params::PiecewiseLinear>(params);
        if (!(0 < p.r1 && p.r1 < p.r2 && p.r2 < kMaxIntensity && 0 < p.s1 && p.s1 < p.s2 && p.s2 < kMaxIntensity)) {
          throw std::invalid_argument("piecewise breakpoints must satisfy 0 < r1 < r2 < 255 and 0 < s1 < s2 < 255");
        }
        break;
      }
      case Family::Linear:
        std::get<params::Linear>(params);
        break;
      case Family::Negative:
        std::get<params::Negative>(params);
        break;
      case Family::Exp:
        std::get<params::Exp>(params);
        break;
      case Family::SobelX:
      case Family::SobelY:
        std::get<params::None>(params);
        break;
    }
  }

  // Text form, e.g. "powerlaw gamma=0.5"; round-trips through parse().
  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    os << family_name(family);
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, params::Linear> || std::is_same_v<P, params::Negative>) {
            os << " slope=" << p.slope << " intercept=" << p.intercept;
          } else if constexpr (std::is_same_v<P, params::Log>) {
            os << " scale=" << p.scale;
          } else if constexpr (std::is_same_v<P, params::PowerLaw>) {
            os << " gamma=" << p.gamma;
          } else if constexpr (std::is_same_v<P, params::PiecewiseLinear>) {
            os << " r1=" << p.r1 << " r2=" << p.r2 << " s1=" << p.s1 << " s2=" << p.s2;
          } else if constexpr (std::is_same_v<P, params::Exp>) {
            os << " a=" << p.a << " b=" << p.b;
          }
        },
        params);
    return os.str();
  }

  friend bool operator==(const TransformSpec& a, const TransformSpec& b) { return a.to_string() == b.to_string(); }
};

// Parameters of the fixed (mean-of-distribution) variant of each training family.
inline TransformSpec fixed_transform(Family f) {
  switch (f) {
    case Family::Linear: return TransformSpec::linear(1.0, 0.0);
    case Family::Negative: return TransformSpec::negative(-1.0, 255.0);
    case Family::Log: return TransformSpec::log(1.0);
    case Family::PowerLaw: return TransformSpec::power_law(0.5);
    case Family::PiecewiseLinear: return TransformSpec::piecewise(75, 150, 55, 225);
    case Family::SobelX: return TransformSpec::sobel_x();
    case Family::SobelY: return TransformSpec::sobel_y();
    case Family::Exp: break;
  }
  throw std::invalid_argument("exp has no fixed setting; construct it explicitly");
}

// Draws parameters for `f` from its training distribution. Sobel families carry none.
template <class Rng>
TransformSpec sample_transform(Family f, Rng& rng) {
  using U = std::uniform_real_distribution<double>;
  constexpr double pi = std::numbers::pi;
  switch (f) {
    case Family::Linear: {
      const double theta = U(pi / 8, 3 * pi / 8)(rng);
      const double b = U(-20, 20)(rng);
      return TransformSpec::linear(std::tan(theta), b);
    }
    case Family::Negative: {
      const double theta = U(-3 * pi / 8, -pi / 8)(rng);
      const double b = U(235, 275)(rng);
      return TransformSpec::negative(std::tan(theta), b);
    }
    case Family::Log: return TransformSpec::log(U(0.7, 1.3)(rng));
    case Family::PowerLaw: return TransformSpec::power_law(std::exp2(U(-5, 5)(rng)));
    case Family::PiecewiseLinear: {
      const double r1 = U(55, 95)(rng);
      const double r2 = U(130, 170)(rng);
      const double s1 = U(35, 75)(rng);
      const double s2 = U(205, 245)(rng);
      return TransformSpec::piecewise(r1, r2, s1, s2);
    }
    case Family::SobelX: return TransformSpec::sobel_x();
    case Family::SobelY: return TransformSpec::sobel_y();
    case Family::Exp: break;
  }
  throw std::invalid_argument("exp is not a training family");
}

template <class Rng>
Family sample_family(const std::vector<Family>& pool, Rng& rng) {
  if (pool.empty()) throw std::invalid_argument("empty transform family pool");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

// Uniform family among the seven training families, then its parameters.
template <class Rng>
TransformSpec sample_random_transform(Rng& rng) {
  const std::vector<Family> pool(kTrainingFamilies.begin(), kTrainingFamilies.end());
  return sample_transform(sample_family(pool, rng), rng);
}

inline constexpr std::array<std::array<double, 3>, 3> kSobelX = {{{1, 0, -1}, {2, 0, -2}, {1, 0, -1}}};
inline constexpr std::array<std::array<double, 3>, 3> kSobelY = {{{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}}};

// Same-size linear convolution (kernel flipped) with zero padding.
inline RawField convolve3x3(const Image& img, const std::array<std::array<double, 3>, 3>& kernel) {
  const auto w = static_cast<long>(img.width());
  const auto h = static_cast<long>(img.height());
  RawField out{img.width(), img.height(), std::vector<double>(img.size(), 0.0)};
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -1; i <= 1; ++i) {
        for (long j = -1; j <= 1; ++j) {
          const long sy = y - i;
          const long sx = x - j;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
          acc += kernel[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j + 1)] *
                 img.pixels()[static_cast<std::size_t>(sy * w + sx)];
        }
      }
      out.values[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  return out;
}

// Records what apply_transform did so the pointwise families can be inverted exactly.
struct TransformTrace {
  double log_scale = 255.0 / std::log(256.0);  // c_log used by the Log family
  bool rescaled = false;
  double raw_min = 0.0;
  double raw_max = kMaxIntensity;
};

// Leaves in-range data untouched; otherwise min-max rescales to [0, 255]. Constant
// out-of-range data maps to all zeros.
inline Image normalize_to_range(const RawField& raw, TransformTrace* trace = nullptr) {
  for (double v : raw.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("normalize_to_range: non-finite value");
  }
  const auto [lo_it, hi_it] = std::minmax_element(raw.values.begin(), raw.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo >= 0.0 && hi <= kMaxIntensity) {
    if (trace) trace->rescaled = false;
    return Image(raw.width, raw.height, raw.values);
  }
  if (trace) {
    trace->rescaled = true;
    trace->raw_min = lo;
    trace->raw_max = hi;
  }
  std::vector<double> px(raw.values.size(), 0.0);
  if (hi > lo) {
    for (std::size_t i = 0; i < px.size(); ++i) {
      px[i] = std::clamp((raw.values[i] - lo) / (hi - lo) * kMaxIntensity, 0.0, kMaxIntensity);
    }
  }
  return Image(raw.width, raw.height, std::move(px));
}

inline double piecewise_forward(const params::PiecewiseLinear& p, double v) {
  if (v <= p.r1) return p.s1 / p.r1 * v;
  if (v <= p.r2) return (p.s2 - p.s1) / (p.r2 - p.r1) * (v - p.r1) + p.s1;
  return (kMaxIntensity - p.s2) / (kMaxIntensity - p.r2) * (v - p.r2) + p.s2;
}

inline double piecewise_inverse(const params::PiecewiseLinear& p, double v) {
  if (v <= p.s1) return p.r1 / p.s1 * v;
  if (v <= p.s2) return (p.r2 - p.r1) / (p.s2 - p.s1) * (v - p.s1) + p.r1;
  return (kMaxIntensity - p.r2) / (kMaxIntensity - p.s2) * (v - p.s2) + p.r2;
}

// Family formula without range normalization.
inline RawField apply_transform_raw(const TransformSpec& spec, const Image& img, TransformTrace* trace = nullptr) {
  spec.validate();
  if (spec.family == Family::SobelX) return convolve3x3(img, kSobelX);
  if (spec.family == Family::SobelY) return convolve3x3(img, kSobelY);

  RawField out{img.width(), img.height(), img.pixels()};
  auto map = [&](auto&& fn) {
    for (auto& v : out.values) v = fn(v);
  };
  switch (spec.family) {
    case Family::Linear: {
      const auto p = std::get<params::Linear>(spec.params);
      map([&](double v) { return p.slope * v + p.intercept; });
      break;
    }
    case Family::Negative: {
      const auto p = std::get<params::Negative>(spec.params);
      map([&](double v) { return p.slope * v + p.intercept; });
      break;
    }
    case Family::Log: {
      const auto p = std::get<params::Log>(spec.params);
      const double img_max = *std::max_element(img.pixels().begin(), img.pixels().end());
      if (!(img_max > 0.0)) throw std::invalid_argument("log scale undefined");
      const double c = kMaxIntensity / std::log1p(img_max);
      if (trace) trace->log_scale = c;
      map([&](double v) { return p.scale * c * std::log1p(v); });
      break;
    }
    case Family::PowerLaw: {
      const auto p = std::get<params::PowerLaw>(spec.params);
      map([&](double v) { return kMaxIntensity * std::pow(v / kMaxIntensity, p.gamma); });
      break;
    }
    case Family::PiecewiseLinear: {
      const auto p = std::get<params::PiecewiseLinear>(spec.params);
      map([&](double v) { return piecewise_forward(p, v); });
      break;
    }
    case Family::Exp: {
      const auto p = std::get<params::Exp>(spec.params);
      map([&](double v) { return p.a * std::exp(p.b * v); });
      break;
    }
    default: break;
  }
  return out;
}

inline Image apply_transform(const TransformSpec& spec, const Image& img, TransformTrace* trace = nullptr) {
  return normalize_to_range(apply_transform_raw(spec, img, trace), trace);
}

// Analytic inverse of the five pointwise families. Without a trace the forward pass is
// assumed to have stayed in range and, for Log, the source image maximum is taken as 255.
inline Image invert_transform(const TransformSpec& spec, const Image& out, const TransformTrace& trace = {}) {
  if (!is_invertible(spec.family)) throw std::invalid_argument("non-invertible in this artifact");
  spec.validate();
  std::vector<double> px(out.pixels());
  for (auto& v : px) {
    if (trace.rescaled) v = trace.raw_min + v / kMaxIntensity * (trace.raw_max - trace.raw_min);
    switch (spec.family) {
      case Family::Linear: {
        const auto p = std::get<params::Linear>(spec.params);
        v = (v - p.intercept) / p.slope;
        break;
      }
      case Family::Negative: {
        const auto p = std::get<params::Negative>(spec.params);
        v = (v - p.intercept) / p.slope;
        break;
      }
      case Family::Log: {
        const auto p = std::get<params::Log>(spec.params);
        v = std::expm1(v / (p.scale * trace.log_scale));
        break;
      }
      case Family::PowerLaw: {
        const auto p = std::get<params::PowerLaw>(spec.params);
        v = kMaxIntensity * std::pow(std::max(v, 0.0) / kMaxIntensity, 1.0 / p.gamma);
        break;
      }
      case Family::PiecewiseLinear: v = piecewise_inverse(std::get<params::PiecewiseLinear>(spec.params), v); break;
      default: break;
    }
    v = std::clamp(v, 0.0, kMaxIntensity);
  }
  return Image(out.width(), out.height(), std::move(px));
}

// Inverse of TransformSpec::to_string.
inline TransformSpec parse_transform_spec(const std::string& text) {
  std::istringstream in(text);
  std::string name;
  in >> name;
  const Family f = parse_family(name);
  TransformSpec spec = f == Family::Exp ? TransformSpec::exp(2.3, 0.02) : fixed_transform(f);
  std::string kv;
  while (in >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad transform parameter '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const double val = std::stod(kv.substr(eq + 1));
    bool known = false;
    std::visit(
        [&](auto& p) {
          using P = std::decay_t<decltype(p)>;
          auto set = [&](const char* k, double& field) {
            if (key == k) {
              field = val;
              known = true;
            }
          };
          if constexpr (std::is_same_v<P, params::Linear> || std::is_same_v<P, params::Negative>) {
            set("slope", p.slope);
            set("intercept", p.intercept);
          } else if constexpr (std::is_same_v<P, params::Log>) {
            set("scale", p.scale);
          } else if constexpr (std::is_same_v<P, params::PowerLaw>) {
            set("gamma", p.gamma);
          } else if constexpr (std::is_same_v<P, params::PiecewiseLinear>) {
            set("r1", p.r1);
            set("r2", p.r2);
            set("s1", p.s1);
            set("s2", p.s2);
          } else if constexpr (std::is_same_v<P, params::Exp>) {
            set("a", p.a);
            set("b", p.b);
          }
        },
        spec.params);
    if (!known) throw std::invalid_argument("unknown parameter '" + key + "' for family " + name);
  }
  spec.validate();
  return spec;
}

}  // namespace stylemapper
