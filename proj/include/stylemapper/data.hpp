#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemapper/image.hpp"

namespace stylemapper {

// Clamps the top 1% of the pooled corpus intensities to 255 and linearly rescales the
// rest so the corpus minimum maps to 0. The threshold is the value at 1-based rank
// ceil(0.99 n) of the ascending pooled pixel list.
inline std::vector<Image> preprocess_corpus(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("empty corpus");
  std::vector<double> pooled;
  for (const auto& img : images) pooled.insert(pooled.end(), img.pixels().begin(), img.pixels().end());
  if (pooled.empty()) throw std::invalid_argument("empty corpus");

  const auto n = pooled.size();
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
  const auto idx = std::clamp<std::size_t>(rank, 1, n) - 1;
  std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(idx), pooled.end());
  const double threshold = pooled[idx];
  const double lo = *std::min_element(pooled.begin(), pooled.end());
  if (!(threshold > lo)) throw std::invalid_argument("degenerate intensity range");

  std::vector<Image> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    std::vector<double> px(img.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double v = img.pixels()[i];
      px[i] = v >= threshold ? kMaxIntensity : std::clamp((v - lo) / (threshold - lo) * kMaxIntensity, 0.0, kMaxIntensity);
    }
    out.emplace_back(img.width(), img.height(), std::move(px));
  }
  return out;
}

// Raw (unbounded, non-negative) variant used to ingest arbitrary intensity data before
// preprocessing. Values are not range-checked against 255.
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;
};

inline std::vector<Image> preprocess_corpus(const std::vector<RawImage>& raw) {
  if (raw.empty()) throw std::invalid_argument("empty corpus");
  double hi = 0.0;
  for (const auto& r : raw) {
    if (r.pixels.size() != r.width * r.height) throw std::invalid_argument("raw image size mismatch");
    for (double p : r.pixels) {
      if (!std::isfinite(p) || p < 0.0) throw std::invalid_argument("raw intensities must be finite and non-negative");
      hi = std::max(hi, p);
    }
  }
  // Preprocessing is invariant under positive scaling, so squeeze into [0, 255] first.
  const double s = hi > kMaxIntensity ? kMaxIntensity / hi : 1.0;
  std::vector<Image> scaled;
  scaled.reserve(raw.size());
  for (const auto& r : raw) {
    std::vector<double> px(r.pixels);
    for (auto& p : px) p = std::min(p * s, kMaxIntensity);
    scaled.emplace_back(r.width, r.height, std::move(px));
  }
  return preprocess_corpus(scaled);
}

// Synthetic anatomy-like phantom: a soft-edged elliptical body on a dark background
// holding smooth blobs of varying brightness, plus low-amplitude smooth texture.
inline Image generate_phantom(std::uint64_t seed, std::size_t size) {
  if (size < 16) throw std::invalid_argument("phantom size must be at least 16");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double n = static_cast<double>(size);

  struct Blob {
    double cx, cy, rx, ry, angle, level;
  };
  const double body_rx = 0.30 + 0.12 * u(rng);
  const double body_ry = 0.30 + 0.12 * u(rng);
  const double body_cx = 0.5 + 0.06 * (u(rng) - 0.5);
  const double body_cy = 0.5 + 0.06 * (u(rng) - 0.5);
  const double body_level = 0.25 + 0.25 * u(rng);

  const int blob_count = 3 + static_cast<int>(u(rng) * 5.0);
  std::vector<Blob> blobs;
  for (int b = 0; b < blob_count; ++b) {
    const double r = 0.6 * std::sqrt(u(rng));
    const double t = 2.0 * M_PI * u(rng);
    blobs.push_back({body_cx + r * body_rx * std::cos(t), body_cy + r * body_ry * std::sin(t), 0.04 + 0.12 * u(rng),
                     0.04 + 0.12 * u(rng), M_PI * u(rng), -0.2 + 0.9 * u(rng)});
  }
  // Guarantee one bright structure so the histogram has a real upper tail.
  blobs[0].level = 0.8;

  std::array<double, 6> wave{};
  for (auto& w : wave) w = u(rng);

  std::vector<double> px(size * size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) / n;
      const double fy = (static_cast<double>(y) + 0.5) / n;
      const double bx = (fx - body_cx) / body_rx;
      const double by = (fy - body_cy) / body_ry;
      const double body = 1.0 / (1.0 + std::exp((std::sqrt(bx * bx + by * by) - 1.0) * 25.0));
      double v = body * body_level;
      for (const auto& bl : blobs) {
        const double dx = fx - bl.cx;
        const double dy = fy - bl.cy;
        const double ca = std::cos(bl.angle);
        const double sa = std::sin(bl.angle);
        const double ex = (ca * dx + sa * dy) / bl.rx;
        const double ey = (-sa * dx + ca * dy) / bl.ry;
        v += body * bl.level * std::exp(-0.5 * (ex * ex + ey * ey) * 2.5);
      }
      v += body * 0.04 * std::sin(2.0 * M_PI * (3.0 + 4.0 * wave[0]) * fx + 6.0 * wave[1]) *
           std::sin(2.0 * M_PI * (3.0 + 4.0 * wave[2]) * fy + 6.0 * wave[3]);
      px[y * size + x] = std::max(v, 0.0);
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(px.begin(), px.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  for (auto& p : px) p = (p - lo) / (hi - lo) * kMaxIntensity;
  return Image(size, size, std::move(px));
}

inline std::vector<Image> generate_phantoms(std::uint64_t seed, std::size_t count, std::size_t size) {
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_phantom(seed * 1000003ULL + i, size));
  return out;
}

struct SplitRatios {
  double train = 528.0 / 628.0;
  double validation = 50.0 / 628.0;
  double test = 50.0 / 628.0;
};

struct Dataset {
  std::vector<Image> train;
  std::vector<Image> validation;
  std::vector<Image> test;
  // Index into the source list for every member of each split.
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> validation_ids;
  std::vector<std::size_t> test_ids;
  std::uint64_t seed = 0;
};

// Seeded shuffle followed by a contiguous partition. Validation and test sizes are
// round(ratio * n); training receives the remainder.
inline Dataset split_dataset(const std::vector<Image>& images, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
  const auto n = images.size();
  const auto n_val = static_cast<std::size_t>(std::llround(ratios.validation * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(n)));
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
    throw std::invalid_argument("split_dataset: every split must be non-empty (have " + std::to_string(n) + " images)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order does not depend on std::shuffle internals.
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  Dataset ds;
  ds.seed = seed;
  const auto n_train = n - n_val - n_test;
  for (std::size_t k = 0; k < n; ++k) {
    const auto id = order[k];
    if (k < n_train) {
      ds.train.push_back(images[id]);
      ds.train_ids.push_back(id);
    } else if (k < n_train + n_val) {
      ds.validation.push_back(images[id]);
      ds.validation_ids.push_back(id);
    } else {
      ds.test.push_back(images[id]);
      ds.test_ids.push_back(id);
    }
  }
  return ds;
}

// Line-oriented manifest: `path<TAB>split`, split in {train, validation, test}.
struct ManifestEntry {
  std::string path;
  std::string split;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing tab");
    ManifestEntry e{line.substr(0, tab), line.substr(tab + 1)};
    if (e.split != "train" && e.split != "validation" && e.split != "test") {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown split '" + e.split + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  for (const auto& e : entries) out << e.path << '\t' << e.split << '\n';
}

}  // namespace stylemapper
