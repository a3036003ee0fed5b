#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

namespace stylemapper {

inline constexpr double kMaxIntensity = 255.0;
inline constexpr std::size_t kMinImageSide = 8;

// Grayscale raster with intensities in [0, 255], stored row-major.
class Image {
 public:
  Image() = default;

  Image(std::size_t width, std::size_t height, double fill = 0.0)
      : Image(width, height, std::vector<double>(width * height, fill)) {}

  Image(std::size_t width, std::size_t height, std::vector<double> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width_ < kMinImageSide || height_ < kMinImageSide) {
      throw std::invalid_argument("image must be at least 8x8, got " + std::to_string(width_) + "x" +
                                  std::to_string(height_));
    }
    if (pixels_.size() != width_ * height_) {
      throw std::invalid_argument("pixel count does not match image dimensions");
    }
    for (double p : pixels_) {
      if (!(p >= 0.0 && p <= kMaxIntensity)) {
        throw std::invalid_argument("pixel value outside [0, 255]: " + std::to_string(p));
      }
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
  const std::vector<double>& pixels() const { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> pixels_;
};

// Unconstrained 2-D float field, used for transform outputs before range normalization.
struct RawField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
};

// Mean absolute error in [0, 1] pixel units.
inline double mean_abs_error(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("mean_abs_error: image shapes differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.pixels()[i] - b.pixels()[i]);
  return acc / (static_cast<double>(a.size()) * kMaxIntensity);
}

// Pooled MAE over two equally long image lists, [0, 1] units.
inline double mean_abs_error(const std::vector<Image>& a, const std::vector<Image>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("mean_abs_error: list sizes differ or empty");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    acc += mean_abs_error(a[k], b[k]) * static_cast<double>(a[k].size());
    n += a[k].size();
  }
  return acc / static_cast<double>(n);
}

namespace io {

namespace detail {

inline std::string read_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

inline Image from_bytes(std::size_t w, std::size_t h, const std::vector<std::uint8_t>& bytes) {
  std::vector<double> px(bytes.begin(), bytes.end());
  return Image(w, h, std::move(px));
}

}  // namespace detail

// Binary PGM (P5), maxval up to 255.
inline Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (detail::read_token(in) != "P5") throw std::runtime_error(path + ": not a binary PGM (P5)");
  const auto w = std::stoul(detail::read_token(in));
  const auto h = std::stoul(detail::read_token(in));
  const auto maxval = std::stoul(detail::read_token(in));
  if (maxval == 0 || maxval > 255) throw std::runtime_error(path + ": only 8-bit PGM is supported");
  std::vector<std::uint8_t> bytes(w * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw std::runtime_error(path + ": truncated pixel data");
  if (maxval != 255) {
    for (auto& b : bytes) b = static_cast<std::uint8_t>(std::lround(b * 255.0 / static_cast<double>(maxval)));
  }
  return detail::from_bytes(w, h, bytes);
}

inline std::vector<std::uint8_t> quantize(const Image& img) {
  std::vector<std::uint8_t> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(img.pixels()[i]), 0L, 255L));
  }
  return out;
}

inline void write_pgm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  const auto bytes = quantize(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Any PNG libpng understands, converted to 8-bit gray.
inline Image read_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error(path + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error(path + ": " + msg);
  }
  return detail::from_bytes(image.width, image.height, bytes);
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

inline Image read_image(const std::string& path) {
  if (has_suffix(path, ".png")) return read_png(path);
  if (has_suffix(path, ".pgm")) return read_pgm(path);
  throw std::runtime_error(path + ": unsupported image format (expected .png or .pgm)");
}

}  // namespace io
}  // namespace stylemapper
