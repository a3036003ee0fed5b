#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemapper/model.hpp"
#include "stylemapper/transforms.hpp"

namespace stylemapper {

struct StyleCodeSet {
  std::vector<StyleCode> codes;
  std::string source;
};

inline double code_mae(const StyleCode& a, const StyleCode& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kStyleDim; ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(kStyleDim);
}

// Index of the code with the smallest mean MAE to all other codes (lowest index wins ties).
inline std::size_t most_representative_index(const std::vector<StyleCode>& codes) {
  if (codes.empty()) throw std::invalid_argument("most_representative_code: empty style code set");
  if (codes.size() == 1) return 0;
  const std::size_t n = codes.size();
  std::vector<double> total(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = code_mae(codes[i], codes[j]);
      total[i] += d;
      total[j] += d;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (total[i] < total[best]) best = i;
  }
  return best;
}

inline StyleCode most_representative_code(const StyleCodeSet& set) {
  return set.codes[most_representative_index(set.codes)];
}

inline StyleCode most_representative_code(const std::vector<StyleCode>& codes) {
  return codes[most_representative_index(codes)];
}

// G(E^c(content), target_code)
template <StyleTransferModel M>
Image transfer(const M& model, const Image& content_img, const StyleCode& target_code) {
  return decode(model, encode_content(model, content_img), target_code);
}

template <StyleTransferModel M>
std::vector<Image> transfer_all(const M& model, const std::vector<Image>& imgs, const StyleCode& target_code) {
  std::vector<Image> out;
  out.reserve(imgs.size());
  for (const auto& img : imgs) out.push_back(transfer(model, img, target_code));
  return out;
}

inline std::vector<Image> apply_transform_all(const TransformSpec& spec, const std::vector<Image>& imgs) {
  std::vector<Image> out;
  out.reserve(imgs.size());
  for (const auto& img : imgs) out.push_back(apply_transform(spec, img));
  return out;
}

struct TransferEvaluation {
  double normalized_mae = 0;
  double transfer_mae = 0;  // MAE(transferred, T(test))
  double identity_mae = 0;  // MAE(test, T(test))
  StyleCode target_code{};
};

// Few-shot protocol: estimate the target code from T applied to the first `n_target`
// donors, transfer every test image with it and compare against T(test), normalized by
// the untransformed-input baseline.
template <StyleTransferModel M>
TransferEvaluation evaluate_transfer(const M& model, const std::vector<Image>& test_imgs, const TransformSpec& target_spec,
                                     std::size_t n_target, const std::vector<Image>& donor_imgs) {
  if (n_target == 0 || n_target > donor_imgs.size()) {
    throw std::invalid_argument("n_target " + std::to_string(n_target) + " exceeds donor count " +
                                std::to_string(donor_imgs.size()));
  }
  if (test_imgs.empty()) throw std::invalid_argument("evaluate_transfer: no test images");
  std::vector<StyleCode> codes;
  for (std::size_t k = 0; k < n_target; ++k) codes.push_back(encode_style(model, apply_transform(target_spec, donor_imgs[k])));
  TransferEvaluation ev;
  ev.target_code = most_representative_code(codes);
  const auto truth = apply_transform_all(target_spec, test_imgs);
  ev.transfer_mae = mean_abs_error(transfer_all(model, test_imgs, ev.target_code), truth);
  ev.identity_mae = mean_abs_error(test_imgs, truth);
  if (!(ev.identity_mae > 0)) throw std::invalid_argument("evaluate_transfer: target style equals identity on the test set");
  ev.normalized_mae = ev.transfer_mae / ev.identity_mae;
  return ev;
}

// Splits a test set into donor (first half) and evaluation (second half) images.
inline std::pair<std::vector<Image>, std::vector<Image>> donor_test_split(const std::vector<Image>& test) {
  if (test.size() < 2) throw std::invalid_argument("donor/test split needs at least 2 images");
  const auto half = static_cast<std::ptrdiff_t>(test.size() / 2);
  return {std::vector<Image>(test.begin(), test.begin() + half), std::vector<Image>(test.begin() + half, test.end())};
}

}  // namespace stylemapper
