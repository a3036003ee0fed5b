#pragma once

#include <array>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemapper/model.hpp"
#include "stylemapper/transforms.hpp"

namespace stylemapper {

// Two distinct raw images and the same transform applied to each.
struct QuadBatch {
  Image x1, x2, t_x1, t_x2;
  TransformSpec spec;

  static QuadBatch make(const Image& x1, const Image& x2, const TransformSpec& spec) {
    if (x1 == x2) throw std::invalid_argument("quad batch needs two distinct raw images");
    return {x1, x2, apply_transform(spec, x1), apply_transform(spec, x2), spec};
  }

  const Image& operator[](std::size_t role) const {
    switch (role) {
      case 0: return x1;
      case 1: return x2;
      case 2: return t_x1;
      case 3: return t_x2;
      default: throw std::out_of_range("quad batch role");
    }
  }
};

// Image roles inside a QuadBatch. Content is shared by {X1, TX1} and {X2, TX2};
// style by {X1, X2} and {TX1, TX2}.
enum Role : std::size_t { X1 = 0, X2 = 1, TX1 = 2, TX2 = 3 };

inline const char* role_name(std::size_t r) {
  static constexpr const char* names[] = {"X1", "X2", "T(X1)", "T(X2)"};
  return names[r];
}
inline std::size_t content_group(std::size_t r) { return r % 2; }
inline std::size_t style_group(std::size_t r) { return r / 2; }

// Content source, style source, reconstruction target.
struct Triplet {
  std::size_t content, style, target;
  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

// The twelve (content, style, target) role triplets of the cross-domain loss, in the
// order of its full expansion: every target paired with each content source sharing its
// content and each style source sharing its style, minus the pure self-reconstructions.
inline const std::array<Triplet, 12>& cross_triplet_roles() {
  static const std::array<Triplet, 12> roles = {{{X2, X1, X2},
                                                 {X1, X2, X1},
                                                 {X2, TX1, TX2},
                                                 {X1, TX2, TX1},
                                                 {X2, TX2, TX2},
                                                 {X1, TX1, TX1},
                                                 {TX2, X1, X2},
                                                 {TX1, X2, X1},
                                                 {TX2, X2, X2},
                                                 {TX1, X1, X1},
                                                 {TX2, TX1, TX2},
                                                 {TX1, TX2, TX1}}};
  return roles;
}

struct ImageTriplet {
  const Image* content;
  const Image* style;
  const Image* target;
};

inline std::vector<ImageTriplet> enumerate_cross_triplets(const QuadBatch& batch) {
  std::vector<ImageTriplet> out;
  for (const auto& t : cross_triplet_roles()) out.push_back({&batch[t.content], &batch[t.style], &batch[t.target]});
  return out;
}

struct LossWeights {
  double recon = 10.0;
  double same_s = 5.0;
  double same_c = 5.0;
  double cross = 1.0;

  void validate() const {
    if (recon < 0 || same_s < 0 || same_c < 0 || cross < 0) throw std::invalid_argument("loss weights must be >= 0");
  }
};

// ||G(E^c(img), E^s(img)) - img||_1, pixel-averaged in [0,1] units.
template <StyleTransferModel M>
ad::Tensor<typename M::scalar_type> image_recon_loss(const M& model, const Image& img) {
  using T = typename M::scalar_type;
  const auto x = image_to_tensor<T>(img);
  return ad::l1_loss(model.decode(model.encode_content(x), model.encode_style(x)), x);
}

template <typename T>
struct LatentLosses {
  ad::Tensor<T> same_s, same_sT, same_c_x1, same_c_x2;
};

template <StyleTransferModel M>
LatentLosses<typename M::scalar_type> latent_same_losses(const M& model, const QuadBatch& b) {
  using T = typename M::scalar_type;
  const auto x1 = image_to_tensor<T>(b.x1), x2 = image_to_tensor<T>(b.x2);
  const auto t1 = image_to_tensor<T>(b.t_x1), t2 = image_to_tensor<T>(b.t_x2);
  return {ad::l1_loss(model.encode_style(x1), model.encode_style(x2)),
          ad::l1_loss(model.encode_style(t1), model.encode_style(t2)),
          ad::l1_loss(model.encode_content(x1), model.encode_content(t1)),
          ad::l1_loss(model.encode_content(x2), model.encode_content(t2))};
}

// Sum over the twelve triplets of ||G(E^c(p1), E^s(p2)) - p3||_1.
template <StyleTransferModel M>
ad::Tensor<typename M::scalar_type> cross_loss(const M& model, const QuadBatch& b) {
  using T = typename M::scalar_type;
  std::vector<ad::Tensor<T>> terms;
  for (const auto& t : enumerate_cross_triplets(b)) {
    const auto out = model.decode(model.encode_content(image_to_tensor<T>(*t.content)),
                                  model.encode_style(image_to_tensor<T>(*t.style)));
    terms.push_back(ad::l1_loss(out, image_to_tensor<T>(*t.target)));
  }
  return ad::weighted_sum(terms, std::vector<T>(terms.size(), T(1)));
}

inline constexpr std::size_t kLossTermCount = 9;

// Per-term values for logging; order matches the training log columns.
struct LossBreakdown {
  double total = 0;
  std::array<double, 4> recon{};  // X1, X2, T(X1), T(X2)
  double same_s = 0, same_sT = 0, same_c1 = 0, same_c2 = 0;
  double cross = 0;

  static const char* csv_header() {
    return "step,total,recon_x1,recon_x2,recon_tx1,recon_tx2,same_s,same_sT,same_c1,same_c2,cross";
  }

  std::array<double, kLossTermCount> terms() const {
    return {recon[0], recon[1], recon[2], recon[3], same_s, same_sT, same_c1, same_c2, cross};
  }

  static const char* term_name(std::size_t i) {
    static constexpr const char* names[] = {"recon_x1", "recon_x2", "recon_tx1", "recon_tx2", "same_s",
                                            "same_sT",  "same_c1",  "same_c2",   "cross"};
    return names[i];
  }
};

template <typename T>
struct TotalLoss {
  ad::Tensor<T> total;
  LossBreakdown breakdown;
};

// Weighted combination of already-computed scalar terms:
// recon*(4 recon terms) + same_s*(same_s + same_sT) + same_c*(same_c1 + same_c2) + cross*cross.
template <typename T>
TotalLoss<T> combine_loss_terms(const std::array<ad::Tensor<T>, 4>& recon, const LatentLosses<T>& latent,
                                const ad::Tensor<T>& cross, const LossWeights& w) {
  w.validate();
  const T r = static_cast<T>(w.recon), s = static_cast<T>(w.same_s), c = static_cast<T>(w.same_c);
  TotalLoss<T> out;
  out.total = ad::weighted_sum<T>({recon[0], recon[1], recon[2], recon[3], latent.same_s, latent.same_sT,
                                   latent.same_c_x1, latent.same_c_x2, cross},
                                  {r, r, r, r, s, s, c, c, static_cast<T>(w.cross)});
  auto& b = out.breakdown;
  b.total = static_cast<double>(out.total.item());
  for (std::size_t i = 0; i < 4; ++i) b.recon[i] = static_cast<double>(recon[i].item());
  b.same_s = static_cast<double>(latent.same_s.item());
  b.same_sT = static_cast<double>(latent.same_sT.item());
  b.same_c1 = static_cast<double>(latent.same_c_x1.item());
  b.same_c2 = static_cast<double>(latent.same_c_x2.item());
  b.cross = static_cast<double>(cross.item());
  return out;
}

// Full objective. The four images are encoded once as a batch and all sixteen decodes
// (four self-reconstructions, twelve cross triplets) run as one batch.
template <StyleTransferModel M>
TotalLoss<typename M::scalar_type> total_loss(const M& model, const QuadBatch& b, const LossWeights& w) {
  using T = typename M::scalar_type;
  const auto x = images_to_tensor<T>({b.x1, b.x2, b.t_x1, b.t_x2});
  const auto content = model.encode_content(x);
  const auto style = model.encode_style(x);

  std::vector<std::size_t> cs, ss, ts;
  for (std::size_t r = 0; r < 4; ++r) {
    cs.push_back(r);
    ss.push_back(r);
    ts.push_back(r);
  }
  for (const auto& t : cross_triplet_roles()) {
    cs.push_back(t.content);
    ss.push_back(t.style);
    ts.push_back(t.target);
  }
  const auto out = model.decode(ad::select_batch(content, cs), ad::select_batch(style, ss));
  auto term = [&](std::size_t k) {
    return ad::l1_loss(ad::select_batch(out, {k}), ad::select_batch(x, {ts[k]}));
  };
  std::array<ad::Tensor<T>, 4> recon{term(0), term(1), term(2), term(3)};
  std::vector<ad::Tensor<T>> cross_terms;
  for (std::size_t k = 4; k < 16; ++k) cross_terms.push_back(term(k));
  const auto cross = ad::weighted_sum(cross_terms, std::vector<T>(12, T(1)));

  auto pick = [](const ad::Tensor<T>& t, std::size_t i) { return ad::select_batch(t, {i}); };
  LatentLosses<T> latent{ad::l1_loss(pick(style, X1), pick(style, X2)), ad::l1_loss(pick(style, TX1), pick(style, TX2)),
                         ad::l1_loss(pick(content, X1), pick(content, TX1)),
                         ad::l1_loss(pick(content, X2), pick(content, TX2))};
  return combine_loss_terms(recon, latent, cross, w);
}

}  // namespace stylemapper
