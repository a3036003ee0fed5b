#include <gtest/gtest.h>

#include <set>

#include "stylemapper/losses.hpp"
#include "test_support.hpp"

using namespace stylemapper;
using testing_support::BatchOracleStub;
using testing_support::IdentityStub;
using testing_support::random_image;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.width = 2;
  c.n_res = 1;
  c.mlp_hidden = 8;
  c.up_kernel = 3;
  return c;
}

QuadBatch random_batch(std::uint64_t seed, const TransformSpec& spec = TransformSpec::log(20.0)) {
  std::mt19937_64 rng(seed);
  return QuadBatch::make(random_image(rng, 16, 16), random_image(rng, 16, 16), spec);
}

// Per-pixel mean absolute difference computed directly from the tensors.
double l1_direct(const ad::Tensor<double>& a, const ad::Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.values()[i] - b.values()[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST(QuadBatch, RejectsIdenticalRawImages) {
  const Image a(8, 8, 3.0);
  EXPECT_THROW(QuadBatch::make(a, a, TransformSpec::negative(-1, 255)), std::invalid_argument);
}

TEST(QuadBatch, TransformedImagesUseTheSameSpec) {
  const auto b = random_batch(1);
  EXPECT_EQ(b.t_x1, apply_transform(b.spec, b.x1));
  EXPECT_EQ(b.t_x2, apply_transform(b.spec, b.x2));
}

TEST(ReconLoss, InUnitIntervalForUntrainedModel) {
  StyleMapper<double> m(tiny_config(), 1);
  std::mt19937_64 rng(1);
  const double v = image_recon_loss(m, random_image(rng, 16, 16)).item();
  EXPECT_GT(v, 0.0);
  EXPECT_LE(v, 1.0);
}

TEST(ReconLoss, ZeroForIdentityDecoder) {
  std::mt19937_64 rng(2);
  EXPECT_EQ(image_recon_loss(IdentityStub<double>{}, random_image(rng, 16, 16)).item(), 0.0);
}

TEST(ReconLoss, HalfForOppositeHalves) {
  // Decoder returns all-black; target is half white.
  struct Black {
    using scalar_type = double;
    ad::Tensor<double> encode_content(const ad::Tensor<double>& x) const { return x; }
    ad::Tensor<double> encode_style(const ad::Tensor<double>& x) const { return ad::Tensor<double>::zeros({x.dim(0), 8}); }
    ad::Tensor<double> decode(const ad::Tensor<double>& c, const ad::Tensor<double>&) const {
      return ad::Tensor<double>::zeros(c.shape());
    }
  };
  std::vector<double> px(64, 0.0);
  std::fill(px.begin(), px.begin() + 32, 255.0);
  EXPECT_DOUBLE_EQ(image_recon_loss(Black{}, Image(8, 8, px)).item(), 0.5);
}

TEST(LatentLosses, IdentityStubHasZeroStyleAndContentDiscrepancyForIdentityTransform) {
  std::mt19937_64 rng(3);
  const auto b = QuadBatch::make(random_image(rng, 16, 16), random_image(rng, 16, 16), fixed_transform(Family::Linear));
  const auto l = latent_same_losses(IdentityStub<double>{}, b);
  EXPECT_EQ(l.same_s.item(), 0.0);
  EXPECT_EQ(l.same_sT.item(), 0.0);
  EXPECT_NEAR(l.same_c_x1.item(), 0.0, 1e-12);
  EXPECT_NEAR(l.same_c_x2.item(), 0.0, 1e-12);
}

TEST(LatentLosses, MatchIndependentReencoding) {
  StyleMapper<double> m(tiny_config(), 4);
  const auto b = random_batch(4);
  const auto l = latent_same_losses(m, b);
  auto t = [](const Image& img) { return image_to_tensor<double>(img); };
  EXPECT_NEAR(l.same_s.item(), l1_direct(m.encode_style(t(b.x1)), m.encode_style(t(b.x2))), 1e-12);
  EXPECT_NEAR(l.same_sT.item(), l1_direct(m.encode_style(t(b.t_x1)), m.encode_style(t(b.t_x2))), 1e-12);
  EXPECT_NEAR(l.same_c_x1.item(), l1_direct(m.encode_content(t(b.x1)), m.encode_content(t(b.t_x1))), 1e-12);
  EXPECT_NEAR(l.same_c_x2.item(), l1_direct(m.encode_content(t(b.x2)), m.encode_content(t(b.t_x2))), 1e-12);
  EXPECT_GT(l.same_s.item(), 0.0);
}

TEST(CrossTriplets, MatchHandTranscribedList) {
  // (content, style, target) read off the expanded cross-domain objective.
  const std::set<Triplet> expected = {
      {X2, X1, X2},   {X1, X2, X1},   {X2, TX1, TX2}, {X1, TX2, TX1}, {X2, TX2, TX2},  {X1, TX1, TX1},
      {TX2, X1, X2},  {TX1, X2, X1},  {TX2, X2, X2},  {TX1, X1, X1},  {TX2, TX1, TX2}, {TX1, TX2, TX1},
  };
  const auto& roles = cross_triplet_roles();
  const std::set<Triplet> got(roles.begin(), roles.end());
  EXPECT_EQ(got.size(), 12u);
  EXPECT_EQ(got, expected);
}

TEST(CrossTriplets, EqualRuleBasedEnumeration) {
  std::set<Triplet> rule;
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t t = 0; t < 4; ++t) {
        if (content_group(c) != content_group(t) || style_group(s) != style_group(t)) continue;
        if (c == t && s == t) continue;
        rule.insert({c, s, t});
      }
    }
  }
  const auto& roles = cross_triplet_roles();
  EXPECT_EQ(rule, std::set<Triplet>(roles.begin(), roles.end()));
}

TEST(CrossTriplets, GroupInvariantsAndNoSelfReconstruction) {
  for (const auto& t : cross_triplet_roles()) {
    EXPECT_EQ(content_group(t.content), content_group(t.target));
    EXPECT_EQ(style_group(t.style), style_group(t.target));
    EXPECT_FALSE(t.content == t.target && t.style == t.target);
  }
}

TEST(CrossTriplets, ClosedUnderSwappingTheTwoRawImages) {
  auto swap = [](std::size_t r) -> std::size_t { return r ^ 1u; };
  const auto& roles = cross_triplet_roles();
  const std::set<Triplet> set(roles.begin(), roles.end());
  for (const auto& t : roles) EXPECT_TRUE(set.count({swap(t.content), swap(t.style), swap(t.target)}));
}

TEST(CrossTriplets, ImagePointersFollowRoles) {
  const auto b = random_batch(5);
  const auto imgs = enumerate_cross_triplets(b);
  ASSERT_EQ(imgs.size(), 12u);
  for (std::size_t k = 0; k < 12; ++k) {
    const auto& r = cross_triplet_roles()[k];
    EXPECT_EQ(imgs[k].content, &b[r.content]);
    EXPECT_EQ(imgs[k].style, &b[r.style]);
    EXPECT_EQ(imgs[k].target, &b[r.target]);
  }
}

TEST(CrossLoss, MatchesPerTripletOracle) {
  StyleMapper<double> m(tiny_config(), 6);
  const auto b = random_batch(6);
  double oracle = 0;
  for (const auto& t : enumerate_cross_triplets(b)) {
    const auto out = decode(m, encode_content(m, *t.content), encode_style(m, *t.style));
    oracle += mean_abs_error(out, *t.target);
  }
  EXPECT_NEAR(cross_loss(m, b).item(), oracle, 1e-6);
  EXPECT_GT(oracle, 0.0);
}

TEST(CrossLoss, ZeroForBatchOracle) {
  const auto b = random_batch(7, TransformSpec::power_law(2.0));
  EXPECT_NEAR(cross_loss(BatchOracleStub<double>{b}, b).item(), 0.0, 1e-9);
}

TEST(TotalLoss, EveryTermVanishesForBatchOracle) {
  const auto b = random_batch(8, TransformSpec::negative(-1, 255));
  const auto r = total_loss(BatchOracleStub<double>{b}, b, LossWeights{});
  EXPECT_NEAR(r.total.item(), 0.0, 1e-9);
  for (double v : r.breakdown.terms()) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(TotalLoss, ZeroWeightsGiveZero) {
  StyleMapper<double> m(tiny_config(), 9);
  EXPECT_EQ(total_loss(m, random_batch(9), LossWeights{0, 0, 0, 0}).total.item(), 0.0);
}

TEST(TotalLoss, UnitTermsCombineToSixtyOne) {
  using T = ad::Tensor<double>;
  const T one = T::full({1}, 1.0);
  const auto r = combine_loss_terms<double>({one, one, one, one}, {one, one, one, one}, one, LossWeights{});
  // 10*4 + 5*2 + 5*2 + 1
  EXPECT_DOUBLE_EQ(r.total.item(), 61.0);
}

TEST(TotalLoss, NegativeWeightsRejected) {
  EXPECT_THROW(LossWeights({1, -1, 1, 1}).validate(), std::invalid_argument);
}

TEST(TotalLoss, BatchedEqualsUnbatchedCombination) {
  StyleMapper<double> m(tiny_config(), 10);
  const auto b = random_batch(10);
  const LossWeights w{};
  const auto batched = total_loss(m, b, w);
  const std::array<ad::Tensor<double>, 4> recon{image_recon_loss(m, b.x1), image_recon_loss(m, b.x2),
                                                image_recon_loss(m, b.t_x1), image_recon_loss(m, b.t_x2)};
  const auto unbatched = combine_loss_terms(recon, latent_same_losses(m, b), cross_loss(m, b), w);
  EXPECT_NEAR(batched.total.item(), unbatched.total.item(), 1e-9);
  const auto bt = batched.breakdown.terms(), ut = unbatched.breakdown.terms();
  for (std::size_t i = 0; i < kLossTermCount; ++i) EXPECT_NEAR(bt[i], ut[i], 1e-9) << LossBreakdown::term_name(i);
}

TEST(TotalLoss, BatchedGradientsEqualUnbatched) {
  StyleMapper<double> m(tiny_config(), 11);
  const auto b = random_batch(11);
  m.params().zero_grad();
  ad::backward(total_loss(m, b, LossWeights{}).total);
  std::vector<std::vector<double>> g1;
  for (auto& e : m.params().entries()) g1.push_back(e.tensor.grad());
  m.params().zero_grad();
  const std::array<ad::Tensor<double>, 4> recon{image_recon_loss(m, b.x1), image_recon_loss(m, b.x2),
                                                image_recon_loss(m, b.t_x1), image_recon_loss(m, b.t_x2)};
  ad::backward(combine_loss_terms(recon, latent_same_losses(m, b), cross_loss(m, b), LossWeights{}).total);
  std::size_t k = 0;
  for (auto& e : m.params().entries()) {
    const auto& g2 = e.tensor.grad();
    for (std::size_t i = 0; i < g2.size(); ++i) ASSERT_NEAR(g1[k][i], g2[i], 1e-8) << e.name;
    ++k;
  }
}
