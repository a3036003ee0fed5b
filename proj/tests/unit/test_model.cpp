#include <gtest/gtest.h>

#include <filesystem>

#include "stylemapper/model.hpp"
#include "test_support.hpp"

using namespace stylemapper;
using testing_support::random_image;

namespace {

ModelConfig small_config(std::size_t width = 4) {
  ModelConfig c;
  c.width = width;
  c.n_res = 2;
  c.mlp_hidden = 16;
  c.up_kernel = 3;
  return c;
}

}  // namespace

static_assert(StyleTransferModel<StyleMapper<float>>);
static_assert(StyleTransferModel<StyleMapper<double>>);
static_assert(StyleTransferModel<testing_support::IdentityStub<float>>);

TEST(Model, ContentCodeShapeAtDeskScale) {
  StyleMapper<float> m(small_config(16), 1);
  std::mt19937_64 rng(1);
  const auto c = encode_content(m, random_image(rng, 64, 64));
  EXPECT_EQ(c.shape(), (ad::Shape{1, 64, 16, 16}));
}

TEST(Model, ContentCodeShapeForRectangularInput) {
  StyleMapper<float> m(small_config(), 1);
  std::mt19937_64 rng(2);
  const auto c = encode_content(m, random_image(rng, 32, 16));
  EXPECT_EQ(c.shape(), (ad::Shape{1, 16, 4, 8}));
}

TEST(Model, StyleCodeHasEightEntries) {
  StyleMapper<float> m(small_config(), 1);
  std::mt19937_64 rng(3);
  const auto s = m.encode_style(images_to_tensor<float>({random_image(rng, 16, 16), random_image(rng, 16, 16)}));
  EXPECT_EQ(s.shape(), (ad::Shape{2, kStyleDim}));
}

TEST(Model, ConstantImagesGetDistinctCodes) {
  StyleMapper<float> m(small_config(), 5);
  const auto black = encode_style(m, Image(16, 16, 0.0));
  const auto white = encode_style(m, Image(16, 16, 255.0));
  double diff = 0;
  for (std::size_t i = 0; i < kStyleDim; ++i) diff += std::abs(black[i] - white[i]);
  EXPECT_GT(diff, 1e-4);
}

TEST(Model, IdenticalImagesGetIdenticalCodes) {
  StyleMapper<float> m(small_config(), 6);
  std::mt19937_64 rng(6);
  const auto img = random_image(rng, 16, 16);
  EXPECT_EQ(encode_style(m, img), encode_style(m, Image(img)));
}

TEST(Model, DecodeRestoresSpatialSizeInUnitRange) {
  StyleMapper<float> m(small_config(), 7);
  std::mt19937_64 rng(7);
  const auto x = images_to_tensor<float>({random_image(rng, 24, 16)});
  const auto y = m.decode(m.encode_content(x), m.encode_style(x));
  EXPECT_EQ(y.shape(), x.shape());
  for (float v : y.values()) {
    EXPECT_GT(v, 0.0F);
    EXPECT_LT(v, 1.0F);
  }
}

TEST(Model, ContentEncoderNeedsSidesDivisibleByFour) {
  StyleMapper<float> m(small_config(), 1);
  std::mt19937_64 rng(8);
  EXPECT_THROW(encode_content(m, random_image(rng, 18, 16)), ad::ShapeError);
  EXPECT_NO_THROW(encode_style(m, random_image(rng, 18, 16)));
}

TEST(Model, DecodeRejectsMismatchedCodes) {
  StyleMapper<float> m(small_config(), 1);
  EXPECT_THROW(m.decode(ad::Tensor<float>::zeros({1, 3, 4, 4}), ad::Tensor<float>::zeros({1, 8})), ad::ShapeError);
  EXPECT_THROW(m.decode(ad::Tensor<float>::zeros({2, 16, 4, 4}), ad::Tensor<float>::zeros({1, 8})), ad::ShapeError);
}

TEST(Model, SameSeedSameWeights) {
  StyleMapper<float> a(small_config(), 11), b(small_config(), 11), c(small_config(), 12);
  EXPECT_EQ(a.params().get("content.stem.w").values(), b.params().get("content.stem.w").values());
  EXPECT_NE(a.params().get("content.stem.w").values(), c.params().get("content.stem.w").values());
}

TEST(Model, CheckpointRoundTripPreservesOutputs) {
  StyleMapper<float> m(small_config(), 9);
  const auto path = (std::filesystem::temp_directory_path() / "stylemapper_model_rt.ckpt").string();
  m.save(path);
  const auto back = StyleMapper<float>::load(path);
  EXPECT_EQ(back.config().width, 4u);
  EXPECT_EQ(back.config().n_res, 2u);
  EXPECT_EQ(back.config().mlp_hidden, 16u);
  std::mt19937_64 rng(9);
  const auto img = random_image(rng, 16, 16);
  EXPECT_EQ(encode_style(m, img), encode_style(back, img));
  EXPECT_EQ(decode(m, encode_content(m, img), encode_style(m, img)),
            decode(back, encode_content(back, img), encode_style(back, img)));
}

TEST(Model, ConfigTextRoundTrip) {
  const auto c = small_config(6);
  const auto back = ModelConfig::parse(c.to_string());
  EXPECT_EQ(back.width, 6u);
  EXPECT_EQ(back.n_res, 2u);
  EXPECT_EQ(back.n_style_down, 3u);
  EXPECT_EQ(back.up_kernel, 3u);
  EXPECT_THROW(ModelConfig::parse("style_dim=4\n"), std::runtime_error);
}

// A thousand reconstruction steps on random data with a large step size must not blow up.
TEST(Model, ParametersStayFiniteUnderTraining) {
  ModelConfig c;
  c.width = 2;
  c.n_res = 1;
  c.mlp_hidden = 4;
  c.up_kernel = 3;
  StyleMapper<float> m(c, 3);
  ad::AdamConfig opt;
  opt.lr = 1e-2;
  ad::AdamState state;
  std::mt19937_64 rng(3);
  for (int step = 0; step < 1000; ++step) {
    const auto x = images_to_tensor<float>({random_image(rng, 8, 8)});
    m.params().zero_grad();
    const auto loss = ad::l1_loss(m.decode(m.encode_content(x), m.encode_style(x)), x);
    ASSERT_TRUE(std::isfinite(loss.item()));
    ad::backward(loss);
    ad::adam_step(m.params(), state, opt);
  }
  EXPECT_TRUE(m.params().all_finite());
}
