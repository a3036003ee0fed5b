#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "stylemapper/transforms.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace stylemapper;
using testing_support::random_image;

namespace {

constexpr double kPi = std::numbers::pi;
using namespace oracles;

Image single_pixel(double v) {
  std::vector<double> px(64, 0.0);
  px[0] = v;
  return Image(8, 8, px);
}

}  // namespace

TEST(Families, NamesRoundTrip) {
  for (auto f : {Family::Linear, Family::Negative, Family::Log, Family::PowerLaw, Family::PiecewiseLinear, Family::SobelX,
                 Family::SobelY, Family::Exp}) {
    EXPECT_EQ(parse_family(family_name(f)), f);
  }
  EXPECT_EQ(parse_family("gamma"), Family::PowerLaw);
  EXPECT_THROW(parse_family("sepia"), std::invalid_argument);
}

TEST(Sampling, FamiliesAreUniform) {
  std::mt19937_64 rng(2024);
  std::map<Family, int> counts;
  for (int i = 0; i < 7000; ++i) ++counts[sample_random_transform(rng).family];
  EXPECT_EQ(counts.size(), 7u);
  EXPECT_EQ(counts.count(Family::Exp), 0u);
  for (const auto& [f, n] : counts) {
    EXPECT_GE(n, 850) << family_name(f);
    EXPECT_LE(n, 1150) << family_name(f);
  }
}

TEST(Sampling, ParameterRanges) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto lin = std::get<params::Linear>(sample_transform(Family::Linear, rng).params);
    EXPECT_GE(lin.slope, std::tan(kPi / 8) - 1e-12);
    EXPECT_LE(lin.slope, std::tan(3 * kPi / 8) + 1e-12);
    EXPECT_GE(lin.intercept, -20);
    EXPECT_LE(lin.intercept, 20);
    const auto neg = std::get<params::Negative>(sample_transform(Family::Negative, rng).params);
    EXPECT_GE(neg.slope, std::tan(-3 * kPi / 8) - 1e-12);
    EXPECT_LE(neg.slope, std::tan(-kPi / 8) + 1e-12);
    EXPECT_GE(neg.intercept, 235);
    EXPECT_LE(neg.intercept, 275);
    const auto lg = std::get<params::Log>(sample_transform(Family::Log, rng).params);
    EXPECT_GE(lg.scale, 0.7);
    EXPECT_LE(lg.scale, 1.3);
    const auto pw = std::get<params::PowerLaw>(sample_transform(Family::PowerLaw, rng).params);
    EXPECT_GE(pw.gamma, 1.0 / 32);
    EXPECT_LE(pw.gamma, 32.0);
    const auto pl = std::get<params::PiecewiseLinear>(sample_transform(Family::PiecewiseLinear, rng).params);
    EXPECT_TRUE(pl.r1 >= 55 && pl.r1 <= 95 && pl.r2 >= 130 && pl.r2 <= 170);
    EXPECT_TRUE(pl.s1 >= 35 && pl.s1 <= 75 && pl.s2 >= 205 && pl.s2 <= 245);
  }
}

TEST(Sampling, PowerLawExponentIsSymmetricInLog2) {
  std::mt19937_64 rng(6);
  int below = 0;
  for (int i = 0; i < 4000; ++i) below += std::get<params::PowerLaw>(sample_transform(Family::PowerLaw, rng).params).gamma < 1.0;
  EXPECT_NEAR(below / 4000.0, 0.5, 0.04);
}

TEST(Sampling, SobelHasNoParameters) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(sample_transform(Family::SobelX, rng), TransformSpec::sobel_x());
  EXPECT_EQ(sample_transform(Family::SobelY, rng), TransformSpec::sobel_y());
}

TEST(Fixed, MeansOfDistributions) {
  std::mt19937_64 rng(3);
  const auto img = random_image(rng, 16, 16);
  EXPECT_EQ(apply_transform(fixed_transform(Family::Linear), img), img);

  const auto neg = fixed_transform(Family::Negative);
  EXPECT_EQ(apply_transform(neg, single_pixel(0)).pixels()[0], 255.0);
  EXPECT_EQ(apply_transform(neg, single_pixel(255)).pixels()[0], 0.0);

  const auto pl = std::get<params::PiecewiseLinear>(fixed_transform(Family::PiecewiseLinear).params);
  EXPECT_DOUBLE_EQ(piecewise_forward(pl, 75), 55);
  EXPECT_DOUBLE_EQ(piecewise_forward(pl, 150), 225);
  EXPECT_DOUBLE_EQ(std::get<params::Log>(fixed_transform(Family::Log).params).scale, 1.0);
  EXPECT_DOUBLE_EQ(std::get<params::PowerLaw>(fixed_transform(Family::PowerLaw).params).gamma, 0.5);
  EXPECT_EQ(fixed_transform(Family::SobelX), TransformSpec::sobel_x());
  EXPECT_THROW(fixed_transform(Family::Exp), std::invalid_argument);
}

TEST(Apply, PointExamples) {
  EXPECT_DOUBLE_EQ(apply_transform(TransformSpec::power_law(0.5), single_pixel(255)).pixels()[0], 255.0);
  const auto raw = apply_transform_raw(TransformSpec::exp(2.3, 0.02), Image(8, 8, 0.0));
  EXPECT_DOUBLE_EQ(raw.values[0], 2.3);
  const auto sob = apply_transform_raw(TransformSpec::sobel_x(), Image(8, 8, 100.0));
  // Interior of a constant image: every kernel row sums to zero.
  for (std::size_t y = 1; y + 1 < 8; ++y) {
    for (std::size_t x = 1; x + 1 < 8; ++x) EXPECT_EQ(sob.values[y * 8 + x], 0.0);
  }
}

TEST(Apply, SobelMatchesNestedLoopOracleExactly) {
  std::mt19937_64 rng(10);
  for (int k = 0; k < 10; ++k) {
    const auto img = random_image(rng, 16, 16);
    for (auto spec : {TransformSpec::sobel_x(), TransformSpec::sobel_y()}) {
      const auto raw = apply_transform_raw(spec, img);
      const auto expect = oracle_convolve(img, spec.family == Family::SobelX ? kSobelX : kSobelY);
      ASSERT_EQ(raw.values.size(), expect.size());
      for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(raw.values[i], expect[i]);
    }
  }
}

TEST(Apply, AllFamiliesMatchOracle) {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 20; ++k) {
    const auto img = random_image(rng, 16, 12);
    std::vector<TransformSpec> specs;
    for (auto f : kTrainingFamilies) specs.push_back(sample_transform(f, rng));
    for (auto f : kTrainingFamilies) specs.push_back(fixed_transform(f));
    specs.push_back(TransformSpec::exp(2.3, 0.02));
    for (const auto& spec : specs) {
      const auto got = apply_transform(spec, img);
      const auto expect = oracle_apply(spec, img);
      for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_NEAR(got.pixels()[i], expect[i], 1e-9) << spec.to_string();
    }
  }
}

TEST(Apply, LogOfBlackImageIsUndefined) {
  try {
    apply_transform(TransformSpec::log(1.0), Image(8, 8, 0.0));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "log scale undefined");
  }
}

TEST(Apply, RejectsInvalidParameters) {
  const Image img(8, 8, 10.0);
  EXPECT_THROW(apply_transform(TransformSpec::power_law(0.0), img), std::invalid_argument);
  EXPECT_THROW(apply_transform(TransformSpec::log(-1.0), img), std::invalid_argument);
  EXPECT_THROW(apply_transform(TransformSpec::piecewise(100, 90, 20, 200), img), std::invalid_argument);
}

TEST(Normalize, Examples) {
  RawField in{8, 8, std::vector<double>(64)};
  for (std::size_t i = 0; i < 64; ++i) in.values[i] = static_cast<double>(i) * 4.0;
  EXPECT_EQ(normalize_to_range(in).pixels(), in.values);

  RawField sob{8, 8, std::vector<double>(64, 0.0)};
  sob.values[3] = -510;
  sob.values[9] = 510;
  const auto out = normalize_to_range(sob);
  EXPECT_DOUBLE_EQ(out.pixels()[3], 0.0);
  EXPECT_DOUBLE_EQ(out.pixels()[9], 255.0);
  EXPECT_DOUBLE_EQ(out.pixels()[0], 127.5);

  const auto flat = normalize_to_range(RawField{8, 8, std::vector<double>(64, 900.0)});
  for (double p : flat.pixels()) EXPECT_EQ(p, 0.0);
}

TEST(Invert, FixedNegativeIsAnInvolution) {
  std::mt19937_64 rng(1);
  const auto img = testing_support::random_integer_image(rng, 16, 16);
  const auto neg = fixed_transform(Family::Negative);
  EXPECT_EQ(invert_transform(neg, apply_transform(neg, img)), img);
  EXPECT_EQ(apply_transform(neg, apply_transform(neg, img)), img);
}

TEST(Invert, LogRoundTrip) {
  std::mt19937_64 rng(2);
  const auto img = random_image(rng, 16, 16);
  TransformTrace trace;
  const auto out = apply_transform(TransformSpec::log(1.0), img, &trace);
  const auto back = invert_transform(TransformSpec::log(1.0), out, trace);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back.pixels()[i] - img.pixels()[i]), 1.0);
}

TEST(Invert, RandomInvertibleFamiliesRoundTrip) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto img = random_image(rng, 16, 16);
    for (auto f : {Family::Linear, Family::Negative, Family::Log, Family::PowerLaw, Family::PiecewiseLinear}) {
      const auto spec = sample_transform(f, rng);
      TransformTrace trace;
      const auto back = invert_transform(spec, apply_transform(spec, img, &trace), trace);
      for (std::size_t i = 0; i < img.size(); ++i) {
        ASSERT_LE(std::abs(back.pixels()[i] - img.pixels()[i]), 1.0) << spec.to_string();
      }
    }
  }
}

TEST(Invert, NonInvertibleFamilies) {
  const Image img(8, 8, 10.0);
  for (auto spec : {TransformSpec::sobel_x(), TransformSpec::sobel_y(), TransformSpec::exp(2.3, 0.02)}) {
    try {
      invert_transform(spec, img);
      FAIL();
    } catch (const std::invalid_argument& e) {
      EXPECT_STREQ(e.what(), "non-invertible in this artifact");
    }
  }
}

TEST(Properties, MonotoneFamiliesPreserveOrder) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 255);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> px(64);
    for (auto& p : px) p = u(rng);
    const Image img(8, 8, px);
    for (auto f : {Family::Linear, Family::Log, Family::PowerLaw}) {
      const auto out = apply_transform(sample_transform(f, rng), img);
      for (std::size_t i = 0; i + 1 < 64; ++i) {
        if (px[i] <= px[i + 1]) ASSERT_LE(out.pixels()[i], out.pixels()[i + 1] + 1e-9);
      }
    }
    const auto neg = apply_transform(fixed_transform(Family::Negative), img);
    for (std::size_t i = 0; i + 1 < 64; ++i) {
      if (px[i] <= px[i + 1]) ASSERT_GE(neg.pixels()[i], neg.pixels()[i + 1]);
    }
  }
}

TEST(Properties, PiecewiseIsContinuous) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 100; ++k) {
    const auto p = std::get<params::PiecewiseLinear>(sample_transform(Family::PiecewiseLinear, rng).params);
    for (double r : {p.r1, p.r2}) EXPECT_NEAR(piecewise_forward(p, r - 1e-6), piecewise_forward(p, r + 1e-6), 1e-3);
  }
}

TEST(Properties, OutputsObeyImageInvariantsAndArePure) {
  std::mt19937_64 rng(10);
  for (int k = 0; k < 30; ++k) {
    const auto img = random_image(rng, 12, 12);
    const auto spec = sample_random_transform(rng);
    const auto a = apply_transform(spec, img);
    for (double p : a.pixels()) {
      ASSERT_GE(p, 0.0);
      ASSERT_LE(p, 255.0);
    }
    EXPECT_EQ(a, apply_transform(spec, img));
  }
}

TEST(Spec, TextRoundTrip) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 50; ++k) {
    const auto spec = sample_random_transform(rng);
    EXPECT_EQ(parse_transform_spec(spec.to_string()), spec);
  }
  EXPECT_EQ(parse_transform_spec("exp a=2.3 b=0.02"), TransformSpec::exp(2.3, 0.02));
  EXPECT_THROW(parse_transform_spec("log gamma=2"), std::invalid_argument);
}
