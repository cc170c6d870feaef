#include <gtest/gtest.h>

#include <random>
#include <set>
#include <utility>

#include "oracles.hpp"
#include "spider/distortion.hpp"
#include "spider/forge.hpp"

using namespace spider;
using D = DistortionType;

namespace {

ImageBuffer random_image(Dims d, std::mt19937& gen) {
  ImageBuffer img(d);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(gen());
  return img;
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.bytes().size(); ++i) {
    const double d = double(a.bytes()[i]) - double(b.bytes()[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.bytes().size());
}

// HSL round trip, textbook formulas.
std::array<double, 3> to_hsl(double r, double g, double b) {
  r /= 255, g /= 255, b /= 255;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double l = (mx + mn) / 2;
  if (mx == mn) return {0, 0, l};
  const double d = mx - mn;
  const double s = l > 0.5 ? d / (2 - mx - mn) : d / (mx + mn);
  double h;
  if (mx == r) h = (g - b) / d + (g < b ? 6 : 0);
  else if (mx == g) h = (b - r) / d + 2;
  else h = (r - g) / d + 4;
  return {h / 6, s, l};
}

double hue_to_rgb(double p, double q, double t) {
  if (t < 0) t += 1;
  if (t > 1) t -= 1;
  if (t < 1.0 / 6) return p + (q - p) * 6 * t;
  if (t < 0.5) return q;
  if (t < 2.0 / 3) return p + (q - p) * (2.0 / 3 - t) * 6;
  return p;
}

std::array<double, 3> from_hsl(double h, double s, double l) {
  if (s == 0) return {l * 255, l * 255, l * 255};
  const double q = l < 0.5 ? l * (1 + s) : l + s - l * s;
  const double p = 2 * l - q;
  return {hue_to_rgb(p, q, h + 1.0 / 3) * 255, hue_to_rgb(p, q, h) * 255, hue_to_rgb(p, q, h - 1.0 / 3) * 255};
}

}  // namespace

TEST(OrderTable, ExactlyTheTwelveListedPairs) {
  const std::set<std::pair<D, D>> legal = {
      {D::Blur, D::Compression},
      {D::Blur, D::Noise},
      {D::Compression, D::Blur},
      {D::Compression, D::Noise},
      {D::ContrastWeaken, D::Blur},
      {D::ContrastWeaken, D::Noise},
      {D::ContrastWeaken, D::Compression},
      {D::ContrastWeaken, D::Pixelate},
      {D::ContrastWeaken, D::ContrastWeaken},
      {D::ContrastWeaken, D::SaturateWeaken},
      {D::Pixelate, D::Noise},
      {D::SaturateWeaken, D::Noise},
  };
  int accepted = 0;
  for (auto a : kAllDistortionTypes)
    for (auto b : kAllDistortionTypes) {
      EXPECT_EQ(validate_order(a, b), legal.count({a, b}) > 0) << type_name(a) << " -> " << type_name(b);
      accepted += validate_order(a, b);
    }
  EXPECT_EQ(accepted, 12);
}

TEST(Plan, RejectsBadLevelsOrdersAndLength) {
  const auto code_of = [](const DistortionPlan& p) {
    try {
      validate_plan(p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::EmptyInput;
  };
  EXPECT_EQ(code_of({{{D::Blur, 0, 0}}}), ErrorCode::InvalidLevel);
  EXPECT_EQ(code_of({{{D::Blur, 6, 0}}}), ErrorCode::InvalidLevel);
  EXPECT_EQ(code_of({{{D::Noise, 1, 0}, {D::Blur, 1, 0}}}), ErrorCode::IllegalOrder);
  EXPECT_EQ(code_of({{{D::ContrastWeaken, 1, 0}, {D::Blur, 1, 0}, {D::Noise, 1, 0}}}), ErrorCode::IllegalOrder);
  EXPECT_NO_THROW(validate_plan({{{D::Pixelate, 3, 0}, {D::Noise, 2, 9}}}));
  EXPECT_EQ(cumulative_intensity({{{D::Pixelate, 3, 0}, {D::Noise, 2, 9}}}), 5);
}

TEST(Noise, MatchesScalarOracleByteExact) {
  std::mt19937 gen(8);
  for (int level = 1; level <= 5; ++level) {
    const auto img = random_image({23, 17}, gen);
    const std::uint64_t seed = gen();
    const auto out = apply_operator(img, {D::Noise, level, seed});
    const std::vector<std::uint8_t> in(img.bytes().begin(), img.bytes().end());
    const std::array<double, 5> sigma = {4, 8, 16, 32, 48};
    const auto expect = oracle::noise(in, 23, 17, sigma[level - 1], seed);
    EXPECT_TRUE(std::equal(expect.begin(), expect.end(), out.bytes().begin())) << "level " << level;
  }
}

TEST(Blur, ConstantImageIsFixedPoint) {
  const ImageBuffer flat({19, 11}, Rgb{77, 130, 201});
  for (int level = 1; level <= 5; ++level) EXPECT_EQ(apply_operator(flat, {D::Blur, level, 0}), flat);
}

TEST(Blur, SmoothsAnImpulseSymmetrically) {
  ImageBuffer img({21, 21});
  img.set_pixel(10, 10, {255, 255, 255});
  const auto out = gaussian_blur(img, 1.5);
  EXPECT_LT(out.at(10, 10, 0), 255);
  EXPECT_EQ(out.at(9, 10, 0), out.at(11, 10, 0));
  EXPECT_EQ(out.at(10, 9, 1), out.at(10, 11, 1));
  EXPECT_GE(out.at(10, 10, 0), out.at(11, 10, 0));
}

TEST(Pixelate, HandComputedBlockMeans) {
  // 3x1 image, block 2: tiles {0,1} and {2}.
  const ImageBuffer img({3, 1}, {0, 0, 0, 3, 3, 3, 9, 9, 9});
  const auto out = pixelate(img, 2);
  EXPECT_EQ(out.pixel(0, 0), (Rgb{2, 2, 2}));  // (0 + 3 + 1) / 2
  EXPECT_EQ(out.pixel(1, 0), (Rgb{2, 2, 2}));
  EXPECT_EQ(out.pixel(2, 0), (Rgb{9, 9, 9}));
}

TEST(Contrast, PullsTowardChannelMean) {
  const ImageBuffer img({2, 1}, {0, 100, 200, 100, 100, 0});
  const auto out = weaken_contrast(img, 0.5);
  EXPECT_EQ(out.pixel(0, 0), (Rgb{25, 100, 150}));
  EXPECT_EQ(out.pixel(1, 0), (Rgb{75, 100, 50}));
}

TEST(Saturation, MatchesHslScaling) {
  std::mt19937 gen(21);
  const auto img = random_image({16, 16}, gen);
  for (double f : {0.8, 0.5, 0.2}) {
    const auto out = weaken_saturation(img, f);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const auto p = img.pixel(x, y);
        const auto hsl = to_hsl(p[0], p[1], p[2]);
        const auto rgb = from_hsl(hsl[0], hsl[1] * f, hsl[2]);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(x, y, c), rgb[c], 0.5 + 1e-9);
      }
  }
  const ImageBuffer gray({1, 1}, Rgb{90, 90, 90});
  EXPECT_EQ(weaken_saturation(gray, 0.2), gray);
}

TEST(Compression, ErrorGrowsWithLevel) {
  const auto card = render_test_card({64, 48}, 5);
  double prev = -1;
  for (int level = 1; level <= 5; ++level) {
    const double e = mse(card, apply_operator(card, {D::Compression, level, 0}));
    EXPECT_GT(e, prev);
    prev = e;
  }
  const ImageBuffer flat({13, 9}, Rgb{128, 128, 128});
  EXPECT_EQ(block_dct_quantize(flat, 1.0), flat);
}

TEST(Levels, EveryOperatorDegradesMonotonically) {
  const auto card = render_test_card({48, 48}, 9);
  for (auto t : {D::Blur, D::Noise, D::Pixelate, D::ContrastWeaken, D::SaturateWeaken}) {
    double prev = -1;
    for (int level = 1; level <= 5; ++level) {
      const double e = mse(card, apply_operator(card, {t, level, 123}));
      EXPECT_GT(e, prev) << type_name(t) << " level " << level;
      prev = e;
    }
  }
}

TEST(ApplyPlan, OutsideMaskUntouched) {
  std::mt19937 gen(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims d{31, 29};
    const auto img = random_image(d, gen);
    RegionMask m(d);
    for (int y = 5; y < 20; ++y)
      for (int x = 3 + trial % 5; x < 25; ++x) m.set(x, y);
    Rng rng(gen());
    const auto plan = detail::random_plan(rng, gen());
    const auto out = apply_plan(img, plan, m);
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x) {
        if (!m.test(x, y)) {
          ASSERT_EQ(out.pixel(x, y), img.pixel(x, y));
        }
      }
  }
}

TEST(ApplyPlan, SecondOperatorSeesCompositedFirst) {
  std::mt19937 gen(6);
  const auto img = random_image({16, 16}, gen);
  const auto full = RegionMask::full({16, 16});
  const DistortionPlan plan{{{D::Blur, 2, 0}, {D::Noise, 3, 77}}};
  const auto expect = apply_operator(apply_operator(img, plan.specs[0]), plan.specs[1]);
  EXPECT_EQ(apply_plan(img, plan, full), expect);
}

TEST(Names, ParseRoundTrip) {
  for (auto t : kAllDistortionTypes) EXPECT_EQ(parse_type(type_name(t)), t);
  EXPECT_FALSE(parse_type("Sharpen").has_value());
}
