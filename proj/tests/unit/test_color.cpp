#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "check.hpp"
#include "dcv/color.hpp"

using namespace dcv;
using dcv::testing::gradcheck;
using dcv::testing::random_tensor;
using dcv::testing::weighted;

namespace {

Tensor pixel(double r, double g, double b) { return Tensor::from_values({1, 3, 1, 1}, {r, g, b}); }

}  // namespace

TEST(Grayscale, Examples) {
  EXPECT_DOUBLE_EQ(rgb_to_grayscale(Var(pixel(1, 1, 1))).item(), 1.0);
  EXPECT_DOUBLE_EQ(rgb_to_grayscale(Var(pixel(0, 0, 0))).item(), 0.0);
  EXPECT_DOUBLE_EQ(rgb_to_grayscale(Var(pixel(1, 0, 0))).item(), 0.299);
  EXPECT_THROW(rgb_to_grayscale(Var(Tensor(Shape{1, 2, 3, 3}))), ShapeError);
}

TEST(Grayscale, LinearAndInRange) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Tensor x = random_tensor({2, 3, 4, 5}, rng, 0, 1), y = random_tensor({2, 3, 4, 5}, rng, 0, 1);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const Tensor lhs = rgb_to_grayscale(Var(x) * a + Var(y) * b).value();
    const Tensor rhs = (rgb_to_grayscale(Var(x)) * a + rgb_to_grayscale(Var(y)) * b).value();
    EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
    const Tensor g = rgb_to_grayscale(Var(x)).value();
    for (double v : g.to_vector()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Hsv, Examples) {
  const Tensor red = rgb_to_hsv(Var(pixel(1, 0, 0))).value();
  EXPECT_EQ(red.to_vector(), (std::vector<double>{0, 1, 1}));
  const Tensor gray = rgb_to_hsv(Var(pixel(0.5, 0.5, 0.5))).value();
  EXPECT_EQ(gray.to_vector(), (std::vector<double>{0, 0, 0.5}));
  const Tensor blue = rgb_to_hsv(Var(pixel(0, 0, 1))).value();
  EXPECT_NEAR(blue.at(0), 4.0 * std::numbers::pi / 3.0, 1e-12);
}

TEST(Hsv, RangesAndRoundTrip) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Tensor x = random_tensor({2, 3, 5, 5}, rng, 0, 1);
    const Tensor hsv = rgb_to_hsv(Var(x)).value();
    for (std::int64_t k = 0; k < hsv.numel(); ++k) {
      const std::int64_t c = (k / 25) % 3;
      const double v = hsv.at(k);
      EXPECT_GE(v, 0.0);
      EXPECT_LT(v, c == 0 ? 2 * std::numbers::pi : 1.0 + 1e-15);
    }
    EXPECT_LT(max_abs_diff(hsv_to_rgb(Var(hsv)).value(), x), 1e-6);
  }
}

TEST(Hsv, GradientChecks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    // Distinct, well separated channels keep away from the argmax switch and
    // the hue wrap.
    Tensor x(Shape{1, 3, 3, 3});
    for (std::int64_t p = 0; p < 9; ++p) {
      x.set(p, rng.uniform(0.7, 0.9));
      x.set(9 + p, rng.uniform(0.4, 0.6));
      x.set(18 + p, rng.uniform(0.1, 0.3));
    }
    EXPECT_LT(gradcheck(weighted([](const auto& v) { return rgb_to_hsv(v[0]); }), {x}).max_rel_err, 1e-4);
    const Tensor hsv = rgb_to_hsv(Var(x)).value();
    EXPECT_LT(gradcheck(weighted([](const auto& v) { return hsv_to_rgb(v[0]); }), {hsv}).max_rel_err, 1e-4);
  }
}

TEST(Normalize, Examples) {
  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 4, 4}, rng);
  EXPECT_EQ(max_abs_diff(normalize(Var(x), {0, 0, 0}, {1, 1, 1}).value(), x), 0.0);
  EXPECT_DOUBLE_EQ(normalize(Var(Tensor::full({1, 1, 1, 1}, 0.5)), {0.5}, {0.5}).item(), 0.0);
  EXPECT_THROW(normalize(Var(x), {0, 0, 0}, {1, 0, 1}), ParameterError);
  for (int i = 0; i < 10; ++i) {
    const Tensor y = random_tensor({2, 3, 4, 4}, rng);
    const std::vector<double> m{rng.uniform(), rng.uniform(), rng.uniform()};
    const std::vector<double> s{rng.uniform(0.1, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1)};
    EXPECT_LT(max_abs_diff(denormalize(normalize(Var(y), m, s), m, s).value(), y), 1e-12);
  }
}

TEST(Adjust, IdentityParameters) {
  Rng rng(4);
  const Tensor x = random_tensor({2, 3, 4, 4}, rng, 0, 1);
  EXPECT_EQ(max_abs_diff(adjust_brightness(Var(x), 0.0).value(), x), 0.0);
  EXPECT_EQ(max_abs_diff(adjust_contrast(Var(x), 1.0).value(), x), 0.0);
  EXPECT_EQ(max_abs_diff(adjust_gamma(Var(x), 1.0).value(), x), 0.0);
  EXPECT_EQ(max_abs_diff(adjust_saturation(Var(x), 1.0).value(), x), 0.0);
  EXPECT_EQ(max_abs_diff(adjust_hue(Var(x), 0.0).value(), x), 0.0);
}

TEST(Adjust, Examples) {
  EXPECT_DOUBLE_EQ(adjust_gamma(Var(Tensor::full({1, 1, 1, 1}, 0.5)), 2.0).item(), 0.25);
  EXPECT_THROW(adjust_gamma(Var(Tensor::full({1, 1, 1, 1}, 0.5)), 0.0), ParameterError);
  EXPECT_DOUBLE_EQ(adjust_brightness(Var(Tensor::full({1, 1, 1, 1}, 0.8)), 0.5).item(), 1.0);
  EXPECT_DOUBLE_EQ(adjust_contrast(Var(Tensor::full({1, 1, 1, 1}, 0.4)), 2.0).item(), 0.8);
}

TEST(Adjust, ZeroSaturationIsGray) {
  Rng rng(5);
  const Tensor x = random_tensor({2, 3, 4, 4}, rng, 0, 1);
  const Tensor y = adjust_saturation(Var(x), 0.0).value();
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t p = 0; p < 16; ++p) {
      const double r = y.at((b * 3 + 0) * 16 + p), g = y.at((b * 3 + 1) * 16 + p), bl = y.at((b * 3 + 2) * 16 + p);
      EXPECT_NEAR(r, g, 1e-6);
      EXPECT_NEAR(g, bl, 1e-6);
    }
}

TEST(Adjust, HueShiftByFullTurnIsIdentity) {
  Rng rng(6);
  const Tensor x = random_tensor({1, 3, 4, 4}, rng, 0.05, 0.95);
  EXPECT_LT(max_abs_diff(adjust_hue(Var(x), 2 * std::numbers::pi).value(), x), 1e-6);
}

TEST(ColorSpaces, RoundTrips) {
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    const Tensor x = random_tensor({2, 3, 3, 3}, rng, 0, 1);
    EXPECT_LT(max_abs_diff(xyz_to_rgb(rgb_to_xyz(Var(x))).value(), x), 1e-12);
    EXPECT_LT(max_abs_diff(ycbcr_to_rgb(rgb_to_ycbcr(Var(x))).value(), x), 1e-12);
    EXPECT_EQ(max_abs_diff(bgr_to_rgb(rgb_to_bgr(Var(x))).value(), x), 0.0);
    EXPECT_EQ(max_abs_diff(rgba_to_rgb(rgb_to_rgba(Var(x), 1.0)).value(), x), 0.0);
  }
  const Tensor white = rgb_to_xyz(Var(pixel(1, 1, 1))).value();
  EXPECT_NEAR(white.at(1), 1.0, 1e-4);  // D65 white has Y = 1
  EXPECT_EQ(rgb_to_rgba(Var(pixel(1, 1, 1)), 0.5).shape(), (Shape{1, 4, 1, 1}));
}

TEST(ColorSpaces, GradientChecks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Tensor x = random_tensor({1, 3, 3, 4}, rng, 0.1, 0.9);
    auto check = [&](auto f) { EXPECT_LT(gradcheck(weighted(f), {x}).max_rel_err, 1e-4) << seed; };
    check([](const auto& v) { return rgb_to_grayscale(v[0]); });
    check([](const auto& v) { return rgb_to_xyz(v[0]); });
    check([](const auto& v) { return rgb_to_ycbcr(v[0]); });
    check([](const auto& v) { return normalize(v[0], {0.1, 0.2, 0.3}, {0.5, 0.6, 0.7}); });
    check([](const auto& v) { return adjust_brightness(v[0], 0.05); });
    check([](const auto& v) { return adjust_contrast(v[0], 1.05); });
    check([](const auto& v) { return adjust_gamma(v[0], 1.7); });
  }
}
