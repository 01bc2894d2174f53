#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "check.hpp"
#include "oracles.hpp"
#include "dcv/augment.hpp"
#include "dcv/geometry.hpp"
#include "dcv/synthetic.hpp"

using namespace dcv;
using dcv::testing::gradcheck;
using dcv::testing::naive_warp;
using dcv::testing::random_tensor;
using dcv::testing::weighted;

namespace {

Tensor batch_of(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w, std::uint64_t seed) {
  std::vector<Var> parts;
  for (std::int64_t i = 0; i < n; ++i) parts.emplace_back(textured_image(h, w, c, seed + static_cast<std::uint64_t>(i)));
  return concat(parts, 0).value();
}

bool is_identity(const Tensor& t) {
  for (std::int64_t i = 0; i < t.size(0); ++i)
    if ((to_mat3(t, i) - Mat3::Identity()).norm() != 0.0) return false;
  return true;
}

void expect_same(const AugResult& a, const AugResult& b) {
  EXPECT_EQ(max_abs_diff(a.output.value(), b.output.value()), 0.0);
  EXPECT_EQ(max_abs_diff(a.transform, b.transform), 0.0);
  EXPECT_EQ(a.params, b.params);
}

double interior_diff(const Tensor& a, const Tensor& b, std::int64_t margin) {
  const std::int64_t n = a.size(0), c = a.size(1), h = a.size(2), w = a.size(3);
  double m = 0;
  for (std::int64_t i = 0; i < n * c; ++i)
    for (std::int64_t y = margin; y < h - margin; ++y)
      for (std::int64_t x = margin; x < w - margin; ++x) m = std::max(m, std::abs(a.at((i * h + y) * w + x) - b.at((i * h + y) * w + x)));
  return m;
}

}  // namespace

TEST(Flip, ProbabilityExtremes) {
  const Var x(batch_of(3, 2, 9, 11, 1));
  const Rng rng(5);
  for (auto fn : {random_hflip, random_vflip}) {
    const auto none = fn(x, 0.0, rng);
    EXPECT_EQ(max_abs_diff(none.output.value(), x.value()), 0.0);
    EXPECT_TRUE(is_identity(none.transform));
    const auto all = fn(x, 1.0, rng);
    for (const auto& p : all.params) EXPECT_EQ(p.at("flip"), 1.0);
    const auto twice = fn(all.output, 1.0, rng);
    EXPECT_EQ(max_abs_diff(twice.output.value(), x.value()), 0.0);
    EXPECT_THROW(fn(x, 1.5, rng), ParameterError);
  }
  const auto h = random_hflip(x, 1.0, rng);
  EXPECT_EQ(h.output.value().at({0, 1, 2, 0}), x.value().at({0, 1, 2, 10}));
  const auto v = random_vflip(x, 1.0, rng);
  EXPECT_EQ(v.output.value().at({2, 0, 0, 3}), x.value().at({2, 0, 8, 3}));
}

TEST(Flip, WarpByTransformIsExact) {
  const Var x(batch_of(8, 3, 12, 10, 2));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (auto fn : {random_hflip, random_vflip}) {
      const auto r = fn(x, 0.5, Rng(seed));
      const Tensor w = warp_perspective(x, Var(r.transform), 12, 10).value();
      EXPECT_EQ(max_abs_diff(w, r.output.value()), 0.0);
    }
  }
}

TEST(Affine, DegenerateRangesAreIdentity) {
  const Var x(batch_of(2, 1, 16, 16, 3));
  const auto r = random_affine(x, {0, 0}, {0, 0}, {1, 1}, Rng(1));
  EXPECT_TRUE(is_identity(r.transform));
  EXPECT_EQ(max_abs_diff(r.output.value(), x.value()), 0.0);
}

TEST(Affine, RejectsInvalidRanges) {
  const Var x(batch_of(1, 1, 8, 8, 3));
  EXPECT_THROW(random_affine(x, {10, -10}, {0, 0}, {1, 1}, Rng(1)), ParameterError);
  EXPECT_THROW(random_affine(x, {0, 0}, {0.1, 0}, {1, 1}, Rng(1)), ParameterError);
  EXPECT_THROW(random_affine(x, {0, 0}, {0, 0}, {0, 1}, Rng(1)), ParameterError);
}

TEST(Affine, DeterministicAndWarpConsistent) {
  const Var x(batch_of(4, 3, 20, 24, 4));
  const Rng rng(99);
  const auto a = random_affine(x, {-30, 30}, {-0.1, 0.1}, {0.8, 1.2}, rng);
  const auto b = random_affine(x, {-30, 30}, {-0.1, 0.1}, {0.8, 1.2}, rng);
  expect_same(a, b);
  const Tensor w = warp_perspective(x, Var(a.transform), 20, 24).value();
  EXPECT_LT(max_abs_diff(w, a.output.value()), 1e-6);
  EXPECT_LT(max_abs_diff(naive_warp(x.value(), a.transform, 20, 24), a.output.value()), 1e-9);
}

TEST(Affine, TransformMatchesParameters) {
  const Var x(batch_of(3, 1, 21, 31, 5));
  const auto r = random_affine(x, {-45, 45}, {-0.2, 0.2}, {0.5, 2}, Rng(3));
  for (std::int64_t i = 0; i < 3; ++i) {
    const auto& p = r.params[static_cast<std::size_t>(i)];
    const Mat3 t = to_mat3(r.transform, i);
    const Vec3 c = t * Vec3(15, 10, 1);
    EXPECT_NEAR(c.x(), 15 + p.at("tx"), 1e-9);
    EXPECT_NEAR(c.y(), 10 + p.at("ty"), 1e-9);
    const double det = t.topLeftCorner<2, 2>().determinant();
    EXPECT_NEAR(det, p.at("scale") * p.at("scale"), 1e-9);
    // Counter-clockwise on screen: +x turns towards -y.
    const Vec3 e = t * Vec3(16, 10, 1) - c;
    EXPECT_NEAR(std::atan2(-e.y(), e.x()) * 180 / std::numbers::pi, p.at("angle"), 1e-9);
  }
}

TEST(Affine, Gradients) {
  Rng rng(6);
  for (int c = 0; c < 5; ++c) {
    const Tensor x = random_tensor({2, 1, 6, 7}, rng, 0.0, 1.0);
    const Rng r(static_cast<std::uint64_t>(c));
    const auto g = gradcheck(
        weighted([&](const std::vector<Var>& v) { return random_affine(v[0], {-20, 20}, {-0.1, 0.1}, {0.9, 1.1}, r).output; }), {x});
    EXPECT_LT(g.max_rel_err, 1e-4);
  }
}

TEST(Jitter, IdentityRangesAndContract) {
  const Var x(batch_of(3, 3, 8, 8, 7));
  const auto r = color_jitter(x, {0, 0}, {1, 1}, {1, 1}, {0, 0}, Rng(1));
  EXPECT_EQ(max_abs_diff(r.output.value(), x.value()), 0.0);
  EXPECT_TRUE(is_identity(r.transform));
  const auto j = color_jitter(x, {-0.1, 0.1}, {0.8, 1.2}, {0.5, 1.5}, {-0.3, 0.3}, Rng(2));
  EXPECT_TRUE(is_identity(j.transform));
  expect_same(j, color_jitter(x, {-0.1, 0.1}, {0.8, 1.2}, {0.5, 1.5}, {-0.3, 0.3}, Rng(2)));
  EXPECT_GT(max_abs_diff(j.output.value(), x.value()), 0.0);
}

TEST(Jitter, ErrorsAndOrder) {
  const Var rgb(batch_of(1, 3, 5, 5, 8)), gray(batch_of(1, 1, 5, 5, 8));
  EXPECT_THROW(color_jitter(rgb, {0.2, 0.1}, {1, 1}, {1, 1}, {0, 0}, Rng(1)), ParameterError);
  EXPECT_THROW(color_jitter(rgb, {0, 0}, {-1, 1}, {1, 1}, {0, 0}, Rng(1)), ParameterError);
  EXPECT_THROW(color_jitter(gray, {0, 0}, {1, 1}, {0.5, 1}, {0, 0}, Rng(1)), ShapeError);
  // Brightness then contrast: clamp(clamp(x + b) * c).
  const auto r = color_jitter(gray, {0.3, 0.3}, {1.5, 1.5}, {1, 1}, {0, 0}, Rng(1));
  for (std::int64_t i = 0; i < 25; ++i) {
    const double want = std::clamp(std::clamp(gray.value().at(i) + 0.3, 0.0, 1.0) * 1.5, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(r.output.value().at(i), want);
  }
}

TEST(Jitter, Gradients) {
  Rng rng(9);
  for (int c = 0; c < 5; ++c) {
    const Tensor x = random_tensor({2, 3, 4, 4}, rng, 0.3, 0.6);
    const Rng r(static_cast<std::uint64_t>(c));
    const auto g = gradcheck(weighted([&](const std::vector<Var>& v) {
                               return color_jitter(v[0], {-0.05, 0.05}, {0.9, 1.1}, {0.8, 1.2}, {-0.2, 0.2}, r).output;
                             }),
                             {x});
    EXPECT_LT(g.max_rel_err, 1e-4);
  }
}

TEST(Erasing, BoxFilledAndIdentityTransform) {
  const Var x(batch_of(4, 2, 16, 20, 10));
  const auto none = random_erasing(x, 0.0, {0.1, 0.3}, {0.5, 2}, 0.0, Rng(1));
  EXPECT_EQ(max_abs_diff(none.output.value(), x.value()), 0.0);
  const auto r = random_erasing(x, 1.0, {0.1, 0.3}, {0.5, 2}, -1.0, Rng(1));
  EXPECT_TRUE(is_identity(r.transform));
  for (std::int64_t i = 0; i < 4; ++i) {
    const auto& p = r.params[static_cast<std::size_t>(i)];
    std::int64_t filled = 0;
    for (std::int64_t k = 0; k < 2 * 16 * 20; ++k) filled += r.output.value().at(i * 640 + k) == -1.0 ? 1 : 0;
    EXPECT_EQ(filled, 2 * static_cast<std::int64_t>(p.at("w") * p.at("h")));
  }
  EXPECT_THROW(random_erasing(x, 1.0, {0, 2}, {1, 1}, 0.0, Rng(1)), ParameterError);
}

TEST(ResizedCrop, WarpConsistentAndFullBoxIsResize) {
  const Var x(batch_of(3, 1, 24, 32, 11));
  const auto r = random_resized_crop(x, 16, 16, {0.3, 0.8}, {0.75, 1.33}, Rng(4));
  EXPECT_EQ(r.output.shape(), (Shape{3, 1, 16, 16}));
  EXPECT_LT(max_abs_diff(warp_perspective(x, Var(r.transform), 16, 16).value(), r.output.value()), 1e-6);
  EXPECT_LT(max_abs_diff(naive_warp(x.value(), r.transform, 16, 16), r.output.value()), 1e-9);
  const auto full = random_resized_crop(x, 12, 20, {1, 1}, {32.0 / 24.0, 32.0 / 24.0}, Rng(4));
  EXPECT_LT(max_abs_diff(full.output.value(), resize(x, 12, 20).value()), 1e-12);
}

TEST(Compose, SingleOpAndDoubleFlip) {
  const Var x(batch_of(3, 3, 10, 12, 12));
  const Rng rng(17);
  expect_same(compose({aug::affine({-10, 10}, {0, 0.1}, {1, 1})})(x, rng), random_affine(x, {-10, 10}, {0, 0.1}, {1, 1}, rng));
  const auto r = compose({aug::hflip(1.0), aug::hflip(1.0)})(x, rng);
  EXPECT_TRUE(is_identity(r.transform));
  EXPECT_EQ(max_abs_diff(r.output.value(), x.value()), 0.0);
  EXPECT_EQ(r.params[0].at("0:flip"), 1.0);
  EXPECT_EQ(r.params[0].at("1:flip"), 1.0);
  EXPECT_THROW(compose({}), ParameterError);
}

TEST(Compose, ChainedTransformReproducesOutput) {
  const Var x(batch_of(4, 1, 32, 32, 13));
  const auto chain = compose({aug::vflip(1.0), aug::affine({-15, 15}, {-0.05, 0.05}, {0.9, 1.1}), aug::jitter({0, 0}, {1, 1}, {1, 1}, {0, 0})});
  const auto r = chain(x, Rng(21));
  const Tensor w = warp_perspective(x, Var(r.transform), 32, 32).value();
  EXPECT_LT(max_abs_diff(w, r.output.value()), 1e-2);
  // Inverse of the composed matrix undoes the geometry away from the borders.
  std::vector<Mat3> inv;
  for (std::int64_t i = 0; i < 4; ++i) inv.push_back(to_mat3(r.transform, i).inverse());
  const Tensor back = warp_perspective(r.output, Var(to_tensor(inv)), 32, 32).value();
  EXPECT_LT(interior_diff(back, x.value(), 10), 0.05);
}

TEST(Compose, PerSampleIndependence) {
  Tensor a = batch_of(3, 1, 12, 12, 20), b = a.clone();
  const Tensor other = textured_image(12, 12, 1, 77);
  for (std::int64_t k = 0; k < 144; ++k) b.set(144 + k, other.at(k));
  const auto chain = compose({aug::hflip(0.5), aug::affine({-20, 20}, {-0.1, 0.1}, {0.9, 1.1})});
  const auto ra = chain(Var(a), Rng(3)), rb = chain(Var(b), Rng(3));
  for (std::int64_t i : {0, 2}) {
    for (std::int64_t k = 0; k < 144; ++k) EXPECT_EQ(ra.output.value().at(i * 144 + k), rb.output.value().at(i * 144 + k));
  }
  EXPECT_EQ(max_abs_diff(ra.transform, rb.transform), 0.0);
}
