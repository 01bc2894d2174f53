#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "check.hpp"
#include "oracles.hpp"
#include "dcv/filters.hpp"
#include "dcv/losses.hpp"

using namespace dcv;
using dcv::testing::gradcheck;
using dcv::testing::image_from;
using dcv::testing::naive_kl;
using dcv::testing::naive_ssim;
using dcv::testing::random_ids;
using dcv::testing::random_probs;
using dcv::testing::random_simplex;
using dcv::testing::random_tensor;
using dcv::testing::weighted;

TEST(Ssim, Examples) {
  Rng rng(1);
  const Tensor x = random_tensor({1, 2, 12, 12}, rng, 0, 1);
  const Tensor m = ssim(Var(x), Var(x)).value();
  for (double v : m.to_vector()) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_NEAR(ssim_loss(Var(x), Var(x)).item(), 0.0, 1e-12);

  const Tensor cb = image_from(1, 1, 16, 16, [](auto, auto, auto y, auto x) { return double((x + y) % 2); });
  const Tensor inv = image_from(1, 1, 16, 16, [](auto, auto, auto y, auto x) { return double(1 - (x + y) % 2); });
  const Tensor neg = ssim(Var(cb), Var(inv)).value();
  const Tensor oracle = naive_ssim(cb, inv, 11, 1.0);
  for (std::int64_t i = 0; i < neg.numel(); ++i) {
    EXPECT_LT(neg.at(i), 0.0);
    EXPECT_NEAR(neg.at(i), oracle.at(i), 1e-6);
  }
  EXPECT_THROW(ssim(Var(x), Var(Tensor(Shape{1, 2, 12, 11}))), ShapeError);
}

TEST(Ssim, MatchesWindowedOracle) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const Tensor x = random_tensor({1, 1, 7, 8}, rng, 0, 1), y = random_tensor({1, 1, 7, 8}, rng, 0, 1);
    const std::int64_t win = (t % 3 == 0) ? 11 : 5;
    const double mv = (t % 2 == 0) ? 1.0 : 2.0;
    const Tensor s = ssim(Var(x), Var(y), win, mv).value();
    ASSERT_LT(max_abs_diff(s, naive_ssim(x, y, win, mv)), 1e-6);
    for (double v : s.to_vector()) {
      ASSERT_GE(v, -1.0);
      ASSERT_LE(v, 1.0);
    }
    const double l = ssim_loss(Var(x), Var(y), win, mv).item();
    ASSERT_GE(l, 0.0);
    ASSERT_LE(l, 1.0);
  }
}

TEST(Psnr, Examples) {
  const Tensor x = Tensor::full({1, 1, 4, 4}, 0.5);
  const Tensor y = Tensor::full({1, 1, 4, 4}, 0.6);
  EXPECT_NEAR(psnr(Var(x), Var(y)).item(), 20.0, 1e-9);
  EXPECT_EQ(psnr(Var(x), Var(x)).item(), std::numeric_limits<double>::infinity());
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Tensor a = random_tensor({1, 2, 5, 5}, rng, 0, 1), b = random_tensor({1, 2, 5, 5}, rng, 0, 1);
    double mse = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) mse += std::pow(a.at(i) - b.at(i), 2);
    mse /= static_cast<double>(a.numel());
    EXPECT_NEAR(psnr(Var(a), Var(b), 2.0).item(), 10 * std::log10(4.0 / mse), 1e-10);
  }
}

TEST(TotalVariation, Examples) {
  EXPECT_EQ(total_variation(Var(Tensor::full({2, 3, 4, 4}, 0.3))).item(), 0.0);
  EXPECT_DOUBLE_EQ(total_variation(Var(Tensor::from_values({1, 1, 2, 2}, {0, 1, 0, 1}))).item(), 2.0);
  Rng rng(4);
  const Tensor x = random_tensor({1, 2, 5, 5}, rng);
  EXPECT_NEAR(total_variation(Var(x) * -3.0).item(), 3.0 * total_variation(Var(x)).item(), 1e-12);
}

TEST(TotalVariation, MatchesNaive) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::int64_t h = 1 + t % 5, w = 1 + t % 7;
    const Tensor x = random_tensor({2, 2, h, w}, rng);
    double tv = 0;
    for (std::int64_t b = 0; b < 2; ++b)
      for (std::int64_t c = 0; c < 2; ++c)
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t xx = 0; xx < w; ++xx) {
            if (y + 1 < h) tv += std::abs(x.at({b, c, y + 1, xx}) - x.at({b, c, y, xx}));
            if (xx + 1 < w) tv += std::abs(x.at({b, c, y, xx + 1}) - x.at({b, c, y, xx}));
          }
    ASSERT_NEAR(total_variation(Var(x)).item(), tv, 1e-12);
  }
}

TEST(Tversky, Examples) {
  Rng rng(6);
  const Tensor ids = random_ids(2, 3, 4, 4, rng);
  Tensor perfect(Shape{2, 3, 4, 4});
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t i = 0; i < 16; ++i)
      perfect.set((b * 3 + static_cast<std::int64_t>(ids.at(b * 16 + i))) * 16 + i, 1.0);
  EXPECT_LE(tversky_loss(Var(perfect), ids, 0.3, 0.7).item(), 1e-5);
  EXPECT_LE(dice_loss(Var(perfect), ids).item(), 1e-5);

  const Tensor p = random_probs(2, 3, 4, 4, rng);
  EXPECT_EQ(dice_loss(Var(p), ids).item(), tversky_loss(Var(p), ids, 0.5, 0.5).item());

  // Uniform prediction, balanced two-class target: TP = FP = FN = 1 per class.
  const Tensor uni = Tensor::full({1, 2, 2, 2}, 0.5);
  const Tensor bal = Tensor::from_values({1, 2, 2}, {0, 1, 0, 1});
  EXPECT_NEAR(dice_loss(Var(uni), bal).item(), 1.0 - (1 + 1e-6) / (2 + 1e-6), 1e-12);

  Tensor bad = ids.clone();
  bad.set(0, 3.0);
  EXPECT_THROW(dice_loss(Var(p), bad), ParameterError);
}

TEST(Tversky, MatchesCountingOracle) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const std::int64_t k = 2 + t % 3;
    const Tensor p = random_probs(2, k, 3, 4, rng);
    const Tensor ids = random_ids(2, k, 3, 4, rng);
    const double a = rng.uniform(0, 1), b = rng.uniform(0, 1);
    double acc = 0;
    for (std::int64_t c = 0; c < k; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::int64_t n = 0; n < 2; ++n)
        for (std::int64_t i = 0; i < 12; ++i) {
          const double pv = p.at((n * k + c) * 12 + i);
          const bool is = static_cast<std::int64_t>(ids.at(n * 12 + i)) == c;
          tp += is ? pv : 0;
          fp += is ? 0 : pv;
          fn += is ? 1 - pv : 0;
        }
      acc += (tp + 1e-6) / (tp + a * fp + b * fn + 1e-6);
    }
    ASSERT_NEAR(tversky_loss(Var(p), ids, a, b).item(), 1 - acc / static_cast<double>(k), 1e-12);
  }
}

TEST(Tversky, MonotoneInFalsePositives) {
  // All 2x2 binary masks as hard predictions against a fixed target: turning
  // a true negative into a false positive never lowers the loss.
  const Tensor target = Tensor::from_values({1, 2, 2}, {1, 0, 0, 1});
  auto loss_for = [&](int mask) {
    Tensor p(Shape{1, 2, 2, 2});
    for (int i = 0; i < 4; ++i) {
      const double fg = (mask >> i) & 1;
      p.set(4 + i, fg);
      p.set(i, 1 - fg);
    }
    return tversky_loss(Var(p), target, 0.7, 0.3).item();
  };
  for (int mask = 0; mask < 16; ++mask)
    for (int i : {1, 2}) {  // background pixels
      if ((mask >> i) & 1) continue;
      EXPECT_GE(loss_for(mask | (1 << i)), loss_for(mask) - 1e-12);
    }
}

TEST(Focal, Examples) {
  Rng rng(8);
  const Tensor logits = random_tensor({2, 4, 3, 3}, rng, -2, 2);
  const Tensor ids = random_ids(2, 4, 3, 3, rng);
  double ce = 0;
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t i = 0; i < 9; ++i) {
      double s = 0;
      for (std::int64_t c = 0; c < 4; ++c) s += std::exp(logits.at((b * 4 + c) * 9 + i));
      const auto t = static_cast<std::int64_t>(ids.at(b * 9 + i));
      ce += -(logits.at((b * 4 + t) * 9 + i) - std::log(s));
    }
  ce /= 18;
  EXPECT_NEAR(focal_loss(Var(logits), ids, 0.0, 1.0).item(), ce, 1e-9);

  const Tensor two = Tensor::from_values({1, 2, 1, 1}, {2.0, 0.0});
  const Tensor zero = Tensor::from_values({1, 1, 1}, {0.0});
  const double p = std::exp(2.0) / (std::exp(2.0) + 1.0);
  EXPECT_NEAR(focal_loss(Var(two), zero, 2.0).item(), -std::pow(1 - p, 2) * std::log(p), 1e-9);

  const Tensor sure = Tensor::from_values({1, 2, 1, 1}, {40.0, 0.0});
  EXPECT_LT(focal_loss(Var(sure), zero, 2.0).item(), 1e-30);
}

TEST(Divergence, Examples) {
  const Var p(Tensor::from_values({2}, {1, 0})), q(Tensor::from_values({2}, {0.5, 0.5}));
  EXPECT_NEAR(kl_div(p, q).item(), std::log(2.0), 1e-12);
  EXPECT_EQ(kl_div(q, q).item(), 0.0);
  EXPECT_NEAR(js_div(p, q).item(), js_div(q, p).item(), 1e-12);
  EXPECT_THROW(kl_div(Var(Tensor::from_values({2}, {0.7, 0.7})), q), ParameterError);
  EXPECT_THROW(js_div(Var(Tensor::from_values({2}, {1.5, -0.5})), q), ParameterError);
}

TEST(Divergence, MatchesNaive) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const Tensor p = random_simplex(3, 5, rng, true), q = random_simplex(3, 5, rng, t % 2 == 0);
    ASSERT_NEAR(kl_div(Var(p), Var(q)).item(), naive_kl(p, q), 1e-12);
    Tensor m(p.shape());
    for (std::int64_t i = 0; i < p.numel(); ++i) m.set(i, 0.5 * (p.at(i) + q.at(i)));
    ASSERT_NEAR(js_div(Var(p), Var(q)).item(), 0.5 * naive_kl(p, m) + 0.5 * naive_kl(q, m), 1e-12);
    ASSERT_NEAR(js_div(Var(p), Var(q)).item(), js_div(Var(q), Var(p)).item(), 1e-12);
  }
}

TEST(EdgeAware, Examples) {
  Rng rng(10);
  const Tensor x = random_tensor({1, 1, 8, 8}, rng, 0, 1), y = random_tensor({1, 1, 8, 8}, rng, 0, 1);
  EXPECT_EQ(edge_aware_recon_loss(Var(x), Var(x), 0.3).item(), 0.0);
  EXPECT_DOUBLE_EQ(edge_aware_recon_loss(Var(x), Var(y), 1.0).item(), mean(abs(Var(x) - Var(y))).item());
  EXPECT_THROW(edge_aware_recon_loss(Var(x), Var(y), 1.5), ParameterError);

  const Tensor r = image_from(1, 1, 8, 8, [](auto, auto, auto, auto xx) { return 0.1 * xx; });
  const Tensor rs = image_from(1, 1, 8, 8, [](auto, auto, auto, auto xx) { return 0.1 * (xx + 1) + 0.05; });
  double l1 = 0, le = 0;
  const Tensor er = sobel_edges(Var(r)).value(), ers = sobel_edges(Var(rs)).value();
  for (std::int64_t i = 0; i < 64; ++i) {
    l1 += std::abs(r.at(i) - rs.at(i));
    le += std::abs(er.at(i) - ers.at(i));
  }
  EXPECT_NEAR(edge_aware_recon_loss(Var(r), Var(rs), 0.5).item(), 0.5 * l1 / 64 + 0.5 * le / 64, 1e-15);
}

TEST(Smoothness, Examples) {
  Rng rng(11);
  const Tensor d = random_tensor({1, 1, 5, 6}, rng, 1, 2);
  const Tensor flat = Tensor::full({1, 3, 5, 6}, 0.4);
  double grad = 0;
  for (std::int64_t y = 0; y < 5; ++y)
    for (std::int64_t x = 0; x < 6; ++x) {
      if (x + 1 < 6) grad += std::abs(d.at({0, 0, y, x + 1}) - d.at({0, 0, y, x}));
      if (y + 1 < 5) grad += std::abs(d.at({0, 0, y + 1, x}) - d.at({0, 0, y, x}));
    }
  EXPECT_NEAR(smoothness_loss(Var(d), Var(flat)).item(), grad / 30, 1e-12);

  const Tensor img = random_tensor({1, 3, 5, 6}, rng, 0, 1);
  EXPECT_EQ(multiview_photo_loss(Var(img), Var(img), Var(Tensor::full({1, 1, 5, 6}, 2.0)), 0.85, 0.1).item(), 0.0);
}

TEST(Multiview, MatchesComponentOracle) {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const Tensor a = random_tensor({1, 2, 6, 7}, rng, 0, 1), b = random_tensor({1, 2, 6, 7}, rng, 0, 1);
    const Tensor d = random_tensor({1, 1, 6, 7}, rng, 0.5, 2);
    double ssim_term = 0, l1 = 0, sm = 0;
    const Tensor s = naive_ssim(a, b, 11, 1.0);
    for (std::int64_t i = 0; i < a.numel(); ++i) {
      ssim_term += (1 - s.at(i)) / 2;
      l1 += std::abs(a.at(i) - b.at(i));
    }
    ssim_term /= static_cast<double>(a.numel());
    l1 /= static_cast<double>(a.numel());
    for (std::int64_t y = 0; y < 6; ++y)
      for (std::int64_t x = 0; x < 7; ++x) {
        double gx = 0, gy = 0;
        for (std::int64_t c = 0; c < 2; ++c) {
          if (x + 1 < 7) gx += std::abs(a.at({0, c, y, x + 1}) - a.at({0, c, y, x}));
          if (y + 1 < 6) gy += std::abs(a.at({0, c, y + 1, x}) - a.at({0, c, y, x}));
        }
        if (x + 1 < 7) sm += std::abs(d.at({0, 0, y, x + 1}) - d.at({0, 0, y, x})) * std::exp(-gx);
        if (y + 1 < 6) sm += std::abs(d.at({0, 0, y + 1, x}) - d.at({0, 0, y, x})) * std::exp(-gy);
      }
    sm /= 42;
    EXPECT_NEAR(multiview_photo_loss(Var(a), Var(b), Var(d), 0.85, 0.1).item(), 0.85 * ssim_term + 0.15 * l1 + 0.1 * sm,
                1e-9);
  }
}

TEST(Losses, GradientChecks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Tensor x = random_tensor({1, 2, 7, 7}, rng, 0, 1), y = random_tensor({1, 2, 7, 7}, rng, 0, 1);
    const Tensor d = random_tensor({1, 1, 7, 7}, rng, 0.5, 2);
    const Tensor p = random_probs(1, 3, 4, 4, rng), ids = random_ids(1, 3, 4, 4, rng);
    const Tensor logits = random_tensor({1, 3, 4, 4}, rng, -2, 2);
    const Tensor sp = random_simplex(3, 4, rng, false), sq = random_simplex(3, 4, rng, false);
    auto check = [&](const char* name, auto f, std::vector<Tensor> in) {
      EXPECT_LT(gradcheck(f, in).max_rel_err, 1e-4) << name << " seed " << seed;
    };
    check("ssim", [](const auto& v) { return ssim_loss(v[0], v[1], 5); }, {x, y});
    check("ssim blur chain", [&](const auto& v) { return ssim_loss(gaussian_blur2d(v[0], 3, 3, 1, 1), Var(y)); }, {x});
    check("psnr", [](const auto& v) { return psnr(v[0], v[1]); }, {x, y});
    check("tv", [](const auto& v) { return total_variation(v[0]); }, {x});
    check("tversky", [&](const auto& v) { return tversky_loss(v[0], ids, 0.3, 0.7); }, {p});
    check("focal", [&](const auto& v) { return focal_loss(v[0], ids, 2.0, 0.25); }, {logits});
    check("focal ce", [&](const auto& v) { return focal_loss(v[0], ids, 0.0); }, {logits});
    // Gradients of the divergences in the ambient space (inputs are not
    // re-checked for normalization under perturbation).
    check("kl", [](const auto& v) { return kl_div(v[0] / sum(v[0], {1}, true), v[1] / sum(v[1], {1}, true)); }, {sp, sq});
    check("js", [](const auto& v) { return js_div(v[0] / sum(v[0], {1}, true), v[1] / sum(v[1], {1}, true)); }, {sp, sq});
    check("edge aware", [](const auto& v) { return edge_aware_recon_loss(v[0], v[1], 0.5); }, {x, y});
    check("smoothness", [](const auto& v) { return smoothness_loss(v[0], v[1]); }, {d, x});
    check("multiview", [](const auto& v) { return multiview_photo_loss(v[0], v[1], v[2], 0.85, 0.1); }, {x, y, d});
  }
}
