#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include "dcv/demos.hpp"
#include "dcv/features.hpp"
#include "dcv/image_io.hpp"
#include "dcv/ops.hpp"

namespace dcv {

RunConfig attack_defaults() {
  RunConfig c;
  c.levels = 1;
  c.iters = 300;
  c.optim = {OptimizerKind::adam, 3e-3};
  c.alpha = 1.0;
  c.beta = 10.0;
  return c;
}

namespace {

std::int64_t verified(const Features& fa, const Features& fb, const Mat3& h, const AttackOptions& o,
                      std::uint64_t seed) {
  if (fa.keypoints.empty() || fb.keypoints.empty()) return 0;
  const auto m = match_mnn(fa.descriptors.value(), fb.descriptors.value());
  if (m.size() < 4) return 0;
  std::vector<Vec2> src, dst;
  for (const auto& p : m) {
    const auto& a = fa.keypoints[static_cast<std::size_t>(p.ia)];
    const auto& b = fb.keypoints[static_cast<std::size_t>(p.ib)];
    src.emplace_back(a.x, a.y);
    dst.emplace_back(b.x, b.y);
  }
  RansacResult r;
  try {
    r = ransac_homography(src, dst, o.inlier_px, o.ransac_iters, seed);
  } catch (const EstimationError&) {
    return 0;
  }
  std::int64_t n = 0;
  for (std::size_t i = 0; i < src.size(); ++i)
    if (r.inliers[i] && (transform_point(h, src[i]) - dst[i]).norm() <= o.inlier_px) ++n;
  return n;
}

void require_gray_image(const Tensor& t, const char* what) {
  if (t.ndim() != 4 || t.size(0) != 1 || t.size(1) != 1) {
    throw ShapeError(std::string("attack: ") + what + " must be 1 x 1 x H x W, got " + to_string(t.shape()));
  }
}

}  // namespace

std::int64_t count_verified_matches(const Tensor& a, const Tensor& b, const Mat3& h, const AttackOptions& options,
                                    std::uint64_t seed) {
  return verified(detect_and_describe(Var(a), options.max_keypoints), detect_and_describe(Var(b), options.max_keypoints),
                  h, options, seed);
}

Var attack_reg_loss(const Var& a, const Var& b, const Tensor& a0, const Tensor& b0) {
  const double n = static_cast<double>(a.numel() + b.numel());
  return (sum(square(a - Var(a0))) + sum(square(b - Var(b0)))) / n;
}

AttackResult attack(const Tensor& img_a, const Tensor& img_b, const Mat3& h_target, const RunConfig& config,
                    const AttackOptions& options) {
  config.validate();
  require_gray_image(img_a, "img_a");
  require_gray_image(img_b, "img_b");
  if (options.redetect_every < 1) throw ParameterError("attack: redetect_every must be >= 1");

  AttackResult res;
  Tensor a = img_a.clone(), b = img_b.clone();
  const Tensor a0 = img_a.clone(), b0 = img_b.clone();
  Optimizer opt(config.optim);

  std::vector<Keypoint> ka, kb;
  std::vector<std::int64_t> pi, pj;  // pairs (index in a, index in b)
  for (std::int64_t it = 0; it < config.iters; ++it) {
    if (it % options.redetect_every == 0) {
      const Features fa = detect_and_describe(Var(a), options.max_keypoints);
      const Features fb = detect_and_describe(Var(b), options.max_keypoints);
      if (fa.keypoints.empty() || fb.keypoints.empty()) throw EstimationError("attack: no keypoints detected");
      const std::int64_t count = verified(fa, fb, h_target, options, config.seed);
      if (it == 0) res.matches_before = count;
      res.match_trace.emplace_back(it, count);
      ka = fa.keypoints;
      kb = fb.keypoints;
      // Each keypoint of a is paired with the keypoint of b closest to its reprojection.
      pi.clear();
      pj.clear();
      for (std::size_t i = 0; i < ka.size(); ++i) {
        const Vec2 q = transform_point(h_target, Vec2(ka[i].x, ka[i].y));
        double best = std::numeric_limits<double>::infinity();
        std::size_t bj = 0;
        for (std::size_t j = 0; j < kb.size(); ++j) {
          const double d = (q - Vec2(kb[j].x, kb[j].y)).norm();
          if (d < best) {
            best = d;
            bj = j;
          }
        }
        if (best <= options.pair_radius) {
          pi.push_back(static_cast<std::int64_t>(i));
          pj.push_back(static_cast<std::int64_t>(bj));
        }
      }
    }

    Tape tape;
    const Var va = tape.leaf(a), vb = tape.leaf(b);
    Var loss = config.beta * attack_reg_loss(va, vb, a0, b0);
    double l_loc = 0, l_desc = 0;
    if (!pi.empty() && kb.size() > 1) {
      const Features fa = describe_at(va, ka), fb = describe_at(vb, kb);
      const auto p = static_cast<std::int64_t>(pi.size());
      const auto m = static_cast<std::int64_t>(kb.size());
      std::vector<std::int64_t> ia2, jb2, ia128, jb128, pos;
      for (std::int64_t k = 0; k < p; ++k) {
        const std::int64_t i = pi[static_cast<std::size_t>(k)], j = pj[static_cast<std::size_t>(k)];
        ia2.insert(ia2.end(), {2 * i, 2 * i + 1});
        jb2.insert(jb2.end(), {2 * j, 2 * j + 1});
        for (std::int64_t c = 0; c < 128; ++c) ia128.push_back(i * 128 + c);
        pos.push_back(k * m + j);
      }
      const Var pa = take(fa.coords, ia2, Shape{1, p, 2});
      const Var pb = take(fb.coords, jb2, Shape{1, p, 2});
      const Var hp = transform_points(Var(to_tensor(h_target)), pa);
      const Var loc = mean(sum(square(hp - pb), {2}));

      // |x - y|^2 = |x|^2 + |y|^2 - 2 x.y for every (pair, keypoint of b)
      const Var d1 = take(fa.descriptors, ia128, Shape{p, 128});
      const Var cross = reshape(bmm(reshape(d1, Shape{1, p, 128}), reshape(permute(fb.descriptors, {1, 0}), Shape{1, 128, m})), Shape{p, m});
      const Var sq = sum(square(d1), {1}, true) + reshape(sum(square(fb.descriptors), {1}), Shape{1, m}) - 2.0 * cross;
      const Var dist = sqrt(maximum(sq, Var(Tensor::full({1}, 0.0))) + 1e-12);  // p x m
      Tensor block(Shape{p, m});
      for (std::int64_t k = 0; k < p; ++k) block.set(pos[static_cast<std::size_t>(k)], 1e6);
      const Var d_pos = take(dist, pos, Shape{p});
      const Var d_neg = min(dist + Var(block), 1);
      const Var desc = mean(1.0 - d_neg + d_pos);
      l_loc = loc.item();
      l_desc = desc.item();
      loss = loss + loc + config.alpha * desc;
    }
    const double lv = loss.item();
    if (!std::isfinite(lv)) throw OptimizationError("attack: non-finite loss at iteration " + std::to_string(it));
    res.trace.push_back({it, 0, lv});
    if (config.verbose && it % options.redetect_every == 0) {
      std::cerr << "iter " << it << " loss " << lv << " loc " << l_loc << " desc " << l_desc << " pairs " << pi.size()
                << " verified " << res.match_trace.back().second << '\n';
    }
    const Gradients g = tape.backward(loss);
    std::vector<Tensor> ps{a, b};
    const std::vector<Tensor> gs{g[va], g[vb]};
    opt.step(ps, gs);
    a = clamp(Var(ps[0]), 0.0, 1.0).value();
    b = clamp(Var(ps[1]), 0.0, 1.0).value();
  }
  res.img_a = a;
  res.img_b = b;
  res.matches_after = count_verified_matches(a, b, h_target, options, config.seed);
  res.match_trace.emplace_back(config.iters, res.matches_after);
  if (!config.out_dir.empty()) {
    write_image(config.out_dir / "attacked_a.pgm", a);
    write_image(config.out_dir / "attacked_b.pgm", b);
    write_trace_csv(config.out_dir / "trace.csv", res.trace);
    std::ofstream out(config.out_dir / "matches.csv");
    if (!out) throw IoError("cannot write " + (config.out_dir / "matches.csv").string());
    out << "iteration,matches\n";
    for (const auto& [i, n] : res.match_trace) out << i << ',' << n << '\n';
  }
  return res;
}

}  // namespace dcv
