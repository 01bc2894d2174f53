#include <algorithm>
#include <cmath>
#include <iostream>

#include "dcv/demos.hpp"
#include "dcv/filters.hpp"
#include "dcv/image_io.hpp"
#include "dcv/losses.hpp"
#include "dcv/ops.hpp"
#include "dcv/rng.hpp"
#include "dcv/synthetic.hpp"

namespace dcv {

RunConfig depth_defaults() {
  RunConfig c;
  c.levels = 5;
  c.iters = 200;
  c.optim = {OptimizerKind::sgd_momentum, 10.0};
  c.optim.momentum = 0.9;
  c.alpha = 0.85;
  c.lambda = 0.1;
  return c;
}

std::vector<View> synthetic_plane_views(std::int64_t height, std::int64_t width, double z, double baseline,
                                        std::uint64_t seed) {
  if (!(z > 0)) throw ParameterError("synthetic_plane_views: depth must be positive");
  const double f = 0.8 * static_cast<double>(width);
  std::vector<View> views;
  for (double c : {-baseline, 0.0, baseline}) {
    Mat4 t = Mat4::Identity();
    t(0, 3) = -c;
    // The plane seen from a centre shifted by c is the reference texture moved by f c / z.
    views.push_back({natural_image(height, width, 3, seed, f * c / z, 0.0),
                     PinholeCamera::from_intrinsics(f, f, 0.5 * static_cast<double>(width - 1),
                                                    0.5 * static_cast<double>(height - 1), height, width, t)});
  }
  return views;
}

DepthResult estimate_depth(std::span<const View> views, std::size_t ref, const RunConfig& config) {
  config.validate();
  if (views.size() < 2) throw ParameterError("estimate_depth: need at least two views");
  if (ref >= views.size()) throw ParameterError("estimate_depth: reference index out of range");
  const Tensor& ref_img = views[ref].image;
  if (ref_img.ndim() != 4 || ref_img.size(0) != 1) throw ShapeError("estimate_depth: images must be 1 x C x H x W");
  for (const auto& v : views) {
    if (v.image.shape() != ref_img.shape()) throw ShapeError("estimate_depth: all views must share one size");
    v.camera.validate();
  }
  const std::int64_t h = ref_img.size(2), w = ref_img.size(3);

  DepthResult res;
  res.degenerate = true;
  const Mat4 t_ref_inv = inverse_transformation(views[ref].camera.T);
  for (std::size_t i = 0; i < views.size(); ++i)
    if (i != ref && (views[i].camera.T * t_ref_inv).block<3, 1>(0, 3).norm() > 1e-12) res.degenerate = false;
  if (res.degenerate) std::cerr << "warning: no baseline between the reference and the other views; depth is unobservable\n";

  // Level l: images blurred by l pyramid steps and brought back to full size.
  auto level_images = [&](int l) {
    std::vector<Var> out;
    for (const auto& v : views) {
      Var img(v.image);
      for (int k = 0; k < l; ++k) img = pyr_down(img);
      out.push_back(l == 0 ? img : resize(img, h, w));
    }
    return out;
  };
  auto level_size = [&](int l) {
    std::int64_t lh = h, lw = w;
    for (int k = 0; k < l; ++k) {
      lh = std::max<std::int64_t>(1, lh / 2);
      lw = std::max<std::int64_t>(1, lw / 2);
    }
    return std::pair{lh, lw};
  };

  Rng rng(config.seed);
  const auto [h0, w0] = level_size(config.levels - 1);
  Tensor depth(Shape{1, 1, h0, w0});
  for (std::int64_t i = 0; i < depth.numel(); ++i) depth.set(i, 1.0 - rng.uniform());  // (0, 1]

  std::int64_t it = 0;
  bool first = true;
  for (int l = config.levels - 1; l >= 0; --l) {
    const auto [lh, lw] = level_size(l);
    if (depth.size(2) != lh || depth.size(3) != lw) depth = resize(Var(depth), lh, lw).value();
    const std::vector<Var> imgs = level_images(l);
    Optimizer opt(config.optim);
    auto evaluate = [&](const Var& d, Tensor* error) {
      const Var full = (lh == h && lw == w) ? d : resize(d, h, w);
      Var total;
      std::int64_t n = 0;
      for (std::size_t i = 0; i < views.size(); ++i) {
        if (i == ref) continue;
        const Var warped = depth_warp(imgs[i], full, views[i].camera, views[ref].camera);
        const Var li = multiview_photo_loss(imgs[ref], warped, full, config.alpha, config.lambda);
        total = n == 0 ? li : total + li;
        if (error) {
          const Tensor e = mean(abs(imgs[ref] - warped), {1}, true).value();
          *error = n == 0 ? e : (Var(*error) + Var(e)).value();
        }
        ++n;
      }
      if (error) *error = (Var(*error) / static_cast<double>(n)).value();
      return total / static_cast<double>(n);
    };
    for (std::int64_t k = 0; k < config.iters; ++k, ++it) {
      Tape tape;
      const Var d = tape.leaf(depth);
      const Var loss = evaluate(d, nullptr);
      const double lv = loss.item();
      if (!std::isfinite(lv)) throw OptimizationError("estimate_depth: non-finite loss at iteration " + std::to_string(it));
      if (first) {
        res.initial_loss = lv;
        first = false;
      }
      res.trace.push_back({it, l, lv});
      const Gradients g = tape.backward(loss);
      std::vector<Tensor> ps{depth};
      const std::vector<Tensor> gs{g[d]};
      opt.step(ps, gs);
      depth = ps[0];
    }
    Tensor err;
    const double end_loss = evaluate(Var(depth), &err).item();
    if (!std::isfinite(end_loss)) throw OptimizationError("estimate_depth: non-finite loss at level " + std::to_string(l));
    if (first) {
      res.initial_loss = end_loss;
      first = false;
    }
    res.trace.push_back({it, l, end_loss});
    res.final_loss = end_loss;
    res.error_maps.push_back(err);
    if (config.verbose) {
      std::vector<double> v = depth.to_vector();
      std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
      std::cerr << "level " << l << " loss " << end_loss << " median depth " << v[v.size() / 2] << '\n';
    }
    if (!config.out_dir.empty()) {
      write_image(config.out_dir / ("error_level" + std::to_string(l) + ".pgm"), err);
      write_pgm16(config.out_dir / ("depth_level" + std::to_string(l) + ".pgm"),
                  (lh == h && lw == w) ? depth : resize(Var(depth), h, w).value(), 1000.0);
    }
  }
  res.depth = (depth.size(2) == h && depth.size(3) == w) ? depth : resize(Var(depth), h, w).value();
  if (!config.out_dir.empty()) write_trace_csv(config.out_dir / "trace.csv", res.trace);
  return res;
}

}  // namespace dcv
