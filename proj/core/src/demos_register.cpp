#include <cmath>
#include <fstream>
#include <iostream>

#include "dcv/demos.hpp"
#include "dcv/filters.hpp"
#include "dcv/image_io.hpp"
#include "dcv/ops.hpp"

namespace dcv {

void write_trace_csv(const std::filesystem::path& path, std::span<const TracePoint> trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "iteration,level,loss\n";
  for (const auto& t : trace) out << t.iteration << ',' << t.level << ',' << t.loss << '\n';
}

void RunConfig::validate() const {
  if (levels < 1) throw ParameterError("levels must be >= 1");
  if (iters < 0) throw ParameterError("iters must be >= 0");
  if (!std::isfinite(alpha) || !std::isfinite(lambda) || !std::isfinite(beta)) throw ParameterError("loss weights must be finite");
  if (!(optim.lr > 0) || !std::isfinite(optim.lr)) throw ParameterError("lr must be positive");
}

RunConfig register_defaults() {
  RunConfig c;
  c.levels = 4;
  c.iters = 200;
  c.optim = {OptimizerKind::adam, 1e-3};
  return c;
}

double corner_error(const Mat3& a, const Mat3& b, std::int64_t height, std::int64_t width) {
  const double w = static_cast<double>(width - 1), h = static_cast<double>(height - 1);
  double total = 0;
  for (const Vec2& c : {Vec2(0, 0), Vec2(w, 0), Vec2(0, h), Vec2(w, h)}) total += (transform_point(a, c) - transform_point(b, c)).norm();
  return total / 4.0;
}

namespace {

Var homography_from(const Var& p) {
  const Var flat = concat({p, Var(Tensor::full({1}, 0.0, p.dtype()))}, 0);
  return reshape(flat, Shape{1, 3, 3}) + Var(to_tensor(Mat3::Identity(), p.dtype()));
}

Mat3 params_to_pixel(const Tensor& p, std::int64_t h, std::int64_t w) {
  return to_mat3(normalized_homography_to_pixel(homography_from(Var(p)), h, w).value());
}

}  // namespace

RegisterResult register_homography(const Tensor& src, const Tensor& dst, const RunConfig& config) {
  config.validate();
  if (src.shape() != dst.shape()) {
    throw ShapeError("register: image sizes differ: " + to_string(src.shape()) + " vs " + to_string(dst.shape()));
  }
  if (src.ndim() != 4 || src.size(0) != 1) throw ShapeError("register: expected 1 x C x H x W images");

  std::vector<Tensor> pyr_src{src}, pyr_dst{dst};
  for (int l = 1; l < config.levels; ++l) {
    pyr_src.push_back(pyr_down(Var(pyr_src.back())).value());
    pyr_dst.push_back(pyr_down(Var(pyr_dst.back())).value());
  }

  RegisterResult res;
  Tensor params = Tensor::full({8}, 0.0, DType::f64);
  Optimizer opt(config.optim);
  std::int64_t it = 0;
  bool first = true;
  for (int l = config.levels - 1; l >= 0; --l) {
    const Var s(pyr_src[static_cast<std::size_t>(l)]), d(pyr_dst[static_cast<std::size_t>(l)]);
    const std::int64_t h = s.size(2), w = s.size(3);
    const Var ones(Tensor::full({1, 1, h, w}, 1.0, s.dtype()));
    auto evaluate = [&](const Var& p, Var* warped) {
      const Var hp = normalized_homography_to_pixel(homography_from(p), h, w);
      const Var wimg = warp_perspective(s, hp, h, w);
      // Only pixels whose whole bilinear footprint lies inside src count.
      const Tensor cover = warp_perspective(ones, detach(hp), h, w).value();
      Tensor mask(cover.shape(), s.dtype());
      double count = 0;
      for (std::int64_t i = 0; i < cover.numel(); ++i) {
        const bool in = cover.at(i) > 1.0 - 1e-9;
        mask.set(i, in ? 1.0 : 0.0);
        count += in ? 1.0 : 0.0;
      }
      if (warped) *warped = wimg;
      if (count == 0) throw OptimizationError("register: warp left no overlap at level " + std::to_string(l));
      return sum(abs(wimg - d) * Var(mask)) / (count * static_cast<double>(s.size(1)));
    };
    for (std::int64_t k = 0; k < config.iters; ++k, ++it) {
      Tape tape;
      const Var p = tape.leaf(params);
      const Var loss = evaluate(p, nullptr);
      const double lv = loss.item();
      if (!std::isfinite(lv)) throw OptimizationError("register: non-finite loss at iteration " + std::to_string(it));
      if (first) {
        res.initial_loss = lv;
        first = false;
      }
      res.trace.push_back({it, l, lv});
      const Gradients g = tape.backward(loss);
      std::vector<Tensor> ps{params};
      const std::vector<Tensor> gs{g[p]};
      opt.step(ps, gs);
      params = ps[0];
    }
    Var warped;
    const double end_loss = evaluate(Var(params), &warped).item();
    if (!std::isfinite(end_loss)) throw OptimizationError("register: non-finite loss at level " + std::to_string(l));
    res.trace.push_back({it, l, end_loss});
    if (first) {
      res.initial_loss = end_loss;
      first = false;
    }
    res.final_loss = end_loss;
    res.warped.push_back(warped.value());
    res.level_homographies.push_back(params_to_pixel(params, src.size(2), src.size(3)));
    if (config.verbose) std::cerr << "level " << l << " loss " << end_loss << '\n';
    if (!config.out_dir.empty()) {
      write_image(config.out_dir / ("warped_level" + std::to_string(l) + (src.size(1) == 3 ? ".ppm" : ".pgm")), warped.value());
    }
  }
  res.homography = res.level_homographies.back();
  if (!config.out_dir.empty()) write_trace_csv(config.out_dir / "trace.csv", res.trace);
  return res;
}

}  // namespace dcv
