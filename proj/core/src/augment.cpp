#include "dcv/augment.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "dcv/color.hpp"
#include "dcv/geometry.hpp"
#include "dcv/ops.hpp"
#include "kernels.hpp"

namespace dcv {

namespace {

void check_range(Range r, const char* what) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw ParameterError(std::string(what) + ": invalid range [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]");
  }
}

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError(std::string(what) + ": p must be in [0, 1]");
}

double draw(Rng& rng, Range r) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }

Tensor identity_transforms(std::int64_t n) {
  return to_tensor(std::vector<Mat3>(static_cast<std::size_t>(n), Mat3::Identity()));
}

AugResult flip(const Var& batch, double p, const Rng& rng, bool horizontal) {
  kernels::require_4d(batch, horizontal ? "random_hflip" : "random_vflip");
  check_prob(p, horizontal ? "random_hflip" : "random_vflip");
  const std::int64_t n = batch.size(0), c = batch.size(1), h = batch.size(2), w = batch.size(3);
  AugResult r;
  std::vector<Mat3> ts;
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(batch.numel()));
  for (std::int64_t i = 0; i < n; ++i) {
    Rng s = rng.split(static_cast<std::uint64_t>(i));
    const bool f = s.bernoulli(p);
    r.params.push_back({{"flip", f ? 1.0 : 0.0}});
    Mat3 t = Mat3::Identity();
    if (f) {
      if (horizontal) {
        t(0, 0) = -1;
        t(0, 2) = static_cast<double>(w - 1);
      } else {
        t(1, 1) = -1;
        t(1, 2) = static_cast<double>(h - 1);
      }
    }
    ts.push_back(t);
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
          const std::int64_t sy = (f && !horizontal) ? h - 1 - y : y;
          const std::int64_t sx = (f && horizontal) ? w - 1 - x : x;
          idx.push_back(((i * c + ch) * h + sy) * w + sx);
        }
  }
  r.output = take(batch, idx, batch.shape());
  r.transform = to_tensor(ts);
  return r;
}

Var per_sample(const Var& batch, const std::function<Var(const Var&, std::int64_t)>& fn) {
  const std::int64_t n = batch.size(0);
  if (n == 1) return fn(batch, 0);
  std::vector<Var> parts;
  for (std::int64_t i = 0; i < n; ++i) parts.push_back(fn(narrow(batch, 0, i, 1), i));
  return concat(parts, 0);
}

}  // namespace

AugResult random_hflip(const Var& batch, double p, const Rng& rng) { return flip(batch, p, rng, true); }
AugResult random_vflip(const Var& batch, double p, const Rng& rng) { return flip(batch, p, rng, false); }

AugResult random_affine(const Var& batch, Range degrees, Range translate, Range scale, const Rng& rng) {
  kernels::require_4d(batch, "random_affine");
  check_range(degrees, "random_affine degrees");
  check_range(translate, "random_affine translate");
  check_range(scale, "random_affine scale");
  if (!(scale.lo > 0)) throw ParameterError("random_affine: scale must be positive");
  const std::int64_t n = batch.size(0), h = batch.size(2), w = batch.size(3);
  const Vec2 centre(0.5 * static_cast<double>(w - 1), 0.5 * static_cast<double>(h - 1));
  AugResult r;
  std::vector<Mat3> ts;
  for (std::int64_t i = 0; i < n; ++i) {
    Rng s = rng.split(static_cast<std::uint64_t>(i));
    const double angle = draw(s, degrees), sc = draw(s, scale);
    const double tx = draw(s, translate) * static_cast<double>(w), ty = draw(s, translate) * static_cast<double>(h);
    Affine23 m = get_rotation_matrix2d(centre, angle, sc);
    m(0, 2) += tx;
    m(1, 2) += ty;
    ts.push_back(lift_affine(m));
    r.params.push_back({{"angle", angle}, {"scale", sc}, {"tx", tx}, {"ty", ty}});
  }
  r.transform = to_tensor(ts, batch.dtype());
  r.output = warp_perspective(batch, Var(r.transform), h, w);
  r.transform = r.transform.to(DType::f64);
  return r;
}

AugResult color_jitter(const Var& batch, Range brightness, Range contrast, Range saturation, Range hue,
                       const Rng& rng) {
  kernels::require_4d(batch, "color_jitter");
  check_range(brightness, "color_jitter brightness");
  check_range(contrast, "color_jitter contrast");
  check_range(saturation, "color_jitter saturation");
  check_range(hue, "color_jitter hue");
  if (contrast.lo < 0 || saturation.lo < 0) throw ParameterError("color_jitter: factors must be >= 0");
  const bool chroma = !(saturation.lo == 1 && saturation.hi == 1 && hue.lo == 0 && hue.hi == 0);
  if (chroma && batch.size(1) != 3) throw ShapeError("color_jitter: saturation / hue need 3 channels");
  AugResult r;
  for (std::int64_t i = 0; i < batch.size(0); ++i) {
    Rng s = rng.split(static_cast<std::uint64_t>(i));
    const double b = draw(s, brightness), c = draw(s, contrast), sa = draw(s, saturation), hu = draw(s, hue);
    r.params.push_back({{"brightness", b}, {"contrast", c}, {"saturation", sa}, {"hue", hu}});
  }
  r.output = per_sample(batch, [&](const Var& x, std::int64_t i) {
    const auto& p = r.params[static_cast<std::size_t>(i)];
    Var y = adjust_contrast(adjust_brightness(x, p.at("brightness")), p.at("contrast"));
    if (chroma) y = adjust_hue(adjust_saturation(y, p.at("saturation")), p.at("hue"));
    return y;
  });
  r.transform = identity_transforms(batch.size(0));
  return r;
}

AugResult random_erasing(const Var& batch, double p, Range scale, Range ratio, double value, const Rng& rng) {
  kernels::require_4d(batch, "random_erasing");
  check_prob(p, "random_erasing");
  check_range(scale, "random_erasing scale");
  check_range(ratio, "random_erasing ratio");
  if (!(scale.lo > 0 && scale.hi <= 1 && ratio.lo > 0)) throw ParameterError("random_erasing: bad scale / ratio");
  const std::int64_t n = batch.size(0), c = batch.size(1), h = batch.size(2), w = batch.size(3);
  Tensor keep = Tensor::full(batch.shape(), 1.0, batch.dtype());
  AugResult r;
  for (std::int64_t i = 0; i < n; ++i) {
    Rng s = rng.split(static_cast<std::uint64_t>(i));
    AugParams ps{{"erase", 0.0}};
    if (s.bernoulli(p)) {
      const double area = draw(s, scale) * static_cast<double>(h * w), asp = draw(s, ratio);
      const auto bw = std::clamp<std::int64_t>(std::llround(std::sqrt(area * asp)), 1, w);
      const auto bh = std::clamp<std::int64_t>(std::llround(std::sqrt(area / asp)), 1, h);
      const auto x0 = static_cast<std::int64_t>(s.below(static_cast<std::uint64_t>(w - bw + 1)));
      const auto y0 = static_cast<std::int64_t>(s.below(static_cast<std::uint64_t>(h - bh + 1)));
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = y0; y < y0 + bh; ++y)
          for (std::int64_t x = x0; x < x0 + bw; ++x) keep.set(((i * c + ch) * h + y) * w + x, 0.0);
      ps = {{"erase", 1.0}, {"x", static_cast<double>(x0)}, {"y", static_cast<double>(y0)},
            {"w", static_cast<double>(bw)}, {"h", static_cast<double>(bh)}};
    }
    r.params.push_back(ps);
  }
  const Var k(keep);
  r.output = batch * k + (1.0 - k) * value;
  r.transform = identity_transforms(n);
  return r;
}

AugResult random_resized_crop(const Var& batch, std::int64_t out_h, std::int64_t out_w, Range scale, Range ratio,
                              const Rng& rng) {
  kernels::require_4d(batch, "random_resized_crop");
  check_range(scale, "random_resized_crop scale");
  check_range(ratio, "random_resized_crop ratio");
  if (!(scale.lo > 0 && scale.hi <= 1 && ratio.lo > 0)) throw ParameterError("random_resized_crop: bad scale / ratio");
  if (out_h < 2 || out_w < 2) throw ParameterError("random_resized_crop: output must be at least 2 x 2");
  const std::int64_t n = batch.size(0), h = batch.size(2), w = batch.size(3);
  AugResult r;
  std::vector<Mat3> ts;
  for (std::int64_t i = 0; i < n; ++i) {
    Rng s = rng.split(static_cast<std::uint64_t>(i));
    const double area = draw(s, scale) * static_cast<double>(h * w), asp = draw(s, ratio);
    // Box spans pixel centres x0 .. x0 + bw, mapped onto 0 .. out_w - 1.
    const double bw = std::clamp(std::sqrt(area * asp), 1.0, static_cast<double>(w - 1));
    const double bh = std::clamp(std::sqrt(area / asp), 1.0, static_cast<double>(h - 1));
    const double x0 = s.uniform(0.0, static_cast<double>(w - 1) - bw);
    const double y0 = s.uniform(0.0, static_cast<double>(h - 1) - bh);
    Mat3 t = Mat3::Identity();
    t(0, 0) = static_cast<double>(out_w - 1) / bw;
    t(1, 1) = static_cast<double>(out_h - 1) / bh;
    t(0, 2) = -x0 * t(0, 0);
    t(1, 2) = -y0 * t(1, 1);
    ts.push_back(t);
    r.params.push_back({{"x", x0}, {"y", y0}, {"w", bw}, {"h", bh}});
  }
  r.transform = to_tensor(ts, batch.dtype());
  r.output = warp_perspective(batch, Var(r.transform), out_h, out_w);
  r.transform = r.transform.to(DType::f64);
  return r;
}

namespace aug {
AugOp hflip(double p) {
  return [p](const Var& x, const Rng& r) { return random_hflip(x, p, r); };
}
AugOp vflip(double p) {
  return [p](const Var& x, const Rng& r) { return random_vflip(x, p, r); };
}
AugOp affine(Range degrees, Range translate, Range scale) {
  return [=](const Var& x, const Rng& r) { return random_affine(x, degrees, translate, scale, r); };
}
AugOp jitter(Range brightness, Range contrast, Range saturation, Range hue) {
  return [=](const Var& x, const Rng& r) { return color_jitter(x, brightness, contrast, saturation, hue, r); };
}
AugOp erasing(double p, Range scale, Range ratio, double value) {
  return [=](const Var& x, const Rng& r) { return random_erasing(x, p, scale, ratio, value, r); };
}
AugOp resized_crop(std::int64_t out_h, std::int64_t out_w, Range scale, Range ratio) {
  return [=](const Var& x, const Rng& r) { return random_resized_crop(x, out_h, out_w, scale, ratio, r); };
}
}  // namespace aug

AugOp compose(std::vector<AugOp> ops) {
  if (ops.empty()) throw ParameterError("compose: need at least one op");
  return [ops = std::move(ops)](const Var& batch, const Rng& rng) {
    AugResult acc;
    for (std::size_t k = 0; k < ops.size(); ++k) {
      AugResult step = ops[k](k == 0 ? batch : acc.output, k == 0 ? rng : rng.split(k));
      if (ops.size() > 1) {
        for (auto& p : step.params) {
          AugParams named;
          for (auto& [key, v] : p) named[std::to_string(k) + ":" + key] = v;
          p = std::move(named);
        }
      }
      if (k == 0) {
        acc = std::move(step);
        continue;
      }
      const std::int64_t n = step.transform.size(0);
      std::vector<Mat3> ts;
      for (std::int64_t i = 0; i < n; ++i) ts.push_back(to_mat3(step.transform, i) * to_mat3(acc.transform, i));
      acc.transform = to_tensor(ts);
      acc.output = step.output;
      for (std::size_t i = 0; i < acc.params.size(); ++i) acc.params[i].merge(step.params[i]);
    }
    return acc;
  };
}

}  // namespace dcv
