#include "dcv/color.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "kernels.hpp"

namespace dcv {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_channels(const Var& img, std::int64_t c, const char* op) {
  kernels::require_4d(img, op);
  if (img.size(1) != c) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(c) + " channels, got " +
                     to_string(img.shape()));
  }
}

std::array<double, 9> invert3(const std::array<double, 9>& a) {
  const double c00 = a[4] * a[8] - a[5] * a[7];
  const double c01 = a[5] * a[6] - a[3] * a[8];
  const double c02 = a[3] * a[7] - a[4] * a[6];
  const double s = 1.0 / (a[0] * c00 + a[1] * c01 + a[2] * c02);
  return {c00 * s,
          (a[2] * a[7] - a[1] * a[8]) * s,
          (a[1] * a[5] - a[2] * a[4]) * s,
          c01 * s,
          (a[0] * a[8] - a[2] * a[6]) * s,
          (a[2] * a[3] - a[0] * a[5]) * s,
          c02 * s,
          (a[1] * a[6] - a[0] * a[7]) * s,
          (a[0] * a[4] - a[1] * a[3]) * s};
}

constexpr std::array<double, 9> kRgbToXyz = {0.412453, 0.357580, 0.180423, 0.212671, 0.715160,
                                             0.072169, 0.019334, 0.119193, 0.950227};

// Y, Cb = (B - Y) / 1.772, Cr = (R - Y) / 1.402
std::array<double, 9> rgb_to_ycbcr_matrix() {
  const double kr = 0.299, kg = 0.587, kb = 0.114;
  return {kr,
          kg,
          kb,
          -kr / 1.772,
          -kg / 1.772,
          (1.0 - kb) / 1.772,
          (1.0 - kr) / 1.402,
          -kg / 1.402,
          -kb / 1.402};
}

Var channel(const Var& img, std::int64_t c) { return narrow(img, 1, c, 1); }

Tensor mask_from(const Tensor& v, auto pred) {
  Tensor m(v.shape(), v.dtype());
  for (std::int64_t i = 0; i < v.numel(); ++i) m.set(i, pred(i) ? 1.0 : 0.0);
  return m;
}

}  // namespace

Var channel_mix(const Var& img, const std::vector<double>& m, std::int64_t k,
                const std::vector<double>& bias) {
  kernels::require_4d(img, "channel_mix");
  const std::int64_t n = img.size(0), c = img.size(1), h = img.size(2), w = img.size(3);
  if (static_cast<std::int64_t>(m.size()) != k * c) throw ShapeError("channel_mix: matrix size mismatch");
  const Var mat(Tensor::from_values(Shape{k, c}, m, img.dtype()));
  Var out = reshape(bmm(mat, reshape(img, Shape{n, c, h * w})), Shape{n, k, h, w});
  if (!bias.empty()) {
    if (static_cast<std::int64_t>(bias.size()) != k) throw ShapeError("channel_mix: bias size mismatch");
    out = out + Var(Tensor::from_values(Shape{k, 1, 1}, bias, img.dtype()));
  }
  return out;
}

Var rgb_to_grayscale(const Var& img) {
  require_channels(img, 3, "rgb_to_grayscale");
  return channel_mix(img, {0.299, 0.587, 0.114}, 1);
}

Var grayscale_to_rgb(const Var& gray) {
  require_channels(gray, 1, "grayscale_to_rgb");
  return concat({gray, gray, gray}, 1);
}

Var rgb_to_hsv(const Var& img) {
  require_channels(img, 3, "rgb_to_hsv");
  const Var r = channel(img, 0), g = channel(img, 1), b = channel(img, 2);
  const Var maxc = max(img, 1, true);
  const Var minc = min(img, 1, true);
  const Var delta = maxc - minc;

  const Tensor& mv = maxc.value();
  const Tensor& dv = delta.value();
  const Tensor& iv = img.value();
  const std::int64_t n = img.size(0), h = img.size(2), w = img.size(3), plane = h * w;
  // Channel that attains the max (first wins on ties); no hue where delta == 0.
  auto argmax_is = [&](std::int64_t i, int ch) {
    const std::int64_t b_ = i / plane, p = i % plane;
    const double vr = iv.at((b_ * 3 + 0) * plane + p), vg = iv.at((b_ * 3 + 1) * plane + p),
                 vb = iv.at((b_ * 3 + 2) * plane + p);
    int arg = 0;
    if (vg > vr) arg = 1;
    if (vb > (arg == 0 ? vr : vg)) arg = 2;
    return dv.at(i) != 0.0 && arg == ch;
  };
  const Tensor zero_max = mask_from(mv, [&](std::int64_t i) { return mv.at(i) == 0.0; });
  const Tensor zero_delta = mask_from(dv, [&](std::int64_t i) { return dv.at(i) == 0.0; });
  const Tensor is_r = mask_from(dv, [&](std::int64_t i) { return argmax_is(i, 0); });
  const Tensor is_g = mask_from(dv, [&](std::int64_t i) { return argmax_is(i, 1); });
  const Tensor is_b = mask_from(dv, [&](std::int64_t i) { return argmax_is(i, 2); });

  const Var delta_safe = delta + Var(zero_delta);
  const Var hr_raw = (g - b) / delta_safe;
  const Tensor wrap = mask_from(dv, [&](std::int64_t i) { return hr_raw.value().at(i) < 0.0; });
  const Var hr = hr_raw + Var(wrap) * 6.0;
  const Var hg = (b - r) / delta_safe + 2.0;
  const Var hb = (r - g) / delta_safe + 4.0;
  Var hue = (Var(is_r) * hr + Var(is_g) * hg + Var(is_b) * hb) * (std::numbers::pi / 3.0);
  const Var sat = delta / (maxc + Var(zero_max));
  (void)n;
  return concat({hue, sat, maxc}, 1);
}

Var hsv_to_rgb(const Var& hsv) {
  require_channels(hsv, 3, "hsv_to_rgb");
  const Var h = channel(hsv, 0), s = channel(hsv, 1), v = channel(hsv, 2);
  const Var h6 = h * (3.0 / std::numbers::pi);
  const Var vs = v * s;
  std::vector<Var> out;
  for (double n : {5.0, 3.0, 1.0}) {
    const Var shifted = h6 + n;
    // k = (n + h6) mod 6; the wrap is a constant offset.
    Tensor wrap(shifted.shape(), shifted.dtype());
    for (std::int64_t i = 0; i < wrap.numel(); ++i) {
      wrap.set(i, 6.0 * std::floor(shifted.value().at(i) / 6.0));
    }
    const Var k = shifted - Var(wrap);
    Var t = minimum(minimum(k, 4.0 - k), Var(Tensor::scalar(1.0, k.dtype())));
    t = maximum(t, Var(Tensor::scalar(0.0, k.dtype())));
    out.push_back(v - vs * t);
  }
  return concat(out, 1);
}

Var rgb_to_bgr(const Var& img) {
  require_channels(img, 3, "rgb_to_bgr");
  return concat({channel(img, 2), channel(img, 1), channel(img, 0)}, 1);
}

Var bgr_to_rgb(const Var& img) { return rgb_to_bgr(img); }

Var rgb_to_rgba(const Var& img, double alpha) {
  require_channels(img, 3, "rgb_to_rgba");
  Shape s = img.shape();
  s[1] = 1;
  return concat({img, Var(Tensor::full(s, alpha, img.dtype()))}, 1);
}

Var rgba_to_rgb(const Var& img) {
  require_channels(img, 4, "rgba_to_rgb");
  return narrow(img, 1, 0, 3);
}

Var rgb_to_xyz(const Var& img) {
  require_channels(img, 3, "rgb_to_xyz");
  return channel_mix(img, {kRgbToXyz.begin(), kRgbToXyz.end()}, 3);
}

Var xyz_to_rgb(const Var& img) {
  require_channels(img, 3, "xyz_to_rgb");
  const auto inv = invert3(kRgbToXyz);
  return channel_mix(img, {inv.begin(), inv.end()}, 3);
}

Var rgb_to_ycbcr(const Var& img) {
  require_channels(img, 3, "rgb_to_ycbcr");
  const auto m = rgb_to_ycbcr_matrix();
  return channel_mix(img, {m.begin(), m.end()}, 3, {0.0, 0.5, 0.5});
}

Var ycbcr_to_rgb(const Var& img) {
  require_channels(img, 3, "ycbcr_to_rgb");
  const auto inv = invert3(rgb_to_ycbcr_matrix());
  const Var centered = img - Var(Tensor::from_values(Shape{3, 1, 1}, {0.0, 0.5, 0.5}, img.dtype()));
  return channel_mix(centered, {inv.begin(), inv.end()}, 3);
}

namespace {

Tensor per_channel(const std::vector<double>& v, std::int64_t c, DType dt, const char* what) {
  if (static_cast<std::int64_t>(v.size()) != c && v.size() != 1) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(c) + " per-channel values");
  }
  std::vector<double> full(static_cast<std::size_t>(c));
  for (std::int64_t i = 0; i < c; ++i) full[static_cast<std::size_t>(i)] = v.size() == 1 ? v[0] : v[static_cast<std::size_t>(i)];
  return Tensor::from_values(Shape{c, 1, 1}, full, dt);
}

void check_std(const std::vector<double>& std_dev) {
  for (double s : std_dev) {
    if (!(s > 0.0)) throw ParameterError("normalize: std must be > 0");
  }
}

}  // namespace

Var normalize(const Var& img, const std::vector<double>& mean, const std::vector<double>& std_dev) {
  kernels::require_4d(img, "normalize");
  check_std(std_dev);
  const std::int64_t c = img.size(1);
  return (img - Var(per_channel(mean, c, img.dtype(), "normalize"))) /
         Var(per_channel(std_dev, c, img.dtype(), "normalize"));
}

Var denormalize(const Var& img, const std::vector<double>& mean, const std::vector<double>& std_dev) {
  kernels::require_4d(img, "denormalize");
  check_std(std_dev);
  const std::int64_t c = img.size(1);
  return img * Var(per_channel(std_dev, c, img.dtype(), "denormalize")) +
         Var(per_channel(mean, c, img.dtype(), "denormalize"));
}

Var adjust_brightness(const Var& img, double brightness) {
  if (brightness == 0.0) return img;
  return clamp(img + brightness, 0.0, 1.0);
}

Var adjust_contrast(const Var& img, double contrast) {
  if (contrast < 0.0) throw ParameterError("adjust_contrast: factor must be >= 0");
  if (contrast == 1.0) return img;
  return clamp(img * contrast, 0.0, 1.0);
}

Var adjust_gamma(const Var& img, double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("adjust_gamma: gamma must be > 0");
  if (gamma == 1.0) return img;
  return clamp(pow(img, gamma), 0.0, 1.0);
}

Var adjust_saturation(const Var& img, double saturation) {
  if (saturation < 0.0) throw ParameterError("adjust_saturation: factor must be >= 0");
  if (saturation == 1.0) return img;
  const Var hsv = rgb_to_hsv(img);
  const Var s = clamp(narrow(hsv, 1, 1, 1) * saturation, 0.0, 1.0);
  const Var out = hsv_to_rgb(concat({narrow(hsv, 1, 0, 1), s, narrow(hsv, 1, 2, 1)}, 1));
  return clamp(out, 0.0, 1.0);
}

Var adjust_hue(const Var& img, double hue_shift) {
  if (hue_shift == 0.0) return img;
  const Var hsv = rgb_to_hsv(img);
  const Var shifted = narrow(hsv, 1, 0, 1) + hue_shift;
  Tensor wrap(shifted.shape(), shifted.dtype());
  for (std::int64_t i = 0; i < wrap.numel(); ++i) {
    wrap.set(i, kTwoPi * std::floor(shifted.value().at(i) / kTwoPi));
  }
  const Var h = shifted - Var(wrap);
  const Var out = hsv_to_rgb(concat({h, narrow(hsv, 1, 1, 1), narrow(hsv, 1, 2, 1)}, 1));
  return clamp(out, 0.0, 1.0);
}

}  // namespace dcv
