#include "dcv/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "dcv/filters.hpp"
#include "kernels.hpp"

namespace dcv {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_gray(const Var& img, const char* op) {
  kernels::require_4d(img, op);
  if (img.size(1) != 1) {
    throw ShapeError(std::string(op) + ": expected a single-channel image, got " + to_string(img.shape()));
  }
}

Var blur(const Var& x, double sigma) {
  const std::int64_t k = gaussian_size(sigma);
  return gaussian_blur2d(x, k, k, sigma, sigma);
}

// Parabola vertex offset through (l, c, r), 0 when the fit is not a maximum.
double peak_offset(double l, double c, double r) {
  const double den = 2.0 * (l - 2.0 * c + r);
  if (!(den < 0.0)) return 0.0;
  return std::clamp((l - r) / den, -0.5, 0.5);
}

}  // namespace

std::int64_t gaussian_size(double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian_size: sigma must be positive");
  return 2 * static_cast<std::int64_t>(std::ceil(3.0 * sigma)) + 1;
}

Var corner_response(const Var& gray, ResponseMode mode, const ResponseParams& params) {
  require_gray(gray, "corner_response");
  const Var img = params.sigma_derivative > 0.0 ? blur(gray, params.sigma_derivative) : gray;
  const Shape s = gray.shape();
  if (mode == ResponseMode::hessian) {
    const Var h = spatial_gradient2(img);
    const Var dxx = reshape(narrow(h, 2, 0, 1), s);
    const Var dxy = reshape(narrow(h, 2, 1, 1), s);
    const Var dyy = reshape(narrow(h, 2, 2, 1), s);
    return dxx * dyy - dxy * dxy;
  }
  if (!(params.sigma_window > 0.0)) throw ParameterError("corner_response: sigma_window must be positive");
  const Var g = spatial_gradient(img);
  const Var ix = reshape(narrow(g, 2, 0, 1), s), iy = reshape(narrow(g, 2, 1, 1), s);
  const Var a = blur(ix * ix, params.sigma_window);
  const Var b = blur(ix * iy, params.sigma_window);
  const Var c = blur(iy * iy, params.sigma_window);
  if (mode == ResponseMode::harris) return a * c - b * b - params.k * square(a + c);
  return (a + c) * 0.5 - hypot((a - c) * 0.5, b);
}

std::vector<Keypoint> nms2d(const Tensor& response, std::int64_t window, double threshold) {
  if (window < 1 || window % 2 == 0) throw ParameterError("nms2d: window must be odd");
  if (response.ndim() < 2) throw ShapeError("nms2d: response must be at least 2-D");
  const std::int64_t h = response.size(-2), w = response.size(-1);
  if (response.numel() != h * w) throw ShapeError("nms2d: expected a single response map");
  const std::vector<double> r = response.to_vector();
  const std::int64_t rad = window / 2;
  std::vector<Keypoint> out;
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      const double c = r[static_cast<std::size_t>(y * w + x)];
      if (!(c > threshold)) continue;
      bool keep = true, has_lower = false;
      for (std::int64_t dy = -rad; dy <= rad && keep; ++dy) {
        const std::int64_t yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (std::int64_t dx = -rad; dx <= rad; ++dx) {
          const std::int64_t xx = x + dx;
          if (xx < 0 || xx >= w || (dx == 0 && dy == 0)) continue;
          const double v = r[static_cast<std::size_t>(yy * w + xx)];
          if (v > c || (v == c && (dy < 0 || (dy == 0 && dx < 0)))) {
            keep = false;
            break;
          }
          if (v < c) has_lower = true;
        }
      }
      if (!keep || !has_lower) continue;
      Keypoint kp;
      kp.response = c;
      kp.x = static_cast<double>(x);
      kp.y = static_cast<double>(y);
      if (x > 0 && x + 1 < w) kp.x += peak_offset(r[static_cast<std::size_t>(y * w + x - 1)], c, r[static_cast<std::size_t>(y * w + x + 1)]);
      if (y > 0 && y + 1 < h) kp.y += peak_offset(r[static_cast<std::size_t>((y - 1) * w + x)], c, r[static_cast<std::size_t>((y + 1) * w + x)]);
      out.push_back(kp);
    }
  }
  return out;
}

Var refine_keypoints(const Var& response, std::span<const Keypoint> keypoints) {
  const std::int64_t h = response.size(-2), w = response.size(-1);
  const auto p = static_cast<std::int64_t>(keypoints.size());
  if (p == 0) return {};
  const Var flat = reshape(response, Shape{h * w});
  // Per axis: left, centre, right samples, integer base and validity.
  std::array<std::vector<std::int64_t>, 2> lo, hi;
  std::vector<std::int64_t> centre;
  std::array<Tensor, 2> base, valid;
  for (int a = 0; a < 2; ++a) {
    base[static_cast<std::size_t>(a)] = Tensor(Shape{p}, response.dtype());
    valid[static_cast<std::size_t>(a)] = Tensor(Shape{p}, response.dtype());
  }
  for (std::int64_t i = 0; i < p; ++i) {
    const auto& kp = keypoints[static_cast<std::size_t>(i)];
    const std::int64_t x = std::clamp<std::int64_t>(std::llround(kp.x), 0, w - 1);
    const std::int64_t y = std::clamp<std::int64_t>(std::llround(kp.y), 0, h - 1);
    const std::int64_t c = y * w + x;
    centre.push_back(c);
    const std::array<bool, 2> inside{x > 0 && x + 1 < w, y > 0 && y + 1 < h};
    const std::array<std::int64_t, 2> step{1, w};
    for (std::size_t a = 0; a < 2; ++a) {
      lo[a].push_back(inside[a] ? c - step[a] : c);
      hi[a].push_back(inside[a] ? c + step[a] : c);
      base[a].set(i, static_cast<double>(a == 0 ? x : y));
      if (inside[a]) {
        const double l = flat.value().at(c - step[a]), m = flat.value().at(c), r = flat.value().at(c + step[a]);
        valid[a].set(i, (l - 2 * m + r) < 0 ? 1.0 : 0.0);
      }
    }
  }
  const Var cv = take(flat, centre, Shape{p});
  std::vector<Var> axes;
  for (std::size_t a = 0; a < 2; ++a) {
    const Var l = take(flat, lo[a], Shape{p}), r = take(flat, hi[a], Shape{p});
    const Var ok(valid[a]);
    const Var den = 2.0 * (l - 2.0 * cv + r) * ok + (ok - 1.0);  // -1 where unused
    const Var off = clamp((l - r) / den, -0.5, 0.5) * ok;
    axes.push_back(reshape(Var(base[a]) + off, Shape{p, 1}));
  }
  return concat(axes, 1);
}

Orientation dominant_orientation(const Tensor& patch) {
  if (patch.ndim() < 2) throw ShapeError("dominant_orientation: patch must be at least 2-D");
  const std::int64_t h = patch.size(-2), w = patch.size(-1);
  if (h != w || patch.numel() != h * w) throw ShapeError("dominant_orientation: expected one square patch");
  const Tensor g = spatial_gradient(Var(patch.reshape({1, 1, h, w})), GradientMode::sobel, true, Border::replicate).value();
  constexpr int kBins = 36;
  std::array<double, kBins> hist{};
  const double sigma = static_cast<double>(w) / 4.0, c = 0.5 * static_cast<double>(w - 1);
  double total = 0.0;
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      const double dx = g.at(y * w + x), dy = g.at(h * w + y * w + x);
      const double mag = std::hypot(dx, dy);
      if (mag == 0.0) continue;
      const double r2 = (static_cast<double>(x) - c) * (static_cast<double>(x) - c) + (static_cast<double>(y) - c) * (static_cast<double>(y) - c);
      const double wt = mag * std::exp(-r2 / (2 * sigma * sigma));
      double ang = std::atan2(dy, dx);
      if (ang < 0) ang += kTwoPi;
      const double pos = ang / kTwoPi * kBins;
      const double fl = std::floor(pos);
      const double f = pos - fl;
      const int b0 = static_cast<int>(fl) % kBins;
      hist[static_cast<std::size_t>(b0)] += (1 - f) * wt;
      hist[static_cast<std::size_t>((b0 + 1) % kBins)] += f * wt;
      total += wt;
    }
  if (!(total > 1e-12)) return {0.0, true};
  for (int pass = 0; pass < 2; ++pass) {
    std::array<double, kBins> s{};
    for (int k = 0; k < kBins; ++k)
      s[static_cast<std::size_t>(k)] = (hist[static_cast<std::size_t>((k + kBins - 1) % kBins)] + hist[static_cast<std::size_t>(k)] +
                                        hist[static_cast<std::size_t>((k + 1) % kBins)]) / 3.0;
    hist = s;
  }
  const auto peak = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
  const double l = hist[static_cast<std::size_t>((peak + kBins - 1) % kBins)];
  const double r = hist[static_cast<std::size_t>((peak + 1) % kBins)];
  const double m = hist[static_cast<std::size_t>(peak)];
  const double den = l - 2 * m + r;
  const double off = den < 0 ? std::clamp(0.5 * (l - r) / den, -0.5, 0.5) : 0.0;
  double theta = (peak + off) * kTwoPi / kBins;
  theta = std::fmod(theta + kTwoPi, kTwoPi);
  return {theta, false};
}

namespace {

// Spatial cell weights of every patch pixel: up to four (cell, weight)
// pairs per pixel, Gaussian window folded in.
struct CellTaps {
  std::array<std::int32_t, 4> cell{};
  std::array<double, 4> weight{};
  int count = 0;
};

const std::vector<CellTaps>& cell_taps() {
  static const std::vector<CellTaps> taps = [] {
    std::vector<CellTaps> t(static_cast<std::size_t>(kPatchSize * kPatchSize));
    const double centre = 0.5 * (kPatchSize - 1), sigma = 0.5 * kPatchSize;
    const double cell = kPatchSize / 4.0;
    for (std::int64_t i = 0; i < kPatchSize; ++i)
      for (std::int64_t j = 0; j < kPatchSize; ++j) {
        auto& tp = t[static_cast<std::size_t>(i * kPatchSize + j)];
        const double g = std::exp(-((static_cast<double>(i) - centre) * (static_cast<double>(i) - centre) +
                                    (static_cast<double>(j) - centre) * (static_cast<double>(j) - centre)) /
                                  (2 * sigma * sigma));
        const double u = (static_cast<double>(j) + 0.5) / cell - 0.5, v = (static_cast<double>(i) + 0.5) / cell - 0.5;
        const double fu = std::floor(u), fv = std::floor(v);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int cx = static_cast<int>(fu) + dx, cy = static_cast<int>(fv) + dy;
            if (cx < 0 || cx > 3 || cy < 0 || cy > 3) continue;
            const double wx = dx ? u - fu : 1 - (u - fu), wy = dy ? v - fv : 1 - (v - fv);
            tp.cell[static_cast<std::size_t>(tp.count)] = cy * 4 + cx;
            tp.weight[static_cast<std::size_t>(tp.count)] = g * wx * wy;
            ++tp.count;
          }
      }
    return t;
  }();
  return taps;
}

// P x 1024 magnitudes and angles -> P x 128 raw histogram (cell-major, 8
// orientation bins per cell) with linear votes in orientation and space.
Var sift_histogram(const Var& mag, const Var& ori) {
  const std::int64_t p = mag.size(0), npix = kPatchSize * kPatchSize;
  const DType dt = kernels::promote(mag.dtype(), ori.dtype());
  const Tensor mv = mag.value().to(dt), ov = ori.value().to(dt);
  const auto& taps = cell_taps();
  // Orientation bin and fraction per pixel, reused by the backward pass.
  std::vector<std::int32_t> bin(static_cast<std::size_t>(p * npix));
  std::vector<double> frac(static_cast<std::size_t>(p * npix));
  for (std::int64_t i = 0; i < p * npix; ++i) {
    double o = ov.at(i) * (8.0 / kTwoPi);
    if (o < 0) o += 8.0;
    const double fl = std::floor(o);
    frac[static_cast<std::size_t>(i)] = o - fl;
    bin[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(fl) % 8;
  }
  Tensor out(Shape{p, 128}, dt);
  dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    const T* pm = mv.values<T>().data();
    T* po = out.mutable_values<T>().data();
    for (std::int64_t k = 0; k < p; ++k)
      for (std::int64_t px = 0; px < npix; ++px) {
        const std::int64_t i = k * npix + px;
        const double m = pm[i];
        if (m == 0) continue;
        const auto& tp = taps[static_cast<std::size_t>(px)];
        const std::int32_t b0 = bin[static_cast<std::size_t>(i)], b1 = (b0 + 1) % 8;
        const double f = frac[static_cast<std::size_t>(i)];
        for (int t = 0; t < tp.count; ++t) {
          const double s = m * tp.weight[static_cast<std::size_t>(t)];
          T* cell = po + k * 128 + tp.cell[static_cast<std::size_t>(t)] * 8;
          cell[b0] += static_cast<T>(s * (1 - f));
          cell[b1] += static_cast<T>(s * f);
        }
      }
  });
  BackwardFn backward = [mv, bin, frac, p, npix](const Tensor& grad, const std::vector<bool>& needs) {
    const auto& taps = cell_taps();
    const Tensor g = grad.to(DType::f64);
    Tensor gm(mv.shape(), DType::f64), go(mv.shape(), DType::f64);
    for (std::int64_t k = 0; k < p; ++k)
      for (std::int64_t px = 0; px < npix; ++px) {
        const std::int64_t i = k * npix + px;
        const auto& tp = taps[static_cast<std::size_t>(px)];
        const std::int32_t b0 = bin[static_cast<std::size_t>(i)], b1 = (b0 + 1) % 8;
        const double f = frac[static_cast<std::size_t>(i)];
        double dm = 0, dfrac = 0;
        for (int t = 0; t < tp.count; ++t) {
          const std::int64_t base = k * 128 + tp.cell[static_cast<std::size_t>(t)] * 8;
          const double w = tp.weight[static_cast<std::size_t>(t)];
          const double g0 = g.at(base + b0), g1 = g.at(base + b1);
          dm += w * ((1 - f) * g0 + f * g1);
          dfrac += w * (g1 - g0);
        }
        gm.set(i, dm);
        go.set(i, mv.at(i) * dfrac * (8.0 / kTwoPi));
      }
    std::vector<Tensor> grads(2);
    if (needs[0]) grads[0] = gm.to(mv.dtype());
    if (needs[1]) grads[1] = go.to(mv.dtype());
    return grads;
  };
  return detail::make_result("sift_histogram", std::move(out), {&mag, &ori}, std::move(backward));
}

Var l2_normalize_rows(const Var& v) {
  return v / sqrt(sum(square(v), {1}, true) + 1e-24);
}

Var describe_upright(const Var& patches) {
  const std::int64_t p = patches.size(0), npix = kPatchSize * kPatchSize;
  const Var g = spatial_gradient(patches, GradientMode::sobel, true, Border::replicate);
  const Var dx = reshape(narrow(g, 2, 0, 1), Shape{p, npix});
  const Var dy = reshape(narrow(g, 2, 1, 1), Shape{p, npix});
  Var raw = sift_histogram(hypot(dx, dy), atan2(dy, dx));
  // Flat patches carry only rounding noise; zero them instead of amplifying it.
  Tensor keep(Shape{p, 1}, raw.dtype());
  for (std::int64_t i = 0; i < p; ++i) {
    double s = 0;
    for (std::int64_t k = 0; k < 128; ++k) s += raw.value().at(i * 128 + k) * raw.value().at(i * 128 + k);
    keep.set(i, std::sqrt(s) > 1e-9 ? 1.0 : 0.0);
  }
  raw = raw * Var(keep);
  return l2_normalize_rows(clamp(l2_normalize_rows(raw), 0.0, 0.2));
}

// Sampling grid (pixel coordinates) of oriented square patches.
struct PatchFrame {
  double x, y, step, theta;
};

Tensor patch_grid(std::span<const PatchFrame> frames, DType dtype) {
  const auto p = static_cast<std::int64_t>(frames.size());
  Tensor grid(Shape{1, p * kPatchSize, kPatchSize, 2}, dtype);
  const double c = 0.5 * (kPatchSize - 1);
  std::int64_t o = 0;
  for (const auto& f : frames) {
    const double cs = std::cos(f.theta), sn = std::sin(f.theta);
    for (std::int64_t i = 0; i < kPatchSize; ++i)
      for (std::int64_t j = 0; j < kPatchSize; ++j) {
        const double qx = (static_cast<double>(j) - c) * f.step, qy = (static_cast<double>(i) - c) * f.step;
        grid.set(o++, f.x + cs * qx - sn * qy);
        grid.set(o++, f.y + sn * qx + cs * qy);
      }
  }
  return grid;
}

Var sample_patches(const Var& img, std::span<const PatchFrame> frames) {
  const auto p = static_cast<std::int64_t>(frames.size());
  const Var s = sample_bilinear_pixels(img, Var(patch_grid(frames, img.dtype())));
  return reshape(s, Shape{p, 1, kPatchSize, kPatchSize});
}

}  // namespace

Var sift_describe(const Var& patches, std::span<const double> thetas) {
  if (patches.ndim() != 4 || patches.size(1) != 1 || patches.size(2) != kPatchSize || patches.size(3) != kPatchSize) {
    throw ShapeError("sift_describe: expected P x 1 x 32 x 32 patches, got " + to_string(patches.shape()));
  }
  const std::int64_t p = patches.size(0);
  if (thetas.empty()) return describe_upright(patches);
  if (static_cast<std::int64_t>(thetas.size()) != p) throw ShapeError("sift_describe: one angle per patch required");
  const double c = 0.5 * (kPatchSize - 1);
  Tensor grid(Shape{p, kPatchSize, kPatchSize, 2}, patches.dtype());
  std::int64_t o = 0;
  for (std::int64_t k = 0; k < p; ++k) {
    const double cs = std::cos(thetas[static_cast<std::size_t>(k)]), sn = std::sin(thetas[static_cast<std::size_t>(k)]);
    for (std::int64_t i = 0; i < kPatchSize; ++i)
      for (std::int64_t j = 0; j < kPatchSize; ++j) {
        const double qx = static_cast<double>(j) - c, qy = static_cast<double>(i) - c;
        grid.set(o++, c + cs * qx - sn * qy);
        grid.set(o++, c + sn * qx + cs * qy);
      }
  }
  return describe_upright(sample_bilinear_pixels(patches, Var(grid)));
}

std::vector<MatchPair> match_mnn(const Tensor& desc_a, const Tensor& desc_b, std::optional<double> ratio) {
  if (desc_a.numel() == 0 || desc_b.numel() == 0) return {};
  if (desc_a.ndim() != 2 || desc_b.ndim() != 2 || desc_a.size(1) != desc_b.size(1)) {
    throw ShapeError("match_mnn: descriptors must be Na x D and Nb x D");
  }
  const std::int64_t na = desc_a.size(0), nb = desc_b.size(0), d = desc_a.size(1);
  const std::vector<double> a = desc_a.to_vector(), b = desc_b.to_vector();
  std::vector<double> dist(static_cast<std::size_t>(na * nb));
  for (std::int64_t i = 0; i < na; ++i)
    for (std::int64_t j = 0; j < nb; ++j) {
      double s = 0;
      for (std::int64_t k = 0; k < d; ++k) {
        const double t = a[static_cast<std::size_t>(i * d + k)] - b[static_cast<std::size_t>(j * d + k)];
        s += t * t;
      }
      dist[static_cast<std::size_t>(i * nb + j)] = std::sqrt(s);
    }
  std::vector<std::int64_t> best_b(static_cast<std::size_t>(na)), best_a(static_cast<std::size_t>(nb), 0);
  std::vector<double> second(static_cast<std::size_t>(na), std::numeric_limits<double>::infinity());
  for (std::int64_t i = 0; i < na; ++i) {
    std::int64_t bj = 0;
    for (std::int64_t j = 1; j < nb; ++j)
      if (dist[static_cast<std::size_t>(i * nb + j)] < dist[static_cast<std::size_t>(i * nb + bj)]) bj = j;
    best_b[static_cast<std::size_t>(i)] = bj;
    for (std::int64_t j = 0; j < nb; ++j)
      if (j != bj) second[static_cast<std::size_t>(i)] = std::min(second[static_cast<std::size_t>(i)], dist[static_cast<std::size_t>(i * nb + j)]);
  }
  for (std::int64_t j = 0; j < nb; ++j) {
    std::int64_t bi = 0;
    for (std::int64_t i = 1; i < na; ++i)
      if (dist[static_cast<std::size_t>(i * nb + j)] < dist[static_cast<std::size_t>(bi * nb + j)]) bi = i;
    best_a[static_cast<std::size_t>(j)] = bi;
  }
  std::vector<MatchPair> out;
  for (std::int64_t i = 0; i < na; ++i) {
    const std::int64_t j = best_b[static_cast<std::size_t>(i)];
    if (best_a[static_cast<std::size_t>(j)] != i) continue;
    const double d1 = dist[static_cast<std::size_t>(i * nb + j)];
    if (ratio) {
      const double d2 = second[static_cast<std::size_t>(i)];
      if (std::isfinite(d2) && !(d1 <= *ratio * d2)) continue;
    }
    out.push_back({i, j, d1});
  }
  return out;
}

namespace {

struct ScaleSpace {
  std::vector<Var> images;
  std::vector<Var> responses;
  std::vector<double> sigmas;
};

ScaleSpace build_scale_space(const Var& gray, const DetectorParams& params) {
  require_gray(gray, "detect_and_describe");
  if (gray.size(0) != 1) throw ShapeError("detect_and_describe: expected a single image");
  if (params.levels < 1) throw ParameterError("detect_and_describe: levels must be >= 1");
  ScaleSpace s;
  for (int l = 0; l < params.levels; ++l) {
    const double sigma = params.base_sigma * std::pow(2.0, l);
    const Var img = blur(gray, sigma);
    s.images.push_back(img);
    s.responses.push_back(std::pow(sigma, 4) * corner_response(img, ResponseMode::hessian, {0.0, 1.0, 0.0}));
    s.sigmas.push_back(sigma);
  }
  return s;
}

Features describe_in(const ScaleSpace& space, std::span<const Keypoint> kps, const DetectorParams& params) {
  Features f;
  f.keypoints.assign(kps.begin(), kps.end());
  const auto p = static_cast<std::int64_t>(kps.size());
  if (p == 0) return f;
  std::vector<Var> descs, coords;
  std::vector<std::int64_t> order;  // concatenated row -> keypoint index
  for (std::size_t l = 0; l < space.images.size(); ++l) {
    std::vector<PatchFrame> frames;
    std::vector<Keypoint> group;
    for (std::int64_t i = 0; i < p; ++i) {
      const auto& kp = kps[static_cast<std::size_t>(i)];
      if (kp.level != static_cast<int>(l)) continue;
      frames.push_back({kp.x, kp.y, params.patch_span * kp.scale / kPatchSize, kp.orientation});
      group.push_back(kp);
      order.push_back(i);
    }
    if (frames.empty()) continue;
    descs.push_back(describe_upright(sample_patches(space.images[l], frames)));
    coords.push_back(refine_keypoints(space.responses[l], group));
  }
  if (static_cast<std::int64_t>(order.size()) != p) throw ParameterError("keypoint level outside the scale space");
  const Var all_d = concat(descs, 0), all_c = concat(coords, 0);
  std::vector<std::int64_t> row_of(static_cast<std::size_t>(p));
  for (std::int64_t r = 0; r < p; ++r) row_of[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;
  std::vector<std::int64_t> di, ci;
  for (std::int64_t i = 0; i < p; ++i) {
    const std::int64_t r = row_of[static_cast<std::size_t>(i)];
    for (std::int64_t k = 0; k < 128; ++k) di.push_back(r * 128 + k);
    ci.push_back(r * 2);
    ci.push_back(r * 2 + 1);
  }
  f.descriptors = take(all_d, di, Shape{p, 128});
  f.coords = take(all_c, ci, Shape{p, 2});
  return f;
}

}  // namespace

Features detect_and_describe(const Var& gray, std::int64_t max_keypoints, const DetectorParams& params) {
  const ScaleSpace space = build_scale_space(gray, params);
  const std::int64_t h = gray.size(2), w = gray.size(3);
  std::vector<Keypoint> cands;
  for (int l = 0; l < params.levels; ++l) {
    const Tensor& r = space.responses[static_cast<std::size_t>(l)].value();
    for (Keypoint kp : nms2d(r, params.nms_window, params.threshold)) {
      const auto x = static_cast<std::int64_t>(std::llround(kp.x)), y = static_cast<std::int64_t>(std::llround(kp.y));
      if (x < params.border || y < params.border || x >= w - params.border || y >= h - params.border) continue;
      // Scale-space maximum: not exceeded in the 3 x 3 windows of adjacent levels.
      bool is_max = true;
      for (int nl : {l - 1, l + 1}) {
        if (nl < 0 || nl >= params.levels) continue;
        const Tensor& rn = space.responses[static_cast<std::size_t>(nl)].value();
        for (std::int64_t dy = -1; dy <= 1 && is_max; ++dy)
          for (std::int64_t dx = -1; dx <= 1; ++dx)
            if (rn.at((y + dy) * w + x + dx) > r.at(y * w + x)) {
              is_max = false;
              break;
            }
      }
      if (!is_max) continue;
      kp.level = l;
      kp.scale = space.sigmas[static_cast<std::size_t>(l)];
      cands.push_back(kp);
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });
  if (max_keypoints >= 0 && static_cast<std::int64_t>(cands.size()) > max_keypoints) cands.resize(static_cast<std::size_t>(max_keypoints));

  // Orientation from the upright patch at keypoint scale.
  for (auto& kp : cands) {
    const PatchFrame frame{kp.x, kp.y, params.patch_span * kp.scale / kPatchSize, 0.0};
    const Tensor patch = sample_patches(detach(space.images[static_cast<std::size_t>(kp.level)]), std::span(&frame, 1)).value();
    kp.orientation = dominant_orientation(patch).theta;
  }
  return describe_in(space, cands, params);
}

Features describe_at(const Var& gray, std::span<const Keypoint> keypoints, const DetectorParams& params) {
  return describe_in(build_scale_space(gray, params), keypoints, params);
}

void write_keypoints_csv(const std::filesystem::path& path, std::span<const Keypoint> keypoints) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "x,y,scale,orientation,response\n";
  for (const auto& k : keypoints) out << k.x << ',' << k.y << ',' << k.scale << ',' << k.orientation << ',' << k.response << '\n';
}

void write_matches_csv(const std::filesystem::path& path, std::span<const MatchPair> matches) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ia,ib,dist\n";
  for (const auto& m : matches) out << m.ia << ',' << m.ib << ',' << m.distance << '\n';
}

}  // namespace dcv
