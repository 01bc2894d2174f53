#include "dcv/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dcv/rng.hpp"

namespace dcv {

namespace {

struct Blob {
  double x, y, sigma;
  std::vector<double> amp;
};

// Blobs cover [-256, 768)^2, enough for images and offsets of a few hundred px.
std::vector<Blob> make_blobs(std::int64_t channels, Rng rng, int count, double smin, double smax, double gain) {
  std::vector<Blob> blobs;
  blobs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Blob b;
    b.x = rng.uniform(-256.0, 768.0);
    b.y = rng.uniform(-256.0, 768.0);
    b.sigma = smin * std::pow(smax / smin, rng.uniform());
    const double base = rng.uniform(-1.0, 1.0);
    for (std::int64_t c = 0; c < channels; ++c) b.amp.push_back(gain * (base + rng.uniform(-0.3, 0.3)));
    blobs.push_back(std::move(b));
  }
  return blobs;
}

void splat(std::vector<double>& acc, const std::vector<Blob>& blobs, std::int64_t channels, std::int64_t h,
           std::int64_t w, double ox, double oy) {
  for (const auto& b : blobs) {
    const double r = 4.0 * b.sigma;
    const double cx = b.x - ox, cy = b.y - oy;
    const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(cx - r)));
    const auto x1 = std::min<std::int64_t>(w - 1, static_cast<std::int64_t>(std::floor(cx + r)));
    const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(cy - r)));
    const auto y1 = std::min<std::int64_t>(h - 1, static_cast<std::int64_t>(std::floor(cy + r)));
    const double inv = 1.0 / (2.0 * b.sigma * b.sigma);
    for (std::int64_t y = y0; y <= y1; ++y)
      for (std::int64_t x = x0; x <= x1; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        const double g = std::exp(-(dx * dx + dy * dy) * inv);
        for (std::int64_t c = 0; c < channels; ++c) acc[static_cast<std::size_t>((c * h + y) * w + x)] += b.amp[static_cast<std::size_t>(c)] * g;
      }
  }
}

Tensor squash(const std::vector<double>& acc, std::int64_t channels, std::int64_t h, std::int64_t w, DType dtype) {
  Tensor out(Shape{1, channels, h, w}, dtype);
  for (std::size_t i = 0; i < acc.size(); ++i) out.set(static_cast<std::int64_t>(i), 0.5 + 0.45 * std::tanh(acc[i]));
  return out;
}

}  // namespace

Tensor textured_image(std::int64_t h, std::int64_t w, std::int64_t channels, std::uint64_t seed, double ox,
                      double oy, DType dtype) {
  std::vector<double> acc(static_cast<std::size_t>(channels * h * w), 0.0);
  splat(acc, make_blobs(channels, Rng(seed, 17), 7000, 1.5, 5.0, 1.0), channels, h, w, ox, oy);
  return squash(acc, channels, h, w, dtype);
}

Tensor natural_image(std::int64_t h, std::int64_t w, std::int64_t channels, std::uint64_t seed, double ox,
                     double oy, DType dtype) {
  std::vector<double> acc(static_cast<std::size_t>(channels * h * w), 0.0);
  // One octave of blob sizes per band, fewer and stronger towards coarse scales.
  const Rng root(seed, 23);
  double smin = 2.0;
  for (int band = 0; band < 5; ++band, smin *= 2.0) {
    const int count = static_cast<int>(1024.0 * 1024.0 / (12.0 * smin * smin));
    splat(acc, make_blobs(channels, root.split(static_cast<std::uint64_t>(band)), count, smin, 2.0 * smin, 0.6), channels, h, w, ox, oy);
  }
  return squash(acc, channels, h, w, dtype);
}

}  // namespace dcv
