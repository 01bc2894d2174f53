#include "dcv/filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dcv/geometry.hpp"
#include "kernels.hpp"

namespace dcv {

namespace {

void require_odd(std::int64_t kh, std::int64_t kw, const char* op) {
  if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0) {
    throw ParameterError(std::string(op) + ": kernel extents must be odd and positive, got " +
                         std::to_string(kh) + "x" + std::to_string(kw));
  }
}

Var kernel_var(std::int64_t kh, std::int64_t kw, std::initializer_list<double> v, DType dt) {
  return Var(Tensor::from_values(Shape{kh, kw}, v, dt));
}

}  // namespace

Kernel2d gaussian_kernel1d(std::int64_t size, double sigma, DType dtype) {
  if (size < 1 || size % 2 == 0) throw ParameterError("gaussian_kernel1d: size must be odd");
  if (!(sigma > 0.0)) throw ParameterError("gaussian_kernel1d: sigma must be > 0");
  std::vector<double> w(static_cast<std::size_t>(size));
  const std::int64_t r = size / 2;
  double total = 0.0;
  for (std::int64_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i - r);
    w[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= total;
  return {Tensor::from_values(Shape{1, size}, w, dtype), true};
}

Kernel2d gaussian_kernel2d(std::int64_t kh, std::int64_t kw, double sigma_y, double sigma_x,
                           DType dtype) {
  const Tensor gy = gaussian_kernel1d(kh, sigma_y).weights;
  const Tensor gx = gaussian_kernel1d(kw, sigma_x).weights;
  Tensor k(Shape{kh, kw}, DType::f64);
  for (std::int64_t y = 0; y < kh; ++y)
    for (std::int64_t x = 0; x < kw; ++x) k.set(y * kw + x, gy.at(y) * gx.at(x));
  return {k.to(dtype), true};
}

Var gaussian_blur2d(const Var& img, std::int64_t kh, std::int64_t kw, double sigma_y,
                    double sigma_x, Border border) {
  require_odd(kh, kw, "gaussian_blur2d");
  const Var gx(gaussian_kernel1d(kw, sigma_x, img.dtype()).weights);
  const Var gy(gaussian_kernel1d(kh, sigma_y, img.dtype()).weights.reshape(Shape{kh, 1}));
  return conv2d(conv2d(img, gx, border), gy, border);
}

Var box_blur(const Var& img, std::int64_t kh, std::int64_t kw, Border border) {
  require_odd(kh, kw, "box_blur");
  const Var k(Tensor::full(Shape{kh, kw}, 1.0 / static_cast<double>(kh * kw), img.dtype()));
  return conv2d(img, k, border);
}

Var median_blur(const Var& img, std::int64_t kh, std::int64_t kw) {
  kernels::require_4d(img, "median_blur");
  require_odd(kh, kw, "median_blur");
  const std::int64_t n = img.size(0), c = img.size(1), h = img.size(2), w = img.size(3);
  const std::int64_t ry = kh / 2, rx = kw / 2, count = kh * kw;
  const Tensor iv = img.value();
  Tensor out(img.shape(), img.dtype());
  std::vector<std::int64_t> src(static_cast<std::size_t>(iv.numel()));
  dispatch(img.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pi = iv.values<T>().data();
    T* po = out.mutable_values<T>().data();
    std::vector<std::int64_t> idx(static_cast<std::size_t>(count));
    std::vector<T> vals(static_cast<std::size_t>(count));
    for (std::int64_t p = 0; p < n * c; ++p) {
      const std::int64_t base = p * h * w;
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          std::size_t k = 0;
          for (std::int64_t dy = -ry; dy <= ry; ++dy) {
            const std::int64_t sy = border_index(y + dy, h, Border::reflect);
            for (std::int64_t dx = -rx; dx <= rx; ++dx) {
              const std::int64_t sx = border_index(x + dx, w, Border::reflect);
              idx[k] = base + sy * w + sx;
              vals[k] = pi[idx[k]];
              ++k;
            }
          }
          std::vector<T> sorted = vals;
          std::nth_element(sorted.begin(), sorted.begin() + count / 2, sorted.end());
          const T med = sorted[static_cast<std::size_t>(count / 2)];
          const std::int64_t o = base + y * w + x;
          po[o] = med;
          // First window element (scan order) holding the median.
          for (std::size_t j = 0; j < vals.size(); ++j) {
            if (vals[j] == med) {
              src[static_cast<std::size_t>(o)] = idx[j];
              break;
            }
          }
        }
      }
    }
  });
  const Shape shape = img.shape();
  BackwardFn backward = [shape, src](const Tensor& g, const std::vector<bool>&) {
    Tensor gi(shape, g.dtype());
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* pg = g.values<T>().data();
      T* pgi = gi.mutable_values<T>().data();
      for (std::size_t i = 0; i < src.size(); ++i) pgi[src[i]] += pg[i];
    });
    return std::vector<Tensor>{gi};
  };
  return detail::make_result("median_blur", std::move(out), {&img}, std::move(backward));
}

GradientMode parse_gradient_mode(std::string_view name) {
  if (name == "sobel") return GradientMode::sobel;
  if (name == "diff") return GradientMode::diff;
  throw ParameterError("unknown gradient mode '" + std::string(name) + "'");
}

Var spatial_gradient(const Var& img, GradientMode mode, bool normalized, Border border) {
  kernels::require_4d(img, "spatial_gradient");
  const DType dt = img.dtype();
  Var kx, ky;
  if (mode == GradientMode::sobel) {
    const double s = normalized ? 1.0 / 8.0 : 1.0;
    kx = kernel_var(3, 3, {-s, 0, s, -2 * s, 0, 2 * s, -s, 0, s}, dt);
    ky = kernel_var(3, 3, {-s, -2 * s, -s, 0, 0, 0, s, 2 * s, s}, dt);
  } else {
    kx = kernel_var(1, 3, {-0.5, 0.0, 0.5}, dt);
    ky = kernel_var(3, 1, {-0.5, 0.0, 0.5}, dt);
  }
  const std::int64_t n = img.size(0), c = img.size(1), h = img.size(2), w = img.size(3);
  const Var dx = reshape(conv2d(img, kx, border), Shape{n, c, 1, h, w});
  const Var dy = reshape(conv2d(img, ky, border), Shape{n, c, 1, h, w});
  return concat({dx, dy}, 2);
}

Var spatial_gradient(const Var& img, std::string_view mode, bool normalized) {
  return spatial_gradient(img, parse_gradient_mode(mode), normalized);
}

Var spatial_gradient2(const Var& img, Border border) {
  kernels::require_4d(img, "spatial_gradient2");
  const DType dt = img.dtype();
  const Var kxx = kernel_var(1, 3, {1.0, -2.0, 1.0}, dt);
  const Var kyy = kernel_var(3, 1, {1.0, -2.0, 1.0}, dt);
  const Var kxy = kernel_var(3, 3, {0.25, 0.0, -0.25, 0.0, 0.0, 0.0, -0.25, 0.0, 0.25}, dt);
  const std::int64_t n = img.size(0), c = img.size(1), h = img.size(2), w = img.size(3);
  const Shape s{n, c, 1, h, w};
  return concat({reshape(conv2d(img, kxx, border), s), reshape(conv2d(img, kxy, border), s),
                 reshape(conv2d(img, kyy, border), s)},
                2);
}

Var sobel_edges(const Var& img) {
  kernels::require_4d(img, "sobel_edges");
  constexpr double kEps = 1e-12;
  const std::int64_t planes = img.size(0) * img.size(1), h = img.size(2), w = img.size(3);
  std::vector<std::int64_t> rows(static_cast<std::size_t>(3 * h)), cols(static_cast<std::size_t>(3 * w));
  for (std::int64_t k = 0; k < 3; ++k) {
    for (std::int64_t y = 0; y < h; ++y) rows[static_cast<std::size_t>(k * h + y)] = border_index(y + k - 1, h, Border::reflect) * w;
    for (std::int64_t x = 0; x < w; ++x) cols[static_cast<std::size_t>(k * w + x)] = border_index(x + k - 1, w, Border::reflect);
  }
  const Tensor iv = img.value();
  Tensor out = Tensor::empty(img.shape(), img.dtype());
  // Fused 3x3 Sobel + magnitude; dx/dy are kept for the backward pass.
  const bool keep = img.requires_grad();
  Tensor gxv, gyv;
  if (keep) gxv = Tensor::empty(img.shape(), img.dtype()), gyv = Tensor::empty(img.shape(), img.dtype());
  dispatch(img.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pi = iv.values<T>().data();
    T* po = out.mutable_values<T>().data();
    T* pdx = keep ? gxv.mutable_values<T>().data() : nullptr;
    T* pdy = keep ? gyv.mutable_values<T>().data() : nullptr;
    const std::int64_t* r0 = rows.data();
    const std::int64_t* r1 = rows.data() + h;
    const std::int64_t* r2 = rows.data() + 2 * h;
    const std::int64_t* c0 = cols.data();
    const std::int64_t* c2 = cols.data() + 2 * w;
    auto at = [&](const T* a, const T* b, const T* cc, std::int64_t x, std::int64_t xl, std::int64_t xr, T& dx, T& dy) {
      dx = ((a[xr] - a[xl]) + 2 * (b[xr] - b[xl]) + (cc[xr] - cc[xl])) / T(8);
      dy = ((cc[xl] - a[xl]) + 2 * (cc[x] - a[x]) + (cc[xr] - a[xr])) / T(8);
    };
    for (std::int64_t p = 0; p < planes; ++p) {
      const T* src = pi + p * h * w;
      const std::int64_t off = p * h * w;
      for (std::int64_t y = 0; y < h; ++y) {
        const T* a = src + r0[y];
        const T* b = src + r1[y];
        const T* cc = src + r2[y];
        T* o = po + off + y * w;
        T* ox = keep ? pdx + off + y * w : nullptr;
        T* oy = keep ? pdy + off + y * w : nullptr;
        auto edge = [&](std::int64_t x) {
          T dx, dy;
          at(a, b, cc, x, c0[x], c2[x], dx, dy);
          o[x] = std::sqrt(dx * dx + dy * dy + static_cast<T>(kEps));
          if (keep) ox[x] = dx, oy[x] = dy;
        };
        edge(0);
        // Interior: plain neighbours, vectorizable.
        if (keep) {
          for (std::int64_t x = 1; x < w - 1; ++x) {
            T dx, dy;
            at(a, b, cc, x, x - 1, x + 1, dx, dy);
            ox[x] = dx;
            oy[x] = dy;
            o[x] = std::sqrt(dx * dx + dy * dy + static_cast<T>(kEps));
          }
        } else {
          for (std::int64_t x = 1; x < w - 1; ++x) {
            T dx, dy;
            at(a, b, cc, x, x - 1, x + 1, dx, dy);
            o[x] = std::sqrt(dx * dx + dy * dy + static_cast<T>(kEps));
          }
        }
        if (w > 1) edge(w - 1);
      }
    }
  });
  BackwardFn backward = [gxv, gyv, out, rows, cols, planes, h, w](const Tensor& g,
                                                                   const std::vector<bool>&) {
    Tensor gi(out.shape(), out.dtype());
    dispatch(out.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const Tensor gv = g.to(out.dtype());
      const T* pg = gv.values<T>().data();
      const T* pm = out.values<T>().data();
      const T* pdx = gxv.values<T>().data();
      const T* pdy = gyv.values<T>().data();
      T* pgi = gi.mutable_values<T>().data();
      // Sobel taps as (row offset index, col offset index, wx, wy).
      static constexpr int kr[9] = {0, 0, 0, 1, 1, 1, 2, 2, 2};
      static constexpr int kc[9] = {0, 1, 2, 0, 1, 2, 0, 1, 2};
      static constexpr double wx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
      static constexpr double wy[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
      for (std::int64_t p = 0; p < planes; ++p) {
        const std::int64_t off = p * h * w;
        T* dst = pgi + off;
        for (std::int64_t y = 0; y < h; ++y) {
          for (std::int64_t x = 0; x < w; ++x) {
            const std::int64_t i = off + y * w + x;
            const T s = pg[i] / pm[i] / T(8);
            const T ax = s * pdx[i], ay = s * pdy[i];
            for (int t = 0; t < 9; ++t) {
              const std::int64_t sy = rows[static_cast<std::size_t>(kr[t] * h + y)];
              const std::int64_t sx = cols[static_cast<std::size_t>(kc[t] * w + x)];
              dst[sy + sx] += static_cast<T>(wx[t]) * ax + static_cast<T>(wy[t]) * ay;
            }
          }
        }
      }
    });
    return std::vector<Tensor>{gi};
  };
  return detail::make_result("sobel_edges", std::move(out), {&img}, std::move(backward));
}

Var laplacian(const Var& img, std::int64_t size) {
  if (size != 3) throw ParameterError("laplacian: only size 3 is supported");
  return conv2d(img, kernel_var(3, 3, {0, 1, 0, 1, -4, 1, 0, 1, 0}, img.dtype()), Border::reflect);
}

Var pyr_down(const Var& img) {
  kernels::require_4d(img, "pyr_down");
  const Var blurred = gaussian_blur2d(img, 5, 5, 1.0, 1.0);
  const std::int64_t h = std::max<std::int64_t>(1, img.size(2) / 2);
  const std::int64_t w = std::max<std::int64_t>(1, img.size(3) / 2);
  return resize(blurred, h, w);
}

}  // namespace dcv
