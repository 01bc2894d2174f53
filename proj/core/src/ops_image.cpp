#include <algorithm>
#include <cmath>
#include <limits>

#include "dcv/ops.hpp"
#include "kernels.hpp"

namespace dcv {

std::int64_t border_index(std::int64_t i, std::int64_t n, Border border) {
  if (i >= 0 && i < n) return i;
  switch (border) {
    case Border::zero:
      return -1;
    case Border::replicate:
      return std::clamp<std::int64_t>(i, 0, n - 1);
    case Border::reflect: {
      // Mirror including the edge sample: cba|abc|cba.
      const std::int64_t period = 2 * n;
      std::int64_t m = i % period;
      if (m < 0) m += period;
      return m < n ? m : period - 1 - m;
    }
  }
  return -1;
}

namespace {

// For every offset k in [0, taps) and output position x, the source index
// x + k - radius after border handling (-1 for zero border).
std::vector<std::int64_t> tap_table(std::int64_t n, std::int64_t taps, Border border) {
  const std::int64_t radius = taps / 2;
  std::vector<std::int64_t> t(static_cast<std::size_t>(taps * n));
  for (std::int64_t k = 0; k < taps; ++k) {
    for (std::int64_t x = 0; x < n; ++x) {
      t[static_cast<std::size_t>(k * n + x)] = border_index(x + k - radius, n, border);
    }
  }
  return t;
}

struct ConvGeometry {
  std::int64_t n, c, h, w, kh, kw;
  bool shared;
};

// Visits every (output pixel, tap) pair of one plane in a fixed order:
// fn(out offset, src offset, kernel offset).
template <typename F>
void for_each_tap(const ConvGeometry& g, const std::vector<std::int64_t>& rows,
                  const std::vector<std::int64_t>& cols, F&& fn) {
  const std::int64_t rx = g.kw / 2;
  for (std::int64_t y = 0; y < g.h; ++y) {
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      const std::int64_t sy = rows[static_cast<std::size_t>(ky * g.h + y)];
      if (sy < 0) continue;
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const std::int64_t dx = kx - rx;
        const std::int64_t lo = std::max<std::int64_t>(0, -dx);
        const std::int64_t hi = std::min<std::int64_t>(g.w, g.w - dx);
        const std::int64_t* cx = cols.data() + kx * g.w;
        const std::int64_t ko = ky * g.kw + kx;
        for (std::int64_t x = 0; x < std::min(lo, g.w); ++x) {
          if (cx[x] >= 0) fn(y * g.w + x, sy * g.w + cx[x], ko);
        }
        for (std::int64_t x = lo; x < hi; ++x) fn(y * g.w + x, sy * g.w + x + dx, ko);
        for (std::int64_t x = std::max(hi, lo); x < g.w; ++x) {
          if (cx[x] >= 0) fn(y * g.w + x, sy * g.w + cx[x], ko);
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, Border border) {
  kernels::require_4d(input, "conv2d");
  ConvGeometry g{input.size(0), input.size(1), input.size(2), input.size(3), 0, 0, true};
  if (kernel.ndim() == 2) {
    g.kh = kernel.size(0);
    g.kw = kernel.size(1);
  } else if (kernel.ndim() == 3 && kernel.size(0) == g.c) {
    g.kh = kernel.size(1);
    g.kw = kernel.size(2);
    g.shared = false;
  } else {
    throw ShapeError("conv2d: kernel must be kH x kW or C x kH x kW, got " + to_string(kernel.shape()));
  }
  if (g.kh % 2 == 0 || g.kw % 2 == 0) {
    throw ParameterError("conv2d: kernel extents must be odd, got " + to_string(kernel.shape()));
  }
  const DType dt = kernels::promote(input.dtype(), kernel.dtype());
  const Tensor iv = input.value().to(dt);
  const Tensor kv = kernel.value().to(dt);
  const auto rows = tap_table(g.h, g.kh, border);
  const auto cols = tap_table(g.w, g.kw, border);
  const std::int64_t plane = g.h * g.w;
  const std::int64_t ksize = g.kh * g.kw;

  Tensor out(input.shape(), dt);
  dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    const T* pi = iv.values<T>().data();
    const T* pk = kv.values<T>().data();
    T* po = out.mutable_values<T>().data();
    for (std::int64_t n = 0; n < g.n; ++n) {
      for (std::int64_t c = 0; c < g.c; ++c) {
        const T* src = pi + (n * g.c + c) * plane;
        const T* k = pk + (g.shared ? 0 : c * ksize);
        T* dst = po + (n * g.c + c) * plane;
        for_each_tap(g, rows, cols, [&](std::int64_t o, std::int64_t s, std::int64_t ko) {
          dst[o] += k[ko] * src[s];
        });
      }
    }
  });

  const DType in_dt = input.dtype(), k_dt = kernel.dtype();
  const Shape k_shape = kernel.shape();
  BackwardFn backward = [iv, kv, g, rows, cols, plane, ksize, in_dt, k_dt, k_shape](
                            const Tensor& grad, const std::vector<bool>& needs) {
    std::vector<Tensor> grads(2);
    const DType dt = iv.dtype();
    const Tensor gv = grad.to(dt);
    Tensor gi, gk;
    if (needs[0]) gi = Tensor(iv.shape(), dt);
    if (needs[1]) gk = Tensor(k_shape, dt);
    dispatch(dt, [&](auto tag) {
      using T = decltype(tag);
      const T* pi = iv.values<T>().data();
      const T* pk = kv.values<T>().data();
      const T* pg = gv.values<T>().data();
      T* pgi = needs[0] ? gi.mutable_values<T>().data() : nullptr;
      T* pgk = needs[1] ? gk.mutable_values<T>().data() : nullptr;
      for (std::int64_t n = 0; n < g.n; ++n) {
        for (std::int64_t c = 0; c < g.c; ++c) {
          const std::int64_t off = (n * g.c + c) * plane;
          const T* src = pi + off;
          const T* go = pg + off;
          const T* k = pk + (g.shared ? 0 : c * ksize);
          if (pgi) {
            T* dsrc = pgi + off;
            for_each_tap(g, rows, cols, [&](std::int64_t o, std::int64_t s, std::int64_t ko) {
              dsrc[s] += k[ko] * go[o];
            });
          }
          if (pgk) {
            T* dk = pgk + (g.shared ? 0 : c * ksize);
            for_each_tap(g, rows, cols, [&](std::int64_t o, std::int64_t s, std::int64_t ko) {
              dk[ko] += go[o] * src[s];
            });
          }
        }
      }
    });
    if (needs[0]) grads[0] = gi.to(in_dt);
    if (needs[1]) grads[1] = gk.to(k_dt);
    return grads;
  };
  return detail::make_result("conv2d", std::move(out), {&input, &kernel}, std::move(backward));
}

Var pad(const Var& x, Pad2d p, Border border, double value) {
  kernels::require_4d(x, "pad");
  if (p.top < 0 || p.bottom < 0 || p.left < 0 || p.right < 0) {
    throw ParameterError("pad: negative padding");
  }
  const std::int64_t n = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const std::int64_t ho = h + p.top + p.bottom, wo = w + p.left + p.right;
  std::vector<std::int64_t> rmap(static_cast<std::size_t>(ho)), cmap(static_cast<std::size_t>(wo));
  for (std::int64_t y = 0; y < ho; ++y) rmap[static_cast<std::size_t>(y)] = border_index(y - p.top, h, border);
  for (std::int64_t xx = 0; xx < wo; ++xx) cmap[static_cast<std::size_t>(xx)] = border_index(xx - p.left, w, border);
  Tensor out(Shape{n, c, ho, wo}, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = x.value().values<T>().data();
    T* po = out.mutable_values<T>().data();
    for (std::int64_t pl = 0; pl < n * c; ++pl) {
      for (std::int64_t y = 0; y < ho; ++y) {
        for (std::int64_t xx = 0; xx < wo; ++xx) {
          const auto sy = rmap[static_cast<std::size_t>(y)], sx = cmap[static_cast<std::size_t>(xx)];
          po[(pl * ho + y) * wo + xx] =
              (sy < 0 || sx < 0) ? static_cast<T>(value) : px[(pl * h + sy) * w + sx];
        }
      }
    }
  });
  const Shape in_shape = x.shape();
  BackwardFn backward = [in_shape, rmap, cmap, n, c, h, w, ho, wo](const Tensor& g,
                                                                   const std::vector<bool>&) {
    Tensor gx(in_shape, g.dtype());
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* pg = g.values<T>().data();
      T* pgx = gx.mutable_values<T>().data();
      for (std::int64_t pl = 0; pl < n * c; ++pl) {
        for (std::int64_t y = 0; y < ho; ++y) {
          for (std::int64_t xx = 0; xx < wo; ++xx) {
            const auto sy = rmap[static_cast<std::size_t>(y)], sx = cmap[static_cast<std::size_t>(xx)];
            if (sy >= 0 && sx >= 0) pgx[(pl * h + sy) * w + sx] += pg[(pl * ho + y) * wo + xx];
          }
        }
      }
    });
    return std::vector<Tensor>{gx};
  };
  return detail::make_result("pad", std::move(out), {&x}, std::move(backward));
}

// ---------------------------------------------------------------------------
// Bilinear sampling

namespace {

// Rounds coordinates that sit within a few ulps of an integer onto it, so
// that normalize/unnormalize round trips land exactly on pixel centers.
template <typename T>
T snap(T u) {
  const T r = std::nearbyint(u);
  const T tol = T(16) * std::numeric_limits<T>::epsilon() * std::max(T(1), std::abs(u));
  return std::abs(u - r) <= tol ? r : u;
}

}  // namespace

Var sample_bilinear_pixels(const Var& input, const Var& grid) {
  kernels::require_4d(input, "sample_bilinear_pixels");
  if (grid.ndim() != 4 || grid.size(3) != 2) {
    throw ShapeError("grid must be N x H' x W' x 2, got " + to_string(grid.shape()));
  }
  const std::int64_t n = input.size(0), c = input.size(1), h = input.size(2), w = input.size(3);
  const std::int64_t gn = grid.size(0), ho = grid.size(1), wo = grid.size(2);
  if (gn != n && gn != 1) {
    throw ShapeError("grid batch " + std::to_string(gn) + " does not match input batch " + std::to_string(n));
  }
  const DType dt = kernels::promote(input.dtype(), grid.dtype());
  const Tensor iv = input.value().to(dt);
  const Tensor gv = grid.value().to(dt);
  Tensor out(Shape{n, c, ho, wo}, dt);
  const std::int64_t plane = h * w, oplane = ho * wo;

  dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    const T* pi = iv.values<T>().data();
    const T* pg = gv.values<T>().data();
    T* po = out.mutable_values<T>().data();
    for (std::int64_t b = 0; b < n; ++b) {
      const T* gb = pg + (gn == 1 ? 0 : b) * oplane * 2;
      for (std::int64_t i = 0; i < oplane; ++i) {
        const T u = snap(gb[2 * i]), v = snap(gb[2 * i + 1]);
        if (!std::isfinite(u) || !std::isfinite(v)) continue;
        const T fx = std::floor(u), fy = std::floor(v);
        if (fx < -1 || fy < -1 || fx > static_cast<T>(w) || fy > static_cast<T>(h)) continue;
        const auto x0 = static_cast<std::int64_t>(fx), y0 = static_cast<std::int64_t>(fy);
        const T wx = u - fx, wy = v - fy;
        const bool vx0 = x0 >= 0 && x0 < w, vx1 = x0 + 1 >= 0 && x0 + 1 < w;
        const bool vy0 = y0 >= 0 && y0 < h, vy1 = y0 + 1 >= 0 && y0 + 1 < h;
        const T w00 = (1 - wx) * (1 - wy), w01 = wx * (1 - wy), w10 = (1 - wx) * wy, w11 = wx * wy;
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const T* src = pi + (b * c + ch) * plane;
          T acc = 0;
          if (vy0 && vx0) acc += w00 * src[y0 * w + x0];
          if (vy0 && vx1) acc += w01 * src[y0 * w + x0 + 1];
          if (vy1 && vx0) acc += w10 * src[(y0 + 1) * w + x0];
          if (vy1 && vx1) acc += w11 * src[(y0 + 1) * w + x0 + 1];
          po[(b * c + ch) * oplane + i] = acc;
        }
      }
    }
  });

  const DType in_dt = input.dtype(), g_dt = grid.dtype();
  BackwardFn backward = [iv, gv, n, c, h, w, gn, oplane, plane, in_dt, g_dt](
                            const Tensor& grad, const std::vector<bool>& needs) {
    std::vector<Tensor> grads(2);
    const DType dt = iv.dtype();
    const Tensor go = grad.to(dt);
    Tensor gi, gg;
    if (needs[0]) gi = Tensor(iv.shape(), dt);
    if (needs[1]) gg = Tensor(gv.shape(), dt);
    dispatch(dt, [&](auto tag) {
      using T = decltype(tag);
      const T* pi = iv.values<T>().data();
      const T* pg = gv.values<T>().data();
      const T* pgo = go.values<T>().data();
      T* pgi = needs[0] ? gi.mutable_values<T>().data() : nullptr;
      T* pgg = needs[1] ? gg.mutable_values<T>().data() : nullptr;
      for (std::int64_t b = 0; b < n; ++b) {
        const std::int64_t goff = (gn == 1 ? 0 : b) * oplane * 2;
        for (std::int64_t i = 0; i < oplane; ++i) {
          const T u = snap(pg[goff + 2 * i]), v = snap(pg[goff + 2 * i + 1]);
          if (!std::isfinite(u) || !std::isfinite(v)) continue;
          const T fx = std::floor(u), fy = std::floor(v);
          if (fx < -1 || fy < -1 || fx > static_cast<T>(w) || fy > static_cast<T>(h)) continue;
          const auto x0 = static_cast<std::int64_t>(fx), y0 = static_cast<std::int64_t>(fy);
          const T wx = u - fx, wy = v - fy;
          const bool vx0 = x0 >= 0 && x0 < w, vx1 = x0 + 1 >= 0 && x0 + 1 < w;
          const bool vy0 = y0 >= 0 && y0 < h, vy1 = y0 + 1 >= 0 && y0 + 1 < h;
          T du = 0, dv = 0;
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const T g = pgo[(b * c + ch) * oplane + i];
            if (g == 0) continue;
            const T* src = pi + (b * c + ch) * plane;
            const T v00 = (vy0 && vx0) ? src[y0 * w + x0] : T(0);
            const T v01 = (vy0 && vx1) ? src[y0 * w + x0 + 1] : T(0);
            const T v10 = (vy1 && vx0) ? src[(y0 + 1) * w + x0] : T(0);
            const T v11 = (vy1 && vx1) ? src[(y0 + 1) * w + x0 + 1] : T(0);
            if (pgi) {
              T* dsrc = pgi + (b * c + ch) * plane;
              if (vy0 && vx0) dsrc[y0 * w + x0] += g * (1 - wx) * (1 - wy);
              if (vy0 && vx1) dsrc[y0 * w + x0 + 1] += g * wx * (1 - wy);
              if (vy1 && vx0) dsrc[(y0 + 1) * w + x0] += g * (1 - wx) * wy;
              if (vy1 && vx1) dsrc[(y0 + 1) * w + x0 + 1] += g * wx * wy;
            }
            du += g * ((1 - wy) * (v01 - v00) + wy * (v11 - v10));
            dv += g * ((1 - wx) * (v10 - v00) + wx * (v11 - v01));
          }
          if (pgg) {
            pgg[goff + 2 * i] += du;
            pgg[goff + 2 * i + 1] += dv;
          }
        }
      }
    });
    if (needs[0]) grads[0] = gi.to(in_dt);
    if (needs[1]) grads[1] = gg.to(g_dt);
    return grads;
  };
  return detail::make_result("sample_bilinear", std::move(out), {&input, &grid}, std::move(backward));
}

Var grid_sample_bilinear(const Var& input, const Var& grid) {
  kernels::require_4d(input, "grid_sample_bilinear");
  if (grid.ndim() != 4 || grid.size(3) != 2) {
    throw ShapeError("grid_sample_bilinear: grid must be N x H' x W' x 2, got " + to_string(grid.shape()));
  }
  const double sx = 0.5 * static_cast<double>(input.size(3) - 1);
  const double sy = 0.5 * static_cast<double>(input.size(2) - 1);
  const Tensor scale = Tensor::from_values(Shape{2}, {sx, sy}, grid.dtype());
  const Var pixels = (grid + 1.0) * Var(scale);
  return sample_bilinear_pixels(input, pixels);
}

Tensor identity_grid(std::int64_t height, std::int64_t width, DType dtype) {
  Tensor g(Shape{1, height, width, 2}, dtype);
  auto lin = [](std::int64_t i, std::int64_t n) {
    return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0 : 0.0;
  };
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    T* p = g.mutable_values<T>().data();
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        p[2 * (y * width + x)] = static_cast<T>(lin(x, width));
        p[2 * (y * width + x) + 1] = static_cast<T>(lin(y, height));
      }
    }
  });
  return g;
}

// ---------------------------------------------------------------------------

Var extract_patches(const Var& input, std::int64_t wh, std::int64_t ww, std::int64_t sh,
                    std::int64_t sw) {
  kernels::require_4d(input, "extract_patches");
  const std::int64_t n = input.size(0), c = input.size(1), h = input.size(2), w = input.size(3);
  if (wh < 1 || ww < 1 || sh < 1 || sw < 1) throw ParameterError("extract_patches: window and stride must be >= 1");
  if (wh > h || ww > w) {
    throw ParameterError("extract_patches: window " + std::to_string(wh) + "x" + std::to_string(ww) +
                         " larger than image " + std::to_string(h) + "x" + std::to_string(w));
  }
  const std::int64_t py = (h - wh) / sh + 1, px = (w - ww) / sw + 1, p = py * px;
  Tensor out(Shape{n, p, c, wh, ww}, input.dtype());
  auto visit = [=](auto&& fn) {
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t iy = 0; iy < py; ++iy)
        for (std::int64_t ix = 0; ix < px; ++ix)
          for (std::int64_t ch = 0; ch < c; ++ch)
            for (std::int64_t y = 0; y < wh; ++y)
              for (std::int64_t x = 0; x < ww; ++x) {
                const std::int64_t o = ((((b * p + iy * px + ix) * c + ch) * wh + y) * ww + x);
                const std::int64_t s = ((b * c + ch) * h + iy * sh + y) * w + ix * sw + x;
                fn(o, s);
              }
  };
  dispatch(input.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pi = input.value().values<T>().data();
    T* po = out.mutable_values<T>().data();
    visit([&](std::int64_t o, std::int64_t s) { po[o] = pi[s]; });
  });
  const Shape in_shape = input.shape();
  BackwardFn backward = [in_shape, visit](const Tensor& g, const std::vector<bool>&) {
    Tensor gi(in_shape, g.dtype());
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* pg = g.values<T>().data();
      T* pgi = gi.mutable_values<T>().data();
      visit([&](std::int64_t o, std::int64_t s) { pgi[s] += pg[o]; });
    });
    return std::vector<Tensor>{gi};
  };
  return detail::make_result("extract_patches", std::move(out), {&input}, std::move(backward));
}

}  // namespace dcv
