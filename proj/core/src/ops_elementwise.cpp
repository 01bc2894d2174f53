#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dcv/ops.hpp"
#include "kernels.hpp"

namespace dcv {

using kernels::broadcast_strides;
using kernels::for_each_broadcast;
using kernels::promote;

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::int64_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("incompatible broadcast shapes " + to_string(a) + " and " + to_string(b));
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

namespace {

// Generic broadcasting binary op. `fwd(x, y)` computes the value,
// `da(x, y, z)` / `db(x, y, z)` the partials.
template <typename Fwd, typename DA, typename DB>
Var binary_op(const char* name, const Var& a, const Var& b, Fwd fwd, DA da, DB db) {
  const DType dt = promote(a.dtype(), b.dtype());
  const Tensor av = a.value().to(dt);
  const Tensor bv = b.value().to(dt);
  const Shape out_shape = broadcast_shapes(av.shape(), bv.shape());
  const auto sa = broadcast_strides(av.shape(), out_shape);
  const auto sb = broadcast_strides(bv.shape(), out_shape);

  Tensor out(out_shape, dt);
  dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    const T* pa = av.values<T>().data();
    const T* pb = bv.values<T>().data();
    T* po = out.mutable_values<T>().data();
    for_each_broadcast(out_shape, sa, sb, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) {
      po[io] = static_cast<T>(fwd(pa[ia], pb[ib]));
    });
  });

  const DType a_dt = a.dtype(), b_dt = b.dtype();
  BackwardFn backward = [av, bv, out, out_shape, sa, sb, a_dt, b_dt, da, db](
                            const Tensor& g, const std::vector<bool>& needs) {
    std::vector<Tensor> grads(2);
    const DType dt = out.dtype();
    const Tensor gv = g.to(dt);
    Tensor ga, gb;
    if (needs[0]) ga = Tensor(av.shape(), dt);
    if (needs[1]) gb = Tensor(bv.shape(), dt);
    dispatch(dt, [&](auto tag) {
      using T = decltype(tag);
      const T* pa = av.values<T>().data();
      const T* pb = bv.values<T>().data();
      const T* pz = out.values<T>().data();
      const T* pg = gv.values<T>().data();
      T* pga = needs[0] ? ga.mutable_values<T>().data() : nullptr;
      T* pgb = needs[1] ? gb.mutable_values<T>().data() : nullptr;
      for_each_broadcast(out_shape, sa, sb, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) {
        if (pga) pga[ia] += static_cast<T>(pg[io] * da(pa[ia], pb[ib], pz[io]));
        if (pgb) pgb[ib] += static_cast<T>(pg[io] * db(pa[ia], pb[ib], pz[io]));
      });
    });
    if (needs[0]) grads[0] = ga.to(a_dt);
    if (needs[1]) grads[1] = gb.to(b_dt);
    return grads;
  };
  return detail::make_result(name, std::move(out), {&a, &b}, std::move(backward));
}

template <typename Fwd, typename D>
Var unary_op(const char* name, const Var& x, Fwd fwd, D dfdx) {
  const Tensor xv = x.value();
  Tensor out(xv.shape(), xv.dtype());
  dispatch(xv.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto px = xv.values<T>();
    auto po = out.mutable_values<T>();
    for (std::size_t i = 0; i < px.size(); ++i) po[i] = static_cast<T>(fwd(px[i]));
  });
  BackwardFn backward = [xv, out, dfdx](const Tensor& g, const std::vector<bool>&) {
    Tensor gx(xv.shape(), xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto px = xv.values<T>();
      auto pz = out.values<T>();
      const Tensor gv = g.to(xv.dtype());
      auto pg = gv.values<T>();
      auto pgx = gx.mutable_values<T>();
      for (std::size_t i = 0; i < px.size(); ++i) pgx[i] = static_cast<T>(pg[i] * dfdx(px[i], pz[i]));
    });
    return std::vector<Tensor>{gx};
  };
  return detail::make_result(name, std::move(out), {&x}, std::move(backward));
}

Var scalar_like(double v, const Var& like) { return Var(Tensor::scalar(v, like.dtype())); }

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary_op(
      "add", a, b, [](auto x, auto y) { return x + y; }, [](auto, auto, auto) { return 1.0; },
      [](auto, auto, auto) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary_op(
      "sub", a, b, [](auto x, auto y) { return x - y; }, [](auto, auto, auto) { return 1.0; },
      [](auto, auto, auto) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary_op(
      "mul", a, b, [](auto x, auto y) { return x * y; }, [](auto, auto y, auto) { return y; },
      [](auto x, auto, auto) { return x; });
}

Var div(const Var& a, const Var& b) {
  return binary_op(
      "div", a, b, [](auto x, auto y) { return x / y; }, [](auto, auto y, auto) { return 1 / y; },
      [](auto, auto y, auto z) { return -z / y; });
}

Var maximum(const Var& a, const Var& b) {
  return binary_op(
      "maximum", a, b, [](auto x, auto y) { return x >= y ? x : y; },
      [](auto x, auto y, auto) { return x >= y ? 1.0 : 0.0; },
      [](auto x, auto y, auto) { return x >= y ? 0.0 : 1.0; });
}

Var minimum(const Var& a, const Var& b) {
  return binary_op(
      "minimum", a, b, [](auto x, auto y) { return x <= y ? x : y; },
      [](auto x, auto y, auto) { return x <= y ? 1.0 : 0.0; },
      [](auto x, auto y, auto) { return x <= y ? 0.0 : 1.0; });
}

Var atan2(const Var& y, const Var& x) {
  return binary_op(
      "atan2", y, x, [](auto yy, auto xx) { return std::atan2(yy, xx); },
      [](auto yy, auto xx, auto) {
        const double r2 = static_cast<double>(xx) * xx + static_cast<double>(yy) * yy;
        return r2 > 0 ? xx / r2 : 0.0;
      },
      [](auto yy, auto xx, auto) {
        const double r2 = static_cast<double>(xx) * xx + static_cast<double>(yy) * yy;
        return r2 > 0 ? -yy / r2 : 0.0;
      });
}

Var hypot(const Var& x, const Var& y) {
  return binary_op(
      "hypot", x, y, [](auto a, auto b) { return std::sqrt(a * a + b * b); },
      [](auto a, auto, auto r) { return r > 0 ? a / r : 0.0; },
      [](auto, auto b, auto r) { return r > 0 ? b / r : 0.0; });
}

Var neg(const Var& x) {
  return unary_op("neg", x, [](auto v) { return -v; }, [](auto, auto) { return -1.0; });
}

Var abs(const Var& x) {
  return unary_op(
      "abs", x, [](auto v) { return std::abs(v); },
      [](auto v, auto) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var exp(const Var& x) {
  return unary_op("exp", x, [](auto v) { return std::exp(v); }, [](auto, auto z) { return z; });
}

Var log(const Var& x) {
  return unary_op("log", x, [](auto v) { return std::log(v); }, [](auto v, auto) { return 1 / v; });
}

Var sqrt(const Var& x) {
  return unary_op(
      "sqrt", x, [](auto v) { return std::sqrt(v); }, [](auto, auto z) { return 0.5 / z; });
}

Var square(const Var& x) {
  return unary_op("square", x, [](auto v) { return v * v; }, [](auto v, auto) { return 2 * v; });
}

Var sin(const Var& x) {
  return unary_op(
      "sin", x, [](auto v) { return std::sin(v); }, [](auto v, auto) { return std::cos(v); });
}

Var cos(const Var& x) {
  return unary_op(
      "cos", x, [](auto v) { return std::cos(v); }, [](auto v, auto) { return -std::sin(v); });
}

Var pow(const Var& x, double p) {
  return unary_op(
      "pow", x, [p](auto v) { return std::pow(static_cast<double>(v), p); },
      [p](auto v, auto) { return p * std::pow(static_cast<double>(v), p - 1); });
}

Var clamp(const Var& x, double lo, double hi) {
  if (lo > hi) throw ParameterError("clamp: lo > hi");
  return unary_op(
      "clamp", x, [lo, hi](auto v) { return std::clamp(static_cast<double>(v), lo, hi); },
      [lo, hi](auto v, auto) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator*(const Var& a, const Var& b) { return mul(a, b); }
Var operator/(const Var& a, const Var& b) { return div(a, b); }
Var operator-(const Var& x) { return neg(x); }
Var operator+(const Var& a, double b) { return add(a, scalar_like(b, a)); }
Var operator+(double a, const Var& b) { return add(scalar_like(a, b), b); }
Var operator-(const Var& a, double b) { return sub(a, scalar_like(b, a)); }
Var operator-(double a, const Var& b) { return sub(scalar_like(a, b), b); }
Var operator*(const Var& a, double b) { return mul(a, scalar_like(b, a)); }
Var operator*(double a, const Var& b) { return mul(scalar_like(a, b), b); }
Var operator/(const Var& a, double b) { return div(a, scalar_like(b, a)); }
Var operator/(double a, const Var& b) { return div(scalar_like(a, b), b); }

// ---------------------------------------------------------------------------
// Reductions

namespace {

Shape reduced_shape(const Shape& in, const std::vector<int>& dims, bool keepdim,
                    std::vector<bool>& reduce) {
  const int r = static_cast<int>(in.size());
  reduce.assign(in.size(), false);
  for (int d : dims) reduce[static_cast<std::size_t>(kernels::normalize_dim(d, r))] = true;
  Shape keep;
  Shape out;
  for (int d = 0; d < r; ++d) {
    const auto ud = static_cast<std::size_t>(d);
    keep.push_back(reduce[ud] ? 1 : in[ud]);
    if (!reduce[ud]) out.push_back(in[ud]);
  }
  if (keepdim) return keep;
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace

Var sum(const Var& x, const std::vector<int>& dims, bool keepdim) {
  std::vector<bool> reduce;
  const Shape out_shape = reduced_shape(x.shape(), dims, keepdim, reduce);
  Shape keep_shape = x.shape();
  for (std::size_t d = 0; d < keep_shape.size(); ++d) {
    if (reduce[d]) keep_shape[d] = 1;
  }
  const Shape in_shape = x.shape();
  const auto s_in = kernels::contiguous_strides(in_shape);
  const auto s_out = broadcast_strides(keep_shape, in_shape);
  const Tensor xv = x.value();
  Tensor out(keep_shape, xv.dtype());
  dispatch(xv.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = xv.values<T>().data();
    T* po = out.mutable_values<T>().data();
    for_each_broadcast(in_shape, s_in, s_out,
                       [&](std::int64_t i, std::int64_t, std::int64_t io) { po[io] += px[i]; });
  });
  out = out.reshape(out_shape);
  BackwardFn backward = [in_shape, keep_shape, s_in, s_out](const Tensor& g,
                                                            const std::vector<bool>&) {
    Tensor gx(in_shape, g.dtype());
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* pg = g.values<T>().data();
      T* pgx = gx.mutable_values<T>().data();
      for_each_broadcast(in_shape, s_in, s_out,
                         [&](std::int64_t i, std::int64_t, std::int64_t io) { pgx[i] = pg[io]; });
    });
    return std::vector<Tensor>{gx};
  };
  return detail::make_result("sum", std::move(out), {&x}, std::move(backward));
}

Var sum(const Var& x) {
  std::vector<int> all(static_cast<std::size_t>(x.ndim()));
  for (int d = 0; d < x.ndim(); ++d) all[static_cast<std::size_t>(d)] = d;
  return reshape(sum(x, all, false), Shape{1});
}

Var mean(const Var& x, const std::vector<int>& dims, bool keepdim) {
  std::int64_t count = 1;
  for (int d : dims) count *= x.size(kernels::normalize_dim(d, x.ndim()));
  return sum(x, dims, keepdim) * (1.0 / static_cast<double>(count));
}

Var mean(const Var& x) { return sum(x) * (1.0 / static_cast<double>(x.numel())); }

namespace {

Var extremum_dim(const Var& x, int dim, bool keepdim, bool is_max) {
  dim = kernels::normalize_dim(dim, x.ndim());
  const Shape in_shape = x.shape();
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < dim; ++d) outer *= in_shape[static_cast<std::size_t>(d)];
  for (int d = dim + 1; d < x.ndim(); ++d) inner *= in_shape[static_cast<std::size_t>(d)];
  const std::int64_t n = in_shape[static_cast<std::size_t>(dim)];
  Shape out_shape = in_shape;
  out_shape[static_cast<std::size_t>(dim)] = 1;
  const Tensor xv = x.value();
  Tensor out(out_shape, xv.dtype());
  std::vector<std::int64_t> arg(static_cast<std::size_t>(outer * inner));
  dispatch(xv.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = xv.values<T>().data();
    T* po = out.mutable_values<T>().data();
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t i = 0; i < inner; ++i) {
        std::int64_t best = o * n * inner + i;
        for (std::int64_t k = 1; k < n; ++k) {
          const std::int64_t idx = (o * n + k) * inner + i;
          if (is_max ? px[idx] > px[best] : px[idx] < px[best]) best = idx;
        }
        po[o * inner + i] = px[best];
        arg[static_cast<std::size_t>(o * inner + i)] = best;
      }
    }
  });
  if (!keepdim) {
    Shape s;
    for (int d = 0; d < x.ndim(); ++d) {
      if (d != dim) s.push_back(in_shape[static_cast<std::size_t>(d)]);
    }
    if (s.empty()) s.push_back(1);
    out = out.reshape(s);
  }
  BackwardFn backward = [in_shape, arg](const Tensor& g, const std::vector<bool>&) {
    Tensor gx(in_shape, g.dtype());
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* pg = g.values<T>().data();
      T* pgx = gx.mutable_values<T>().data();
      for (std::size_t i = 0; i < arg.size(); ++i) pgx[arg[i]] += pg[i];
    });
    return std::vector<Tensor>{gx};
  };
  return detail::make_result(is_max ? "max" : "min", std::move(out), {&x}, std::move(backward));
}

}  // namespace

Var max(const Var& x, int dim, bool keepdim) { return extremum_dim(x, dim, keepdim, true); }
Var min(const Var& x, int dim, bool keepdim) { return extremum_dim(x, dim, keepdim, false); }
Var max(const Var& x) { return extremum_dim(reshape(x, Shape{x.numel()}), 0, false, true); }
Var min(const Var& x) { return extremum_dim(reshape(x, Shape{x.numel()}), 0, false, false); }

}  // namespace dcv
