#include <algorithm>
#include <cmath>

#include "dcv/ops.hpp"
#include "kernels.hpp"

namespace dcv {

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshape(std::move(shape));
  const Shape in_shape = x.shape();
  BackwardFn backward = [in_shape](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{g.reshape(in_shape)};
  };
  return detail::make_result("reshape", std::move(out), {&x}, std::move(backward));
}

namespace {

// Copies a block of `len` slices along `dim` between tensors that agree on all
// other extents. `forward` copies src[.., src_off + k, ..] -> dst[.., dst_off + k, ..].
template <typename T>
void copy_along(const T* src, const Shape& src_shape, std::int64_t src_off, T* dst,
                const Shape& dst_shape, std::int64_t dst_off, int dim, std::int64_t len,
                bool accumulate) {
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < dim; ++d) outer *= src_shape[static_cast<std::size_t>(d)];
  for (std::size_t d = static_cast<std::size_t>(dim) + 1; d < src_shape.size(); ++d) inner *= src_shape[d];
  const std::int64_t ns = src_shape[static_cast<std::size_t>(dim)];
  const std::int64_t nd = dst_shape[static_cast<std::size_t>(dim)];
  for (std::int64_t o = 0; o < outer; ++o) {
    const T* s = src + (o * ns + src_off) * inner;
    T* d = dst + (o * nd + dst_off) * inner;
    if (accumulate) {
      for (std::int64_t i = 0; i < len * inner; ++i) d[i] += s[i];
    } else {
      std::copy(s, s + len * inner, d);
    }
  }
}

}  // namespace

Var narrow(const Var& x, int dim, std::int64_t start, std::int64_t length) {
  dim = kernels::normalize_dim(dim, x.ndim());
  const Shape in_shape = x.shape();
  if (start < 0 || length < 1 || start + length > in_shape[static_cast<std::size_t>(dim)]) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") out of bounds for " + to_string(in_shape));
  }
  Shape out_shape = in_shape;
  out_shape[static_cast<std::size_t>(dim)] = length;
  Tensor out(out_shape, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    copy_along(x.value().values<T>().data(), in_shape, start, out.mutable_values<T>().data(),
               out_shape, 0, dim, length, false);
  });
  BackwardFn backward = [in_shape, out_shape, dim, start, length](const Tensor& g,
                                                                  const std::vector<bool>&) {
    Tensor gx(in_shape, g.dtype());
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      copy_along(g.values<T>().data(), out_shape, 0, gx.mutable_values<T>().data(), in_shape,
                 start, dim, length, false);
    });
    return std::vector<Tensor>{gx};
  };
  return detail::make_result("narrow", std::move(out), {&x}, std::move(backward));
}

Var concat(const std::vector<Var>& xs, int dim) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  dim = kernels::normalize_dim(dim, xs[0].ndim());
  DType dt = xs[0].dtype();
  Shape out_shape = xs[0].shape();
  std::int64_t total = 0;
  for (const auto& x : xs) {
    if (x.ndim() != xs[0].ndim()) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < x.ndim(); ++d) {
      if (d != dim && x.size(d) != out_shape[static_cast<std::size_t>(d)]) {
        throw ShapeError("concat: extent mismatch " + to_string(x.shape()) + " vs " +
                         to_string(out_shape));
      }
    }
    total += x.size(dim);
    dt = kernels::promote(dt, x.dtype());
  }
  out_shape[static_cast<std::size_t>(dim)] = total;
  Tensor out(out_shape, dt);
  std::vector<Shape> shapes;
  std::vector<DType> dtypes;
  std::int64_t off = 0;
  dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    for (const auto& x : xs) {
      const Tensor xv = x.value().to(dt);
      copy_along(xv.values<T>().data(), x.shape(), 0, out.mutable_values<T>().data(), out_shape,
                 off, dim, x.size(dim), false);
      off += x.size(dim);
      shapes.push_back(x.shape());
      dtypes.push_back(x.dtype());
    }
  });
  BackwardFn backward = [shapes, dtypes, out_shape, dim](const Tensor& g,
                                                         const std::vector<bool>& needs) {
    std::vector<Tensor> grads(shapes.size());
    std::int64_t o = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const std::int64_t len = shapes[i][static_cast<std::size_t>(dim)];
      if (needs[i]) {
        Tensor gi(shapes[i], g.dtype());
        dispatch(g.dtype(), [&](auto tag) {
          using T = decltype(tag);
          copy_along(g.values<T>().data(), out_shape, o, gi.mutable_values<T>().data(), shapes[i],
                     0, dim, len, false);
        });
        grads[i] = gi.to(dtypes[i]);
      }
      o += len;
    }
    return grads;
  };
  std::vector<const Var*> inputs;
  for (const auto& x : xs) inputs.push_back(&x);
  return detail::make_result("concat", std::move(out), inputs, std::move(backward));
}

Var permute(const Var& x, const std::vector<int>& order) {
  const int r = x.ndim();
  if (static_cast<int>(order.size()) != r) throw ShapeError("permute: order rank mismatch");
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  Shape out_shape(static_cast<std::size_t>(r));
  for (int d = 0; d < r; ++d) {
    const int src = kernels::normalize_dim(order[static_cast<std::size_t>(d)], r);
    if (seen[static_cast<std::size_t>(src)]) throw ShapeError("permute: repeated dimension");
    seen[static_cast<std::size_t>(src)] = true;
    out_shape[static_cast<std::size_t>(d)] = x.size(src);
  }
  const auto s_in = kernels::contiguous_strides(x.shape());
  std::vector<std::int64_t> s_perm(static_cast<std::size_t>(r));
  for (int d = 0; d < r; ++d) {
    s_perm[static_cast<std::size_t>(d)] =
        s_in[static_cast<std::size_t>(kernels::normalize_dim(order[static_cast<std::size_t>(d)], r))];
  }
  const auto s_out = kernels::contiguous_strides(out_shape);
  const Shape in_shape = x.shape();
  Tensor out(out_shape, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = x.value().values<T>().data();
    T* po = out.mutable_values<T>().data();
    kernels::for_each_broadcast(out_shape, s_out, s_perm,
                                [&](std::int64_t io, std::int64_t, std::int64_t ix) { po[io] = px[ix]; });
  });
  BackwardFn backward = [in_shape, out_shape, s_out, s_perm](const Tensor& g,
                                                             const std::vector<bool>&) {
    Tensor gx(in_shape, g.dtype());
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* pg = g.values<T>().data();
      T* pgx = gx.mutable_values<T>().data();
      kernels::for_each_broadcast(out_shape, s_out, s_perm,
                                  [&](std::int64_t io, std::int64_t, std::int64_t ix) { pgx[ix] += pg[io]; });
    });
    return std::vector<Tensor>{gx};
  };
  return detail::make_result("permute", std::move(out), {&x}, std::move(backward));
}

Var broadcast_to(const Var& x, const Shape& shape) {
  if (broadcast_shapes(x.shape(), shape) != shape) {
    throw ShapeError("broadcast_to: cannot broadcast " + to_string(x.shape()) + " to " +
                     to_string(shape));
  }
  Tensor zeros(shape, x.dtype());
  return add(x, Var(zeros));
}

Var take(const Var& x, const std::vector<std::int64_t>& indices, Shape shape) {
  if (numel(shape) != static_cast<std::int64_t>(indices.size())) {
    throw ShapeError("take: index count does not match output shape");
  }
  const std::int64_t n = x.numel();
  for (auto i : indices) {
    if (i < 0 || i >= n) throw ShapeError("take: index out of range");
  }
  const Shape in_shape = x.shape();
  Tensor out(std::move(shape), x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = x.value().values<T>().data();
    T* po = out.mutable_values<T>().data();
    for (std::size_t i = 0; i < indices.size(); ++i) po[i] = px[indices[i]];
  });
  BackwardFn backward = [in_shape, indices](const Tensor& g, const std::vector<bool>&) {
    Tensor gx(in_shape, g.dtype());
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* pg = g.values<T>().data();
      T* pgx = gx.mutable_values<T>().data();
      for (std::size_t i = 0; i < indices.size(); ++i) pgx[indices[i]] += pg[i];
    });
    return std::vector<Tensor>{gx};
  };
  return detail::make_result("take", std::move(out), {&x}, std::move(backward));
}

// ---------------------------------------------------------------------------

namespace {

struct MatDims {
  std::int64_t batch, rows, cols;
};

MatDims mat_dims(const Var& v, const char* op) {
  if (v.ndim() == 2) return {1, v.size(0), v.size(1)};
  if (v.ndim() == 3) return {v.size(0), v.size(1), v.size(2)};
  throw ShapeError(std::string(op) + ": expected a 2-D or 3-D operand, got " + to_string(v.shape()));
}

// c[b] (+)= op(a[b]) * op(b[b]) with optional transposes, row-major.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n, bool ta,
          bool tb) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::int64_t p = 0; p < k; ++p) {
        const T av = ta ? a[p * m + i] : a[i * k + p];
        const T bv = tb ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] += acc;
    }
  }
}

}  // namespace

Var bmm(const Var& a, const Var& b) {
  const MatDims da = mat_dims(a, "bmm"), db = mat_dims(b, "bmm");
  if (da.cols != db.rows) {
    throw ShapeError("bmm: inner extents differ: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  if (da.batch != db.batch && da.batch != 1 && db.batch != 1) {
    throw ShapeError("bmm: batch extents differ");
  }
  const std::int64_t batch = std::max(da.batch, db.batch);
  const bool out3 = a.ndim() == 3 || b.ndim() == 3;
  const DType dt = kernels::promote(a.dtype(), b.dtype());
  const Tensor av = a.value().to(dt), bv = b.value().to(dt);
  const std::int64_t m = da.rows, k = da.cols, n = db.cols;
  Shape out_shape = out3 ? Shape{batch, m, n} : Shape{m, n};
  Tensor out(out_shape, dt);
  dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    const T* pa = av.values<T>().data();
    const T* pb = bv.values<T>().data();
    T* pc = out.mutable_values<T>().data();
    for (std::int64_t i = 0; i < batch; ++i) {
      gemm(pa + (da.batch == 1 ? 0 : i) * m * k, pb + (db.batch == 1 ? 0 : i) * k * n,
           pc + i * m * n, m, k, n, false, false);
    }
  });
  const DType a_dt = a.dtype(), b_dt = b.dtype();
  const Shape a_shape = a.shape(), b_shape = b.shape();
  BackwardFn backward = [av, bv, da, db, batch, m, k, n, a_dt, b_dt, a_shape, b_shape](
                            const Tensor& g, const std::vector<bool>& needs) {
    std::vector<Tensor> grads(2);
    const DType dt = av.dtype();
    const Tensor gv = g.to(dt);
    Tensor ga, gb;
    if (needs[0]) ga = Tensor(a_shape, dt);
    if (needs[1]) gb = Tensor(b_shape, dt);
    dispatch(dt, [&](auto tag) {
      using T = decltype(tag);
      const T* pa = av.values<T>().data();
      const T* pb = bv.values<T>().data();
      const T* pg = gv.values<T>().data();
      for (std::int64_t i = 0; i < batch; ++i) {
        const T* ai = pa + (da.batch == 1 ? 0 : i) * m * k;
        const T* bi = pb + (db.batch == 1 ? 0 : i) * k * n;
        const T* gi = pg + i * m * n;
        // dA = G * B^T, dB = A^T * G
        if (needs[0]) gemm(gi, bi, ga.mutable_values<T>().data() + (da.batch == 1 ? 0 : i) * m * k, m, n, k, false, true);
        if (needs[1]) gemm(ai, gi, gb.mutable_values<T>().data() + (db.batch == 1 ? 0 : i) * k * n, k, m, n, true, false);
      }
    });
    if (needs[0]) grads[0] = ga.to(a_dt);
    if (needs[1]) grads[1] = gb.to(b_dt);
    return grads;
  };
  return detail::make_result("bmm", std::move(out), {&a, &b}, std::move(backward));
}

Var inverse3x3(const Var& mat) {
  if (mat.ndim() != 3 || mat.size(1) != 3 || mat.size(2) != 3) {
    throw ShapeError("inverse3x3: expected B x 3 x 3, got " + to_string(mat.shape()));
  }
  const std::int64_t batch = mat.size(0);
  const Tensor mv = mat.value().to(DType::f64);
  Tensor inv(mat.shape(), DType::f64);
  {
    const double* m = mv.values<double>().data();
    double* r = inv.mutable_values<double>().data();
    for (std::int64_t b = 0; b < batch; ++b) {
      const double* a = m + 9 * b;
      double* o = r + 9 * b;
      const double c00 = a[4] * a[8] - a[5] * a[7];
      const double c01 = a[5] * a[6] - a[3] * a[8];
      const double c02 = a[3] * a[7] - a[4] * a[6];
      const double det = a[0] * c00 + a[1] * c01 + a[2] * c02;
      if (!(std::abs(det) > 1e-12)) throw EstimationError("inverse3x3: singular matrix");
      const double s = 1.0 / det;
      o[0] = c00 * s;
      o[1] = (a[2] * a[7] - a[1] * a[8]) * s;
      o[2] = (a[1] * a[5] - a[2] * a[4]) * s;
      o[3] = c01 * s;
      o[4] = (a[0] * a[8] - a[2] * a[6]) * s;
      o[5] = (a[2] * a[3] - a[0] * a[5]) * s;
      o[6] = c02 * s;
      o[7] = (a[1] * a[6] - a[0] * a[7]) * s;
      o[8] = (a[0] * a[4] - a[1] * a[3]) * s;
    }
  }
  const DType dt = mat.dtype();
  Tensor out = inv.to(dt);
  BackwardFn backward = [inv, batch, dt](const Tensor& g, const std::vector<bool>&) {
    // dA = -A^-T G A^-T
    const Tensor gv = g.to(DType::f64);
    Tensor ga(inv.shape(), DType::f64);
    const double* pi = inv.values<double>().data();
    const double* pg = gv.values<double>().data();
    double* po = ga.mutable_values<double>().data();
    for (std::int64_t b = 0; b < batch; ++b) {
      const double* x = pi + 9 * b;
      const double* gg = pg + 9 * b;
      double tmp[9] = {};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          for (int p = 0; p < 3; ++p) tmp[i * 3 + j] += x[p * 3 + i] * gg[p * 3 + j];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double acc = 0;
          for (int p = 0; p < 3; ++p) acc += tmp[i * 3 + p] * x[j * 3 + p];
          po[9 * b + i * 3 + j] = -acc;
        }
    }
    return std::vector<Tensor>{ga.to(dt)};
  };
  return detail::make_result("inverse3x3", std::move(out), {&mat}, std::move(backward));
}

Var sparse_linear(const Var& x, const SparseMatrix& w) {
  if (x.ndim() != 2 || x.size(1) != w.rows) {
    throw ShapeError("sparse_linear: expected P x " + std::to_string(w.rows) + " input, got " +
                     to_string(x.shape()));
  }
  const std::int64_t p = x.size(0);
  const Tensor xv = x.value();
  Tensor out(Shape{p, w.cols}, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = xv.values<T>().data();
    T* po = out.mutable_values<T>().data();
    for (std::int64_t r = 0; r < p; ++r) {
      for (const auto& e : w.entries) {
        po[r * w.cols + e.col] += static_cast<T>(px[r * w.rows + e.row] * e.value);
      }
    }
  });
  const Shape in_shape = x.shape();
  BackwardFn backward = [w, in_shape, p](const Tensor& g, const std::vector<bool>&) {
    Tensor gx(in_shape, g.dtype());
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* pg = g.values<T>().data();
      T* pgx = gx.mutable_values<T>().data();
      for (std::int64_t r = 0; r < p; ++r) {
        for (const auto& e : w.entries) {
          pgx[r * w.rows + e.row] += static_cast<T>(pg[r * w.cols + e.col] * e.value);
        }
      }
    });
    return std::vector<Tensor>{gx};
  };
  return detail::make_result("sparse_linear", std::move(out), {&x}, std::move(backward));
}

}  // namespace dcv
