#pragma once

// Internal helpers shared by the op implementations.

#include <cstdint>
#include <vector>

#include "dcv/ops.hpp"
#include "dcv/tensor.hpp"

namespace dcv::kernels {

inline DType promote(DType a, DType b) {
  return (a == DType::f64 || b == DType::f64) ? DType::f64 : DType::f32;
}

inline std::vector<std::int64_t> contiguous_strides(const Shape& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (int d = static_cast<int>(shape.size()) - 2; d >= 0; --d) {
    s[static_cast<std::size_t>(d)] = s[static_cast<std::size_t>(d) + 1] * shape[static_cast<std::size_t>(d) + 1];
  }
  return s;
}

// Strides of `in` viewed as `out` (rank-aligned at the back, 0 on broadcast dims).
inline std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  std::vector<std::int64_t> s(r, 0);
  const auto cs = contiguous_strides(in);
  const std::size_t off = r - in.size();
  for (std::size_t d = 0; d < in.size(); ++d) {
    s[off + d] = (in[d] == 1 && out[off + d] != 1) ? 0 : cs[d];
  }
  return s;
}

// Visits every element of `out`, passing (flat out index, offset in a, offset in b).
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, F&& f) {
  const int r = static_cast<int>(out.size());
  if (r == 0) {
    f(std::int64_t{0}, std::int64_t{0}, std::int64_t{0});
    return;
  }
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  const std::int64_t inner = out[static_cast<std::size_t>(r - 1)];
  const std::int64_t sa_in = sa[static_cast<std::size_t>(r - 1)];
  const std::int64_t sb_in = sb[static_cast<std::size_t>(r - 1)];
  const std::int64_t total = numel(out);
  std::int64_t io = 0, ia = 0, ib = 0;
  while (io < total) {
    for (std::int64_t k = 0; k < inner; ++k) f(io + k, ia + k * sa_in, ib + k * sb_in);
    io += inner;
    int d = r - 2;
    for (; d >= 0; --d) {
      const auto ud = static_cast<std::size_t>(d);
      ++idx[ud];
      ia += sa[ud];
      ib += sb[ud];
      if (idx[ud] < out[ud]) break;
      ia -= sa[ud] * out[ud];
      ib -= sb[ud] * out[ud];
      idx[ud] = 0;
    }
    if (d < 0) break;
  }
}

inline int normalize_dim(int dim, int rank) {
  if (dim < 0) dim += rank;
  if (dim < 0 || dim >= rank) throw ShapeError("dimension out of range");
  return dim;
}

inline void require_4d(const Var& x, const char* op) {
  if (x.ndim() != 4) {
    throw ShapeError(std::string(op) + ": expected N x C x H x W input, got " +
                     to_string(x.shape()));
  }
}

}  // namespace dcv::kernels
