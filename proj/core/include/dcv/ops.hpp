#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dcv/autodiff.hpp"

namespace dcv {

// ---------------------------------------------------------------------------
// Elementwise ops. Binary ops broadcast numpy-style (trailing alignment).
// Mixed f32/f64 inputs promote to f64.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
// Elementwise max/min; ties select (and route the gradient to) `a`.
Var maximum(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
// Four-quadrant arctangent of y/x; gradient is zero at the origin.
Var atan2(const Var& y, const Var& x);
// sqrt(x^2 + y^2) with zero gradient at the origin.
Var hypot(const Var& x, const Var& y);

Var neg(const Var& x);
// abs'(0) = 0.
Var abs(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var sqrt(const Var& x);
Var square(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var pow(const Var& x, double exponent);
// Gradient passes where lo <= x <= hi (ties go to x).
Var clamp(const Var& x, double lo, double hi);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& x);
Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);
Var operator/(double a, const Var& b);

// ---------------------------------------------------------------------------
// Reductions. Summation order is fixed (row-major scan) so results are
// bit-reproducible.

Var sum(const Var& x);
Var sum(const Var& x, const std::vector<int>& dims, bool keepdim = false);
Var mean(const Var& x);
Var mean(const Var& x, const std::vector<int>& dims, bool keepdim = false);
// Full reductions; the gradient goes to the first extremal element in scan order.
Var max(const Var& x);
Var min(const Var& x);
Var max(const Var& x, int dim, bool keepdim = false);
Var min(const Var& x, int dim, bool keepdim = false);

// ---------------------------------------------------------------------------
// Shape manipulation.

Var reshape(const Var& x, Shape shape);
Var narrow(const Var& x, int dim, std::int64_t start, std::int64_t length);
Var concat(const std::vector<Var>& xs, int dim);
Var permute(const Var& x, const std::vector<int>& order);
Var broadcast_to(const Var& x, const Shape& shape);
// Gathers x.flat[indices[i]] into a tensor of `shape`.
Var take(const Var& x, const std::vector<std::int64_t>& indices, Shape shape);

Shape broadcast_shapes(const Shape& a, const Shape& b);

// ---------------------------------------------------------------------------
// Small dense linear algebra.

// Batched matrix product. Operands are (B, m, k) and (B, k, n); either side
// may be 2-D or have batch 1 and is then broadcast.
Var bmm(const Var& a, const Var& b);
// Inverse of a (B, 3, 3) batch; throws EstimationError for |det| <= 1e-12.
Var inverse3x3(const Var& m);

// Sparse constant matrix used as the right operand of sparse_linear.
struct SparseMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  struct Entry {
    std::int64_t row;
    std::int64_t col;
    double value;
  };
  std::vector<Entry> entries;
};

// x: (P, rows) -> (P, cols), out = x * W.
Var sparse_linear(const Var& x, const SparseMatrix& w);

// ---------------------------------------------------------------------------
// Image primitives on NCHW tensors.

enum class Border { zero, replicate, reflect };

// Maps an out-of-range coordinate into [0, n) for `border`; -1 means "zero".
std::int64_t border_index(std::int64_t i, std::int64_t n, Border border);

struct Pad2d {
  std::int64_t top = 0, bottom = 0, left = 0, right = 0;
};

Var pad(const Var& x, Pad2d pads, Border border = Border::zero, double value = 0.0);

// Depthwise "same" correlation. `kernel` is kH x kW (shared by all channels)
// or C x kH x kW; both extents must be odd. Differentiable in input and kernel.
Var conv2d(const Var& input, const Var& kernel, Border border = Border::reflect);

// Bilinear sampling with a normalized grid (N or 1) x H' x W' x 2 holding (x, y)
// in [-1, 1]; -1 and +1 are the centers of the first and last pixel.
// Samples outside the image read zero.
Var grid_sample_bilinear(const Var& input, const Var& grid);

// Same sampler addressed in pixel coordinates (x right, y down).
Var sample_bilinear_pixels(const Var& input, const Var& pixel_grid);

// N x C x H x W -> N x P x C x h x w, patches in row-major scan order.
Var extract_patches(const Var& input, std::int64_t window_h, std::int64_t window_w,
                    std::int64_t stride_h, std::int64_t stride_w);

// Normalized identity grid 1 x H x W x 2.
Tensor identity_grid(std::int64_t height, std::int64_t width, DType dtype = DType::f64);

}  // namespace dcv
