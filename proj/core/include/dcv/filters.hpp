#pragma once

#include <cstdint>
#include <string_view>

#include "dcv/ops.hpp"

namespace dcv {

// kH x kW filter weights; `normalized` kernels sum to 1.
struct Kernel2d {
  Tensor weights;
  bool normalized = false;
};

// 1 x size Gaussian exp(-x^2 / 2 sigma^2) sampled at integer offsets and
// normalized to sum 1. Size must be odd and sigma > 0.
Kernel2d gaussian_kernel1d(std::int64_t size, double sigma, DType dtype = DType::f64);
// Outer product g(y)^T g(x).
Kernel2d gaussian_kernel2d(std::int64_t kh, std::int64_t kw, double sigma_y, double sigma_x,
                           DType dtype = DType::f64);

// Separable Gaussian blur (row pass then column pass).
Var gaussian_blur2d(const Var& img, std::int64_t kh, std::int64_t kw, double sigma_y,
                    double sigma_x, Border border = Border::reflect);
Var box_blur(const Var& img, std::int64_t kh, std::int64_t kw, Border border = Border::reflect);
// Per-pixel window median; gradient flows only to the selected element.
Var median_blur(const Var& img, std::int64_t kh, std::int64_t kw);

enum class GradientMode { sobel, diff };
GradientMode parse_gradient_mode(std::string_view name);

// First derivatives, N x C x 2 x H x W with (dx, dy) along dim 2.
// Sobel taps are [-1 0 1; -2 0 2; -1 0 1] (divided by 8 when `normalized`);
// diff mode uses central differences [-0.5 0 0.5].
Var spatial_gradient(const Var& img, GradientMode mode = GradientMode::sobel,
                     bool normalized = true, Border border = Border::reflect);
Var spatial_gradient(const Var& img, std::string_view mode, bool normalized = true);

// Second derivatives (dxx, dxy, dyy) along dim 2 from 3 x 3 central
// difference stencils: N x C x 3 x H x W.
Var spatial_gradient2(const Var& img, Border border = Border::reflect);

// sqrt(dx^2 + dy^2 + 1e-12) of the normalized Sobel gradient.
Var sobel_edges(const Var& img);

// 3 x 3 Laplacian [0 1 0; 1 -4 1; 0 1 0], reflect border.
Var laplacian(const Var& img, std::int64_t size = 3);

// Gaussian blur followed by 2x bilinear downsampling.
Var pyr_down(const Var& img);

}  // namespace dcv
