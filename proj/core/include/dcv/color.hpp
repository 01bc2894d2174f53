#pragma once

#include <vector>

#include "dcv/ops.hpp"

namespace dcv {

// All color ops take N x C x H x W Vars (RGB channel order unless noted) and
// are differentiable through the tape.

// BT.601 luma: 0.299 R + 0.587 G + 0.114 B -> N x 1 x H x W.
Var rgb_to_grayscale(const Var& img);
// Repeats a single channel three times.
Var grayscale_to_rgb(const Var& gray);

// Hue in radians [0, 2pi), saturation and value in [0, 1] for inputs in
// [0, 1]. Values outside [0, 1] are processed as-is.
Var rgb_to_hsv(const Var& img);
Var hsv_to_rgb(const Var& hsv);

Var rgb_to_bgr(const Var& img);
Var bgr_to_rgb(const Var& img);
Var rgb_to_rgba(const Var& img, double alpha);
Var rgba_to_rgb(const Var& img);

// Linear sRGB <-> CIE XYZ under D65.
Var rgb_to_xyz(const Var& img);
Var xyz_to_rgb(const Var& img);

// Full-range BT.601 YCbCr with chroma centered at 0.5.
Var rgb_to_ycbcr(const Var& img);
Var ycbcr_to_rgb(const Var& img);

// Per-channel (x - mean) / std; std must be > 0.
Var normalize(const Var& img, const std::vector<double>& mean, const std::vector<double>& std);
Var denormalize(const Var& img, const std::vector<double>& mean, const std::vector<double>& std);

// Photometric adjustments, clamped to [0, 1]. Identity parameters
// (b = 0, c = 1, gamma = 1, s = 1, h = 0) return the input unchanged.
Var adjust_brightness(const Var& img, double brightness);
Var adjust_contrast(const Var& img, double contrast);
Var adjust_gamma(const Var& img, double gamma);
Var adjust_saturation(const Var& img, double saturation);
// Hue shift in radians.
Var adjust_hue(const Var& img, double hue_shift);

// out_k = sum_c m[k][c] * img_c + bias_k; `m` is K x C row-major.
Var channel_mix(const Var& img, const std::vector<double>& m, std::int64_t out_channels,
                const std::vector<double>& bias = {});

}  // namespace dcv
