#pragma once

#include <filesystem>

#include "dcv/tensor.hpp"

namespace dcv {

// Binary PNM I/O. 8-bit images map to [0, 1] as v / 255; 16-bit grayscale
// (maxval 65535) maps as v / 65535.
//
// read_image returns 1 x C x H x W with C = 1 (P5) or 3 (P6).
Tensor read_image(const std::filesystem::path& path, DType dtype = DType::f64);

// Writes a 1 x {1,3} x H x W tensor as P5/P6, clamping to [0, 1].
void write_image(const std::filesystem::path& path, const Tensor& image);

// 16-bit P5, value stored as round(v * scale) clamped to [0, 65535].
void write_pgm16(const std::filesystem::path& path, const Tensor& image, double scale);
// Inverse of write_pgm16: stored / scale.
Tensor read_pgm16(const std::filesystem::path& path, double scale, DType dtype = DType::f64);

}  // namespace dcv
