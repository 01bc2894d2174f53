#pragma once

#include <cstdint>

#include "dcv/tensor.hpp"

namespace dcv {

// Smooth random texture sampled at (x + ox, y + oy): Gaussian blobs of random
// size, sign and colour squashed into (0, 1). The underlying function is
// defined on the whole plane, so offsets render exact translated copies.
// 1 x channels x h x w.
Tensor textured_image(std::int64_t h, std::int64_t w, std::int64_t channels, std::uint64_t seed,
                      double ox = 0.0, double oy = 0.0, DType dtype = DType::f64);

// Same idea with blob sizes spread over five octaves (sigma 2 .. 64), so the
// image keeps structure after heavy downsampling.
Tensor natural_image(std::int64_t h, std::int64_t w, std::int64_t channels, std::uint64_t seed,
                     double ox = 0.0, double oy = 0.0, DType dtype = DType::f64);

}  // namespace dcv
