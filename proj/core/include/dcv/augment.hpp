#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dcv/autodiff.hpp"
#include "dcv/rng.hpp"

namespace dcv {

// Closed interval of a uniformly drawn parameter.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

using AugParams = std::map<std::string, double>;

struct AugResult {
  Var output;                      // N x C x H' x W'
  Tensor transform;                // N x 3 x 3, input pixels -> output pixels
  std::vector<AugParams> params;   // one entry per sample
};

// Sample i draws only from rng.split(i), so results do not depend on batch
// order or size. Parameter draws are constants for autodiff.
AugResult random_hflip(const Var& batch, double p, const Rng& rng);
AugResult random_vflip(const Var& batch, double p, const Rng& rng);

// Rotation (degrees, counter-clockwise) and isotropic scale about the image
// centre followed by a translation given as a fraction of width / height.
AugResult random_affine(const Var& batch, Range degrees, Range translate, Range scale, const Rng& rng);

// brightness: additive shift; contrast, saturation: factors; hue: radians.
// Applied in that order. Saturation and hue need 3 channels unless their
// range is the identity.
AugResult color_jitter(const Var& batch, Range brightness, Range contrast, Range saturation, Range hue,
                       const Rng& rng);

// With probability p fills a random box (area fraction `scale`, aspect
// `ratio`) with `value`.
AugResult random_erasing(const Var& batch, double p, Range scale, Range ratio, double value, const Rng& rng);

// Random box (area fraction `scale`, aspect w / h `ratio`) resampled to
// out_h x out_w.
AugResult random_resized_crop(const Var& batch, std::int64_t out_h, std::int64_t out_w, Range scale, Range ratio,
                              const Rng& rng);

using AugOp = std::function<AugResult(const Var&, const Rng&)>;

namespace aug {
AugOp hflip(double p);
AugOp vflip(double p);
AugOp affine(Range degrees, Range translate, Range scale);
AugOp jitter(Range brightness, Range contrast, Range saturation, Range hue);
AugOp erasing(double p, Range scale, Range ratio, double value = 0.0);
AugOp resized_crop(std::int64_t out_h, std::int64_t out_w, Range scale, Range ratio);
}  // namespace aug

// Runs ops in order; op k draws from `rng` for k = 0 and rng.split(k)
// otherwise. transform = T_last ... T_first. Parameter keys of a chain
// longer than one are prefixed "k:".
AugOp compose(std::vector<AugOp> ops);

}  // namespace dcv
