#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dcv/geometry.hpp"
#include "dcv/ops.hpp"

namespace dcv {

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double scale = 1.0;
  double orientation = 0.0;
  double response = 0.0;
  int level = 0;
};

struct MatchPair {
  std::int64_t ia = 0;
  std::int64_t ib = 0;
  double distance = 0.0;
};

enum class ResponseMode { harris, shi_tomasi, hessian };

struct ResponseParams {
  // Gaussian pre-smoothing before differentiation (0 disables it).
  double sigma_derivative = 1.0;
  // Integration window of the structure tensor.
  double sigma_window = 1.0;
  double k = 0.04;
};

// Odd Gaussian support 2 ceil(3 sigma) + 1.
std::int64_t gaussian_size(double sigma);

// N x 1 x H x W response map. harris: det M - k tr^2 M; shi_tomasi: the
// smaller eigenvalue of M; hessian: Ixx Iyy - Ixy^2 of the pre-smoothed image.
Var corner_response(const Var& gray, ResponseMode mode, const ResponseParams& params = {});

// Hard non-maxima suppression on a 1 x 1 x H x W map. A pixel is kept when
// it exceeds `threshold`, is >= every value in its window, has no equal
// neighbour earlier in scan order and is not on a plateau (some window value
// is strictly smaller). Positions are refined by a per-axis parabola fit,
// clamped to +-0.5.
std::vector<Keypoint> nms2d(const Tensor& response, std::int64_t window, double threshold);

// Differentiable version of the subpixel refinement used by nms2d: (x, y) of
// each keypoint as a P x 2 Var whose gradient flows into `response`
// (1 x 1 x H x W). Keypoint coordinates are rounded to find the integer peak.
// Undefined when there are no keypoints.
Var refine_keypoints(const Var& response, std::span<const Keypoint> keypoints);

struct Orientation {
  double theta = 0.0;
  bool degenerate = false;
};

// Peak of a 36-bin magnitude- and Gaussian-weighted gradient orientation
// histogram of a square H x W patch (any leading singleton dims), refined
// by a parabola through the peak bin and its neighbours. Radians in [0, 2pi).
Orientation dominant_orientation(const Tensor& patch);

// P x 1 x 32 x 32 patches -> P x 128 SIFT descriptors. Each patch is first
// resampled about its centre by the matching angle in `thetas` (empty means
// no rotation) so that direction theta becomes the patch x axis.
Var sift_describe(const Var& patches, std::span<const double> thetas = {});
constexpr std::int64_t kPatchSize = 32;

// Mutual nearest neighbours by L2 distance; with `ratio`, side A also needs
// d1 / d2 <= ratio.
std::vector<MatchPair> match_mnn(const Tensor& desc_a, const Tensor& desc_b,
                                 std::optional<double> ratio = std::nullopt);

struct RansacResult {
  Mat3 homography = Mat3::Identity();
  std::vector<bool> inliers;
  std::int64_t num_inliers = 0;
  std::int64_t best_iteration = -1;
};

// 4-point DLT hypotheses, best inlier count (ties keep the earliest
// iteration), then a least-squares refit on the inliers. Deterministic for a
// given seed. Throws EstimationError for < 4 pairs and NoConsensusError when
// no hypothesis has 4 inliers.
RansacResult ransac_homography(std::span<const Vec2> src, std::span<const Vec2> dst,
                               double threshold, std::int64_t max_iters, std::uint64_t seed);

struct DetectorParams {
  int levels = 3;
  double base_sigma = 1.6;
  double threshold = 1e-5;
  std::int64_t nms_window = 3;
  // Patch side in units of the keypoint scale.
  double patch_span = 12.0;
  // Keypoints closer than this to the border are dropped.
  std::int64_t border = 4;
};

struct Features {
  std::vector<Keypoint> keypoints;
  // P x 128, on the tape of the input image when it has one. Both Vars are
  // undefined when no keypoints were found.
  Var descriptors;
  // P x 2 subpixel (x, y), differentiable through the response maps.
  Var coords;
};

// Hessian scale space at full resolution (sigma = base * 2^level), scale-
// normalized by sigma^4, 3 x 3 x 3 non-maxima suppression, top `max_keypoints`
// by response, oriented patches sampled from the level image, SIFT.
Features detect_and_describe(const Var& gray, std::int64_t max_keypoints,
                             const DetectorParams& params = {});

// Re-describes fixed keypoints on a (possibly modified) image, keeping the
// stored orientations. Used between re-detections.
Features describe_at(const Var& gray, std::span<const Keypoint> keypoints,
                     const DetectorParams& params = {});

// CSV dumps: "x,y,scale,orientation,response" and "ia,ib,dist".
void write_keypoints_csv(const std::filesystem::path& path, std::span<const Keypoint> keypoints);
void write_matches_csv(const std::filesystem::path& path, std::span<const MatchPair> matches);

}  // namespace dcv
