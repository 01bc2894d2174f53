#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dcv/camera.hpp"
#include "dcv/geometry.hpp"
#include "dcv/optim.hpp"

namespace dcv {

struct TracePoint {
  std::int64_t iteration = 0;
  int level = 0;
  double loss = 0.0;
};

// "iteration,level,loss"
void write_trace_csv(const std::filesystem::path& path, std::span<const TracePoint> trace);

struct RunConfig {
  std::uint64_t seed = 0;
  int levels = 1;
  std::int64_t iters = 1;  // per level
  OptimizerConfig optim;
  double alpha = 0.0;
  double lambda = 0.0;
  double beta = 0.0;
  std::filesystem::path out_dir;  // empty: nothing is written
  bool verbose = false;

  // Throws ParameterError for levels < 1, iters < 0 or non-finite weights.
  void validate() const;
};

RunConfig register_defaults();  // 4 levels x 200, Adam 1e-3
RunConfig depth_defaults();     // 5 levels x 200, SGD momentum, alpha 0.85, lambda 0.1
RunConfig attack_defaults();    // 300 iterations, Adam 3e-3, alpha 1, beta 10

// Mean distance between the image corners mapped by a and by b.
double corner_error(const Mat3& a, const Mat3& b, std::int64_t height, std::int64_t width);

// ---- homography registration ----

struct RegisterResult {
  Mat3 homography = Mat3::Identity();       // full-resolution pixels, src -> dst
  std::vector<Mat3> level_homographies;     // snapshot after each level, coarse to fine
  std::vector<Tensor> warped;               // src warped at the end of each level
  std::vector<TracePoint> trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Coarse-to-fine minimisation of the mean L1 error between warp(src, H) and
// dst over the pixels the warp covers. H = I + P over normalized [-1, 1]
// coordinates with 8 free entries, so the same parameters serve every level.
// Throws ShapeError on size mismatch, OptimizationError on a non-finite loss.
RegisterResult register_homography(const Tensor& src, const Tensor& dst, const RunConfig& config);

// ---- multi-view depth ----

struct View {
  Tensor image;  // 1 x C x H x W
  PinholeCamera camera;
};

struct DepthResult {
  Tensor depth;                    // 1 x 1 x H x W, reference view
  std::vector<Tensor> error_maps;  // per level: mean photometric error, 1 x 1 x H x W
  std::vector<TracePoint> trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool degenerate = false;  // every source shares the reference centre
};

// Depth of views[ref] by gradient descent on the multi-view photometric loss.
// Level l optimizes depth at 1 / 2^l resolution, upsampled to full size for
// the loss against images blurred and resampled to the same level.
DepthResult estimate_depth(std::span<const View> views, std::size_t ref, const RunConfig& config);

// Three-view textured plane at depth `z` seen by cameras shifted along x by
// -baseline, 0, +baseline; the middle view is the reference.
std::vector<View> synthetic_plane_views(std::int64_t height, std::int64_t width, double z, double baseline,
                                        std::uint64_t seed);

// ---- adversarial matching ----

struct AttackOptions {
  std::int64_t max_keypoints = 500;
  std::int64_t redetect_every = 10;
  double pair_radius = 2.0;   // px, after reprojection by the target homography
  double inlier_px = 2.0;
  std::int64_t ransac_iters = 50000;
};

struct AttackResult {
  Tensor img_a;
  Tensor img_b;
  std::vector<TracePoint> trace;
  std::vector<std::pair<std::int64_t, std::int64_t>> match_trace;  // (iteration, verified matches)
  std::int64_t matches_before = 0;
  std::int64_t matches_after = 0;
};

// Matches between a and b that survive RANSAC and agree with `h` within
// `inlier_px`.
std::int64_t count_verified_matches(const Tensor& a, const Tensor& b, const Mat3& h, const AttackOptions& options,
                                    std::uint64_t seed);

// mean((a - a0)^2) over the pixels of both images.
Var attack_reg_loss(const Var& a, const Var& b, const Tensor& a0, const Tensor& b0);

// Optimizes the pixels of both grayscale images so that their features match
// under `h_target` (a -> b). Throws EstimationError if either image has no
// keypoints.
AttackResult attack(const Tensor& img_a, const Tensor& img_b, const Mat3& h_target, const RunConfig& config,
                    const AttackOptions& options = {});

// ---- throughput ----

enum class BenchOp { sobel, gaussian, warp };
BenchOp parse_bench_op(std::string_view name);

struct BenchRow {
  std::int64_t batch = 0;
  double median_ms = 0.0;
  double per_sample_ms = 0.0;
};

// Median wall time of `op` on batch x 3 x size x size f32 input after three
// warm-up runs. repeats >= 3.
std::vector<BenchRow> bench(BenchOp op, std::span<const std::int64_t> batches, std::int64_t size, int repeats);
void write_bench_csv(const std::filesystem::path& path, std::span<const BenchRow> rows);

}  // namespace dcv
