#include <algorithm>
#include <array>

#include "dcv/features.hpp"
#include "dcv/rng.hpp"

namespace dcv {

namespace {

std::int64_t count_inliers(const Mat3& h, std::span<const Vec2> src, std::span<const Vec2> dst, double threshold,
                           std::vector<bool>* mask) {
  std::int64_t n = 0;
  if (mask) mask->assign(src.size(), false);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 q = h * Vec3(src[i].x(), src[i].y(), 1.0);
    if (!(std::abs(q.z()) > 1e-12)) continue;
    if ((q.head<2>() / q.z() - dst[i]).norm() <= threshold) {
      ++n;
      if (mask) (*mask)[i] = true;
    }
  }
  return n;
}

}  // namespace

RansacResult ransac_homography(std::span<const Vec2> src, std::span<const Vec2> dst, double threshold,
                               std::int64_t max_iters, std::uint64_t seed) {
  if (src.size() != dst.size()) throw ShapeError("ransac_homography: src/dst count mismatch");
  if (src.size() < 4) throw EstimationError("ransac_homography: need at least 4 correspondences");
  if (!(threshold > 0)) throw ParameterError("ransac_homography: threshold must be positive");
  const auto n = static_cast<std::uint64_t>(src.size());
  const Rng root(seed);
  RansacResult best;
  for (std::int64_t it = 0; it < max_iters; ++it) {
    Rng rng = root.split(static_cast<std::uint64_t>(it));
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t cand = 0;
      do {
        cand = static_cast<std::size_t>(rng.below(n));
      } while (std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), cand) != idx.begin() + static_cast<std::ptrdiff_t>(k));
      idx[k] = cand;
    }
    std::array<Vec2, 4> s, d;
    for (std::size_t k = 0; k < 4; ++k) {
      s[k] = src[idx[k]];
      d[k] = dst[idx[k]];
    }
    Mat3 h;
    try {
      h = get_perspective_transform(s, d);
    } catch (const EstimationError&) {
      continue;
    }
    const std::int64_t c = count_inliers(h, src, dst, threshold, nullptr);
    if (c > best.num_inliers) {
      best.num_inliers = c;
      best.homography = h;
      best.best_iteration = it;
    }
  }
  if (best.num_inliers < 4) throw NoConsensusError("ransac_homography: no model with at least 4 inliers");
  count_inliers(best.homography, src, dst, threshold, &best.inliers);

  std::vector<Vec2> is, id;
  for (std::size_t i = 0; i < src.size(); ++i)
    if (best.inliers[i]) {
      is.push_back(src[i]);
      id.push_back(dst[i]);
    }
  try {
    const Mat3 refit = find_homography_dlt(is, id);
    std::vector<bool> mask;
    const std::int64_t c = count_inliers(refit, src, dst, threshold, &mask);
    if (c >= best.num_inliers) {
      best.homography = refit;
      best.inliers = std::move(mask);
      best.num_inliers = c;
    }
  } catch (const EstimationError&) {
  }
  return best;
}

}  // namespace dcv
