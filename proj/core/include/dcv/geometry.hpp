#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dcv/ops.hpp"

namespace dcv {

using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Affine23 = Eigen::Matrix<double, 2, 3>;

// ---------------------------------------------------------------------------
// Conversions

double deg2rad(double degrees);
double rad2deg(double radians);

// (..., D) -> (..., D + 1) with a trailing 1.
Var convert_points_to_homogeneous(const Var& points);
// (..., D + 1) -> (..., D); throws DegeneratePointError when |w| <= 1e-12.
Var convert_points_from_homogeneous(const Var& points);

// Pixel (u, v) -> [-1, 1]^2 with pixel centers 0 and W - 1 mapping to -1 and +1.
// Requires height, width >= 2.
Var normalize_pixel_coordinates(const Var& points, std::int64_t height, std::int64_t width);
Var denormalize_pixel_coordinates(const Var& points, std::int64_t height, std::int64_t width);
// 3 x 3 matrix N with normalized = N * pixel (homogeneous).
Mat3 pixel_to_normalized_matrix(std::int64_t height, std::int64_t width);

// ---------------------------------------------------------------------------
// Rotations. Quaternions are (w, x, y, z) with canonical sign w >= 0.

struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

// Normalizes q first; throws ParameterError for the zero quaternion.
Mat3 quaternion_to_rotation_matrix(const Quaternion& q);
Quaternion rotation_matrix_to_quaternion(const Mat3& r);
// Rodrigues' formula; the rotation angle is the vector norm.
Mat3 axis_angle_to_rotation_matrix(const Vec3& axis_angle);
Vec3 rotation_matrix_to_axis_angle(const Mat3& r);
Quaternion axis_angle_to_quaternion(const Vec3& axis_angle);
Vec3 quaternion_to_axis_angle(const Quaternion& q);
Quaternion inverse(const Quaternion& q);

// ---------------------------------------------------------------------------
// Rigid / projective transforms between frames.

// T1 * T2: apply T2 first.
Mat4 compose_transformations(const Mat4& t1, const Mat4& t2);
// Closed form for rigid transforms, LU otherwise; throws EstimationError if singular.
Mat4 inverse_transformation(const Mat4& t);
// Maps frame-a coordinates to frame-b: T_b * T_a^-1.
Mat4 relative_transformation(const Mat4& t_a, const Mat4& t_b);
std::vector<Vec3> transform_points(const Mat4& t, std::span<const Vec3> points);
// Projective 2-D map with homogeneous division.
std::vector<Vec2> transform_points(const Mat3& h, std::span<const Vec2> points);
Vec2 transform_point(const Mat3& h, const Vec2& p);

// Differentiable batched variant: t is (B, D+1, D+1), points (B, P, D).
Var transform_points(const Var& t, const Var& points);

// ---------------------------------------------------------------------------
// Homographies (pixel coordinates, u' ~ H [u v 1]^T, H(2,2) = 1).

// Exact 4-point DLT: 8 x 8 system solved by partially pivoted LU on
// Hartley-normalized coordinates. Throws EstimationError for degenerate input.
Mat3 get_perspective_transform(std::span<const Vec2> src, std::span<const Vec2> dst);
// Least-squares DLT over n >= 4 correspondences via the normal equations.
Mat3 find_homography_dlt(std::span<const Vec2> src, std::span<const Vec2> dst);

// Lifts 2 x 3 to 3 x 3 with a [0 0 1] last row.
Mat3 lift_affine(const Affine23& m);
// Rotation by `angle_degrees` (counter-clockwise on screen) about `center`
// with isotropic `scale`. Throws ParameterError for scale == 0.
Affine23 get_rotation_matrix2d(const Vec2& center, double angle_degrees, double scale);

// Tensor helpers: 3 x 3 (or 2 x 3) matrices as a batch of 1.
Tensor to_tensor(const Mat3& m, DType dtype = DType::f64);
Tensor to_tensor(std::span<const Mat3> ms, DType dtype = DType::f64);
Mat3 to_mat3(const Tensor& t, std::int64_t batch = 0);

// Inverse warping: out(u') = img(H^-1 u'), sampled bilinearly through the
// normalized grid, zero outside. `homography` is (N or 1) x 3 x 3 in pixel
// coordinates. Differentiable in img and homography.
Var warp_perspective(const Var& img, const Var& homography, std::int64_t out_h, std::int64_t out_w);
// `affine` is (N or 1) x 2 x 3, lifted to 3 x 3.
Var warp_affine(const Var& img, const Var& affine, std::int64_t out_h, std::int64_t out_w);

// H expressed over [-1, 1] coordinates of a (height, width) image -> pixel H.
Var normalized_homography_to_pixel(const Var& h_norm, std::int64_t height, std::int64_t width);

// Bilinear resize aligning the corner pixel centers.
Var resize(const Var& img, std::int64_t out_h, std::int64_t out_w);

}  // namespace dcv
