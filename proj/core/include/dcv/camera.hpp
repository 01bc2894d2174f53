#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dcv/geometry.hpp"

namespace dcv {

// Zero-skew pinhole camera. T maps world coordinates to camera coordinates.
struct PinholeCamera {
  Mat3 K = Mat3::Identity();
  Mat4 T = Mat4::Identity();
  std::int64_t height = 1;
  std::int64_t width = 1;

  double fx() const { return K(0, 0); }
  double fy() const { return K(1, 1); }
  double cx() const { return K(0, 2); }
  double cy() const { return K(1, 2); }

  static PinholeCamera from_intrinsics(double fx, double fy, double cx, double cy,
                                       std::int64_t height, std::int64_t width,
                                       const Mat4& t = Mat4::Identity());
  // Throws ParameterError unless fx, fy > 0 and T's rotation is proper.
  void validate() const;
};

// Text format: "fx fy cx cy" then four rows of T.
PinholeCamera read_camera(const std::filesystem::path& path, std::int64_t height,
                          std::int64_t width);
void write_camera(const std::filesystem::path& path, const PinholeCamera& cam);

// Camera-frame points to pixels; throws BehindCameraError for Z <= 0.
std::vector<Vec2> project_points(const PinholeCamera& cam, std::span<const Vec3> points);
Vec2 project_point(const PinholeCamera& cam, const Vec3& point);
// Pixels plus depth (> 0) to camera-frame points.
std::vector<Vec3> unproject_points(const PinholeCamera& cam, std::span<const Vec2> pixels,
                                   std::span<const double> depths);

// N x 1 x H x W depth -> N x 3 x H x W camera-frame points. Zero depth gives
// a zero point.
Var depth_to_3d(const Var& depth, const PinholeCamera& cam);
// Unit normals from central-difference tangents, oriented toward the camera.
// Pixels whose stencil touches zero depth get a zero normal.
Var depth_normals(const Var& depth, const PinholeCamera& cam);

// Warps `src_img` into the reference view using the reference depth:
// unproject with K_ref, move by T_src * T_ref^-1, project with K_src and
// sample bilinearly (zero outside). Differentiable in src_img and depth_ref.
Var depth_warp(const Var& src_img, const Var& depth_ref, const PinholeCamera& cam_src,
               const PinholeCamera& cam_ref);

}  // namespace dcv
