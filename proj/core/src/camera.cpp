#include "dcv/camera.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Dense>

#include "dcv/filters.hpp"
#include "kernels.hpp"

namespace dcv {

PinholeCamera PinholeCamera::from_intrinsics(double fx, double fy, double cx, double cy,
                                             std::int64_t height, std::int64_t width,
                                             const Mat4& t) {
  PinholeCamera cam;
  cam.K << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  cam.T = t;
  cam.height = height;
  cam.width = width;
  cam.validate();
  return cam;
}

void PinholeCamera::validate() const {
  if (!(fx() > 0.0) || !(fy() > 0.0)) throw ParameterError("camera: focal lengths must be positive");
  if (height < 1 || width < 1) throw ParameterError("camera: image size must be positive");
  const Mat3 r = T.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(r.determinant() - 1.0) > 1e-9) {
    throw ParameterError("camera: extrinsic rotation is not orthonormal");
  }
}

PinholeCamera read_camera(const std::filesystem::path& path, std::int64_t height,
                          std::int64_t width) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open camera file " + path.string());
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Mat4 t;
  if (!(in >> fx >> fy >> cx >> cy)) throw IoError("camera file: bad intrinsics line in " + path.string());
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (!(in >> t(i, j))) throw IoError("camera file: bad extrinsics in " + path.string());
  return PinholeCamera::from_intrinsics(fx, fy, cx, cy, height, width, t);
}

void write_camera(const std::filesystem::path& path, const PinholeCamera& cam) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write camera file " + path.string());
  out << std::setprecision(17);
  out << cam.fx() << ' ' << cam.fy() << ' ' << cam.cx() << ' ' << cam.cy() << '\n';
  for (int i = 0; i < 4; ++i) {
    out << cam.T(i, 0) << ' ' << cam.T(i, 1) << ' ' << cam.T(i, 2) << ' ' << cam.T(i, 3) << '\n';
  }
}

Vec2 project_point(const PinholeCamera& cam, const Vec3& p) {
  if (!(p.z() > 0.0)) throw BehindCameraError("project_points: point with Z <= 0");
  return {cam.fx() * p.x() / p.z() + cam.cx(), cam.fy() * p.y() / p.z() + cam.cy()};
}

std::vector<Vec2> project_points(const PinholeCamera& cam, std::span<const Vec3> points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(project_point(cam, p));
  return out;
}

std::vector<Vec3> unproject_points(const PinholeCamera& cam, std::span<const Vec2> pixels,
                                   std::span<const double> depths) {
  if (pixels.size() != depths.size()) throw ShapeError("unproject_points: size mismatch");
  std::vector<Vec3> out;
  out.reserve(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double z = depths[i];
    if (!(z > 0.0)) throw BehindCameraError("unproject_points: depth must be positive");
    out.emplace_back((pixels[i].x() - cam.cx()) / cam.fx() * z, (pixels[i].y() - cam.cy()) / cam.fy() * z, z);
  }
  return out;
}

namespace {

void require_depth(const Var& depth, const char* op) {
  kernels::require_4d(depth, op);
  if (depth.size(1) != 1) throw ShapeError(std::string(op) + ": depth must have one channel");
}

// m * [u v 1]^T for every pixel of an (h, w) grid: 3 x (h*w).
Tensor mapped_pixels(const Mat3& m, std::int64_t h, std::int64_t w, DType dtype) {
  Tensor t(Shape{3, h * w}, dtype);
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    T* p = t.mutable_values<T>().data();
    const std::int64_t n = h * w;
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        const Vec3 r = m * Vec3(static_cast<double>(x), static_cast<double>(y), 1.0);
        for (int c = 0; c < 3; ++c) p[c * n + y * w + x] = static_cast<T>(r(c));
      }
  });
  return t;
}

}  // namespace

Var depth_to_3d(const Var& depth, const PinholeCamera& cam) {
  require_depth(depth, "depth_to_3d");
  const std::int64_t n = depth.size(0), h = depth.size(2), w = depth.size(3);
  const Var rays(mapped_pixels(cam.K.inverse(), h, w, depth.dtype()).reshape(Shape{1, 3, h, w}));
  // Z channel of the ray is exactly 1, so points(z) == depth.
  return broadcast_to(rays, Shape{n, 3, h, w}) * depth;
}

Var depth_normals(const Var& depth, const PinholeCamera& cam) {
  const Var points = depth_to_3d(depth, cam);
  const Var grads = spatial_gradient(points, GradientMode::diff, false, Border::replicate);
  const Var tx = narrow(grads, 2, 0, 1), ty = narrow(grads, 2, 1, 1);  // N x 3 x 1 x H x W
  auto comp = [](const Var& v, int c) { return narrow(v, 1, c, 1); };
  // n = ty x tx
  const Var nx = comp(ty, 1) * comp(tx, 2) - comp(ty, 2) * comp(tx, 1);
  const Var ny = comp(ty, 2) * comp(tx, 0) - comp(ty, 0) * comp(tx, 2);
  const Var nz = comp(ty, 0) * comp(tx, 1) - comp(ty, 1) * comp(tx, 0);
  Var normal = concat({nx, ny, nz}, 1);
  const Var len = sqrt(sum(square(normal), {1}, true) + 1e-300);
  normal = reshape(normal / len, points.shape());

  // Zero out pixels whose 3 x 3 neighbourhood has an invalid depth.
  const std::int64_t nb = depth.size(0), h = depth.size(2), w = depth.size(3);
  Tensor mask(Shape{nb, 1, h, w}, depth.dtype());
  const Tensor& d = depth.value();
  for (std::int64_t b = 0; b < nb; ++b)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        bool ok = true;
        for (std::int64_t dy = -1; dy <= 1 && ok; ++dy)
          for (std::int64_t dx = -1; dx <= 1 && ok; ++dx) {
            const std::int64_t yy = std::clamp<std::int64_t>(y + dy, 0, h - 1);
            const std::int64_t xx = std::clamp<std::int64_t>(x + dx, 0, w - 1);
            ok = d.at((b * h + yy) * w + xx) > 0.0;
          }
        mask.set((b * h + y) * w + x, ok ? 1.0 : 0.0);
      }
  return normal * Var(mask);
}

Var depth_warp(const Var& src_img, const Var& depth_ref, const PinholeCamera& cam_src,
               const PinholeCamera& cam_ref) {
  kernels::require_4d(src_img, "depth_warp");
  require_depth(depth_ref, "depth_warp");
  if (depth_ref.size(0) != src_img.size(0)) throw ShapeError("depth_warp: batch mismatch");
  const std::int64_t n = depth_ref.size(0), h = depth_ref.size(2), w = depth_ref.size(3);
  const DType dt = kernels::promote(src_img.dtype(), depth_ref.dtype());

  const Mat4 rel = cam_src.T * inverse_transformation(cam_ref.T);
  const Mat3 r = rel.topLeftCorner<3, 3>();
  const Vec3 t = rel.topRightCorner<3, 1>();
  // K_src (R d K_ref^-1 u + t) = d * (K_src R K_ref^-1 u) + K_src t
  const Var a(mapped_pixels(cam_src.K * r * cam_ref.K.inverse(), h, w, dt).reshape(Shape{1, 3, h * w}));
  const Vec3 kt = cam_src.K * t;
  const Var b(Tensor::from_values(Shape{1, 3, 1}, {kt.x(), kt.y(), kt.z()}, dt));
  const Var proj = a * reshape(depth_ref, Shape{n, 1, h * w}) + b;  // N x 3 x HW
  // Points at or behind the source camera are pushed far outside the image.
  const Var z = maximum(narrow(proj, 1, 2, 1), Var(Tensor::scalar(1e-6, dt)));
  const Var uv = narrow(proj, 1, 0, 2) / z;
  const Var grid = reshape(permute(uv, {0, 2, 1}), Shape{n, h, w, 2});
  return sample_bilinear_pixels(src_img, grid);
}

}  // namespace dcv
