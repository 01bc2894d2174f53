#include "dcv/geometry.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "kernels.hpp"

namespace dcv {

double deg2rad(double degrees) { return degrees * std::numbers::pi / 180.0; }
double rad2deg(double radians) { return radians * 180.0 / std::numbers::pi; }

Var convert_points_to_homogeneous(const Var& points) {
  Shape s = points.shape();
  s.back() = 1;
  return concat({points, Var(Tensor::full(s, 1.0, points.dtype()))}, -1);
}

Var convert_points_from_homogeneous(const Var& points) {
  const std::int64_t d = points.size(-1);
  if (d < 2) throw ShapeError("convert_points_from_homogeneous: need at least 2 coordinates");
  const Var w = narrow(points, -1, d - 1, 1);
  for (std::int64_t i = 0; i < w.numel(); ++i) {
    if (!(std::abs(w.value().at(i)) > 1e-12)) {
      throw DegeneratePointError("point at infinity: |w| <= 1e-12");
    }
  }
  return narrow(points, -1, 0, d - 1) / w;
}

namespace {

void check_normalizable(std::int64_t height, std::int64_t width) {
  if (height < 2 || width < 2) {
    throw ParameterError("pixel normalization requires height and width >= 2");
  }
}

}  // namespace

Var normalize_pixel_coordinates(const Var& points, std::int64_t height, std::int64_t width) {
  check_normalizable(height, width);
  const Tensor scale = Tensor::from_values(
      Shape{2}, {2.0 / static_cast<double>(width - 1), 2.0 / static_cast<double>(height - 1)},
      points.dtype());
  return points * Var(scale) - 1.0;
}

Var denormalize_pixel_coordinates(const Var& points, std::int64_t height, std::int64_t width) {
  check_normalizable(height, width);
  const Tensor scale = Tensor::from_values(
      Shape{2}, {0.5 * static_cast<double>(width - 1), 0.5 * static_cast<double>(height - 1)},
      points.dtype());
  return (points + 1.0) * Var(scale);
}

Mat3 pixel_to_normalized_matrix(std::int64_t height, std::int64_t width) {
  check_normalizable(height, width);
  Mat3 n = Mat3::Identity();
  n(0, 0) = 2.0 / static_cast<double>(width - 1);
  n(0, 2) = -1.0;
  n(1, 1) = 2.0 / static_cast<double>(height - 1);
  n(1, 2) = -1.0;
  return n;
}

// ---------------------------------------------------------------------------

Mat3 quaternion_to_rotation_matrix(const Quaternion& q) {
  const double norm = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  if (!(norm > 0.0)) throw ParameterError("quaternion_to_rotation_matrix: zero quaternion");
  const double w = q.w / norm, x = q.x / norm, y = q.y / norm, z = q.z / norm;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Quaternion rotation_matrix_to_quaternion(const Mat3& r) {
  // Shepperd's method: branch on the largest diagonal term for stability.
  Quaternion q;
  const double trace = r.trace();
  if (trace > 0.0) {
    const double s = 2.0 * std::sqrt(trace + 1.0);
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  const double norm = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  const double sign = q.w < 0.0 ? -1.0 : 1.0;
  return {sign * q.w / norm, sign * q.x / norm, sign * q.y / norm, sign * q.z / norm};
}

Mat3 axis_angle_to_rotation_matrix(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta < 1e-12) {
    // First-order expansion: I + [w]x
    Mat3 r = Mat3::Identity();
    r(0, 1) = -axis_angle.z();
    r(0, 2) = axis_angle.y();
    r(1, 0) = axis_angle.z();
    r(1, 2) = -axis_angle.x();
    r(2, 0) = -axis_angle.y();
    r(2, 1) = axis_angle.x();
    return r;
  }
  const Vec3 k = axis_angle / theta;
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(theta) * kx + (1.0 - std::cos(theta)) * kx * kx;
}

Quaternion axis_angle_to_quaternion(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta < 1e-12) return {1.0, 0.5 * axis_angle.x(), 0.5 * axis_angle.y(), 0.5 * axis_angle.z()};
  const Vec3 k = axis_angle / theta;
  const double s = std::sin(0.5 * theta);
  Quaternion q{std::cos(0.5 * theta), k.x() * s, k.y() * s, k.z() * s};
  if (q.w < 0.0) q = {-q.w, -q.x, -q.y, -q.z};
  return q;
}

Vec3 quaternion_to_axis_angle(const Quaternion& q_in) {
  const double norm = std::sqrt(q_in.w * q_in.w + q_in.x * q_in.x + q_in.y * q_in.y + q_in.z * q_in.z);
  if (!(norm > 0.0)) throw ParameterError("quaternion_to_axis_angle: zero quaternion");
  double w = q_in.w / norm;
  Vec3 v(q_in.x / norm, q_in.y / norm, q_in.z / norm);
  if (w < 0.0) {
    w = -w;
    v = -v;
  }
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double theta = 2.0 * std::atan2(s, w);
  return v * (theta / s);
}

Vec3 rotation_matrix_to_axis_angle(const Mat3& r) {
  return quaternion_to_axis_angle(rotation_matrix_to_quaternion(r));
}

Quaternion inverse(const Quaternion& q) {
  const double n2 = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
  if (!(n2 > 0.0)) throw ParameterError("inverse: zero quaternion");
  return {q.w / n2, -q.x / n2, -q.y / n2, -q.z / n2};
}

// ---------------------------------------------------------------------------

Mat4 compose_transformations(const Mat4& t1, const Mat4& t2) { return t1 * t2; }

Mat4 inverse_transformation(const Mat4& t) {
  const Mat3 r = t.topLeftCorner<3, 3>();
  const bool affine_row = t.row(3).isApprox(Eigen::RowVector4d(0, 0, 0, 1), 1e-12);
  if (affine_row && (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9 &&
      std::abs(r.determinant() - 1.0) < 1e-9) {
    Mat4 inv = Mat4::Identity();
    inv.topLeftCorner<3, 3>() = r.transpose();
    inv.topRightCorner<3, 1>() = -r.transpose() * t.topRightCorner<3, 1>();
    return inv;
  }
  const Eigen::FullPivLU<Mat4> lu(t);
  if (!lu.isInvertible()) throw EstimationError("inverse_transformation: singular matrix");
  return lu.inverse();
}

Mat4 relative_transformation(const Mat4& t_a, const Mat4& t_b) {
  return t_b * inverse_transformation(t_a);
}

std::vector<Vec3> transform_points(const Mat4& t, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const Eigen::Vector4d q = t * p.homogeneous();
    if (!(std::abs(q.w()) > 1e-12)) throw DegeneratePointError("transform_points: point at infinity");
    out.push_back(q.head<3>() / q.w());
  }
  return out;
}

Vec2 transform_point(const Mat3& h, const Vec2& p) {
  const Vec3 q = h * p.homogeneous();
  if (!(std::abs(q.z()) > 1e-12)) throw DegeneratePointError("transform_point: point at infinity");
  return q.head<2>() / q.z();
}

std::vector<Vec2> transform_points(const Mat3& h, std::span<const Vec2> points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(transform_point(h, p));
  return out;
}

Var transform_points(const Var& t, const Var& points) {
  if (points.ndim() != 3 || t.ndim() != 3 || t.size(1) != points.size(2) + 1 ||
      t.size(2) != points.size(2) + 1) {
    throw ShapeError("transform_points: expected T (B, D+1, D+1) and points (B, P, D)");
  }
  // (B, P, D+1) x (B, D+1, D+1)^T
  const Var hom = convert_points_to_homogeneous(points);
  const Var mapped = bmm(hom, permute(t, {0, 2, 1}));
  return convert_points_from_homogeneous(mapped);
}

// ---------------------------------------------------------------------------

namespace {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Mat3 hartley_normalization(std::span<const Vec2> pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 1e-12)) throw EstimationError("homography: coincident points");
  const double s = std::sqrt(2.0) / mean_dist;
  Mat3 t = Mat3::Identity();
  t(0, 0) = s;
  t(1, 1) = s;
  t(0, 2) = -s * c.x();
  t(1, 2) = -s * c.y();
  return t;
}

void check_correspondences(std::span<const Vec2> src, std::span<const Vec2> dst, std::size_t min_n) {
  if (src.size() != dst.size()) throw ShapeError("homography: src/dst count mismatch");
  if (src.size() < min_n) {
    throw EstimationError("homography: need at least " + std::to_string(min_n) + " correspondences");
  }
}

Mat3 denormalize_h(const Eigen::Matrix<double, 8, 1>& h, const Mat3& ts, const Mat3& td) {
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  Mat3 out = td.inverse() * hn * ts;
  if (!(std::abs(out(2, 2)) > 1e-12) || !out.allFinite()) {
    throw EstimationError("homography: degenerate solution");
  }
  out /= out(2, 2);
  if (!(std::abs(out.determinant()) > 1e-12)) throw EstimationError("homography: singular result");
  return out;
}

void dlt_rows(const Vec2& s, const Vec2& d, Eigen::Matrix<double, 2, 8>& a, Eigen::Vector2d& b) {
  a << s.x(), s.y(), 1, 0, 0, 0, -s.x() * d.x(), -s.y() * d.x(),
       0, 0, 0, s.x(), s.y(), 1, -s.x() * d.y(), -s.y() * d.y();
  b << d.x(), d.y();
}

double triangle_area2(const Vec2& a, const Vec2& b, const Vec2& c) {
  return std::abs((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

}  // namespace

Mat3 get_perspective_transform(std::span<const Vec2> src, std::span<const Vec2> dst) {
  if (src.size() != 4 || dst.size() != 4) {
    throw ShapeError("get_perspective_transform: exactly four point pairs required");
  }
  const Mat3 ts = hartley_normalization(src), td = hartley_normalization(dst);
  std::array<Vec2, 4> s, d;
  for (int i = 0; i < 4; ++i) {
    s[static_cast<std::size_t>(i)] = (ts * src[static_cast<std::size_t>(i)].homogeneous()).head<2>();
    d[static_cast<std::size_t>(i)] = (td * dst[static_cast<std::size_t>(i)].homogeneous()).head<2>();
  }
  // No three points may be collinear (in normalized units, area^2 scale ~ 1).
  for (int i = 0; i < 4; ++i) {
    const auto a = static_cast<std::size_t>((i + 1) % 4), b = static_cast<std::size_t>((i + 2) % 4),
               c = static_cast<std::size_t>((i + 3) % 4);
    if (triangle_area2(s[a], s[b], s[c]) < 1e-9 || triangle_area2(d[a], d[b], d[c]) < 1e-9) {
      throw EstimationError("get_perspective_transform: three collinear control points");
    }
  }
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    Eigen::Matrix<double, 2, 8> ai;
    Eigen::Vector2d bi;
    dlt_rows(s[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(i)], ai, bi);
    a.middleRows<2>(2 * i) = ai;
    b.segment<2>(2 * i) = bi;
  }
  const Eigen::PartialPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  if (!(lu.rcond() > 1e-12)) throw EstimationError("get_perspective_transform: singular system");
  return denormalize_h(lu.solve(b), ts, td);
}

Mat3 find_homography_dlt(std::span<const Vec2> src, std::span<const Vec2> dst) {
  check_correspondences(src, dst, 4);
  if (src.size() == 4) return get_perspective_transform(src, dst);
  const Mat3 ts = hartley_normalization(src), td = hartley_normalization(dst);
  Eigen::Matrix<double, 8, 8> ata = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> atb = Eigen::Matrix<double, 8, 1>::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec2 s = (ts * src[i].homogeneous()).head<2>();
    const Vec2 d = (td * dst[i].homogeneous()).head<2>();
    Eigen::Matrix<double, 2, 8> ai;
    Eigen::Vector2d bi;
    dlt_rows(s, d, ai, bi);
    ata += ai.transpose() * ai;
    atb += ai.transpose() * bi;
  }
  const Eigen::PartialPivLU<Eigen::Matrix<double, 8, 8>> lu(ata);
  if (!(lu.rcond() > 1e-14)) throw EstimationError("find_homography_dlt: singular normal equations");
  return denormalize_h(lu.solve(atb), ts, td);
}

Mat3 lift_affine(const Affine23& m) {
  Mat3 out = Mat3::Identity();
  out.topRows<2>() = m;
  return out;
}

Affine23 get_rotation_matrix2d(const Vec2& center, double angle_degrees, double scale) {
  if (scale == 0.0) throw ParameterError("get_rotation_matrix2d: scale must be non-zero");
  const double a = scale * std::cos(deg2rad(angle_degrees));
  const double b = scale * std::sin(deg2rad(angle_degrees));
  Affine23 m;
  m << a, b, (1 - a) * center.x() - b * center.y(),
      -b, a, b * center.x() + (1 - a) * center.y();
  return m;
}

Tensor to_tensor(const Mat3& m, DType dtype) { return to_tensor(std::span<const Mat3>(&m, 1), dtype); }

Tensor to_tensor(std::span<const Mat3> ms, DType dtype) {
  Tensor t(Shape{static_cast<std::int64_t>(ms.size()), 3, 3}, dtype);
  for (std::size_t b = 0; b < ms.size(); ++b)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.set(static_cast<std::int64_t>(b * 9 + static_cast<std::size_t>(i * 3 + j)), ms[b](i, j));
  return t;
}

Mat3 to_mat3(const Tensor& t, std::int64_t batch) {
  if (t.numel() < (batch + 1) * 9) throw ShapeError("to_mat3: tensor too small");
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = t.at(batch * 9 + i * 3 + j);
  return m;
}

namespace {

// Pixel-center coordinates [u v 1] of an (h, w) grid as a 3 x (h*w) tensor.
Tensor pixel_coordinates(std::int64_t h, std::int64_t w, DType dtype) {
  Tensor t(Shape{3, h * w}, dtype);
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    T* p = t.mutable_values<T>().data();
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        p[y * w + x] = static_cast<T>(x);
        p[h * w + y * w + x] = static_cast<T>(y);
        p[2 * h * w + y * w + x] = T(1);
      }
  });
  return t;
}

}  // namespace

Var warp_perspective(const Var& img, const Var& homography, std::int64_t out_h, std::int64_t out_w) {
  kernels::require_4d(img, "warp_perspective");
  Var h = homography;
  if (h.ndim() == 2) h = reshape(h, Shape{1, 3, 3});
  if (h.ndim() != 3 || h.size(1) != 3 || h.size(2) != 3) {
    throw ShapeError("warp_perspective: homography must be (N, 3, 3), got " + to_string(h.shape()));
  }
  if (h.size(0) != img.size(0) && h.size(0) != 1) throw ShapeError("warp_perspective: batch mismatch");
  if (out_h < 1 || out_w < 1) throw ParameterError("warp_perspective: output size must be positive");
  const std::int64_t b = h.size(0);
  const Var h_inv = inverse3x3(h);
  const Var src = bmm(h_inv, Var(pixel_coordinates(out_h, out_w, img.dtype())));  // b x 3 x hw
  const Var z = narrow(src, 1, 2, 1);
  const Var uv = narrow(src, 1, 0, 2) / z;                                   // b x 2 x hw
  const Var pixels = reshape(permute(uv, {0, 2, 1}), Shape{b, out_h, out_w, 2});
  const Var grid = normalize_pixel_coordinates(pixels, std::max<std::int64_t>(2, img.size(2)),
                                               std::max<std::int64_t>(2, img.size(3)));
  return grid_sample_bilinear(img, grid);
}

Var warp_affine(const Var& img, const Var& affine, std::int64_t out_h, std::int64_t out_w) {
  Var m = affine;
  if (m.ndim() == 2) m = reshape(m, Shape{1, 2, 3});
  if (m.ndim() != 3 || m.size(1) != 2 || m.size(2) != 3) {
    throw ShapeError("warp_affine: matrix must be (N, 2, 3), got " + to_string(m.shape()));
  }
  Tensor last(Shape{m.size(0), 1, 3}, m.dtype());
  for (std::int64_t i = 0; i < m.size(0); ++i) last.set(i * 3 + 2, 1.0);
  return warp_perspective(img, concat({m, Var(last)}, 1), out_h, out_w);
}

Var normalized_homography_to_pixel(const Var& h_norm, std::int64_t height, std::int64_t width) {
  const Mat3 n = pixel_to_normalized_matrix(height, width);
  const Var nv(to_tensor(n, h_norm.dtype()));
  const Var n_inv(to_tensor(Mat3(n.inverse()), h_norm.dtype()));
  Var h = h_norm;
  if (h.ndim() == 2) h = reshape(h, Shape{1, 3, 3});
  return bmm(bmm(n_inv, h), nv);
}

Var resize(const Var& img, std::int64_t out_h, std::int64_t out_w) {
  kernels::require_4d(img, "resize");
  if (out_h < 1 || out_w < 1) throw ParameterError("resize: output size must be positive");
  if (out_h == img.size(2) && out_w == img.size(3)) return img;
  const std::int64_t h = img.size(2), w = img.size(3);
  Tensor grid(Shape{1, out_h, out_w, 2}, img.dtype());
  for (std::int64_t y = 0; y < out_h; ++y)
    for (std::int64_t x = 0; x < out_w; ++x) {
      const double u = out_w > 1 ? static_cast<double>(x) * static_cast<double>(w - 1) / static_cast<double>(out_w - 1) : 0.5 * static_cast<double>(w - 1);
      const double v = out_h > 1 ? static_cast<double>(y) * static_cast<double>(h - 1) / static_cast<double>(out_h - 1) : 0.5 * static_cast<double>(h - 1);
      grid.set((y * out_w + x) * 2, u);
      grid.set((y * out_w + x) * 2 + 1, v);
    }
  return sample_bilinear_pixels(img, Var(grid));
}

}  // namespace dcv
