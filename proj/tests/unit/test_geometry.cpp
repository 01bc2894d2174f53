#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>

#include <Eigen/Dense>

#include "check.hpp"
#include "oracles.hpp"
#include "dcv/camera.hpp"
#include "dcv/geometry.hpp"

using namespace dcv;
using dcv::testing::gradcheck;
using dcv::testing::image_from;
using dcv::testing::interior_max_err;
using dcv::testing::random_quaternion;
using dcv::testing::random_rigid;
using dcv::testing::random_tensor;
using dcv::testing::smooth_image;
using dcv::testing::weighted;

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST(Conversions, Examples) {
  EXPECT_DOUBLE_EQ(deg2rad(180.0), kPi);
  EXPECT_DOUBLE_EQ(rad2deg(kPi / 2), 90.0);
  const Var p(Tensor::from_values({2, 2}, {0, 0, 9, 4}));
  const Tensor n = normalize_pixel_coordinates(p, 5, 10).value();
  EXPECT_EQ(n.to_vector(), (std::vector<double>{-1, -1, 1, 1}));
  EXPECT_LT(max_abs_diff(denormalize_pixel_coordinates(Var(n), 5, 10).value(), p.value()), 1e-15);
  EXPECT_THROW(normalize_pixel_coordinates(p, 1, 10), ParameterError);

  const Tensor e = convert_points_from_homogeneous(Var(Tensor::from_values({1, 3}, {2, 4, 2}))).value();
  EXPECT_EQ(e.to_vector(), (std::vector<double>{1, 2}));
  EXPECT_THROW(convert_points_from_homogeneous(Var(Tensor::from_values({1, 3}, {2, 4, 1e-13}))), DegeneratePointError);
  const Tensor h = convert_points_to_homogeneous(Var(Tensor::from_values({1, 2}, {3, 5}))).value();
  EXPECT_EQ(h.to_vector(), (std::vector<double>{3, 5, 1}));
}

TEST(Rotations, Examples) {
  EXPECT_LT((quaternion_to_rotation_matrix({1, 0, 0, 0}) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((axis_angle_to_rotation_matrix(Vec3(0, 0, kPi / 2)) - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(quaternion_to_rotation_matrix({0, 0, 0, 0}), ParameterError);
}

TEST(Rotations, RoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Quaternion q = random_quaternion(rng);
    const Mat3 r = quaternion_to_rotation_matrix(q);
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
    const Quaternion q2 = rotation_matrix_to_quaternion(r);
    EXPECT_GE(q2.w, 0.0);
    EXPECT_LT((quaternion_to_rotation_matrix(q2) - r).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(q2.w, q.w, 1e-9);
    EXPECT_NEAR(q2.x, q.x, 1e-9);

    const Vec3 aa = rotation_matrix_to_axis_angle(r);
    EXPECT_LT((axis_angle_to_rotation_matrix(aa) - r).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((quaternion_to_axis_angle(axis_angle_to_quaternion(aa)) - aa).cwiseAbs().maxCoeff(), 1e-9);

    const Mat3 ri = quaternion_to_rotation_matrix(inverse(q));
    EXPECT_LT((ri * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  }
  // Near-identity and half-turn edge cases.
  for (const Vec3& aa : {Vec3(1e-14, 0, 0), Vec3(kPi, 0, 0), Vec3(0, kPi - 1e-9, 0)}) {
    const Mat3 r = axis_angle_to_rotation_matrix(aa);
    EXPECT_LT((axis_angle_to_rotation_matrix(rotation_matrix_to_axis_angle(r)) - r).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Transforms, Examples) {
  Rng rng(2);
  const std::vector<Vec3> pts{{1, 2, 3}, {-1, 0.5, 2}};
  const auto same = transform_points(Mat4(Mat4::Identity()), pts);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(same[i], pts[i]);
  for (int i = 0; i < 50; ++i) {
    const Mat4 t1 = random_rigid(rng), t2 = random_rigid(rng);
    EXPECT_LT((relative_transformation(t1, t1) - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((compose_transformations(inverse_transformation(t1), t1) - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-10);
    const auto chained = transform_points(t2, transform_points(t1, pts));
    const auto direct = transform_points(compose_transformations(t2, t1), pts);
    for (std::size_t k = 0; k < pts.size(); ++k) EXPECT_LT((chained[k] - direct[k]).norm(), 1e-10);
    // relative maps frame-a coordinates to frame-b coordinates
    const Vec3 world(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 in_a = transform_points(t1, std::vector<Vec3>{world})[0];
    const Vec3 in_b = transform_points(t2, std::vector<Vec3>{world})[0];
    EXPECT_LT((transform_points(relative_transformation(t1, t2), std::vector<Vec3>{in_a})[0] - in_b).norm(), 1e-10);
  }
  EXPECT_THROW(inverse_transformation(Mat4::Zero()), EstimationError);
}

TEST(Transforms, BatchedVarMatchesEigen) {
  Rng rng(3);
  const Mat4 t = random_rigid(rng);
  Tensor tt(Shape{1, 4, 4});
  for (int i = 0; i < 16; ++i) tt.set(i, t(i / 4, i % 4));
  const Tensor p = random_tensor({1, 5, 3}, rng);
  const Tensor out = transform_points(Var(tt), Var(p)).value();
  for (int k = 0; k < 5; ++k) {
    const Vec3 e = transform_points(t, std::vector<Vec3>{Vec3(p.at(k * 3), p.at(k * 3 + 1), p.at(k * 3 + 2))})[0];
    for (int d = 0; d < 3; ++d) EXPECT_NEAR(out.at(k * 3 + d), e(d), 1e-12);
  }
  EXPECT_LT(gradcheck(weighted([](const auto& x) { return transform_points(x[0], x[1]); }), {tt, p}).max_rel_err, 1e-4);
}

TEST(Homography, Examples) {
  const std::vector<Vec2> src{{0, 0}, {10, 0}, {10, 8}, {0, 8}};
  EXPECT_LT((get_perspective_transform(src, src) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-10);
  std::vector<Vec2> dst;
  for (const auto& p : src) dst.push_back(p + Vec2(5, 3));
  Mat3 expected;
  expected << 1, 0, 5, 0, 1, 3, 0, 0, 1;
  EXPECT_LT((get_perspective_transform(src, dst) - expected).cwiseAbs().maxCoeff(), 1e-10);

  const std::vector<Vec2> collinear{{0, 0}, {1, 1}, {2, 2}, {0, 5}};
  EXPECT_THROW(get_perspective_transform(collinear, src), EstimationError);
  EXPECT_THROW(find_homography_dlt(std::vector<Vec2>(src.begin(), src.begin() + 3),
                                   std::vector<Vec2>(src.begin(), src.begin() + 3)),
               EstimationError);
}

TEST(Homography, RandomQuadsReproject) {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    std::vector<Vec2> src{{0, 0}, {100, 0}, {100, 80}, {0, 80}}, dst;
    for (auto& p : src) p += Vec2(rng.uniform(-15, 15), rng.uniform(-15, 15));
    for (const auto& p : src) dst.push_back(p + Vec2(rng.uniform(-20, 20), rng.uniform(-20, 20)));
    const Mat3 h = get_perspective_transform(src, dst);
    EXPECT_DOUBLE_EQ(h(2, 2), 1.0);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_LT((transform_point(h, src[k]) - dst[k]).norm(), 1e-6);
  }
}

TEST(Homography, LeastSquaresRecoversExactModel) {
  Rng rng(5);
  Mat3 h;
  h << 1.1, 0.05, 3, -0.04, 0.95, -2, 1e-4, -2e-4, 1;
  std::vector<Vec2> src, dst;
  for (int i = 0; i < 30; ++i) {
    src.emplace_back(rng.uniform(0, 100), rng.uniform(0, 100));
    dst.push_back(transform_point(h, src.back()));
  }
  EXPECT_LT((find_homography_dlt(src, dst) - h).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Warp, IdentityAndTranslation) {
  Rng rng(6);
  const Tensor img = random_tensor({2, 3, 9, 11}, rng);
  const Var id(to_tensor(Mat3(Mat3::Identity())));
  EXPECT_EQ(max_abs_diff(warp_perspective(Var(img), id, 9, 11).value(), img), 0.0);

  Mat3 t = Mat3::Identity();
  t(0, 2) = 3;
  const Tensor out = warp_perspective(Var(img), Var(to_tensor(t)), 9, 11).value();
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t y = 0; y < 9; ++y)
        for (std::int64_t x = 0; x < 11; ++x)
          ASSERT_NEAR(out.at({b, c, y, x}), x >= 3 ? img.at({b, c, y, x - 3}) : 0.0, 1e-12);

  Mat3 singular = Mat3::Zero();
  EXPECT_THROW(warp_perspective(Var(img), Var(to_tensor(singular)), 9, 11), EstimationError);
}

TEST(Warp, RoundTripAndComposition) {
  Rng rng(7);
  for (int i = 0; i < 5; ++i) {
    const Tensor img = smooth_image(64, 64, static_cast<std::uint64_t>(i));
    std::vector<Vec2> src{{0, 0}, {63, 0}, {63, 63}, {0, 63}}, dst;
    for (const auto& p : src) dst.push_back(p + Vec2(rng.uniform(-4, 4), rng.uniform(-4, 4)));
    const Mat3 h = get_perspective_transform(src, dst);
    const Var there = warp_perspective(Var(img), Var(to_tensor(h)), 64, 64);
    const Var back = warp_perspective(there, Var(to_tensor(Mat3(h.inverse()))), 64, 64);
    EXPECT_LT(interior_max_err(back.value(), img, 10), 1e-2);

    // Warping by h2 * h1 matches warping by h1 then h2.
    Mat3 h2 = Mat3::Identity();
    h2(0, 2) = rng.uniform(-2, 2);
    h2(1, 0) = rng.uniform(-0.02, 0.02);
    const Var seq = warp_perspective(there, Var(to_tensor(h2)), 64, 64);
    const Var once = warp_perspective(Var(img), Var(to_tensor(Mat3(h2 * h))), 64, 64);
    EXPECT_LT(interior_max_err(seq.value(), once.value(), 12), 1e-2);

    // Control points land where the DLT says.
    for (std::size_t k = 0; k < 4; ++k) EXPECT_LT((transform_point(h, src[k]) - dst[k]).norm(), 1e-6);
  }
}

TEST(Warp, AffineRotation) {
  EXPECT_LT((lift_affine(get_rotation_matrix2d(Vec2(3, 4), 0.0, 1.0)) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(get_rotation_matrix2d(Vec2(0, 0), 10.0, 0.0), ParameterError);

  const Tensor img = smooth_image(41, 41, 3);
  const Affine23 m = get_rotation_matrix2d(Vec2(20, 20), 90.0, 1.0);
  Tensor mt(Shape{1, 2, 3});
  for (int i = 0; i < 6; ++i) mt.set(i, m(i / 3, i % 3));
  Var cur(img);
  for (int k = 0; k < 4; ++k) cur = warp_affine(cur, Var(mt), 41, 41);
  EXPECT_LT(interior_max_err(cur.value(), img, 1), 5e-2);

  const Tensor a = warp_affine(Var(img), Var(mt), 41, 41).value();
  const Tensor p = warp_perspective(Var(img), Var(to_tensor(lift_affine(m))), 41, 41).value();
  EXPECT_LT(max_abs_diff(a, p), 1e-12);

  // Rotation of +90 degrees on screen: the pixel right of the centre moves up.
  const Vec2 moved = transform_point(lift_affine(m), Vec2(25, 20));
  EXPECT_NEAR(moved.x(), 20, 1e-12);
  EXPECT_NEAR(moved.y(), 15, 1e-12);
}

TEST(Warp, GradientChecks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Tensor img = random_tensor({1, 2, 6, 7}, rng);
    Mat3 h = Mat3::Identity();
    h(0, 0) = 1 + rng.uniform(-0.1, 0.1);
    h(0, 1) = rng.uniform(-0.1, 0.1);
    h(0, 2) = rng.uniform(0.2, 0.4);
    h(1, 2) = rng.uniform(-0.4, -0.2);
    h(2, 0) = rng.uniform(-0.01, 0.01);
    EXPECT_LT(gradcheck(weighted([](const auto& x) { return warp_perspective(x[0], x[1], 6, 7); }), {img, to_tensor(h)})
                  .max_rel_err,
              1e-4)
        << seed;
  }
}

TEST(Warp, NormalizedHomographyRoundTrip) {
  Mat3 hn = Mat3::Identity();
  hn(0, 2) = 0.5;  // half the normalized range
  const Mat3 hp = to_mat3(normalized_homography_to_pixel(Var(to_tensor(hn)), 11, 21).value());
  EXPECT_NEAR(hp(0, 2), 5.0, 1e-12);
}

TEST(Resize, AlignsCorners) {
  Rng rng(8);
  const Tensor img = random_tensor({1, 1, 5, 9}, rng);
  const Tensor up = resize(Var(img), 9, 17).value();
  EXPECT_NEAR(up.at({0, 0, 0, 0}), img.at({0, 0, 0, 0}), 1e-15);
  EXPECT_NEAR(up.at({0, 0, 8, 16}), img.at({0, 0, 4, 8}), 1e-15);
  EXPECT_NEAR(up.at({0, 0, 2, 2}), img.at({0, 0, 1, 1}), 1e-15);
  EXPECT_NEAR(up.at({0, 0, 0, 1}), 0.5 * (img.at({0, 0, 0, 0}) + img.at({0, 0, 0, 1})), 1e-15);
}

TEST(Camera, ProjectExamples) {
  const auto cam = PinholeCamera::from_intrinsics(100, 100, 50, 50, 100, 100);
  const Vec2 c = project_point(cam, Vec3(0, 0, 7));
  EXPECT_DOUBLE_EQ(c.x(), 50);
  EXPECT_DOUBLE_EQ(c.y(), 50);
  const Vec2 p = project_point(cam, Vec3(1, 2, 4));
  EXPECT_DOUBLE_EQ(p.x(), 75);
  EXPECT_DOUBLE_EQ(p.y(), 100);
  EXPECT_THROW(project_point(cam, Vec3(1, 1, 0)), BehindCameraError);
  EXPECT_THROW(project_point(cam, Vec3(1, 1, -2)), BehindCameraError);
  EXPECT_THROW(PinholeCamera::from_intrinsics(-1, 100, 0, 0, 10, 10), ParameterError);
}

TEST(Camera, ProjectUnprojectRoundTrip) {
  Rng rng(9);
  const auto cam = PinholeCamera::from_intrinsics(320, 300, 160, 120, 240, 320);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 x(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 20));
    const Vec2 u = project_point(cam, x);
    const std::array<double, 1> d{x.z()};
    const Vec3 back = unproject_points(cam, std::span<const Vec2>(&u, 1), d)[0];
    EXPECT_LT((back - x).norm(), 1e-9);
  }
}

TEST(Camera, FileRoundTrip) {
  Rng rng(10);
  const auto cam = PinholeCamera::from_intrinsics(100.5, 99.25, 50, 40, 80, 100, random_rigid(rng));
  const auto path = std::filesystem::temp_directory_path() / "dcv_camera_test.txt";
  write_camera(path, cam);
  const auto back = read_camera(path, 80, 100);
  EXPECT_EQ(back.K, cam.K);
  EXPECT_EQ(back.T, cam.T);
  std::filesystem::remove(path);
  EXPECT_THROW(read_camera("/nonexistent/cam.txt", 1, 1), IoError);
}

TEST(Depth, PointCloudAndNormals) {
  const auto cam = PinholeCamera::from_intrinsics(20, 20, 4, 3, 7, 9);
  Rng rng(11);
  const Tensor depth = random_tensor({1, 1, 7, 9}, rng, 0.5, 3.0);
  const Tensor pts = depth_to_3d(Var(depth), cam).value();
  for (std::int64_t y = 0; y < 7; ++y)
    for (std::int64_t x = 0; x < 9; ++x) EXPECT_EQ(pts.at({0, 2, y, x}), depth.at({0, 0, y, x}));
  const Tensor plane = Tensor::full({1, 1, 7, 9}, 2.5);
  const Tensor pp = depth_to_3d(Var(plane), cam).value();
  EXPECT_NEAR(pp.at({0, 0, 3, 4}), 0.0, 1e-15);
  EXPECT_NEAR(pp.at({0, 1, 3, 4}), 0.0, 1e-15);
  EXPECT_NEAR(pp.at({0, 2, 3, 4}), 2.5, 1e-15);

  const Tensor n = depth_normals(Var(plane), cam).value();
  for (std::int64_t y = 1; y < 6; ++y)
    for (std::int64_t x = 1; x < 8; ++x) {
      EXPECT_NEAR(n.at({0, 0, y, x}), 0.0, 1e-12);
      EXPECT_NEAR(n.at({0, 1, y, x}), 0.0, 1e-12);
      EXPECT_NEAR(n.at({0, 2, y, x}), -1.0, 1e-12);
    }
  Tensor holes = plane.clone();
  holes.set({0, 0, 3, 4}, 0.0);
  const Tensor nh = depth_normals(Var(holes), cam).value();
  EXPECT_EQ(nh.at({0, 2, 3, 4}), 0.0);
  EXPECT_EQ(nh.at({0, 2, 2, 3}), 0.0);
  EXPECT_EQ(depth_to_3d(Var(holes), cam).value().at({0, 0, 3, 4}), 0.0);
}

TEST(Depth, WarpIdentityPose) {
  Rng rng(12);
  const auto cam = PinholeCamera::from_intrinsics(30, 30, 5, 4, 9, 11);
  const Tensor img = random_tensor({1, 3, 9, 11}, rng);
  const Tensor depth = random_tensor({1, 1, 9, 11}, rng, 0.5, 4);
  EXPECT_LT(max_abs_diff(depth_warp(Var(img), Var(depth), cam, cam).value(), img), 1e-12);
}

TEST(Depth, WarpTranslationShift) {
  // Reference at the origin, source moved by +t along x: src_x = x - t in the
  // source frame, so pixels shift by -fx t / Z.
  const double fx = 40, z = 2, t = 0.1;
  Mat4 ts = Mat4::Identity();
  ts(0, 3) = -t;
  const auto ref = PinholeCamera::from_intrinsics(fx, fx, 10, 6, 13, 21);
  const auto src = PinholeCamera::from_intrinsics(fx, fx, 10, 6, 13, 21, ts);
  const Tensor img = image_from(1, 1, 13, 21, [](auto, auto, auto y, auto x) { return 0.1 * x * x + 0.2 * y; });
  const Tensor out = depth_warp(Var(img), Var(Tensor::full({1, 1, 13, 21}, z)), src, ref).value();
  const double shift = fx * t / z;  // 2 px
  for (std::int64_t y = 0; y < 13; ++y)
    for (std::int64_t x = 3; x < 21; ++x)
      EXPECT_NEAR(out.at({0, 0, y, x}), img.at({0, 0, y, x - 2}), 1e-9) << shift;
}

TEST(Depth, GradientChecks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Mat4 ts = Mat4::Identity();
    ts.topLeftCorner<3, 3>() = axis_angle_to_rotation_matrix(Vec3(0.01, -0.02, 0.015));
    ts.topRightCorner<3, 1>() = Vec3(-0.13, 0.05, 0.02);
    const auto ref = PinholeCamera::from_intrinsics(10, 10, 3.5, 3.5, 8, 8);
    const auto src = PinholeCamera::from_intrinsics(10, 10, 3.5, 3.5, 8, 8, ts);
    const Tensor img = smooth_image(8, 8, seed);
    const Tensor depth = random_tensor({1, 1, 8, 8}, rng, 1.5, 2.5);
    const Tensor target = random_tensor({1, 1, 8, 8}, rng, 0, 1);
    // Photometric loss wrt depth and image.
    auto loss = [&](const std::vector<Var>& x) {
      return mean(square(depth_warp(x[0], x[1], src, ref) - Var(target)));
    };
    EXPECT_LT(gradcheck(loss, {img, depth}).max_rel_err, 1e-3) << seed;
    EXPECT_LT(gradcheck(weighted([&](const auto& x) { return depth_normals(x[0], ref); }), {depth}).max_rel_err, 1e-4);
  }
}
