#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "coff/geometry.hpp"
#include "test_support.hpp"

namespace coff {
namespace {

using testing::random_cloud;
using testing::random_transform;

TEST(Apply, IdentityLeavesPointUnchanged) {
  const Point3 p(1, 2, 3);
  EXPECT_EQ(coff::apply(RigidTransform::identity(), p), p);
}

TEST(Apply, QuarterTurnAboutZ) {
  const auto t = RigidTransform::from_axis_angle(Eigen::Vector3d::UnitZ(), std::numbers::pi / 2);
  EXPECT_NEAR((coff::apply(t, Point3(1, 0, 0)) - Point3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(Apply, MatchesHomogeneousMatrixProduct) {
  const double a = deg2rad(30.0);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = std::cos(a);
  m(0, 1) = -std::sin(a);
  m(1, 0) = std::sin(a);
  m(1, 1) = std::cos(a);
  m(0, 3) = 0.1;
  const auto t = RigidTransform::from_axis_angle(Eigen::Vector3d::UnitZ(), a, Eigen::Vector3d(0.1, 0, 0));
  const Point3 expected = testing::apply_homogeneous(m, Point3(1, 0, 0));
  EXPECT_NEAR((coff::apply(t, Point3(1, 0, 0)) - expected).norm(), 0.0, 1e-15);
  EXPECT_NEAR(expected.x(), 0.1 + std::cos(a), 1e-15);
}

TEST(Compose, IdentityCases) {
  const auto id = RigidTransform::identity();
  EXPECT_TRUE(compose(id, id).matrix().isIdentity(0.0));
  EXPECT_TRUE(invert(id).matrix().isIdentity(0.0));
}

TEST(Compose, AppliesRightOperandFirst) {
  std::mt19937_64 rng(3);
  const auto a = random_transform(rng), b = random_transform(rng);
  const Point3 p(0.3, -0.2, 0.9);
  EXPECT_NEAR((coff::apply(compose(a, b), p) - coff::apply(a, coff::apply(b, p))).norm(), 0.0, 1e-12);
}

TEST(Compose, InverseRoundTripOverSeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const auto t = random_transform(rng, 5.0);
    const Point3 p = random_cloud(rng, 1, 3.0)[0];
    EXPECT_NEAR((coff::apply(compose(invert(t), t), p) - p).norm(), 0.0, 1e-9) << seed;
    EXPECT_NEAR((compose(t, invert(t)).matrix() - Eigen::Matrix4d::Identity()).norm(), 0.0, 1e-9);
  }
}

TEST(Compose, Associative) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_transform(rng), b = random_transform(rng), c = random_transform(rng);
    EXPECT_NEAR((compose(compose(a, b), c).matrix() - compose(a, compose(b, c)).matrix()).cwiseAbs().maxCoeff(), 0.0,
                1e-12);
  }
}

TEST(RigidTransformType, FromMatrixValidates) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(3, 0) = 1.0;
  EXPECT_THROW(RigidTransform::from_matrix(m), Error);
  Eigen::Matrix4d s = Eigen::Matrix4d::Identity();
  s(0, 0) = 2.0;
  EXPECT_THROW(RigidTransform::from_matrix(s), Error);
  Eigen::Matrix4d refl = Eigen::Matrix4d::Identity();
  refl(2, 2) = -1.0;
  EXPECT_THROW(RigidTransform::from_matrix(refl), Error);
}

TEST(RigidTransformType, RotationIsOrthonormal) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto t = RigidTransform::from_matrix(random_transform(rng).matrix());
    const Eigen::Matrix3d r = t.rotation();
    EXPECT_NEAR((r.transpose() * r - Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
  }
}

CameraModel simple_camera(double f, double cx, double cy, int w, int h) {
  CameraModel cam;
  cam.intrinsic << f, 0, cx, 0, f, cy, 0, 0, 1;
  cam.width = w;
  cam.height = h;
  return cam;
}

TEST(Project, OpticalAxis) {
  auto cam = simple_camera(1, 0, 0, 1, 1);
  const auto px = project(cam, Point3(0, 0, 1));
  ASSERT_TRUE(px);
  EXPECT_DOUBLE_EQ(px->u, 0.0);
  EXPECT_DOUBLE_EQ(px->v, 0.0);
  EXPECT_DOUBLE_EQ(px->depth, 1.0);
}

TEST(Project, PinholeOracle) {
  const auto cam = simple_camera(100, 320, 240, 640, 480);
  const Point3 p(0.5, -0.2, 2.0);
  const auto px = project(cam, p);
  ASSERT_TRUE(px);
  EXPECT_NEAR(px->u, 100 * p.x() / p.z() + 320, 1e-12);
  EXPECT_NEAR(px->v, 100 * p.y() / p.z() + 240, 1e-12);
  EXPECT_NEAR(px->u, 345.0, 1e-12);
  EXPECT_NEAR(px->v, 230.0, 1e-12);
  EXPECT_DOUBLE_EQ(px->depth, 2.0);
}

TEST(Project, BehindCameraOrOutsideIsAbsent) {
  const auto cam = simple_camera(100, 320, 240, 640, 480);
  EXPECT_FALSE(project(cam, Point3(0, 0, -1)));
  EXPECT_FALSE(project(cam, Point3(0, 0, 0)));
  EXPECT_FALSE(project(cam, Point3(10, 0, 1)));
  // u == width is outside the half-open range.
  auto edge = simple_camera(1, 0, 0, 2, 2);
  EXPECT_FALSE(project(edge, Point3(2, 0, 1)));
  EXPECT_TRUE(project(edge, Point3(1.999, 0, 1)));
}

TEST(Project, UnprojectReproducesCameraFramePoint) {
  std::mt19937_64 rng(21);
  auto cam = simple_camera(300, 320, 240, 640, 480);
  cam.extrinsic = random_transform(rng, 0.2);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    // Sample in front of the camera, then express the point in the cloud frame.
    const Point3 p = invert(cam.extrinsic)(Point3(u(rng), u(rng), 2.0 + u(rng)));
    const auto px = project(cam, p);
    if (!px) continue;
    ++checked;
    EXPECT_NEAR((unproject(cam, *px) - cam.extrinsic(p)).norm(), 0.0, 1e-9);
  }
  EXPECT_GT(checked, 100);
}

TEST(Kabsch, IdenticalCloudsGiveIdentity) {
  std::mt19937_64 rng(1);
  const auto pts = random_cloud(rng, 40);
  const auto t = kabsch(pts, pts);
  EXPECT_NEAR((t.matrix() - Eigen::Matrix4d::Identity()).norm(), 0.0, 1e-9);
}

TEST(Kabsch, RecoversRandomTransforms) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const auto gt = random_transform(rng, 2.0);
    const auto src = random_cloud(rng, 50);
    const auto dst = coff::apply(gt, src);
    const auto est = kabsch(src, dst);
    EXPECT_LT(rotation_error(est, gt), 1e-6) << seed;
    EXPECT_LT(translation_error(est, gt), 1e-9) << seed;
  }
}

TEST(Kabsch, SensorNoiseOnCenteredClouds) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> noise(0.0, 0.005);
  for (int t = 0; t < 100; ++t) {
    const auto gt = random_transform(rng, 2.0);
    PointList src = random_cloud(rng, 50);
    for (auto& p : src) p -= Point3(0.5, 0.5, 0.5);
    PointList dst;
    for (const auto& p : src) dst.push_back(gt(p) + Point3(noise(rng), noise(rng), noise(rng)));
    const auto est = kabsch(src, dst);
    EXPECT_LT(rotation_error(est, gt), 0.5);
    EXPECT_LT(translation_error(est, gt), 0.005);
  }
}

TEST(Kabsch, TranslationErrorGrowsWithFrameOffset) {
  // The same noisy fit, with the cloud moved away from the frame origin.
  std::mt19937_64 rng(32);
  std::normal_distribution<double> noise(0.0, 0.005);
  const auto gt = random_transform(rng);
  PointList src = random_cloud(rng, 50);
  for (auto& p : src) p -= Point3(0.5, 0.5, 0.5);
  PointList dst;
  for (const auto& p : src) dst.push_back(gt(p) + Point3(noise(rng), noise(rng), noise(rng)));
  const auto near = kabsch(src, dst);
  const Point3 offset(50, 0, 0);
  PointList far_src = src, far_dst;
  for (auto& p : far_src) p += offset;
  for (const auto& q : dst) far_dst.push_back(q + gt.rotation() * offset);
  const RigidTransform gt_far(gt.rotation(), gt.translation());
  const auto far = kabsch(far_src, far_dst);
  EXPECT_NEAR(rotation_error(far, gt_far), rotation_error(near, gt), 1e-6);
  EXPECT_GT(translation_error(far, gt_far), 10.0 * translation_error(near, gt));
}

TEST(Kabsch, DegenerateInputs) {
  const PointList line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  EXPECT_THROW(
      {
        try {
          kabsch(line, line);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::DegenerateConfiguration);
          throw;
        }
      },
      Error);
  const PointList two{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(kabsch(two, two), Error);
  const PointList tri{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const std::vector<double> zero{0, 0, 0};
  EXPECT_THROW(kabsch(tri, tri, zero), Error);
  const std::vector<double> neg{1, -1, 1};
  EXPECT_THROW(kabsch(tri, tri, neg), Error);
}

TEST(Kabsch, ReflectionIsNeverReturned) {
  // Mirror image of a planar-ish cloud: best proper rotation still has det +1.
  std::mt19937_64 rng(4);
  const auto src = random_cloud(rng, 30);
  PointList dst;
  for (const auto& p : src) dst.emplace_back(-p.x(), p.y(), p.z());
  const auto t = kabsch(src, dst);
  EXPECT_NEAR(t.rotation().determinant(), 1.0, 1e-9);
}

TEST(Kabsch, WeightedOptimumBeatsPerturbations) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_real_distribution<double> wdist(0.1, 2.0);
  const auto gt = random_transform(rng);
  const auto src = random_cloud(rng, 30);
  PointList dst;
  std::vector<double> w;
  for (const auto& p : src) {
    dst.push_back(gt(p) + Eigen::Vector3d(noise(rng), noise(rng), noise(rng)));
    w.push_back(wdist(rng));
  }
  const auto best = kabsch(src, dst, w);
  const double f0 = weighted_residual(best, src, dst, w);
  std::normal_distribution<double> small(0.0, 0.01);
  for (int i = 0; i < 200; ++i) {
    const auto delta = RigidTransform::from_axis_angle(Eigen::Vector3d(small(rng), small(rng), small(rng) + 1e-9),
                                                       std::abs(small(rng)),
                                                       Eigen::Vector3d(small(rng), small(rng), small(rng)));
    EXPECT_GE(weighted_residual(compose(delta, best), src, dst, w), f0 - 1e-12);
  }
}

TEST(RotationError, ClosedForms) {
  const auto id = RigidTransform::identity();
  EXPECT_DOUBLE_EQ(rotation_error(id, id), 0.0);
  const auto rz = RigidTransform::from_axis_angle(Eigen::Vector3d::UnitZ(), std::numbers::pi / 2);
  EXPECT_NEAR(rotation_error(rz, id), 90.0, 1e-12);
}

TEST(RotationError, KnownAxisAnglePerturbation) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    const auto r = random_transform(rng);
    std::normal_distribution<double> g(0.0, 1.0);
    const auto d = RigidTransform::from_axis_angle(Eigen::Vector3d(g(rng), g(rng), g(rng)), deg2rad(5.0));
    EXPECT_NEAR(rotation_error(compose(d, r), r), 5.0, 1e-6);
  }
}

TEST(RotationError, SymmetricAndZeroOnSelf) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_transform(rng), b = random_transform(rng);
    EXPECT_NEAR(rotation_error(a, b), rotation_error(b, a), 1e-9);
    EXPECT_NEAR(rotation_error(a, a), 0.0, 1e-5);
  }
}

TEST(TranslationError, Norms) {
  const RigidTransform a(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 0, 0));
  const RigidTransform b(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 2, 2));
  const auto id = RigidTransform::identity();
  EXPECT_DOUBLE_EQ(translation_error(a, a), 0.0);
  EXPECT_DOUBLE_EQ(translation_error(a, id), 1.0);
  EXPECT_DOUBLE_EQ(translation_error(b, id), 3.0);
}

}  // namespace
}  // namespace coff
