#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coff/error.hpp"

namespace coff {

using Point3 = Eigen::Vector3d;
using PointList = std::vector<Point3>;

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Rigid motion x -> R x + t.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static RigidTransform identity() { return {}; }

  /// Builds from a homogeneous 4x4 matrix. The rotation block is projected
  /// onto SO(3) after checking it is orthonormal within `tolerance`.
  static RigidTransform from_matrix(const Eigen::Matrix4d& m, double tolerance = 1e-6) {
    if (!m.allFinite()) throw Error(ErrorCode::NonFinite, "transform matrix has non-finite entries");
    if (std::abs(m(3, 0)) > tolerance || std::abs(m(3, 1)) > tolerance ||
        std::abs(m(3, 2)) > tolerance || std::abs(m(3, 3) - 1.0) > tolerance) {
      throw Error(ErrorCode::InvalidArgument, "bottom row of transform must be (0,0,0,1)");
    }
    Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
    if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tolerance ||
        std::abs(r.determinant() - 1.0) > tolerance) {
      throw Error(ErrorCode::InvalidArgument, "rotation block is not a proper rotation");
    }
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
    return {r, m.topRightCorner<3, 1>()};
  }

  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double angle_rad,
                                        const Eigen::Vector3d& translation = Eigen::Vector3d::Zero()) {
    return {Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix(), translation};
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Point3 operator()(const Point3& p) const { return rotation_ * p + translation_; }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

inline Point3 apply(const RigidTransform& t, const Point3& p) { return t(p); }

inline PointList apply(const RigidTransform& t, std::span<const Point3> points) {
  PointList out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(t(p));
  return out;
}

/// compose(a, b) applies b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

inline RigidTransform invert(const RigidTransform& t) {
  Eigen::Matrix3d rt = t.rotation().transpose();
  return {rt, -rt * t.translation()};
}

/// Angle between two rotations in degrees: arccos((trace(Ra^T Rb) - 1) / 2),
/// evaluated as atan2(sin, cos) so that it stays accurate near 0 and 180.
inline double rotation_error(const RigidTransform& a, const RigidTransform& b) {
  const Eigen::Matrix3d rel = a.rotation().transpose() * b.rotation();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Eigen::Vector3d axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double s = std::min(0.5 * axis.norm(), 1.0);
  return rad2deg(std::atan2(s, c));
}

inline double translation_error(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation() - b.translation()).norm();
}

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Pinhole camera. The extrinsic maps cloud coordinates into the camera frame.
struct CameraModel {
  Eigen::Matrix3d intrinsic = Eigen::Matrix3d::Identity();
  RigidTransform extrinsic;
  int width = 0;
  int height = 0;

  double fx() const { return intrinsic(0, 0); }
  double fy() const { return intrinsic(1, 1); }
  double cx() const { return intrinsic(0, 2); }
  double cy() const { return intrinsic(1, 2); }

  /// Camera position expressed in the cloud frame (-R^T t).
  Point3 center() const { return -extrinsic.rotation().transpose() * extrinsic.translation(); }

  void validate() const {
    if (!(fx() > 0.0) || !(fy() > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  }
};

/// Projects p into the image; absent when behind the camera or out of bounds.
/// No occlusion reasoning is done.
inline std::optional<PixelCoord> project(const CameraModel& cam, const Point3& p) {
  const Point3 pc = cam.extrinsic(p);
  if (!(pc.z() > 0.0)) return std::nullopt;
  const Eigen::Vector3d h = cam.intrinsic * pc;
  const double u = h.x() / h.z();
  const double v = h.y() / h.z();
  if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) return std::nullopt;
  return PixelCoord{u, v, pc.z()};
}

/// Camera-frame point that projects to `px` at the recorded depth.
inline Point3 unproject(const CameraModel& cam, const PixelCoord& px) {
  const Eigen::Vector3d ray = cam.intrinsic.inverse() * Eigen::Vector3d(px.u, px.v, 1.0);
  return ray * (px.depth / ray.z());
}

/// Weighted least-squares rigid alignment of src onto dst (Kabsch with
/// reflection correction). Throws DegenerateConfiguration when the weighted
/// cross-covariance has rank < 2.
inline RigidTransform kabsch(std::span<const Point3> src, std::span<const Point3> dst,
                             std::span<const double> weights) {
  if (src.size() != dst.size() || src.size() != weights.size()) {
    throw Error(ErrorCode::DimensionMismatch, "kabsch: src, dst and weights must have equal length");
  }
  if (src.size() < 3) throw Error(ErrorCode::DegenerateConfiguration, "kabsch: need at least 3 pairs");

  double total = 0.0;
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw Error(ErrorCode::InvalidArgument, "kabsch: weights must be nonnegative");
    total += weights[i];
    cs += weights[i] * src[i];
    cd += weights[i] * dst[i];
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "kabsch: total weight is zero");
  cs /= total;
  cd /= total;

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    h += weights[i] * (src[i] - cs) * (dst[i] - cd).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(0) > 1e-300) || sv(1) <= 1e-10 * sv(0)) {
    throw Error(ErrorCode::DegenerateConfiguration, "kabsch: points are collinear or coincident");
  }
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d r = v * d * u.transpose();
  return {r, cd - r * cs};
}

inline RigidTransform kabsch(std::span<const Point3> src, std::span<const Point3> dst) {
  std::vector<double> w(src.size(), 1.0);
  return kabsch(src, dst, w);
}

/// Sum of w_i * |T src_i - dst_i|^2.
inline double weighted_residual(const RigidTransform& t, std::span<const Point3> src,
                                std::span<const Point3> dst, std::span<const double> weights) {
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sum += weights[i] * (t(src[i]) - dst[i]).squaredNorm();
  return sum;
}

}  // namespace coff
