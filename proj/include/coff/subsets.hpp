#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coff/error.hpp"
#include "coff/geometry.hpp"
#include "coff/io.hpp"
#include "coff/log.hpp"
#include "coff/parallel.hpp"
#include "coff/spatial_hash.hpp"

namespace coff {

inline constexpr double kPlanarityTau2Indoor = 0.7;     // 3DMatch-style scans
inline constexpr double kPlanarityTau2LargeRoom = 0.8;  // IndoorLRS-style scans

struct PlanarityConfig {
  double tau1 = 0.05;        // point-to-plane inlier distance
  double tau2 = kPlanarityTau2Indoor;
  double nn_radius = 0.10;   // overlap test radius
  std::size_t ransac_iters = 1000;
  std::uint64_t seed = 0;
  bool symmetric_overlap = false;
};

struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;  // normal . x + offset = 0

  double distance(const Point3& p) const { return std::abs(normal.dot(p) + offset); }
};

struct PlaneFit {
  Plane plane;                     // least-squares refit on the winning consensus set
  std::size_t inlier_count = 0;    // points closer than tau1 to the refit plane
  std::size_t hypothesis_inliers = 0;  // consensus size of the best 3-point hypothesis
  bool exhaustive = false;
};

struct PlaneAmbiguityReport {
  std::size_t overlap_size = 0;
  std::size_t plane_inliers = 0;
  double score = std::numeric_limits<double>::quiet_NaN();
  Plane plane;
  bool is_planar = false;
  bool empty_overlap = false;
  bool degenerate = false;
};

/// Points of gt-aligned P that have a Q point strictly within nn_radius,
/// expressed in Q coordinates. The symmetric variant appends the Q points
/// that have an aligned-P neighbour.
inline PointList overlap_region(std::span<const Point3> p, std::span<const Point3> q, const RigidTransform& gt,
                                double nn_radius, bool symmetric = false) {
  if (!(nn_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "overlap_region: nn_radius must be positive");
  PointList out;
  if (p.empty() || q.empty()) return out;
  const PointList aligned = coff::apply(gt, p);
  const SpatialHash q_hash(q, nn_radius);
  for (const auto& a : aligned)
    if (q_hash.any_within(a, nn_radius)) out.push_back(a);
  if (symmetric) {
    const SpatialHash p_hash(aligned, nn_radius);
    for (const auto& b : q)
      if (p_hash.any_within(b, nn_radius)) out.push_back(b);
  }
  return out;
}

namespace detail {

inline std::optional<Plane> plane_through(const Point3& a, const Point3& b, const Point3& c) {
  const Eigen::Vector3d n = (b - a).cross(c - a);
  const double len = n.norm();
  const double scale = std::max({(b - a).norm(), (c - a).norm(), 1e-300});
  if (!(len > 1e-12 * scale * scale)) return std::nullopt;
  Plane pl;
  pl.normal = n / len;
  pl.offset = -pl.normal.dot(a);
  return pl;
}

inline std::size_t count_within(const Plane& pl, std::span<const Point3> pts, double tau) {
  std::size_t n = 0;
  for (const auto& x : pts)
    if (pl.distance(x) < tau) ++n;
  return n;
}

inline Plane fit_plane_lsq(std::span<const Point3> pts, std::span<const std::size_t> idx) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (std::size_t i : idx) c += pts[i];
  c /= static_cast<double>(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i : idx) {
    const Eigen::Vector3d d = pts[i] - c;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Plane pl;
  pl.normal = es.eigenvectors().col(0).normalized();
  pl.offset = -pl.normal.dot(c);
  return pl;
}

}  // namespace detail

/// Single-plane RANSAC. When every triple fits in the iteration budget the
/// triples are enumerated instead of sampled. The winner is refit by least
/// squares on its consensus set.
inline PlaneFit ransac_plane(std::span<const Point3> points, double tau1, std::size_t iters, std::uint64_t seed) {
  if (!(tau1 > 0.0)) throw Error(ErrorCode::InvalidArgument, "ransac_plane: tau1 must be positive");
  const std::size_t n = points.size();
  if (n < 3) throw Error(ErrorCode::DegenerateInput, "ransac_plane: fewer than 3 points");

  PlaneFit fit;
  bool have = false;
  auto consider = [&](std::size_t a, std::size_t b, std::size_t c) {
    const auto pl = detail::plane_through(points[a], points[b], points[c]);
    if (!pl) return;
    const std::size_t count = detail::count_within(*pl, points, tau1);
    if (!have || count > fit.hypothesis_inliers) {
      have = true;
      fit.hypothesis_inliers = count;
      fit.plane = *pl;
    }
  };

  const double triples = static_cast<double>(n) * static_cast<double>(n - 1) * static_cast<double>(n - 2) / 6.0;
  if (triples <= static_cast<double>(iters)) {
    fit.exhaustive = true;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        for (std::size_t c = b + 1; c < n; ++c) consider(a, b, c);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t it = 0; it < iters; ++it) {
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      std::size_t c = pick(rng);
      if (a == b || a == c || b == c) continue;
      consider(a, b, c);
    }
  }
  if (!have) throw Error(ErrorCode::DegenerateInput, "ransac_plane: all points are collinear");

  std::vector<std::size_t> consensus;
  for (std::size_t i = 0; i < n; ++i)
    if (fit.plane.distance(points[i]) < tau1) consensus.push_back(i);
  if (consensus.size() >= 3) {
    const Plane refit = detail::fit_plane_lsq(points, consensus);
    const std::size_t refit_count = detail::count_within(refit, points, tau1);
    if (refit_count >= fit.hypothesis_inliers) {
      fit.plane = refit;
      fit.inlier_count = refit_count;
      return fit;
    }
  }
  fit.inlier_count = fit.hypothesis_inliers;
  return fit;
}

/// Planarity r = Zo / Z of the overlap region. Zo is the consensus size of
/// the best RANSAC hypothesis, so it never shrinks as tau1 grows.
inline PlaneAmbiguityReport planarity_score(std::span<const Point3> p, std::span<const Point3> q,
                                            const RigidTransform& gt, const PlanarityConfig& cfg) {
  PlaneAmbiguityReport report;
  const PointList overlap = overlap_region(p, q, gt, cfg.nn_radius, cfg.symmetric_overlap);
  report.overlap_size = overlap.size();
  if (overlap.empty()) {
    report.empty_overlap = true;
    return report;
  }
  try {
    const PlaneFit fit = ransac_plane(overlap, cfg.tau1, cfg.ransac_iters, cfg.seed);
    report.plane = fit.plane;
    report.plane_inliers = fit.hypothesis_inliers;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateInput) throw;
    report.degenerate = true;
    return report;
  }
  report.score = static_cast<double>(report.plane_inliers) / static_cast<double>(report.overlap_size);
  report.is_planar = report.score > cfg.tau2;
  return report;
}

inline nlohmann::json report_to_json(const PlaneAmbiguityReport& r, const PlanarityConfig& cfg) {
  nlohmann::json j;
  j["r"] = std::isnan(r.score) ? nlohmann::json(nullptr) : nlohmann::json(r.score);
  j["tau1"] = cfg.tau1;
  j["tau2"] = cfg.tau2;
  j["nn_radius"] = cfg.nn_radius;
  j["overlap_size"] = r.overlap_size;
  j["plane_inliers"] = r.plane_inliers;
  j["plane"] = {{"normal", {r.plane.normal.x(), r.plane.normal.y(), r.plane.normal.z()}}, {"offset", r.plane.offset}};
  j["is_planar"] = r.is_planar;
  if (r.empty_overlap) j["empty_overlap"] = true;
  if (r.degenerate) j["degenerate"] = true;
  return j;
}

struct SubsetResult {
  io::DatasetManifest subset;
  std::vector<PlaneAmbiguityReport> reports;  // one per input pair, in order
};

/// Scores every pair and keeps the planar ones. Selected pairs carry a
/// `planarity` block; cloud entries not referenced by a kept pair are dropped.
inline SubsetResult extract_subset(const io::DatasetManifest& manifest, const PlanarityConfig& cfg,
                                   std::size_t jobs = 1) {
  SubsetResult result;
  result.reports.resize(manifest.pairs.size());
  parallel_for(manifest.pairs.size(), jobs, [&](std::size_t i) {
    const auto& pair = manifest.pairs[i];
    const auto p = io::load_cloud(manifest.resolve(manifest.clouds.at(pair.cloud_p).cloud));
    const auto q = io::load_cloud(manifest.resolve(manifest.clouds.at(pair.cloud_q).cloud));
    result.reports[i] = planarity_score(p.points, q.points, RigidTransform::from_matrix(pair.gt), cfg);
  });

  result.subset.base_dir = manifest.base_dir;
  for (std::size_t i = 0; i < manifest.pairs.size(); ++i) {
    const auto& rep = result.reports[i];
    if (rep.empty_overlap) log::warn("pair ", manifest.pairs[i].id, ": empty overlap region");
    if (!rep.is_planar) continue;
    io::PairEntry kept = manifest.pairs[i];
    kept.planarity = report_to_json(rep, cfg);
    for (const auto& id : {kept.cloud_p, kept.cloud_q}) result.subset.clouds.emplace(id, manifest.clouds.at(id));
    result.subset.pairs.push_back(std::move(kept));
  }
  if (result.subset.pairs.empty()) log::warn("subset selection kept no pairs");
  return result;
}

}  // namespace coff
