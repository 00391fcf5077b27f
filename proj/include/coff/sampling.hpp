#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coff/error.hpp"
#include "coff/geometry.hpp"
#include "coff/spatial_hash.hpp"

namespace coff {

struct SubsampleResult {
  PointList points;
  std::vector<std::size_t> parent_map;  // input index -> output index
};

/// Voxel-grid subsampling: one centroid per occupied voxel. Output order
/// follows the first appearance of each voxel in the input.
inline SubsampleResult grid_subsample(std::span<const Point3> points, double voxel) {
  if (!(voxel > 0.0)) throw Error(ErrorCode::InvalidArgument, "voxel size must be positive");
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "grid_subsample: no points");

  std::unordered_map<CellKey, std::size_t, CellKeyHash> slot;
  slot.reserve(points.size());
  std::vector<Eigen::Vector3d> sums;
  std::vector<std::size_t> counts;
  SubsampleResult out;
  out.parent_map.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(cell_of(points[i], voxel), sums.size());
    if (inserted) {
      sums.emplace_back(Eigen::Vector3d::Zero());
      counts.push_back(0);
    }
    sums[it->second] += points[i];
    ++counts[it->second];
    out.parent_map[i] = it->second;
  }
  out.points.reserve(sums.size());
  for (std::size_t k = 0; k < sums.size(); ++k) out.points.push_back(sums[k] / static_cast<double>(counts[k]));
  return out;
}

struct CloudLevel {
  PointList points;
  std::vector<std::size_t> parent_index;  // into the next-coarser level; empty at the coarsest
};

/// Level stack built by repeated voxel subsampling. Level 0 is the input
/// cloud; level k >= 1 is subsampled from level k-1 at base_voxel * 2^k.
struct HierarchicalCloud {
  std::vector<CloudLevel> levels;
  std::vector<double> voxel_sizes;

  std::size_t num_levels() const { return levels.size(); }
  std::size_t dense_level() const { return 1; }
  std::size_t superpoint_level() const { return levels.size() - 1; }
  const PointList& dense() const { return levels.at(dense_level()).points; }
  const PointList& superpoints() const { return levels.at(superpoint_level()).points; }

  /// Maps each level-0 index to its ancestor at `level`.
  std::vector<std::size_t> ancestors(std::size_t level) const {
    std::vector<std::size_t> idx(levels.at(0).points.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t k = 0; k < level; ++k)
      for (auto& i : idx) i = levels[k].parent_index[i];
    return idx;
  }
};

inline HierarchicalCloud build_hierarchy(std::span<const Point3> points, double base_voxel,
                                         std::size_t num_levels) {
  if (num_levels < 2) throw Error(ErrorCode::InvalidArgument, "build_hierarchy: need at least 2 levels");
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "build_hierarchy: no points");
  HierarchicalCloud h;
  h.levels.push_back({PointList(points.begin(), points.end()), {}});
  h.voxel_sizes.push_back(base_voxel);
  for (std::size_t k = 1; k < num_levels; ++k) {
    const double voxel = base_voxel * std::ldexp(1.0, static_cast<int>(k));
    auto sub = grid_subsample(h.levels.back().points, voxel);
    h.levels.back().parent_index = std::move(sub.parent_map);
    h.levels.push_back({std::move(sub.points), {}});
    h.voxel_sizes.push_back(voxel);
  }
  return h;
}

/// Indices of cloud points within `radius` of center (inclusive), nearest first.
inline std::vector<std::size_t> radius_neighbors(const Point3& center, std::span<const Point3> cloud,
                                                 double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  SpatialHash index(cloud, radius);
  return index.radius(center, radius);
}

struct SuperpointPatch {
  std::size_t superpoint_index = 0;
  std::vector<std::size_t> member_indices;  // dense indices, nearest to the superpoint first

  std::size_t size() const { return member_indices.size(); }
};

/// Assigns every dense point to its nearest superpoint (ties: lowest index)
/// and keeps, per superpoint, the m_max members closest to it.
inline std::vector<SuperpointPatch> point_to_node_group(std::span<const Point3> dense,
                                                        std::span<const Point3> supers, std::size_t m_max) {
  if (supers.empty()) throw Error(ErrorCode::EmptyInput, "point_to_node_group: no superpoints");
  // Cell size from the bounding box so that each cell holds a handful of nodes.
  Eigen::Vector3d lo = supers[0], hi = supers[0];
  for (const auto& s : supers) {
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  const double extent = std::max((hi - lo).maxCoeff(), 1e-6);
  const double cell = std::max(extent / std::cbrt(static_cast<double>(supers.size())), 1e-6);
  SpatialHash index(supers, cell);

  std::vector<std::vector<std::pair<double, std::size_t>>> members(supers.size());
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const std::size_t s = *index.nearest(dense[i]);
    members[s].emplace_back((dense[i] - supers[s]).squaredNorm(), i);
  }
  std::vector<SuperpointPatch> patches(supers.size());
  for (std::size_t s = 0; s < supers.size(); ++s) {
    auto& m = members[s];
    std::sort(m.begin(), m.end());
    if (m.size() > m_max) m.resize(m_max);
    patches[s].superpoint_index = s;
    patches[s].member_indices.reserve(m.size());
    for (const auto& e : m) patches[s].member_indices.push_back(e.second);
  }
  return patches;
}

/// Fraction of patch_p members that, after `gt`, lie strictly within
/// `radius` of some patch_q member.
inline double patch_overlap_ratio(const SuperpointPatch& patch_p, std::span<const Point3> dense_p,
                                  const SuperpointPatch& patch_q, std::span<const Point3> dense_q,
                                  const RigidTransform& gt, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  if (patch_p.member_indices.empty() || patch_q.member_indices.empty()) return 0.0;
  const double r2 = radius * radius;
  std::size_t hits = 0;
  for (std::size_t i : patch_p.member_indices) {
    const Point3 p = gt(dense_p[i]);
    for (std::size_t j : patch_q.member_indices) {
      if ((p - dense_q[j]).squaredNorm() < r2) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(patch_p.member_indices.size());
}

}  // namespace coff
