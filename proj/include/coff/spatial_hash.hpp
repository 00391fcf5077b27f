#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coff/geometry.hpp"

namespace coff {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

inline CellKey cell_of(const Point3& p, double cell) {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell)),
          static_cast<std::int64_t>(std::floor(p.y() / cell)),
          static_cast<std::int64_t>(std::floor(p.z() / cell))};
}

// Uniform hash grid over a point list. Only an accelerator: every query is
// exact (candidates are distance-checked against the stored points).
class SpatialHash {
 public:
  SpatialHash(std::span<const Point3> points, double cell_size)
      : points_(points.begin(), points.end()), cell_(cell_size) {
    if (!(cell_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "spatial hash cell size must be positive");
    for (std::size_t i = 0; i < points_.size(); ++i) cells_[cell_of(points_[i], cell_)].push_back(i);
  }

  std::size_t size() const { return points_.size(); }
  const PointList& points() const { return points_; }

  /// Indices with |p - center| <= radius, ascending by (distance, index).
  std::vector<std::size_t> radius(const Point3& center, double radius) const {
    std::vector<std::pair<double, std::size_t>> hits;
    const double r2 = radius * radius;
    visit_box(center, radius, [&](std::size_t i) {
      const double d2 = (points_[i] - center).squaredNorm();
      if (d2 <= r2) hits.emplace_back(d2, i);
    });
    std::sort(hits.begin(), hits.end());
    std::vector<std::size_t> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(h.second);
    return out;
  }

  /// True when some point lies strictly closer than `radius`.
  bool any_within(const Point3& center, double radius) const {
    const double r2 = radius * radius;
    bool found = false;
    visit_box(center, radius, [&](std::size_t i) {
      if (!found && (points_[i] - center).squaredNorm() < r2) found = true;
    });
    return found;
  }

  /// Nearest stored point; ties go to the lowest index.
  std::optional<std::size_t> nearest(const Point3& center) const {
    if (points_.empty()) return std::nullopt;
    const CellKey c = cell_of(center, cell_);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (std::int64_t ring = 0; ring <= kMaxRing; ++ring) {
      visit_ring(c, ring, [&](std::size_t i) {
        const double d2 = (points_[i] - center).squaredNorm();
        if (d2 < best || (d2 == best && i < best_index)) {
          best = d2;
          best_index = i;
        }
      });
      // Unvisited points lie at least ring * cell away.
      const double reach = static_cast<double>(ring) * cell_;
      if (best < reach * reach) return best_index;
    }
    return nearest_scan(center);
  }

  /// Exhaustive nearest search; ties go to the lowest index.
  std::size_t nearest_scan(const Point3& center) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double d2 = (points_[i] - center).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_index = i;
      }
    }
    return best_index;
  }

 private:
  template <typename F>
  void visit_box(const Point3& center, double radius, F&& f) const {
    const CellKey lo = cell_of(center - Point3::Constant(radius), cell_);
    const CellKey hi = cell_of(center + Point3::Constant(radius), cell_);
    const auto span = (hi.x - lo.x + 1) * (hi.y - lo.y + 1) * (hi.z - lo.z + 1);
    if (span > static_cast<std::int64_t>(cells_.size())) {
      for (const auto& [key, idx] : cells_) {
        if (key.x < lo.x || key.x > hi.x || key.y < lo.y || key.y > hi.y || key.z < lo.z || key.z > hi.z) continue;
        for (std::size_t i : idx) f(i);
      }
      return;
    }
    for (std::int64_t x = lo.x; x <= hi.x; ++x)
      for (std::int64_t y = lo.y; y <= hi.y; ++y)
        for (std::int64_t z = lo.z; z <= hi.z; ++z) {
          auto it = cells_.find({x, y, z});
          if (it == cells_.end()) continue;
          for (std::size_t i : it->second) f(i);
        }
  }

  template <typename F>
  void visit_ring(const CellKey& c, std::int64_t ring, F&& f) const {
    if (ring == 0) {
      auto it = cells_.find(c);
      if (it != cells_.end())
        for (std::size_t i : it->second) f(i);
      return;
    }
    for (std::int64_t x = -ring; x <= ring; ++x)
      for (std::int64_t y = -ring; y <= ring; ++y)
        for (std::int64_t z = -ring; z <= ring; ++z) {
          if (std::max({std::abs(x), std::abs(y), std::abs(z)}) != ring) continue;
          auto it = cells_.find({c.x + x, c.y + y, c.z + z});
          if (it == cells_.end()) continue;
          for (std::size_t i : it->second) f(i);
        }
  }

  PointList points_;
  double cell_;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> cells_;
  static constexpr std::int64_t kMaxRing = 8;
};

}  // namespace coff
