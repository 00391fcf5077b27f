#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>

#include <gtest/gtest.h>

#include "coff/sampling.hpp"
#include "coff/spatial_hash.hpp"
#include "test_support.hpp"

namespace coff {
namespace {

using testing::random_cloud;
using testing::random_transform;

TEST(GridSubsample, SingleVoxelCentroid) {
  const PointList pts{{0, 0, 0}, {0.01, 0, 0}};
  const auto r = grid_subsample(pts, 0.05);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_NEAR((r.points[0] - Point3(0.005, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_EQ(r.parent_map, (std::vector<std::size_t>{0, 0}));
}

TEST(GridSubsample, SeparateVoxelsKeepPoints) {
  const PointList pts{{0, 0, 0}, {1, 0, 0}};
  const auto r = grid_subsample(pts, 0.05);
  ASSERT_EQ(r.points.size(), 2u);
  EXPECT_EQ(r.points[0], pts[0]);
  EXPECT_EQ(r.points[1], pts[1]);
}

TEST(GridSubsample, MatchesBucketingOracle) {
  std::mt19937_64 rng(2);
  const auto pts = random_cloud(rng, 10000);
  const double voxel = 0.1;
  const auto r = grid_subsample(pts, voxel);
  EXPECT_LE(r.points.size(), 1000u);

  std::map<std::tuple<long, long, long>, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    buckets[{static_cast<long>(std::floor(pts[i].x() / voxel)), static_cast<long>(std::floor(pts[i].y() / voxel)),
             static_cast<long>(std::floor(pts[i].z() / voxel))}]
        .push_back(i);
  }
  ASSERT_EQ(buckets.size(), r.points.size());
  for (const auto& [key, members] : buckets) {
    Point3 c = Point3::Zero();
    for (std::size_t i : members) c += pts[i];
    c /= static_cast<double>(members.size());
    const std::size_t out = r.parent_map[members[0]];
    for (std::size_t i : members) EXPECT_EQ(r.parent_map[i], out);
    EXPECT_NEAR((r.points[out] - c).norm(), 0.0, 1e-12);
  }
}

TEST(GridSubsample, IdempotentOnSubsampledData) {
  std::mt19937_64 rng(3);
  const auto pts = random_cloud(rng, 5000);
  const auto once = grid_subsample(pts, 0.07);
  const auto twice = grid_subsample(once.points, 0.07);
  EXPECT_EQ(once.points.size(), twice.points.size());
}

TEST(GridSubsample, Errors) {
  EXPECT_THROW(grid_subsample(PointList{}, 0.1), Error);
  EXPECT_THROW(grid_subsample(PointList{{0, 0, 0}}, 0.0), Error);
}

TEST(Hierarchy, SinglePointEveryLevel) {
  const auto h = build_hierarchy(PointList{{0.3, 0.2, 0.1}}, 0.025, 4);
  ASSERT_EQ(h.num_levels(), 4u);
  for (const auto& l : h.levels) EXPECT_EQ(l.points.size(), 1u);
}

TEST(Hierarchy, TwoClustersCollapseToTwoSuperpoints) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.02, 0.08);
  PointList pts;
  for (int i = 0; i < 200; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  for (int i = 0; i < 200; ++i) pts.emplace_back(1.02 + u(rng) - 0.02, u(rng), u(rng));
  const auto h = build_hierarchy(pts, 0.025, 4);
  EXPECT_DOUBLE_EQ(h.voxel_sizes.back(), 0.2);
  EXPECT_EQ(h.superpoints().size(), 2u);
}

TEST(Hierarchy, LevelSizesNonincreasingAndParentsValid) {
  std::mt19937_64 rng(5);
  const auto h = build_hierarchy(random_cloud(rng, 8000), 0.025, 4);
  EXPECT_EQ(h.dense_level(), 1u);
  EXPECT_EQ(h.superpoint_level(), 3u);
  for (std::size_t k = 0; k + 1 < h.num_levels(); ++k) {
    EXPECT_LE(h.levels[k + 1].points.size(), h.levels[k].points.size());
    EXPECT_EQ(h.levels[k].parent_index.size(), h.levels[k].points.size());
    for (std::size_t p : h.levels[k].parent_index) EXPECT_LT(p, h.levels[k + 1].points.size());
    EXPECT_DOUBLE_EQ(h.voxel_sizes[k + 1], 0.025 * std::pow(2.0, static_cast<double>(k + 1)));
  }
  EXPECT_TRUE(h.levels.back().parent_index.empty());
  EXPECT_THROW(build_hierarchy(PointList{{0, 0, 0}}, 0.025, 1), Error);
  EXPECT_THROW(build_hierarchy(PointList{}, 0.025, 4), Error);
}

TEST(RadiusNeighbors, IncludesCenterAtZeroDistance) {
  const PointList cloud{{0, 0, 0}, {1, 0, 0}};
  const auto nb = radius_neighbors(cloud[1], cloud, 0.1);
  EXPECT_EQ(nb, (std::vector<std::size_t>{1}));
}

TEST(RadiusNeighbors, SimpleCase) {
  const PointList cloud{{0.1, 0, 0}, {0.3, 0, 0}};
  EXPECT_EQ(radius_neighbors(Point3::Zero(), cloud, 0.2), (std::vector<std::size_t>{0}));
}

TEST(RadiusNeighbors, MatchesLinearScan) {
  std::mt19937_64 rng(6);
  const auto cloud = random_cloud(rng, 3000);
  const SpatialHash index(cloud, 0.07);
  for (int trial = 0; trial < 50; ++trial) {
    const Point3 c = random_cloud(rng, 1)[0];
    const double r = 0.05 + 0.01 * (trial % 7);
    std::vector<std::pair<double, std::size_t>> oracle;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double d = (cloud[i] - c).norm();
      if (d <= r) oracle.emplace_back(d, i);
    }
    std::sort(oracle.begin(), oracle.end());
    const auto got = radius_neighbors(c, cloud, r);
    ASSERT_EQ(got.size(), oracle.size());
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(got[k], oracle[k].second);
    EXPECT_EQ(index.radius(c, r).size(), oracle.size());
  }
}

TEST(SpatialHashNearest, MatchesScanIncludingFarQueries) {
  std::mt19937_64 rng(7);
  const auto cloud = random_cloud(rng, 500);
  const SpatialHash index(cloud, 0.05);
  std::uniform_real_distribution<double> far(-5.0, 6.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Point3 c = trial % 2 ? random_cloud(rng, 1)[0] : Point3(far(rng), far(rng), far(rng));
    std::size_t best = 0;
    for (std::size_t i = 1; i < cloud.size(); ++i)
      if ((cloud[i] - c).squaredNorm() < (cloud[best] - c).squaredNorm()) best = i;
    EXPECT_EQ(*index.nearest(c), best);
  }
}

TEST(PointToNodeGroup, SingleSuperpointTakesAllUpToCap) {
  std::mt19937_64 rng(8);
  const auto dense = random_cloud(rng, 100);
  const PointList supers{{0.5, 0.5, 0.5}};
  auto patches = point_to_node_group(dense, supers, 64);
  ASSERT_EQ(patches.size(), 1u);
  EXPECT_EQ(patches[0].size(), 64u);
  patches = point_to_node_group(dense, supers, 1000);
  EXPECT_EQ(patches[0].size(), 100u);
}

TEST(PointToNodeGroup, TieGoesToLowerIndex) {
  const PointList supers{{-1, 0, 0}, {1, 0, 0}};
  const PointList dense{{0, 0, 0}};
  const auto patches = point_to_node_group(dense, supers, 64);
  EXPECT_EQ(patches[0].member_indices, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(patches[1].member_indices.empty());
}

TEST(PointToNodeGroup, MatchesExhaustiveNearestNeighbour) {
  std::mt19937_64 rng(9);
  const auto dense = random_cloud(rng, 2000);
  const auto supers = random_cloud(rng, 40);
  const auto patches = point_to_node_group(dense, supers, 100000);
  std::vector<std::size_t> owner(dense.size(), supers.size());
  std::size_t total = 0;
  for (const auto& p : patches) {
    total += p.size();
    for (std::size_t i : p.member_indices) owner[i] = p.superpoint_index;
    for (std::size_t k = 1; k < p.size(); ++k) {
      EXPECT_LE((dense[p.member_indices[k - 1]] - supers[p.superpoint_index]).norm(),
                (dense[p.member_indices[k]] - supers[p.superpoint_index]).norm());
    }
  }
  EXPECT_EQ(total, dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < supers.size(); ++s)
      if ((dense[i] - supers[s]).squaredNorm() < (dense[i] - supers[best]).squaredNorm()) best = s;
    EXPECT_EQ(owner[i], best);
  }
}

TEST(PointToNodeGroup, TruncationKeepsNearestSubset) {
  std::mt19937_64 rng(10);
  const auto dense = random_cloud(rng, 2000);
  const auto supers = random_cloud(rng, 10);
  const auto full = point_to_node_group(dense, supers, 100000);
  const auto cut = point_to_node_group(dense, supers, 16);
  for (std::size_t s = 0; s < supers.size(); ++s) {
    EXPECT_LE(cut[s].size(), 16u);
    for (std::size_t k = 0; k < cut[s].size(); ++k) EXPECT_EQ(cut[s].member_indices[k], full[s].member_indices[k]);
  }
}

SuperpointPatch all_of(std::size_t n) {
  SuperpointPatch p;
  for (std::size_t i = 0; i < n; ++i) p.member_indices.push_back(i);
  return p;
}

TEST(PatchOverlap, SelfAndDisjoint) {
  std::mt19937_64 rng(11);
  const auto pts = random_cloud(rng, 50, 0.2);
  const auto patch = all_of(pts.size());
  EXPECT_DOUBLE_EQ(patch_overlap_ratio(patch, pts, patch, pts, RigidTransform::identity(), 0.01), 1.0);
  PointList far = pts;
  for (auto& p : far) p.x() += 10.0;
  EXPECT_DOUBLE_EQ(patch_overlap_ratio(patch, pts, patch, far, RigidTransform::identity(), 0.05), 0.0);
}

TEST(PatchOverlap, HalfOverlapMatchesPairwiseOracle) {
  PointList p, q;
  for (int i = 0; i < 10; ++i) p.emplace_back(0.1 * i, 0, 0);
  for (int i = 5; i < 15; ++i) q.emplace_back(0.1 * i, 0, 0);
  const auto pp = all_of(p.size()), pq = all_of(q.size());
  std::size_t oracle = 0;
  for (const auto& a : p) {
    bool hit = false;
    for (const auto& b : q) hit |= (a - b).norm() < 0.03;
    oracle += hit;
  }
  EXPECT_EQ(oracle, 5u);
  EXPECT_DOUBLE_EQ(patch_overlap_ratio(pp, p, pq, q, RigidTransform::identity(), 0.03), 0.5);
}

TEST(PatchOverlap, InvariantUnderRigidConjugation) {
  std::mt19937_64 rng(12);
  const auto p = random_cloud(rng, 60, 0.3);
  const auto gt = random_transform(rng);
  PointList q = coff::apply(gt, p);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (auto& x : q) x += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
  const auto pp = all_of(p.size()), pq = all_of(q.size());
  const double base = patch_overlap_ratio(pp, p, pq, q, gt, 0.03);
  for (int i = 0; i < 10; ++i) {
    const auto a = random_transform(rng), b = random_transform(rng);
    const auto p2 = coff::apply(a, p), q2 = coff::apply(b, q);
    const auto gt2 = compose(b, compose(gt, invert(a)));
    EXPECT_NEAR(patch_overlap_ratio(pp, p2, pq, q2, gt2, 0.03), base, 1e-12);
  }
}

}  // namespace
}  // namespace coff
