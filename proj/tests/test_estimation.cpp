#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "coff/estimation.hpp"
#include "test_support.hpp"

namespace coff {
namespace {

using testing::random_transform;

// Builds dense clouds and fine groups: group g holds `per_group` matches, of
// which a fraction `outlier_frac` point to random wrong locations.
struct Scenario {
  PointList dense_p;
  PointList dense_q;
  FineMatches fine;
  RigidTransform gt;
};

Scenario make_scenario(std::uint64_t seed, std::size_t groups, std::size_t per_group, double outlier_frac,
                       double noise = 0.0, std::size_t pure_outlier_groups = 0) {
  std::mt19937_64 rng(seed);
  Scenario s;
  s.gt = random_transform(rng, 2.0);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g(0.0, noise > 0.0 ? noise : 1.0);
  for (std::size_t k = 0; k < groups; ++k) {
    const bool pure = k < pure_outlier_groups;
    std::vector<FineMatch> group;
    for (std::size_t m = 0; m < per_group; ++m) {
      const Point3 p(u(rng), u(rng), u(rng));
      Point3 q = s.gt(p);
      if (noise > 0.0) q += Point3(g(rng), g(rng), g(rng));
      const bool out = unit(rng) < outlier_frac;
      if (pure || out) q = Point3(u(rng), u(rng), u(rng)) - Point3(1.5, 1.5, 1.5);
      s.dense_p.push_back(p);
      s.dense_q.push_back(q);
      group.push_back({s.dense_p.size() - 1, s.dense_q.size() - 1, 0.5 + 0.5 * unit(rng)});
    }
    s.fine.groups.push_back(std::move(group));
  }
  return s;
}

TEST(Lgr, NoiselessSingleGroup) {
  const auto s = make_scenario(1, 1, 20, 0.0);
  const auto r = lgr(s.fine, s.dense_p, s.dense_q, EstimationConfig{});
  EXPECT_LT(rotation_error(r.transform, s.gt), 1e-6);
  EXPECT_LT(translation_error(r.transform, s.gt), 1e-9);
  EXPECT_EQ(r.inlier_indices.size(), 20u);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.candidate_count, 1u);
}

TEST(Lgr, CorrectGroupWinsAmongNoise) {
  // Nine pure-noise groups first, then the single correct one.
  auto s = make_scenario(2, 10, 12, 0.0, 0.0, 9);
  const auto r = lgr(s.fine, s.dense_p, s.dense_q, EstimationConfig{});
  EXPECT_LT(rotation_error(r.transform, s.gt), 1e-6);
  EXPECT_GE(r.inlier_indices.size(), 12u);
  for (std::size_t i = 108; i < 120; ++i)
    EXPECT_TRUE(std::find(r.inlier_indices.begin(), r.inlier_indices.end(), i) != r.inlier_indices.end());
}

TEST(Lgr, HalfOutliersAcrossSeeds) {
  int lgr_ok = 0, kabsch_bad = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = testing::half_outlier_patches(100 + seed);
    const auto r = lgr(s.fine, s.dense_p, s.dense_q, EstimationConfig{});
    lgr_ok += rotation_error(r.transform, s.gt) < 0.5 && translation_error(r.transform, s.gt) < 0.01;
    kabsch_bad += rotation_error(kabsch(s.dense_p, s.dense_q), s.gt) > 5.0;
  }
  EXPECT_GE(lgr_ok, 19);
  EXPECT_GE(kabsch_bad, 19);
}

TEST(Lgr, InliersStrictlyInsideRadius) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = make_scenario(200 + seed, 6, 15, 0.3, 0.03);
    EstimationConfig cfg;
    const auto r = lgr(s.fine, s.dense_p, s.dense_q, cfg);
    const auto corr = to_correspondences(s.fine, s.dense_p, s.dense_q);
    std::size_t count = 0;
    for (std::size_t i = 0; i < corr.size(); ++i) count += (r.transform(corr[i].p) - corr[i].q).norm() < cfg.acceptance_radius;
    EXPECT_EQ(count, r.inlier_indices.size());
    for (std::size_t i : r.inlier_indices) EXPECT_LT((r.transform(corr[i].p) - corr[i].q).norm(), cfg.acceptance_radius);
  }
}

TEST(Lgr, RefinementNeverLosesInliers) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = make_scenario(300 + seed, 6, 15, 0.3, 0.04);
    EstimationConfig one;
    one.refine_iters = 1;
    EstimationConfig many;
    many.refine_iters = 10;
    const auto a = lgr(s.fine, s.dense_p, s.dense_q, one);
    const auto b = lgr(s.fine, s.dense_p, s.dense_q, many);
    EXPECT_GE(b.inlier_indices.size(), a.inlier_indices.size());
  }
}

TEST(Lgr, Equivariance) {
  std::mt19937_64 rng(17);
  const auto s = make_scenario(400, 5, 15, 0.2, 0.01);
  const auto g = random_transform(rng, 1.0);
  const auto r = lgr(s.fine, s.dense_p, s.dense_q, EstimationConfig{});
  const auto r2 = lgr(s.fine, coff::apply(g, s.dense_p), coff::apply(g, s.dense_q), EstimationConfig{});
  const auto expect = compose(compose(g, r.transform), invert(g));
  EXPECT_LT((r2.transform.matrix() - expect.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(r2.inlier_indices, r.inlier_indices);
}

TEST(Lgr, SmallGroupsStillCountAsInliers) {
  auto s = make_scenario(5, 1, 10, 0.0);
  // Append a two-match group that agrees with the GT.
  s.dense_p.push_back({0.1, 0.2, 0.3});
  s.dense_q.push_back(s.gt(s.dense_p.back()));
  s.dense_p.push_back({0.4, 0.2, 0.1});
  s.dense_q.push_back(s.gt(s.dense_p.back()));
  s.fine.groups.push_back({{10, 10, 1.0}, {11, 11, 1.0}});
  const auto r = lgr(s.fine, s.dense_p, s.dense_q, EstimationConfig{});
  EXPECT_EQ(r.candidate_count, 1u);
  EXPECT_EQ(r.inlier_indices.size(), 12u);
}

TEST(Lgr, Errors) {
  FineMatches fine;
  fine.groups.push_back({{0, 0, 1.0}, {1, 1, 1.0}});
  const PointList p{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(lgr(fine, p, p, EstimationConfig{}), Error);
  // Collinear group: degenerate, no candidate.
  const PointList line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  FineMatches collinear;
  collinear.groups.push_back({{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}});
  try {
    lgr(collinear, line, line, EstimationConfig{});
    FAIL() << "expected NoValidCandidate";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoValidCandidate);
  }
  EstimationConfig bad;
  bad.acceptance_radius = 0.0;
  EXPECT_THROW(lgr(collinear, line, line, bad), Error);
}

TEST(Ransac, NoiselessRecovers) {
  const auto s = make_scenario(6, 1, 30, 0.0);
  const auto corr = to_correspondences(s.fine, s.dense_p, s.dense_q);
  const auto r = ransac_registration(corr, EstimationConfig{});
  EXPECT_LT((r.transform.matrix() - s.gt.matrix()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(r.inlier_indices.size(), 30u);
}

TEST(Ransac, SeventyPercentOutliers) {
  // With w = 0.3 and 2000 draws, the miss probability (1 - w^3)^2000 is about 2e-24.
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = make_scenario(500 + seed, 1, 100, 0.7, 0.005);
    const auto corr = to_correspondences(s.fine, s.dense_p, s.dense_q);
    EstimationConfig cfg;
    cfg.seed = seed;
    const auto r = ransac_registration(corr, cfg);
    ok += rotation_error(r.transform, s.gt) < 2.0 && translation_error(r.transform, s.gt) < 0.05;
  }
  EXPECT_GE(ok, 50);
}

TEST(Ransac, TooFew) {
  std::vector<Correspondence> corr{{{0, 0, 0}, {0, 0, 0}, 1.0}, {{1, 0, 0}, {1, 0, 0}, 1.0}};
  try {
    ransac_registration(corr, EstimationConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoValidCandidate);
  }
}

TEST(Ransac, Seeded) {
  const auto s = make_scenario(7, 1, 60, 0.5, 0.01);
  const auto corr = to_correspondences(s.fine, s.dense_p, s.dense_q);
  EstimationConfig cfg;
  cfg.seed = 3;
  const auto a = ransac_registration(corr, cfg);
  const auto b = ransac_registration(corr, cfg);
  EXPECT_EQ(a.transform.matrix(), b.transform.matrix());
}

}  // namespace
}  // namespace coff
