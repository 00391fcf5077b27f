#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "coff/error.hpp"
#include "coff/geometry.hpp"
#include "coff/matching.hpp"

namespace coff {

struct EstimationConfig {
  double acceptance_radius = 0.10;
  std::size_t refine_iters = 5;
  std::size_t ransac_iters = 2000;
  std::size_t ransac_sample = 3;
  std::uint64_t seed = 0;
};

struct RegistrationResult {
  RigidTransform transform;
  std::vector<std::size_t> inlier_indices;  // into the flattened correspondence list
  std::size_t candidate_count = 0;
  bool converged = false;
};

struct Correspondence {
  Point3 p;
  Point3 q;
  double weight = 1.0;
};

namespace detail {

inline std::vector<std::size_t> inliers_of(const RigidTransform& t, std::span<const Correspondence> corr,
                                           double radius) {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < corr.size(); ++i)
    if ((t(corr[i].p) - corr[i].q).squaredNorm() < r2) out.push_back(i);
  return out;
}

inline RigidTransform kabsch_on(std::span<const Correspondence> corr, std::span<const std::size_t> subset,
                                bool weighted) {
  PointList src, dst;
  std::vector<double> w;
  src.reserve(subset.size());
  dst.reserve(subset.size());
  w.reserve(subset.size());
  double total = 0.0;
  for (std::size_t i : subset) {
    src.push_back(corr[i].p);
    dst.push_back(corr[i].q);
    w.push_back(weighted ? corr[i].weight : 1.0);
    total += w.back();
  }
  if (!(total > 0.0)) std::fill(w.begin(), w.end(), 1.0);
  return kabsch(src, dst, w);
}

}  // namespace detail

/// Correspondences of a fine match set as point pairs with confidences,
/// flattened group by group.
inline std::vector<Correspondence> to_correspondences(const FineMatches& fine, std::span<const Point3> dense_p,
                                                      std::span<const Point3> dense_q) {
  std::vector<Correspondence> out;
  out.reserve(fine.total());
  for (const auto& g : fine.groups)
    for (const auto& m : g) out.push_back({dense_p[m.dense_p], dense_q[m.dense_q], m.confidence});
  return out;
}

/// Local-to-global registration. Each group with at least 3 matches yields
/// a confidence-weighted Kabsch candidate; the candidate with the most
/// global inliers (|R p + t - q| < radius over all groups) wins, ties to the
/// first group. It is then refined by weighted Kabsch on its inliers until
/// the inlier set stops changing or refine_iters rounds have run. A round
/// that would lose inliers is rejected.
inline RegistrationResult lgr(const FineMatches& fine, std::span<const Point3> dense_p,
                              std::span<const Point3> dense_q, const EstimationConfig& cfg) {
  if (!(cfg.acceptance_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "lgr: acceptance radius must be positive");
  if (cfg.refine_iters < 1) throw Error(ErrorCode::InvalidArgument, "lgr: refine_iters must be >= 1");
  const auto corr = to_correspondences(fine, dense_p, dense_q);

  RegistrationResult result;
  std::size_t best_count = 0;
  bool have = false;
  std::size_t offset = 0;
  for (const auto& group : fine.groups) {
    const std::size_t begin = offset;
    offset += group.size();
    if (group.size() < 3) continue;
    std::vector<std::size_t> members(group.size());
    for (std::size_t k = 0; k < group.size(); ++k) members[k] = begin + k;
    RigidTransform cand;
    try {
      cand = detail::kabsch_on(corr, members, true);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateConfiguration) throw;
      continue;
    }
    ++result.candidate_count;
    const std::size_t count = detail::inliers_of(cand, corr, cfg.acceptance_radius).size();
    if (!have || count > best_count) {
      have = true;
      best_count = count;
      result.transform = cand;
    }
  }
  if (!have) throw Error(ErrorCode::NoValidCandidate, "lgr: no group produced a transform");

  auto inliers = detail::inliers_of(result.transform, corr, cfg.acceptance_radius);
  for (std::size_t round = 0; round < cfg.refine_iters; ++round) {
    if (inliers.size() < 3) break;
    RigidTransform next;
    try {
      next = detail::kabsch_on(corr, inliers, true);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateConfiguration) throw;
      break;
    }
    auto next_inliers = detail::inliers_of(next, corr, cfg.acceptance_radius);
    if (next_inliers.size() < inliers.size()) break;
    const bool same = next_inliers == inliers;
    result.transform = next;
    inliers = std::move(next_inliers);
    if (same) {
      result.converged = true;
      break;
    }
  }
  result.inlier_indices = std::move(inliers);
  return result;
}

/// 3-point hypothesize-and-verify baseline; best hypothesis by inlier count
/// (strictly below the acceptance radius), final unweighted Kabsch on its inliers.
inline RegistrationResult ransac_registration(std::span<const Correspondence> corr, const EstimationConfig& cfg) {
  const std::size_t sample = std::max<std::size_t>(cfg.ransac_sample, 3);
  if (corr.size() < sample) throw Error(ErrorCode::NoValidCandidate, "ransac: too few correspondences");
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> all(corr.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  RegistrationResult result;
  std::size_t best_count = 0;
  bool have = false;
  std::vector<std::size_t> pick;
  for (std::size_t it = 0; it < cfg.ransac_iters; ++it) {
    pick.clear();
    std::sample(all.begin(), all.end(), std::back_inserter(pick), static_cast<std::ptrdiff_t>(sample), rng);
    RigidTransform hyp;
    try {
      hyp = detail::kabsch_on(corr, pick, false);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateConfiguration) throw;
      continue;
    }
    ++result.candidate_count;
    const std::size_t count = detail::inliers_of(hyp, corr, cfg.acceptance_radius).size();
    if (!have || count > best_count) {
      have = true;
      best_count = count;
      result.transform = hyp;
      if (count == corr.size()) break;
    }
  }
  if (!have) throw Error(ErrorCode::NoValidCandidate, "ransac: every sample was degenerate");

  auto inliers = detail::inliers_of(result.transform, corr, cfg.acceptance_radius);
  if (inliers.size() >= 3) {
    try {
      result.transform = detail::kabsch_on(corr, inliers, false);
      auto refined_inliers = detail::inliers_of(result.transform, corr, cfg.acceptance_radius);
      result.converged = refined_inliers == inliers;
      inliers = std::move(refined_inliers);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateConfiguration) throw;
    }
  }
  result.inlier_indices = std::move(inliers);
  return result;
}

}  // namespace coff
