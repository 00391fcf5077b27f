#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coff/error.hpp"
#include "coff/features.hpp"
#include "coff/matching.hpp"

namespace coff {

inline constexpr double kDenseMatchRadius = 0.05;   // GT radius for fine-level supervision
inline constexpr std::size_t kTrainingCoarseSamples = 100;

struct CircleLossConfig {
  double delta_p = 0.1;
  double delta_n = 1.4;
  double gamma = 24.0;
  double positive_overlap_min = 0.10;
};

namespace detail {

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// One direction of the loss: anchors are rows of `a`, candidates rows of `b`,
// overlap(i, j) relates a_i and b_j.
inline double circle_loss_one_way(const FeatureRows& a, const FeatureRows& b, const Eigen::MatrixXd& overlap,
                                  const CircleLossConfig& cfg) {
  double total = 0.0;
  std::size_t anchors = 0;
  std::vector<double> pos, neg;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    pos.clear();
    neg.clear();
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double o = overlap(i, j);
      const double d = (a.row(i) - b.row(j)).norm();
      if (o > cfg.positive_overlap_min) {
        const double beta_p = cfg.gamma * (d - cfg.delta_p);
        pos.push_back(o * beta_p * (d - cfg.delta_p));
      } else if (o == 0.0) {
        const double beta_n = cfg.gamma * (cfg.delta_n - d);
        neg.push_back(beta_n * (cfg.delta_n - d));
      }
    }
    if (pos.empty()) continue;
    ++anchors;
    if (neg.empty()) continue;  // log(1 + 0)
    total += softplus(log_sum_exp(pos) + log_sum_exp(neg));
  }
  return anchors == 0 ? 0.0 : total / static_cast<double>(anchors);
}

}  // namespace detail

/// Overlap-aware circle loss, averaged over anchors that have at least one
/// positive and symmetrized over both clouds. The overlap ratio weights each
/// positive term. No anchors gives 0.
inline double circle_loss(const FeatureMatrix& feats_p, const FeatureMatrix& feats_q, const Eigen::MatrixXd& overlaps,
                          const CircleLossConfig& cfg = {}) {
  if (!(cfg.delta_p < cfg.delta_n) || !(cfg.gamma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "circle_loss: need delta_p < delta_n and gamma > 0");
  }
  if (overlaps.rows() != feats_p.rows.rows() || overlaps.cols() != feats_q.rows.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "circle_loss: overlap matrix shape");
  }
  if (feats_p.rows.cols() != feats_q.rows.cols()) throw Error(ErrorCode::DimensionMismatch, "circle_loss: feature dims");
  const double lp = detail::circle_loss_one_way(feats_p.rows, feats_q.rows, overlaps, cfg);
  const Eigen::MatrixXd ot = overlaps.transpose();
  const double lq = detail::circle_loss_one_way(feats_q.rows, feats_p.rows, ot, cfg);
  return 0.5 * (lp + lq);
}

/// Same loss on patch-wise image features.
inline double patch_feature_loss(const FeatureMatrix& patch_p, const FeatureMatrix& patch_q,
                                 const Eigen::MatrixXd& overlaps, const CircleLossConfig& cfg = {}) {
  return circle_loss(patch_p, patch_q, overlaps, cfg);
}

/// Ground-truth labels for one coarse match: matched (x, y) pairs and the
/// points on each side that should land in the dustbin.
struct DenseSupervision {
  std::vector<std::pair<std::size_t, std::size_t>> matched;
  std::vector<std::size_t> unmatched_p;
  std::vector<std::size_t> unmatched_q;
};

/// Negative log-likelihood over an (m+1)x(n+1) probability matrix whose last
/// row and column are the dustbins.
inline double dense_nll_loss(const Eigen::MatrixXd& probs, const DenseSupervision& sup) {
  const Eigen::Index dr = probs.rows() - 1;
  const Eigen::Index dc = probs.cols() - 1;
  if (dr < 0 || dc < 0) throw Error(ErrorCode::DimensionMismatch, "dense_nll_loss: empty assignment");
  auto term = [&](Eigen::Index r, Eigen::Index c) {
    if (r < 0 || c < 0 || r > dr || c > dc) throw Error(ErrorCode::DimensionMismatch, "dense_nll_loss: index out of range");
    const double s = probs(r, c);
    if (!(s > 0.0)) throw Error(ErrorCode::NonPositiveProbability, "dense_nll_loss: referenced probability <= 0");
    return -std::log(s);
  };
  double loss = 0.0;
  for (const auto& [x, y] : sup.matched) {
    if (static_cast<Eigen::Index>(x) >= dr || static_cast<Eigen::Index>(y) >= dc) {
      throw Error(ErrorCode::DimensionMismatch, "dense_nll_loss: matched index hits dustbin");
    }
    loss += term(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  }
  for (std::size_t x : sup.unmatched_p) loss += term(static_cast<Eigen::Index>(x), dc);
  for (std::size_t y : sup.unmatched_q) loss += term(dr, static_cast<Eigen::Index>(y));
  return loss;
}

inline double dense_nll_loss(const AssignmentMatrix& assign, const DenseSupervision& sup) {
  return dense_nll_loss(assign.probabilities(), sup);
}

/// Mean per-match loss over coarse matches. With `sample`, a seeded subset
/// of that many matches is used instead of all of them.
inline double dense_nll_loss(std::span<const AssignmentMatrix> assigns, std::span<const DenseSupervision> sups,
                             std::optional<std::size_t> sample = std::nullopt, std::uint64_t seed = 0) {
  if (assigns.size() != sups.size()) throw Error(ErrorCode::DimensionMismatch, "dense_nll_loss: group count mismatch");
  if (assigns.empty()) return 0.0;
  std::vector<std::size_t> idx(assigns.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (sample && *sample < idx.size()) {
    std::vector<std::size_t> chosen;
    std::mt19937_64 rng(seed);
    std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), static_cast<std::ptrdiff_t>(*sample), rng);
    idx = std::move(chosen);
  }
  if (idx.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i : idx) sum += dense_nll_loss(assigns[i], sups[i]);
  return sum / static_cast<double>(idx.size());
}

struct LossParts {
  double point = 0.0;
  double patch_image = 0.0;
  double dense = 0.0;
};

inline double total_loss(const LossParts& parts) {
  if (!std::isfinite(parts.point) || !std::isfinite(parts.patch_image) || !std::isfinite(parts.dense)) {
    throw Error(ErrorCode::NonFinite, "total_loss: non-finite part");
  }
  return parts.point + parts.patch_image + parts.dense;
}

}  // namespace coff
