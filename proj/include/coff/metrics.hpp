#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coff/error.hpp"
#include "coff/estimation.hpp"
#include "coff/geometry.hpp"

namespace coff {

/// Evaluation thresholds. Comparisons are strict: an inlier is closer than
/// ir_radius, a matched pair has IR above fmr_min_ir, a registered pair has
/// RMSE below rr_rmse.
struct MetricThresholds {
  double ir_radius = 0.10;
  double fmr_min_ir = 0.05;
  double rr_rmse = 0.2;
  std::size_t ir_sample = 5000;
};

struct PairEvaluation {
  std::string pair_id;
  double inlier_ratio = 0.0;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double re = std::numeric_limits<double>::quiet_NaN();
  double te = std::numeric_limits<double>::quiet_NaN();
  bool registered = false;
  std::size_t sampled_count = 0;
};

/// Fraction of correspondences with |R* p + t* - q| < radius. With `sample`
/// below the population size, a seeded uniform sample without replacement
/// is scored instead. Empty input scores 0.
inline double inlier_ratio(std::span<const Correspondence> corr, const RigidTransform& gt, double radius,
                           std::optional<std::size_t> sample = std::nullopt, std::uint64_t seed = 0,
                           std::size_t* sampled_count = nullptr) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "inlier_ratio: radius must be positive");
  if (sampled_count) *sampled_count = 0;
  if (corr.empty()) return 0.0;
  std::vector<std::size_t> idx(corr.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (sample && *sample < corr.size()) {
    std::vector<std::size_t> chosen;
    chosen.reserve(*sample);
    std::mt19937_64 rng(seed);
    std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), static_cast<std::ptrdiff_t>(*sample), rng);
    idx = std::move(chosen);
  }
  if (idx.empty()) return 0.0;
  const double r2 = radius * radius;
  std::size_t hits = 0;
  for (std::size_t i : idx)
    if ((gt(corr[i].p) - corr[i].q).squaredNorm() < r2) ++hits;
  if (sampled_count) *sampled_count = idx.size();
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

/// Fraction of pairs whose IR strictly exceeds tau.
inline double feature_match_recall(std::span<const double> irs, double tau) {
  if (irs.empty()) throw Error(ErrorCode::EmptyList, "feature_match_recall: no pairs");
  const auto n = std::count_if(irs.begin(), irs.end(), [tau](double ir) { return ir > tau; });
  return static_cast<double>(n) / static_cast<double>(irs.size());
}

/// Root mean squared residual of `est` over ground-truth correspondences.
inline double rmse(std::span<const Correspondence> gt_corr, const RigidTransform& est) {
  if (gt_corr.empty()) throw Error(ErrorCode::EmptyCorrespondences, "rmse: no ground-truth correspondences");
  double sum = 0.0;
  for (const auto& c : gt_corr) sum += (est(c.p) - c.q).squaredNorm();
  return std::sqrt(sum / static_cast<double>(gt_corr.size()));
}

/// Fraction of pairs with RMSE strictly below `accept`. NaN never counts.
inline double registration_recall(std::span<const double> rmses, double accept) {
  if (rmses.empty()) throw Error(ErrorCode::EmptyList, "registration_recall: no pairs");
  const auto n = std::count_if(rmses.begin(), rmses.end(), [accept](double r) { return r < accept; });
  return static_cast<double>(n) / static_cast<double>(rmses.size());
}

struct CurvePoint {
  double threshold = 0.0;
  double value = 0.0;
};

/// Fraction of values <= each grid threshold.
inline std::vector<CurvePoint> ecdf(std::span<const double> values, std::span<const double> grid) {
  if (values.empty()) throw Error(ErrorCode::EmptyList, "ecdf: no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CurvePoint> out;
  out.reserve(grid.size());
  for (double t : grid) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back({t, static_cast<double>(n) / static_cast<double>(sorted.size())});
  }
  return out;
}

/// Per-pair inputs to a threshold sweep.
struct SweepInput {
  std::vector<Correspondence> correspondences;  // estimated (fine) matches
  RigidTransform gt;
  double rmse = std::numeric_limits<double>::quiet_NaN();
};

struct SweepRow {
  std::string metric;
  double threshold = 0.0;
  double value = 0.0;
};

struct SweepGrids {
  std::vector<double> ir_radii;
  std::vector<double> min_irs;
  std::vector<double> rmse_thresholds;
};

inline SweepGrids default_sweep_grids() {
  SweepGrids g;
  for (int i = 1; i <= 20; ++i) g.ir_radii.push_back(0.01 * i);
  for (int i = 1; i <= 20; ++i) g.min_irs.push_back(0.01 * i);
  for (int i = 1; i <= 20; ++i) g.rmse_thresholds.push_back(0.025 * i);
  return g;
}

/// FMR as a function of the inlier radius (at the default minimum IR) and of
/// the minimum IR (at the default radius); RR as a function of the RMSE
/// threshold. IR is computed over the full correspondence set.
inline std::vector<SweepRow> threshold_sweep(std::span<const SweepInput> pairs, const SweepGrids& grids,
                                             const MetricThresholds& base = {}) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyList, "threshold_sweep: no pairs");
  std::vector<SweepRow> rows;
  std::vector<double> irs(pairs.size());
  for (double radius : grids.ir_radii) {
    for (std::size_t i = 0; i < pairs.size(); ++i) irs[i] = inlier_ratio(pairs[i].correspondences, pairs[i].gt, radius);
    rows.push_back({"fmr_vs_inlier_radius", radius, feature_match_recall(irs, base.fmr_min_ir)});
  }
  for (std::size_t i = 0; i < pairs.size(); ++i)
    irs[i] = inlier_ratio(pairs[i].correspondences, pairs[i].gt, base.ir_radius);
  for (double tau : grids.min_irs) rows.push_back({"fmr_vs_min_inlier_ratio", tau, feature_match_recall(irs, tau)});
  std::vector<double> rmses(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) rmses[i] = pairs[i].rmse;
  for (double t : grids.rmse_thresholds) rows.push_back({"rr_vs_rmse", t, registration_recall(rmses, t)});
  return rows;
}

/// Shortest decimal form that round-trips the double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline void write_metrics_csv(std::ostream& os, std::span<const PairEvaluation> evals) {
  os << "pair_id,ir,rmse,re_deg,te_m,registered\n";
  for (const auto& e : evals) {
    os << e.pair_id << ',' << format_number(e.inlier_ratio) << ',' << format_number(e.rmse) << ','
       << format_number(e.re) << ',' << format_number(e.te) << ',' << (e.registered ? 1 : 0) << '\n';
  }
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << "metric,threshold,value\n";
  for (const auto& r : rows) os << r.metric << ',' << format_number(r.threshold) << ',' << format_number(r.value) << '\n';
}

inline void write_curve_csv(std::ostream& os, std::span<const CurvePoint> curve) {
  os << "threshold,value\n";
  for (const auto& c : curve) os << format_number(c.threshold) << ',' << format_number(c.value) << '\n';
}

}  // namespace coff
