#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "coff/error.hpp"
#include "coff/features.hpp"
#include "coff/sampling.hpp"

namespace coff {

struct ScoreMatrix {
  Eigen::MatrixXd entries;
  bool normalized = false;
};

struct CoarseMatch {
  std::size_t super_p = 0;
  std::size_t super_q = 0;
  double score = 0.0;
};

struct CoarseMatches {
  std::vector<CoarseMatch> pairs;  // descending score
  std::size_t capacity = 0;
};

/// Log-space assignment with a trailing dustbin row and column.
struct AssignmentMatrix {
  Eigen::MatrixXd log_assign;

  Eigen::Index inner_rows() const { return log_assign.rows() - 1; }
  Eigen::Index inner_cols() const { return log_assign.cols() - 1; }
  Eigen::MatrixXd probabilities() const { return log_assign.array().exp().matrix(); }
};

struct FineMatch {
  std::size_t dense_p = 0;
  std::size_t dense_q = 0;
  double confidence = 0.0;
};

/// Fine correspondences grouped by parent coarse match; Omega^f is the union.
struct FineMatches {
  std::vector<std::vector<FineMatch>> groups;

  std::vector<FineMatch> flatten() const {
    std::vector<FineMatch> all;
    for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
    return all;
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }
};

struct MatchConfig {
  std::size_t num_coarse = 256;
  std::size_t topk = 3;
  std::size_t sinkhorn_iters = 100;
  double dustbin_score = 0.5;
  double confidence_floor = 0.05;
  // Dense unit features are scaled to this norm before S_l = F_P F_Q^T / sqrt(c);
  // sqrt(256) makes the logits equal to sqrt(c) times the cosine similarity.
  double dense_feature_norm = 16.0;
};

/// S(i,j) = exp(-|fp_i - fq_j|^2).
inline ScoreMatrix gaussian_correlation(const FeatureMatrix& fp, const FeatureMatrix& fq) {
  if (fp.dim() != fq.dim()) throw Error(ErrorCode::DimensionMismatch, "gaussian_correlation: feature dims differ");
  const Eigen::Index n = fp.rows.rows(), m = fq.rows.rows(), d = fp.rows.cols();
  ScoreMatrix s{Eigen::MatrixXd(n, m), false};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double d2 = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = fp.rows(i, k) - fq.rows(j, k);
        d2 += diff * diff;
      }
      s.entries(i, j) = std::exp(-d2);
    }
  }
  return s;
}

/// Product of the row-stochastic and column-stochastic normalizations:
/// S'(i,j) = S(i,j)^2 / (sum_k S(i,k) * sum_k S(k,j)).
inline ScoreMatrix dual_normalize(const ScoreMatrix& s) {
  const Eigen::VectorXd row_sum = s.entries.rowwise().sum();
  const Eigen::RowVectorXd col_sum = s.entries.colwise().sum();
  ScoreMatrix out{Eigen::MatrixXd(s.entries.rows(), s.entries.cols()), true};
  for (Eigen::Index i = 0; i < s.entries.rows(); ++i)
    for (Eigen::Index j = 0; j < s.entries.cols(); ++j)
      out.entries(i, j) = s.entries(i, j) * s.entries(i, j) / (row_sum(i) * col_sum(j));
  return out;
}

/// Global top-n_c entries, descending; ties by (row, col).
inline CoarseMatches select_coarse(const ScoreMatrix& s, std::size_t n_c) {
  if (n_c < 1) throw Error(ErrorCode::InvalidArgument, "select_coarse: n_c must be >= 1");
  std::vector<CoarseMatch> all;
  all.reserve(static_cast<std::size_t>(s.entries.size()));
  for (Eigen::Index i = 0; i < s.entries.rows(); ++i)
    for (Eigen::Index j = 0; j < s.entries.cols(); ++j)
      all.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), s.entries(i, j)});
  auto better = [](const CoarseMatch& a, const CoarseMatch& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.super_p, a.super_q) < std::tie(b.super_p, b.super_q);
  };
  const std::size_t keep = std::min(n_c, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
  all.resize(keep);
  return {std::move(all), n_c};
}

namespace detail {

inline double logsumexp(const double* v, Eigen::Index n, Eigen::Index stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) mx = std::max(mx, v[k * stride]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) s += std::exp(v[k * stride] - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// Log-space Sinkhorn on the dustbin-augmented score matrix. Row marginals
/// are (1, ..., 1, m_q), column marginals (1, ..., 1, m_p).
inline AssignmentMatrix sinkhorn(const Eigen::MatrixXd& logits, double dustbin_score, std::size_t iters) {
  if (iters < 1) throw Error(ErrorCode::InvalidArgument, "sinkhorn: iters must be >= 1");
  if (!logits.allFinite() || !std::isfinite(dustbin_score)) {
    throw Error(ErrorCode::NonFinite, "sinkhorn: logits must be finite");
  }
  const Eigen::Index mp = logits.rows(), mq = logits.cols();
  // Column-major storage: columns are contiguous.
  Eigen::MatrixXd z = Eigen::MatrixXd::Constant(mp + 1, mq + 1, dustbin_score);
  z.topLeftCorner(mp, mq) = logits;

  Eigen::VectorXd log_mu = Eigen::VectorXd::Zero(mp + 1);
  Eigen::VectorXd log_nu = Eigen::VectorXd::Zero(mq + 1);
  log_mu(mp) = std::log(static_cast<double>(std::max<Eigen::Index>(mq, 1)));
  log_nu(mq) = std::log(static_cast<double>(std::max<Eigen::Index>(mp, 1)));
  if (mq == 0) log_mu(mp) = -std::numeric_limits<double>::infinity();
  if (mp == 0) log_nu(mq) = -std::numeric_limits<double>::infinity();

  Eigen::VectorXd u = Eigen::VectorXd::Zero(mp + 1);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mq + 1);
  Eigen::MatrixXd tmp(mp + 1, mq + 1);
  for (std::size_t it = 0; it < iters; ++it) {
    tmp = z.rowwise() + v.transpose();
    for (Eigen::Index i = 0; i <= mp; ++i) u(i) = log_mu(i) - detail::logsumexp(&tmp(i, 0), mq + 1, tmp.rows());
    tmp = z.colwise() + u;
    for (Eigen::Index j = 0; j <= mq; ++j) v(j) = log_nu(j) - detail::logsumexp(&tmp(0, j), mp + 1, 1);
  }
  AssignmentMatrix out;
  out.log_assign = (z.colwise() + u).rowwise() + v.transpose();
  return out;
}

/// Keeps (i, j) when j is in row i's top-k and i in column j's top-k (dustbin
/// excluded) and the assignment probability is at least `confidence_floor`.
/// Ties inside a top-k list go to the lower index. Output sorted by (i, j).
inline std::vector<FineMatch> mutual_topk(const AssignmentMatrix& assign, std::size_t k, double confidence_floor) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "mutual_topk: k must be >= 1");
  const Eigen::Index rows = assign.inner_rows(), cols = assign.inner_cols();
  const auto& a = assign.log_assign;
  std::vector<std::uint8_t> in_row(static_cast<std::size_t>(rows * cols), 0);
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < rows; ++i) {
    idx.resize(static_cast<std::size_t>(cols));
    for (Eigen::Index j = 0; j < cols; ++j) idx[static_cast<std::size_t>(j)] = j;
    const auto kk = std::min<std::size_t>(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                      [&](Eigen::Index x, Eigen::Index y) { return a(i, x) != a(i, y) ? a(i, x) > a(i, y) : x < y; });
    for (std::size_t t = 0; t < kk; ++t) in_row[static_cast<std::size_t>(i * cols + idx[t])] = 1;
  }
  std::vector<FineMatch> out;
  for (Eigen::Index j = 0; j < cols; ++j) {
    idx.resize(static_cast<std::size_t>(rows));
    for (Eigen::Index i = 0; i < rows; ++i) idx[static_cast<std::size_t>(i)] = i;
    const auto kk = std::min<std::size_t>(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                      [&](Eigen::Index x, Eigen::Index y) { return a(x, j) != a(y, j) ? a(x, j) > a(y, j) : x < y; });
    for (std::size_t t = 0; t < kk; ++t) {
      const Eigen::Index i = idx[t];
      if (!in_row[static_cast<std::size_t>(i * cols + j)]) continue;
      const double conf = std::exp(a(i, j));
      if (conf >= confidence_floor) {
        out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), conf});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const FineMatch& x, const FineMatch& y) {
    return std::tie(x.dense_p, x.dense_q) < std::tie(y.dense_p, y.dense_q);
  });
  return out;
}

/// Hook applied to superpoint features before correlation. The attention
/// refinement of learned pipelines is not modeled; the default is identity.
using FeatureRefiner = std::function<void(FeatureMatrix&, FeatureMatrix&)>;

struct PairMatches {
  CoarseMatches coarse;
  FineMatches fine;  // dense indices refer to the dense level of each cloud
};

/// Coarse superpoint matching followed by per-pair fine matching inside the
/// matched patches. One fine group per coarse match (possibly empty).
inline PairMatches match_pair(const FeatureMatrix& fused_p, const FeatureMatrix& fused_q,
                              std::span<const SuperpointPatch> patches_p, std::span<const SuperpointPatch> patches_q,
                              const FeatureMatrix& dense_p, const FeatureMatrix& dense_q, const MatchConfig& cfg,
                              const FeatureRefiner& refine = {}) {
  if (fused_p.size() != patches_p.size() || fused_q.size() != patches_q.size()) {
    throw Error(ErrorCode::DimensionMismatch, "match_pair: patch count must equal superpoint count");
  }
  if (dense_p.dim() != dense_q.dim()) throw Error(ErrorCode::DimensionMismatch, "match_pair: dense dims differ");

  PairMatches result;
  {
    FeatureMatrix fp = fused_p, fq = fused_q;
    if (refine) refine(fp, fq);
    result.coarse = select_coarse(dual_normalize(gaussian_correlation(fp, fq)), cfg.num_coarse);
  }

  const double c = static_cast<double>(dense_p.dim());
  const double scale2 = cfg.dense_feature_norm * cfg.dense_feature_norm / std::sqrt(c);
  result.fine.groups.resize(result.coarse.pairs.size());
  Eigen::MatrixXd fp_block, fq_block;
  for (std::size_t g = 0; g < result.coarse.pairs.size(); ++g) {
    const auto& cm = result.coarse.pairs[g];
    const auto& mp = patches_p[cm.super_p].member_indices;
    const auto& mq = patches_q[cm.super_q].member_indices;
    if (mp.empty() || mq.empty()) continue;
    fp_block.resize(static_cast<Eigen::Index>(mp.size()), dense_p.rows.cols());
    fq_block.resize(static_cast<Eigen::Index>(mq.size()), dense_q.rows.cols());
    for (std::size_t a = 0; a < mp.size(); ++a)
      fp_block.row(static_cast<Eigen::Index>(a)) = dense_p.rows.row(static_cast<Eigen::Index>(mp[a]));
    for (std::size_t b = 0; b < mq.size(); ++b)
      fq_block.row(static_cast<Eigen::Index>(b)) = dense_q.rows.row(static_cast<Eigen::Index>(mq[b]));
    const Eigen::MatrixXd logits = scale2 * (fp_block * fq_block.transpose());
    const auto assign = sinkhorn(logits, cfg.dustbin_score, cfg.sinkhorn_iters);
    auto local = mutual_topk(assign, cfg.topk, cfg.confidence_floor);
    auto& group = result.fine.groups[g];
    group.reserve(local.size());
    for (const auto& m : local) group.push_back({mp[m.dense_p], mq[m.dense_q], m.confidence});
  }
  return result;
}

}  // namespace coff
