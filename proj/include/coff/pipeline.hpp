#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coff/error.hpp"
#include "coff/estimation.hpp"
#include "coff/features.hpp"
#include "coff/geometry.hpp"
#include "coff/io.hpp"
#include "coff/log.hpp"
#include "coff/matching.hpp"
#include "coff/metrics.hpp"
#include "coff/parallel.hpp"
#include "coff/sampling.hpp"
#include "coff/spatial_hash.hpp"

namespace coff {

inline constexpr std::size_t kDefaultImagesPerCloud = 3;

enum class PixelProvider { Auto, Color, Raster };

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::size_t images_per_cloud = kDefaultImagesPerCloud;
  SelectionStrategy::Kind selection = SelectionStrategy::Kind::Complement;
  PixelProvider pixel_provider = PixelProvider::Auto;
  bool use_pixel2d = true;
  bool use_patch2d = true;

  double base_voxel = 0.025;
  std::size_t num_levels = 4;
  double descriptor_radius = 0.1;
  double patch_radius = 0.1;
  std::size_t patch_cap = 64;
  std::uint64_t fusion_seed = 7;

  MatchConfig matching;
  EstimationConfig estimation;
  MetricThresholds metrics;
  double gt_match_radius = 0.05;     // dense GT correspondences and patch overlap
  double coarse_overlap_min = 0.10;  // a coarse match is correct above this patch overlap
};

namespace detail {

inline std::string selection_name(SelectionStrategy::Kind k) {
  switch (k) {
    case SelectionStrategy::Kind::Random: return "random";
    case SelectionStrategy::Kind::Mean: return "mean";
    case SelectionStrategy::Kind::Complement: return "complement";
  }
  return "complement";
}

inline SelectionStrategy::Kind parse_selection(const std::string& s) {
  if (s == "random") return SelectionStrategy::Kind::Random;
  if (s == "mean") return SelectionStrategy::Kind::Mean;
  if (s == "complement") return SelectionStrategy::Kind::Complement;
  throw Error(ErrorCode::InvalidArgument, "unknown selection strategy: " + s);
}

inline std::string provider_name(PixelProvider p) {
  switch (p) {
    case PixelProvider::Auto: return "auto";
    case PixelProvider::Color: return "color";
    case PixelProvider::Raster: return "raster";
  }
  return "auto";
}

inline PixelProvider parse_provider(const std::string& s) {
  if (s == "auto") return PixelProvider::Auto;
  if (s == "color") return PixelProvider::Color;
  if (s == "raster") return PixelProvider::Raster;
  throw Error(ErrorCode::InvalidArgument, "unknown pixel feature provider: " + s);
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::SchemaError, prefix + key);
  }
}

}  // namespace detail

/// Missing keys keep their defaults.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "<config root>");
  detail::read_opt(j, "seed", c.seed, "");
  detail::read_opt(j, "images_per_cloud", c.images_per_cloud, "");
  if (j.contains("selection")) c.selection = detail::parse_selection(j.at("selection").get<std::string>());
  if (j.contains("pixel_provider")) c.pixel_provider = detail::parse_provider(j.at("pixel_provider").get<std::string>());
  detail::read_opt(j, "use_pixel2d", c.use_pixel2d, "");
  detail::read_opt(j, "use_patch2d", c.use_patch2d, "");
  detail::read_opt(j, "base_voxel", c.base_voxel, "");
  detail::read_opt(j, "num_levels", c.num_levels, "");
  detail::read_opt(j, "descriptor_radius", c.descriptor_radius, "");
  detail::read_opt(j, "patch_radius", c.patch_radius, "");
  detail::read_opt(j, "patch_cap", c.patch_cap, "");
  detail::read_opt(j, "fusion_seed", c.fusion_seed, "");
  if (j.contains("matching")) {
    const auto& m = j.at("matching");
    detail::read_opt(m, "num_coarse", c.matching.num_coarse, "matching.");
    detail::read_opt(m, "topk", c.matching.topk, "matching.");
    detail::read_opt(m, "sinkhorn_iters", c.matching.sinkhorn_iters, "matching.");
    detail::read_opt(m, "dustbin_score", c.matching.dustbin_score, "matching.");
    detail::read_opt(m, "confidence_floor", c.matching.confidence_floor, "matching.");
    detail::read_opt(m, "dense_feature_norm", c.matching.dense_feature_norm, "matching.");
  }
  if (j.contains("estimation")) {
    const auto& e = j.at("estimation");
    detail::read_opt(e, "acceptance_radius", c.estimation.acceptance_radius, "estimation.");
    detail::read_opt(e, "refine_iters", c.estimation.refine_iters, "estimation.");
    detail::read_opt(e, "ransac_iters", c.estimation.ransac_iters, "estimation.");
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    detail::read_opt(m, "ir_radius", c.metrics.ir_radius, "metrics.");
    detail::read_opt(m, "fmr_min_ir", c.metrics.fmr_min_ir, "metrics.");
    detail::read_opt(m, "rr_rmse", c.metrics.rr_rmse, "metrics.");
    detail::read_opt(m, "ir_sample", c.metrics.ir_sample, "metrics.");
    detail::read_opt(m, "gt_match_radius", c.gt_match_radius, "metrics.");
    detail::read_opt(m, "coarse_overlap_min", c.coarse_overlap_min, "metrics.");
  }
  return c;
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["images_per_cloud"] = c.images_per_cloud;
  j["selection"] = detail::selection_name(c.selection);
  j["pixel_provider"] = detail::provider_name(c.pixel_provider);
  j["use_pixel2d"] = c.use_pixel2d;
  j["use_patch2d"] = c.use_patch2d;
  j["base_voxel"] = c.base_voxel;
  j["num_levels"] = c.num_levels;
  j["descriptor_radius"] = c.descriptor_radius;
  j["patch_radius"] = c.patch_radius;
  j["patch_cap"] = c.patch_cap;
  j["fusion_seed"] = c.fusion_seed;
  j["matching"] = {{"num_coarse", c.matching.num_coarse},
                   {"topk", c.matching.topk},
                   {"sinkhorn_iters", c.matching.sinkhorn_iters},
                   {"dustbin_score", c.matching.dustbin_score},
                   {"confidence_floor", c.matching.confidence_floor},
                   {"dense_feature_norm", c.matching.dense_feature_norm}};
  j["estimation"] = {{"acceptance_radius", c.estimation.acceptance_radius},
                     {"refine_iters", c.estimation.refine_iters},
                     {"ransac_iters", c.estimation.ransac_iters}};
  j["metrics"] = {{"ir_radius", c.metrics.ir_radius},
                  {"fmr_min_ir", c.metrics.fmr_min_ir},
                  {"rr_rmse", c.metrics.rr_rmse},
                  {"ir_sample", c.metrics.ir_sample},
                  {"gt_match_radius", c.gt_match_radius},
                  {"coarse_overlap_min", c.coarse_overlap_min}};
  return j;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(io::detail::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

/// Everything computed from one cloud before matching.
struct PreparedCloud {
  HierarchicalCloud hierarchy;
  std::vector<SuperpointPatch> patches;
  FeatureMatrix dense_features;  // dense level
  FeatureMatrix super_features;  // stage-one fused superpoint features
  FeatureMatrix patch_features;  // patch-wise image features per superpoint
  FeatureMatrix fused;           // stage-two output used for coarse matching
  std::size_t images_used = 0;
};

/// Keeps the `count` images whose cameras are closest to the cloud origin.
inline std::vector<PosedImage> select_images(std::vector<PosedImage> images, std::size_t count) {
  if (images.size() <= count) return images;
  const auto order = rank_images_by_proximity(Point3::Zero(), images);
  std::vector<PosedImage> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(std::move(images[order[k]]));
  return out;
}

inline PreparedCloud prepare_cloud(std::span<const Point3> points, std::vector<PosedImage> images,
                                   const PipelineConfig& cfg, std::uint64_t seed) {
  PreparedCloud pc;
  pc.hierarchy = build_hierarchy(points, cfg.base_voxel, cfg.num_levels);
  const auto& h = pc.hierarchy;
  images = select_images(std::move(images), cfg.images_per_cloud);
  if (cfg.pixel_provider == PixelProvider::Color) {
    for (auto& img : images) img.feature_map.reset();
  } else if (cfg.pixel_provider == PixelProvider::Raster) {
    for (const auto& img : images)
      if (!img.feature_map) throw Error(ErrorCode::InvalidArgument, "raster provider selected but an image has no raster");
  }
  pc.images_used = images.size();

  const std::size_t geo_dim = kFusedFeatureDim - kPixelFeatureDim;
  const FeatureMatrix geo = point_descriptor(h, 0, cfg.descriptor_radius, geo_dim);
  FeatureMatrix pixel{FeatureRole::Pixel2D,
                      FeatureRows::Ones(static_cast<Eigen::Index>(points.size()),
                                        static_cast<Eigen::Index>(kPixelFeatureDim)),
                      std::vector<std::uint8_t>(points.size(), 0)};
  if (cfg.use_pixel2d && !images.empty()) {
    pixel = pixelwise_features(h.levels[0].points, images, SelectionStrategy{cfg.selection, seed}, kPixelFeatureDim);
  }
  pc.dense_features = fuse_stage1(geo, pixel, h, h.dense_level());
  pc.super_features = fuse_stage1(geo, pixel, h, h.superpoint_level());
  pc.patches = point_to_node_group(h.dense(), h.superpoints(), cfg.patch_cap);

  const std::size_t n_super = h.superpoints().size();
  pc.patch_features = FeatureMatrix::zeros(FeatureRole::Patch2D, n_super, kPatchFeatureDim);
  std::fill(pc.patch_features.valid.begin(), pc.patch_features.valid.end(), 0);
  if (cfg.use_patch2d) {
    if (!images.empty()) {
      const SpatialHash raw(h.levels[0].points, cfg.patch_radius);
      for (std::size_t s = 0; s < n_super; ++s) {
        const auto patch = extract_patch(h.superpoints()[s], raw, images, cfg.patch_radius, kPatchSize);
        if (!patch) continue;
        pc.patch_features.rows.row(static_cast<Eigen::Index>(s)) =
            patch_descriptor(patch->raster, kPatchFeatureDim).transpose();
        pc.patch_features.valid[s] = 1;
      }
    }
    const FusionMap map = FusionMap::seeded(kPointFeatureDim, kPatchFeatureDim, kFusedFeatureDim, cfg.fusion_seed);
    pc.fused = fuse_stage2(pc.super_features, pc.patch_features, map);
  } else {
    pc.fused = pc.super_features;
    pc.fused.role = FeatureRole::Fused;
  }
  return pc;
}

/// Dense points of P whose GT image has a dense Q point within `radius`,
/// paired with that image. Falls back to every dense point when the overlap
/// is empty so that RMSE stays defined.
inline std::vector<Correspondence> gt_correspondences(std::span<const Point3> dense_p, std::span<const Point3> dense_q,
                                                      const RigidTransform& gt, double radius) {
  std::vector<Correspondence> out;
  const SpatialHash qh(dense_q, radius);
  for (const auto& p : dense_p) {
    const Point3 t = gt(p);
    if (qh.any_within(t, radius)) out.push_back({p, t, 1.0});
  }
  if (out.empty())
    for (const auto& p : dense_p) out.push_back({p, gt(p), 1.0});
  return out;
}

struct PairOutcome {
  PairEvaluation eval;
  std::optional<RigidTransform> transform;
  RigidTransform gt;
  double coarse_inlier_ratio = 0.0;
  std::size_t coarse_count = 0;
  std::size_t fine_count = 0;
  std::size_t inlier_count = 0;
  std::vector<Correspondence> correspondences;  // estimated fine matches
  std::string error;                            // empty on success
  double seconds = 0.0;

  bool ok() const { return error.empty(); }
};

/// Matches two prepared clouds, estimates the transform and scores it.
inline PairOutcome register_prepared(const PreparedCloud& p, const PreparedCloud& q, const RigidTransform& gt,
                                     const PipelineConfig& cfg, std::uint64_t seed) {
  PairOutcome out;
  out.gt = gt;
  const auto& dp = p.hierarchy.dense();
  const auto& dq = q.hierarchy.dense();

  const PairMatches matches =
      match_pair(p.fused, q.fused, p.patches, q.patches, p.dense_features, q.dense_features, cfg.matching);
  out.coarse_count = matches.coarse.pairs.size();
  std::size_t coarse_hits = 0;
  for (const auto& cm : matches.coarse.pairs) {
    if (patch_overlap_ratio(p.patches[cm.super_p], dp, q.patches[cm.super_q], dq, gt, cfg.gt_match_radius) >
        cfg.coarse_overlap_min) {
      ++coarse_hits;
    }
  }
  out.coarse_inlier_ratio =
      out.coarse_count == 0 ? 0.0 : static_cast<double>(coarse_hits) / static_cast<double>(out.coarse_count);
  out.correspondences = to_correspondences(matches.fine, dp, dq);
  out.fine_count = out.correspondences.size();

  std::size_t sampled = 0;
  out.eval.inlier_ratio =
      inlier_ratio(out.correspondences, gt, cfg.metrics.ir_radius, cfg.metrics.ir_sample, seed, &sampled);
  out.eval.sampled_count = sampled;

  EstimationConfig est = cfg.estimation;
  est.seed = seed;
  const RegistrationResult reg = lgr(matches.fine, dp, dq, est);
  out.transform = reg.transform;
  out.inlier_count = reg.inlier_indices.size();

  const auto gt_corr = gt_correspondences(dp, dq, gt, cfg.gt_match_radius);
  out.eval.rmse = rmse(gt_corr, reg.transform);
  out.eval.re = rotation_error(reg.transform, gt);
  out.eval.te = translation_error(reg.transform, gt);
  out.eval.registered = out.eval.rmse < cfg.metrics.rr_rmse;
  return out;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Loads, prepares and registers pair `index` of the manifest. Failures are
/// captured in the outcome rather than thrown.
inline PairOutcome register_pair(const io::DatasetManifest& manifest, std::size_t index, const PipelineConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto& pair = manifest.pairs.at(index);
  const std::uint64_t seed = derive_seed(cfg.seed, index);
  PairOutcome out;
  out.eval.pair_id = pair.id;
  try {
    const RigidTransform gt = RigidTransform::from_matrix(pair.gt);
    out.gt = gt;
    auto load = [&](const std::string& id, std::uint64_t s) {
      const auto& entry = manifest.clouds.at(id);
      const auto cloud = io::load_cloud(manifest.resolve(entry.cloud));
      std::vector<PosedImage> images;
      if ((cfg.use_pixel2d || cfg.use_patch2d) && cfg.images_per_cloud > 0) images = io::load_posed_images(manifest, entry);
      return prepare_cloud(cloud.points, std::move(images), cfg, s);
    };
    const PreparedCloud p = load(pair.cloud_p, seed);
    const PreparedCloud q = load(pair.cloud_q, seed + 1);
    PairOutcome scored = register_prepared(p, q, gt, cfg, seed);
    scored.eval.pair_id = pair.id;
    out = std::move(scored);
  } catch (const std::exception& e) {
    out.error = e.what();
    out.eval.inlier_ratio = 0.0;
    out.eval.registered = false;
    log::warn("pair ", pair.id, " failed: ", e.what());
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log::info("pair ", pair.id, ": ir=", out.eval.inlier_ratio, " rmse=", out.eval.rmse, " (", out.seconds, " s)");
  return out;
}

struct RunSummary {
  std::size_t pairs = 0;
  std::size_t failures = 0;
  double fmr = 0.0;
  double rr = 0.0;
  double mean_ir = 0.0;
  double mean_coarse_ir = 0.0;
  double median_coarse_ir = 0.0;
  double median_re = std::numeric_limits<double>::quiet_NaN();  // over registered pairs
  double median_te = std::numeric_limits<double>::quiet_NaN();
};

struct RunReport {
  std::vector<PairOutcome> outcomes;  // manifest pair order
  RunSummary summary;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline RunSummary summarize(std::span<const PairOutcome> outcomes, const MetricThresholds& th) {
  RunSummary s;
  s.pairs = outcomes.size();
  if (outcomes.empty()) return s;
  std::vector<double> irs, rmses, cirs, res, tes;
  for (const auto& o : outcomes) {
    if (!o.ok()) ++s.failures;
    irs.push_back(o.eval.inlier_ratio);
    rmses.push_back(o.eval.rmse);
    cirs.push_back(o.coarse_inlier_ratio);
    if (o.eval.registered) {
      res.push_back(o.eval.re);
      tes.push_back(o.eval.te);
    }
  }
  s.fmr = feature_match_recall(irs, th.fmr_min_ir);
  s.rr = registration_recall(rmses, th.rr_rmse);
  for (double v : irs) s.mean_ir += v / static_cast<double>(irs.size());
  for (double v : cirs) s.mean_coarse_ir += v / static_cast<double>(cirs.size());
  s.median_coarse_ir = median_of(cirs);
  s.median_re = median_of(res);
  s.median_te = median_of(tes);
  return s;
}

/// Registers every manifest pair on `jobs` workers. Results are ordered by
/// pair index and depend only on (manifest, config).
inline RunReport run_register(const io::DatasetManifest& manifest, const PipelineConfig& cfg, std::size_t jobs = 1) {
  RunReport report;
  report.outcomes.resize(manifest.pairs.size());
  parallel_for(manifest.pairs.size(), jobs, [&](std::size_t i) { report.outcomes[i] = register_pair(manifest, i, cfg); });
  report.summary = summarize(report.outcomes, cfg.metrics);
  return report;
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"pairs", s.pairs},         {"failures", s.failures},
          {"fmr", s.fmr},             {"rr", s.rr},
          {"mean_ir", s.mean_ir},     {"mean_coarse_ir", s.mean_coarse_ir},
          {"median_coarse_ir", s.median_coarse_ir},
          {"median_re_deg", num(s.median_re)}, {"median_te_m", num(s.median_te)}};
}

/// metrics.csv, results.json, summary.json and ECDF curves of RE/TE/RMSE.
inline void write_run_outputs(const std::filesystem::path& out_dir, const RunReport& report, const PipelineConfig& cfg) {
  std::vector<PairEvaluation> evals;
  for (const auto& o : report.outcomes) evals.push_back(o.eval);
  io::save_metrics_csv(out_dir / "metrics.csv", evals);

  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json results = nlohmann::json::array();
  for (const auto& o : report.outcomes) {
    nlohmann::json r;
    r["pair_id"] = o.eval.pair_id;
    r["transform"] = o.transform ? io::detail::matrix_to_json(o.transform->matrix()) : nlohmann::json(nullptr);
    r["inlier_ratio"] = o.eval.inlier_ratio;
    r["ir_sampled"] = o.eval.sampled_count;
    r["rmse"] = num(o.eval.rmse);
    r["re_deg"] = num(o.eval.re);
    r["te_m"] = num(o.eval.te);
    r["registered"] = o.eval.registered;
    r["coarse_inlier_ratio"] = o.coarse_inlier_ratio;
    r["coarse_matches"] = o.coarse_count;
    r["fine_matches"] = o.fine_count;
    r["lgr_inliers"] = o.inlier_count;
    if (!o.ok()) r["error"] = o.error;
    results.push_back(std::move(r));
  }
  io::detail::write_file(out_dir / "results.json", results.dump(2) + "\n");

  nlohmann::json summary = summary_to_json(report.summary);
  summary["config"] = config_to_json(cfg);
  io::detail::write_file(out_dir / "summary.json", summary.dump(2) + "\n");

  auto curve = [&](const char* name, std::vector<double> values, std::vector<double> grid) {
    for (auto& v : values)
      if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    if (values.empty()) return;
    std::ostringstream os;
    write_curve_csv(os, ecdf(values, grid));
    io::detail::write_file(out_dir / name, os.str());
  };
  std::vector<double> re, te, rm, gre, gte, grm;
  for (const auto& o : report.outcomes) {
    re.push_back(o.eval.re);
    te.push_back(o.eval.te);
    rm.push_back(o.eval.rmse);
  }
  for (int i = 1; i <= 30; ++i) gre.push_back(0.5 * i);
  for (int i = 1; i <= 30; ++i) gte.push_back(0.01 * i);
  for (int i = 1; i <= 30; ++i) grm.push_back(0.01 * i);
  curve("ecdf_re.csv", re, gre);
  curve("ecdf_te.csv", te, gte);
  curve("ecdf_rmse.csv", rm, grm);
}

// ---------------------------------------------------------------------------
// Ablations

struct AblationRow {
  std::string axis;
  std::string setting;
  PipelineConfig config;
  RunSummary summary;
};

inline std::vector<std::pair<std::string, PipelineConfig>> ablation_cells(const std::string& axis,
                                                                          const PipelineConfig& base) {
  std::vector<std::pair<std::string, PipelineConfig>> cells;
  if (axis == "features") {
    const std::pair<const char*, std::pair<bool, bool>> rows[] = {
        {"3d_only", {false, false}}, {"3d+pixel2d", {true, false}}, {"3d+patch2d", {false, true}}, {"3d+both", {true, true}}};
    for (const auto& [name, flags] : rows) {
      PipelineConfig c = base;
      c.use_pixel2d = flags.first;
      c.use_patch2d = flags.second;
      cells.emplace_back(name, c);
    }
  } else if (axis == "selection") {
    for (auto k : {SelectionStrategy::Kind::Random, SelectionStrategy::Kind::Mean, SelectionStrategy::Kind::Complement}) {
      PipelineConfig c = base;
      c.selection = k;
      cells.emplace_back(detail::selection_name(k), c);
    }
  } else if (axis == "num_images") {
    for (std::size_t n = 0; n <= 5; ++n) {
      PipelineConfig c = base;
      c.images_per_cloud = n;
      cells.emplace_back(std::to_string(n), c);
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown ablation axis: " + axis);
  }
  return cells;
}

inline std::vector<AblationRow> run_ablation(const io::DatasetManifest& manifest, std::span<const std::string> axes,
                                             const PipelineConfig& base, std::size_t jobs = 1) {
  std::vector<AblationRow> rows;
  for (const auto& axis : axes) {
    for (auto& [name, cfg] : ablation_cells(axis, base)) {
      log::info("ablation ", axis, "=", name);
      const RunReport rep = run_register(manifest, cfg, jobs);
      rows.push_back({axis, name, cfg, rep.summary});
    }
  }
  return rows;
}

inline void write_ablation_csv(std::ostream& os, std::span<const AblationRow> rows) {
  os << "axis,setting,pairs,failures,fmr,rr,mean_ir,mean_coarse_ir,median_re_deg,median_te_m\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    os << r.axis << ',' << r.setting << ',' << s.pairs << ',' << s.failures << ',' << format_number(s.fmr) << ','
       << format_number(s.rr) << ',' << format_number(s.mean_ir) << ',' << format_number(s.mean_coarse_ir) << ','
       << format_number(s.median_re) << ',' << format_number(s.median_te) << '\n';
  }
}

/// Threshold sweep inputs from a finished run; failed pairs contribute no
/// correspondences and an undefined RMSE.
inline std::vector<SweepInput> sweep_inputs(const RunReport& report) {
  std::vector<SweepInput> in;
  for (const auto& o : report.outcomes) in.push_back({o.correspondences, o.gt, o.eval.rmse});
  return in;
}

}  // namespace coff
