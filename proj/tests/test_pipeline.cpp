#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "coff/coff.hpp"

namespace coff {
namespace {

namespace fs = std::filesystem;

std::vector<PosedImage> posed(const synth::SyntheticCloud& c) {
  std::vector<PosedImage> out;
  for (std::size_t k = 0; k < c.images.size(); ++k) out.push_back({c.images[k], c.cameras[k], std::nullopt});
  return out;
}

synth::GeneratorParams small_params() {
  synth::GeneratorParams prm;
  prm.num_pairs = 3;
  prm.images_per_cloud = 3;
  prm.image_width = 80;
  prm.image_height = 60;
  prm.focal = 55.0;
  return prm;
}

TEST(ConfigDefaults, TrainingAndEvaluationConstants) {
  const PipelineConfig c;
  EXPECT_DOUBLE_EQ(c.metrics.ir_radius, 0.10);
  EXPECT_DOUBLE_EQ(c.metrics.fmr_min_ir, 0.05);
  EXPECT_DOUBLE_EQ(c.metrics.rr_rmse, 0.2);
  EXPECT_EQ(c.metrics.ir_sample, 5000u);
  EXPECT_EQ(c.images_per_cloud, 3u);
  EXPECT_EQ(kPixelFeatureDim, 128u);
  EXPECT_EQ(kPatchFeatureDim, 256u);
  EXPECT_EQ(kPointFeatureDim, 256u);
  EXPECT_EQ(kPatchSize, 64);
  EXPECT_EQ(c.matching.num_coarse, 256u);
  EXPECT_EQ(c.matching.topk, 3u);
  EXPECT_EQ(c.matching.sinkhorn_iters, 100u);
  EXPECT_DOUBLE_EQ(c.estimation.acceptance_radius, 0.10);
  EXPECT_EQ(c.selection, SelectionStrategy::Kind::Complement);
  EXPECT_TRUE(c.use_pixel2d && c.use_patch2d);
}

TEST(ConfigJson, RoundTripAndPartialOverrides) {
  PipelineConfig c;
  c.seed = 9;
  c.images_per_cloud = 2;
  c.selection = SelectionStrategy::Kind::Mean;
  c.use_patch2d = false;
  c.matching.topk = 5;
  c.estimation.acceptance_radius = 0.2;
  c.metrics.rr_rmse = 0.3;
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));

  const auto partial = config_from_json(nlohmann::json::parse(R"({"selection": "random", "matching": {"topk": 1}})"));
  EXPECT_EQ(partial.selection, SelectionStrategy::Kind::Random);
  EXPECT_EQ(partial.matching.topk, 1u);
  EXPECT_EQ(partial.matching.num_coarse, 256u);
  EXPECT_EQ(partial.images_per_cloud, 3u);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"selection": "best"})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"seed": "x"})")), Error);
}

TEST(SelectImages, KeepsClosestCameras) {
  const auto pair = synth::make_pair(synth::SceneKind::TexturedPlane, small_params(), 1);
  auto imgs = posed(pair.p);
  const auto kept = select_images(imgs, 2);
  ASSERT_EQ(kept.size(), 2u);
  const auto order = rank_images_by_proximity(Point3::Zero(), imgs);
  EXPECT_EQ(kept[0].camera.center(), imgs[order[0]].camera.center());
  EXPECT_EQ(kept[1].camera.center(), imgs[order[1]].camera.center());
  EXPECT_EQ(select_images(imgs, 10).size(), imgs.size());
}

TEST(Pipeline, SelfPairRegisters) {
  const auto pair = synth::make_pair(synth::SceneKind::TexturedPlane, small_params(), 2);
  const PipelineConfig cfg;
  const auto p = prepare_cloud(pair.p.points, posed(pair.p), cfg, 1);
  const auto out = register_prepared(p, p, RigidTransform{}, cfg, 1);
  // Top-3 fine matching on a repeating texture also pairs look-alike
  // neighbours, so recovery is close but not exact.
  EXPECT_TRUE(out.eval.registered);
  EXPECT_LT(out.eval.re, 0.01);
  EXPECT_LT(out.eval.te, 1e-3);
  EXPECT_LT(out.eval.rmse, 1e-3);
  EXPECT_GT(out.eval.inlier_ratio, 0.5);
  std::size_t identical = 0;
  for (const auto& c : out.correspondences) identical += c.p == c.q;
  EXPECT_GT(identical, out.correspondences.size() / 10);  // at most about a third with top-3
}

TEST(Pipeline, DisabledImageFeaturesIgnoreImages) {
  const auto pair = synth::make_pair(synth::SceneKind::Cluttered, small_params(), 3);
  PipelineConfig off;
  off.use_pixel2d = false;
  off.use_patch2d = false;
  PipelineConfig none = off;
  none.images_per_cloud = 0;
  const auto a = prepare_cloud(pair.p.points, posed(pair.p), off, 5);
  const auto b = prepare_cloud(pair.p.points, {}, none, 5);
  EXPECT_EQ(a.fused.rows, b.fused.rows);
  EXPECT_EQ(a.dense_features.rows, b.dense_features.rows);
  const auto qa = prepare_cloud(pair.q.points, posed(pair.q), off, 6);
  const auto qb = prepare_cloud(pair.q.points, {}, none, 6);
  const auto ra = register_prepared(a, qa, pair.gt, off, 5);
  const auto rb = register_prepared(b, qb, pair.gt, none, 5);
  EXPECT_EQ(ra.transform->matrix(), rb.transform->matrix());
  EXPECT_EQ(ra.eval.inlier_ratio, rb.eval.inlier_ratio);
}

TEST(Pipeline, FeatureFlagsAreIndependent) {
  const auto pair = synth::make_pair(synth::SceneKind::TexturedPlane, small_params(), 4);
  PipelineConfig base;
  PipelineConfig pixel_only = base;
  pixel_only.use_patch2d = false;
  PipelineConfig patch_only = base;
  patch_only.use_pixel2d = false;
  const auto both = prepare_cloud(pair.p.points, posed(pair.p), base, 1);
  const auto px = prepare_cloud(pair.p.points, posed(pair.p), pixel_only, 1);
  const auto pt = prepare_cloud(pair.p.points, posed(pair.p), patch_only, 1);
  // The pixel flag changes only the stage-one features; the patch flag only stage two.
  EXPECT_EQ(both.super_features.rows, px.super_features.rows);
  EXPECT_NE(both.super_features.rows, pt.super_features.rows);
  EXPECT_EQ(px.fused.rows, px.super_features.rows);
  EXPECT_EQ(both.patch_features.rows, pt.patch_features.rows);
  EXPECT_GT(std::count(both.patch_features.valid.begin(), both.patch_features.valid.end(), 1), 0);
}

TEST(Pipeline, RasterProviderRequiresRasters) {
  const auto pair = synth::make_pair(synth::SceneKind::TexturedPlane, small_params(), 5);
  PipelineConfig cfg;
  cfg.pixel_provider = PixelProvider::Raster;
  EXPECT_THROW(prepare_cloud(pair.p.points, posed(pair.p), cfg, 1), Error);
}

TEST(Ablation, CellStructure) {
  const PipelineConfig base;
  auto names = [&](const std::string& axis) {
    std::vector<std::string> out;
    for (const auto& [n, c] : ablation_cells(axis, base)) out.push_back(n);
    return out;
  };
  EXPECT_EQ(names("features"), (std::vector<std::string>{"3d_only", "3d+pixel2d", "3d+patch2d", "3d+both"}));
  EXPECT_EQ(names("selection"), (std::vector<std::string>{"random", "mean", "complement"}));
  EXPECT_EQ(names("num_images"), (std::vector<std::string>{"0", "1", "2", "3", "4", "5"}));
  EXPECT_THROW(ablation_cells("colour", base), Error);
  const auto cells = ablation_cells("features", base);
  EXPECT_FALSE(cells[0].second.use_pixel2d || cells[0].second.use_patch2d);
  EXPECT_TRUE(cells[3].second.use_pixel2d && cells[3].second.use_patch2d);
}

class ManifestRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "coff_pipeline_run";
    fs::remove_all(dir_);
    manifest_ = synth::generate(synth::SceneKind::TexturedPlane, small_params(), 11, dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static inline fs::path dir_;
  static inline io::DatasetManifest manifest_;
};

std::string metrics_text(const RunReport& r) {
  std::vector<PairEvaluation> e;
  for (const auto& o : r.outcomes) e.push_back(o.eval);
  std::ostringstream os;
  write_metrics_csv(os, e);
  return os.str();
}

TEST_F(ManifestRun, ThreadCountDoesNotChangeResults) {
  const auto reloaded = io::load_manifest(dir_ / "manifest.json");
  EXPECT_EQ(reloaded, manifest_);
  PipelineConfig cfg;
  cfg.seed = 4;
  const auto a = run_register(reloaded, cfg, 1);
  const auto b = run_register(reloaded, cfg, 3);
  EXPECT_EQ(metrics_text(a), metrics_text(b));
  EXPECT_EQ(a.summary.failures, 0u);
  EXPECT_GT(a.summary.rr, 0.5);
}

TEST_F(ManifestRun, FailingPairIsQuarantined) {
  auto m = manifest_;
  io::CloudEntry tiny;
  tiny.cloud = "tiny.xyz";
  io::save_xyz(dir_ / "tiny.xyz", PointList{{0, 0, 0}, {0.5, 0, 0}});
  m.clouds.emplace("tiny", tiny);
  io::PairEntry bad = m.pairs[0];
  bad.id = "bad";
  bad.cloud_q = "tiny";
  m.pairs.insert(m.pairs.begin() + 1, bad);
  PipelineConfig cfg;
  const auto rep = run_register(m, cfg, 2);
  ASSERT_EQ(rep.outcomes.size(), 4u);
  EXPECT_FALSE(rep.outcomes[1].ok());
  EXPECT_FALSE(rep.outcomes[1].eval.registered);
  EXPECT_TRUE(rep.outcomes[0].ok());
  EXPECT_TRUE(rep.outcomes[2].ok());
  EXPECT_EQ(rep.summary.failures, 1u);
}

TEST_F(ManifestRun, OutputsAndSweep) {
  PipelineConfig cfg;
  const auto rep = run_register(manifest_, cfg, 2);
  const auto out = dir_ / "out";
  write_run_outputs(out, rep, cfg);
  for (const char* f : {"metrics.csv", "results.json", "summary.json", "ecdf_re.csv", "ecdf_te.csv", "ecdf_rmse.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto summary = nlohmann::json::parse(io::detail::read_file(out / "summary.json"));
  EXPECT_EQ(summary["pairs"].get<int>(), 3);
  EXPECT_EQ(summary["config"], config_to_json(cfg));

  const auto inputs = sweep_inputs(rep);
  const SweepGrids one{{0.1}, {0.05}, {0.2}};
  const auto rows = threshold_sweep(inputs, one);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[0].value, rep.summary.fmr);
  EXPECT_DOUBLE_EQ(rows[1].value, rep.summary.fmr);
  EXPECT_DOUBLE_EQ(rows[2].value, rep.summary.rr);
}

TEST(Generator, SameSeedSameBytes) {
  const auto a = fs::temp_directory_path() / "coff_gen_a";
  const auto b = fs::temp_directory_path() / "coff_gen_b";
  fs::remove_all(a);
  fs::remove_all(b);
  auto prm = small_params();
  prm.num_pairs = 1;
  synth::generate(synth::SceneKind::SymmetricPair, prm, 8, a);
  synth::generate(synth::SceneKind::SymmetricPair, prm, 8, b);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(io::detail::read_file(e.path()), io::detail::read_file(b / rel)) << rel;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Generator, TexturedPlaneOverlapIsPlanar) {
  const auto pair = synth::make_pair(synth::SceneKind::TexturedPlane, small_params(), 6);
  const auto rep = planarity_score(pair.p.points, pair.q.points, pair.gt, PlanarityConfig{});
  EXPECT_GE(rep.score, 0.99);
  EXPECT_TRUE(rep.is_planar);
}

}  // namespace
}  // namespace coff
