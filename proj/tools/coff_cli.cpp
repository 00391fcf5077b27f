// coff: synthetic scene generation, registration benchmarks, ablations,
// planarity subsets and threshold sweeps over pair manifests.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coff/coff.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string manifest;
  std::string config;
  std::string out_dir = "coff_out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t jobs = 1;
};

struct Overrides {
  std::optional<std::size_t> images_per_cloud;
  std::optional<std::string> selection;
  bool no_pixel2d = false;
  bool no_patch2d = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_manifest) {
  auto* m = cmd->add_option("--manifest", c.manifest, "Pair manifest (JSON)");
  if (needs_manifest) m->required()->check(CLI::ExistingFile);
  cmd->add_option("--config", c.config, "Pipeline config (JSON); flags override it")->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&c](std::uint64_t s) { c.seed = s, c.seed_set = true; }, "Random seed");
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--images-per-cloud", o.images_per_cloud, "Images used per cloud");
  cmd->add_option("--selection", o.selection, "Multi-view selection: random, mean, complement");
  cmd->add_flag("--no-pixel2d", o.no_pixel2d, "Disable pixel-wise image features");
  cmd->add_flag("--no-patch2d", o.no_patch2d, "Disable patch-wise image features");
}

coff::PipelineConfig make_config(const Common& c, const Overrides& o) {
  coff::PipelineConfig cfg = c.config.empty() ? coff::PipelineConfig{} : coff::load_config(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  if (o.images_per_cloud) cfg.images_per_cloud = *o.images_per_cloud;
  if (o.selection) cfg.selection = coff::detail::parse_selection(*o.selection);
  if (o.no_pixel2d) cfg.use_pixel2d = false;
  if (o.no_patch2d) cfg.use_patch2d = false;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) { coff::io::detail::write_file(path, text); }

int cmd_register(const Common& c, const Overrides& o) {
  const auto cfg = make_config(c, o);
  const auto manifest = coff::io::load_manifest(c.manifest);
  const auto report = coff::run_register(manifest, cfg, c.jobs);
  coff::write_run_outputs(c.out_dir, report, cfg);
  const auto& s = report.summary;
  std::printf("pairs %zu  failures %zu  FMR %.4f  RR %.4f  mean IR %.4f  mean coarse IR %.4f\n", s.pairs, s.failures,
              s.fmr, s.rr, s.mean_ir, s.mean_coarse_ir);
  return s.failures > 0 ? 2 : 0;
}

int cmd_generate(const Common& c, const std::string& kind, const coff::synth::GeneratorParams& prm) {
  const auto m = coff::synth::generate(coff::synth::parse_kind(kind), prm, c.seed, c.out_dir);
  std::printf("wrote %zu pairs to %s\n", m.pairs.size(), (fs::path(c.out_dir) / "manifest.json").string().c_str());
  return 0;
}

int cmd_subset(const Common& c, const coff::PlanarityConfig& pc) {
  coff::PlanarityConfig cfg = pc;
  if (c.seed_set) cfg.seed = c.seed;
  const auto manifest = coff::io::load_manifest(c.manifest);
  const auto result = coff::extract_subset(manifest, cfg, c.jobs);
  fs::create_directories(c.out_dir);
  coff::io::save_manifest(fs::path(c.out_dir) / "manifest.json", coff::io::rebase_manifest(result.subset, c.out_dir));
  std::ostringstream csv;
  csv << "pair_id,overlap_size,plane_inliers,r,is_planar\n";
  for (std::size_t i = 0; i < manifest.pairs.size(); ++i) {
    const auto& r = result.reports[i];
    csv << manifest.pairs[i].id << ',' << r.overlap_size << ',' << r.plane_inliers << ','
        << coff::format_number(r.score) << ',' << (r.is_planar ? 1 : 0) << '\n';
  }
  write_text(fs::path(c.out_dir) / "planarity.csv", csv.str());
  std::printf("selected %zu/%zu pairs (tau1 %g, tau2 %g)\n", result.subset.pairs.size(), manifest.pairs.size(), cfg.tau1,
              cfg.tau2);
  return 0;
}

int cmd_ablate(const Common& c, const Overrides& o, const std::vector<std::string>& axes) {
  const auto cfg = make_config(c, o);
  const auto manifest = coff::io::load_manifest(c.manifest);
  const auto rows = coff::run_ablation(manifest, axes, cfg, c.jobs);
  std::ostringstream csv;
  coff::write_ablation_csv(csv, rows);
  write_text(fs::path(c.out_dir) / "ablation.csv", csv.str());
  std::cout << csv.str();
  bool failures = false;
  for (const auto& r : rows) failures |= r.summary.failures > 0;
  return failures ? 2 : 0;
}

int cmd_sweep(const Common& c, const Overrides& o) {
  const auto cfg = make_config(c, o);
  const auto manifest = coff::io::load_manifest(c.manifest);
  const auto report = coff::run_register(manifest, cfg, c.jobs);
  const auto inputs = coff::sweep_inputs(report);
  const auto rows = coff::threshold_sweep(inputs, coff::default_sweep_grids(), cfg.metrics);
  std::ostringstream csv;
  coff::write_sweep_csv(csv, rows);
  write_text(fs::path(c.out_dir) / "sweep.csv", csv.str());
  std::printf("wrote %zu sweep rows\n", rows.size());
  return report.summary.failures > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal point cloud registration toolkit"};
  app.require_subcommand(1);

  Common common;
  Overrides over;

  auto* reg = app.add_subcommand("register", "Register every pair of a manifest and score it");
  add_common(reg, common, true);
  add_overrides(reg, over);

  std::string kind = "textured_plane";
  coff::synth::GeneratorParams gen_params;
  auto* gen = app.add_subcommand("generate", "Write a synthetic benchmark (clouds, images, manifest)");
  add_common(gen, common, false);
  gen->add_option("--kind", kind, "textured_plane, symmetric_pair, cluttered, sphere_shell or mixed_planarity")
      ->capture_default_str();
  gen->add_option("--pairs", gen_params.num_pairs, "Number of pairs")->capture_default_str();
  gen->add_option("--images", gen_params.images_per_cloud, "Rendered images per cloud")->capture_default_str();
  gen->add_option("--planar-pairs", gen_params.planar_pairs, "Planar pairs in mixed_planarity")->capture_default_str();
  gen->add_option("--noise", gen_params.noise_sigma, "Point noise sigma (m)")->capture_default_str();

  coff::PlanarityConfig planarity;
  auto* sub = app.add_subcommand("subset", "Select geometrically planar pairs");
  add_common(sub, common, true);
  sub->add_option("--tau1", planarity.tau1, "Plane inlier distance (m)")->capture_default_str();
  sub->add_option("--tau2", planarity.tau2, "Planarity threshold on r")->capture_default_str();
  sub->add_option("--nn-radius", planarity.nn_radius, "Overlap neighbour radius (m)")->capture_default_str();
  sub->add_option("--ransac-iters", planarity.ransac_iters, "Plane RANSAC iterations")->capture_default_str();
  sub->add_flag("--symmetric", planarity.symmetric_overlap, "Use the symmetric overlap region");

  std::vector<std::string> axes{"features"};
  auto* abl = app.add_subcommand("ablate", "Run the pipeline over ablation cells");
  add_common(abl, common, true);
  add_overrides(abl, over);
  abl->add_option("--axes", axes, "features, selection, num_images")
      ->delimiter(',')
      ->check(CLI::IsMember({"features", "selection", "num_images"}))
      ->capture_default_str();

  auto* swp = app.add_subcommand("sweep", "FMR/RR as functions of their thresholds");
  add_common(swp, common, true);
  add_overrides(swp, over);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    fs::create_directories(common.out_dir);
    if (*reg) return cmd_register(common, over);
    if (*gen) return cmd_generate(common, kind, gen_params);
    if (*sub) return cmd_subset(common, planarity);
    if (*abl) return cmd_ablate(common, over, axes);
    if (*swp) return cmd_sweep(common, over);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
