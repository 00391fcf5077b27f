// Generates one textured-plane pair in memory and registers it twice: with
// geometry only and with both image feature stages.

#include <cstdio>

#include "coff/coff.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  coff::synth::GeneratorParams prm;
  const auto pair = coff::synth::make_pair(coff::synth::SceneKind::TexturedPlane, prm, seed);

  auto posed = [](const coff::synth::SyntheticCloud& c) {
    std::vector<coff::PosedImage> images;
    for (std::size_t k = 0; k < c.images.size(); ++k) images.push_back({c.images[k], c.cameras[k], std::nullopt});
    return images;
  };

  for (bool images_on : {false, true}) {
    coff::PipelineConfig cfg;
    cfg.use_pixel2d = images_on;
    cfg.use_patch2d = images_on;
    const auto p = coff::prepare_cloud(pair.p.points, posed(pair.p), cfg, seed);
    const auto q = coff::prepare_cloud(pair.q.points, posed(pair.q), cfg, seed + 1);
    const auto out = coff::register_prepared(p, q, pair.gt, cfg, seed);
    std::printf("%-14s coarse IR %.3f  IR %.3f  RMSE %.3f m  RE %.2f deg  TE %.3f m  %s\n",
                images_on ? "fused" : "geometry only", out.coarse_inlier_ratio, out.eval.inlier_ratio, out.eval.rmse,
                out.eval.re, out.eval.te, out.eval.registered ? "registered" : "failed");
  }
  return 0;
}
