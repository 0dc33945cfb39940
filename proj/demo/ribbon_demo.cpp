// Extracts the roads of demo/scene.ini (or another scene config) from the
// texture and the edge representations and prints how each did.

#include <cstdio>
#include <exception>

#include "roadtex/roadtex.hpp"

int main(int argc, char** argv) {
  using namespace roadtex;
  const char* path = argc > 1 ? argv[1] : "scene.ini";
  try {
    PipelineConfig cfg = load_config(path);
    const auto spec = load_scene(path);
    if (!spec) {
      std::fprintf(stderr, "%s has no [scene] section\n", path);
      return 1;
    }
    const Scene scene = synth_scene(*spec, cfg.seed);
    for (Representation rep : {Representation::texture, Representation::edges}) {
      cfg.representation = rep;
      const PipelineResult r = run_pipeline(scene.image, cfg);
      const EvalReport e = evaluate(r.polylines(), scene.centerlines, cfg.buffer);
      std::printf("%-8s %2zu segments  %2zu snakes  completeness %.3f  correctness %.3f  rmse %.2f px\n",
                  to_string(rep), r.fused.size(), r.refined.size(), e.completeness, e.correctness, e.rmse);
      save_intermediates(r, scene.image, cfg, std::string("demo_out/") + to_string(rep), &*spec);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "demo: %s\n", e.what());
    return 1;
  }
  return 0;
}
