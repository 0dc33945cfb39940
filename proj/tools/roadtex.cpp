// roadtex command line: one subcommand per processing step plus the full
// pipeline and the corpus comparison.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "roadtex/roadtex.hpp"

namespace fs = std::filesystem;
using namespace roadtex;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "INI config; command-line flags override it")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory (or file for gnorm/eval)");
  cmd->add_option("--seed", c.seed, "scene seed");
  cmd->add_option("--threads", c.threads, "worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
}

PipelineConfig base_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.threads > 0) set_threads(c.threads);
  return cfg;
}

/// .rtx rasters load exactly; anything else goes through the 8-bit reader.
ImageGrid read_input(const fs::path& p) { return p.extension() == ".rtx" ? load_raw(p) : load_image(p); }

fs::path out_dir(const PipelineConfig& cfg) {
  fs::path d = cfg.output_dir;
  fs::create_directories(d);
  return d;
}

template <class T>
void override_if_set(const std::optional<T>& v, T& target) {
  if (v) target = *v;
}

nlohmann::json truth_json(const PolylineSet& lines) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : lines) {
    nlohmann::json nodes = nlohmann::json::array();
    for (Point2 p : l) nodes.push_back({p.x, p.y});
    arr.push_back({{"nodes", nodes}});
  }
  return arr;
}

SceneSpec scene_from(const Common& c) {
  if (c.config.empty()) throw ValidationError("a --config with a [scene] section is required");
  auto spec = load_scene(c.config);
  if (!spec) throw ValidationError(c.config + " has no [scene] section");
  return *spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Road extraction from the texture component of an image"};
  app.require_subcommand(1);
  std::function<void()> run;
  std::string label;

  // synth
  Common synth_c;
  auto* synth = app.add_subcommand("synth", "render a scene from the [scene] section of a config");
  add_common(synth, synth_c);
  synth->callback([&] {
    label = "synth";
    run = [&] {
      const PipelineConfig cfg = base_config(synth_c);
      const SceneSpec spec = scene_from(synth_c);
      const Scene s = synth_scene(spec, cfg.seed);
      const fs::path d = out_dir(cfg);
      save_raw(s.image, d / "image.rtx");
      save_image(s.image, d / "image.png");
      write_json(truth_json(s.centerlines), d / "truth.json");
      std::ofstream c(d / "config.ini");
      write_config(c, cfg, &spec);
    };
  });

  // decompose
  Common dec_c;
  std::string dec_in;
  std::optional<double> dec_lambda, dec_mu, dec_tau, dec_tol;
  std::optional<int> dec_iter;
  auto* dec = app.add_subcommand("decompose", "split an image into structure u and texture v");
  add_common(dec, dec_c);
  dec->add_option("input", dec_in, "image (.png, .pgm or .rtx)")->required()->check(CLI::ExistingFile);
  dec->add_option("--lambda", dec_lambda, "residual weight");
  dec->add_option("--mu", dec_mu, "G-norm radius of the texture");
  dec->add_option("--tau", dec_tau, "projector step, at most 1/8");
  dec->add_option("--tol", dec_tol, "relative change stopping threshold");
  dec->add_option("--max-iter", dec_iter, "outer iterations");
  dec->callback([&] {
    label = "decompose";
    run = [&] {
      PipelineConfig cfg = base_config(dec_c);
      override_if_set(dec_lambda, cfg.decomposition.lambda);
      override_if_set(dec_mu, cfg.decomposition.mu);
      override_if_set(dec_tau, cfg.decomposition.tau);
      override_if_set(dec_tol, cfg.decomposition.tol);
      override_if_set(dec_iter, cfg.decomposition.max_iter);
      cfg.decomposition.validate();
      const DecompositionResult r = decompose(read_input(dec_in), cfg.decomposition);
      const fs::path d = out_dir(cfg);
      save_image(r.u, d / "u.png");
      save_image(r.v, d / "v.png", Quantize::normalize);
      save_image(r.residual, d / "residual.png", Quantize::normalize);
      save_raw(r.u, d / "u.rtx");
      save_raw(r.v, d / "v.rtx");
      save_raw(r.residual, d / "residual.rtx");
      write_json(to_json(r), d / "decomposition.json");
      std::cout << "iterations " << r.iterations << (r.converged ? " (converged)" : " (not converged)") << '\n';
    };
  });

  // gnorm
  Common gn_c;
  std::string gn_in;
  GNormParams gn_p;
  auto* gn = app.add_subcommand("gnorm", "estimate the G-norm of an image");
  add_common(gn, gn_c);
  gn->add_option("input", gn_in, "image (.png, .pgm or .rtx)")->required()->check(CLI::ExistingFile);
  gn->add_option("--tol", gn_p.tol, "relative bracket width");
  gn->add_option("--max-iter", gn_p.max_iter, "iteration cap");
  gn->callback([&] {
    label = "gnorm";
    run = [&] {
      base_config(gn_c);
      const GNormEstimate e = gnorm_estimate(read_input(gn_in), gn_p);
      const nlohmann::json j{{"value", e.value},         {"lower", e.certified_lower}, {"upper", e.certified_upper},
                             {"iterations", e.iterations}, {"converged", e.converged},   {"removed_mean", e.removed_mean}};
      if (gn_c.out.empty())
        std::cout << j.dump(2) << '\n';
      else
        write_json(j, gn_c.out);
    };
  });

  // edges
  Common ed_c;
  std::string ed_in;
  std::optional<double> ed_alpha, ed_low, ed_high;
  std::optional<bool> ed_nms;
  auto* ed = app.add_subcommand("edges", "Canny-Deriche edge map");
  add_common(ed, ed_c);
  ed->add_option("input", ed_in, "image (.png, .pgm or .rtx)")->required()->check(CLI::ExistingFile);
  ed->add_option("--alpha", ed_alpha, "filter sharpness");
  ed->add_option("--low", ed_low, "hysteresis low threshold");
  ed->add_option("--high", ed_high, "hysteresis high threshold");
  ed->add_flag("--nms,!--no-nms", ed_nms, "non-maximum suppression and hysteresis");
  ed->callback([&] {
    label = "edges";
    run = [&] {
      PipelineConfig cfg = base_config(ed_c);
      override_if_set(ed_alpha, cfg.deriche.alpha);
      if (ed_low) cfg.deriche.low = ed_low;
      if (ed_high) cfg.deriche.high = ed_high;
      override_if_set(ed_nms, cfg.deriche.enable_nms);
      const ImageGrid img = read_input(ed_in);
      const ImageGrid e = canny_deriche(img, cfg.deriche);
      const fs::path d = out_dir(cfg);
      if (cfg.deriche.enable_nms)
        save_image(e * 255.0, d / "edges.png");
      else
        save_image(e, d / "edges.png", Quantize::normalize);
      save_raw(e, d / "edges.rtx");
    };
  });

  // detect
  Common det_c;
  std::string det_in;
  std::optional<double> det_prec, det_eps, det_floor, det_galpha, det_angle, det_lat, det_gap;
  std::optional<bool> det_fuse;
  auto* det = app.add_subcommand("detect", "a-contrario alignment detection");
  add_common(det, det_c);
  det->add_option("input", det_in, "detector input image (.png, .pgm or .rtx)")->required()->check(CLI::ExistingFile);
  det->add_option("--precision", det_prec, "angular tolerance as a fraction of pi");
  det->add_option("--epsilon", det_eps, "NFA threshold");
  det->add_option("--magnitude-floor", det_floor, "gradient magnitude below which pixels are ignored");
  det->add_option("--gradient-alpha", det_galpha, "Deriche smoothing of the gradient, 0 for central differences");
  det->add_flag("--fuse,!--no-fuse", det_fuse, "merge redundant segments");
  det->add_option("--fuse-angle", det_angle, "max angle gap, degrees");
  det->add_option("--fuse-lateral", det_lat, "max lateral distance, pixels");
  det->add_option("--fuse-gap", det_gap, "max longitudinal gap, pixels");
  det->callback([&] {
    label = "detect";
    run = [&] {
      PipelineConfig cfg = base_config(det_c);
      AlignmentParams& a = cfg.alignment;
      override_if_set(det_prec, a.precision);
      override_if_set(det_eps, a.epsilon);
      override_if_set(det_floor, a.magnitude_floor);
      override_if_set(det_galpha, a.gradient_alpha);
      override_if_set(det_angle, a.fuse_angle_deg);
      override_if_set(det_lat, a.fuse_lateral);
      override_if_set(det_gap, a.fuse_gap);
      override_if_set(det_fuse, cfg.fuse);
      a.validate();
      const ImageGrid img = read_input(det_in);
      std::vector<Segment> segs = detect_alignments(orientation_field(img, a.magnitude_floor, a.gradient_alpha), a);
      if (cfg.fuse) segs = fuse_segments(std::move(segs), a);
      const fs::path d = out_dir(cfg);
      write_json(segments_json(segs), d / "segments.json");
      save_image(render_overlay(img, segment_curves(segs)), d / "overlay.png");
      std::cout << segs.size() << " segments\n";
    };
  });

  // refine
  Common ref_c;
  std::string ref_in, ref_segs;
  std::optional<double> ref_spacing, ref_range, ref_beta;
  std::optional<int> ref_sweeps;
  auto* ref = app.add_subcommand("refine", "evolve segments into open snakes");
  add_common(ref, ref_c);
  ref->add_option("input", ref_in, "feature image (.png, .pgm or .rtx)")->required()->check(CLI::ExistingFile);
  ref->add_option("--segments", ref_segs, "segments JSON")->required()->check(CLI::ExistingFile);
  ref->add_option("--spacing", ref_spacing, "node spacing, pixels");
  ref->add_option("--range", ref_range, "search half-range along the normal, pixels");
  ref->add_option("--beta", ref_beta, "curvature weight");
  ref->add_option("--max-sweeps", ref_sweeps, "sweep cap");
  ref->callback([&] {
    label = "refine";
    run = [&] {
      PipelineConfig cfg = base_config(ref_c);
      override_if_set(ref_spacing, cfg.snake.spacing);
      override_if_set(ref_range, cfg.snake.search_range);
      override_if_set(ref_beta, cfg.snake.beta);
      override_if_set(ref_sweeps, cfg.snake.max_sweeps);
      const ImageGrid img = read_input(ref_in);
      const auto refined = refine_segments(segments_from_json(read_json(ref_segs)), img, cfg.snake);
      const fs::path d = out_dir(cfg);
      write_json(polylines_json(refined), d / "polylines.json");
      PolylineSet curves;
      for (const auto& r : refined) curves.push_back(r.polyline.nodes);
      save_image(render_overlay(img, curves), d / "overlay.png");
      std::cout << refined.size() << " polylines\n";
    };
  });

  // pipeline
  Common pl_c;
  std::string pl_in, pl_rep, pl_resume;
  auto* pl = app.add_subcommand("pipeline", "representation, detection, fusion and refinement in one run");
  add_common(pl, pl_c);
  pl->add_option("input", pl_in, "image; omitted: render the config's [scene] with --seed")->check(CLI::ExistingFile);
  pl->add_option("--representation", pl_rep, "texture, edges or raw");
  pl->add_option("--resume-from", pl_resume, "rerun from detect, fuse or refine using intermediates in --out");
  pl->callback([&] {
    label = "pipeline";
    run = [&] {
      PipelineConfig cfg = base_config(pl_c);
      if (!pl_rep.empty()) cfg.representation = parse_representation(pl_rep);
      cfg.validate();
      const fs::path d = out_dir(cfg);
      ImageGrid input{1, 1};
      std::optional<SceneSpec> spec;
      std::optional<PolylineSet> truth;
      if (!pl_in.empty()) {
        input = read_input(pl_in);
      } else {
        spec = scene_from(pl_c);
        Scene s = synth_scene(*spec, cfg.seed);
        input = std::move(s.image);
        truth = std::move(s.centerlines);
        save_raw(input, d / "image.rtx");
        write_json(truth_json(*truth), d / "truth.json");
      }
      // A resumed run leaves the files of earlier stages in place.
      const PipelineResult r =
          pl_resume.empty() ? run_pipeline(input, cfg) : resume_pipeline(d, cfg, parse_stage(pl_resume));
      save_intermediates(r, input, cfg, d, spec ? &*spec : nullptr);
      if (truth) write_json(to_json(evaluate(r.polylines(), *truth, cfg.buffer)), d / "eval.json");
      std::cout << r.fused.size() << " segments, " << r.refined.size() << " polylines\n";
    };
  });

  // eval
  Common ev_c;
  std::string ev_det, ev_truth;
  std::optional<double> ev_buffer;
  auto* ev = app.add_subcommand("eval", "completeness / correctness against ground-truth centerlines");
  add_common(ev, ev_c);
  ev->add_option("detected", ev_det, "polylines JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("truth", ev_truth, "ground-truth polylines JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--buffer", ev_buffer, "matching distance, pixels");
  ev->callback([&] {
    label = "eval";
    run = [&] {
      PipelineConfig cfg = ev_c.config.empty() ? PipelineConfig{} : load_config(ev_c.config);
      override_if_set(ev_buffer, cfg.buffer);
      const auto rep = evaluate(polylines_from_json(read_json(ev_det)), polylines_from_json(read_json(ev_truth)), cfg.buffer);
      if (ev_c.out.empty())
        std::cout << to_json(rep).dump(2) << '\n';
      else
        write_json(to_json(rep), ev_c.out);
    };
  });

  // compare
  Common cmp_c;
  int cmp_count = 10;
  std::uint64_t cmp_corpus_seed = 7;
  auto* cmp = app.add_subcommand("compare", "texture vs edges on the standard synthetic corpus");
  add_common(cmp, cmp_c);
  cmp->add_option("--count", cmp_count, "number of scenes")->check(CLI::PositiveNumber);
  cmp->add_option("--corpus-seed", cmp_corpus_seed, "seed of the corpus generator");
  cmp->callback([&] {
    label = "compare";
    run = [&] {
      PipelineConfig cfg = cmp_c.config.empty() ? corpus_config() : load_config(cmp_c.config);
      if (!cmp_c.out.empty()) cfg.output_dir = cmp_c.out;
      if (cmp_c.threads > 0) set_threads(cmp_c.threads);
      const auto corpus = standard_corpus(cmp_corpus_seed, cmp_count);
      const Comparison c = compare_representations(corpus, cfg);
      const fs::path d = out_dir(cfg);
      write_json(to_json(c), d / "comparison.json");
      std::printf("%-6s %-8s %12s %12s\n", "scene", "arm", "completeness", "correctness");
      for (const auto& r : c.rows)
        std::printf("%-6d %-8s %12.3f %12.3f\n", r.scene, to_string(r.representation), r.report.completeness,
                    r.report.correctness);
      std::printf("mean   texture  %12.3f %12.3f\n", c.mean_completeness_texture, c.mean_correctness_texture);
      std::printf("mean   edges    %12.3f %12.3f\n", c.mean_completeness_edges, c.mean_correctness_edges);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    run();
  } catch (const StageError& e) {
    std::cerr << "roadtex " << label << ": stage " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "roadtex " << label << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
