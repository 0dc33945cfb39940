#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "roadtex/roadtex.hpp"

using namespace roadtex;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("roadtex_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + ROADTEX_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

SceneSpec single_ribbon(int size = 128) {
  SceneSpec s;
  s.width = s.height = size;
  s.ribbons.push_back({{{20, 30}, {size - 20.0, size - 40.0}}, 5.0, 60.0});
  return s;
}

PolylineSet line_set(std::initializer_list<std::vector<Point2>> l) { return PolylineSet(l); }

}  // namespace

TEST(Evaluate, IdenticalIsPerfect) {
  const PolylineSet a = line_set({{{0, 0}, {30, 10}, {50, 40}}, {{5, 60}, {60, 61}}});
  const EvalReport r = evaluate(a, a, 3.0);
  EXPECT_EQ(r.completeness, 1.0);
  EXPECT_EQ(r.correctness, 1.0);
  EXPECT_NEAR(r.rmse, 0.0, 1e-12);  // densified points carry rounding
  EXPECT_FALSE(r.zero_length);
}

TEST(Evaluate, EmptyDetection) {
  const EvalReport r = evaluate({}, line_set({{{0, 0}, {10, 0}}}), 3.0);
  EXPECT_EQ(r.completeness, 0.0);
  EXPECT_EQ(r.correctness, 1.0);
  EXPECT_TRUE(r.zero_length);
}

TEST(Evaluate, OnePixelShift) {
  const PolylineSet truth = line_set({{{10, 10}, {90, 10}}});
  const PolylineSet shifted = line_set({{{10, 11}, {90, 11}}});
  const EvalReport r = evaluate(shifted, truth, 3.0);
  EXPECT_EQ(r.completeness, 1.0);
  EXPECT_EQ(r.correctness, 1.0);
  EXPECT_NEAR(r.rmse, 1.0, 0.05);
}

TEST(Evaluate, PartialCoverage) {
  // Detection covers the first half of the truth and runs 40 px elsewhere.
  const PolylineSet truth = line_set({{{0, 0}, {100, 0}}});
  const PolylineSet det = line_set({{{0, 0}, {50, 0}}, {{0, 50}, {40, 50}}});
  const EvalReport r = evaluate(det, truth, 2.0);
  EXPECT_NEAR(r.completeness, 0.52, 0.01);  // [0, 52] within 2 px
  EXPECT_NEAR(r.correctness, 50.0 / 90.0, 0.01);
}

TEST(Evaluate, SelfEvaluationIsPerfectOnRandomSets) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 10; ++trial) {
    PolylineSet a;
    for (int l = 0; l < 1 + trial % 3; ++l) {
      std::vector<Point2> line;
      for (int k = 0; k < 2 + trial % 4; ++k) line.push_back({u(rng), u(rng)});
      a.push_back(line);
    }
    const EvalReport r = evaluate(a, a, 0.5 + trial * 0.3);
    EXPECT_EQ(r.completeness, 1.0);
    EXPECT_EQ(r.correctness, 1.0);
    EXPECT_NEAR(r.rmse, 0.0, 1e-12);  // densified points carry rounding
  }
}

TEST(Evaluate, DomainErrors) {
  const PolylineSet a = line_set({{{0, 0}, {10, 0}}});
  EXPECT_THROW(evaluate(a, {}, 3.0), DomainError);
  EXPECT_THROW(evaluate(a, a, 0.0), DomainError);
}

TEST(Config, RoundTripsExactly) {
  PipelineConfig c;
  c.decomposition.mu = 123.456789;
  c.decomposition.lambda = 1.0 / 3.0;
  c.alignment.precision = 0.05;
  c.alignment.gradient_alpha = 0.0;
  c.fuse = false;
  c.snake.beta = 0.25;
  c.deriche.high = 17.5;
  c.representation = Representation::edges;
  c.seed = 99;
  c.buffer = 2.5;
  const SceneSpec scene = single_ribbon(64);
  std::stringstream s;
  write_config(s, c, &scene);
  const std::string text = s.str();
  std::istringstream in1(text), in2(text);
  const PipelineConfig back = parse_config(in1);
  const std::optional<SceneSpec> sc = parse_scene(in2);
  EXPECT_EQ(back.decomposition.mu, c.decomposition.mu);
  EXPECT_EQ(back.decomposition.lambda, c.decomposition.lambda);
  EXPECT_EQ(back.alignment.precision, c.alignment.precision);
  EXPECT_EQ(back.alignment.gradient_alpha, 0.0);
  EXPECT_FALSE(back.fuse);
  EXPECT_EQ(back.snake.beta, 0.25);
  ASSERT_TRUE(back.deriche.high.has_value());
  EXPECT_EQ(*back.deriche.high, 17.5);
  EXPECT_FALSE(back.deriche.low.has_value());
  EXPECT_EQ(back.representation, Representation::edges);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.buffer, 2.5);
  ASSERT_TRUE(sc.has_value());
  EXPECT_EQ(sc->width, 64);
  ASSERT_EQ(sc->ribbons.size(), 1u);
  EXPECT_EQ(sc->ribbons[0].path.size(), scene.ribbons[0].path.size());
  // Writing the parsed config again gives the same document.
  std::stringstream again;
  write_config(again, back, &*sc);
  EXPECT_EQ(again.str(), text);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  std::istringstream unknown_section("[decompose]\nmu = 3\n");
  EXPECT_THROW(parse_config(unknown_section), ValidationError);
  std::istringstream unknown_key("[decomposition]\nmoo = 3\n");
  EXPECT_THROW(parse_config(unknown_key), ValidationError);
  std::istringstream bad_number("[decomposition]\nmu = abc\n");
  EXPECT_THROW(parse_config(bad_number), ValidationError);
  std::istringstream bad_tau("[decomposition]\ntau = 0.2\n");
  EXPECT_THROW(parse_config(bad_tau), ValidationError);
  std::istringstream bad_rep("[pipeline]\nrepresentation = photo\n");
  EXPECT_THROW(parse_config(bad_rep), ValidationError);
  EXPECT_THROW(parse_stage("decompose"), ValidationError);
}

TEST(Config, ArcRibbon) {
  std::istringstream in("[scene]\nwidth = 64\nheight = 64\n[ribbon.0]\narc = 32 80 40 -2.0 -1.2\nwidth = 4\n");
  const auto sc = parse_scene(in);
  ASSERT_TRUE(sc.has_value());
  ASSERT_EQ(sc->ribbons.size(), 1u);
  for (Point2 p : sc->ribbons[0].path) EXPECT_NEAR(distance(p, {32, 80}), 40.0, 1e-9);
}

TEST(Pipeline, BlankImageGivesNothing) {
  for (Representation rep : {Representation::texture, Representation::edges, Representation::raw}) {
    PipelineConfig c = corpus_config();
    c.representation = rep;
    const PipelineResult r = run_pipeline(ImageGrid(64, 64, 128.0), c);
    EXPECT_TRUE(r.segments.empty()) << to_string(rep);
    EXPECT_TRUE(r.refined.empty()) << to_string(rep);
  }
}

TEST(Pipeline, SingleRibbonIsRecovered) {
  const Scene s = synth_scene(single_ribbon(), 1);
  for (Representation rep : {Representation::texture, Representation::edges}) {
    PipelineConfig c = corpus_config();
    c.representation = rep;
    const PipelineResult r = run_pipeline(s.image, c);
    EXPECT_GE(r.refined.size(), 1u) << to_string(rep);
    EXPECT_GE(evaluate(r.polylines(), s.centerlines, 3.0).completeness, 0.9) << to_string(rep);
  }
}

TEST(Pipeline, Deterministic) {
  SceneSpec spec = single_ribbon(96);
  spec.noise_sigma = 5.0;
  spec.texture.push_back({10.0, 9.0, 0.7});
  const Scene s = synth_scene(spec, 4);
  const PipelineConfig c = corpus_config();
  const PipelineResult a = run_pipeline(s.image, c), b = run_pipeline(s.image, c);
  EXPECT_EQ(segments_json(a.segments).dump(), segments_json(b.segments).dump());
  EXPECT_EQ(polylines_json(a.refined).dump(), polylines_json(b.refined).dump());
  EXPECT_EQ(max_abs_diff(a.representation, b.representation), 0.0);
  // The scene generator is seeded as well.
  EXPECT_EQ(max_abs_diff(synth_scene(spec, 4).image, s.image), 0.0);
}

TEST(Pipeline, ResumeFromAnyStageMatches) {
  SceneSpec spec = single_ribbon(96);
  spec.noise_sigma = 5.0;
  const Scene s = synth_scene(spec, 8);
  const PipelineConfig c = corpus_config();
  const PipelineResult full = run_pipeline(s.image, c);
  const fs::path dir = fresh_dir("resume");
  save_intermediates(full, s.image, c, dir, &spec);
  for (const char* f : {"config.ini", "representation.rtx", "representation.png", "u.png", "v.png", "residual.png",
                        "decomposition.json", "segments.json", "fused.json", "polylines.json", "overlay.png",
                        "segments_overlay.png", "timing.txt"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  for (Stage from : {Stage::detect, Stage::fuse, Stage::refine}) {
    const PipelineResult r = resume_pipeline(dir, c, from);
    EXPECT_EQ(segments_json(r.fused).dump(), segments_json(full.fused).dump());
    EXPECT_EQ(polylines_json(r.refined).dump(), polylines_json(full.refined).dump());
  }
  EXPECT_THROW(resume_pipeline(dir, c, Stage::representation), ValidationError);
  fs::remove_all(dir);
}

TEST(Pipeline, JsonRoundTrip) {
  Segment s;
  s.a = {1.0 / 3.0, 2.5};
  s.b = {100.125, std::nextafter(7.0, 8.0)};
  s.n = 40;
  s.k = 31;
  s.log10_nfa = -12.345678901234567;
  s.width_hint = 3.5;
  const std::vector<Segment> back = segments_from_json(nlohmann::json::parse(segments_json({s, s}).dump()));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].a, s.a);
  EXPECT_EQ(back[0].b, s.b);
  EXPECT_EQ(back[0].n, s.n);
  EXPECT_EQ(back[0].k, s.k);
  EXPECT_EQ(back[0].log10_nfa, s.log10_nfa);
  EXPECT_EQ(back[0].width_hint, s.width_hint);

  EvolveResult e;
  e.polyline.nodes = {{0.1, 0.2}, {5.5, 1.0 / 7.0}, {9, 9}};
  const PolylineSet p = polylines_from_json(nlohmann::json::parse(polylines_json({e}).dump()));
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], e.polyline.nodes);
}

TEST(Pipeline, ErrorsCarryStageLabel) {
  ImageGrid bad(32, 32, 1.0);
  bad(3, 3) = std::numeric_limits<double>::quiet_NaN();
  try {
    run_pipeline(bad, PipelineConfig{});
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "representation");
    EXPECT_EQ(std::string(e.what()).rfind("representation: ", 0), 0u);
  }
  PipelineConfig c;
  c.snake.spacing = 0.0;
  EXPECT_THROW(run_pipeline(ImageGrid(8, 8), c), ValidationError);
}

TEST(Corpus, ShapeAndDeterminism) {
  const auto a = standard_corpus(), b = standard_corpus();
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].spec.width, 256);
    EXPECT_EQ(a[i].spec.height, 256);
    EXPECT_GE(a[i].spec.ribbons.size(), 1u);
    EXPECT_LE(a[i].spec.ribbons.size(), 3u);
    for (const auto& r : a[i].spec.ribbons) {
      EXPECT_GE(r.width, 3.0);
      EXPECT_LE(r.width, 8.0);
    }
    EXPECT_TRUE(a[i].spec.noise_sigma == 0.0 || a[i].spec.noise_sigma == 5.0);
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(max_abs_diff(synth_scene(a[i].spec, a[i].seed).image, synth_scene(b[i].spec, b[i].seed).image), 0.0);
  }
}

TEST(Corpus, ComparisonTableShape) {
  const auto corpus = standard_corpus(7, 2);
  std::vector<PipelineResult> results;
  const Comparison cmp = compare_representations(corpus, corpus_config(), &results);
  ASSERT_EQ(cmp.rows.size(), 4u);
  ASSERT_EQ(results.size(), 4u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(cmp.rows[i].representation, Representation::texture);
    EXPECT_EQ(cmp.rows[2 + i].representation, Representation::edges);
    EXPECT_EQ(cmp.rows[i].scene, i);
    EXPECT_EQ(cmp.rows[i].polylines, static_cast<int>(results[i].refined.size()));
  }
  for (const auto& r : cmp.rows) {
    EXPECT_GE(r.report.completeness, 0.0);
    EXPECT_LE(r.report.completeness, 1.0);
    EXPECT_GE(r.report.correctness, 0.0);
    EXPECT_LE(r.report.correctness, 1.0);
    EXPECT_GE(r.report.rmse, 0.0);
  }
  const auto j = to_json(cmp);
  EXPECT_EQ(j.at("rows").size(), 4u);
  EXPECT_TRUE(j.at("mean").contains("texture"));
  EXPECT_THROW(compare_representations({}, corpus_config()), DomainError);
}

TEST(Cli, SubcommandsRun) {
  const fs::path dir = fresh_dir("cli");
  {
    std::ofstream cfg(dir / "scene.ini");
    cfg << "[decomposition]\nmu = 150\n[scene]\nwidth = 80\nheight = 80\nnoise_sigma = 5\n"
           "[ribbon.0]\npath = 10 15, 70 60\nwidth = 5\ncontrast = 60\n";
  }
  const std::string cfg = "--config \"" + (dir / "scene.ini").string() + "\"";
  const fs::path log = dir / "log.txt";

  ASSERT_EQ(run_cli("synth " + cfg + " --seed 2 --out \"" + (dir / "s").string() + "\"", log), 0) << slurp(log);
  for (const char* f : {"image.rtx", "image.png", "truth.json", "config.ini"}) EXPECT_TRUE(fs::exists(dir / "s" / f)) << f;
  const std::string image = (dir / "s" / "image.rtx").string();

  ASSERT_EQ(run_cli("gnorm \"" + image + "\"", log), 0) << slurp(log);
  const auto g = nlohmann::json::parse(slurp(log));
  EXPECT_LE(g.at("lower").get<double>(), g.at("value").get<double>());
  EXPECT_LE(g.at("value").get<double>(), g.at("upper").get<double>());

  ASSERT_EQ(run_cli("decompose \"" + image + "\" --mu 150 --out \"" + (dir / "d").string() + "\"", log), 0) << slurp(log);
  EXPECT_TRUE(fs::exists(dir / "d" / "v.png"));
  EXPECT_TRUE(fs::exists(dir / "d" / "decomposition.json"));

  ASSERT_EQ(run_cli("edges \"" + image + "\" --out \"" + (dir / "e").string() + "\"", log), 0) << slurp(log);
  EXPECT_TRUE(fs::exists(dir / "e" / "edges.png"));

  ASSERT_EQ(run_cli("detect \"" + (dir / "d" / "v.rtx").string() + "\" --out \"" + (dir / "t").string() + "\"", log), 0)
      << slurp(log);
  ASSERT_TRUE(fs::exists(dir / "t" / "segments.json"));

  ASSERT_EQ(run_cli("refine \"" + (dir / "d" / "v.rtx").string() + "\" --segments \"" + (dir / "t" / "segments.json").string() +
                        "\" --out \"" + (dir / "r").string() + "\"",
                    log),
            0)
      << slurp(log);
  EXPECT_TRUE(fs::exists(dir / "r" / "polylines.json"));

  ASSERT_EQ(run_cli("pipeline " + cfg + " --seed 2 --threads 1 --out \"" + (dir / "p").string() + "\"", log), 0) << slurp(log);
  const auto ev = read_json(dir / "p" / "eval.json");
  EXPECT_GE(ev.at("completeness").get<double>(), 0.0);

  const std::string truth = (dir / "s" / "truth.json").string();
  ASSERT_EQ(run_cli("eval \"" + truth + "\" \"" + truth + "\" --out \"" + (dir / "self.json").string() + "\"", log), 0)
      << slurp(log);
  EXPECT_EQ(read_json(dir / "self.json").at("completeness").get<double>(), 1.0);

  ASSERT_EQ(run_cli("pipeline " + cfg + " --resume-from fuse --out \"" + (dir / "p").string() + "\"", log), 0) << slurp(log);
  fs::remove_all(dir);
}

TEST(Cli, FailuresExitNonZero) {
  const fs::path dir = fresh_dir("clifail");
  const fs::path log = dir / "log.txt";
  EXPECT_NE(run_cli("frobnicate", log), 0);
  EXPECT_NE(run_cli("gnorm \"" + (dir / "missing.png").string() + "\"", log), 0);
  {
    std::ofstream junk(dir / "junk.png");
    junk << "not an image";
  }
  EXPECT_NE(run_cli("gnorm \"" + (dir / "junk.png").string() + "\"", log), 0);
  EXPECT_NE(slurp(log).find("roadtex gnorm:"), std::string::npos) << slurp(log);
  // A NaN pixel fails inside the representation stage.
  ImageGrid bad(16, 16, 1.0);
  bad(2, 2) = std::numeric_limits<double>::quiet_NaN();
  save_raw(bad, dir / "bad.rtx");
  EXPECT_NE(run_cli("pipeline \"" + (dir / "bad.rtx").string() + "\" --out \"" + (dir / "o").string() + "\"", log), 0);
  EXPECT_NE(slurp(log).find("stage representation:"), std::string::npos) << slurp(log);
  fs::remove_all(dir);
}
