// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "roadtex/roadtex.hpp"

using namespace roadtex;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

// Total variation by direct forward differences, independent of tv_norm.
double direct_tv(const ImageGrid& f) {
  double s = 0.0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      const double dx = x + 1 < f.width() ? f(x + 1, y) - f(x, y) : 0.0;
      const double dy = y + 1 < f.height() ? f(x, y + 1) - f(x, y) : 0.0;
      s += std::sqrt(dx * dx + dy * dy);
    }
  return s;
}

double brute_tail(int n, int k, double p) {
  double sum = 0.0;
  for (int j = k; j <= n; ++j) {
    double c = 1.0;
    for (int i = 1; i <= j; ++i) c = c * (n - j + i) / i;
    sum += c * std::pow(p, j) * std::pow(1.0 - p, n - j);
  }
  return sum;
}

double analytic_kernel(int x, double alpha) {
  const double q = std::exp(-alpha);
  const double c = (1.0 - q) * (1.0 - q) / (1.0 + 2.0 * alpha * q - q * q);
  return c * (1.0 + alpha * std::abs(x)) * std::exp(-alpha * std::abs(x));
}

double contrast_ratio(const ImageGrid& map, const ImageGrid& mask) {
  double in = 0.0, out = 0.0;
  int n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (mask[i] > 0.0) {
      in += map[i];
      ++n_in;
    } else {
      out += map[i];
      ++n_out;
    }
  return (in / n_in) / (out / n_out);
}

// 1. Ribbon G-norm bounds at 128 x 128.
Outcome ribbon_bounds_check() {
  const auto t0 = Clock::now();
  const int w = 8;
  std::string detail;
  bool ok = true;
  for (int n : {2, 4, 8, 16}) {
    const ImageGrid f = make_ribbon(n, w, 128, 128);
    const GNormEstimate e = gnorm_estimate(f);
    const double normalized = e.value / w;
    const RibbonBounds b = lemma1_bounds(n);
    const bool in_band = normalized >= b.lower - 0.05 && normalized <= b.upper + 0.05;
    double energy = 0.0;
    for (double v : f.pixels()) energy += v * v;
    const double expected = energy / direct_tv(f);
    const bool lower_ok = std::abs(duality_lower_bound(f, f) - expected) <= 1e-6 * expected;
    ok = ok && in_band && lower_ok;
    detail += fmt("N=%d %.3f in [%.3f, 0.55]%s; ", n, normalized, b.lower - 0.05, lower_ok ? "" : " (lower bound mismatch)");
  }
  const double t = seconds_since(t0);
  ok = ok && t < 120.0;
  return {ok, detail + fmt("%.0f s", t)};
}

// 2. Decomposition invariants on 64 x 64 instances.
Outcome decomposition_check() {
  const auto t0 = Clock::now();
  bool ok = true;
  double worst_add = 0.0, worst_dual = 0.0, worst_ball = 0.0, worst_rise = 0.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SceneSpec spec;
    spec.width = spec.height = 64;
    spec.ribbons.push_back({{{8, 10.0 + 10 * seed}, {56, 50.0 - 5 * seed}}, 3.0 + seed, 60.0});
    spec.texture.push_back({10.0, 8.0 + seed, 0.4 + seed});
    spec.noise_sigma = 5.0;
    const Scene s = synth_scene(spec, 40 + seed);
    DecompositionParams p;
    p.mu = 30.0 + 40.0 * seed;
    const DecompositionResult d = decompose(s.image, p);
    worst_add = std::max(worst_add, max_abs_diff(d.u + d.v + d.residual, s.image));
    worst_dual = std::max(worst_dual, d.max_dual_norm);
    for (std::size_t i = 1; i < d.energy_trace.size(); ++i) worst_rise = std::max(worst_rise, d.energy_trace[i] - d.energy_trace[i - 1]);
    worst_ball = std::max(worst_ball, gnorm_estimate(d.v).value / p.mu);
  }
  const double t = seconds_since(t0);
  ok = worst_add <= 1e-10 && worst_dual <= 1.0 + 1e-9 && worst_rise <= 1e-8 && worst_ball <= 1.05 && t < 30.0;
  return {ok, fmt("max |f-u-v-r| %.2e, max |p| %.12f, max energy rise %.2e, max |v|_G/mu %.3f, %.1f s", worst_add,
                  worst_dual, worst_rise, worst_ball, t)};
}

// 4. False alarms on orientation noise plus the NFA tail oracle.
Outcome calibration_check() {
  const int fields = 50, size = 128;
  AlignmentParams p;
  p.epsilon = 1.0;
  std::vector<double> counts;
  for (int s = 0; s < fields; ++s) {
    std::mt19937_64 rng(9000 + s);
    std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
    OrientationField f{ImageGrid(size, size), ImageGrid(size, size, 1.0), std::vector<std::uint8_t>(size * size, 1)};
    for (double& t : f.theta.pixels()) t = u(rng);
    counts.push_back(static_cast<double>(detect_alignments(f, p).size()));
  }
  double mean = 0.0, var = 0.0;
  for (double c : counts) mean += c / fields;
  for (double c : counts) var += (c - mean) * (c - mean) / (fields - 1);
  const double stderr_ = std::sqrt(var / fields);
  double worst = 0.0;
  for (double prob : {1.0 / 16.0, 1.0 / 8.0})
    for (int n = 1; n <= 50; ++n)
      for (int k = 0; k <= n; ++k) {
        const double b = 1e8 * brute_tail(n, k, prob);
        worst = std::max(worst, std::abs(nfa(n, k, prob, 1e8) - b) / b);
      }
  const bool ok = mean <= 1.0 + 2.0 * stderr_ && worst <= 1e-12;
  return {ok, fmt("mean detections %.2f (bound %.2f), max NFA relative error %.1e", mean, 1.0 + 2.0 * stderr_, worst)};
}

// 5. One straight ribbon per seed, texture representation.
Outcome segment_recovery_check() {
  int hits = 0;
  std::string detail;
  for (int seed = 0; seed < 10; ++seed) {
    SceneSpec sp;
    sp.width = sp.height = 224;
    const double th = 0.3 + 0.29 * seed, w = 3 + seed % 6;
    const Point2 c{112, 112}, u{std::cos(th), std::sin(th)};
    sp.ribbons.push_back({{c - 100.0 * u, c + 100.0 * u}, w, 60.0});
    sp.texture = {{10.0, 9 + 0.3 * seed, 0.5 + seed}, {10.0, (9 + 0.3 * seed) * 1.37, 2.1 + seed}};
    sp.noise_sigma = seed % 2 ? 5.0 : 0.0;
    const Scene scene = synth_scene(sp, 500 + seed);
    const PipelineResult r = run_pipeline(scene.image, corpus_config());
    const Point2 a = sp.ribbons[0].path[0], b = sp.ribbons[0].path[1];
    double best = std::numeric_limits<double>::infinity();
    for (const Segment& s : r.segments) {
      if (orientation_gap(s.angle(), th) >= 3.0 * std::numbers::pi / 180.0) continue;
      const double e = std::min(std::max(distance(s.a, a), distance(s.b, b)), std::max(distance(s.a, b), distance(s.b, a)));
      best = std::min(best, e);
    }
    if (best < 5.0) ++hits;
    detail += fmt("%.1f ", best);
  }
  return {hits == 10, fmt("%d/10 seeds within 3 deg and 5 px; best endpoint error per seed: ", hits) + detail};
}

// 6. Snakes on arcs.
Outcome snake_check() {
  bool ok = true;
  std::string detail;
  const PipelineConfig cfg = corpus_config();
  const double radius = 150.0, half = 0.23;  // sagitta 3.96 px, inside the 4 px search range
  for (int seed = 0; seed < 6; ++seed) {
    SceneSpec sp;
    sp.width = sp.height = 128;
    const auto arc = arc_path({64, 64 + radius}, radius, -std::numbers::pi / 2 - half, -std::numbers::pi / 2 + half, 1.0);
    sp.ribbons.push_back({arc, 3.0 + seed % 4, 60.0});
    sp.texture = {{10.0, 10.0, 0.4 + seed}, {10.0, 13.7, 2.0 + seed}};
    sp.noise_sigma = seed % 2 ? 5.0 : 0.0;
    const Scene scene = synth_scene(sp, 100 + seed);
    const ImageGrid feature = snake_feature(make_representation(scene.image, cfg), cfg.snake);
    const Polyline init = segment_to_polyline(arc.front(), arc.back(), cfg.snake.spacing);
    const double before = hausdorff(init.nodes, arc);
    const EvolveResult r = evolve(init, feature, cfg.snake);
    const double after = hausdorff(r.polyline.nodes, arc);
    bool mono = true;
    for (std::size_t i = 1; i < r.score_trace.size(); ++i) mono = mono && r.score_trace[i] >= r.score_trace[i - 1];
    const auto& n = r.polyline.nodes;
    bool spacing = n.size() >= 3;
    for (std::size_t i = 0; i + 2 < n.size(); ++i) {
      const double d = distance(n[i], n[i + 1]);
      spacing = spacing && d >= 0.9 * cfg.snake.spacing && d <= 1.1 * cfg.snake.spacing;
    }
    ok = ok && after < 1.5 && after < 0.5 * before && mono && spacing;
    detail += fmt("%.2f->%.2f%s%s ", before, after, mono ? "" : " non-monotone", spacing ? "" : " bad spacing");
  }
  return {ok, "Hausdorff before->after: " + detail};
}

// 8. Deriche filter.
Outcome deriche_check() {
  const int n = 65, c = 32;
  ImageGrid imp(n, n);
  imp(c, c) = 1.0;
  const ImageGrid out = deriche_smooth(imp, 1.0);
  double err = 0.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) err = std::max(err, std::abs(out(x, y) - analytic_kernel(x - c, 1.0) * analytic_kernel(y - c, 1.0)));
  const ImageGrid flat = deriche_smooth(ImageGrid(40, 30, 1.0), 1.0);
  double dc = 0.0;
  for (double v : flat.pixels()) dc = std::max(dc, std::abs(v - 1.0));

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  const int m = 128, pad = 45;
  ImageGrid f(m, m), g(m, m);
  for (double& v : f.pixels()) v = u(rng);
  for (int y = 0; y < m; ++y)
    for (int x = 0; x < m; ++x) g(x, y) = f(std::clamp(x - 4, 0, m - 1), std::clamp(y - 7, 0, m - 1));
  const ImageGrid sf = deriche_smooth(f, 1.0), sg = deriche_smooth(g, 1.0);
  double shift = 0.0;
  for (int y = pad; y < m - pad; ++y)
    for (int x = pad; x < m - pad; ++x) shift = std::max(shift, std::abs(sg(x, y) - sf(x - 4, y - 7)));
  const bool ok = err < 1e-4 && dc <= 1e-6 && shift <= 1e-12 * 255.0;
  return {ok, fmt("impulse error %.1e, DC deviation %.1e, interior shift deviation %.1e", err, dc, shift)};
}

// 9. Two CLI runs at different thread counts.
Outcome determinism_check() {
  const fs::path dir = fs::temp_directory_path() / ("roadtex_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "scene.ini");
    cfg << "[decomposition]\nmu = 150\n"
           "[scene]\nwidth = 128\nheight = 128\nnoise_sigma = 5\n"
           "[texture.0]\namplitude = 10\nperiod = 9\nangle = 0.6\n"
           "[ribbon.0]\npath = 10 20, 118 90\nwidth = 5\ncontrast = 60\n"
           "[ribbon.1]\narc = 64 200 150 -1.9 -1.3\nwidth = 4\ncontrast = 60\n";
  }
  std::string detail;
  for (int threads : {1, 3}) {
    const std::string cmd = std::string("\"") + ROADTEX_CLI + "\" pipeline --config \"" + (dir / "scene.ini").string() +
                            "\" --seed 11 --threads " + std::to_string(threads) + " --out \"" +
                            (dir / ("t" + std::to_string(threads))).string() + "\" > \"" + (dir / "log.txt").string() +
                            "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "pipeline run failed with --threads " + std::to_string(threads)};
  }
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  bool ok = true;
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "t1")) {
    if (e.path().extension() != ".json") continue;
    ++files;
    const fs::path other = dir / "t3" / e.path().filename();
    const bool same = fs::exists(other) && slurp(e.path()) == slurp(other);
    if (!same) detail += e.path().filename().string() + " differs; ";
    ok = ok && same;
  }
  ok = ok && files >= 5;
  fs::remove_all(dir);
  return {ok, fmt("%d JSON files compared between --threads 1 and 3; ", files) + (detail.empty() ? "identical" : detail)};
}

}  // namespace

int main() {
  report(1, "Ribbon G-norm bounds", ribbon_bounds_check);
  report(2, "Decomposition correctness", decomposition_check);

  // Criteria 3 and 7 share one run of the corpus comparison.
  const auto corpus = standard_corpus();
  const PipelineConfig cfg = corpus_config();
  std::vector<PipelineResult> runs;
  std::optional<Comparison> cmp;
  std::string corpus_error;
  const auto t_corpus = Clock::now();
  try {
    cmp = compare_representations(corpus, cfg, &runs);
  } catch (const std::exception& e) {
    corpus_error = e.what();
  }
  const double corpus_seconds = seconds_since(t_corpus);

  report(3, "Ribbon enhancement in |v|", [&]() -> Outcome {
    if (!cmp) return {false, "comparison failed: " + corpus_error};
    const int n = static_cast<int>(corpus.size());
    int good = 0;
    std::string detail;
    for (int i = 0; i < n; ++i) {
      const Scene s = synth_scene(corpus[i].spec, corpus[i].seed);
      const double tex = contrast_ratio(runs[i].representation, s.ribbon_mask);
      const double edg = contrast_ratio(runs[n + i].representation, s.ribbon_mask);
      if (tex > 1.0 && tex > edg) ++good;
      detail += fmt("%.2f/%.2f ", tex, edg);
    }
    return {good >= 8, fmt("%d/%d scenes; |v| / Deriche ratios: ", good, n) + detail};
  });
  report(4, "A-contrario calibration", calibration_check);
  report(5, "Segment recovery", segment_recovery_check);
  report(6, "Snake refinement", snake_check);
  report(7, "Texture vs edges comparison", [&]() -> Outcome {
    if (!cmp) return {false, "comparison failed: " + corpus_error};
    const bool ok = cmp->mean_completeness_texture >= cmp->mean_completeness_edges && corpus_seconds < 900.0;
    return {ok, fmt("mean completeness texture %.3f, edges %.3f (correctness %.3f / %.3f), corpus run %.0f s",
                    cmp->mean_completeness_texture, cmp->mean_completeness_edges, cmp->mean_correctness_texture,
                    cmp->mean_correctness_edges, corpus_seconds)};
  });
  report(8, "Deriche filter", deriche_check);
  report(9, "Determinism", determinism_check);
  return failures == 0 ? 0 : 1;
}
