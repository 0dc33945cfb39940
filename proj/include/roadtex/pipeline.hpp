#pragma once

// End-to-end chain: representation -> orientation field -> alignments ->
// fusion -> snakes, with on-disk intermediates, evaluation and the
// texture-vs-edges comparison.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "roadtex/alignment.hpp"
#include "roadtex/baseline.hpp"
#include "roadtex/config.hpp"
#include "roadtex/decomposition.hpp"
#include "roadtex/evaluate.hpp"
#include "roadtex/io.hpp"
#include "roadtex/snakes.hpp"
#include "roadtex/synth.hpp"

namespace roadtex {

/// Error raised inside a pipeline stage; what() starts with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

enum class Stage { representation, detect, fuse, refine };

inline Stage parse_stage(const std::string& s) {
  if (s == "representation") return Stage::representation;
  if (s == "detect") return Stage::detect;
  if (s == "fuse") return Stage::fuse;
  if (s == "refine") return Stage::refine;
  throw ValidationError("unknown stage '" + s + "' (expected representation, detect, fuse or refine)");
}

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  ImageGrid representation{1, 1};  ///< detector input
  std::optional<DecompositionResult> decomposition;
  std::vector<Segment> segments;  ///< raw detections
  std::vector<Segment> fused;     ///< after fusion (equal to segments when fusion is off)
  std::vector<EvolveResult> refined;
  std::vector<StageTime> timing;

  PolylineSet polylines() const {
    PolylineSet out;
    for (const auto& r : refined) out.push_back(r.polyline.nodes);
    return out;
  }
};

namespace detail {

template <class F>
auto run_stage(const char* name, std::vector<StageTime>& timing, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timing.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    } else {
      auto r = f();
      timing.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
      return r;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace detail

/// The detector input for the selected representation: |v| rescaled to
/// [0, 255], the Deriche gradient magnitude rescaled likewise, or the
/// input itself.
inline ImageGrid make_representation(const ImageGrid& img, const PipelineConfig& cfg,
                                     std::optional<DecompositionResult>* decomposition = nullptr) {
  switch (cfg.representation) {
    case Representation::texture: {
      DecompositionResult d = decompose(img, cfg.decomposition);
      ImageGrid rep = rescale_to_255(abs(d.v));
      if (decomposition) *decomposition = std::move(d);
      return rep;
    }
    case Representation::edges: {
      DericheParams p = cfg.deriche;
      p.enable_nms = false;
      return rescale_to_255(canny_deriche(img, p));
    }
    case Representation::raw:
      return img;
  }
  throw ValidationError("invalid representation");
}

/// Segments long enough to carry a snake become polylines; the rest are
/// dropped.
inline std::vector<EvolveResult> refine_segments(const std::vector<Segment>& segs, const ImageGrid& representation,
                                                 const SnakeParams& params) {
  std::vector<Polyline> init;
  for (const Segment& s : segs)
    if (s.length() >= 2.0 * params.spacing) init.push_back(segment_to_polyline(s, params.spacing));
  const ImageGrid feature = snake_feature(representation, params);
  return evolve_all(init, feature, params);
}

/// Runs the stages from `from` onward, starting from the state held in
/// `state` (only the fields produced by earlier stages are read).
inline void continue_pipeline(PipelineResult& state, const PipelineConfig& cfg, Stage from) {
  cfg.validate();
  if (from <= Stage::detect)
    state.segments = detail::run_stage("detect", state.timing, [&] {
      return detect_alignments(orientation_field(state.representation, cfg.alignment.magnitude_floor, cfg.alignment.gradient_alpha), cfg.alignment);
    });
  if (from <= Stage::fuse)
    state.fused = detail::run_stage("fuse", state.timing, [&] {
      return cfg.fuse ? fuse_segments(state.segments, cfg.alignment) : state.segments;
    });
  state.refined = detail::run_stage("refine", state.timing, [&] { return refine_segments(state.fused, state.representation, cfg.snake); });
}

inline PipelineResult run_pipeline(const ImageGrid& img, const PipelineConfig& cfg) {
  cfg.validate();
  PipelineResult res;
  res.representation = detail::run_stage("representation", res.timing, [&] {
    if (!all_finite(img)) throw DomainError("input has non-finite pixels");
    return make_representation(img, cfg, &res.decomposition);
  });
  continue_pipeline(res, cfg, Stage::detect);
  return res;
}

// ---------------------------------------------------------------- JSON

inline nlohmann::json to_json(const Segment& s) {
  return {{"x1", s.a.x},   {"y1", s.a.y}, {"x2", s.b.x},       {"y2", s.b.y},
          {"length", s.length()}, {"k", s.k},   {"n", s.n},         {"nfa", s.nfa()},
          {"log10_nfa", s.log10_nfa}, {"width", s.width_hint}};
}

inline Segment segment_from_json(const nlohmann::json& j) {
  Segment s;
  s.a = {j.at("x1").get<double>(), j.at("y1").get<double>()};
  s.b = {j.at("x2").get<double>(), j.at("y2").get<double>()};
  s.k = j.at("k").get<int>();
  s.n = j.at("n").get<int>();
  s.log10_nfa = j.contains("log10_nfa") ? j.at("log10_nfa").get<double>() : std::log10(j.at("nfa").get<double>());
  s.width_hint = j.value("width", 1.0);
  if (s.k < 0 || s.k > s.n || !(s.length() > 0.0)) throw ValidationError("segment JSON: invalid segment");
  return s;
}

inline nlohmann::json segments_json(const std::vector<Segment>& segs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : segs) arr.push_back(to_json(s));
  return arr;
}

inline std::vector<Segment> segments_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("segment JSON: expected an array");
  std::vector<Segment> out;
  for (const auto& e : j) out.push_back(segment_from_json(e));
  return out;
}

inline nlohmann::json polylines_json(const std::vector<EvolveResult>& polys) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : polys) {
    nlohmann::json nodes = nlohmann::json::array();
    for (Point2 p : r.polyline.nodes) nodes.push_back({p.x, p.y});
    arr.push_back({{"nodes", nodes}, {"sweeps", r.sweeps}, {"converged", r.converged}, {"score_trace", r.score_trace}});
  }
  return arr;
}

inline PolylineSet polylines_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("polyline JSON: expected an array");
  PolylineSet out;
  for (const auto& e : j) {
    std::vector<Point2> line;
    for (const auto& p : e.at("nodes")) line.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    out.push_back(std::move(line));
  }
  return out;
}

inline nlohmann::json to_json(const DecompositionResult& d) {
  return {{"iterations", d.iterations}, {"converged", d.converged},   {"final_change", d.final_change},
          {"energy_trace", d.energy_trace}, {"max_dual_norm", d.max_dual_norm}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"completeness", r.completeness},
          {"correctness", r.correctness},
          {"rmse", r.rmse},
          {"buffer", r.buffer},
          {"truth_length", r.truth_length},
          {"detected_length", r.detected_length},
          {"truth_points", r.truth_points},
          {"detected_points", r.detected_points},
          {"matched_truth_points", r.matched_truth_points},
          {"matched_detected_points", r.matched_detected_points},
          {"zero_length", r.zero_length}};
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what(), e.byte);
  }
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ------------------------------------------------------------- overlays

namespace detail {

inline void draw_line(ImageGrid& img, Point2 a, Point2 b, double value) {
  for (Point2 p : densify(std::vector<Point2>{a, b}, 0.5)) {
    const int x = static_cast<int>(std::lround(p.x)), y = static_cast<int>(std::lround(p.y));
    if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) img(x, y) = value;
  }
}

}  // namespace detail

/// The image mapped to [0, 191] with curves drawn at 255.
inline ImageGrid render_overlay(const ImageGrid& img, const PolylineSet& curves) {
  ImageGrid out = img;
  double lo = out[0], hi = out[0];
  for (double v : out.pixels()) lo = std::min(lo, v), hi = std::max(hi, v);
  const double s = hi > lo ? 191.0 / (hi - lo) : 0.0;
  for (double& v : out.pixels()) v = (v - lo) * s;
  for (const auto& c : curves)
    for (std::size_t i = 0; i + 1 < c.size(); ++i) detail::draw_line(out, c[i], c[i + 1], 255.0);
  return out;
}

inline PolylineSet segment_curves(const std::vector<Segment>& segs) {
  PolylineSet out;
  for (const auto& s : segs) out.push_back({s.a, s.b});
  return out;
}

// ---------------------------------------------------------- persistence

/// Writes every intermediate to `dir`: representation.rtx (exact) and
/// .png, u/v/residual when decomposed, segments.json, fused.json,
/// polylines.json, overlays and the config snapshot. Timing goes to
/// timing.txt so the JSON files depend only on config and input.
inline void save_intermediates(const PipelineResult& r, const ImageGrid& input, const PipelineConfig& cfg,
                               const std::filesystem::path& dir, const SceneSpec* scene = nullptr) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream c(dir / "config.ini");
    write_config(c, cfg, scene);
  }
  save_raw(r.representation, dir / "representation.rtx");
  save_image(r.representation, dir / "representation.png");
  if (r.decomposition) {
    save_image(r.decomposition->u, dir / "u.png");
    save_image(r.decomposition->v, dir / "v.png", Quantize::normalize);
    save_image(r.decomposition->residual, dir / "residual.png", Quantize::normalize);
    write_json(to_json(*r.decomposition), dir / "decomposition.json");
  }
  write_json(segments_json(r.segments), dir / "segments.json");
  write_json(segments_json(r.fused), dir / "fused.json");
  write_json(polylines_json(r.refined), dir / "polylines.json");
  save_image(render_overlay(input, segment_curves(r.fused)), dir / "segments_overlay.png");
  save_image(render_overlay(input, r.polylines()), dir / "overlay.png");
  std::ofstream t(dir / "timing.txt");
  for (const auto& s : r.timing) t << s.stage << ' ' << s.seconds << '\n';
}

/// Reloads what the stages before `from` wrote to `dir` and runs the rest.
inline PipelineResult resume_pipeline(const std::filesystem::path& dir, const PipelineConfig& cfg, Stage from) {
  PipelineResult r;
  if (from == Stage::representation) throw ValidationError("resume: nothing to resume before the representation stage");
  r.representation = load_raw(dir / "representation.rtx");
  if (from >= Stage::fuse) r.segments = segments_from_json(read_json(dir / "segments.json"));
  if (from >= Stage::refine) r.fused = segments_from_json(read_json(dir / "fused.json"));
  continue_pipeline(r, cfg, from);
  return r;
}

// ------------------------------------------------------------- corpus

struct CorpusScene {
  SceneSpec spec;
  std::uint64_t seed = 0;
};

/// Ten 256x256 scenes: 1-3 ribbons (straight or circular arcs), widths
/// 3-8 px, two-wave sinusoidal background, noise sigma alternating 0 / 5.
inline std::vector<CorpusScene> standard_corpus(std::uint64_t seed = 7, int count = 10) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uni = [&](double a, double b) { return a + (b - a) * unit(rng); };
  std::vector<CorpusScene> out;
  for (int i = 0; i < count; ++i) {
    CorpusScene cs;
    cs.seed = seed * 1000 + static_cast<std::uint64_t>(i);
    SceneSpec& s = cs.spec;
    s.width = s.height = 256;
    s.background = 100.0;
    s.noise_sigma = i % 2 == 0 ? 0.0 : 5.0;
    const double period = uni(8.0, 12.0);
    const double angle = uni(0.0, std::numbers::pi);
    s.texture = {{10.0, period, angle}, {10.0, period * 1.37, angle + uni(0.8, 2.3)}};
    const int ribbons = 1 + static_cast<int>(unit(rng) * 3.0);
    for (int k = 0; k < ribbons; ++k) {
      RibbonSpec r;
      r.width = std::floor(uni(3.0, 9.0));
      r.contrast = 60.0;
      if (unit(rng) < 0.5) {
        // Straight, through a point near the center, clipped 24 px from the border.
        const double th = uni(0.0, std::numbers::pi);
        const Point2 c{uni(96.0, 160.0), uni(96.0, 160.0)}, u{std::cos(th), std::sin(th)};
        double lo = -1e9, hi = 1e9;
        for (int axis = 0; axis < 2; ++axis) {
          const double cc = axis == 0 ? c.x : c.y, uu = axis == 0 ? u.x : u.y;
          if (std::abs(uu) < 1e-9) continue;
          double t1 = (24.0 - cc) / uu, t2 = (231.0 - cc) / uu;
          if (t1 > t2) std::swap(t1, t2);
          lo = std::max(lo, t1);
          hi = std::min(hi, t2);
        }
        r.path = {c + lo * u, c + hi * u};
      } else {
        // Circular arc of radius 90-160 px spanning 60-110 degrees.
        const double radius = uni(90.0, 160.0), span = uni(60.0, 110.0) * std::numbers::pi / 180.0;
        const double mid = uni(0.0, 2.0 * std::numbers::pi);
        const Point2 arc_mid{uni(96.0, 160.0), uni(96.0, 160.0)};
        const Point2 center = arc_mid - radius * Point2{std::cos(mid), std::sin(mid)};
        std::vector<Point2> path = arc_path(center, radius, mid - span / 2.0, mid + span / 2.0, 1.0);
        // Keep the part inside the 24 px margin.
        std::vector<Point2> kept;
        for (Point2 p : path) {
          const bool inside = p.x >= 24.0 && p.y >= 24.0 && p.x <= 231.0 && p.y <= 231.0;
          if (inside)
            kept.push_back(p);
          else if (!kept.empty())
            break;
        }
        if (kept.size() < 40) {
          --k;
          continue;
        }
        r.path = std::move(kept);
      }
      s.ribbons.push_back(std::move(r));
    }
    out.push_back(std::move(cs));
  }
  return out;
}

struct ComparisonRow {
  int scene = 0;
  Representation representation = Representation::texture;
  EvalReport report;
  int segments = 0;
  int polylines = 0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;  ///< texture rows first, then edges, in scene order
  double mean_completeness_texture = 0.0;
  double mean_completeness_edges = 0.0;
  double mean_correctness_texture = 0.0;
  double mean_correctness_edges = 0.0;
};

/// Runs the texture and edges arms on every scene (scenes in parallel).
/// `results`, when given, receives each run in row order.
inline Comparison compare_representations(const std::vector<CorpusScene>& corpus, const PipelineConfig& cfg,
                                          std::vector<PipelineResult>* results = nullptr) {
  if (corpus.empty()) throw DomainError("compare: empty corpus");
  const int n = static_cast<int>(corpus.size());
  std::vector<ComparisonRow> rows(2 * corpus.size());
  if (results) results->assign(2 * corpus.size(), PipelineResult{});
  parallel_for(0, 2 * n, [&](int job) {
    const int i = job % n;
    const Representation rep = job < n ? Representation::texture : Representation::edges;
    const Scene scene = synth_scene(corpus[i].spec, corpus[i].seed);
    PipelineConfig c = cfg;
    c.representation = rep;
    PipelineResult r = run_pipeline(scene.image, c);
    rows[job] = {i, rep, evaluate(r.polylines(), scene.centerlines, cfg.buffer), static_cast<int>(r.fused.size()),
                 static_cast<int>(r.refined.size())};
    if (results) (*results)[job] = std::move(r);
  });
  Comparison out;
  out.rows = std::move(rows);
  for (int i = 0; i < n; ++i) {
    out.mean_completeness_texture += out.rows[i].report.completeness / n;
    out.mean_correctness_texture += out.rows[i].report.correctness / n;
    out.mean_completeness_edges += out.rows[n + i].report.completeness / n;
    out.mean_correctness_edges += out.rows[n + i].report.correctness / n;
  }
  return out;
}

inline nlohmann::json to_json(const Comparison& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : c.rows)
    rows.push_back({{"scene", r.scene},
                    {"representation", to_string(r.representation)},
                    {"segments", r.segments},
                    {"polylines", r.polylines},
                    {"report", to_json(r.report)}});
  return {{"rows", rows},
          {"mean", {{"texture", {{"completeness", c.mean_completeness_texture}, {"correctness", c.mean_correctness_texture}}},
                    {"edges", {{"completeness", c.mean_completeness_edges}, {"correctness", c.mean_correctness_edges}}}}}};
}

/// Settings used for the standard corpus: a texture radius large enough
/// for 3-8 px ribbons of contrast 60 to move into v.
inline PipelineConfig corpus_config() {
  PipelineConfig c;
  c.decomposition.mu = 150.0;
  return c;
}

}  // namespace roadtex
