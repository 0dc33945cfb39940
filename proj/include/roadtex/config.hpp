#pragma once

// INI configuration: one section per module, plus an optional scene
// description ([scene], [texture.N], [ribbon.N]).

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "roadtex/alignment.hpp"
#include "roadtex/baseline.hpp"
#include "roadtex/decomposition.hpp"
#include "roadtex/error.hpp"
#include "roadtex/snakes.hpp"
#include "roadtex/synth.hpp"

namespace roadtex {

enum class Representation { texture, edges, raw };

inline const char* to_string(Representation r) {
  switch (r) {
    case Representation::texture: return "texture";
    case Representation::edges: return "edges";
    case Representation::raw: return "raw";
  }
  return "?";
}

inline Representation parse_representation(const std::string& s) {
  if (s == "texture") return Representation::texture;
  if (s == "edges") return Representation::edges;
  if (s == "raw") return Representation::raw;
  throw ValidationError("unknown representation '" + s + "' (expected texture, edges or raw)");
}

struct PipelineConfig {
  DecompositionParams decomposition;
  AlignmentParams alignment;
  bool fuse = true;
  SnakeParams snake;
  DericheParams deriche;
  Representation representation = Representation::texture;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  double buffer = 3.0;  ///< evaluation distance, pixels

  void validate() const {
    decomposition.validate();
    alignment.validate();
    snake.validate();
    deriche.validate();
    if (!(buffer > 0.0)) throw ValidationError("pipeline: buffer must be > 0");
  }
};

namespace detail {

using boost::property_tree::ptree;

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw ValidationError("config: '" + key + "' is not a number: '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& key, const std::string& s) {
  const double v = parse_double(key, s);
  if (v != std::floor(v)) throw ValidationError("config: '" + key + "' must be an integer");
  return static_cast<long long>(v);
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ValidationError("config: '" + key + "' must be true or false");
}

// Reads the keys of one section, rejecting unknown ones.
class Section {
 public:
  Section(const ptree* node, std::string name) : node_(node), name_(std::move(name)) {}

  void num(const char* key, double& out) {
    if (auto s = get(key)) out = parse_double(full(key), *s);
  }
  void integer(const char* key, int& out) {
    if (auto s = get(key)) out = static_cast<int>(parse_int(full(key), *s));
  }
  void flag(const char* key, bool& out) {
    if (auto s = get(key)) out = parse_bool(full(key), *s);
  }
  void opt(const char* key, std::optional<double>& out) {
    if (auto s = get(key)) out = *s == "auto" ? std::nullopt : std::optional<double>(parse_double(full(key), *s));
  }
  std::optional<std::string> get(const char* key) {
    seen_.insert(key);
    if (!node_) return std::nullopt;
    if (auto v = node_->get_optional<std::string>(ptree::path_type(key, '\0'))) return *v;
    return std::nullopt;
  }
  void finish() const {
    if (!node_) return;
    for (const auto& [k, v] : *node_)
      if (!seen_.count(k)) throw ValidationError("config: unknown key '" + full(k.c_str()) + "'");
  }

 private:
  std::string full(const char* key) const { return name_ + "." + key; }
  const ptree* node_;
  std::string name_;
  std::set<std::string> seen_;
};

inline const ptree* child(const ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return it == root.not_found() ? nullptr : &it->second;
}

inline ptree read_ini(std::istream& in) {
  ptree root;
  try {
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return root;
}

inline std::vector<Point2> parse_points(const std::string& key, const std::string& s) {
  std::vector<double> v;
  std::string tok;
  std::istringstream in(s);
  while (in >> tok) {
    for (char& c : tok)
      if (c == ',' || c == ';') c = ' ';
    std::istringstream part(tok);
    std::string x;
    while (part >> x) v.push_back(parse_double(key, x));
  }
  if (v.size() % 2 != 0) throw ValidationError("config: '" + key + "' needs x y pairs");
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < v.size(); i += 2) pts.push_back({v[i], v[i + 1]});
  return pts;
}

}  // namespace detail

/// Parses the module sections of an INI document. Missing keys keep their
/// defaults; unknown keys and sections are errors.
inline PipelineConfig parse_config(std::istream& in) {
  using detail::Section;
  const detail::ptree root = detail::read_ini(in);
  static const std::set<std::string> known{"decomposition", "alignment", "snake", "deriche", "pipeline", "scene"};
  for (const auto& [name, node] : root)
    if (!known.count(name) && name.rfind("ribbon.", 0) != 0 && name.rfind("texture.", 0) != 0)
      throw ValidationError("config: unknown section [" + name + "]");

  PipelineConfig c;
  Section d(detail::child(root, "decomposition"), "decomposition");
  d.num("lambda", c.decomposition.lambda);
  d.num("mu", c.decomposition.mu);
  d.num("tau", c.decomposition.tau);
  d.integer("max_iter", c.decomposition.max_iter);
  d.integer("inner_max_iter", c.decomposition.inner_max_iter);
  d.num("tol", c.decomposition.tol);
  d.num("inner_tol", c.decomposition.inner_tol);
  d.finish();

  Section a(detail::child(root, "alignment"), "alignment");
  a.num("precision", c.alignment.precision);
  a.num("epsilon", c.alignment.epsilon);
  a.integer("sample_step", c.alignment.sample_step);
  a.num("magnitude_floor", c.alignment.magnitude_floor);
  a.num("gradient_alpha", c.alignment.gradient_alpha);
  a.flag("fuse", c.fuse);
  a.num("fuse_angle_deg", c.alignment.fuse_angle_deg);
  a.num("fuse_lateral", c.alignment.fuse_lateral);
  a.num("fuse_gap", c.alignment.fuse_gap);
  a.finish();

  Section s(detail::child(root, "snake"), "snake");
  s.num("spacing", c.snake.spacing);
  s.num("search_range", c.snake.search_range);
  s.num("search_step", c.snake.search_step);
  s.integer("refine_levels", c.snake.refine_levels);
  s.integer("max_sweeps", c.snake.max_sweeps);
  s.num("beta", c.snake.beta);
  s.num("window_half", c.snake.window_half);
  s.num("stop_move", c.snake.stop_move);
  s.num("feature_alpha", c.snake.feature_alpha);
  s.finish();

  Section e(detail::child(root, "deriche"), "deriche");
  e.num("alpha", c.deriche.alpha);
  e.opt("low", c.deriche.low);
  e.opt("high", c.deriche.high);
  e.flag("nms", c.deriche.enable_nms);
  e.finish();

  Section p(detail::child(root, "pipeline"), "pipeline");
  if (auto r = p.get("representation")) c.representation = parse_representation(*r);
  if (auto o = p.get("output_dir")) c.output_dir = *o;
  if (auto sd = p.get("seed")) c.seed = static_cast<std::uint64_t>(detail::parse_int("pipeline.seed", *sd));
  p.num("buffer", c.buffer);
  p.finish();

  c.validate();
  return c;
}

/// Scene description from the same document; nullopt without [scene].
/// A ribbon takes either `path = x y, x y, ...` or `arc = cx cy r a0 a1`
/// (angles in radians).
inline std::optional<SceneSpec> parse_scene(std::istream& in) {
  using detail::Section;
  const detail::ptree root = detail::read_ini(in);
  const detail::ptree* scene = detail::child(root, "scene");
  if (!scene) return std::nullopt;
  SceneSpec spec;
  Section sc(scene, "scene");
  sc.integer("width", spec.width);
  sc.integer("height", spec.height);
  sc.num("background", spec.background);
  sc.num("noise_sigma", spec.noise_sigma);
  sc.finish();
  std::map<long long, TextureWave> waves;
  std::map<long long, RibbonSpec> ribbons;
  for (const auto& [name, node] : root) {
    if (name.rfind("texture.", 0) == 0) {
      TextureWave t;
      Section s(&node, name);
      s.num("amplitude", t.amplitude);
      s.num("period", t.period);
      s.num("angle", t.angle);
      s.finish();
      waves[detail::parse_int(name, name.substr(8))] = t;
    } else if (name.rfind("ribbon.", 0) == 0) {
      RibbonSpec r;
      Section s(&node, name);
      s.num("width", r.width);
      s.num("contrast", r.contrast);
      const auto path = s.get("path");
      const auto arc = s.get("arc");
      s.finish();
      if (path.has_value() == arc.has_value()) throw ValidationError("config: [" + name + "] needs exactly one of path, arc");
      if (path) {
        r.path = detail::parse_points(name + ".path", *path);
      } else {
        const auto v = detail::parse_points(name + ".arc", *arc + " 0");
        if (v.size() != 3) throw ValidationError("config: '" + name + ".arc' needs cx cy r a0 a1");
        r.path = arc_path(v[0], v[1].x, v[1].y, v[2].x, 1.0);
      }
      ribbons[detail::parse_int(name, name.substr(7))] = r;
    }
  }
  for (auto& [i, t] : waves) spec.texture.push_back(t);
  for (auto& [i, r] : ribbons) spec.ribbons.push_back(r);
  spec.validate();
  return spec;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

inline std::optional<SceneSpec> load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_scene(in);
}

/// Writes every module setting; doubles are written so they read back
/// exactly.
inline void write_config(std::ostream& out, const PipelineConfig& c, const SceneSpec* scene = nullptr) {
  using detail::format_double;
  const auto kv = [&](const char* k, const std::string& v) { out << k << " = " << v << '\n'; };
  const auto num = [&](const char* k, double v) { kv(k, format_double(v)); };
  const auto flag = [&](const char* k, bool v) { kv(k, v ? "true" : "false"); };
  out << "[decomposition]\n";
  num("lambda", c.decomposition.lambda);
  num("mu", c.decomposition.mu);
  num("tau", c.decomposition.tau);
  num("max_iter", c.decomposition.max_iter);
  num("inner_max_iter", c.decomposition.inner_max_iter);
  num("tol", c.decomposition.tol);
  num("inner_tol", c.decomposition.inner_tol);
  out << "\n[alignment]\n";
  num("precision", c.alignment.precision);
  num("epsilon", c.alignment.epsilon);
  num("sample_step", c.alignment.sample_step);
  num("magnitude_floor", c.alignment.magnitude_floor);
  num("gradient_alpha", c.alignment.gradient_alpha);
  flag("fuse", c.fuse);
  num("fuse_angle_deg", c.alignment.fuse_angle_deg);
  num("fuse_lateral", c.alignment.fuse_lateral);
  num("fuse_gap", c.alignment.fuse_gap);
  out << "\n[snake]\n";
  num("spacing", c.snake.spacing);
  num("search_range", c.snake.search_range);
  num("search_step", c.snake.search_step);
  num("refine_levels", c.snake.refine_levels);
  num("max_sweeps", c.snake.max_sweeps);
  num("beta", c.snake.beta);
  num("window_half", c.snake.window_half);
  num("stop_move", c.snake.stop_move);
  num("feature_alpha", c.snake.feature_alpha);
  out << "\n[deriche]\n";
  num("alpha", c.deriche.alpha);
  kv("low", c.deriche.low ? format_double(*c.deriche.low) : "auto");
  kv("high", c.deriche.high ? format_double(*c.deriche.high) : "auto");
  flag("nms", c.deriche.enable_nms);
  out << "\n[pipeline]\n";
  kv("representation", to_string(c.representation));
  kv("output_dir", c.output_dir);
  kv("seed", std::to_string(c.seed));
  num("buffer", c.buffer);
  if (!scene) return;
  out << "\n[scene]\n";
  num("width", scene->width);
  num("height", scene->height);
  num("background", scene->background);
  num("noise_sigma", scene->noise_sigma);
  for (std::size_t i = 0; i < scene->texture.size(); ++i) {
    out << "\n[texture." << i << "]\n";
    num("amplitude", scene->texture[i].amplitude);
    num("period", scene->texture[i].period);
    num("angle", scene->texture[i].angle);
  }
  for (std::size_t i = 0; i < scene->ribbons.size(); ++i) {
    const RibbonSpec& r = scene->ribbons[i];
    out << "\n[ribbon." << i << "]\n";
    num("width", r.width);
    num("contrast", r.contrast);
    std::string path;
    for (std::size_t k = 0; k < r.path.size(); ++k)
      path += (k ? ", " : "") + format_double(r.path[k].x) + " " + format_double(r.path[k].y);
    kv("path", path);
  }
}

}  // namespace roadtex
