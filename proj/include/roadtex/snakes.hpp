#pragma once

// Open active contours: polylines with regularly spaced nodes, refined by
// a greedy per-node search along the normal.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "roadtex/alignment.hpp"
#include "roadtex/baseline.hpp"
#include "roadtex/error.hpp"
#include "roadtex/geometry.hpp"
#include "roadtex/image.hpp"
#include "roadtex/parallel.hpp"

namespace roadtex {

struct Polyline {
  std::vector<Point2> nodes;
  double spacing = 5.0;
};

struct SnakeParams {
  double spacing = 5.0;       ///< delta, pixels
  double search_range = 4.0;  ///< r, pixels along the normal
  double search_step = 1.0;
  int refine_levels = 2;      ///< step halvings after the search settles, each within the previous step
  int max_sweeps = 50;
  double beta = 0.5;           ///< curvature weight
  double window_half = 10.0;   ///< data window half-length along the tangent
  double stop_move = 0.1;      ///< converged when no node moves further
  double feature_alpha = 0.5;  ///< Deriche smoothing of the feature map; 0 disables

  void validate() const {
    if (!(spacing > 0.0)) throw ValidationError("snake: spacing must be > 0");
    if (!(search_range > 0.0)) throw ValidationError("snake: search range must be > 0");
    if (!(search_step > 0.0)) throw ValidationError("snake: search step must be > 0");
    if (refine_levels < 0) throw ValidationError("snake: refine levels must be >= 0");
    if (max_sweeps < 1) throw ValidationError("snake: max sweeps must be >= 1");
    if (!(beta >= 0.0)) throw ValidationError("snake: beta must be >= 0");
    if (!(window_half >= 0.0)) throw ValidationError("snake: window half-length must be >= 0");
    if (!(stop_move >= 0.0)) throw ValidationError("snake: stop threshold must be >= 0");
    if (!(feature_alpha >= 0.0)) throw ValidationError("snake: feature smoothing must be >= 0");
  }
};

/// Feature map the snakes climb: the (optionally smoothed) input.
/// Smoothing turns the flat top of a ribbon response into a ridge.
inline ImageGrid snake_feature(const ImageGrid& img, const SnakeParams& params) {
  params.validate();
  return params.feature_alpha > 0.0 ? deriche_smooth(img, params.feature_alpha) : img;
}

/// floor(l / delta) + 1 nodes evenly spread over the segment.
inline Polyline segment_to_polyline(Point2 a, Point2 b, double delta) {
  if (!(delta > 0.0)) throw DomainError("segment_to_polyline: spacing must be > 0");
  const double len = distance(a, b);
  if (len < 2.0 * delta) throw GeometryError("segment_to_polyline: segment shorter than two node spacings");
  const int count = static_cast<int>(std::floor(len / delta)) + 1;
  Polyline p;
  p.spacing = delta;
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    p.nodes.push_back(a + t * (b - a));
  }
  return p;
}

inline Polyline segment_to_polyline(const Segment& seg, double delta) { return segment_to_polyline(seg.a, seg.b, delta); }

/// Walks the polyline placing nodes at chord distance delta from the
/// previous one. The last node is the original end point; when the leftover
/// is under delta / 2 it replaces the last regular node instead.
inline std::vector<Point2> resample(std::span<const Point2> line, double delta) {
  if (!(delta > 0.0)) throw DomainError("resample: spacing must be > 0");
  if (line.empty()) return {};
  std::vector<Point2> out{line.front()};
  std::size_t seg = 0;
  double t = 0.0;  // position of the last node: segment `seg`, parameter t
  const Point2 end = line.back();
  for (;;) {
    const Point2 c = out.back();
    bool placed = false;
    for (std::size_t j = seg; j + 1 < line.size() && !placed; ++j) {
      const Point2 p = line[j], d = line[j + 1] - line[j];
      const double dd = dot(d, d);
      if (dd == 0.0) continue;
      // First s along the walk with |p + s d - c| = delta.
      const double start = j == seg ? t : 0.0;
      const Point2 pc = p - c;
      const double bq = 2.0 * dot(d, pc), cq = dot(pc, pc) - delta * delta;
      const double disc = bq * bq - 4.0 * dd * cq;
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      for (double s : {(-bq - sq) / (2.0 * dd), (-bq + sq) / (2.0 * dd)}) {
        if (s < start || s > 1.0 || (j == seg && s <= t)) continue;
        out.push_back(p + s * d);
        seg = j;
        t = s;
        placed = true;
        break;
      }
    }
    if (!placed) break;
  }
  const double rest = distance(out.back(), end);
  if (rest < 0.5 * delta && out.size() > 1)
    out.back() = end;
  else if (rest > 0.0)
    out.push_back(end);
  return out;
}

struct EvolveResult {
  Polyline polyline;
  std::vector<double> score_trace;  ///< total score initially and after each kept sweep
  int sweeps = 0;  ///< kept sweeps
  bool converged = false;
};

namespace detail {

class SnakeScorer {
 public:
  SnakeScorer(const ImageGrid& feature, const SnakeParams& params) : f_(feature), p_(params) {}

  // Mean feature over the tangent window at node i. End nodes use a
  // window running inward from the node.
  double data(const std::vector<Point2>& n, std::size_t i) const {
    const std::size_t last = n.size() - 1;
    Point2 t;
    double s0 = -p_.window_half;
    if (i == 0) {
      t = n[1] - n[0];
      s0 = 0.0;
    } else if (i == last) {
      t = n[last - 1] - n[last];
      s0 = 0.0;
    } else {
      t = n[i + 1] - n[i - 1];
    }
    const double len = norm(t);
    if (len == 0.0) return f_.sample(n[i].x, n[i].y);
    t = (1.0 / len) * t;
    const int steps = static_cast<int>(std::floor(p_.window_half - s0 + 1e-9));
    double s = 0.0;
    int count = 0;
    for (int k = 0; k <= steps; ++k) {
      const Point2 q = n[i] + (s0 + k) * t;
      s += f_.sample(q.x, q.y);
      ++count;
    }
    return s / count;
  }

  // Squared second difference at interior node i.
  static double curvature(const std::vector<Point2>& n, std::size_t i) {
    if (i == 0 || i + 1 >= n.size()) return 0.0;
    const Point2 d = n[i - 1] - 2.0 * n[i] + n[i + 1];
    return dot(d, d);
  }

  double term(const std::vector<Point2>& n, std::size_t i) const { return data(n, i) - p_.beta * curvature(n, i); }

  // Every term that depends on node i.
  double local(const std::vector<Point2>& n, std::size_t i) const {
    double s = 0.0;
    const std::size_t lo = i == 0 ? 0 : i - 1, hi = std::min(i + 1, n.size() - 1);
    for (std::size_t j = lo; j <= hi; ++j) s += term(n, j);
    return s;
  }

  double total(const std::vector<Point2>& n) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) s += term(n, i);
    return s;
  }

 private:
  const ImageGrid& f_;
  const SnakeParams& p_;
};

}  // namespace detail

/// Greedy sweeps: each node in turn moves to the best position along its
/// normal (end nodes may also extend along their chord), then the polyline is
/// resampled. A sweep is kept only if the resampled polyline scores at
/// least as well as before and does not cross itself; otherwise the
/// previous polyline is kept. When a sweep is rejected or moves no node
/// further than stop_move, the step is halved and the range shrinks to the
/// old step, refine_levels times.
inline EvolveResult evolve(const Polyline& init, const ImageGrid& feature, const SnakeParams& params) {
  params.validate();
  if (init.nodes.size() < 3) throw GeometryError("evolve: polyline needs at least three nodes");
  const detail::SnakeScorer scorer(feature, params);
  double step = params.search_step, range = params.search_range;
  int level = 0;

  EvolveResult res;
  std::vector<Point2> cur = init.nodes;
  const auto degenerate = [](const std::vector<Point2>& n) {
    for (std::size_t i = 0; i + 1 < n.size(); ++i)
      if (n[i] == n[i + 1]) return true;
    return false;
  };
  if (degenerate(cur)) {
    cur = resample(cur, params.spacing);
    if (cur.size() < 3 || degenerate(cur)) throw GeometryError("evolve: coincident nodes");
  }
  double score = scorer.total(cur);
  res.score_trace.push_back(score);

  for (int sweep = 1; sweep <= params.max_sweeps; ++sweep) {
    const int reach = static_cast<int>(std::floor(range / step + 1e-9));
    std::vector<Point2> next = cur;
    const std::size_t last = next.size() - 1;
    double max_move = 0.0;
    for (std::size_t i = 0; i <= last; ++i) {
      const Point2 chord = i == 0 ? next[1] - next[0] : i == last ? next[last] - next[last - 1] : next[i + 1] - next[i - 1];
      if (norm(chord) == 0.0) continue;
      const Point2 tangent = normalized(chord), normal = perp(tangent);
      const bool end = i == 0 || i == last;
      // End nodes may also extend outward along the chord; retraction is
      // excluded because an inward window never loses by shrinking.
      const Point2 outward = i == 0 ? -1.0 * tangent : tangent;
      const Point2 origin = next[i];
      double best = scorer.local(next, i);
      Point2 best_pos = origin;
      for (int jt = 0; jt <= (end ? reach : 0); ++jt)
        for (int jn = -reach; jn <= reach; ++jn) {
          if (jt == 0 && jn == 0) continue;
          next[i] = origin + (jn * step) * normal + (jt * step) * outward;
          const double s = scorer.local(next, i);
          if (s > best + 1e-12) {
            best = s;
            best_pos = next[i];
          }
        }
      next[i] = best_pos;
      max_move = std::max(max_move, distance(best_pos, origin));
    }

    std::vector<Point2> sampled = resample(next, params.spacing);
    bool settled = sampled.size() < 3 || self_intersects(sampled);
    if (!settled) {
      const double s = scorer.total(sampled);
      if (s < score) {
        settled = true;
      } else {
        cur = std::move(sampled);
        score = s;
        res.score_trace.push_back(score);
        ++res.sweeps;
        settled = max_move <= params.stop_move;
        if (settled && level == params.refine_levels) res.converged = true;
      }
    }
    if (!settled) continue;
    if (level == params.refine_levels) break;
    ++level;
    range = step;
    step *= 0.5;
  }
  res.polyline = Polyline{std::move(cur), params.spacing};
  return res;
}

/// Evolves each polyline independently.
inline std::vector<EvolveResult> evolve_all(const std::vector<Polyline>& polys, const ImageGrid& feature,
                                            const SnakeParams& params) {
  std::vector<EvolveResult> out(polys.size());
  parallel_for(0, static_cast<int>(polys.size()), [&](int i) { out[i] = evolve(polys[i], feature, params); });
  return out;
}

}  // namespace roadtex
