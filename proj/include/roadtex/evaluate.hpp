#pragma once

// Buffer-based centerline scoring.

#include <cmath>
#include <limits>
#include <vector>

#include "roadtex/error.hpp"
#include "roadtex/geometry.hpp"

namespace roadtex {

using PolylineSet = std::vector<std::vector<Point2>>;

struct EvalReport {
  double completeness = 0.0;  ///< share of ground-truth length within d of a detection
  double correctness = 1.0;   ///< share of detected length within d of the ground truth
  double rmse = 0.0;          ///< over detected points within d of the ground truth
  double buffer = 3.0;
  double truth_length = 0.0;
  double detected_length = 0.0;
  int truth_points = 0;
  int detected_points = 0;
  int matched_truth_points = 0;
  int matched_detected_points = 0;
  bool zero_length = false;  ///< nothing detected; correctness reported as 1
};

namespace detail {

inline double distance_to_set(Point2 p, const PolylineSet& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& line : set) {
    if (line.size() == 1) best = std::min(best, distance(p, line[0]));
    for (std::size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  }
  return best;
}

}  // namespace detail

/// Both sets are densified at 0.5 px; each sample counts as matched when
/// it lies within d of the other set's exact curves.
inline EvalReport evaluate(const PolylineSet& detected, const PolylineSet& truth, double d) {
  if (!(d > 0.0)) throw DomainError("evaluate: buffer must be > 0");
  double truth_len = 0.0;
  for (const auto& l : truth) truth_len += polyline_length(l);
  if (truth.empty() || !(truth_len > 0.0)) throw DomainError("evaluate: empty ground truth");

  EvalReport r;
  r.buffer = d;
  r.truth_length = truth_len;
  for (const auto& l : detected) r.detected_length += polyline_length(l);

  for (const auto& l : truth)
    for (Point2 p : densify(l, 0.5)) {
      ++r.truth_points;
      if (!detected.empty() && detail::distance_to_set(p, detected) <= d) ++r.matched_truth_points;
    }
  r.completeness = static_cast<double>(r.matched_truth_points) / r.truth_points;

  if (r.detected_length == 0.0) {
    r.zero_length = true;
    return r;
  }
  double sq = 0.0;
  for (const auto& l : detected)
    for (Point2 p : densify(l, 0.5)) {
      ++r.detected_points;
      const double dist = detail::distance_to_set(p, truth);
      if (dist <= d) {
        ++r.matched_detected_points;
        sq += dist * dist;
      }
    }
  r.correctness = static_cast<double>(r.matched_detected_points) / r.detected_points;
  r.rmse = r.matched_detected_points > 0 ? std::sqrt(sq / r.matched_detected_points) : 0.0;
  return r;
}

}  // namespace roadtex
