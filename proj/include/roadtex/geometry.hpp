#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace roadtex {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2& operator+=(Point2 o) { x += o.x; y += o.y; return *this; }
  Point2& operator-=(Point2 o) { x -= o.x; y -= o.y; return *this; }
  friend Point2 operator+(Point2 a, Point2 b) { return a += b; }
  friend Point2 operator-(Point2 a, Point2 b) { return a -= b; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend Point2 operator*(Point2 a, double s) { return {s * a.x, s * a.y}; }
  bool operator==(const Point2&) const = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline Point2 perp(Point2 a) { return {-a.y, a.x}; }

inline Point2 normalized(Point2 a) {
  const double n = norm(a);
  return n > 0.0 ? Point2{a.x / n, a.y / n} : Point2{};
}

/// Distance from p to the closed segment [a, b].
inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 d = b - a;
  const double len2 = dot(d, d);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
  return distance(p, a + t * d);
}

inline double point_polyline_distance(Point2 p, std::span<const Point2> line) {
  if (line.empty()) return std::numeric_limits<double>::infinity();
  if (line.size() == 1) return distance(p, line[0]);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i)
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  return best;
}

inline double polyline_length(std::span<const Point2> line) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) len += distance(line[i], line[i + 1]);
  return len;
}

/// Points along the polyline at arc-length spacing <= step, vertices and
/// both endpoints included.
inline std::vector<Point2> densify(std::span<const Point2> line, double step) {
  std::vector<Point2> out;
  if (line.empty()) return out;
  out.push_back(line[0]);
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const double len = distance(line[i], line[i + 1]);
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / step - 1e-12)));
    for (int k = 1; k <= pieces; ++k) out.push_back(line[i] + (static_cast<double>(k) / pieces) * (line[i + 1] - line[i]));
  }
  return out;
}

/// Symmetric Hausdorff distance between two polylines, measured from 0.25
/// px densifications to the exact opposite curve.
inline double hausdorff(std::span<const Point2> a, std::span<const Point2> b) {
  double h = 0.0;
  for (Point2 p : densify(a, 0.25)) h = std::max(h, point_polyline_distance(p, b));
  for (Point2 p : densify(b, 0.25)) h = std::max(h, point_polyline_distance(p, a));
  return h;
}

/// True when closed segments [p1,p2] and [q1,q2] share a point.
inline bool segments_intersect(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
  const auto orient = [](Point2 a, Point2 b, Point2 c) {
    const double v = cross(b - a, c - a);
    return (v > 1e-12) - (v < -1e-12);
  };
  const auto on_segment = [](Point2 a, Point2 b, Point2 c) {
    return std::min(a.x, b.x) - 1e-12 <= c.x && c.x <= std::max(a.x, b.x) + 1e-12 &&
           std::min(a.y, b.y) - 1e-12 <= c.y && c.y <= std::max(a.y, b.y) + 1e-12;
  };
  const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

/// Whether any two non-adjacent edges of an open polyline intersect.
inline bool self_intersects(std::span<const Point2> line) {
  const std::size_t n = line.size();
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i + 2; j + 1 < n; ++j)
      if (segments_intersect(line[i], line[i + 1], line[j], line[j + 1])) return true;
  return false;
}

/// Circular-arc polyline: center c, radius r, angles a0..a1 (radians),
/// vertices every `step` px of arc length.
inline std::vector<Point2> arc_path(Point2 c, double r, double a0, double a1, double step = 1.0) {
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(a1 - a0) * r / step)));
  std::vector<Point2> pts;
  pts.reserve(pieces + 1);
  for (int k = 0; k <= pieces; ++k) {
    const double a = a0 + (a1 - a0) * k / pieces;
    pts.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return pts;
}

}  // namespace roadtex
