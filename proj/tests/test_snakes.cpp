#include <gtest/gtest.h>

#include <numbers>

#include "roadtex/decomposition.hpp"
#include "roadtex/snakes.hpp"
#include "roadtex/synth.hpp"

using namespace roadtex;

namespace {

Scene ribbon_scene(std::vector<Point2> path, double width = 6.0, int size = 96) {
  SceneSpec spec;
  spec.width = spec.height = size;
  spec.background = 20.0;
  spec.ribbons.push_back({std::move(path), width, 60.0});
  return synth_scene(spec, 3);
}

double mean_lateral(const std::vector<Point2>& nodes, Point2 a, Point2 b) {
  double s = 0.0;
  for (Point2 p : nodes) s += point_segment_distance(p, a, b);
  return s / static_cast<double>(nodes.size());
}

void expect_spacing(const std::vector<Point2>& nodes, double delta) {
  ASSERT_GE(nodes.size(), 3u);
  for (std::size_t i = 0; i + 2 < nodes.size(); ++i) {
    const double d = distance(nodes[i], nodes[i + 1]);
    EXPECT_GE(d, 0.9 * delta - 1e-9);
    EXPECT_LE(d, 1.1 * delta + 1e-9);
  }
  const double last = distance(nodes[nodes.size() - 2], nodes.back());
  EXPECT_GE(last, 0.5 * delta - 1e-9);
  EXPECT_LE(last, 1.5 * delta + 1e-9);
}

}  // namespace

TEST(SegmentToPolyline, TenPixelsAtTwo) {
  const Polyline p = segment_to_polyline({0, 0}, {10, 0}, 2.0);
  ASSERT_EQ(p.nodes.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_DOUBLE_EQ(p.nodes[i].x, 2.0 * i);
    EXPECT_EQ(p.nodes[i].y, 0.0);
  }
}

TEST(SegmentToPolyline, NinePixelsRebalanced) {
  const Polyline p = segment_to_polyline({0, 0}, {9, 0}, 2.0);
  ASSERT_EQ(p.nodes.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(p.nodes[i].x, 2.25 * i);
}

TEST(SegmentToPolyline, TooShortIsGeometryError) {
  EXPECT_THROW(segment_to_polyline({0, 0}, {3.9, 0}, 2.0), GeometryError);
  EXPECT_THROW(segment_to_polyline({0, 0}, {10, 0}, 0.0), DomainError);
}

TEST(SegmentToPolyline, NodeCountProperty) {
  for (double len = 4.0; len < 80.0; len += 1.37)
    for (double delta : {2.0, 3.5, 5.0}) {
      if (len < 2.0 * delta) continue;
      const Polyline p = segment_to_polyline({1, 2}, {1 + len * 0.6, 2 + len * 0.8}, delta);
      EXPECT_EQ(p.nodes.size(), static_cast<std::size_t>(std::floor(len / delta)) + 1);
      EXPECT_NEAR(distance(p.nodes.back(), {1 + len * 0.6, 2 + len * 0.8}), 0.0, 1e-9);
    }
}

TEST(Resample, KeepsSpacingOnCurves) {
  const auto arc = arc_path({50, 50}, 30.0, 0.0, 2.0, 0.3);
  for (double delta : {2.0, 5.0, 7.5}) {
    const auto r = resample(arc, delta);
    expect_spacing(r, delta);
    EXPECT_EQ(r.front(), arc.front());
    EXPECT_EQ(r.back(), arc.back());
  }
}

TEST(Evolve, CenteredPolylineIsFixed) {
  const Point2 a{20, 48}, b{76, 48};
  const Scene s = ribbon_scene({a, b});
  SnakeParams p;
  const Polyline init = segment_to_polyline(a + Point2{5, 0}, b - Point2{5, 0}, p.spacing);
  const EvolveResult r = evolve(init, snake_feature(s.image, p), p);
  EXPECT_LT(mean_lateral(r.polyline.nodes, a, b), 0.2);
  for (Point2 q : r.polyline.nodes) EXPECT_LT(point_segment_distance(q, a, b), 0.2);
}

TEST(Evolve, RecoversLateralOffset) {
  const Point2 a{15, 40}, b{80, 55};
  const Scene s = ribbon_scene({a, b});
  SnakeParams p;
  p.search_range = 5.0;
  const Point2 n = perp(normalized(b - a));
  const Polyline init = segment_to_polyline(a + 3.0 * n + Point2{6, 1.4}, b + 3.0 * n - Point2{6, 1.4}, p.spacing);
  ASSERT_NEAR(mean_lateral(init.nodes, a, b), 3.0, 1e-9);
  const EvolveResult r = evolve(init, snake_feature(s.image, p), p);
  EXPECT_LT(mean_lateral(r.polyline.nodes, a, b), 0.75);
}

TEST(Evolve, BendsOntoArc) {
  // Sagitta R (1 - cos(phi / 2)) = 3.5 px with R = 80.
  const double radius = 80.0, half = std::acos(1.0 - 3.5 / radius);
  const Point2 c{48, 110};
  const auto arc = arc_path(c, radius, -std::numbers::pi / 2 - half, -std::numbers::pi / 2 + half, 1.0);
  const Scene s = ribbon_scene(arc, 6.0, 96);
  // The snake climbs the texture magnitude |v|, as in the pipeline.
  DecompositionParams dp;
  dp.mu = 150.0;
  const ImageGrid feature = rescale_to_255(abs(decompose(s.image, dp).v));
  SnakeParams p;
  const Polyline init = segment_to_polyline(arc.front(), arc.back(), p.spacing);
  const double before = hausdorff(init.nodes, arc);
  const EvolveResult r = evolve(init, snake_feature(feature, p), p);
  const double after = hausdorff(r.polyline.nodes, arc);
  EXPECT_NEAR(before, 3.5, 0.1);
  EXPECT_LT(after, 1.5);
  EXPECT_LT(after, 0.5 * before);
  expect_spacing(r.polyline.nodes, p.spacing);
}

TEST(Evolve, ScoreNeverDecreases) {
  for (double offset : {-3.0, 0.0, 2.0, 4.0}) {
    const Point2 a{10, 30}, b{85, 70};
    const Scene s = ribbon_scene({a, {50, 40}, b}, 5.0);
    SnakeParams p;
    const Point2 n = perp(normalized(b - a));
    const Polyline init = segment_to_polyline(a + offset * n, b + offset * n, p.spacing);
    const EvolveResult r = evolve(init, snake_feature(s.image, p), p);
    ASSERT_EQ(r.score_trace.size(), static_cast<std::size_t>(r.sweeps) + 1);
    for (std::size_t i = 1; i < r.score_trace.size(); ++i) EXPECT_GE(r.score_trace[i], r.score_trace[i - 1]);
    EXPECT_FALSE(self_intersects(r.polyline.nodes));
    expect_spacing(r.polyline.nodes, p.spacing);
  }
}

TEST(Evolve, DegenerateInput) {
  const ImageGrid f(32, 32, 1.0);
  SnakeParams p;
  Polyline all_same{{{5, 5}, {5, 5}, {5, 5}, {5, 5}}, 5.0};
  EXPECT_THROW(evolve(all_same, f, p), GeometryError);
  Polyline two{{{5, 5}, {15, 5}}, 5.0};
  EXPECT_THROW(evolve(two, f, p), GeometryError);
  // A repeated node is resampled away.
  Polyline dup{{{5, 5}, {10, 5}, {10, 5}, {15, 5}, {20, 5}}, 5.0};
  EXPECT_NO_THROW(evolve(dup, f, p));
}

TEST(SnakeParams, Validation) {
  SnakeParams p;
  p.spacing = 0.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.search_range = -1.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.max_sweeps = 0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.beta = -0.1;
  EXPECT_THROW(p.validate(), ValidationError);
}
