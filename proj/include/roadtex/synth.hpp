#pragma once

// Synthetic road scenes: binary ribbons over a sinusoidal texture with
// additive Gaussian noise, plus their exact centerlines.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "roadtex/error.hpp"
#include "roadtex/geometry.hpp"
#include "roadtex/image.hpp"

namespace roadtex {

/// Indicator of a width_px x (n * width_px) vertical ribbon centered in a
/// grid_width x grid_height grid.
inline ImageGrid make_ribbon(int n, int width_px, int grid_width, int grid_height) {
  if (n < 1 || width_px < 1) throw DomainError("make_ribbon: N and width must be positive");
  const long length = static_cast<long>(n) * width_px;
  if (width_px > grid_width || length > grid_height)
    throw DimensionError("make_ribbon: " + std::to_string(width_px) + "x" + std::to_string(length) +
                         " ribbon exceeds " + std::to_string(grid_width) + "x" + std::to_string(grid_height) +
                         " grid");
  ImageGrid img(grid_width, grid_height);
  const int x0 = (grid_width - width_px) / 2;
  const int y0 = static_cast<int>((grid_height - length) / 2);
  for (int y = y0; y < y0 + length; ++y)
    for (int x = x0; x < x0 + width_px; ++x) img(x, y) = 1.0;
  return img;
}

/// Centerline of the ribbon drawn by make_ribbon, as pixel coordinates.
inline std::vector<Point2> ribbon_centerline(int n, int width_px, int grid_width, int grid_height) {
  const long length = static_cast<long>(n) * width_px;
  const int x0 = (grid_width - width_px) / 2;
  const int y0 = static_cast<int>((grid_height - length) / 2);
  const double xc = x0 + (width_px - 1) / 2.0;
  return {{xc, static_cast<double>(y0)}, {xc, static_cast<double>(y0 + length - 1)}};
}

struct RibbonSpec {
  std::vector<Point2> path;  ///< centerline, at least two vertices
  double width = 5.0;        ///< pixels
  double contrast = 60.0;    ///< added to the background inside the ribbon
};

/// One plane wave amplitude * sin(2 pi (x cos a + y sin a) / period + phase);
/// the phase is drawn from the scene seed.
struct TextureWave {
  double amplitude = 0.0;
  double period = 16.0;  ///< pixels
  double angle = 0.0;    ///< radians
};

struct SceneSpec {
  int width = 256;
  int height = 256;
  double background = 100.0;
  std::vector<RibbonSpec> ribbons;
  std::vector<TextureWave> texture;
  double noise_sigma = 0.0;

  void validate() const {
    if (width < 1 || height < 1) throw ValidationError("scene dimensions must be positive");
    for (std::size_t i = 0; i < ribbons.size(); ++i) {
      const RibbonSpec& r = ribbons[i];
      const std::string tag = "ribbon " + std::to_string(i) + ": ";
      if (r.path.size() < 2) throw ValidationError(tag + "path needs at least two points");
      if (!(r.width >= 1.0)) throw ValidationError(tag + "width must be >= 1 px");
      if (!(r.contrast >= 0.0)) throw ValidationError(tag + "contrast must be >= 0");
      for (Point2 p : r.path)
        if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1))
          throw ValidationError(tag + "path leaves the grid");
    }
    for (const TextureWave& t : texture)
      if (!(t.amplitude >= 0.0) || !(t.period > 0.0)) throw ValidationError("texture waves need amplitude >= 0, period > 0");
    if (!(noise_sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
  }
};

struct Scene {
  ImageGrid image;
  std::vector<std::vector<Point2>> centerlines;
  ImageGrid ribbon_mask;  ///< 1 inside any ribbon, 0 elsewhere
};

/// Whether pixel center p is covered by a ribbon of the given half width:
/// flat caps at the path ends, round joins at interior vertices.
inline bool ribbon_covers(std::span<const Point2> path, double half_width, Point2 p) {
  const double tol = half_width + 1e-9;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Point2 d = path[i + 1] - path[i];
    const double len = norm(d);
    if (len == 0.0) continue;
    const Point2 u = (1.0 / len) * d;
    const double t = dot(p - path[i], u);
    if (t >= -1e-9 && t <= len + 1e-9 && std::abs(cross(u, p - path[i])) <= tol) return true;
  }
  for (std::size_t i = 1; i + 1 < path.size(); ++i)
    if (distance(p, path[i]) <= tol) return true;
  return false;
}

inline Scene synth_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::vector<double> phases;
  for (std::size_t i = 0; i < spec.texture.size(); ++i) phases.push_back(phase_dist(rng));

  Scene scene{ImageGrid(spec.width, spec.height, spec.background), {}, ImageGrid(spec.width, spec.height)};
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      double v = spec.background;
      for (std::size_t i = 0; i < spec.texture.size(); ++i) {
        const TextureWave& t = spec.texture[i];
        const double s = x * std::cos(t.angle) + y * std::sin(t.angle);
        v += t.amplitude * std::sin(2.0 * std::numbers::pi * s / t.period + phases[i]);
      }
      for (const RibbonSpec& r : spec.ribbons)
        if (ribbon_covers(r.path, r.width / 2.0, {static_cast<double>(x), static_cast<double>(y)})) {
          v += r.contrast;
          scene.ribbon_mask(x, y) = 1.0;
          break;
        }
      scene.image(x, y) = v;
    }
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : scene.image.pixels()) v += noise(rng);
  }
  for (const RibbonSpec& r : spec.ribbons) scene.centerlines.push_back(r.path);
  return scene;
}

}  // namespace roadtex
