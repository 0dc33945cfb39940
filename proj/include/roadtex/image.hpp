#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "roadtex/error.hpp"
#include "roadtex/parallel.hpp"

namespace roadtex {

/// Real-valued 2-D scalar field stored row-major. Pixel (x, y) has its
/// center at integer coordinates (x, y).
class ImageGrid {
 public:
  ImageGrid() = default;

  ImageGrid(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw DimensionError("image dimensions must be positive, got " + std::to_string(width) +
                           "x" + std::to_string(height));
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  ImageGrid(int width, int height, std::vector<double> data) : ImageGrid(width, height) {
    if (data.size() != data_.size())
      throw DimensionError("pixel buffer has " + std::to_string(data.size()) + " values, expected " +
                           std::to_string(data_.size()));
    data_ = std::move(data);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y) { return data_[index(x, y)]; }
  double operator()(int x, int y) const { return data_[index(x, y)]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }
  std::span<double> row(int y) { return {data_.data() + index(0, y), static_cast<std::size_t>(width_)}; }
  std::span<const double> row(int y) const {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }

  /// Pixel value with coordinates clamped to the grid (edge replication).
  double clamped(int x, int y) const {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  /// Bilinear interpolation at a real position, edge replicated.
  double sample(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const int x0 = std::min(static_cast<int>(x), width_ - 1);
    const int y0 = std::min(static_cast<int>(y), height_ - 1);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double fx = x - x0, fy = y - y0;
    const double top = (1 - fx) * (*this)(x0, y0) + fx * (*this)(x1, y0);
    const double bottom = (1 - fx) * (*this)(x0, y1) + fx * (*this)(x1, y1);
    return (1 - fy) * top + fy * bottom;
  }

  bool same_shape(const ImageGrid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  ImageGrid& operator+=(const ImageGrid& o) { return combine(o, [](double a, double b) { return a + b; }); }
  ImageGrid& operator-=(const ImageGrid& o) { return combine(o, [](double a, double b) { return a - b; }); }
  ImageGrid& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend ImageGrid operator+(ImageGrid a, const ImageGrid& b) { return a += b; }
  friend ImageGrid operator-(ImageGrid a, const ImageGrid& b) { return a -= b; }
  friend ImageGrid operator*(ImageGrid a, double s) { return a *= s; }
  friend ImageGrid operator*(double s, ImageGrid a) { return a *= s; }

  bool operator==(const ImageGrid&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  template <class Op>
  ImageGrid& combine(const ImageGrid& o, Op op) {
    if (!same_shape(o))
      throw DimensionError("image shapes differ: " + std::to_string(width_) + "x" +
                           std::to_string(height_) + " vs " + std::to_string(o.width_) + "x" +
                           std::to_string(o.height_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] = op(data_[i], o.data_[i]);
    return *this;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Per-pixel 2-vector field.
struct VectorField {
  ImageGrid gx;
  ImageGrid gy;

  VectorField() = default;
  VectorField(int width, int height) : gx(width, height), gy(width, height) {}

  int width() const noexcept { return gx.width(); }
  int height() const noexcept { return gx.height(); }

  double norm_at(std::size_t i) const { return std::hypot(gx[i], gy[i]); }

  /// max over pixels of the Euclidean norm.
  double max_norm() const {
    double m = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) m = std::max(m, norm_at(i));
    return m;
  }
};

/// Forward differences, zero on the last column (x) and last row (y).
inline VectorField gradient(const ImageGrid& img) {
  const int w = img.width(), h = img.height();
  VectorField g(w, h);
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      g.gx(x, y) = x + 1 < w ? img(x + 1, y) - img(x, y) : 0.0;
      g.gy(x, y) = y + 1 < h ? img(x, y + 1) - img(x, y) : 0.0;
    }
  });
  return g;
}

/// Backward differences matching `gradient`: div = -gradient^T.
inline ImageGrid divergence(const VectorField& p) {
  const int w = p.width(), h = p.height();
  ImageGrid d(w, h);
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double dx = 0.0, dy = 0.0;
      if (x + 1 < w) dx += p.gx(x, y);
      if (x > 0) dx -= p.gx(x - 1, y);
      if (y + 1 < h) dy += p.gy(x, y);
      if (y > 0) dy -= p.gy(x, y - 1);
      d(x, y) = dx + dy;
    }
  });
  return d;
}

inline double dot(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b)) throw DimensionError("dot: image shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const VectorField& a, const VectorField& b) { return dot(a.gx, b.gx) + dot(a.gy, b.gy); }

inline double mean(const ImageGrid& img) {
  double s = 0.0;
  for (double v : img.pixels()) s += v;
  return s / static_cast<double>(img.size());
}

inline double max_abs(const ImageGrid& img) {
  double m = 0.0;
  for (double v : img.pixels()) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: image shapes differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Pointwise Euclidean norm of the forward-difference gradient.
inline ImageGrid gradient_magnitude(const ImageGrid& img) {
  const VectorField g = gradient(img);
  ImageGrid m(img.width(), img.height());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = g.norm_at(i);
  return m;
}

inline ImageGrid abs(ImageGrid img) {
  for (double& v : img.pixels()) v = std::abs(v);
  return img;
}

/// Affine rescale so that [0, max] maps to [0, 255]; an all-zero image
/// stays zero. Intended for non-negative feature maps.
inline ImageGrid rescale_to_255(ImageGrid img) {
  const double m = max_abs(img);
  if (m > 0.0) img *= 255.0 / m;
  return img;
}

inline bool all_finite(const ImageGrid& img) {
  return std::all_of(img.pixels().begin(), img.pixels().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace roadtex
