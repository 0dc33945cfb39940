#pragma once

// Canny-Deriche edge detection: recursive (IIR) smoothing and derivative
// filters, non-maximum suppression and hysteresis thresholding.

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "roadtex/error.hpp"
#include "roadtex/image.hpp"
#include "roadtex/parallel.hpp"

namespace roadtex {

struct DericheParams {
  double alpha = 1.0;                 ///< filter sharpness, 1/pixels
  std::optional<double> low;          ///< hysteresis low; default 0.4 * high
  std::optional<double> high;         ///< hysteresis high; default 80th percentile
  bool enable_nms = true;

  void validate() const {
    if (!(alpha > 0.0)) throw ValidationError("deriche: alpha must be > 0");
    if (low && !(*low >= 0.0)) throw ValidationError("deriche: low threshold must be >= 0");
    if (low && high && !(*low < *high)) throw ValidationError("deriche: low threshold must be < high");
  }
};

namespace detail {

// Smoothing kernel k (1 + alpha|n|) q^|n|, q = exp(-alpha), with k chosen
// so the taps sum to one.
struct DericheSmoothCoeffs {
  double a0, a1, a2, a3, b1, b2;
  explicit DericheSmoothCoeffs(double alpha) {
    const double q = std::exp(-alpha);
    const double k = (1.0 - q) * (1.0 - q) / (1.0 + 2.0 * alpha * q - q * q);
    a0 = k;
    a1 = k * (alpha - 1.0) * q;
    a2 = k * (alpha + 1.0) * q;
    a3 = -k * q * q;
    b1 = 2.0 * q;
    b2 = -q * q;
  }
};

// Derivative kernel -c n q^|n|, normalized to unit response on a unit ramp.
struct DericheDerivCoeffs {
  double q, c;
  explicit DericheDerivCoeffs(double alpha) : q(std::exp(-alpha)) {
    c = std::pow(1.0 - q, 3) / (2.0 * q * (1.0 + q));
  }
};

// Causal + anticausal passes over a line; boundaries replicate the end
// samples, with the recursions started at their steady state.
inline void smooth_line(const double* in, double* out, int n, const DericheSmoothCoeffs& c, std::vector<double>& tmp) {
  tmp.resize(n);
  const double gain = 1.0 / (1.0 - c.b1 - c.b2);
  double xm1 = in[0], ym1 = (c.a0 + c.a1) * in[0] * gain, ym2 = ym1;
  for (int i = 0; i < n; ++i) {
    const double yi = c.a0 * in[i] + c.a1 * xm1 + c.b1 * ym1 + c.b2 * ym2;
    tmp[i] = yi;
    xm1 = in[i];
    ym2 = ym1;
    ym1 = yi;
  }
  double xp1 = in[n - 1], xp2 = in[n - 1];
  double yp1 = (c.a2 + c.a3) * in[n - 1] * gain, yp2 = yp1;
  for (int i = n - 1; i >= 0; --i) {
    const double yi = c.a2 * xp1 + c.a3 * xp2 + c.b1 * yp1 + c.b2 * yp2;
    out[i] = tmp[i] + yi;
    xp2 = xp1;
    xp1 = in[i];
    yp2 = yp1;
    yp1 = yi;
  }
}

inline void deriv_line(const double* in, double* out, int n, const DericheDerivCoeffs& c, std::vector<double>& tmp) {
  tmp.resize(n);
  const double q = c.q, steady = c.c * q / ((1.0 - q) * (1.0 - q));
  double xm1 = in[0], ym1 = -steady * in[0], ym2 = ym1;
  for (int i = 0; i < n; ++i) {
    const double yi = -c.c * q * xm1 + 2.0 * q * ym1 - q * q * ym2;
    tmp[i] = yi;
    xm1 = in[i];
    ym2 = ym1;
    ym1 = yi;
  }
  double xp1 = in[n - 1], yp1 = steady * in[n - 1], yp2 = yp1;
  for (int i = n - 1; i >= 0; --i) {
    const double yi = c.c * q * xp1 + 2.0 * q * yp1 - q * q * yp2;
    out[i] = tmp[i] + yi;
    xp1 = in[i];
    yp2 = yp1;
    yp1 = yi;
  }
}

enum class Axis { x, y };

template <class LineFilter>
ImageGrid filter_axis(const ImageGrid& img, Axis axis, LineFilter&& filter) {
  const int w = img.width(), h = img.height();
  ImageGrid out(w, h);
  if (axis == Axis::x) {
    parallel_for(0, h, [&](int y) {
      std::vector<double> tmp;
      filter(img.row(y).data(), out.row(y).data(), w, tmp);
    });
  } else {
    parallel_for(0, w, [&](int x) {
      std::vector<double> col(h), res(h), tmp;
      for (int y = 0; y < h; ++y) col[y] = img(x, y);
      filter(col.data(), res.data(), h, tmp);
      for (int y = 0; y < h; ++y) out(x, y) = res[y];
    });
  }
  return out;
}

inline ImageGrid smooth_axis(const ImageGrid& img, Axis axis, double alpha) {
  const DericheSmoothCoeffs c(alpha);
  return filter_axis(img, axis, [&](const double* i, double* o, int n, std::vector<double>& t) { smooth_line(i, o, n, c, t); });
}

inline ImageGrid deriv_axis(const ImageGrid& img, Axis axis, double alpha) {
  const DericheDerivCoeffs c(alpha);
  return filter_axis(img, axis, [&](const double* i, double* o, int n, std::vector<double>& t) { deriv_line(i, o, n, c, t); });
}

}  // namespace detail

/// Separable Deriche smoothing, rows then columns.
inline ImageGrid deriche_smooth(const ImageGrid& img, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("deriche_smooth: alpha must be > 0");
  return detail::smooth_axis(detail::smooth_axis(img, detail::Axis::x, alpha), detail::Axis::y, alpha);
}

/// Deriche gradient: derivative along one axis, smoothing along the other.
inline VectorField deriche_gradient(const ImageGrid& img, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("deriche_gradient: alpha must be > 0");
  VectorField g;
  g.gx = detail::deriv_axis(detail::smooth_axis(img, detail::Axis::y, alpha), detail::Axis::x, alpha);
  g.gy = detail::deriv_axis(detail::smooth_axis(img, detail::Axis::x, alpha), detail::Axis::y, alpha);
  return g;
}

inline ImageGrid deriche_magnitude(const ImageGrid& img, double alpha) {
  const VectorField g = deriche_gradient(img, alpha);
  ImageGrid m(img.width(), img.height());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = g.norm_at(i);
  return m;
}

/// Keeps pixels whose magnitude is a maximum along the gradient direction
/// (strict on the forward side so plateaus of two yield one pixel).
inline ImageGrid non_max_suppression(const ImageGrid& mag, const VectorField& g) {
  const int w = mag.width(), h = mag.height();
  ImageGrid out(w, h);
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double m = mag(x, y);
      if (m <= 0.0) continue;
      const double ux = g.gx(x, y) / m, uy = g.gy(x, y) / m;
      const double fwd = mag.sample(x + ux, y + uy);
      const double bwd = mag.sample(x - ux, y - uy);
      if (m > fwd && m >= bwd) out(x, y) = m;
    }
  });
  return out;
}

/// Binary map (1 = edge): pixels above `high`, plus pixels above `low`
/// 8-connected to them.
inline ImageGrid hysteresis(const ImageGrid& mag, double low, double high) {
  const int w = mag.width(), h = mag.height();
  ImageGrid out(w, h);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mag(x, y) >= high && mag(x, y) > 0.0) {
        out(x, y) = 1.0;
        queue.emplace_back(x, y);
      }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h || out(nx, ny) != 0.0) continue;
        if (mag(nx, ny) >= low && mag(nx, ny) > 0.0) {
          out(nx, ny) = 1.0;
          queue.emplace_back(nx, ny);
        }
      }
  }
  return out;
}

/// Gradient-magnitude map, or with enable_nms a thinned binary edge map.
inline ImageGrid canny_deriche(const ImageGrid& img, const DericheParams& params) {
  params.validate();
  const VectorField g = deriche_gradient(img, params.alpha);
  ImageGrid mag(img.width(), img.height());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = g.norm_at(i);
  // Flat input yields round-off level magnitudes only.
  const double floor = 1e-9 * std::max(1.0, max_abs(img));
  for (double& v : mag.pixels())
    if (v < floor) v = 0.0;
  if (!params.enable_nms) return mag;

  const ImageGrid thin = non_max_suppression(mag, g);
  std::vector<double> nonzero;
  for (double v : thin.pixels())
    if (v > 0.0) nonzero.push_back(v);
  if (nonzero.empty()) return ImageGrid(img.width(), img.height());
  double high = 0.0;
  if (params.high) {
    high = *params.high;
  } else {
    const auto k = static_cast<std::size_t>(0.8 * static_cast<double>(nonzero.size() - 1));
    std::nth_element(nonzero.begin(), nonzero.begin() + static_cast<std::ptrdiff_t>(k), nonzero.end());
    high = nonzero[k];
  }
  const double low = params.low ? *params.low : 0.4 * high;
  return hysteresis(thin, low, high);
}

}  // namespace roadtex
