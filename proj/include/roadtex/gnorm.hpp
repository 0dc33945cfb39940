#pragma once

// Meyer's G-norm |f|_G = inf { max_x |g(x)| : div g = f } on the discrete
// grid, with certified bracketing:
//   lower: <f, w> / TV(w) for any w (since <f,w> = -<g, grad w>),
//   upper: max |g| of an exactly feasible field g.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "roadtex/decomposition.hpp"
#include "roadtex/error.hpp"
#include "roadtex/image.hpp"
#include "roadtex/parallel.hpp"

namespace roadtex {

/// Bounds on the G-norm of the unit-width ribbon indicator of aspect ratio n.
struct RibbonBounds {
  double n = 1.0;
  double lower = 0.25;  ///< n / (2n + 2)
  double upper = 0.5;
};

inline RibbonBounds lemma1_bounds(double n) {
  if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("ribbon aspect ratio must be positive and finite");
  return {n, n / (2.0 * n + 2.0), 0.5};
}

/// <f, w> / TV(w); never exceeds the discrete G-norm of (zero-mean) f.
inline double duality_lower_bound(const ImageGrid& f, const ImageGrid& w) {
  const double tv = tv_norm(w);
  if (!(tv > 0.0)) throw DomainError("duality_lower_bound: test function has zero total variation");
  return dot(f, w) / tv;
}

/// Solver for div(grad phi) = r with the core Neumann discretization,
/// diagonalized by the DCT-II. r must have zero mean.
class NeumannPoisson {
 public:
  NeumannPoisson(int width, int height)
      : w_(width), h_(height), cx_(dct_matrix(width)), cy_(dct_matrix(height)) {
    ex_.resize(width);
    ey_.resize(height);
    for (int k = 0; k < width; ++k) ex_[k] = 2.0 - 2.0 * std::cos(std::numbers::pi * k / width);
    for (int k = 0; k < height; ++k) ey_[k] = 2.0 - 2.0 * std::cos(std::numbers::pi * k / height);
  }

  ImageGrid solve(const ImageGrid& r) const {
    ImageGrid spec = transform(r, false);
    for (int l = 0; l < h_; ++l)
      for (int k = 0; k < w_; ++k) {
        const double eig = ex_[k] + ey_[l];
        spec(k, l) = eig > 0.0 ? -spec(k, l) / eig : 0.0;
      }
    return transform(spec, true);
  }

 private:
  // Orthonormal DCT-II, row k = frequency.
  static std::vector<double> dct_matrix(int n) {
    std::vector<double> c(static_cast<std::size_t>(n) * n);
    for (int k = 0; k < n; ++k) {
      const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      for (int x = 0; x < n; ++x) c[static_cast<std::size_t>(k) * n + x] = s * std::cos(std::numbers::pi * k * (x + 0.5) / n);
    }
    return c;
  }

  // Separable transform; inverse uses the transposed matrices.
  ImageGrid transform(const ImageGrid& in, bool inverse) const {
    ImageGrid tmp(w_, h_), out(w_, h_);
    parallel_for(0, h_, [&](int y) {
      for (int k = 0; k < w_; ++k) {
        double s = 0.0;
        for (int x = 0; x < w_; ++x)
          s += (inverse ? cx_[static_cast<std::size_t>(x) * w_ + k] : cx_[static_cast<std::size_t>(k) * w_ + x]) * in(x, y);
        tmp(k, y) = s;
      }
    });
    parallel_for(0, h_, [&](int l) {
      for (int k = 0; k < w_; ++k) out(k, l) = 0.0;
      for (int y = 0; y < h_; ++y) {
        const double c = inverse ? cy_[static_cast<std::size_t>(y) * h_ + l] : cy_[static_cast<std::size_t>(l) * h_ + y];
        for (int k = 0; k < w_; ++k) out(k, l) += c * tmp(k, y);
      }
    });
    return out;
  }

  int w_, h_;
  std::vector<double> cx_, cy_, ex_, ey_;
};

struct GNormEstimate {
  double value = 0.0;
  double certified_lower = 0.0;
  double certified_upper = 0.0;
  bool converged = false;
  int iterations = 0;
  double removed_mean = 0.0;  ///< mean subtracted from the input (0 if none)
};

struct GNormParams {
  double tol = 3e-2;     ///< relative bracket width (upper - lower) / upper
  int max_iter = 3000;
  int check_every = 50;  ///< iterations between certificate evaluations
};

namespace detail {

// prox of t * max_i |z_i|: clip pointwise magnitudes at level c where the
// clipped excess sum_i (|z_i| - c)_+ equals t.
inline void prox_max_norm(VectorField& z, double t, double& level_hint, std::vector<double>& mag) {
  const std::size_t n = z.gx.size();
  mag.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (mag[i] = z.norm_at(i));
  if (total <= t) {
    for (std::size_t i = 0; i < n; ++i) z.gx[i] = z.gy[i] = 0.0;
    level_hint = 0.0;
    return;
  }
  const auto excess = [&](double c, std::size_t& count) {
    double s = 0.0;
    count = 0;
    for (double m : mag)
      if (m > c) {
        s += m - c;
        ++count;
      }
    return s - t;
  };
  // Excess is convex and decreasing in c: Newton from the left never overshoots.
  std::size_t count = 0;
  double c = level_hint;
  if (excess(c, count) < 0.0) c = 0.0;
  for (int guard = 0; guard < 200; ++guard) {
    const double e = excess(c, count);
    if (e <= 1e-15 * t || count == 0) break;
    c += e / static_cast<double>(count);
  }
  level_hint = c;
  for (std::size_t i = 0; i < n; ++i)
    if (mag[i] > c) {
      const double s = c / mag[i];
      z.gx[i] *= s;
      z.gy[i] *= s;
    }
}

// Fields whose unused boundary components are zeroed.
inline void zero_unused(VectorField& g) {
  const int w = g.width(), h = g.height();
  for (int y = 0; y < h; ++y) g.gx(w - 1, y) = 0.0;
  for (int x = 0; x < w; ++x) g.gy(x, h - 1) = 0.0;
}

}  // namespace detail

/// Numerical G-norm by primal-dual iterations on
///   min_g max|g|  s.t.  div g = f - mean(f),
/// certified every `check_every` steps. A Poisson correction turns the
/// current field into an exactly feasible one (upper bound); f itself and
/// the dual iterate serve as test functions for the lower bound.
inline GNormEstimate gnorm_estimate(const ImageGrid& f_in, const GNormParams& params = {}) {
  if (!(params.tol > 0.0) || params.max_iter < 1 || params.check_every < 1)
    throw DomainError("gnorm_estimate: invalid parameters");
  GNormEstimate est;
  const int w = f_in.width(), h = f_in.height();
  const std::size_t n = f_in.size();
  ImageGrid f = f_in;
  const double m = mean(f);
  if (m != 0.0) {
    est.removed_mean = m;
    for (double& v : f.pixels()) v -= m;
  }
  const double amp = max_abs(f);
  if (amp == 0.0) {
    est.converged = true;
    return est;
  }
  f *= 1.0 / amp;

  const NeumannPoisson poisson(w, h);
  const auto feasible_upper = [&](const VectorField& g) {
    VectorField c = g;
    const ImageGrid phi = poisson.solve(f - divergence(g));
    const VectorField gp = gradient(phi);
    c.gx += gp.gx;
    c.gy += gp.gy;
    detail::zero_unused(c);
    return c.max_norm();
  };
  const auto test_lower = [&](const ImageGrid& wfun) {
    const double tv = tv_norm(wfun);
    return tv > 0.0 ? std::abs(dot(f, wfun)) / tv : 0.0;
  };

  // Start from the least-squares feasible field grad(phi), div grad phi = f.
  VectorField g = gradient(poisson.solve(f));
  detail::zero_unused(g);
  VectorField g_bar = g, g_new(w, h);
  ImageGrid y(w, h);
  double lower = test_lower(f);
  double upper = g.max_norm();

  // sigma * tau * |div|^2 < 1 with |div|^2 <= 8; the ratio tau / sigma
  // balances primal magnitudes (~ upper) against dual ones.
  const double ratio = std::max(upper, 1e-3);
  const double tau = 0.99 * ratio / std::sqrt(8.0);
  const double sigma = 0.99 / (ratio * std::sqrt(8.0));
  double level = 0.0;
  std::vector<double> mag;

  int it = 0;
  while (it < params.max_iter) {
    ++it;
    for (int yy = 0; yy < h; ++yy)
      for (int x = 0; x < w; ++x) {
        double d = 0.0;
        if (x + 1 < w) d += g_bar.gx(x, yy);
        if (x > 0) d -= g_bar.gx(x - 1, yy);
        if (yy + 1 < h) d += g_bar.gy(x, yy);
        if (yy > 0) d -= g_bar.gy(x, yy - 1);
        y(x, yy) += sigma * (d - f(x, yy));
      }
    for (int yy = 0; yy < h; ++yy)
      for (int x = 0; x < w; ++x) {
        g_new.gx(x, yy) = g.gx(x, yy) + (x + 1 < w ? tau * (y(x + 1, yy) - y(x, yy)) : 0.0);
        g_new.gy(x, yy) = g.gy(x, yy) + (yy + 1 < h ? tau * (y(x, yy + 1) - y(x, yy)) : 0.0);
      }
    detail::prox_max_norm(g_new, tau, level, mag);
    for (std::size_t i = 0; i < n; ++i) {
      g_bar.gx[i] = 2.0 * g_new.gx[i] - g.gx[i];
      g_bar.gy[i] = 2.0 * g_new.gy[i] - g.gy[i];
    }
    std::swap(g, g_new);

    if (it % params.check_every == 0 || it == params.max_iter) {
      upper = std::min(upper, feasible_upper(g));
      lower = std::max(lower, test_lower(y));
      if (upper - lower <= params.tol * upper) {
        est.converged = true;
        break;
      }
    }
  }
  est.iterations = it;
  est.certified_lower = lower * amp;
  est.certified_upper = upper * amp;
  est.value = 0.5 * (est.certified_lower + est.certified_upper);
  return est;
}

}  // namespace roadtex
