#pragma once

// Structure + texture decomposition f = u + v + residual. The texture v is
// constrained to the G-norm ball of radius mu; the structure u carries the
// total-variation term. Both sub-problems are solved with Chambolle's
// dual fixed-point projector.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "roadtex/error.hpp"
#include "roadtex/image.hpp"
#include "roadtex/parallel.hpp"

namespace roadtex {

/// Isotropic total variation: sum over pixels of |grad u|.
inline double tv_norm(const ImageGrid& u) {
  const int w = u.width(), h = u.height();
  std::vector<double> rows(h, 0.0);
  parallel_for(0, h, [&](int y) {
    double s = 0.0;
    for (int x = 0; x < w; ++x) {
      const double gx = x + 1 < w ? u(x + 1, y) - u(x, y) : 0.0;
      const double gy = y + 1 < h ? u(x, y + 1) - u(x, y) : 0.0;
      s += std::sqrt(gx * gx + gy * gy);
    }
    rows[y] = s;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

enum class StopRule {
  gap,     ///< duality-gap bound on the distance to the exact projection
  change,  ///< change of the projection between two iterations
};

/// With StopRule::gap the iteration stops once sqrt(2 gap) <= tol * max|f|,
/// which bounds the L2 (hence max) distance to the exact projection. The
/// change rule is cheaper and looser; the alternating scheme uses it.
struct ProjectionParams {
  double tau = 0.125;
  int max_iter = 300;
  double tol = 1e-4;
  StopRule stop = StopRule::gap;
  int check_every = 10;  ///< iterations between gap evaluations
};

struct ProjectionResult {
  ImageGrid projection;  ///< radius * div p
  VectorField dual;      ///< p, |p| <= 1 pointwise
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;
  double gap = 0.0;            ///< duality gap of the returned iterate
  double max_dual_norm = 0.0;  ///< max of |p| over every iterate

  /// L2 distance bound to the exact projection.
  double error_bound() const { return std::sqrt(2.0 * std::max(gap, 0.0)); }
};

/// Gap between the ROF primal at u = f - r div p and its dual at p:
/// r (TV(u) + <grad u, p>) >= 0, and |u - u*|^2 <= 2 gap.
inline double projection_gap(const ImageGrid& f, double radius, const VectorField& p, const ImageGrid& div_p) {
  const int w = f.width(), h = f.height();
  std::vector<double> rows(h, 0.0);
  parallel_for(0, h, [&](int y) {
    double s = 0.0;
    for (int x = 0; x < w; ++x) {
      const double u = f(x, y) - radius * div_p(x, y);
      const double gx = x + 1 < w ? f(x + 1, y) - radius * div_p(x + 1, y) - u : 0.0;
      const double gy = y + 1 < h ? f(x, y + 1) - radius * div_p(x, y + 1) - u : 0.0;
      s += std::sqrt(gx * gx + gy * gy) + gx * p.gx(x, y) + gy * p.gy(x, y);
    }
    rows[y] = s;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return radius * total;
}

/// Projection of f onto the G-norm ball of the given radius via the fixed
/// point p <- (p + tau grad(div p - f/r)) / (1 + tau |grad(div p - f/r)|).
/// `warm` seeds the dual variable.
inline ProjectionResult chambolle_project(const ImageGrid& f, double radius, const ProjectionParams& params,
                                          const VectorField* warm = nullptr) {
  if (!(radius > 0.0)) throw DomainError("chambolle_project: radius must be positive");
  if (!(params.tau > 0.0 && params.tau <= 0.125)) throw DomainError("chambolle_project: tau must lie in (0, 1/8]");
  if (params.max_iter < 1) throw DomainError("chambolle_project: max_iter must be >= 1");
  if (params.check_every < 1) throw DomainError("chambolle_project: check_every must be >= 1");
  const int w = f.width(), h = f.height();

  ProjectionResult out;
  out.dual = warm ? *warm : VectorField(w, h);
  if (warm && (warm->width() != w || warm->height() != h)) throw DimensionError("chambolle_project: warm start shape");
  VectorField& p = out.dual;
  out.max_dual_norm = p.max_norm();

  const double inv_r = 1.0 / radius;
  const double threshold = params.tol * max_abs(f);
  ImageGrid div_p = divergence(p);
  ImageGrid resid(w, h);
  std::vector<double> row_change(h);
  std::vector<double> row_pmax(h);

  for (int it = 1; it <= params.max_iter; ++it) {
    parallel_for(0, h, [&](int y) {
      for (int x = 0; x < w; ++x) resid(x, y) = div_p(x, y) - f(x, y) * inv_r;
    });
    parallel_for(0, h, [&](int y) {
      double pmax = 0.0;
      for (int x = 0; x < w; ++x) {
        const double gx = x + 1 < w ? resid(x + 1, y) - resid(x, y) : 0.0;
        const double gy = y + 1 < h ? resid(x, y + 1) - resid(x, y) : 0.0;
        const double denom = 1.0 + params.tau * std::sqrt(gx * gx + gy * gy);
        const double px = (p.gx(x, y) + params.tau * gx) / denom;
        const double py = (p.gy(x, y) + params.tau * gy) / denom;
        p.gx(x, y) = px;
        p.gy(x, y) = py;
        pmax = std::max(pmax, std::sqrt(px * px + py * py));
      }
      row_pmax[y] = pmax;
    });
    parallel_for(0, h, [&](int y) {
      double change = 0.0;
      for (int x = 0; x < w; ++x) {
        double d = 0.0;
        if (x + 1 < w) d += p.gx(x, y);
        if (x > 0) d -= p.gx(x - 1, y);
        if (y + 1 < h) d += p.gy(x, y);
        if (y > 0) d -= p.gy(x, y - 1);
        change = std::max(change, std::abs(d - div_p(x, y)));
        div_p(x, y) = d;
      }
      row_change[y] = change;
    });
    out.iterations = it;
    out.last_change = radius * *std::max_element(row_change.begin(), row_change.end());
    out.max_dual_norm = std::max(out.max_dual_norm, *std::max_element(row_pmax.begin(), row_pmax.end()));
    if (params.stop == StopRule::change && out.last_change <= threshold) {
      out.converged = true;
      break;
    }
    if (params.stop == StopRule::gap && it % params.check_every == 0) {
      out.gap = projection_gap(f, radius, p, div_p);
      if (out.error_bound() <= threshold) {
        out.converged = true;
        break;
      }
    }
  }
  out.gap = projection_gap(f, radius, p, div_p);
  out.projection = div_p * radius;
  return out;
}

struct DecompositionParams {
  double lambda = 10.0;  ///< weight of the L2 residual term, 1/(2 lambda)
  double mu = 50.0;      ///< G-norm radius of the texture component
  double tau = 0.125;
  int max_iter = 50;         ///< outer alternations
  int inner_max_iter = 300;  ///< Chambolle iterations per projection
  double tol = 1e-4;         ///< relative max-norm change of u and v per outer step
  double inner_tol = 1e-6;   ///< relative change of each projection per inner step

  void validate() const {
    if (!(lambda > 0.0)) throw ValidationError("decomposition: lambda must be > 0");
    if (!(mu > 0.0)) throw ValidationError("decomposition: mu must be > 0");
    if (!(tau > 0.0 && tau <= 0.125)) throw ValidationError("decomposition: tau must lie in (0, 0.125]");
    if (max_iter < 1 || inner_max_iter < 1) throw ValidationError("decomposition: iteration caps must be >= 1");
    if (!(tol > 0.0) || !(inner_tol > 0.0)) throw ValidationError("decomposition: tolerances must be > 0");
  }
};

struct DecompositionResult {
  ImageGrid u;         ///< structure
  ImageGrid v;         ///< texture, inside the mu G-ball
  ImageGrid residual;  ///< f - u - v
  int iterations = 0;
  bool converged = false;
  double final_change = 0.0;
  std::vector<double> energy_trace;  ///< objective after initialization and each outer step
  double max_dual_norm = 0.0;        ///< over every Chambolle iterate of both projectors
};

/// Objective tracked by `decompose`: TV(u) + |f - u - v|^2 / (2 lambda).
inline double decomposition_energy(const ImageGrid& f, const ImageGrid& u, const ImageGrid& v, double lambda) {
  double sq = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = f[i] - u[i] - v[i];
    sq += r * r;
  }
  return tv_norm(u) + sq / (2.0 * lambda);
}

/// Alternating minimization starting from u = f, v = 0:
///   v <- P_{mu K}(f - u),   u <- (f - v) - P_{lambda K}(f - v).
/// Each projector is warm-started from its previous dual field. A step is
/// kept only if it does not raise the objective, so the energy trace is
/// non-increasing even when the inner projections stop early.
inline DecompositionResult decompose(const ImageGrid& f, const DecompositionParams& params) {
  params.validate();
  const int w = f.width(), h = f.height();
  const ProjectionParams inner{params.tau, params.inner_max_iter, params.inner_tol, StopRule::change};
  const double scale = std::max(1.0, max_abs(f));

  DecompositionResult out;
  ImageGrid u = f;
  ImageGrid v(w, h);
  VectorField p_mu(w, h), p_lambda(w, h);
  double energy = decomposition_energy(f, u, v, params.lambda);
  out.energy_trace.push_back(energy);

  for (int it = 1; it <= params.max_iter; ++it) {
    const ImageGrid u_prev = u, v_prev = v;

    ProjectionResult tex = chambolle_project(f - u, params.mu, inner, &p_mu);
    out.max_dual_norm = std::max(out.max_dual_norm, tex.max_dual_norm);
    const double e_tex = decomposition_energy(f, u, tex.projection, params.lambda);
    if (e_tex <= energy) {
      v = std::move(tex.projection);
      p_mu = std::move(tex.dual);
      energy = e_tex;
    }

    const ImageGrid g = f - v;
    ProjectionResult res = chambolle_project(g, params.lambda, inner, &p_lambda);
    out.max_dual_norm = std::max(out.max_dual_norm, res.max_dual_norm);
    ImageGrid u_new = g - res.projection;
    const double e_struct = decomposition_energy(f, u_new, v, params.lambda);
    if (e_struct <= energy) {
      u = std::move(u_new);
      p_lambda = std::move(res.dual);
      energy = e_struct;
    }

    out.energy_trace.push_back(energy);
    out.iterations = it;
    out.final_change = std::max(max_abs_diff(u, u_prev), max_abs_diff(v, v_prev));
    if (out.final_change < params.tol * scale) {
      out.converged = true;
      break;
    }
  }
  out.residual = f - u - v;
  out.u = std::move(u);
  out.v = std::move(v);
  return out;
}

}  // namespace roadtex
