#pragma once

// A-contrario alignment detection. A segment with n sampled points of
// which k have a level-line orientation within the angular tolerance of
// the segment direction is meaningful when
//   NFA = n_tests * P[Binomial(n, prob) >= k] <= epsilon,
// with n_tests = (W H)^2 segments and prob the chance that a uniformly
// random orientation is aligned.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <tuple>
#include <vector>

#include "roadtex/baseline.hpp"
#include "roadtex/error.hpp"
#include "roadtex/geometry.hpp"
#include "roadtex/image.hpp"
#include "roadtex/parallel.hpp"

namespace roadtex {

/// Level-line orientation in [0, pi) per pixel.
struct OrientationField {
  ImageGrid theta;
  ImageGrid magnitude;
  std::vector<std::uint8_t> valid;

  int width() const noexcept { return theta.width(); }
  int height() const noexcept { return theta.height(); }
  bool is_valid(int x, int y) const { return valid[static_cast<std::size_t>(y) * width() + x] != 0; }
};

/// Level-line orientation from the image gradient: central differences
/// (one-sided at the border), or with gradient_alpha > 0 the Deriche
/// smoothed-derivative filters of that sharpness. theta is orthogonal to
/// the gradient, mod pi; pixels with gradient magnitude <= magnitude_floor
/// are invalid.
inline OrientationField orientation_field(const ImageGrid& img, double magnitude_floor, double gradient_alpha = 1.0) {
  if (!(gradient_alpha >= 0.0)) throw DomainError("orientation_field: gradient alpha must be >= 0");
  const int w = img.width(), h = img.height();
  VectorField g(w, h);
  if (gradient_alpha > 0.0) {
    g = deriche_gradient(img, gradient_alpha);
  } else {
    parallel_for(0, h, [&](int y) {
      for (int x = 0; x < w; ++x) {
        const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
        const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
        g.gx(x, y) = xr > xl ? (img(xr, y) - img(xl, y)) / (xr - xl) : 0.0;
        g.gy(x, y) = yd > yu ? (img(x, yd) - img(x, yu)) / (yd - yu) : 0.0;
      }
    });
  }
  OrientationField f{ImageGrid(w, h), ImageGrid(w, h), std::vector<std::uint8_t>(img.size(), 0)};
  // Flat regions give round-off gradients only.
  const double floor = std::max(magnitude_floor, 1e-9 * std::max(1.0, max_abs(img)));
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double gx = g.gx(x, y), gy = g.gy(x, y);
      const double mag = std::hypot(gx, gy);
      f.magnitude(x, y) = mag;
      if (mag > floor) {
        double t = std::atan2(gy, gx) + std::numbers::pi / 2.0;
        t = std::fmod(t, std::numbers::pi);
        if (t < 0.0) t += std::numbers::pi;
        if (t >= std::numbers::pi) t -= std::numbers::pi;
        f.theta(x, y) = t;
        f.valid[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  });
  return f;
}

/// Distance between two line orientations, mod pi, in [0, pi/2].
inline double orientation_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

/// Natural log of the upper binomial tail P[Binomial(n, p) >= k].
inline double log_binomial_tail(int n, int k, double p) {
  if (n < 0 || k < 0 || k > n) throw DomainError("binomial tail needs 0 <= k <= n");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("binomial tail needs 0 < p < 1");
  if (k == 0) return 0.0;
  const double lp = std::log(p), lq = std::log1p(-p), lnf = std::lgamma(n + 1.0);
  std::vector<double> terms;
  terms.reserve(n - k + 1);
  double top = -std::numeric_limits<double>::infinity();
  for (int j = k; j <= n; ++j) {
    const double t = lnf - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * lp + (n - j) * lq;
    terms.push_back(t);
    top = std::max(top, t);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

inline double log10_nfa(int n, int k, double p, double n_tests) {
  if (!(n_tests >= 1.0)) throw DomainError("nfa: number of tests must be >= 1");
  return std::log10(n_tests) + log_binomial_tail(n, k, p) / std::numbers::ln10;
}

/// n_tests * P[Binomial(n, p) >= k].
inline double nfa(int n, int k, double p, double n_tests) { return std::pow(10.0, log10_nfa(n, k, p, n_tests)); }

struct Segment {
  Point2 a;
  Point2 b;
  int n = 0;  ///< sampled points
  int k = 0;  ///< aligned points
  double log10_nfa = 0.0;
  double width_hint = 1.0;

  double length() const { return distance(a, b); }
  /// Direction of the supporting line in [0, pi).
  double angle() const {
    double t = std::atan2(b.y - a.y, b.x - a.x);
    if (t < 0.0) t += std::numbers::pi;
    if (t >= std::numbers::pi) t -= std::numbers::pi;
    return t;
  }
  double nfa() const {
    return std::max(std::pow(10.0, log10_nfa), std::numeric_limits<double>::denorm_min());
  }
};

struct AlignmentParams {
  double precision = 1.0 / 16.0;  ///< angular tolerance, fraction of pi
  double epsilon = 1.0;
  int sample_step = 1;            ///< pixels along the major axis
  double magnitude_floor = 5.0;   ///< gradient magnitude, input units
  double gradient_alpha = 1.0;    ///< Deriche pre-smoothing of the gradient; 0 = central differences
  double fuse_angle_deg = 5.0;
  double fuse_lateral = 2.0;      ///< pixels
  double fuse_gap = 10.0;         ///< pixels

  /// Probability that a uniform orientation in [0, pi) falls within
  /// +-precision*pi of a given direction.
  double aligned_probability() const { return std::min(2.0 * precision, 1.0 - 1e-12); }

  void validate() const {
    if (!(precision > 0.0 && precision < 0.5)) throw ValidationError("alignment: precision must lie in (0, 0.5)");
    if (!(epsilon > 0.0)) throw ValidationError("alignment: epsilon must be > 0");
    if (sample_step < 1) throw ValidationError("alignment: sample step must be >= 1");
    if (!(magnitude_floor >= 0.0)) throw ValidationError("alignment: magnitude floor must be >= 0");
    if (!(gradient_alpha >= 0.0)) throw ValidationError("alignment: gradient alpha must be >= 0");
    if (!(fuse_angle_deg >= 0.0 && fuse_lateral >= 0.0 && fuse_gap >= 0.0))
      throw ValidationError("alignment: fusion thresholds must be >= 0");
  }
};

namespace detail {

// log10 P[Binomial(n, p) >= k] for all 0 <= k <= n <= max_n.
class TailTable {
 public:
  TailTable(int max_n, double p) : max_n_(max_n), table_(static_cast<std::size_t>(max_n + 1) * (max_n + 2) / 2) {
    const double lp = std::log(p), lq = std::log1p(-p);
    std::vector<double> lfact(max_n + 1);
    for (int i = 0; i <= max_n; ++i) lfact[i] = std::lgamma(i + 1.0);
    for (int n = 0; n <= max_n; ++n) {
      double acc = -std::numeric_limits<double>::infinity();
      for (int k = n; k >= 0; --k) {
        const double t = lfact[n] - lfact[k] - lfact[n - k] + k * lp + (n - k) * lq;
        const double hi = std::max(acc, t);
        acc = hi + std::log(std::exp(acc - hi) + std::exp(t - hi));
        at(n, k) = k == 0 ? 0.0 : acc / std::numbers::ln10;
      }
    }
  }
  double operator()(int n, int k) const { return table_[offset(n) + k]; }

 private:
  static std::size_t offset(int n) { return static_cast<std::size_t>(n) * (n + 1) / 2; }
  double& at(int n, int k) { return table_[offset(n) + k]; }
  int max_n_;
  std::vector<double> table_;
};

struct LineSamples {
  std::vector<Point2> pos;        // ideal line positions
  std::vector<std::uint8_t> hit;  // aligned flags
};

// Finds the most meaningful interval within [lo, hi] of a line whose
// aligned flags are grouped in runs, then recurses on both remainders.
// Optimal intervals start at a run start and end at a run end: adding an
// aligned point never increases the binomial tail.
inline void best_intervals(const LineSamples& line, const std::vector<std::pair<int, int>>& runs, int r_lo, int r_hi,
                           const TailTable& tail, double log_tests, double log_eps,
                           std::vector<std::tuple<int, int, int, double>>& found) {
  if (r_lo > r_hi) return;
  double best = std::numeric_limits<double>::infinity();
  int bi = -1, bj = -1, bk = 0;
  for (int i = r_lo; i <= r_hi; ++i) {
    int k = 0;
    for (int j = i; j <= r_hi; ++j) {
      k += runs[j].second - runs[j].first + 1;
      const int n = runs[j].second - runs[i].first + 1;
      const double v = log_tests + tail(n, k);
      if (v < best) {
        best = v;
        bi = i;
        bj = j;
        bk = k;
      }
    }
  }
  if (best > log_eps) return;
  found.emplace_back(runs[bi].first, runs[bj].second, bk, best);
  best_intervals(line, runs, r_lo, bi - 1, tail, log_tests, log_eps, found);
  best_intervals(line, runs, bj + 1, r_hi, tail, log_tests, log_eps, found);
}

}  // namespace detail

/// Maximal meaningful segments over the digital-line family: every
/// direction with slope m / max(W, H) along either major axis through
/// every integer offset at the middle of the grid. On each line the most
/// meaningful interval is kept and the search recurses on the parts left
/// and right of it, so kept segments on one line are disjoint.
inline std::vector<Segment> detect_alignments(const OrientationField& field, const AlignmentParams& params) {
  params.validate();
  const int w = field.width(), h = field.height();
  const int m = std::max(w, h);
  const double prob = params.aligned_probability();
  const double tol = params.precision * std::numbers::pi;
  const double log_tests = 2.0 * std::log10(static_cast<double>(w) * h);
  const double log_eps = std::log10(params.epsilon);
  const detail::TailTable tail(m, prob);
  // Fewest aligned points that could possibly reach epsilon.
  const int min_k = static_cast<int>(std::ceil((log_eps - log_tests) / std::log10(prob)));

  // Direction index d in [0, 4m): x-major slopes for d <= 2m, y-major for
  // the rest (excluding the diagonals already covered).
  const int n_dirs = 4 * m;
  std::vector<std::vector<Segment>> per_dir(n_dirs);
  parallel_for(0, n_dirs, [&](int d) {
    const bool x_major = d <= 2 * m;
    const int slope_num = x_major ? d - m : (d - 2 * m) - m;  // y-major: d in (2m, 4m) -> (-m, m)
    if (!x_major && (slope_num <= -m || slope_num >= m)) return;
    const double s = static_cast<double>(slope_num) / m;
    const int major_len = x_major ? w : h;
    const int minor_len = x_major ? h : w;
    double dir_angle = x_major ? std::atan2(s, 1.0) : std::atan2(1.0, s);
    if (dir_angle < 0.0) dir_angle += std::numbers::pi;
    if (dir_angle >= std::numbers::pi) dir_angle -= std::numbers::pi;

    // Lines are anchored at the middle of the major axis and rounded
    // symmetrically, so the family maps onto itself under 90 degree turns.
    const double mid = 0.5 * (major_len - 1);
    std::vector<int> shift(major_len);
    for (int t = 0; t < major_len; ++t) shift[t] = static_cast<int>(std::round(s * (t - mid)));
    const int c_min = -std::max(shift.front(), shift.back());
    const int c_max = minor_len - 1 - std::min(shift.front(), shift.back());

    detail::LineSamples line;
    std::vector<std::pair<int, int>> runs;
    std::vector<std::tuple<int, int, int, double>> found;
    for (int c = c_min; c <= c_max; ++c) {
      line.pos.clear();
      line.hit.clear();
      int aligned = 0;
      for (int t = 0; t < major_len; ++t) {
        const int minor = c + shift[t];
        if (minor < 0 || minor >= minor_len) continue;
        if (!line.pos.empty() && params.sample_step > 1 && (t % params.sample_step) != 0) continue;
        const int px = x_major ? t : minor, py = x_major ? minor : t;
        const double ideal = c + s * (t - mid);
        line.pos.push_back(x_major ? Point2{static_cast<double>(t), ideal} : Point2{ideal, static_cast<double>(t)});
        const bool hit = field.is_valid(px, py) && orientation_gap(field.theta(px, py), dir_angle) <= tol;
        line.hit.push_back(hit ? 1 : 0);
        aligned += hit;
      }
      if (aligned < min_k) continue;
      runs.clear();
      for (int i = 0; i < static_cast<int>(line.hit.size()); ++i) {
        if (!line.hit[i]) continue;
        if (!runs.empty() && runs.back().second == i - 1)
          runs.back().second = i;
        else
          runs.emplace_back(i, i);
      }
      found.clear();
      detail::best_intervals(line, runs, 0, static_cast<int>(runs.size()) - 1, tail, log_tests, log_eps, found);
      for (const auto& [i, j, k, lnfa] : found) {
        if (j <= i) continue;
        Segment seg;
        seg.a = line.pos[i];
        seg.b = line.pos[j];
        seg.n = j - i + 1;
        seg.k = k;
        seg.log10_nfa = lnfa;
        per_dir[d].push_back(seg);
      }
    }
  });

  std::vector<Segment> out;
  for (auto& v : per_dir) out.insert(out.end(), v.begin(), v.end());
  std::sort(out.begin(), out.end(), [](const Segment& p, const Segment& q) {
    return std::tie(p.log10_nfa, p.a.x, p.a.y, p.b.x, p.b.y) < std::tie(q.log10_nfa, q.a.x, q.a.y, q.b.x, q.b.y);
  });
  return out;
}

namespace detail {

// Tries to absorb s into o (o keeps its line and NFA). Returns false when
// the pair violates any fusion threshold.
inline bool try_fuse(Segment& o, const Segment& s, const AlignmentParams& params) {
  const double max_angle = params.fuse_angle_deg * std::numbers::pi / 180.0;
  if (orientation_gap(o.angle(), s.angle()) > max_angle) return false;
  const double len = o.length();
  if (len <= 0.0) return false;
  const Point2 u = (1.0 / len) * (o.b - o.a);
  const double lat = std::max(std::abs(cross(u, s.a - o.a)), std::abs(cross(u, s.b - o.a)));
  if (lat > params.fuse_lateral) return false;
  const double t1 = std::min(dot(s.a - o.a, u), dot(s.b - o.a, u));
  const double t2 = std::max(dot(s.a - o.a, u), dot(s.b - o.a, u));
  const double gap = std::max({0.0, t1 - len, -t2});
  if (gap > params.fuse_gap) return false;
  const double lo = std::min(0.0, t1), hi = std::max(len, t2);
  const Point2 origin = o.a;
  o.a = origin + lo * u;
  o.b = origin + hi * u;
  o.width_hint = std::max({o.width_hint, s.width_hint, 2.0 * lat + 1.0});
  if (s.log10_nfa < o.log10_nfa) {
    o.log10_nfa = s.log10_nfa;
    o.n = s.n;
    o.k = s.k;
  }
  return true;
}

}  // namespace detail

/// Greedy fusion in order of increasing NFA: each segment is absorbed by
/// the first kept segment it is compatible with (angle gap, lateral
/// distance of its endpoints to the kept line, gap along that line).
/// Passes repeat until nothing merges, which makes the result idempotent.
inline std::vector<Segment> fuse_segments(std::vector<Segment> segs, const AlignmentParams& params) {
  params.validate();
  const auto order = [](const Segment& p, const Segment& q) {
    return std::tie(p.log10_nfa, p.a.x, p.a.y, p.b.x, p.b.y) < std::tie(q.log10_nfa, q.a.x, q.a.y, q.b.x, q.b.y);
  };
  for (;;) {
    std::sort(segs.begin(), segs.end(), order);
    std::vector<Segment> kept;
    bool merged = false;
    for (const Segment& s : segs) {
      bool absorbed = false;
      for (Segment& o : kept)
        if (detail::try_fuse(o, s, params)) {
          absorbed = true;
          break;
        }
      if (absorbed)
        merged = true;
      else
        kept.push_back(s);
    }
    segs = std::move(kept);
    if (!merged) break;
  }
  std::sort(segs.begin(), segs.end(), order);
  return segs;
}

}  // namespace roadtex
