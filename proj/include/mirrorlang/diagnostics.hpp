#pragma once

// Empirical evaluation: first-coordinate histograms and their total
// variation, log-log rate fits, finite-difference gradient checks, step-size
// grid search, and 1-d Wasserstein estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mirrorlang {

/// Equal-width histogram over [0, 1].
struct Histogram {
  std::vector<double> edges;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;

  std::size_t bins() const { return counts.size(); }
};

inline Histogram histogram_build(std::span<const double> samples, std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("histogram_build: need at least 2 bins");
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double s : samples) {
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("histogram_build: sample " + std::to_string(s) + " outside [0, 1]");
    auto b = static_cast<std::size_t>(s * static_cast<double>(bins));
    ++h.counts[std::min(b, bins - 1)];
  }
  h.total = static_cast<std::int64_t>(samples.size());
  return h;
}

/// Half the L1 distance between normalized bin frequencies.
inline double tv_distance(const Histogram& p, const Histogram& q) {
  if (p.edges != q.edges) throw std::invalid_argument("tv_distance: histograms have different edges");
  if (p.total <= 0 || q.total <= 0) throw std::invalid_argument("tv_distance: empty histogram");
  const double np = static_cast<double>(p.total);
  const double nq = static_cast<double>(q.total);
  double s = 0.0;
  for (std::size_t b = 0; b < p.counts.size(); ++b)
    s += std::abs(static_cast<double>(p.counts[b]) / np - static_cast<double>(q.counts[b]) / nq);
  return 0.5 * s;
}

// ---------------------------------------------------------------------------
// Rate fitting.

struct CurvePoint {
  std::int64_t iter;
  double tv;
};

struct RateFit {
  double slope;
  double intercept;
  std::int64_t window_begin;  // first iteration used
  std::int64_t window_end;    // last iteration used
  std::size_t points;
};

struct RateWindow {
  std::int64_t begin;
  std::int64_t end;
};

/// Local log-log slope below which a curve still counts as decaying.
inline constexpr double kSaturationSlope = -0.1;

/// Least-squares slope of log(tv) against log(iter).
///
/// With an explicit window every point inside it is used. Without one the
/// window is chosen automatically: zero values are dropped, and both the
/// leading plateau and the trailing saturated segment (runs of consecutive
/// points whose local slope exceeds kSaturationSlope) are excluded.
inline RateFit rate_slope(std::span<const CurvePoint> curve, std::optional<RateWindow> window = {}) {
  std::vector<CurvePoint> pts;
  if (window) {
    for (const auto& p : curve)
      if (p.iter >= window->begin && p.iter <= window->end) {
        if (!(p.tv > 0.0)) throw std::invalid_argument("rate_slope: non-positive tv inside window");
        pts.push_back(p);
      }
  } else {
    for (const auto& p : curve)
      if (p.tv > 0.0 && p.iter > 0) pts.push_back(p);
    auto local = [&](std::size_t i) {
      return (std::log(pts[i + 1].tv) - std::log(pts[i].tv)) /
             (std::log(static_cast<double>(pts[i + 1].iter)) - std::log(static_cast<double>(pts[i].iter)));
    };
    while (pts.size() >= 2 && local(pts.size() - 2) > kSaturationSlope) pts.pop_back();
    std::size_t lead = 0;
    while (lead + 1 < pts.size() && local(lead) > kSaturationSlope) ++lead;
    pts.erase(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(lead));
  }
  if (pts.size() < 3) throw std::invalid_argument("rate_slope: fewer than 3 points in window");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (const auto& p : pts) {
    const double lx = std::log(static_cast<double>(p.iter));
    const double ly = std::log(p.tv);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0)) throw std::invalid_argument("rate_slope: degenerate window");
  const double slope = (n * sxy - sx * sy) / denom;
  return {slope, (sy - slope * sx) / n, pts.front().iter, pts.back().iter, pts.size()};
}

/// ceil of a geometric grid from 1 to `iterations`, deduplicated, always
/// containing the last iteration.
inline std::vector<std::int64_t> log_checkpoints(std::int64_t iterations, std::size_t count) {
  if (iterations < 1 || count < 1) throw std::invalid_argument("log_checkpoints: invalid arguments");
  std::vector<std::int64_t> out;
  const double ratio = count > 1 ? std::log(static_cast<double>(iterations)) / static_cast<double>(count - 1) : 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    auto t = static_cast<std::int64_t>(std::ceil(std::exp(ratio * static_cast<double>(k)) - 1e-9));
    t = std::clamp<std::int64_t>(t, 1, iterations);
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  if (out.back() != iterations) out.push_back(iterations);
  return out;
}

// ---------------------------------------------------------------------------

/// Worst relative discrepancy between g(point) and central differences of f.
/// The error of a coordinate is |fd - g| / max(1, |fd|): relative for large
/// derivatives, absolute near zero.
inline double gradient_check(const std::function<double(std::span<const double>)>& f,
                             const std::function<std::vector<double>(std::span<const double>)>& g,
                             std::span<const double> point, double h_step) {
  if (!(h_step > 0.0)) throw std::invalid_argument("gradient_check: step must be positive");
  const std::vector<double> analytic = g(point);
  if (analytic.size() != point.size()) throw std::invalid_argument("gradient_check: gradient size mismatch");
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h_step;
    const double fp = f(x);
    x[i] = orig - h_step;
    const double fm = f(x);
    x[i] = orig;
    const double fd = (fp - fm) / (2.0 * h_step);
    if (!std::isfinite(fd) || !std::isfinite(analytic[i]))
      throw std::domain_error("gradient_check: non-finite evaluation");
    const double scale = std::max(1.0, std::abs(fd));
    worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Grid search.

struct GridEntry {
  double beta;
  std::vector<CurvePoint> curve;
  double final_tv;  // mean tv over the last 10% of checkpoints
  std::optional<double> slope;
  bool diverged;
};

struct GridResult {
  std::vector<GridEntry> ranked;  // every finished run, best first
  std::vector<GridEntry> diverged;
  std::size_t keep = 1;

  /// The best `keep` finished runs with their full curves.
  std::span<const GridEntry> best() const { return {ranked.data(), std::min(keep, ranked.size())}; }
};

/// Mean tv over the trailing 10% (at least one) of checkpoints.
inline double final_window_tv(std::span<const CurvePoint> curve) {
  if (curve.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t k = std::max<std::size_t>(1, (curve.size() + 9) / 10);
  double s = 0.0;
  for (std::size_t i = curve.size() - k; i < curve.size(); ++i) s += curve[i].tv;
  return s / static_cast<double>(k);
}

class GridSearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `runner` for every step size, in grid order, and ranks the finished
/// curves by final-window tv (ties keep grid order). A runner signals
/// divergence by returning an empty curve or non-finite tv values.
inline GridResult grid_search(const std::function<std::vector<CurvePoint>(double)>& runner,
                              std::span<const double> step_grid, std::size_t keep) {
  if (step_grid.empty()) throw std::invalid_argument("grid_search: empty grid");
  if (keep == 0 || keep > step_grid.size()) throw std::invalid_argument("grid_search: keep out of range");
  GridResult result;
  for (double beta : step_grid) {
    GridEntry e{beta, runner(beta), 0.0, std::nullopt, false};
    e.final_tv = final_window_tv(e.curve);
    e.diverged = !std::isfinite(e.final_tv) ||
                 std::any_of(e.curve.begin(), e.curve.end(), [](const CurvePoint& p) { return !std::isfinite(p.tv); });
    if (e.diverged) {
      result.diverged.push_back(std::move(e));
      continue;
    }
    try {
      e.slope = rate_slope(e.curve).slope;
    } catch (const std::invalid_argument&) {
    }
    result.ranked.push_back(std::move(e));
  }
  if (result.ranked.empty()) {
    std::ostringstream msg;
    msg << "grid_search: every configuration diverged; grid =";
    for (double b : step_grid) msg << ' ' << b;
    throw GridSearchError(msg.str());
  }
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const GridEntry& a, const GridEntry& b) { return a.final_tv < b.final_tv; });
  result.keep = keep;
  return result;
}

// ---------------------------------------------------------------------------

/// Squared 2-Wasserstein estimate between two equal-size 1-d samples via the
/// sorted (quantile) coupling.
inline double wasserstein1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wasserstein1d: sample sizes differ");
  if (a.empty()) throw std::invalid_argument("wasserstein1d: empty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) s += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  return s / static_cast<double>(sa.size());
}

}  // namespace mirrorlang
