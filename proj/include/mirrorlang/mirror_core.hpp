#pragma once

// Mirror-map calculus for the entropic simplex map, its block product, and
// the one-dimensional Burg entropy.
//
// Primal points live in the open simplex {x in R^d : x_i > 0, sum x_i < 1}
// with the implicit coordinate x_{d+1} = 1 - sum x_i. Dual points are
// unconstrained vectors y = grad h(x) with y_i = log(x_i / x_{d+1}).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mirrorlang {

/// Raised when a point falls outside the domain of a map or potential.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A point in the open probability simplex over d+1 categories.
///
/// Only the first d probabilities are free coordinates; the (d+1)-th is kept
/// alongside them so that points produced by the dual map keep full relative
/// precision even when one category saturates.
class SimplexPoint {
 public:
  /// Builds a point from its d free coordinates. Throws DomainError unless
  /// every coordinate is positive and their sum is strictly below one.
  explicit SimplexPoint(std::span<const double> coords) {
    if (coords.empty()) throw DomainError("SimplexPoint: dimension must be at least 1");
    probs_.assign(coords.begin(), coords.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (!(probs_[i] > 0.0) || !std::isfinite(probs_[i]))
        throw DomainError("SimplexPoint: coordinate " + std::to_string(i) +
                          " is not strictly positive");
      sum += probs_[i];
    }
    const double last = 1.0 - sum;
    if (!(last > 0.0))
      throw DomainError("SimplexPoint: coordinates sum to " + std::to_string(sum) +
                        ", must be < 1");
    probs_.push_back(last);
  }

  explicit SimplexPoint(const std::vector<double>& coords)
      : SimplexPoint(std::span<const double>(coords)) {}

  SimplexPoint(std::initializer_list<double> coords)
      : SimplexPoint(std::span<const double>(coords.begin(), coords.size())) {}

  /// Builds a point from all d+1 probabilities, as produced by the dual map
  /// or by Gamma normalization. The caller guarantees they sum to one up to
  /// rounding. Coordinates that underflowed to exactly zero are accepted
  /// here; operations that take logarithms reject them with DomainError.
  static SimplexPoint from_full(std::vector<double> probs) {
    if (probs.size() < 2) throw DomainError("SimplexPoint: need at least 2 categories");
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!(probs[i] >= 0.0) || !std::isfinite(probs[i]))
        throw DomainError("SimplexPoint: category " + std::to_string(i) + " is negative or not finite");
    }
    SimplexPoint p;
    p.probs_ = std::move(probs);
    return p;
  }

  /// False when some category underflowed to zero.
  bool strictly_interior() const {
    return std::all_of(probs_.begin(), probs_.end(), [](double v) { return v > 0.0; });
  }

  std::size_t dim() const { return probs_.size() - 1; }
  std::span<const double> coords() const { return {probs_.data(), probs_.size() - 1}; }
  /// All d+1 probabilities, the implicit category last.
  std::span<const double> full() const { return probs_; }
  double implicit() const { return probs_.back(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  SimplexPoint() = default;
  std::vector<double> probs_;
};

/// An unconstrained point of the mirror (dual) space. All coordinates finite.
class DualPoint {
 public:
  explicit DualPoint(std::vector<double> coords) : coords_(std::move(coords)) {
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      if (!std::isfinite(coords_[i]))
        throw DomainError("DualPoint: coordinate " + std::to_string(i) + " is not finite");
    }
  }
  DualPoint(std::initializer_list<double> coords) : DualPoint(std::vector<double>(coords)) {}

  std::size_t dim() const { return coords_.size(); }
  std::span<const double> coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }

 private:
  std::vector<double> coords_;
};

// ---------------------------------------------------------------------------
// Overflow-safe kernels over raw spans. These are the hot paths used by the
// samplers; the typed functions below wrap them.

/// log(1 + sum_l exp(y_l)), evaluated by shifting with max(0, max_l y_l).
inline double log1p_sum_exp(std::span<const double> y) {
  double shift = 0.0;
  for (double v : y) shift = std::max(shift, v);
  double acc = std::exp(-shift);
  for (double v : y) acc += std::exp(v - shift);
  return shift + std::log(acc);
}

/// Softmax with an implicit zero logit. Writes the d explicit probabilities
/// into `out` and returns the implicit one.
inline double softmax_implicit(std::span<const double> y, std::span<double> out) {
  double shift = 0.0;
  for (double v : y) shift = std::max(shift, v);
  const double implicit_term = std::exp(-shift);
  double z = implicit_term;
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = std::exp(y[i] - shift);
    z += out[i];
  }
  const double inv = 1.0 / z;
  for (std::size_t i = 0; i < y.size(); ++i) out[i] *= inv;
  return implicit_term * inv;
}

inline void require_interior(const SimplexPoint& x, const char* what) {
  if (!x.strictly_interior())
    throw DomainError(std::string(what) + ": point has a category that underflowed to zero");
}

// ---------------------------------------------------------------------------
// Entropic mirror map h(x) = sum_l x_l log x_l over all d+1 categories.

inline double entropic_h(const SimplexPoint& x) {
  require_interior(x, "entropic_h");
  double s = 0.0;
  for (double p : x.full()) s += p * std::log(p);
  return s;
}

inline DualPoint entropic_grad_h(const SimplexPoint& x) {
  require_interior(x, "entropic_grad_h");
  const double log_last = std::log(x.implicit());
  std::vector<double> y(x.dim());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::log(x[i]) - log_last;
  return DualPoint(std::move(y));
}

inline double entropic_h_star(const DualPoint& y) { return log1p_sum_exp(y.coords()); }

inline SimplexPoint entropic_grad_h_star(const DualPoint& y) {
  std::vector<double> probs(y.dim() + 1);
  probs.back() = softmax_implicit(y.coords(), std::span<double>(probs.data(), y.dim()));
  return SimplexPoint::from_full(std::move(probs));
}

/// log det of grad^2 h(x) = diag(1/x) + (1/x_{d+1}) 11^T, which by the matrix
/// determinant lemma is -sum_{l=1}^{d+1} log x_l.
inline double entropic_log_det_hess_h(const SimplexPoint& x) {
  require_interior(x, "entropic_log_det_hess_h");
  double s = 0.0;
  for (double p : x.full()) s -= std::log(p);
  return s;
}

inline std::vector<double> entropic_grad_log_det_hess_h(const SimplexPoint& x) {
  require_interior(x, "entropic_grad_log_det_hess_h");
  const double inv_last = 1.0 / x.implicit();
  std::vector<double> g(x.dim());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -1.0 / x[i] + inv_last;
  return g;
}

/// Applies (grad^2 h(x))^{-1} = diag(x) - x x^T to v.
inline std::vector<double> entropic_hess_h_solve(const SimplexPoint& x, std::span<const double> v) {
  if (v.size() != x.dim()) throw std::invalid_argument("entropic_hess_h_solve: dimension mismatch");
  require_interior(x, "entropic_hess_h_solve");
  const auto c = x.coords();
  const double dot = std::inner_product(c.begin(), c.end(), v.begin(), 0.0);
  std::vector<double> u(v.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = c[i] * (v[i] - dot);
  return u;
}

// ---------------------------------------------------------------------------
// Mirror map descriptors.

enum class MirrorKind { entropic, block, burg };
enum class MapDirection { forward, inverse };

/// Immutable description of one of the supported mirror maps.
class MirrorMap {
 public:
  static MirrorMap entropic(std::size_t d) {
    if (d == 0) throw std::invalid_argument("MirrorMap: entropic dimension must be positive");
    return MirrorMap(MirrorKind::entropic, {d});
  }

  /// Product of entropic maps over consecutive, disjoint blocks.
  static MirrorMap block(std::vector<std::size_t> block_dims) {
    if (block_dims.empty()) throw std::invalid_argument("MirrorMap: block map needs at least one block");
    for (std::size_t d : block_dims)
      if (d == 0) throw std::invalid_argument("MirrorMap: block dimension must be positive");
    return MirrorMap(MirrorKind::block, std::move(block_dims));
  }

  /// h(x) = -log x on (0, inf); dual domain (-inf, 0).
  static MirrorMap burg() { return MirrorMap(MirrorKind::burg, {1}); }

  MirrorKind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  std::span<const std::size_t> block_dims() const { return blocks_; }

 private:
  MirrorMap(MirrorKind kind, std::vector<std::size_t> blocks)
      : kind_(kind), blocks_(std::move(blocks)),
        dimension_(std::accumulate(blocks_.begin(), blocks_.end(), std::size_t{0})) {}

  MirrorKind kind_;
  std::vector<std::size_t> blocks_;
  std::size_t dimension_;
};

// Burg entropy map pieces.
inline double burg_h(double x) {
  if (!(x > 0.0)) throw DomainError("burg_h: x must be positive");
  return -std::log(x);
}
inline double burg_grad_h(double x) {
  if (!(x > 0.0)) throw DomainError("burg_grad_h: x must be positive");
  return -1.0 / x;
}
inline double burg_h_star(double y) {
  if (!(y < 0.0)) throw DomainError("burg_h_star: y must be negative");
  return -std::log(-y) - 1.0;
}
inline double burg_grad_h_star(double y) {
  if (!(y < 0.0)) throw DomainError("burg_grad_h_star: y must be negative");
  return -1.0 / y;
}

/// Applies grad h (forward) or grad h* (inverse) of `map` to a concatenated
/// point, block by block.
inline std::vector<double> block_map_apply(const MirrorMap& map, MapDirection direction,
                                           std::span<const double> point) {
  if (point.size() != map.dimension())
    throw std::invalid_argument("block_map_apply: point has " + std::to_string(point.size()) +
                                " coordinates, map expects " + std::to_string(map.dimension()));
  std::vector<double> out(point.size());
  if (map.kind() == MirrorKind::burg) {
    out[0] = direction == MapDirection::forward ? burg_grad_h(point[0]) : burg_grad_h_star(point[0]);
    return out;
  }
  std::size_t offset = 0;
  for (std::size_t d : map.block_dims()) {
    const auto in = point.subspan(offset, d);
    if (direction == MapDirection::forward) {
      const DualPoint y = entropic_grad_h(SimplexPoint(in));
      std::copy(y.coords().begin(), y.coords().end(), out.begin() + offset);
    } else {
      for (double v : in)
        if (!std::isfinite(v)) throw DomainError("block_map_apply: non-finite dual coordinate");
      softmax_implicit(in, std::span<double>(out.data() + offset, d));
    }
    offset += d;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dual potentials of simple 1-d targets under the Burg map. Normalizing
// constants are dropped.

struct ScalarDerivatives {
  double value;
  double first;
  double second;
};

/// W(y) = -1/y + 2 log(-y) for the exponential target V(x) = x.
inline ScalarDerivatives burg_calculus(double y) {
  if (!(y < 0.0)) throw DomainError("burg_calculus: y must be negative");
  return {-1.0 / y + 2.0 * std::log(-y), 1.0 / (y * y) + 2.0 / y, (-2.0 - 2.0 * y) / (y * y * y)};
}

/// W(y) = c/y^2 + 2 log(-y) for the half-Gaussian target V(x) = c x^2.
inline ScalarDerivatives burg_gaussian_calculus(double y, double c) {
  if (!(y < 0.0)) throw DomainError("burg_gaussian_calculus: y must be negative");
  if (!(c > 0.0)) throw std::invalid_argument("burg_gaussian_calculus: c must be positive");
  const double y2 = y * y;
  return {c / y2 + 2.0 * std::log(-y), -2.0 * c / (y2 * y) + 2.0 / y, (6.0 * c - 2.0 * y2) / (y2 * y2)};
}

}  // namespace mirrorlang
