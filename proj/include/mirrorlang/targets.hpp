#pragma once

// Primal potentials V on the simplex, their duals W under the entropic mirror
// map, and the closed-form Dirichlet posterior specialization.
//
// All potentials drop normalizing constants; only gradients and value
// differences are meaningful.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mirrorlang/mirror_core.hpp"

namespace mirrorlang {

/// How exp(y) enters the dual softmax. `linearized` substitutes
/// max(0, 1 + y) for numerically hostile regimes; the implicit category
/// always contributes 1.
enum class ExpMode { exact, linearized };

/// Dirichlet posterior over d+1 categories with density proportional to
/// prod_l x_l^{n_l + alpha_l - 1}.
class DirichletModel {
 public:
  DirichletModel(std::vector<std::int64_t> counts, std::vector<double> alphas)
      : counts_(std::move(counts)), alphas_(std::move(alphas)) {
    if (counts_.size() != alphas_.size())
      throw std::invalid_argument("DirichletModel: counts and alphas differ in length");
    if (counts_.size() < 2)
      throw std::invalid_argument("DirichletModel: need at least 2 categories");
    for (std::size_t l = 0; l < counts_.size(); ++l) {
      if (counts_[l] < 0)
        throw std::invalid_argument("DirichletModel: counts[" + std::to_string(l) + "] is negative");
      if (!(alphas_[l] > 0.0) || !std::isfinite(alphas_[l]))
        throw std::invalid_argument("DirichletModel: alphas[" + std::to_string(l) + "] must be positive");
      n_total_ += counts_[l];
      alpha_total_ += alphas_[l];
      shapes_.push_back(static_cast<double>(counts_[l]) + alphas_[l]);
    }
    total_ = static_cast<double>(n_total_) + alpha_total_;
  }

  /// Number of free coordinates d (categories minus one).
  std::size_t dim() const { return counts_.size() - 1; }
  std::size_t categories() const { return counts_.size(); }
  std::span<const std::int64_t> counts() const { return counts_; }
  std::span<const double> alphas() const { return alphas_; }
  /// n_l + alpha_l per category.
  std::span<const double> shapes() const { return shapes_; }
  std::int64_t num_observations() const { return n_total_; }
  double alpha_total() const { return alpha_total_; }
  /// N + Gamma; also the smoothness constant of the dual potential.
  double total() const { return total_; }

 private:
  std::vector<std::int64_t> counts_;
  std::vector<double> alphas_;
  std::vector<double> shapes_;
  std::int64_t n_total_ = 0;
  double alpha_total_ = 0.0;
  double total_ = 0.0;
};

/// Category label (0-based) of each observation.
class ObservationList {
 public:
  ObservationList(std::vector<std::size_t> labels, std::size_t categories)
      : labels_(std::move(labels)), tallies_(categories, 0) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] >= categories)
        throw std::invalid_argument("ObservationList: label of observation " + std::to_string(i) +
                                    " out of range");
      ++tallies_[labels_[i]];
    }
  }

  /// Canonical materialization: n_1 copies of category 0, then n_2 of 1, ...
  static ObservationList from_counts(const DirichletModel& model) {
    std::vector<std::size_t> labels;
    labels.reserve(static_cast<std::size_t>(model.num_observations()));
    for (std::size_t l = 0; l < model.categories(); ++l)
      labels.insert(labels.end(), static_cast<std::size_t>(model.counts()[l]), l);
    return ObservationList(std::move(labels), model.categories());
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t label(std::size_t i) const { return labels_[i]; }
  std::span<const std::size_t> labels() const { return labels_; }
  std::span<const std::int64_t> tallies() const { return tallies_; }

  bool consistent_with(const DirichletModel& model) const {
    if (tallies_.size() != model.categories()) return false;
    return std::equal(tallies_.begin(), tallies_.end(), model.counts().begin());
  }

 private:
  std::vector<std::size_t> labels_;
  std::vector<std::int64_t> tallies_;
};

namespace detail {

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(got) +
                                ", expected " + std::to_string(want));
}

/// Dual softmax p(y) under the chosen exp mode; returns the implicit mass.
inline double dual_softmax(std::span<const double> y, std::span<double> p, ExpMode mode) {
  if (mode == ExpMode::exact) return softmax_implicit(y, p);
  double z = 1.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    p[i] = std::max(0.0, 1.0 + y[i]);
    z += p[i];
  }
  for (std::size_t i = 0; i < y.size(); ++i) p[i] /= z;
  return 1.0 / z;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primal potential V(x) = -sum_{l=1}^{d+1} (n_l + alpha_l - 1) log x_l.

inline double dirichlet_V(const DirichletModel& model, const SimplexPoint& x) {
  detail::check_dim(x.dim(), model.dim(), "dirichlet_V");
  require_interior(x, "dirichlet_V");
  double v = 0.0;
  const auto p = x.full();
  for (std::size_t l = 0; l < p.size(); ++l) v -= (model.shapes()[l] - 1.0) * std::log(p[l]);
  return v;
}

inline std::vector<double> dirichlet_grad_V(const DirichletModel& model, const SimplexPoint& x) {
  detail::check_dim(x.dim(), model.dim(), "dirichlet_grad_V");
  require_interior(x, "dirichlet_grad_V");
  const std::size_t d = model.dim();
  const double last = (model.shapes()[d] - 1.0) / x.implicit();
  std::vector<double> g(d);
  for (std::size_t l = 0; l < d; ++l) g[l] = -(model.shapes()[l] - 1.0) / x[l] + last;
  return g;
}

// ---------------------------------------------------------------------------
// Dual potential W(y) = -sum_l (n_l + alpha_l) y_l + (N + Gamma) h*(y).

inline double dirichlet_W(const DirichletModel& model, const DualPoint& y) {
  detail::check_dim(y.dim(), model.dim(), "dirichlet_W");
  double lin = 0.0;
  for (std::size_t l = 0; l < y.dim(); ++l) lin += model.shapes()[l] * y[l];
  return -lin + model.total() * log1p_sum_exp(y.coords());
}

/// Writes grad W(y) into `out`.
inline void dirichlet_grad_W_into(const DirichletModel& model, std::span<const double> y,
                                  std::span<double> out, ExpMode mode = ExpMode::exact) {
  detail::dual_softmax(y, out, mode);
  const double total = model.total();
  for (std::size_t l = 0; l < y.size(); ++l) out[l] = -model.shapes()[l] + total * out[l];
}

inline std::vector<double> dirichlet_grad_W(const DirichletModel& model, const DualPoint& y,
                                            ExpMode mode = ExpMode::exact) {
  detail::check_dim(y.dim(), model.dim(), "dirichlet_grad_W");
  std::vector<double> g(y.dim());
  dirichlet_grad_W_into(model, y.coords(), g, mode);
  return g;
}

/// Mini-batch dual gradient from per-category batch tallies m_l of a batch of
/// size b: -(N m_l / b + alpha_l) + (N + Gamma) p_l(y).
inline void dirichlet_stochastic_grad_W_into(const DirichletModel& model,
                                             std::span<const std::int64_t> batch_tally,
                                             std::size_t batch_size, std::span<const double> y,
                                             std::span<double> out, ExpMode mode = ExpMode::exact) {
  detail::dual_softmax(y, out, mode);
  const double n = static_cast<double>(model.num_observations());
  const double b = static_cast<double>(batch_size);
  const double total = model.total();
  for (std::size_t l = 0; l < y.size(); ++l) {
    const double scaled = n * static_cast<double>(batch_tally[l]) / b;
    out[l] = -(scaled + model.alphas()[l]) + total * out[l];
  }
}

/// Stochastic dual gradient over an explicit batch of observation indices.
/// Throws std::invalid_argument for empty, duplicated, or out-of-range batches.
inline std::vector<double> dirichlet_stochastic_grad_W(const DirichletModel& model,
                                                       const ObservationList& obs,
                                                       std::span<const std::size_t> batch,
                                                       const DualPoint& y,
                                                       ExpMode mode = ExpMode::exact) {
  detail::check_dim(y.dim(), model.dim(), "dirichlet_stochastic_grad_W");
  if (batch.empty()) throw std::invalid_argument("dirichlet_stochastic_grad_W: empty batch");
  if (batch.size() > obs.size())
    throw std::invalid_argument("dirichlet_stochastic_grad_W: batch larger than data set");
  std::vector<char> seen(obs.size(), 0);
  std::vector<std::int64_t> tally(model.categories(), 0);
  for (std::size_t idx : batch) {
    if (idx >= obs.size())
      throw std::invalid_argument("dirichlet_stochastic_grad_W: index " + std::to_string(idx) +
                                  " out of range");
    if (seen[idx]) throw std::invalid_argument("dirichlet_stochastic_grad_W: duplicate index " +
                                               std::to_string(idx));
    seen[idx] = 1;
    ++tally[obs.label(idx)];
  }
  std::vector<double> g(y.dim());
  dirichlet_stochastic_grad_W_into(model, tally, batch.size(), y.coords(), g, mode);
  return g;
}

/// (N + Gamma) (diag(p) - p p^T) v.
inline std::vector<double> dirichlet_hess_W_apply(const DirichletModel& model, const DualPoint& y,
                                                  std::span<const double> v) {
  detail::check_dim(y.dim(), model.dim(), "dirichlet_hess_W_apply");
  detail::check_dim(v.size(), model.dim(), "dirichlet_hess_W_apply");
  std::vector<double> p(y.dim());
  softmax_implicit(y.coords(), p);
  const double dot = std::inner_product(p.begin(), p.end(), v.begin(), 0.0);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = model.total() * p[i] * (v[i] - dot);
  return out;
}

// ---------------------------------------------------------------------------
// Generic primal potentials and their duals.

/// A primal potential given by callbacks over the d free coordinates.
struct PrimalPotential {
  std::function<double(const SimplexPoint&)> value;
  std::function<std::vector<double>(const SimplexPoint&)> gradient;
  std::function<bool(std::span<const double>)> in_domain = [](std::span<const double>) {
    return true;
  };
};

inline PrimalPotential dirichlet_potential(const DirichletModel& model) {
  return {[model](const SimplexPoint& x) { return dirichlet_V(model, x); },
          [model](const SimplexPoint& x) { return dirichlet_grad_V(model, x); }};
}

/// Per-observation potential V_i(x) = -log x_c - (1/N) sum_l (alpha_l - 1) log x_l,
/// whose sum over the data set is the Dirichlet V.
inline PrimalPotential dirichlet_observation_potential(const DirichletModel& model,
                                                       std::size_t category) {
  if (category >= model.categories())
    throw std::invalid_argument("dirichlet_observation_potential: category out of range");
  if (model.num_observations() == 0)
    throw std::invalid_argument("dirichlet_observation_potential: model has no observations");
  const double inv_n = 1.0 / static_cast<double>(model.num_observations());
  auto weights = [model, category, inv_n]() {
    std::vector<double> w(model.categories());
    for (std::size_t l = 0; l < w.size(); ++l)
      w[l] = (l == category ? 1.0 : 0.0) + inv_n * (model.alphas()[l] - 1.0);
    return w;
  }();
  return {[weights](const SimplexPoint& x) {
            double v = 0.0;
            const auto p = x.full();
            for (std::size_t l = 0; l < p.size(); ++l) v -= weights[l] * std::log(p[l]);
            return v;
          },
          [weights](const SimplexPoint& x) {
            const std::size_t d = x.dim();
            const double last = weights[d] / x.implicit();
            std::vector<double> g(d);
            for (std::size_t l = 0; l < d; ++l) g[l] = -weights[l] / x[l] + last;
            return g;
          }};
}

namespace detail {
inline void require_entropic(const MirrorMap& map, std::size_t d, const char* what) {
  if (map.kind() != MirrorKind::entropic)
    throw std::invalid_argument(std::string(what) + ": only the entropic map is supported");
  check_dim(d, map.dimension(), what);
}
}  // namespace detail

/// (grad W o grad h)(x) computed in primal coordinates as
/// (grad^2 h(x))^{-1} (grad V(x) + grad log det grad^2 h(x)).
inline std::vector<double> generic_dual_drift(const PrimalPotential& potential, const MirrorMap& map,
                                              const SimplexPoint& x) {
  detail::require_entropic(map, x.dim(), "generic_dual_drift");
  if (!potential.in_domain(x.coords())) throw DomainError("generic_dual_drift: x outside domain of V");
  std::vector<double> rhs = potential.gradient(x);
  const std::vector<double> logdet = entropic_grad_log_det_hess_h(x);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += logdet[i];
  return entropic_hess_h_solve(x, rhs);
}

struct DualComponent {
  double value;
  std::vector<double> gradient;
};

/// W_i(y) = V_i(grad h*(y)) + (1/N) log det grad^2 h(grad h*(y)), with its
/// gradient by the chain rule through grad^2 h*(y) = diag(x) - x x^T.
inline DualComponent generic_dual_component(const PrimalPotential& component, const MirrorMap& map,
                                            std::size_t num_components, const DualPoint& y) {
  detail::require_entropic(map, y.dim(), "generic_dual_component");
  if (num_components == 0) throw std::invalid_argument("generic_dual_component: N must be positive");
  const double inv_n = 1.0 / static_cast<double>(num_components);
  const SimplexPoint x = entropic_grad_h_star(y);
  std::vector<double> g = component.gradient(x);
  const std::vector<double> logdet = entropic_grad_log_det_hess_h(x);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += inv_n * logdet[i];
  return {component.value(x) + inv_n * entropic_log_det_hess_h(x), entropic_hess_h_solve(x, g)};
}

/// Dual potential W over an entropic mirror space, either in Dirichlet closed
/// form or built generically from a primal potential through Monge-Ampere.
class DualPotential {
 public:
  explicit DualPotential(DirichletModel model)
      : dim_(model.dim()), model_(std::move(model)), map_(MirrorMap::entropic(dim_)) {}

  DualPotential(PrimalPotential potential, MirrorMap map)
      : dim_(map.dimension()), primal_(std::move(potential)), map_(std::move(map)) {
    detail::require_entropic(map_, dim_, "DualPotential");
  }

  std::size_t dim() const { return dim_; }
  bool closed_form() const { return model_.has_value(); }

  double value(const DualPoint& y) const {
    if (model_) return dirichlet_W(*model_, y);
    const SimplexPoint x = entropic_grad_h_star(y);
    return primal_.value(x) + entropic_log_det_hess_h(x);
  }

  std::vector<double> gradient(const DualPoint& y) const {
    if (model_) return dirichlet_grad_W(*model_, y);
    return generic_dual_drift(primal_, map_, entropic_grad_h_star(y));
  }

 private:
  std::size_t dim_;
  std::optional<DirichletModel> model_;
  PrimalPotential primal_;
  MirrorMap map_;
};

/// Dual potential of a product of independent Dirichlet posteriors under the
/// block entropic map: values add, gradients concatenate, the Hessian is
/// block diagonal with per-block bound N_k + Gamma_k.
class ProductSimplexTarget {
 public:
  explicit ProductSimplexTarget(std::vector<DirichletModel> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw std::invalid_argument("ProductSimplexTarget: empty block list");
    std::vector<std::size_t> dims;
    for (const auto& b : blocks_) dims.push_back(b.dim());
    map_ = MirrorMap::block(std::move(dims));
  }

  const MirrorMap& map() const { return *map_; }
  std::size_t dim() const { return map_->dimension(); }
  std::span<const DirichletModel> blocks() const { return blocks_; }

  double value(std::span<const double> y) const {
    detail::check_dim(y.size(), dim(), "ProductSimplexTarget::value");
    double v = 0.0;
    std::size_t off = 0;
    for (const auto& b : blocks_) {
      const auto yb = y.subspan(off, b.dim());
      v += dirichlet_W(b, DualPoint(std::vector<double>(yb.begin(), yb.end())));
      off += b.dim();
    }
    return v;
  }

  void gradient_into(std::span<const double> y, std::span<double> out,
                     ExpMode mode = ExpMode::exact) const {
    std::size_t off = 0;
    for (const auto& b : blocks_) {
      dirichlet_grad_W_into(b, y.subspan(off, b.dim()), out.subspan(off, b.dim()), mode);
      off += b.dim();
    }
  }

  std::vector<double> gradient(std::span<const double> y) const {
    detail::check_dim(y.size(), dim(), "ProductSimplexTarget::gradient");
    std::vector<double> g(y.size());
    gradient_into(y, g);
    return g;
  }

  /// Largest-eigenvalue bound of each diagonal Hessian block.
  std::vector<double> hessian_bounds() const {
    std::vector<double> out;
    for (const auto& b : blocks_) out.push_back(b.total());
    return out;
  }

 private:
  std::vector<DirichletModel> blocks_;
  std::optional<MirrorMap> map_;
};

}  // namespace mirrorlang
