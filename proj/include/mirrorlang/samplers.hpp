#pragma once

// Iteration kernels and chain runners: discretized mirrored Langevin
// dynamics in dual and primal form, the mini-batch variant, the SGRLD
// expanded-mean baseline, exact Dirichlet draws, and the 1-d CIR integrator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mirrorlang/mirror_core.hpp"
#include "mirrorlang/random.hpp"
#include "mirrorlang/targets.hpp"

namespace mirrorlang {

/// Dual iterate y^t with a lazily refreshed primal image x^t = grad h*(y^t).
class ChainState {
 public:
  explicit ChainState(DualPoint y, std::int64_t step_count = 0)
      : y_(std::move(y)), step_count_(step_count) {}

  const DualPoint& y() const { return y_; }
  std::int64_t step_count() const { return step_count_; }
  bool has_cached_x() const { return x_cache_.has_value(); }

  /// Primal image, computed on first access after each update.
  const SimplexPoint& x() const {
    if (!x_cache_) x_cache_ = entropic_grad_h_star(y_);
    return *x_cache_;
  }

 private:
  DualPoint y_;
  std::int64_t step_count_;
  mutable std::optional<SimplexPoint> x_cache_;
};

/// Step sizes beta^t, either constant or an explicit per-iteration list.
class StepSchedule {
 public:
  static StepSchedule constant(double beta) { return StepSchedule({beta}, true); }
  static StepSchedule sequence(std::vector<double> betas) {
    if (betas.empty()) throw std::invalid_argument("StepSchedule: empty sequence");
    return StepSchedule(std::move(betas), false);
  }

  bool is_constant() const { return constant_; }
  std::span<const double> values() const { return steps_; }

  /// Step size of iteration t (0-based).
  double at(std::size_t t) const {
    if (constant_) return steps_[0];
    if (t >= steps_.size())
      throw std::out_of_range("StepSchedule: no step size for iteration " + std::to_string(t));
    return steps_[t];
  }

 private:
  StepSchedule(std::vector<double> steps, bool constant) : steps_(std::move(steps)), constant_(constant) {
    for (double b : steps_)
      if (!(b > 0.0) || !std::isfinite(b))
        throw std::invalid_argument("StepSchedule: step sizes must be positive and finite");
  }

  std::vector<double> steps_;
  bool constant_;
};

// ---------------------------------------------------------------------------
// Single steps.

/// y <- y - beta * grad + sqrt(2 beta) * xi, in place.
inline void langevin_update(std::span<double> y, std::span<const double> grad, double beta,
                            std::span<const double> xi) {
  const double scale = std::sqrt(2.0 * beta);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += -beta * grad[i] + scale * xi[i];
}

inline void check_step_inputs(std::span<const double> grad, double beta, std::span<const double> xi,
                              std::size_t d) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("step size must be positive and finite");
  if (grad.size() != d || xi.size() != d) throw std::invalid_argument("step: dimension mismatch");
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(grad[i])) throw DomainError("step: non-finite gradient");
    if (!std::isfinite(xi[i])) throw DomainError("step: non-finite noise");
  }
}

/// One discretized MLD step in the dual: y' = y - beta grad W(y) + sqrt(2 beta) xi.
inline ChainState mld_step_dual(const ChainState& state, std::span<const double> grad_W, double beta,
                                std::span<const double> xi) {
  check_step_inputs(grad_W, beta, xi, state.y().dim());
  std::vector<double> y(state.y().coords().begin(), state.y().coords().end());
  langevin_update(y, grad_W, beta, xi);
  return ChainState(DualPoint(std::move(y)), state.step_count() + 1);
}

/// The same step with the drift evaluated in primal coordinates,
/// (grad^2 h(x))^{-1} (grad V(x) + grad log det grad^2 h(x)) at x = grad h*(y).
inline ChainState mld_step_primal(const ChainState& state, const PrimalPotential& potential,
                                  const MirrorMap& map, double beta, std::span<const double> xi) {
  const std::vector<double> drift = generic_dual_drift(potential, map, state.x());
  return mld_step_dual(state, drift, beta, xi);
}

inline ChainState mld_step_primal(const ChainState& state, const DirichletModel& model, double beta,
                                  std::span<const double> xi) {
  return mld_step_primal(state, dirichlet_potential(model), MirrorMap::entropic(model.dim()), beta, xi);
}

// ---------------------------------------------------------------------------
// Mini-batches.

/// Draws index sets of size b from {0, ..., N-1}. Without replacement it runs
/// a partial Fisher-Yates shuffle over a persistent permutation.
class BatchSampler {
 public:
  BatchSampler(std::size_t population, bool with_replacement = false)
      : perm_(population), with_replacement_(with_replacement) {
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  }

  std::span<const std::size_t> draw(std::size_t b, RandomStream& rng) {
    const std::size_t n = perm_.size();
    if (b == 0 || b > n) throw std::invalid_argument("BatchSampler: batch size out of range");
    if (with_replacement_) {
      scratch_.resize(b);
      for (auto& idx : scratch_) idx = rng.index_below(n);
      return scratch_;
    }
    if (b == n) return perm_;
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t j = i + rng.index_below(n - i);
      std::swap(perm_[i], perm_[j]);
    }
    return {perm_.data(), b};
  }

 private:
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> scratch_;
  bool with_replacement_;
};

struct SmldOptions {
  std::size_t batch_size = 1;
  StepSchedule schedule = StepSchedule::constant(1e-4);
  std::size_t iterations = 1;
  ExpMode exp_mode = ExpMode::exact;
  bool record_trace = false;
  bool with_replacement = false;
  std::optional<DualPoint> initial;  // defaults to y = 0
};

struct ChainRun {
  ChainState final_state;
  std::vector<std::vector<double>> trace;  // y^1..y^T when recorded
};

namespace detail {

template <typename GradFn>
ChainRun run_dual_chain(std::size_t d, const SmldOptions& opt, std::uint64_t seed, std::uint64_t chain,
                        GradFn&& grad_fn) {
  if (opt.iterations == 0) throw std::invalid_argument("chain run: iterations must be >= 1");
  std::vector<double> y = opt.initial ? std::vector<double>(opt.initial->coords().begin(),
                                                            opt.initial->coords().end())
                                      : std::vector<double>(d, 0.0);
  if (y.size() != d) throw std::invalid_argument("chain run: initial point has wrong dimension");
  std::vector<double> grad(d);
  NoiseStream noise(seed, chain, d);
  ChainRun run{ChainState(DualPoint(y)), {}};
  if (opt.record_trace) run.trace.reserve(opt.iterations);
  for (std::size_t t = 0; t < opt.iterations; ++t) {
    grad_fn(std::span<const double>(y), std::span<double>(grad));
    const auto xi = noise.next();
    const double beta = opt.schedule.at(t);
    langevin_update(y, grad, beta, xi);
    if (!std::isfinite(std::accumulate(y.begin(), y.end(), 0.0)))
      throw DomainError("chain run: non-finite state at iteration " + std::to_string(t + 1));
    if (opt.record_trace) run.trace.push_back(y);
  }
  run.final_state = ChainState(DualPoint(std::move(y)), static_cast<std::int64_t>(opt.iterations));
  return run;
}

}  // namespace detail

/// Deterministic-gradient MLD chain from y^0 (default 0). Noise comes from
/// the (seed, chain) noise stream.
inline ChainRun mld_run(const DirichletModel& model, const SmldOptions& opt, std::uint64_t seed,
                        std::uint64_t chain) {
  return detail::run_dual_chain(model.dim(), opt, seed, chain,
                                [&](std::span<const double> y, std::span<double> g) {
                                  dirichlet_grad_W_into(model, y, g, opt.exp_mode);
                                });
}

/// Mini-batch MLD: each iteration draws a batch B of size b and steps with
/// the unbiased dual gradient (N/b) sum_{i in B} grad W_i. Batches come from a
/// stream independent of the Gaussian noise, so b = N reproduces mld_run.
inline ChainRun smld_run(const DirichletModel& model, const ObservationList& obs, const SmldOptions& opt,
                         std::uint64_t seed, std::uint64_t chain) {
  if (!obs.consistent_with(model))
    throw std::invalid_argument("smld_run: observation tallies do not match model counts");
  const std::size_t n = obs.size();
  if (opt.batch_size < 1 || opt.batch_size > n)
    throw std::invalid_argument("smld_run: batch size must lie in [1, N]");
  BatchSampler sampler(n, opt.with_replacement);
  RandomStream batch_rng(seed, chain, StreamPurpose::batch);
  std::vector<std::int64_t> tally(model.categories());
  return detail::run_dual_chain(model.dim(), opt, seed, chain,
                                [&](std::span<const double> y, std::span<double> g) {
                                  std::fill(tally.begin(), tally.end(), 0);
                                  for (std::size_t idx : sampler.draw(opt.batch_size, batch_rng))
                                    ++tally[obs.label(idx)];
                                  dirichlet_stochastic_grad_W_into(model, tally, opt.batch_size, y, g,
                                                                   opt.exp_mode);
                                });
}

// ---------------------------------------------------------------------------
// Step-size guidance for the mini-batch sampler.

/// min{ (2 T R0^2 (L d + sigma^2))^{-1/2}, 1/L }.
inline double smld_step_size_bound(double iterations, double initial_distance_sq, double smoothness,
                                   double dim, double gradient_variance) {
  if (!(iterations > 0) || !(initial_distance_sq > 0) || !(smoothness > 0) || !(dim > 0))
    throw std::invalid_argument("smld_step_size_bound: arguments must be positive");
  if (gradient_variance < 0) throw std::invalid_argument("smld_step_size_bound: negative variance");
  const double first =
      1.0 / std::sqrt(2.0 * iterations * initial_distance_sq * (smoothness * dim + gradient_variance));
  return std::min(first, 1.0 / smoothness);
}

/// Empirical E||g~ - mean(g~)||^2 of the mini-batch dual gradient at y0 over
/// `num_batches` independent batches.
inline double estimate_gradient_variance(const DirichletModel& model, const ObservationList& obs,
                                         std::size_t batch_size, const DualPoint& y0,
                                         std::size_t num_batches, std::uint64_t seed) {
  const std::size_t d = model.dim();
  BatchSampler sampler(obs.size());
  RandomStream rng(seed, 0, StreamPurpose::batch);
  std::vector<std::vector<double>> grads(num_batches, std::vector<double>(d));
  std::vector<double> mean(d, 0.0);
  std::vector<std::int64_t> tally(model.categories());
  for (auto& g : grads) {
    std::fill(tally.begin(), tally.end(), 0);
    for (std::size_t idx : sampler.draw(batch_size, rng)) ++tally[obs.label(idx)];
    dirichlet_stochastic_grad_W_into(model, tally, batch_size, y0.coords(), g);
    for (std::size_t i = 0; i < d; ++i) mean[i] += g[i] / static_cast<double>(num_batches);
  }
  double var = 0.0;
  for (const auto& g : grads)
    for (std::size_t i = 0; i < d; ++i) var += (g[i] - mean[i]) * (g[i] - mean[i]);
  return var / static_cast<double>(num_batches);
}

/// Dual image of the posterior mean, where grad W vanishes.
inline DualPoint dirichlet_dual_mode(const DirichletModel& model) {
  std::vector<double> probs(model.shapes().begin(), model.shapes().end());
  for (double& p : probs) p /= model.total();
  return entropic_grad_h(SimplexPoint::from_full(std::move(probs)));
}

/// Heuristic R0^2: squared distance from y0 to the dual mode plus d / (N + Gamma).
inline double default_initial_distance_sq(const DirichletModel& model, const DualPoint& y0) {
  const DualPoint mode = dirichlet_dual_mode(model);
  double s = 0.0;
  for (std::size_t i = 0; i < y0.dim(); ++i) s += (y0[i] - mode[i]) * (y0[i] - mode[i]);
  return s + static_cast<double>(model.dim()) / model.total();
}

// ---------------------------------------------------------------------------
// SGRLD with the expanded-mean parametrization.
//
// theta_l' = | theta_l + eps (c_l - theta_l) + sqrt(2 eps theta_l) xi_l |,
// c_l = n_l + alpha_l. Independent Gamma(c_l, 1) factors are stationary, so
// theta / sum(theta) follows the Dirichlet posterior.

inline void sgrld_update(const DirichletModel& model, std::span<double> theta, double eps,
                         std::span<const double> xi) {
  const auto c = model.shapes();
  for (std::size_t l = 0; l < theta.size(); ++l)
    theta[l] = std::abs(theta[l] + eps * (c[l] - theta[l]) + std::sqrt(2.0 * eps * theta[l]) * xi[l]);
}

inline std::vector<double> sgrld_step(const DirichletModel& model, std::span<const double> theta,
                                      double eps, std::span<const double> xi) {
  if (theta.size() != model.categories() || xi.size() != model.categories())
    throw std::invalid_argument("sgrld_step: expected d+1 coordinates");
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("sgrld_step: invalid step size");
  for (std::size_t l = 0; l < theta.size(); ++l) {
    if (!std::isfinite(theta[l]) || !std::isfinite(xi[l])) throw DomainError("sgrld_step: non-finite input");
    if (!(theta[l] > 0.0)) throw DomainError("sgrld_step: theta must be positive");
  }
  std::vector<double> out(theta.begin(), theta.end());
  sgrld_update(model, out, eps, xi);
  return out;
}

/// Normalized SGRLD sample theta / sum(theta).
inline SimplexPoint sgrld_sample(std::span<const double> theta) {
  const double s = std::accumulate(theta.begin(), theta.end(), 0.0);
  std::vector<double> p(theta.begin(), theta.end());
  for (double& v : p) v /= s;
  return SimplexPoint::from_full(std::move(p));
}

// ---------------------------------------------------------------------------
// Exact Dirichlet draws by Gamma normalization.

inline SimplexPoint sample_dirichlet_exact(const DirichletModel& model, RandomStream& rng) {
  std::vector<double> g(model.categories());
  double s = 0.0;
  for (std::size_t l = 0; l < g.size(); ++l) s += (g[l] = rng.gamma(model.shapes()[l]));
  for (double& v : g) v /= s;
  return SimplexPoint::from_full(std::move(g));
}

/// First coordinate only; avoids building a SimplexPoint for bulk histograms.
inline double sample_dirichlet_first(const DirichletModel& model, RandomStream& rng) {
  const double first = rng.gamma(model.shapes()[0]);
  double s = first;
  for (std::size_t l = 1; l < model.categories(); ++l) s += rng.gamma(model.shapes()[l]);
  return first / s;
}

// ---------------------------------------------------------------------------

/// exp(y) (exact) or max(0, 1 + y) (linearized), componentwise.
inline std::vector<double> exp_mode_transform(std::span<const double> y, ExpMode mode) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] = mode == ExpMode::exact ? std::exp(y[i]) : std::max(0.0, 1.0 + y[i]);
  return out;
}

// ---------------------------------------------------------------------------
// CIR process dX = a(b - X) dt + c sqrt(X) dB, the symmetric mirrored
// dynamics for h(x) = (2/c^2) x log x.

struct CirParams {
  double a;
  double b;
  double c;

  CirParams(double a_, double b_, double c_) : a(a_), b(b_), c(c_) {
    if (!(a > 0) || !(b > 0) || !(c > 0))
      throw std::invalid_argument("CirParams: a, b, c must be positive");
    if (2.0 * a * b < c * c) throw std::invalid_argument("CirParams: requires 2ab >= c^2");
  }

  double stationary_mean() const { return b; }
  double stationary_variance() const { return b * c * c / (2.0 * a); }
};

/// Euler-Maruyama step, reflected at zero.
inline double cir_smld_step(const CirParams& p, double x, double beta, double xi) {
  if (!(x >= 0.0)) throw DomainError("cir_smld_step: state must be non-negative");
  if (!(beta > 0.0)) throw std::invalid_argument("cir_smld_step: step size must be positive");
  return std::abs(x + beta * p.a * (p.b - x) + p.c * std::sqrt(x) * std::sqrt(beta) * xi);
}

}  // namespace mirrorlang
