#pragma once

// Experiment drivers. Each driver returns a ResultBundle holding its CSV
// files in memory plus run metadata; write_bundle puts them on disk.
//
// Chains are spread over worker threads by contiguous index ranges. Every
// chain draws from its own (seed, chain) streams and writes into its own
// result slot, so outputs do not depend on the thread count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "mirrorlang/config.hpp"
#include "mirrorlang/diagnostics.hpp"
#include "mirrorlang/mirror_core.hpp"
#include "mirrorlang/random.hpp"
#include "mirrorlang/samplers.hpp"
#include "mirrorlang/targets.hpp"

namespace mirrorlang {

inline constexpr const char* kVersion = "0.1.0";

struct ResultBundle {
  std::map<std::string, std::string> files;  // file name -> CSV contents
  json metadata;
  bool diverged = false;
};

/// Shortest round-trip representation of a double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string curve_csv(std::span<const CurvePoint> curve) {
  std::string out = "iter,tv\n";
  for (const auto& p : curve) out += std::to_string(p.iter) + "," + format_double(p.tv) + "\n";
  return out;
}

inline void write_bundle(const ResultBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : bundle.files) {
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  }
  std::ofstream meta(dir / "metadata.json");
  meta << bundle.metadata.dump(2) << "\n";
}

/// Runs body(begin, end) over contiguous slices of [0, count).
template <typename Body>
void parallel_ranges(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    body(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    workers.emplace_back([&, w, begin, end] {
      try {
        if (begin < end) body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Synthetic Dirichlet experiment.

/// First-coordinate draws from the exact posterior, one stream per set.
inline std::vector<double> oracle_first_coordinates(const DirichletModel& model, std::size_t count,
                                                    std::uint64_t seed, std::uint64_t set_index) {
  RandomStream rng(seed, set_index, StreamPurpose::oracle);
  std::vector<double> out(count);
  for (double& v : out) v = sample_dirichlet_first(model, rng);
  return out;
}

struct SyntheticCurve {
  std::vector<CurvePoint> curve;
  bool diverged = false;
};

/// First coordinate of grad h*(y) without materializing the full point.
inline double dual_first_coordinate(std::span<const double> y) {
  double shift = 0.0;
  for (double v : y) shift = std::max(shift, v);
  double z = std::exp(-shift);
  for (double v : y) z += std::exp(v - shift);
  return std::exp(y[0] - shift) / z;
}

/// Runs `trials` chains of the configured sampler with step schedule
/// `schedule` and returns the TV-to-oracle curve at log-spaced checkpoints.
inline SyntheticCurve synthetic_curve(const ExperimentConfig& cfg, const StepSchedule& schedule,
                                      const Histogram& oracle) {
  const DirichletModel& model = *cfg.model;
  const std::size_t d = model.dim();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  const auto checkpoints = log_checkpoints(cfg.iters, cfg.checkpoints);
  // samples[k * trials + chain]: first coordinate at checkpoint k
  std::vector<double> samples(checkpoints.size() * trials, 0.0);
  std::vector<char> chain_diverged(trials, 0);
  const std::optional<ObservationList> obs =
      cfg.sampler == SamplerKind::smld ? std::optional(ObservationList::from_counts(model)) : std::nullopt;

  auto run_chain = [&](std::size_t chain) {
    std::size_t next_cp = 0;
    auto record = [&](std::int64_t t, double x1) {
      while (next_cp < checkpoints.size() && checkpoints[next_cp] == t) {
        samples[next_cp * trials + chain] = x1;
        ++next_cp;
      }
    };
    if (cfg.sampler == SamplerKind::sgrld) {
      std::vector<double> theta(d + 1, 1.0);
      if (cfg.init == InitKind::standard) {
        theta.assign(model.shapes().begin(), model.shapes().end());
      } else if (cfg.init == InitKind::oracle) {
        RandomStream init(cfg.seed, chain, StreamPurpose::init);
        for (std::size_t l = 0; l <= d; ++l) theta[l] = init.gamma(model.shapes()[l]);
      }
      NoiseStream noise(cfg.seed, chain, d + 1);
      for (std::int64_t t = 1; t <= cfg.iters; ++t) {
        sgrld_update(model, theta, schedule.at(static_cast<std::size_t>(t - 1)), noise.next());
        double s = 0.0;
        for (double v : theta) s += v;
        const double x1 = theta[0] / s;
        if (!std::isfinite(x1)) {
          chain_diverged[chain] = 1;
          return;
        }
        record(t, x1);
      }
      return;
    }
    std::vector<double> y(d, 0.0), grad(d);
    if (cfg.init == InitKind::oracle) {
      RandomStream init(cfg.seed, chain, StreamPurpose::init);
      const DualPoint y0 = entropic_grad_h(sample_dirichlet_exact(model, init));
      std::copy(y0.coords().begin(), y0.coords().end(), y.begin());
    }
    NoiseStream noise(cfg.seed, chain, d);
    std::optional<BatchSampler> sampler;
    std::optional<RandomStream> batch_rng;
    std::vector<std::int64_t> tally(model.categories());
    if (obs) {
      sampler.emplace(obs->size());
      batch_rng.emplace(cfg.seed, chain, StreamPurpose::batch);
    }
    for (std::int64_t t = 1; t <= cfg.iters; ++t) {
      if (obs) {
        std::fill(tally.begin(), tally.end(), 0);
        for (std::size_t idx : sampler->draw(*cfg.batch_size, *batch_rng)) ++tally[obs->label(idx)];
        dirichlet_stochastic_grad_W_into(model, tally, *cfg.batch_size, y, grad, cfg.exp_mode);
      } else {
        dirichlet_grad_W_into(model, y, grad, cfg.exp_mode);
      }
      langevin_update(y, grad, schedule.at(static_cast<std::size_t>(t - 1)), noise.next());
      if (next_cp < checkpoints.size() && checkpoints[next_cp] == t) {
        const double x1 = dual_first_coordinate(y);
        if (!std::isfinite(x1)) {
          chain_diverged[chain] = 1;
          return;
        }
        record(t, x1);
      }
    }
    for (double v : y)
      if (!std::isfinite(v)) chain_diverged[chain] = 1;
  };

  parallel_ranges(trials, effective_threads(cfg), [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) run_chain(c);
  });

  SyntheticCurve result;
  for (char flag : chain_diverged)
    if (flag) result.diverged = true;
  if (result.diverged) return result;
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    const Histogram h = histogram_build(std::span<const double>(samples.data() + k * trials, trials), cfg.bins);
    result.curve.push_back({checkpoints[k], tv_distance(h, oracle)});
  }
  return result;
}

inline StepSchedule schedule_from(const StepsSpec& s) {
  return s.kind == StepsKind::sequence ? StepSchedule::sequence(s.values) : StepSchedule::constant(s.values.at(0));
}

namespace detail {

struct OracleReference {
  Histogram oracle;
  double null_tv;
};

inline OracleReference oracle_reference(const ExperimentConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.trials);
  const Histogram oracle = histogram_build(oracle_first_coordinates(*cfg.model, n, cfg.seed, 0), cfg.bins);
  const Histogram second = histogram_build(oracle_first_coordinates(*cfg.model, n, cfg.seed, 1), cfg.bins);
  return {oracle, tv_distance(oracle, second)};
}

inline json base_metadata(const ExperimentConfig& cfg) {
  return json{{"version", kVersion}, {"config", config_to_json(cfg)}};
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

inline ResultBundle run_synthetic_dirichlet(const ExperimentConfig& cfg) {
  detail::WallClock clock;
  const auto ref = detail::oracle_reference(cfg);
  const SyntheticCurve run = synthetic_curve(cfg, schedule_from(cfg.steps), ref.oracle);
  ResultBundle bundle;
  bundle.metadata = detail::base_metadata(cfg);
  bundle.metadata["null_tv"] = ref.null_tv;
  bundle.diverged = run.diverged;
  bundle.metadata["diverged"] = run.diverged;
  if (!run.diverged) {
    bundle.files["curve.csv"] = curve_csv(run.curve);
    bundle.metadata["final_tv"] = final_window_tv(run.curve);
    try {
      const RateFit fit = rate_slope(run.curve);
      bundle.metadata["slope"] = fit.slope;
      bundle.metadata["slope_window"] = {fit.window_begin, fit.window_end};
    } catch (const std::invalid_argument& e) {
      bundle.metadata["slope"] = nullptr;
      bundle.metadata["slope_error"] = e.what();
    }
  }
  bundle.metadata["wall_time_seconds"] = clock.seconds();
  return bundle;
}

struct GridSearchOutcome {
  ResultBundle bundle;
  GridResult result;
  double null_tv;
};

inline GridSearchOutcome run_grid_search_detailed(const ExperimentConfig& cfg) {
  detail::WallClock clock;
  const auto ref = detail::oracle_reference(cfg);
  auto runner = [&](double beta) {
    SyntheticCurve run = synthetic_curve(cfg, StepSchedule::constant(beta), ref.oracle);
    if (run.diverged) return std::vector<CurvePoint>{};
    return run.curve;
  };
  GridResult result = grid_search(runner, cfg.steps.values, std::min(cfg.keep, cfg.steps.values.size()));

  ResultBundle bundle;
  std::string ranking = "beta,final_tv,slope\n";
  for (const auto& e : result.ranked)
    ranking += format_double(e.beta) + "," + format_double(e.final_tv) + "," +
               (e.slope ? format_double(*e.slope) : std::string("nan")) + "\n";
  bundle.files["ranking.csv"] = ranking;
  json best = json::array();
  for (const auto& e : result.best()) {
    const std::string name = "curve_beta_" + format_double(e.beta) + ".csv";
    bundle.files[name] = curve_csv(e.curve);
    best.push_back({{"beta", e.beta}, {"final_tv", e.final_tv}, {"file", name}});
  }
  json diverged = json::array();
  for (const auto& e : result.diverged) diverged.push_back(e.beta);
  bundle.metadata = detail::base_metadata(cfg);
  bundle.metadata["null_tv"] = ref.null_tv;
  bundle.metadata["best"] = best;
  bundle.metadata["diverged_betas"] = diverged;
  bundle.metadata["wall_time_seconds"] = clock.seconds();
  return {std::move(bundle), std::move(result), ref.null_tv};
}

inline ResultBundle run_grid_search(const ExperimentConfig& cfg) { return run_grid_search_detailed(cfg).bundle; }

// ---------------------------------------------------------------------------
// CIR demo.

struct CirSummary {
  double beta;
  double mean;
  double variance;
};

/// Pooled post-burn-in mean and variance of `chains` CIR chains started at b.
inline CirSummary cir_long_run(const CirParams& params, double beta, std::int64_t steps, std::size_t chains,
                               double burn_in, std::uint64_t seed, std::size_t threads) {
  const auto skip = static_cast<std::int64_t>(burn_in * static_cast<double>(steps));
  std::vector<double> sums(chains), sq(chains);
  std::vector<std::int64_t> counts(chains);
  parallel_ranges(chains, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t ch = begin; ch < end; ++ch) {
      RandomStream noise(seed, ch, StreamPurpose::noise);
      double x = params.b, s = 0.0, s2 = 0.0;
      for (std::int64_t t = 0; t < steps; ++t) {
        x = cir_smld_step(params, x, beta, noise.gaussian());
        if (t >= skip) {
          s += x;
          s2 += x * x;
        }
      }
      sums[ch] = s;
      sq[ch] = s2;
      counts[ch] = steps - skip;
    }
  });
  double s = 0, s2 = 0, n = 0;
  for (std::size_t ch = 0; ch < chains; ++ch) {
    s += sums[ch];
    s2 += sq[ch];
    n += static_cast<double>(counts[ch]);
  }
  const double mean = s / n;
  return {beta, mean, s2 / n - mean * mean};
}

inline ResultBundle run_cir_demo(const ExperimentConfig& cfg) {
  detail::WallClock clock;
  const CirParams& p = *cfg.cir;
  ResultBundle bundle;
  std::string table = "beta,mean,var\n";
  json rows = json::array();
  for (double beta : cfg.steps.values) {
    const CirSummary s = cir_long_run(p, beta, cfg.iters, static_cast<std::size_t>(cfg.trials), cfg.burn_in,
                                      cfg.seed, effective_threads(cfg));
    table += format_double(beta) + "," + format_double(s.mean) + "," + format_double(s.variance) + "\n";
    rows.push_back({{"beta", beta},
                    {"mean", s.mean},
                    {"var", s.variance},
                    {"mean_rel_error", std::abs(s.mean - p.stationary_mean()) / p.stationary_mean()},
                    {"var_rel_error", std::abs(s.variance - p.stationary_variance()) / p.stationary_variance()}});
  }
  bundle.files["cir.csv"] = table;
  bundle.metadata = detail::base_metadata(cfg);
  bundle.metadata["target_mean"] = p.stationary_mean();
  bundle.metadata["target_var"] = p.stationary_variance();
  bundle.metadata["rows"] = rows;
  bundle.metadata["wall_time_seconds"] = clock.seconds();
  return bundle;
}

// ---------------------------------------------------------------------------
// Burg demo.

struct BurgRow {
  double y;
  double closed;
  double finite_difference;
  int sign;
};

/// Central second difference of `w` at y with step h = 1e-4 |y|.
template <typename F>
double second_difference(F&& w, double y) {
  const double h = 1e-4 * std::abs(y);
  return (w(y + h) - 2.0 * w(y) + w(y - h)) / (h * h);
}

template <typename F>
std::vector<BurgRow> burg_table(F&& calculus, double lo, double hi, std::size_t points) {
  std::vector<BurgRow> rows;
  for (std::size_t i = 0; i < points; ++i) {
    const double y = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    const double closed = calculus(y).second;
    const double fd = second_difference([&](double v) { return calculus(v).value; }, y);
    rows.push_back({y, closed, fd, closed > 0 ? 1 : (closed < 0 ? -1 : 0)});
  }
  return rows;
}

/// Bisection on the closed-form W'' inside the first sign change of `rows`.
template <typename F>
std::optional<std::pair<double, double>> bracket_sign_change(F&& calculus, const std::vector<BurgRow>& rows,
                                                             double tol = 1e-12) {
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i].sign * rows[i + 1].sign < 0) {
      double lo = rows[i].y, hi = rows[i + 1].y;
      const int lo_sign = rows[i].sign;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double v = calculus(mid).second;
        if (v == 0.0) return std::pair{mid, mid};
        if ((v > 0 ? 1 : -1) == lo_sign) lo = mid;
        else hi = mid;
      }
      return std::pair{lo, hi};
    }
  }
  return std::nullopt;
}

inline std::string burg_csv(const std::vector<BurgRow>& rows) {
  std::string out = "y,w2_closed,w2_fd,sign\n";
  for (const auto& r : rows)
    out += format_double(r.y) + "," + format_double(r.closed) + "," + format_double(r.finite_difference) + "," +
           std::to_string(r.sign) + "\n";
  return out;
}

inline constexpr double kBurgGridLo = -10.0;
inline constexpr double kBurgGridHi = -0.05;
inline constexpr std::size_t kBurgGridPoints = 100;

inline ResultBundle run_burg_demo(const ExperimentConfig& cfg) {
  detail::WallClock clock;
  ResultBundle bundle;
  bundle.metadata = detail::base_metadata(cfg);
  auto describe = [&](const std::string& name, const std::vector<BurgRow>& rows, auto&& calculus) {
    std::size_t agree = 0;
    for (const auto& r : rows)
      if ((r.finite_difference > 0 ? 1 : (r.finite_difference < 0 ? -1 : 0)) == r.sign) ++agree;
    json m{{"grid_points", rows.size()}, {"fd_sign_agreement", agree}};
    if (auto b = bracket_sign_change(calculus, rows)) m["sign_change"] = {b->first, b->second};
    else m["sign_change"] = nullptr;
    bundle.metadata[name] = m;
  };
  auto exponential = [](double y) { return burg_calculus(y); };
  auto gaussian = [c = cfg.gaussian_c](double y) { return burg_gaussian_calculus(y, c); };
  const auto exp_rows = burg_table(exponential, kBurgGridLo, kBurgGridHi, kBurgGridPoints);
  const auto gauss_rows = burg_table(gaussian, kBurgGridLo, kBurgGridHi, kBurgGridPoints);
  bundle.files["burg_exponential.csv"] = burg_csv(exp_rows);
  bundle.files["burg_gaussian.csv"] = burg_csv(gauss_rows);
  describe("exponential", exp_rows, exponential);
  describe("gaussian", gauss_rows, gaussian);
  bundle.metadata["gaussian"]["expected_sign_change"] = -std::sqrt(3.0 * cfg.gaussian_c);
  bundle.metadata["exponential"]["expected_sign_change"] = -1.0;
  bundle.metadata["wall_time_seconds"] = clock.seconds();
  return bundle;
}

// ---------------------------------------------------------------------------
// Product-simplex demo: MLD under the block entropic map, TV of each block's
// first coordinate against exact draws.

inline ResultBundle run_product_simplex(const ExperimentConfig& cfg) {
  detail::WallClock clock;
  const ProductSimplexTarget target(cfg.blocks);
  const std::size_t dim = target.dim();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  const auto checkpoints = log_checkpoints(cfg.iters, cfg.checkpoints);
  const std::size_t nblocks = cfg.blocks.size();
  const StepSchedule schedule = schedule_from(cfg.steps);
  // samples[(k * nblocks + block) * trials + chain]
  std::vector<double> samples(checkpoints.size() * nblocks * trials);
  std::vector<char> chain_diverged(trials, 0);

  parallel_ranges(trials, effective_threads(cfg), [&](std::size_t begin, std::size_t end) {
    std::vector<double> y(dim), grad(dim);
    for (std::size_t chain = begin; chain < end; ++chain) {
      std::fill(y.begin(), y.end(), 0.0);
      NoiseStream noise(cfg.seed, chain, dim);
      std::size_t next_cp = 0;
      for (std::int64_t t = 1; t <= cfg.iters && !chain_diverged[chain]; ++t) {
        target.gradient_into(y, grad, cfg.exp_mode);
        langevin_update(y, grad, schedule.at(static_cast<std::size_t>(t - 1)), noise.next());
        while (next_cp < checkpoints.size() && checkpoints[next_cp] == t) {
          std::size_t off = 0;
          for (std::size_t b = 0; b < nblocks; ++b) {
            const double x1 = dual_first_coordinate(std::span<const double>(y).subspan(off, cfg.blocks[b].dim()));
            if (!std::isfinite(x1)) chain_diverged[chain] = 1;
            samples[(next_cp * nblocks + b) * trials + chain] = x1;
            off += cfg.blocks[b].dim();
          }
          ++next_cp;
        }
      }
    }
  });

  ResultBundle bundle;
  bundle.metadata = detail::base_metadata(cfg);
  for (char f : chain_diverged)
    if (f) bundle.diverged = true;
  bundle.metadata["diverged"] = bundle.diverged;
  if (!bundle.diverged) {
    json finals = json::array();
    for (std::size_t b = 0; b < nblocks; ++b) {
      const Histogram oracle =
          histogram_build(oracle_first_coordinates(cfg.blocks[b], trials, cfg.seed, 2 * b), cfg.bins);
      std::vector<CurvePoint> curve;
      for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        const Histogram h = histogram_build(
            std::span<const double>(samples.data() + (k * nblocks + b) * trials, trials), cfg.bins);
        curve.push_back({checkpoints[k], tv_distance(h, oracle)});
      }
      const Histogram second =
          histogram_build(oracle_first_coordinates(cfg.blocks[b], trials, cfg.seed, 2 * b + 1), cfg.bins);
      finals.push_back({{"block", b}, {"final_tv", final_window_tv(curve)}, {"null_tv", tv_distance(oracle, second)}});
      bundle.files["product_block" + std::to_string(b) + ".csv"] = curve_csv(curve);
    }
    bundle.metadata["blocks"] = finals;
  }
  bundle.metadata["wall_time_seconds"] = clock.seconds();
  return bundle;
}

// ---------------------------------------------------------------------------

inline ResultBundle run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::synthetic_dirichlet: return run_synthetic_dirichlet(cfg);
    case Experiment::grid_search: return run_grid_search(cfg);
    case Experiment::cir_demo: return run_cir_demo(cfg);
    case Experiment::burg_demo: return run_burg_demo(cfg);
    case Experiment::product_simplex: return run_product_simplex(cfg);
  }
  throw std::logic_error("unknown experiment");
}

}  // namespace mirrorlang
