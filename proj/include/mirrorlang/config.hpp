#pragma once

// Experiment configuration: JSON files merged with command-line overrides,
// validated into an ExperimentConfig, and echoed back as canonical JSON.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mirrorlang/samplers.hpp"
#include "mirrorlang/targets.hpp"

namespace mirrorlang {

using json = nlohmann::json;

/// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Experiment { synthetic_dirichlet, cir_demo, burg_demo, product_simplex, grid_search };
enum class SamplerKind { mld, smld, sgrld };
/// Chain starting points. `standard`: y = 0 for dual samplers and
/// theta = n + alpha for SGRLD. `uniform`: y = 0 and theta = 1, the same
/// uniform primal start for every sampler. `oracle`: exact posterior draws.
enum class InitKind { standard, uniform, oracle };
enum class StepsKind { constant, sequence, grid };

struct StepsSpec {
  StepsKind kind = StepsKind::constant;
  std::vector<double> values;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::synthetic_dirichlet;
  std::optional<DirichletModel> model;      // synthetic-dirichlet, grid-search
  std::optional<CirParams> cir;             // cir-demo
  std::vector<DirichletModel> blocks;       // product-simplex
  double gaussian_c = 1.0 / 3.0;            // burg-demo
  SamplerKind sampler = SamplerKind::mld;
  std::int64_t trials = 100000;
  std::int64_t iters = 1000;
  std::optional<std::size_t> batch_size;
  StepsSpec steps;
  std::uint64_t seed = 0;
  std::size_t bins = 50;
  ExpMode exp_mode = ExpMode::exact;
  std::string output_dir = "out";
  std::size_t keep = 3;
  std::size_t checkpoints = 30;
  InitKind init = InitKind::standard;
  std::size_t threads = 0;  // 0: hardware concurrency
  double burn_in = 0.1;     // cir-demo
};

// ---------------------------------------------------------------------------
// Name tables.

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::synthetic_dirichlet: return "synthetic-dirichlet";
    case Experiment::cir_demo: return "cir-demo";
    case Experiment::burg_demo: return "burg-demo";
    case Experiment::product_simplex: return "product-simplex";
    case Experiment::grid_search: return "grid-search";
  }
  return "?";
}
inline const char* to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::mld: return "mld";
    case SamplerKind::smld: return "smld";
    case SamplerKind::sgrld: return "sgrld";
  }
  return "?";
}
inline const char* to_string(ExpMode m) { return m == ExpMode::exact ? "exact" : "linearized"; }
inline const char* to_string(InitKind i) {
  switch (i) {
    case InitKind::standard: return "standard";
    case InitKind::uniform: return "uniform";
    case InitKind::oracle: return "oracle";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  for (auto e : {Experiment::synthetic_dirichlet, Experiment::cir_demo, Experiment::burg_demo,
                 Experiment::product_simplex, Experiment::grid_search})
    if (s == to_string(e)) return e;
  throw ConfigError("experiment", "unknown experiment '" + s + "'");
}
inline SamplerKind parse_sampler(const std::string& s) {
  for (auto k : {SamplerKind::mld, SamplerKind::smld, SamplerKind::sgrld})
    if (s == to_string(k)) return k;
  throw ConfigError("sampler", "expected mld, smld or sgrld, got '" + s + "'");
}

/// The synthetic posterior: 11 categories, counts (10000, 10, 10, 0, ..., 0),
/// all alphas 0.1.
inline DirichletModel default_synthetic_model() {
  std::vector<std::int64_t> counts(11, 0);
  counts[0] = 10000;
  counts[1] = 10;
  counts[2] = 10;
  return DirichletModel(std::move(counts), std::vector<double>(11, 0.1));
}

inline std::vector<DirichletModel> default_product_blocks() {
  return {DirichletModel({5, 3, 2}, {1.0, 1.0, 1.0}), DirichletModel({0, 4, 0, 1}, {0.5, 0.5, 0.5, 0.5})};
}

inline std::vector<double> default_step_grid(Experiment e, SamplerKind s) {
  if (e == Experiment::cir_demo) return {1e-2, 1e-3, 1e-4};
  if (s == SamplerKind::sgrld) return {0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
  return {1e-4, 5e-5, 2e-5, 1e-5};
}

inline double default_step(Experiment e, SamplerKind s) {
  if (e == Experiment::cir_demo) return 1e-3;
  if (e == Experiment::product_simplex) return 1e-3;
  return s == SamplerKind::sgrld ? 0.05 : 5e-5;
}

inline std::size_t default_keep(SamplerKind s) { return s == SamplerKind::sgrld ? 5 : 3; }

// ---------------------------------------------------------------------------
// JSON conversion.

namespace detail {

template <typename T>
T get_field(const json& j, const std::string& key, const char* expected) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, std::string("expected ") + expected);
  }
}

inline DirichletModel parse_dirichlet(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected an object with 'counts' and 'alphas'");
  for (const auto& [k, v] : j.items())
    if (k != "counts" && k != "alphas") throw ConfigError(field + "." + k, "unknown key");
  if (!j.contains("counts") || !j.contains("alphas"))
    throw ConfigError(field, "requires both 'counts' and 'alphas'");
  std::vector<std::int64_t> counts;
  std::vector<double> alphas;
  try {
    counts = j.at("counts").get<std::vector<std::int64_t>>();
  } catch (const json::exception&) {
    throw ConfigError(field + ".counts", "expected an array of integers");
  }
  try {
    alphas = j.at("alphas").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError(field + ".alphas", "expected an array of numbers");
  }
  try {
    return DirichletModel(std::move(counts), std::move(alphas));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

inline json dirichlet_to_json(const DirichletModel& m) {
  return json{{"counts", std::vector<std::int64_t>(m.counts().begin(), m.counts().end())},
              {"alphas", std::vector<double>(m.alphas().begin(), m.alphas().end())}};
}

inline StepsSpec parse_steps(const json& j) {
  StepsSpec s;
  if (j.is_number()) {
    s.kind = StepsKind::constant;
    s.values = {j.get<double>()};
  } else if (j.is_object() && j.size() == 1) {
    const auto& [key, value] = *j.items().begin();
    try {
      if (key == "constant") {
        s.kind = StepsKind::constant;
        s.values = {value.get<double>()};
      } else if (key == "sequence") {
        s.kind = StepsKind::sequence;
        s.values = value.get<std::vector<double>>();
      } else if (key == "grid") {
        s.kind = StepsKind::grid;
        s.values = value.get<std::vector<double>>();
      } else {
        throw ConfigError("steps." + key, "unknown key; expected constant, sequence or grid");
      }
    } catch (const json::exception&) {
      throw ConfigError("steps." + key, "expected a number or an array of numbers");
    }
  } else {
    throw ConfigError("steps", "expected a number or one of {constant, sequence, grid}");
  }
  if (s.values.empty()) throw ConfigError("steps", "no step sizes given");
  for (double v : s.values)
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("steps", "step sizes must be positive");
  return s;
}

inline json steps_to_json(const StepsSpec& s) {
  switch (s.kind) {
    case StepsKind::constant: return json{{"constant", s.values.at(0)}};
    case StepsKind::sequence: return json{{"sequence", s.values}};
    case StepsKind::grid: return json{{"grid", s.values}};
  }
  return {};
}

inline std::int64_t positive_int(const json& j, const std::string& key) {
  const auto v = get_field<std::int64_t>(j, key, "an integer");
  if (v < 1) throw ConfigError(key, "must be >= 1, got " + std::to_string(v));
  return v;
}

}  // namespace detail

/// Validates a merged JSON document and fills in experiment-specific defaults.
inline ExperimentConfig config_from_json(const json& j) {
  static const std::set<std::string> known{"experiment", "model",       "sampler", "trials",    "iters",
                                           "batch_size", "steps",       "seed",    "bins",      "exp_mode",
                                           "output_dir", "keep",        "checkpoints", "init", "threads",
                                           "burn_in"};
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError(k, "unknown key");
  if (!j.contains("experiment")) throw ConfigError("experiment", "missing");

  ExperimentConfig c;
  c.experiment = parse_experiment(detail::get_field<std::string>(j, "experiment", "a string"));
  const bool dirichlet_experiment =
      c.experiment == Experiment::synthetic_dirichlet || c.experiment == Experiment::grid_search;

  if (j.contains("sampler")) c.sampler = parse_sampler(detail::get_field<std::string>(j, "sampler", "a string"));

  // model
  const json model = j.contains("model") ? j.at("model") : json();
  switch (c.experiment) {
    case Experiment::synthetic_dirichlet:
    case Experiment::grid_search:
      c.model = model.is_null() ? default_synthetic_model() : detail::parse_dirichlet(model, "model");
      break;
    case Experiment::cir_demo: {
      if (model.is_null()) {
        c.cir = CirParams(2.0, 1.0, 1.0);
      } else {
        if (!model.is_object()) throw ConfigError("model", "expected {a, b, c}");
        for (const auto& [k, v] : model.items())
          if (k != "a" && k != "b" && k != "c") throw ConfigError("model." + k, "unknown key");
        try {
          c.cir = CirParams(detail::get_field<double>(model, "a", "a number"),
                            detail::get_field<double>(model, "b", "a number"),
                            detail::get_field<double>(model, "c", "a number"));
        } catch (const std::invalid_argument& e) {
          throw ConfigError("model", e.what());
        }
      }
      break;
    }
    case Experiment::burg_demo:
      if (!model.is_null()) {
        if (!model.is_object()) throw ConfigError("model", "expected {gaussian_c}");
        for (const auto& [k, v] : model.items())
          if (k != "gaussian_c") throw ConfigError("model." + k, "unknown key");
        c.gaussian_c = detail::get_field<double>(model, "gaussian_c", "a number");
        if (!(c.gaussian_c > 0.0)) throw ConfigError("model.gaussian_c", "must be positive");
      }
      break;
    case Experiment::product_simplex:
      if (model.is_null()) {
        c.blocks = default_product_blocks();
      } else {
        if (!model.is_object() || !model.contains("blocks") || !model.at("blocks").is_array() || model.size() != 1)
          throw ConfigError("model", "expected {\"blocks\": [...]}");
        const auto& blocks = model.at("blocks");
        if (blocks.empty()) throw ConfigError("model.blocks", "empty block list");
        for (std::size_t i = 0; i < blocks.size(); ++i)
          c.blocks.push_back(detail::parse_dirichlet(blocks[i], "model.blocks[" + std::to_string(i) + "]"));
      }
      break;
  }

  if (c.experiment == Experiment::cir_demo) {
    c.trials = 1;
    c.iters = 1000000;
  } else if (c.experiment == Experiment::product_simplex) {
    c.trials = 20000;
  }
  if (j.contains("trials")) c.trials = detail::positive_int(j, "trials");
  if (j.contains("iters")) c.iters = detail::positive_int(j, "iters");
  if (j.contains("seed")) c.seed = detail::get_field<std::uint64_t>(j, "seed", "a non-negative integer");
  if (j.contains("bins")) {
    c.bins = static_cast<std::size_t>(detail::positive_int(j, "bins"));
    if (c.bins < 2) throw ConfigError("bins", "must be >= 2");
  }
  if (j.contains("checkpoints")) c.checkpoints = static_cast<std::size_t>(detail::positive_int(j, "checkpoints"));
  if (j.contains("threads")) {
    const auto t = detail::get_field<std::int64_t>(j, "threads", "an integer");
    if (t < 0) throw ConfigError("threads", "must be >= 0");
    c.threads = static_cast<std::size_t>(t);
  }
  if (j.contains("exp_mode")) {
    const auto m = detail::get_field<std::string>(j, "exp_mode", "a string");
    if (m == "exact") c.exp_mode = ExpMode::exact;
    else if (m == "linearized") c.exp_mode = ExpMode::linearized;
    else throw ConfigError("exp_mode", "expected exact or linearized, got '" + m + "'");
  }
  if (j.contains("init")) {
    const auto m = detail::get_field<std::string>(j, "init", "a string");
    if (m == "standard") c.init = InitKind::standard;
    else if (m == "uniform") c.init = InitKind::uniform;
    else if (m == "oracle") c.init = InitKind::oracle;
    else throw ConfigError("init", "expected standard, uniform or oracle, got '" + m + "'");
  }
  if (j.contains("output_dir")) c.output_dir = detail::get_field<std::string>(j, "output_dir", "a string");
  if (j.contains("burn_in")) {
    c.burn_in = detail::get_field<double>(j, "burn_in", "a number");
    if (!(c.burn_in >= 0.0 && c.burn_in < 1.0)) throw ConfigError("burn_in", "must lie in [0, 1)");
  }

  // steps
  if (j.contains("steps")) {
    c.steps = detail::parse_steps(j.at("steps"));
  } else if (c.experiment == Experiment::grid_search || c.experiment == Experiment::cir_demo) {
    c.steps = {StepsKind::grid, default_step_grid(c.experiment, c.sampler)};
  } else {
    c.steps = {StepsKind::constant, {default_step(c.experiment, c.sampler)}};
  }
  if (c.steps.kind == StepsKind::sequence && static_cast<std::int64_t>(c.steps.values.size()) < c.iters)
    throw ConfigError("steps.sequence", "needs at least `iters` step sizes");
  if (c.steps.kind == StepsKind::grid && c.experiment != Experiment::grid_search &&
      c.experiment != Experiment::cir_demo)
    throw ConfigError("steps.grid", "a step grid is only valid for grid-search and cir-demo");
  if (c.experiment == Experiment::grid_search && c.steps.kind != StepsKind::grid)
    c.steps.kind = StepsKind::grid;

  // batch size
  if (j.contains("batch_size") && !j.at("batch_size").is_null())
    c.batch_size = static_cast<std::size_t>(detail::positive_int(j, "batch_size"));
  if (dirichlet_experiment && c.sampler == SamplerKind::smld) {
    if (!c.batch_size) throw ConfigError("batch_size", "required when sampler is smld");
    if (static_cast<std::int64_t>(*c.batch_size) > c.model->num_observations())
      throw ConfigError("batch_size", "exceeds the number of observations N = " +
                                          std::to_string(c.model->num_observations()));
  }

  c.keep = default_keep(c.sampler);
  if (j.contains("keep")) c.keep = static_cast<std::size_t>(detail::positive_int(j, "keep"));
  if (c.experiment == Experiment::grid_search) c.keep = std::min(c.keep, c.steps.values.size());
  return c;
}

/// Canonical JSON echo; feeding it back to config_from_json reproduces `c`.
inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  switch (c.experiment) {
    case Experiment::synthetic_dirichlet:
    case Experiment::grid_search: j["model"] = detail::dirichlet_to_json(*c.model); break;
    case Experiment::cir_demo: j["model"] = json{{"a", c.cir->a}, {"b", c.cir->b}, {"c", c.cir->c}}; break;
    case Experiment::burg_demo: j["model"] = json{{"gaussian_c", c.gaussian_c}}; break;
    case Experiment::product_simplex: {
      json blocks = json::array();
      for (const auto& b : c.blocks) blocks.push_back(detail::dirichlet_to_json(b));
      j["model"] = json{{"blocks", blocks}};
      break;
    }
  }
  j["sampler"] = to_string(c.sampler);
  j["trials"] = c.trials;
  j["iters"] = c.iters;
  j["batch_size"] = c.batch_size ? json(*c.batch_size) : json(nullptr);
  j["steps"] = detail::steps_to_json(c.steps);
  j["seed"] = c.seed;
  j["bins"] = c.bins;
  j["exp_mode"] = to_string(c.exp_mode);
  j["output_dir"] = c.output_dir;
  j["keep"] = c.keep;
  j["checkpoints"] = c.checkpoints;
  j["init"] = to_string(c.init);
  j["threads"] = c.threads;
  j["burn_in"] = c.burn_in;
  return j;
}

/// Command-line overrides; every set field replaces the file's value.
struct ConfigOverrides {
  std::optional<std::string> experiment;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> trials;
  std::optional<std::int64_t> iters;
  std::optional<std::int64_t> batch_size;
  std::optional<double> beta;
  std::optional<std::vector<double>> beta_grid;
  std::optional<std::int64_t> bins;
  std::optional<std::string> sampler;
  std::optional<std::string> exp_mode;
  std::optional<std::string> output_dir;
  std::optional<std::int64_t> threads;
};

inline json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
}

/// Reads the optional config file, applies overrides (flags win), validates.
inline ExperimentConfig parse_config(const std::optional<std::string>& path, const ConfigOverrides& o) {
  json j = path ? load_config_file(*path) : json::object();
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  if (o.experiment) {
    if (j.contains("experiment") && j["experiment"] != *o.experiment)
      throw ConfigError("experiment", "command line says '" + *o.experiment + "' but the config file says '" +
                                          j["experiment"].dump() + "'");
    j["experiment"] = *o.experiment;
  }
  if (o.seed) j["seed"] = *o.seed;
  if (o.trials) j["trials"] = *o.trials;
  if (o.iters) j["iters"] = *o.iters;
  if (o.batch_size) j["batch_size"] = *o.batch_size;
  if (o.beta && o.beta_grid) throw ConfigError("steps", "--beta and --beta-grid are mutually exclusive");
  if (o.beta) j["steps"] = json{{"constant", *o.beta}};
  if (o.beta_grid) j["steps"] = json{{"grid", *o.beta_grid}};
  if (o.bins) j["bins"] = *o.bins;
  if (o.sampler) j["sampler"] = *o.sampler;
  if (o.exp_mode) j["exp_mode"] = *o.exp_mode;
  if (o.output_dir) j["output_dir"] = *o.output_dir;
  if (o.threads) j["threads"] = *o.threads;
  return config_from_json(j);
}

inline std::size_t effective_threads(const ExperimentConfig& c) {
  if (c.threads > 0) return c.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace mirrorlang
