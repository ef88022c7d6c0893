#pragma once

// Experiment configuration, trial execution and CSV output for the CLI.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "specgrad/problems.hpp"
#include "specgrad/saddle.hpp"

namespace specgrad {

inline constexpr const char* kConfigSchema = "specgrad.experiment/1";

/// A malformed configuration; `field` names the offending key when known.
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : InvalidInput(field.empty() ? what : "field '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  std::string label;  // the CSV "problem" column; defaults to the problem kind
  ProblemSpec problem;
  std::vector<Index> dims{100};
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> iterations;  // default per generator
  std::optional<double> eta;              // default per generator
  std::optional<Index> rank;              // truncation rank; default per generator
  ProjectionMode mode = ProjectionMode::CertifiedFallback;
  std::optional<std::size_t> gap_every;   // default: 1 for n <= 200, else 10
  std::string init = "warm";              // warm | scaled_identity
  std::string output;
  std::size_t jobs = 1;
};

namespace detail {

template <class T>
T config_get(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

inline std::uint64_t parse_seed_env(const char* text) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text, &end, 10);
  if (end == text || *end != '\0') throw ConfigError("SPECGRAD_SEED", "not an unsigned integer: " + std::string(text));
  return static_cast<std::uint64_t>(v);
}

}  // namespace detail

/// Parses and validates a configuration object. Unknown keys are errors.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  static const std::set<std::string> known = {"schema", "label", "problem", "n",    "r",         "snr",
                                              "noise",  "lambda", "m",      "seed", "trials",    "T",
                                              "eta",    "rank",   "mode",   "gap_every", "init", "output",
                                              "jobs",   "snr_convention"};
  if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ConfigError(item.key(), "unknown key");
  }
  if (!j.contains("schema")) throw ConfigError("schema", "missing (expected \"" + std::string(kConfigSchema) + "\")");
  if (detail::config_get<std::string>(j, "schema") != kConfigSchema)
    throw ConfigError("schema", "unsupported schema (expected \"" + std::string(kConfigSchema) + "\")");
  if (!j.contains("problem")) throw ConfigError("problem", "missing");

  ExperimentConfig c;
  try {
    c.problem.kind = parse_problem_kind(detail::config_get<std::string>(j, "problem"));
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError("problem", e.what());
  }
  c.label = j.contains("label") ? detail::config_get<std::string>(j, "label") : to_string(c.problem.kind);

  if (j.contains("n")) {
    const auto& nj = j.at("n");
    c.dims = nj.is_array() ? detail::config_get<std::vector<Index>>(j, "n")
                           : std::vector<Index>{detail::config_get<Index>(j, "n")};
  }
  if (c.dims.empty()) throw ConfigError("n", "must list at least one dimension");
  for (Index n : c.dims)
    if (n < 2) throw ConfigError("n", "dimensions must be at least 2");

  if (j.contains("r")) c.problem.r = detail::config_get<Index>(j, "r");
  if (j.contains("snr")) c.problem.snr = detail::config_get<double>(j, "snr");
  if (j.contains("noise")) {
    try {
      c.problem.noise = parse_noise_kind(detail::config_get<std::string>(j, "noise"));
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidInput& e) {
      throw ConfigError("noise", e.what());
    }
  }
  if (j.contains("snr_convention")) {
    try {
      c.problem.snr_convention = parse_snr_convention(detail::config_get<std::string>(j, "snr_convention"));
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidInput& e) {
      throw ConfigError("snr_convention", e.what());
    }
  }
  if (j.contains("lambda")) c.problem.lambda = detail::config_get<double>(j, "lambda");
  if (j.contains("m")) c.problem.m = detail::config_get<Index>(j, "m");
  if (j.contains("seed")) c.seed = detail::config_get<std::uint64_t>(j, "seed");
  if (j.contains("trials")) c.trials = detail::config_get<std::size_t>(j, "trials");
  if (j.contains("T")) c.iterations = detail::config_get<std::size_t>(j, "T");
  if (j.contains("eta")) c.eta = detail::config_get<double>(j, "eta");
  if (j.contains("rank")) c.rank = detail::config_get<Index>(j, "rank");
  if (j.contains("mode")) {
    try {
      c.mode = parse_projection_mode(detail::config_get<std::string>(j, "mode"));
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidInput& e) {
      throw ConfigError("mode", e.what());
    }
  }
  if (j.contains("gap_every")) c.gap_every = detail::config_get<std::size_t>(j, "gap_every");
  if (j.contains("init")) c.init = detail::config_get<std::string>(j, "init");
  if (j.contains("output")) c.output = detail::config_get<std::string>(j, "output");
  if (j.contains("jobs")) c.jobs = detail::config_get<std::size_t>(j, "jobs");

  if (c.trials < 1) throw ConfigError("trials", "must be at least 1");
  if (c.iterations && *c.iterations < 1) throw ConfigError("T", "must be at least 1");
  if (c.eta && !(*c.eta > 0.0 && std::isfinite(*c.eta))) throw ConfigError("eta", "must be positive");
  if (c.rank && *c.rank < 1) throw ConfigError("rank", "must be positive");
  if (c.problem.r < 1) throw ConfigError("r", "must be positive");
  if (!(c.problem.snr > 0.0)) throw ConfigError("snr", "must be positive");
  if (c.problem.lambda && !(*c.problem.lambda >= 0.0)) throw ConfigError("lambda", "must be non-negative");
  if (c.problem.m < 0) throw ConfigError("m", "must be non-negative");
  if (c.init != "warm" && c.init != "scaled_identity")
    throw ConfigError("init", "expected warm | scaled_identity");
  if (c.jobs < 1) throw ConfigError("jobs", "must be at least 1");
  for (Index n : c.dims) {
    if ((c.problem.kind == ProblemKind::LowRankSparse || c.problem.kind == ProblemKind::RobustPca) &&
        c.problem.r >= n)
      throw ConfigError("r", "must be smaller than every n");
    if (!c.problem.lambda) {
      ProblemSpec probe = c.problem;
      probe.n = n;
      if (!table_lambda(probe))
        throw ConfigError("lambda", "no default for n=" + std::to_string(n) + "; set it explicitly");
    }
  }
  return c;
}

/// Reads a configuration file; JSON syntax errors carry line and column.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["schema"] = kConfigSchema;
  j["label"] = c.label;
  j["problem"] = to_string(c.problem.kind);
  j["n"] = c.dims;
  j["r"] = c.problem.r;
  j["snr"] = c.problem.snr;
  j["noise"] = to_string(c.problem.noise);
  j["snr_convention"] = to_string(c.problem.snr_convention);
  if (c.problem.lambda) j["lambda"] = *c.problem.lambda;
  if (c.problem.m > 0) j["m"] = c.problem.m;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  if (c.iterations) j["T"] = *c.iterations;
  if (c.eta) j["eta"] = *c.eta;
  if (c.rank) j["rank"] = *c.rank;
  j["mode"] = to_string(c.mode);
  if (c.gap_every) j["gap_every"] = *c.gap_every;
  j["init"] = c.init;
  if (!c.output.empty()) j["output"] = c.output;
  j["jobs"] = c.jobs;
  return j;
}

/// Applies SPECGRAD_SEED, if set, as the base seed.
inline void apply_seed_override(ExperimentConfig& c) {
  if (const char* env = std::getenv("SPECGRAD_SEED")) c.seed = detail::parse_seed_env(env);
}

struct ResultRow {
  std::string run_id;
  std::string problem;
  Index n = 0;
  Index r = 0;
  double lambda = 0.0;
  double eta = 0.0;
  double iterations = 0.0;  // T (fractional only never; kept double for mean rows)
  std::optional<std::uint64_t> seed;  // empty on mean rows
  double init_error = 0.0;
  double recovery_error = 0.0;
  double dual_gap = 0.0;
  double comp_gap_delta_r = 0.0;
  double certificate_violations = 0.0;
  double fallbacks = 0.0;
  double measured_snr = 0.0;
  double wallclock_ms = 0.0;
  double constraint_residual = std::numeric_limits<double>::quiet_NaN();

  std::size_t trial = 0;
  bool is_mean = false;
};

inline constexpr const char* kCsvHeader =
    "run_id,problem,n,r,lambda,eta,T,seed,init_error,recovery_error,dual_gap,comp_gap_delta_r,"
    "certificate_violations,fallbacks,measured_snr,wallclock_ms,constraint_residual";

namespace detail {

inline std::string fmt10(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

inline std::string to_csv_line(const ResultRow& r) {
  std::ostringstream os;
  os << r.run_id << ',' << r.problem << ',' << r.n << ',' << r.r << ',' << detail::fmt10(r.lambda) << ','
     << detail::fmt10(r.eta) << ',' << detail::fmt10(r.iterations) << ',' << (r.seed ? std::to_string(*r.seed) : "")
     << ',' << detail::fmt10(r.init_error) << ',' << detail::fmt10(r.recovery_error) << ','
     << detail::fmt10(r.dual_gap) << ',' << detail::fmt10(r.comp_gap_delta_r) << ','
     << detail::fmt10(r.certificate_violations) << ',' << detail::fmt10(r.fallbacks) << ','
     << detail::fmt10(r.measured_snr) << ',' << detail::fmt10(r.wallclock_ms) << ','
     << detail::fmt10(r.constraint_residual);
  return os.str();
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) os << to_csv_line(r) << '\n';
}

/// Instance, start point and solver options of one trial.
struct TrialSetup {
  ProblemInstance instance;
  LowRankPsd x1;
  DualPoint y1;
  SolverOptions options;
};

inline TrialSetup prepare_trial(const ExperimentConfig& c, Index n, std::size_t trial) {
  ProblemSpec spec = c.problem;
  spec.n = n;
  spec.seed = c.seed + trial;
  TrialSetup s{generate(spec), {}, {}, {}};
  const ProblemInstance& inst = s.instance;
  if (c.init == "scaled_identity") {
    const Index d = inst.dim;
    s.x1 = LowRankPsd::from_factors(inst.tau, Vector::Constant(d, inst.tau / static_cast<double>(d)),
                                    Matrix::Identity(d, d));
    s.y1 = DualPoint::zero(inst.problem->dual_domain());
  } else {
    s.x1 = inst.x1;
    s.y1 = inst.y1;
  }
  s.options.eta = c.eta.value_or(inst.default_eta);
  s.options.iterations = c.iterations.value_or(inst.default_iterations);
  s.options.rank = c.rank.value_or(inst.rank);
  detail::require(s.options.rank < inst.dim, "rank must be smaller than the ambient dimension");
  s.options.mode = c.mode;
  s.options.seed = spec.seed;
  s.options.gap_every = c.gap_every.value_or(default_gap_every(n));
  return s;
}

/// Runs one trial; warnings (uncertified projections) go to `warn` if given.
inline ResultRow run_trial(const ExperimentConfig& c, Index n, std::size_t trial, std::ostream* warn = nullptr) {
  const TrialSetup s = prepare_trial(c, n, trial);
  const ProblemInstance& inst = s.instance;
  const SolverReport rep = eg_run(*inst.problem, s.x1, s.y1, s.options);
  const RecoveryMetrics m = recovery_metrics(inst, rep.best.x, rep);

  ResultRow row;
  row.problem = c.label;
  row.n = n;
  row.r = s.options.rank;
  row.lambda = inst.lambda;
  row.eta = s.options.eta;
  row.iterations = static_cast<double>(s.options.iterations);
  row.seed = inst.spec.seed;
  row.trial = trial;
  row.run_id = c.label + "/n=" + std::to_string(n) + "/trial=" + std::to_string(trial);
  row.init_error = relative_error(inst, s.x1);
  row.recovery_error = m.recovery_error;
  row.dual_gap = m.dual_gap;
  row.comp_gap_delta_r = m.comp_gap;
  row.certificate_violations = static_cast<double>(rep.certificate_violations);
  row.fallbacks = static_cast<double>(rep.fallbacks);
  row.measured_snr = inst.measured_snr;
  row.wallclock_ms = rep.wallclock_ms;
  row.constraint_residual = m.constraint_residual;
  if (warn && rep.certificate_violations > 0) {
    *warn << "warning: " << row.run_id << ": " << rep.certificate_violations
          << " truncated projections were not certified ("
          << (c.mode == ProjectionMode::CertifiedFallback ? "recomputed exactly" : "kept as truncated") << ")\n";
  }
  return row;
}

/// Arithmetic mean row per (problem, n), appended after that group's trials.
inline std::vector<ResultRow> with_means(std::vector<ResultRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.problem, a.n, a.trial) < std::tie(b.problem, b.n, b.trial);
  });
  std::vector<ResultRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].problem == rows[i].problem && rows[j].n == rows[i].n) ++j;
    ResultRow mean;
    mean.problem = rows[i].problem;
    mean.n = rows[i].n;
    mean.r = rows[i].r;
    mean.is_mean = true;
    mean.trial = std::numeric_limits<std::size_t>::max();
    mean.run_id = mean.problem + "/n=" + std::to_string(mean.n) + "/mean";
    const double count = static_cast<double>(j - i);
    auto avg = [&](double ResultRow::*field) {
      double s = 0.0;
      for (std::size_t k = i; k < j; ++k) s += rows[k].*field;
      return s / count;
    };
    mean.lambda = avg(&ResultRow::lambda);
    mean.eta = avg(&ResultRow::eta);
    mean.iterations = avg(&ResultRow::iterations);
    mean.init_error = avg(&ResultRow::init_error);
    mean.recovery_error = avg(&ResultRow::recovery_error);
    mean.dual_gap = avg(&ResultRow::dual_gap);
    mean.comp_gap_delta_r = avg(&ResultRow::comp_gap_delta_r);
    mean.certificate_violations = avg(&ResultRow::certificate_violations);
    mean.fallbacks = avg(&ResultRow::fallbacks);
    mean.measured_snr = avg(&ResultRow::measured_snr);
    mean.wallclock_ms = avg(&ResultRow::wallclock_ms);
    mean.constraint_residual = avg(&ResultRow::constraint_residual);
    for (std::size_t k = i; k < j; ++k) out.push_back(rows[k]);
    out.push_back(mean);
    i = j;
  }
  return out;
}

/// Runs every (config, n, trial) on up to `jobs` threads. Rows come back
/// sorted by (problem, n, trial) with a mean row closing each group. The first
/// NumericalFailure is rethrown after all workers stop.
inline std::vector<ResultRow> run_experiments(const std::vector<ExperimentConfig>& configs, std::size_t jobs,
                                              std::ostream* warn = nullptr) {
  struct Task {
    const ExperimentConfig* config;
    Index n;
    std::size_t trial;
  };
  std::vector<Task> tasks;
  for (const auto& c : configs)
    for (Index n : c.dims)
      for (std::size_t t = 0; t < c.trials; ++t) tasks.push_back({&c, n, t});

  std::vector<ResultRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard<std::mutex> lock(io);
        if (failure) return;
      }
      try {
        std::ostringstream local;
        rows[i] = run_trial(*tasks[i].config, tasks[i].n, tasks[i].trial, warn ? &local : nullptr);
        if (warn && !local.str().empty()) {
          std::lock_guard<std::mutex> lock(io);
          *warn << local.str();
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(io);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return with_means(std::move(rows));
}

enum class Scale { Desk, Full };

inline Scale parse_scale(const std::string& s) {
  if (s == "desk") return Scale::Desk;
  if (s == "full") return Scale::Full;
  throw InvalidInput("unknown scale '" + s + "' (expected desk | full)");
}

/// The benchmark table protocols: desk scale uses n in {100, 200}, full scale
/// all four published dimensions; T, lambda and eta follow the published rows,
/// and the noise level uses the squared SNR convention those rows were made with.
inline std::vector<ExperimentConfig> table_configs(int table, Scale scale, std::uint64_t seed = 0,
                                                   std::size_t trials = 10) {
  const std::vector<Index> dims = scale == Scale::Desk ? std::vector<Index>{100, 200}
                                                       : std::vector<Index>{100, 200, 400, 600};
  auto base = [&](ProblemKind kind, const std::string& label) {
    ExperimentConfig c;
    c.label = label;
    c.problem.kind = kind;
    c.dims = dims;
    c.trials = trials;
    c.seed = seed;
    c.problem.snr_convention = SnrConvention::Squared;
    return c;
  };
  std::vector<ExperimentConfig> out;
  switch (table) {
    case 1:
      for (NoiseKind noise : {NoiseKind::Uniform01, NoiseKind::GaussianHalf}) {
        for (double snr : {1.0, 0.05}) {
          ExperimentConfig c = base(ProblemKind::SparsePca, "sparse_pca/" + to_string(noise) + "/snr=" +
                                                                detail::fmt10(snr));
          c.problem.noise = noise;
          c.problem.snr = snr;
          out.push_back(c);
        }
      }
      break;
    case 2:
      for (Index r : {1, 5, 10}) {
        ExperimentConfig c = base(ProblemKind::LowRankSparse, "lowrank_sparse/r=" + std::to_string(r));
        c.problem.r = r;
        c.problem.snr = *table_lowrank_snr(r);
        c.problem.noise = NoiseKind::GaussianHalf;
        out.push_back(c);
      }
      break;
    case 3:
      for (Index r : {1, 5, 10}) {
        ExperimentConfig c = base(ProblemKind::RobustPca, "robust_pca/r=" + std::to_string(r));
        c.problem.r = r;
        out.push_back(c);
      }
      break;
    case 4:
      out.push_back(base(ProblemKind::PhaseSync, "phase_sync"));
      break;
    case 5:
      out.push_back(base(ProblemKind::LinConstrained, "lin_constrained"));
      break;
    default:
      throw InvalidInput("table must be one of 1..5");
  }
  return out;
}

}  // namespace specgrad
