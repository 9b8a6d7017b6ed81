#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "medfb/capacity.hpp"
#include "medfb/config.hpp"
#include "medfb/environments.hpp"
#include "medfb/learners.hpp"
#include "medfb/policy_set.hpp"
#include "medfb/rng.hpp"

namespace medfb {

inline constexpr const char* kVersion = "medfb 0.1.0";

// ---------------------------------------------------------------------------
// Setup
// ---------------------------------------------------------------------------

/// Policy set from a family spec or a matrix file.
inline PolicySet load_policies(const std::string& spec) {
  if (spec.find('(') != std::string::npos) return make_family(parse_family(spec));
  return read_policy_set(std::filesystem::path(spec));
}

/// Everything derived from a config before the first round.
struct ResolvedExperiment {
  ExperimentConfig config;
  PolicySet theta;
  Environment env = Environment::oblivious_uniform(1);
  CapacityBracket chi;
  std::optional<KlCapacityResult> kl;
  double capacity = 0.0;  ///< value handed to the learner schedule
  double eta_const = 0.0; ///< exp4-const rate
  std::string note;       ///< schedule substitutions, coverage warnings
};

inline std::size_t best_policy_for(const PolicySet& theta, std::span<const double> loss) {
  std::size_t best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < theta.num_policies(); ++i) {
    double v = 0.0;
    for (std::size_t x = 0; x < loss.size(); ++x) v += theta[i][x] * loss[x];
    if (v < best_v) best_v = v, best = i;
  }
  return best;
}

inline ResolvedExperiment resolve(const ExperimentConfig& config) {
  validate(config);
  ResolvedExperiment r;
  r.config = config;
  r.theta = config.policy_family.empty() ? read_policy_set(std::filesystem::path(config.policy_file))
                                         : make_family(parse_family(config.policy_family));
  const std::size_t k = r.theta.num_outcomes(), n = r.theta.num_policies();
  if (auto w = r.theta.coverage_warning()) r.note += "warning: " + *w + "; ";

  auto need_means = [&]() {
    if (config.means.size() != k)
      throw std::invalid_argument("config: environment.means has " +
                                  std::to_string(config.means.size()) + " entries, expected " +
                                  std::to_string(k));
    return config.means;
  };
  switch (config.env_kind) {
    case EnvironmentKind::bernoulli: r.env = Environment::bernoulli(need_means()); break;
    case EnvironmentKind::corrupted: {
      auto mu = need_means();
      const auto star = best_policy_for(r.theta, mu);
      r.env = Environment::corrupted(
          mu, {config.corruption_per_round, config.corruption_budget}, r.theta[star]);
      break;
    }
    case EnvironmentKind::linear_gaussian:
      r.env = Environment::linear_gaussian(need_means(), config.sigma, config.clipped);
      break;
    case EnvironmentKind::adversarial: {
      std::ifstream in(config.loss_file);
      if (!in) throw std::runtime_error("cannot open loss file " + config.loss_file);
      auto maps = read_matrix(in);
      if (maps.front().size() != k)
        throw std::invalid_argument("config: loss file has the wrong number of outcomes");
      if (maps.size() < config.horizon)
        throw std::invalid_argument("config: loss file is shorter than the horizon");
      r.env = Environment::adversarial(std::move(maps));
      break;
    }
    case EnvironmentKind::oblivious_uniform: r.env = Environment::oblivious_uniform(k); break;
  }

  r.chi = chi_capacity(r.theta);
  if (config.capacity == "auto")
    r.capacity = r.chi.certified_exact ? r.chi.lower : r.chi.upper;
  else
    r.capacity = std::stod(config.capacity);
  if (r.capacity < 0.0) throw std::invalid_argument("config: capacity must be non-negative");

  if (config.learner == "omd-full") r.kl = kl_capacity(r.theta);
  if (config.learner == "exp4-const") {
    if (config.eta == "tuned") {
      if (!(r.capacity > 0.0)) {
        r.eta_const = 1.0;
        r.note += "zero capacity: constant rate 1; ";
      } else {
        r.eta_const = std::min(1.0, rate_tuned_constant(r.capacity, config.horizon, n));
      }
    } else {
      r.eta_const = std::stod(config.eta);
    }
  }
  if (config.learner == "exp4-bobw" && !(r.capacity > 0.0))
    r.note += "zero capacity: bobw replaced by constant rate 1; ";
  return r;
}

// ---------------------------------------------------------------------------
// Theoretical bounds
// ---------------------------------------------------------------------------

/// Expected-regret bound of the configured learner at horizon T.
inline double theoretical_bound(const ResolvedExperiment& r) {
  const double t = static_cast<double>(r.config.horizon);
  const double n = static_cast<double>(r.theta.num_policies());
  const double ln = std::log(n), c = r.capacity, e = std::numbers::e;
  const std::string& name = r.config.learner;
  if (name == "exp4-fixed") return 2.0 * std::max(std::sqrt(e * c * t * ln), ln);
  if (name == "exp4-adaptive") {
    const double j = s_and_v(r.theta).v;
    return 2.0 * std::sqrt(e * c * t * ln) + ln + std::sqrt(e * j * ln);
  }
  if (name == "exp4-bobw")
    return 3.0 * std::sqrt(2.0 * e * c * t * std::log(e * t) * std::log(e * n)) + ln;
  if (name == "exp4-const") return ln / r.eta_const + 0.5 * e * r.eta_const * c * t;
  if (name == "omd-full") return std::sqrt(2.0 * (r.kl ? r.kl->value : 0.0) * t);
  if (name == "exp3-direct") return 2.0 * std::sqrt(n * t * ln);
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct TraceRow {
  std::size_t t = 0;
  double eta = 0.0;
  std::size_t chosen_policy = 0;  ///< 1-based
  long outcome = -1;              ///< 1-based, -1 outside mediator feedback
  double sampled_loss = 0.0;
  double expected_loss = 0.0;
  double cum_pseudo_regret = 0.0;
};

struct ReplicateResult {
  std::size_t replicate = 0;  ///< 1-based
  std::uint64_t env_seed = 0;
  std::uint64_t learner_seed = 0;
  std::size_t best_policy = 0;  ///< 1-based comparator
  double final_regret = 0.0;
  std::vector<TraceRow> rows;
};

inline std::vector<std::size_t> checkpoints(std::size_t horizon, std::size_t record_every) {
  std::vector<std::size_t> out;
  if (record_every == 0) {
    for (std::size_t t = 1; t < horizon; t *= 2) out.push_back(t);
  } else {
    for (std::size_t t = record_every; t < horizon; t += record_every) out.push_back(t);
  }
  out.push_back(horizon);
  return out;
}

namespace detail {

using AnyLearner = std::variant<Exp4, Exp3Direct, OmdFull>;

inline AnyLearner make_learner(const ResolvedExperiment& r) {
  const std::size_t n = r.theta.num_policies();
  const std::string& name = r.config.learner;
  if (name == "exp4-fixed") return Exp4::fixed_capacity(n, r.capacity);
  if (name == "exp4-adaptive") return Exp4::adaptive(n);
  if (name == "exp4-bobw")
    return r.capacity > 0.0 ? Exp4::bobw(n, r.capacity, r.config.horizon) : Exp4::constant(n, 1.0);
  if (name == "exp4-const") return Exp4::constant(n, r.eta_const);
  if (name == "exp3-direct") return Exp3Direct(n);
  if (name == "omd-full") return OmdFull(r.theta, *r.kl, r.config.horizon);
  throw std::invalid_argument("unknown learner '" + name + "'");
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

inline ReplicateResult run_replicate(const ResolvedExperiment& r, std::size_t replicate) {
  const auto& cfg = r.config;
  const auto& theta = r.theta;
  const std::size_t n = theta.num_policies();
  ReplicateResult out;
  out.replicate = replicate;
  out.env_seed = derive_seed(cfg.seed, cfg.id, replicate, StreamRole::env);
  out.learner_seed = derive_seed(cfg.seed, cfg.id, replicate, StreamRole::learner);
  Rng env_rng(out.env_seed), learner_rng(out.learner_seed);

  auto learner = detail::make_learner(r);
  const auto marks = checkpoints(cfg.horizon, cfg.record_every);
  std::size_t next_mark = 0;

  double learner_cum = 0.0;
  std::vector<double> policy_cum(n, 0.0), policy_loss(n, 0.0);
  std::vector<double> snapshot_learner;
  std::vector<std::vector<double>> snapshot_policy;
  const bool constant_means = r.env.kind() == EnvironmentKind::bernoulli ||
                              r.env.kind() == EnvironmentKind::linear_gaussian;
  if (constant_means) {
    const auto m = r.env.expected_map(1, {});
    for (std::size_t i = 0; i < n; ++i) policy_loss[i] = detail::dot(theta[i].span(), m);
  }

  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    TraceRow row;
    row.t = t;
    Distribution p = std::visit(
        [&](auto& l) -> Distribution {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Exp4>) return l.begin_round(theta);
          else if constexpr (std::is_same_v<L, Exp3Direct>) return l.predict();
          else return l.play_distribution();
        },
        learner);
    row.eta = std::visit([](const auto& l) { return l.eta(); }, learner);
    const std::size_t chosen = sample_index(p.span(), learner_rng);
    const LossMap loss = r.env.sample_round(t, env_rng);

    switch (cfg.feedback) {
      case FeedbackMode::mediator: {
        const std::size_t x = sample_index(theta[chosen].span(), learner_rng);
        row.outcome = static_cast<long>(x) + 1;
        row.sampled_loss = loss[x];
        if (auto* e = std::get_if<Exp4>(&learner)) e->update(theta, p, chosen, x, loss[x]);
        else std::get<Exp3Direct>(learner).update(p, chosen, loss[x]);
        break;
      }
      case FeedbackMode::linear: {
        row.sampled_loss = std::clamp(detail::dot(theta[chosen].span(), loss), 0.0, 1.0);
        std::get<Exp3Direct>(learner).update(p, chosen, row.sampled_loss);
        break;
      }
      case FeedbackMode::full: {
        row.sampled_loss = detail::dot(theta[chosen].span(), loss);
        std::get<OmdFull>(learner).step(theta, loss);
        break;
      }
    }

    if (!constant_means) {
      const auto m = r.env.expected_map(t, loss);
      for (std::size_t i = 0; i < n; ++i) policy_loss[i] = detail::dot(theta[i].span(), m);
    }
    row.expected_loss = policy_loss[chosen];
    learner_cum += row.expected_loss;
    for (std::size_t i = 0; i < n; ++i) policy_cum[i] += policy_loss[i];
    row.chosen_policy = chosen + 1;

    if (next_mark < marks.size() && marks[next_mark] == t) {
      ++next_mark;
      out.rows.push_back(row);
      snapshot_learner.push_back(learner_cum);
      snapshot_policy.push_back(policy_cum);
    }
  }

  const std::size_t best =
      static_cast<std::size_t>(std::min_element(policy_cum.begin(), policy_cum.end()) - policy_cum.begin());
  out.best_policy = best + 1;
  for (std::size_t j = 0; j < out.rows.size(); ++j)
    out.rows[j].cum_pseudo_regret = snapshot_learner[j] - snapshot_policy[j][best];
  out.final_regret = out.rows.back().cum_pseudo_regret;
  return out;
}

struct SummaryRecord {
  std::string experiment_id;
  std::string learner;
  std::string env;
  std::size_t horizon = 0;
  std::size_t replicates = 0;
  double capacity_lower = 0.0;
  double capacity_upper = 0.0;
  double mean_final_regret = 0.0;
  double stderr_final_regret = 0.0;
  double thm_bound = 0.0;
};

struct CurvePoint {
  std::size_t t = 0;
  double mean_regret = 0.0;
  double stderr_regret = 0.0;
};

struct ExperimentResult {
  ResolvedExperiment setup;
  std::vector<ReplicateResult> replicates;
  SummaryRecord summary;
  std::vector<CurvePoint> curve;
};

/// Mean and standard error; the error is 0 for a single sample.
inline std::pair<double, double> mean_and_stderr(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

inline SummaryRecord summarize(const ResolvedExperiment& r, std::span<const ReplicateResult> reps) {
  if (reps.empty()) throw std::invalid_argument("summarize: no traces");
  std::vector<double> finals;
  for (const auto& rep : reps) finals.push_back(rep.final_regret);
  const auto [mean, se] = mean_and_stderr(finals);
  return {r.config.id, r.config.learner, to_string(r.config.env_kind), r.config.horizon,
          reps.size(), r.chi.lower, r.chi.upper, mean, se, theoretical_bound(r)};
}

inline std::vector<CurvePoint> regret_curve(std::span<const ReplicateResult> reps) {
  std::vector<CurvePoint> out;
  if (reps.empty()) return out;
  for (std::size_t j = 0; j < reps.front().rows.size(); ++j) {
    std::vector<double> xs;
    for (const auto& rep : reps) xs.push_back(rep.rows[j].cum_pseudo_regret);
    const auto [m, se] = mean_and_stderr(xs);
    out.push_back({reps.front().rows[j].t, m, se});
  }
  return out;
}

/// Runs every replicate (in parallel when allowed) and summarises.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult res;
  res.setup = resolve(config);
  const std::size_t reps = config.replicates;
  res.replicates.resize(reps);
  std::size_t workers = config.threads ? config.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, reps);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&]() {
    for (std::size_t i; (i = next.fetch_add(1)) < reps;) {
      try {
        res.replicates[i] = run_replicate(res.setup, i + 1);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  res.summary = summarize(res.setup, res.replicates);
  res.curve = regret_curve(res.replicates);
  return res;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline const char* kTraceHeader =
    "experiment_id,replicate,seed,t,learner,env,eta,chosen_policy,outcome,sampled_loss,"
    "expected_loss,cum_pseudo_regret";
inline const char* kSummaryHeader =
    "experiment_id,learner,env,T,replicates,capacity_lower,capacity_upper,mean_final_regret,"
    "stderr_final_regret,thm_bound";

inline void write_trace_csv(std::ostream& os, const ExperimentResult& res) {
  const auto& c = res.setup.config;
  const std::string env = to_string(c.env_kind);
  os << kTraceHeader << '\n';
  for (const auto& rep : res.replicates)
    for (const auto& row : rep.rows)
      os << c.id << ',' << rep.replicate << ',' << c.seed << ',' << row.t << ',' << c.learner << ','
         << env << ',' << format_real(row.eta) << ',' << row.chosen_policy << ',' << row.outcome
         << ',' << format_real(row.sampled_loss) << ',' << format_real(row.expected_loss) << ','
         << format_real(row.cum_pseudo_regret) << '\n';
}

inline void write_summary_row(std::ostream& os, const SummaryRecord& s) {
  os << s.experiment_id << ',' << s.learner << ',' << s.env << ',' << s.horizon << ','
     << s.replicates << ',' << format_real(s.capacity_lower) << ',' << format_real(s.capacity_upper)
     << ',' << format_real(s.mean_final_regret) << ',' << format_real(s.stderr_final_regret) << ','
     << format_real(s.thm_bound) << '\n';
}

inline void write_summary_csv(std::ostream& os, const SummaryRecord& s) {
  os << kSummaryHeader << '\n';
  write_summary_row(os, s);
}

inline void write_curve_csv(std::ostream& os, const ExperimentResult& res) {
  const auto& c = res.setup.config;
  os << "experiment_id,learner,env,t,mean_regret,stderr_regret\n";
  for (const auto& p : res.curve)
    os << c.id << ',' << c.learner << ',' << to_string(c.env_kind) << ',' << p.t << ','
       << format_real(p.mean_regret) << ',' << format_real(p.stderr_regret) << '\n';
}

inline void write_meta(std::ostream& os, const ExperimentResult& res) {
  const auto& r = res.setup;
  const std::string text = to_text(r.config);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  os << "version = " << kVersion << "\nconfig_hash = " << hash << "\nseed = " << r.config.seed
     << "\nrng = " << kRngDescription << "\nfeedback = " << to_string(r.config.feedback)
     << "\npolicies = " << r.theta.num_policies() << "\noutcomes = " << r.theta.num_outcomes()
     << "\ncapacity_used = " << format_real(r.capacity)
     << "\ncapacity_certified = " << (r.chi.certified_exact ? "true" : "false") << '\n';
  if (r.kl) os << "kl_capacity = " << format_real(r.kl->value) << '\n';
  if (!r.note.empty()) os << "note = " << r.note << '\n';
  for (const auto& rep : res.replicates)
    os << "replicate " << rep.replicate << " = env_seed " << rep.env_seed << ", learner_seed "
       << rep.learner_seed << ", comparator " << rep.best_policy << '\n';
  os << "# config\n" << text;
}

struct OutputPaths {
  std::filesystem::path trace, meta, summary, curve;
};

inline OutputPaths output_paths(const ExperimentConfig& c) {
  const std::filesystem::path dir(c.output_dir);
  return {dir / (c.id + "_trace.csv"), dir / (c.id + "_trace.csv.meta"),
          dir / (c.id + "_summary.csv"), dir / (c.id + "_curve.csv")};
}

inline OutputPaths write_outputs(const ExperimentResult& res) {
  const auto paths = output_paths(res.setup.config);
  std::filesystem::create_directories(res.setup.config.output_dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
  };
  {
    auto f = open(paths.trace);
    write_trace_csv(f, res);
  }
  {
    auto f = open(paths.meta);
    write_meta(f, res);
  }
  {
    auto f = open(paths.summary);
    write_summary_csv(f, res.summary);
  }
  {
    auto f = open(paths.curve);
    write_curve_csv(f, res);
  }
  return paths;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepResult {
  std::vector<std::string> varied;  ///< "section.key" per axis
  std::vector<std::vector<std::string>> cell_values;
  std::vector<SummaryRecord> summaries;
};

/// Runs a grid. On failure writes `sweep_manifest.txt` to the base output
/// directory naming completed cells and the error, then rethrows.
inline SweepResult run_sweep(const ParsedConfig& parsed, bool write_files = true) {
  const auto grid = expand_grid(parsed);
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  SweepResult out;
  for (const auto& a : parsed.sweep) out.varied.push_back(a.section + "." + a.key);
  std::vector<std::size_t> idx(parsed.sweep.size(), 0);
  const std::filesystem::path dir(parsed.base.output_dir);
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    std::vector<std::string> values;
    for (std::size_t a = 0; a < parsed.sweep.size(); ++a) values.push_back(parsed.sweep[a].values[idx[a]]);
    try {
      auto res = run_experiment(grid[cell]);
      if (write_files) write_outputs(res);
      out.summaries.push_back(res.summary);
      out.cell_values.push_back(values);
    } catch (const std::exception& e) {
      if (write_files) {
        std::filesystem::create_directories(dir);
        std::ofstream m(dir / "sweep_manifest.txt");
        m << "status = failed\nfailed_cell = " << grid[cell].id << "\nerror = " << e.what()
          << "\ncompleted =";
        for (const auto& s : out.summaries) m << ' ' << s.experiment_id;
        m << '\n';
      }
      throw;
    }
    for (std::size_t a = parsed.sweep.size(); a-- > 0;) {
      if (++idx[a] < parsed.sweep[a].values.size()) break;
      idx[a] = 0;
    }
  }
  if (write_files) {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / "sweep_summary.csv", std::ios::binary);
    auto field = [](const std::string& v) {
      return v.find_first_of(",\"") == std::string::npos ? v : "\"" + v + "\"";
    };
    for (const auto& v : out.varied) f << v << ',';
    f << kSummaryHeader << '\n';
    for (std::size_t i = 0; i < out.summaries.size(); ++i) {
      for (const auto& v : out.cell_values[i]) f << field(v) << ',';
      write_summary_row(f, out.summaries[i]);
    }
  }
  return out;
}

}  // namespace medfb
