#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "medfb/environments.hpp"
#include "medfb/policy_set.hpp"

// Experiment configuration in a flat `key = value` format with `[section]`
// headers. `#` starts a comment. A `[sweep]` section holds
// `section.key = v1 | v2 | ...` axes whose cartesian product forms a grid.

namespace medfb {

struct ExperimentConfig {
  // [experiment]
  std::string id = "experiment";
  std::size_t horizon = 1000;
  std::size_t replicates = 1;
  std::uint64_t seed = 1;
  std::string output_dir = ".";
  std::size_t record_every = 0;  ///< 0: powers of two plus the final round
  std::size_t threads = 0;       ///< 0: hardware concurrency

  // [policies]
  std::string policy_family;
  std::string policy_file;

  // [environment]
  EnvironmentKind env_kind = EnvironmentKind::bernoulli;
  std::vector<double> means;
  std::string loss_file;
  double sigma = 0.0;
  bool clipped = true;
  double corruption_per_round = 0.0;
  double corruption_budget = 0.0;

  // [learner]
  std::string learner = "exp4-fixed";
  std::string capacity = "auto";  ///< "auto" or a number
  std::string eta = "tuned";      ///< "tuned" or a number (exp4-const only)

  // [feedback]
  FeedbackMode feedback = FeedbackMode::mediator;
};

struct SweepAxis {
  std::string section;
  std::string key;
  std::vector<std::string> values;
};

struct ParsedConfig {
  ExperimentConfig base;
  std::vector<SweepAxis> sweep;
};

namespace detail {

inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || n < 0)
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(n);
}

inline double parse_number(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty())
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  return d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: '" + key + "' expects true or false, got '" + v + "'");
}

inline std::vector<double> parse_number_list(const std::string& key, std::string v) {
  std::replace(v.begin(), v.end(), ',', ' ');
  std::istringstream in(v);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_number(key, tok));
  if (out.empty()) throw std::invalid_argument("config: '" + key + "' is empty");
  return out;
}

inline EnvironmentKind parse_env_kind(const std::string& v) {
  if (v == "bernoulli") return EnvironmentKind::bernoulli;
  if (v == "adversarial") return EnvironmentKind::adversarial;
  if (v == "corrupted") return EnvironmentKind::corrupted;
  if (v == "linear_gaussian") return EnvironmentKind::linear_gaussian;
  if (v == "uniform") return EnvironmentKind::oblivious_uniform;
  throw std::invalid_argument("config: unknown environment kind '" + v + "'");
}

}  // namespace detail

inline const std::vector<std::string>& known_learners() {
  static const std::vector<std::string> names = {"exp4-fixed", "exp4-adaptive", "exp4-bobw",
                                                 "exp4-const", "omd-full",      "exp3-direct"};
  return names;
}

/// Applies one setting; unknown sections or keys are errors.
inline void apply_setting(ExperimentConfig& c, const std::string& section, const std::string& key,
                          const std::string& value) {
  using namespace detail;
  const std::string full = section + "." + key;
  if (section == "experiment") {
    if (key == "id") {
      if (value.empty() || value.find_first_of(",\n\"/") != std::string::npos)
        throw std::invalid_argument("config: experiment id must be non-empty without , \" or /");
      c.id = value;
    } else if (key == "horizon") c.horizon = parse_count(full, value);
    else if (key == "replicates") c.replicates = parse_count(full, value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "record_every") c.record_every = parse_count(full, value);
    else if (key == "threads") c.threads = parse_count(full, value);
    else throw std::invalid_argument("config: unknown key '" + full + "'");
  } else if (section == "policies") {
    if (key == "family") c.policy_family = value;
    else if (key == "file") c.policy_file = value;
    else throw std::invalid_argument("config: unknown key '" + full + "'");
  } else if (section == "environment") {
    if (key == "kind") c.env_kind = parse_env_kind(value);
    else if (key == "means") c.means = parse_number_list(full, value);
    else if (key == "file") c.loss_file = value;
    else if (key == "sigma") c.sigma = parse_number(full, value);
    else if (key == "clipped") c.clipped = parse_bool(full, value);
    else if (key == "corruption_per_round") c.corruption_per_round = parse_number(full, value);
    else if (key == "corruption_budget") c.corruption_budget = parse_number(full, value);
    else throw std::invalid_argument("config: unknown key '" + full + "'");
  } else if (section == "learner") {
    if (key == "name") {
      const auto& names = known_learners();
      if (std::find(names.begin(), names.end(), value) == names.end())
        throw std::invalid_argument("config: unknown learner '" + value + "'");
      c.learner = value;
    } else if (key == "capacity") {
      if (value != "auto") parse_number(full, value);
      c.capacity = value;
    } else if (key == "eta") {
      if (value != "tuned") parse_number(full, value);
      c.eta = value;
    } else throw std::invalid_argument("config: unknown key '" + full + "'");
  } else if (section == "feedback") {
    if (key == "mode") c.feedback = parse_feedback_mode(value);
    else throw std::invalid_argument("config: unknown key '" + full + "'");
  } else {
    throw std::invalid_argument("config: unknown section '" + section + "'");
  }
}

/// Structural checks that need the whole configuration.
inline void validate(const ExperimentConfig& c) {
  if (c.horizon < 1) throw std::invalid_argument("config: horizon must be at least 1");
  if (c.replicates < 1) throw std::invalid_argument("config: replicates must be at least 1");
  if (c.policy_family.empty() == c.policy_file.empty())
    throw std::invalid_argument("config: set exactly one of policies.family and policies.file");
  const bool exp4 = c.learner.rfind("exp4-", 0) == 0;
  if (c.learner == "omd-full" && c.feedback != FeedbackMode::full)
    throw std::invalid_argument("config: omd-full requires feedback.mode = full");
  if (c.learner == "exp3-direct" && c.feedback == FeedbackMode::full)
    throw std::invalid_argument("config: exp3-direct requires mediator or linear feedback");
  if (exp4 && c.feedback != FeedbackMode::mediator)
    throw std::invalid_argument("config: " + c.learner + " requires feedback.mode = mediator");
  if (c.env_kind == EnvironmentKind::adversarial && c.loss_file.empty())
    throw std::invalid_argument("config: adversarial environment needs environment.file");
  const bool needs_means = c.env_kind == EnvironmentKind::bernoulli ||
                           c.env_kind == EnvironmentKind::corrupted ||
                           c.env_kind == EnvironmentKind::linear_gaussian;
  if (needs_means && c.means.empty())
    throw std::invalid_argument("config: environment." + to_string(c.env_kind) + " needs means");
  if (c.env_kind == EnvironmentKind::linear_gaussian && !c.clipped)
    throw std::invalid_argument("config: unclipped linear_gaussian losses leave [0,1]; set clipped = true");
}

inline ParsedConfig parse_config(std::istream& in) {
  ParsedConfig out;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": key outside a section");
    try {
      if (section == "sweep") {
        const auto dot = key.find('.');
        if (dot == std::string::npos)
          throw std::invalid_argument("config: sweep keys take the form section.key");
        SweepAxis axis{key.substr(0, dot), key.substr(dot + 1), {}};
        std::istringstream parts(value);
        std::string v;
        while (std::getline(parts, v, '|')) axis.values.push_back(detail::trim(v));
        if (axis.values.empty()) throw std::invalid_argument("config: empty sweep axis " + key);
        ExperimentConfig probe = out.base;
        for (const auto& v2 : axis.values) apply_setting(probe, axis.section, axis.key, v2);
        out.sweep.push_back(std::move(axis));
      } else {
        apply_setting(out.base, section, key, value);
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse_config(in);
}

/// Canonical text form; its hash identifies the configuration in metadata.
inline std::string to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[experiment]\nid = " << c.id << "\nhorizon = " << c.horizon
     << "\nreplicates = " << c.replicates << "\nseed = " << c.seed
     << "\nrecord_every = " << c.record_every << "\n[policies]\n";
  if (!c.policy_family.empty()) os << "family = " << c.policy_family << "\n";
  if (!c.policy_file.empty()) os << "file = " << c.policy_file << "\n";
  os << "[environment]\nkind = " << to_string(c.env_kind) << "\n";
  if (!c.means.empty()) {
    os << "means =";
    for (double m : c.means) os << ' ' << format_real(m);
    os << "\n";
  }
  if (!c.loss_file.empty()) os << "file = " << c.loss_file << "\n";
  os << "sigma = " << format_real(c.sigma) << "\nclipped = " << (c.clipped ? "true" : "false")
     << "\ncorruption_per_round = " << format_real(c.corruption_per_round)
     << "\ncorruption_budget = " << format_real(c.corruption_budget) << "\n[learner]\nname = "
     << c.learner << "\ncapacity = " << c.capacity << "\neta = " << c.eta
     << "\n[feedback]\nmode = " << to_string(c.feedback) << "\n";
  return os.str();
}

/// Expands the sweep axes into a grid; cell ids get a `-<index>` suffix.
inline std::vector<ExperimentConfig> expand_grid(const ParsedConfig& parsed) {
  if (parsed.sweep.empty()) return {parsed.base};
  std::vector<ExperimentConfig> grid;
  std::vector<std::size_t> idx(parsed.sweep.size(), 0);
  for (std::size_t cell = 0;; ++cell) {
    ExperimentConfig c = parsed.base;
    for (std::size_t a = 0; a < parsed.sweep.size(); ++a)
      apply_setting(c, parsed.sweep[a].section, parsed.sweep[a].key, parsed.sweep[a].values[idx[a]]);
    c.id = parsed.base.id + "-" + std::to_string(cell + 1);
    grid.push_back(std::move(c));
    std::size_t a = parsed.sweep.size();
    while (a-- > 0) {
      if (++idx[a] < parsed.sweep[a].values.size()) break;
      idx[a] = 0;
    }
    if (a == static_cast<std::size_t>(-1)) break;
  }
  return grid;
}

}  // namespace medfb
