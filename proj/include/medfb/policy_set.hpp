#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "medfb/divergence.hpp"

namespace medfb {

// ---------------------------------------------------------------------------
// Structured families with known capacity
// ---------------------------------------------------------------------------

/// theta_i(x) = (1 - eps) / n + eps * 1{x = i}, N = K = n.
struct EpsilonGreedyFamily {
  std::size_t n = 2;
  double epsilon = 0.0;
  friend bool operator==(const EpsilonGreedyFamily&, const EpsilonGreedyFamily&) = default;
};

/// Policies uniform over M-element supports covering all K outcomes.
struct UniformSupportedFamily {
  std::size_t k = 2;
  std::size_t m = 1;
  friend bool operator==(const UniformSupportedFamily&, const UniformSupportedFamily&) = default;
};

/// m parallel q-armed games; one policy per choice vector (N = q^m, K = m q).
struct MultitaskFamily {
  std::size_t m = 1;
  std::size_t q = 2;
  friend bool operator==(const MultitaskFamily&, const MultitaskFamily&) = default;
};

using FamilyDescriptor = std::variant<EpsilonGreedyFamily, UniformSupportedFamily, MultitaskFamily>;

inline std::string to_string(const FamilyDescriptor& family) {
  std::ostringstream os;
  os.precision(17);
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, EpsilonGreedyFamily>)
          os << "epsilon_greedy(" << f.n << "," << f.epsilon << ")";
        else if constexpr (std::is_same_v<F, UniformSupportedFamily>)
          os << "uniform_supported(" << f.k << "," << f.m << ")";
        else
          os << "multitask(" << f.m << "," << f.q << ")";
      },
      family);
  return os.str();
}

// ---------------------------------------------------------------------------
// PolicySet
// ---------------------------------------------------------------------------

/// Ordered collection of N >= 2 distributions over a shared outcome space of
/// size K >= 2. Immutable after construction.
class PolicySet {
 public:
  PolicySet() = default;

  explicit PolicySet(std::vector<Distribution> policies, std::vector<std::string> labels = {},
                     std::optional<FamilyDescriptor> family = std::nullopt)
      : policies_(std::move(policies)), labels_(std::move(labels)), family_(std::move(family)) {
    if (policies_.size() < 2) throw std::invalid_argument("PolicySet: need at least 2 policies");
    const std::size_t k = policies_.front().size();
    if (k < 2) throw std::invalid_argument("PolicySet: need at least 2 outcomes");
    for (const auto& p : policies_)
      if (p.size() != k) throw std::invalid_argument("PolicySet: rows have different lengths");
    if (!labels_.empty() && labels_.size() != policies_.size())
      throw std::invalid_argument("PolicySet: label count differs from policy count");
  }

  /// Builds from raw rows; each row is validated as a distribution.
  static PolicySet from_rows(const std::vector<std::vector<double>>& rows) {
    std::vector<Distribution> policies;
    policies.reserve(rows.size());
    for (const auto& r : rows) policies.emplace_back(r);
    return PolicySet(std::move(policies));
  }

  std::size_t num_policies() const { return policies_.size(); }
  std::size_t num_outcomes() const { return policies_.empty() ? 0 : policies_.front().size(); }

  const Distribution& operator[](std::size_t i) const { return policies_[i]; }
  const Distribution& policy(std::size_t i) const { return policies_.at(i); }
  std::span<const Distribution> policies() const { return policies_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::optional<FamilyDescriptor>& family() const { return family_; }

  /// Copy with the family tag removed (forces generic capacity routes).
  PolicySet untagged() const { return PolicySet(policies_, labels_, std::nullopt); }

  /// Outcomes (0-based) that no policy can produce.
  std::vector<std::size_t> uncovered_outcomes() const {
    std::vector<std::size_t> out;
    for (std::size_t x = 0; x < num_outcomes(); ++x) {
      bool covered = false;
      for (const auto& p : policies_) covered = covered || p[x] > 0.0;
      if (!covered) out.push_back(x);
    }
    return out;
  }

  /// Human-readable warning when some outcome is uncovered.
  std::optional<std::string> coverage_warning() const {
    auto missing = uncovered_outcomes();
    if (missing.empty()) return std::nullopt;
    std::string msg = "outcomes with zero mass under every policy:";
    for (auto x : missing) msg += " " + std::to_string(x + 1);
    return msg;
  }

  void require_full_coverage(const char* who) const {
    if (!uncovered_outcomes().empty())
      throw std::invalid_argument(std::string(who) +
                                  ": every outcome must lie in the support of some policy");
  }

 private:
  std::vector<Distribution> policies_;
  std::vector<std::string> labels_;
  std::optional<FamilyDescriptor> family_;
};

/// Per-round advice matrices for the time-varying setting.
class AdviceSequence {
 public:
  explicit AdviceSequence(std::vector<PolicySet> rounds) : rounds_(std::move(rounds)) {
    if (rounds_.empty()) throw std::invalid_argument("AdviceSequence: no rounds");
    for (const auto& r : rounds_)
      if (r.num_policies() != rounds_.front().num_policies() ||
          r.num_outcomes() != rounds_.front().num_outcomes())
        throw std::invalid_argument("AdviceSequence: rounds disagree on dimensions");
  }
  std::size_t horizon() const { return rounds_.size(); }
  std::size_t num_policies() const { return rounds_.front().num_policies(); }
  std::size_t num_outcomes() const { return rounds_.front().num_outcomes(); }
  /// 1-based round access.
  const PolicySet& at_round(std::size_t t) const {
    if (t < 1 || t > rounds_.size()) throw std::out_of_range("AdviceSequence: round out of range");
    return rounds_[t - 1];
  }

 private:
  std::vector<PolicySet> rounds_;
};

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

inline PolicySet make_epsilon_greedy(std::size_t n, double epsilon) {
  if (n < 2) throw std::invalid_argument("make_epsilon_greedy: n must be at least 2");
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("make_epsilon_greedy: epsilon must lie in [0,1]");
  const double base = (1.0 - epsilon) / static_cast<double>(n);
  std::vector<Distribution> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(n, base);
    r[i] += epsilon;
    rows.emplace_back(std::move(r));
  }
  return PolicySet(std::move(rows), {}, EpsilonGreedyFamily{n, epsilon});
}

/// supports: 0-based outcome index sets, all of the same size M.
inline PolicySet make_uniform_supported(const std::vector<std::vector<std::size_t>>& supports,
                                        std::size_t k) {
  if (supports.size() < 2) throw std::invalid_argument("make_uniform_supported: need 2+ supports");
  std::optional<std::size_t> m;
  std::vector<bool> covered(k, false);
  std::vector<Distribution> rows;
  for (const auto& s : supports) {
    const std::set<std::size_t> uniq(s.begin(), s.end());
    if (uniq.size() != s.size() || s.empty())
      throw std::invalid_argument("make_uniform_supported: supports must be non-empty sets");
    if (m && *m != s.size())
      throw std::invalid_argument("make_uniform_supported: supports differ in size");
    m = s.size();
    std::vector<double> r(k, 0.0);
    for (auto x : s) {
      if (x >= k) throw std::invalid_argument("make_uniform_supported: outcome index out of range");
      r[x] = 1.0 / static_cast<double>(s.size());
      covered[x] = true;
    }
    rows.emplace_back(std::move(r));
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end())
    throw std::invalid_argument("make_uniform_supported: some outcome is not covered");
  return PolicySet(std::move(rows), {}, UniformSupportedFamily{k, *m});
}

/// K policies with cyclic windows {i, ..., i + M - 1 mod K}.
inline PolicySet make_cyclic_uniform(std::size_t k, std::size_t m) {
  if (k < 2 || m < 1 || m > k) throw std::invalid_argument("make_cyclic_uniform: need 1 <= M <= K");
  std::vector<std::vector<std::size_t>> supports(k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m; ++j) supports[i].push_back((i + j) % k);
  return make_uniform_supported(supports, k);
}

inline constexpr std::size_t kDefaultPolicyCap = 1'000'000;

/// Multitask structure. Outcome (i, j) of section i, arm j maps to index
/// i * q + j. Policies enumerate choice vectors lexicographically (the last
/// section varies fastest).
inline PolicySet make_multitask(std::size_t m, std::size_t q, std::size_t cap = kDefaultPolicyCap) {
  if (m < 1 || q < 2) throw std::invalid_argument("make_multitask: need m >= 1 and q >= 2");
  std::size_t n = 1;
  for (std::size_t i = 0; i < m; ++i) {
    if (n > cap / q) throw std::invalid_argument("make_multitask: q^m exceeds the policy cap");
    n *= q;
  }
  const std::size_t k = m * q;
  std::vector<Distribution> rows;
  rows.reserve(n);
  std::vector<std::size_t> choice(m, 0);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::vector<double> r(k, 0.0);
    for (std::size_t i = 0; i < m; ++i) r[i * q + choice[i]] = 1.0 / static_cast<double>(m);
    rows.emplace_back(std::move(r));
    for (std::size_t i = m; i-- > 0;) {
      if (++choice[i] < q) break;
      choice[i] = 0;
    }
  }
  return PolicySet(std::move(rows), {}, MultitaskFamily{m, q});
}

/// Arm chosen in `section` by the policy at lexicographic `index` (0-based).
inline std::size_t multitask_choice(std::size_t index, std::size_t section, std::size_t m,
                                    std::size_t q) {
  std::size_t stride = 1;
  for (std::size_t i = section + 1; i < m; ++i) stride *= q;
  return (index / stride) % q;
}

inline PolicySet make_family(const FamilyDescriptor& family) {
  return std::visit(
      [](const auto& f) -> PolicySet {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, EpsilonGreedyFamily>)
          return make_epsilon_greedy(f.n, f.epsilon);
        else if constexpr (std::is_same_v<F, UniformSupportedFamily>)
          return make_cyclic_uniform(f.k, f.m);
        else
          return make_multitask(f.m, f.q);
      },
      family);
}

/// Parses `epsilon_greedy(n,eps)`, `uniform_supported(k,m)` or
/// `multitask(m,q)`. Whitespace is ignored.
inline FamilyDescriptor parse_family(std::string text) {
  std::erase_if(text, [](unsigned char c) { return std::isspace(c); });
  const auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')')
    throw std::invalid_argument("unknown policy family '" + text + "'");
  const std::string name = text.substr(0, open);
  const std::string args = text.substr(open + 1, text.size() - open - 2);
  const auto comma = args.find(',');
  if (comma == std::string::npos)
    throw std::invalid_argument("policy family '" + name + "' expects two arguments");
  const std::string a = args.substr(0, comma), b = args.substr(comma + 1);
  auto to_size = [&](const std::string& s) {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size() || v < 0) throw std::invalid_argument("bad integer '" + s + "'");
    return static_cast<std::size_t>(v);
  };
  auto to_real = [&](const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "'");
    return v;
  };
  if (name == "epsilon_greedy") return EpsilonGreedyFamily{to_size(a), to_real(b)};
  if (name == "uniform_supported") return UniformSupportedFamily{to_size(a), to_size(b)};
  if (name == "multitask") return MultitaskFamily{to_size(a), to_size(b)};
  throw std::invalid_argument("unknown policy family '" + name + "'");
}

// ---------------------------------------------------------------------------
// Coarse measures
// ---------------------------------------------------------------------------

/// psi(x) = sum_theta tau(theta) theta(x).
inline std::vector<double> mixture_raw(std::span<const double> tau, const PolicySet& theta) {
  detail::require_same_size(tau.size(), theta.num_policies(), "mixture");
  std::vector<double> psi(theta.num_outcomes(), 0.0);
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (tau[i] == 0.0) continue;
    const auto& row = theta[i];
    for (std::size_t x = 0; x < psi.size(); ++x) psi[x] += tau[i] * row[x];
  }
  return psi;
}

inline Distribution mixture(const Distribution& tau, const PolicySet& theta) {
  return Distribution(mixture_raw(tau.span(), theta));
}

struct SizeMeasures {
  double s = 1.0;  ///< sum_x max_theta theta(x)
  double v = 0.0;  ///< s - 1
};

inline SizeMeasures s_and_v(const PolicySet& theta) {
  double s = 0.0;
  for (std::size_t x = 0; x < theta.num_outcomes(); ++x) {
    double best = 0.0;
    for (const auto& p : theta.policies()) best = std::max(best, p[x]);
    s += best;
  }
  return {s, std::max(0.0, s - 1.0)};
}

/// Largest chi-squared divergence over ordered policy pairs.
inline ExtendedReal chi_diameter(const PolicySet& theta) {
  ExtendedReal best;
  for (std::size_t i = 0; i < theta.num_policies(); ++i)
    for (std::size_t j = 0; j < theta.num_policies(); ++j) {
      if (i == j) continue;
      const auto d = f_divergence(DivergenceKind::chi_sq, theta[i], theta[j]);
      if (d.is_infinite()) return d;
      best = std::max(best, d, [](const auto& a, const auto& b) { return a < b; });
    }
  return best;
}

// ---------------------------------------------------------------------------
// Plain-text matrix files
// ---------------------------------------------------------------------------

/// Reads `R C` then R rows of C numbers. `#` starts a comment.
inline std::vector<std::vector<double>> read_matrix(std::istream& in) {
  std::string content, line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    content += line;
    content += '\n';
  }
  std::istringstream tokens(content);
  long long rows = -1, cols = -1;
  if (!(tokens >> rows >> cols) || rows <= 0 || cols <= 0)
    throw std::invalid_argument("matrix file: expected header 'rows cols'");
  std::vector<std::vector<double>> m(static_cast<std::size_t>(rows),
                                     std::vector<double>(static_cast<std::size_t>(cols)));
  for (auto& r : m)
    for (auto& v : r) {
      std::string tok;
      if (!(tokens >> tok)) throw std::invalid_argument("matrix file: too few entries");
      std::size_t pos = 0;
      v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument("matrix file: bad number '" + tok + "'");
    }
  std::string extra;
  if (tokens >> extra) throw std::invalid_argument("matrix file: trailing data '" + extra + "'");
  return m;
}

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_matrix(std::ostream& out, const std::vector<std::vector<double>>& m) {
  out << m.size() << ' ' << (m.empty() ? 0 : m.front().size()) << '\n';
  for (const auto& r : m) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? " " : "") << format_real(r[j]);
    out << '\n';
  }
}

inline PolicySet read_policy_set(std::istream& in) { return PolicySet::from_rows(read_matrix(in)); }

inline PolicySet read_policy_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open policy file " + path.string());
  return read_policy_set(in);
}

inline void write_policy_set(std::ostream& out, const PolicySet& theta) {
  std::vector<std::vector<double>> m;
  for (const auto& p : theta.policies()) m.push_back(p.vector());
  write_matrix(out, m);
}

}  // namespace medfb
