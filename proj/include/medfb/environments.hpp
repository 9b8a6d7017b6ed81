#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "medfb/divergence.hpp"
#include "medfb/policy_set.hpp"
#include "medfb/rng.hpp"

namespace medfb {

using LossMap = std::vector<double>;

enum class FeedbackMode { mediator, linear, full };

inline std::string to_string(FeedbackMode m) {
  switch (m) {
    case FeedbackMode::mediator: return "mediator";
    case FeedbackMode::linear: return "linear";
    case FeedbackMode::full: return "full";
  }
  return "unknown";
}

inline FeedbackMode parse_feedback_mode(const std::string& s) {
  if (s == "mediator") return FeedbackMode::mediator;
  if (s == "linear") return FeedbackMode::linear;
  if (s == "full") return FeedbackMode::full;
  throw std::invalid_argument("unknown feedback mode '" + s + "'");
}

inline double clip01(double a) { return std::max(std::min(a, 1.0), 0.0); }

namespace detail {

inline void require_unit_interval(std::span<const double> v, const char* who) {
  for (double a : v)
    if (!(a >= 0.0 && a <= 1.0))
      throw std::invalid_argument(std::string(who) + ": values must lie in [0,1]");
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace detail

/// E[clip01(a + Z)] for Z ~ N(0, sigma^2).
inline double expected_clipped_normal(double a, double sigma) {
  if (sigma == 0.0) return clip01(a);
  const double lo = (0.0 - a) / sigma, hi = (1.0 - a) / sigma;
  const double inside = a * (detail::normal_cdf(hi) - detail::normal_cdf(lo)) +
                        sigma * (detail::normal_pdf(lo) - detail::normal_pdf(hi));
  return inside + (1.0 - detail::normal_cdf(hi));
}

// ---------------------------------------------------------------------------
// Corruption
// ---------------------------------------------------------------------------

/// Canonical adversary: c_t = per_round while the budget lasts, then the
/// remainder, then 0. The shift on outcome x is c_t theta*(x) / max theta*,
/// applied upward and clamped to [0,1].
struct CorruptionSchedule {
  double per_round = 0.0;
  double budget = 0.0;

  double amount(std::size_t t) const {
    const double spent = static_cast<double>(t - 1) * per_round;
    return std::min(per_round, std::max(0.0, budget - spent));
  }
};

// ---------------------------------------------------------------------------
// Environments
// ---------------------------------------------------------------------------

enum class EnvironmentKind { adversarial, bernoulli, corrupted, linear_gaussian, oblivious_uniform };

inline std::string to_string(EnvironmentKind k) {
  switch (k) {
    case EnvironmentKind::adversarial: return "adversarial";
    case EnvironmentKind::bernoulli: return "bernoulli";
    case EnvironmentKind::corrupted: return "corrupted";
    case EnvironmentKind::linear_gaussian: return "linear_gaussian";
    case EnvironmentKind::oblivious_uniform: return "uniform";
  }
  return "unknown";
}

/// Loss-generating process over K outcomes.
class Environment {
 public:
  static Environment adversarial(std::vector<LossMap> maps) {
    if (maps.empty()) throw std::invalid_argument("adversarial environment: empty sequence");
    const std::size_t k = maps.front().size();
    for (const auto& m : maps) {
      detail::require_same_size(m.size(), k, "adversarial environment");
      detail::require_unit_interval(m, "adversarial environment");
    }
    Environment e(EnvironmentKind::adversarial, k);
    e.maps_ = std::move(maps);
    e.horizon_ = e.maps_.size();
    return e;
  }

  static Environment bernoulli(std::vector<double> mu) {
    detail::require_unit_interval(mu, "bernoulli environment");
    Environment e(EnvironmentKind::bernoulli, mu.size());
    e.mu_ = std::move(mu);
    return e;
  }

  /// Bernoulli draws shifted toward 1 on the support of `optimal`.
  static Environment corrupted(std::vector<double> mu, CorruptionSchedule schedule,
                               const Distribution& optimal) {
    detail::require_unit_interval(mu, "corrupted environment");
    detail::require_same_size(mu.size(), optimal.size(), "corrupted environment");
    if (!(schedule.per_round >= 0.0 && schedule.budget >= 0.0))
      throw std::invalid_argument("corrupted environment: corruption must be non-negative");
    Environment e(EnvironmentKind::corrupted, mu.size());
    e.mu_ = std::move(mu);
    e.corruption_ = schedule;
    const double top = *std::max_element(optimal.begin(), optimal.end());
    e.direction_.resize(optimal.size());
    for (std::size_t x = 0; x < optimal.size(); ++x) e.direction_[x] = optimal[x] / top;
    return e;
  }

  /// mu + Z 1 with a shared Z ~ N(0, sigma^2).
  static Environment linear_gaussian(std::vector<double> mu, double sigma, bool clipped) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("linear_gaussian environment: sigma < 0");
    for (double m : mu)
      if (!std::isfinite(m)) throw std::invalid_argument("linear_gaussian environment: bad mean");
    if (clipped) detail::require_unit_interval(mu, "linear_gaussian environment");
    Environment e(EnvironmentKind::linear_gaussian, mu.size());
    e.mu_ = std::move(mu);
    e.sigma_ = sigma;
    e.clipped_ = clipped;
    return e;
  }

  /// Independent Uniform[0,1] losses per outcome and round.
  static Environment oblivious_uniform(std::size_t k) {
    if (k < 1) throw std::invalid_argument("uniform environment: K must be positive");
    return Environment(EnvironmentKind::oblivious_uniform, k);
  }

  EnvironmentKind kind() const { return kind_; }
  std::size_t num_outcomes() const { return k_; }
  /// 0 means unbounded.
  std::size_t horizon() const { return horizon_; }
  const std::vector<double>& means() const { return mu_; }
  double sigma() const { return sigma_; }
  bool clipped() const { return clipped_; }
  const CorruptionSchedule& corruption() const { return corruption_; }

  /// True when the comparator uses means rather than realised maps.
  bool is_stochastic() const {
    return kind_ == EnvironmentKind::bernoulli || kind_ == EnvironmentKind::corrupted ||
           kind_ == EnvironmentKind::linear_gaussian;
  }

  /// Draws the loss map of round t (1-based).
  LossMap sample_round(std::size_t t, Rng& rng) const {
    check_round(t);
    LossMap out(k_);
    switch (kind_) {
      case EnvironmentKind::adversarial: return maps_[t - 1];
      case EnvironmentKind::bernoulli:
        for (std::size_t x = 0; x < k_; ++x) out[x] = uniform01(rng) < mu_[x] ? 1.0 : 0.0;
        return out;
      case EnvironmentKind::corrupted: {
        const double c = corruption_.amount(t);
        for (std::size_t x = 0; x < k_; ++x) {
          const double base = uniform01(rng) < mu_[x] ? 1.0 : 0.0;
          out[x] = clip01(base + c * direction_[x]);
        }
        return out;
      }
      case EnvironmentKind::linear_gaussian: {
        const double z = sigma_ > 0.0 ? std::normal_distribution<double>(0.0, sigma_)(rng) : 0.0;
        for (std::size_t x = 0; x < k_; ++x) out[x] = clipped_ ? clip01(mu_[x] + z) : mu_[x] + z;
        return out;
      }
      case EnvironmentKind::oblivious_uniform:
        for (auto& v : out) v = uniform01(rng);
        return out;
    }
    return out;
  }

  /// Conditional mean of round t's map. For adversarial kinds pass the
  /// realised map; it is returned unchanged.
  LossMap expected_map(std::size_t t, const LossMap& realized) const {
    check_round(t);
    switch (kind_) {
      case EnvironmentKind::bernoulli: return mu_;
      case EnvironmentKind::corrupted: {
        const double c = corruption_.amount(t);
        LossMap out(k_);
        for (std::size_t x = 0; x < k_; ++x) {
          const double s = std::min(1.0, c * direction_[x]);
          out[x] = mu_[x] + (1.0 - mu_[x]) * s;
        }
        return out;
      }
      case EnvironmentKind::linear_gaussian: {
        if (!clipped_) return mu_;
        LossMap out(k_);
        for (std::size_t x = 0; x < k_; ++x) out[x] = expected_clipped_normal(mu_[x], sigma_);
        return out;
      }
      default: return realized;
    }
  }

 private:
  Environment(EnvironmentKind kind, std::size_t k) : kind_(kind), k_(k) {
    if (k < 1) throw std::invalid_argument("environment: no outcomes");
  }
  void check_round(std::size_t t) const {
    if (t < 1 || (horizon_ != 0 && t > horizon_))
      throw std::out_of_range("environment: round " + std::to_string(t) + " out of range");
  }

  EnvironmentKind kind_;
  std::size_t k_;
  std::size_t horizon_ = 0;
  std::vector<LossMap> maps_;
  std::vector<double> mu_;
  CorruptionSchedule corruption_;
  std::vector<double> direction_;
  double sigma_ = 0.0;
  bool clipped_ = false;
};

// ---------------------------------------------------------------------------
// Lower-bound constructions
// ---------------------------------------------------------------------------

/// 8 log(4/3).
inline const double kLowerBoundConstant = 8.0 * std::log(4.0 / 3.0);

/// A policy set with a family of mean vectors. Environment 0 is the
/// all-one-half reference; environment i >= 1 is the one in which policy i-1
/// is optimal. Means are generated on demand.
struct LowerBoundInstance {
  PolicySet policy_set;
  double gap = 0.0;
  double constant_c = kLowerBoundConstant;
  double sigma = 0.0;  ///< noise level (linear-Gaussian constructions only)
  FeedbackMode feedback = FeedbackMode::mediator;
  bool clipped = false;
  std::size_t num_environments = 0;
  std::function<std::vector<double>(std::size_t)> environment_at;
  /// Multitask only: mean vector of policy `index` with section `section` set to 1/2.
  std::function<std::vector<double>(std::size_t, std::size_t)> section_zeroed;

  std::vector<double> environment(std::size_t i) const {
    if (i >= num_environments) throw std::out_of_range("LowerBoundInstance: environment index");
    return environment_at(i);
  }
};

inline LowerBoundInstance lb_two_policy(const Distribution& p, const Distribution& q,
                                        std::size_t horizon) {
  detail::require_same_size(p.size(), q.size(), "lb_two_policy");
  PolicySet set({p, q});
  set.require_full_coverage("lb_two_policy");
  const double h2 = f_divergence(DivergenceKind::hellinger_sq, p, q).value();
  if (!(h2 > 0.0)) throw std::invalid_argument("lb_two_policy: policies must differ");
  const double threshold = 1.0 / (kLowerBoundConstant * h2);
  if (static_cast<double>(horizon) < threshold)
    throw std::invalid_argument("lb_two_policy: horizon below 1/(8 log(4/3) H^2) = " +
                                std::to_string(threshold));
  const double gap = 1.0 / (4.0 * std::sqrt(kLowerBoundConstant * h2 * static_cast<double>(horizon)));
  const std::size_t k = p.size();
  std::vector<double> mu1(k), mu2(k);
  for (std::size_t x = 0; x < k; ++x) {
    const double a = std::sqrt(p[x]), b = std::sqrt(q[x]);
    const double ratio = (a - b) / (a + b);  // a + b > 0 by coverage
    mu1[x] = 0.5 - gap * ratio;
    mu2[x] = 0.5 + gap * ratio;
  }
  LowerBoundInstance inst;
  inst.policy_set = std::move(set);
  inst.gap = gap;
  inst.num_environments = 3;
  inst.environment_at = [k, mu1, mu2](std::size_t i) {
    if (i == 0) return std::vector<double>(k, 0.5);
    return i == 1 ? mu1 : mu2;
  };
  return inst;
}

inline LowerBoundInstance lb_epsilon_greedy(std::size_t n, double epsilon, std::size_t horizon) {
  auto set = make_epsilon_greedy(n, epsilon);
  set.require_full_coverage("lb_epsilon_greedy");
  const double threshold = static_cast<double>(n) / (4.0 * std::log(4.0 / 3.0));
  if (static_cast<double>(horizon) < threshold)
    throw std::invalid_argument("lb_epsilon_greedy: horizon below N/(4 log(4/3)) = " +
                                std::to_string(threshold));
  const double gap = 0.25 * std::sqrt(2.0 * static_cast<double>(n) /
                                      (kLowerBoundConstant * static_cast<double>(horizon)));
  LowerBoundInstance inst;
  inst.policy_set = std::move(set);
  inst.gap = gap;
  inst.num_environments = n + 1;
  inst.environment_at = [n, gap](std::size_t i) {
    std::vector<double> mu(n, 0.5);
    if (i > 0) mu[i - 1] -= gap;
    return mu;
  };
  return inst;
}

inline LowerBoundInstance lb_multitask(std::size_t m, std::size_t q, std::size_t horizon,
                                       std::size_t cap = kDefaultPolicyCap) {
  auto set = make_multitask(m, q, cap);
  const std::size_t k = m * q, n = set.num_policies();
  const double threshold = static_cast<double>(k) / (4.0 * std::log(4.0 / 3.0));
  if (static_cast<double>(horizon) < threshold)
    throw std::invalid_argument("lb_multitask: horizon below K/(4 log(4/3)) = " +
                                std::to_string(threshold));
  const double gap = 0.25 * std::sqrt(2.0 * static_cast<double>(k) /
                                      (kLowerBoundConstant * static_cast<double>(horizon)));
  auto policy_means = [m, q, k, gap](std::size_t index, std::size_t skip) {
    std::vector<double> mu(k, 0.5);
    for (std::size_t i = 0; i < m; ++i)
      if (i != skip) mu[i * q + multitask_choice(index, i, m, q)] -= gap;
    return mu;
  };
  LowerBoundInstance inst;
  inst.policy_set = std::move(set);
  inst.gap = gap;
  inst.num_environments = n + 1;
  inst.environment_at = [policy_means, k](std::size_t i) {
    if (i == 0) return std::vector<double>(k, 0.5);
    return policy_means(i - 1, static_cast<std::size_t>(-1));
  };
  inst.section_zeroed = [policy_means, n, m](std::size_t index, std::size_t section) {
    if (index >= n || section >= m) throw std::out_of_range("lb_multitask: section_zeroed index");
    return policy_means(index, section);
  };
  return inst;
}

/// 1 / (4 sqrt(2 log(16 T))): noise level of the clipped construction.
inline double clipped_linear_sigma(std::size_t horizon) {
  return 1.0 / (4.0 * std::sqrt(2.0 * std::log(16.0 * static_cast<double>(horizon))));
}

/// Linear-feedback construction over epsilon-greedy policies. When clipped,
/// sigma is fixed by the horizon and the `sigma` argument is ignored.
inline LowerBoundInstance lb_linear_gaussian(std::size_t n, double epsilon, std::size_t horizon,
                                             bool clipped, double sigma = 1.0) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("lb_linear_gaussian: epsilon must be positive");
  auto set = make_epsilon_greedy(n, epsilon);
  const double nn = static_cast<double>(n), tt = static_cast<double>(horizon);
  if (clipped) {
    sigma = clipped_linear_sigma(horizon);
    const double threshold = nn / (8.0 * epsilon * epsilon);
    if (tt < threshold)
      throw std::invalid_argument("lb_linear_gaussian: horizon below N/(8 eps^2) = " +
                                  std::to_string(threshold));
  } else {
    if (!(sigma > 0.0)) throw std::invalid_argument("lb_linear_gaussian: sigma must be positive");
    const double threshold = sigma * sigma * nn / (epsilon * epsilon);
    if (tt < threshold)
      throw std::invalid_argument("lb_linear_gaussian: horizon below sigma^2 N / eps^2 = " +
                                  std::to_string(threshold));
  }
  const double gap = sigma / (2.0 * epsilon) * std::sqrt(nn / tt);
  LowerBoundInstance inst;
  inst.policy_set = std::move(set);
  inst.gap = gap;
  inst.sigma = sigma;
  inst.feedback = FeedbackMode::linear;
  inst.clipped = clipped;
  inst.num_environments = n + 1;
  inst.environment_at = [n, gap, epsilon, nn](std::size_t i) {
    std::vector<double> mu(n, 0.5);
    if (i == 0) return mu;
    for (std::size_t x = 0; x < n; ++x)
      mu[x] = 0.5 + gap * ((1.0 - epsilon) / nn - (x == i - 1 ? 1.0 : 0.0));
    return mu;
  };
  return inst;
}

// ---------------------------------------------------------------------------
// KL between induced history distributions
// ---------------------------------------------------------------------------

/// sum_theta N(theta) sum_x theta(x) kl(mu(x), mu'(x)).
inline ExtendedReal history_kl(std::span<const double> visit_counts, std::span<const double> mu,
                               std::span<const double> mu_prime, const PolicySet& theta) {
  detail::require_same_size(visit_counts.size(), theta.num_policies(), "history_kl");
  detail::require_same_size(mu.size(), theta.num_outcomes(), "history_kl");
  detail::require_same_size(mu_prime.size(), theta.num_outcomes(), "history_kl");
  std::vector<ExtendedReal> per_outcome;
  per_outcome.reserve(mu.size());
  for (std::size_t x = 0; x < mu.size(); ++x) per_outcome.push_back(kl_bernoulli(mu[x], mu_prime[x]));
  ExtendedReal total;
  for (std::size_t i = 0; i < visit_counts.size(); ++i) {
    if (!(visit_counts[i] >= 0.0)) throw std::invalid_argument("history_kl: negative visit count");
    for (std::size_t x = 0; x < mu.size(); ++x)
      total += (visit_counts[i] * theta[i][x]) * per_outcome[x];
  }
  return total;
}

struct HistoryStep {
  std::size_t policy = 0;
  std::size_t outcome = 0;
  int loss = 0;  ///< Bernoulli loss, 0 or 1
};

/// Maps the history so far to the next round's distribution over policies.
using HistoryStrategy = std::function<std::vector<double>(const std::vector<HistoryStep>&)>;

struct HistoryEnumeration {
  ExtendedReal kl;
  std::vector<double> expected_counts;  ///< under mu
};

/// Exact KL(P_mu || P_mu') over all histories of length T, together with the
/// expected visit counts under mu. Only for (N K 2)^T <= 1e5.
inline HistoryEnumeration enumerate_history_kl(const HistoryStrategy& strategy,
                                               std::span<const double> mu,
                                               std::span<const double> mu_prime,
                                               const PolicySet& theta, std::size_t horizon) {
  const std::size_t n = theta.num_policies(), k = theta.num_outcomes();
  detail::require_same_size(mu.size(), k, "brute_force_history_kl");
  detail::require_same_size(mu_prime.size(), k, "brute_force_history_kl");
  detail::require_unit_interval(mu, "brute_force_history_kl");
  detail::require_unit_interval(mu_prime, "brute_force_history_kl");
  double size = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) size *= static_cast<double>(n * k * 2);
  if (size > 1e5) throw std::invalid_argument("brute_force_history_kl: too many histories");

  HistoryEnumeration out{ExtendedReal{}, std::vector<double>(n, 0.0)};
  double acc = 0.0;
  bool infinite = false;
  std::vector<HistoryStep> hist;
  std::function<void(double, double)> recurse = [&](double prob, double prob_prime) {
    if (hist.size() == horizon) {
      if (prob <= 0.0) return;
      if (prob_prime <= 0.0) {
        infinite = true;
        return;
      }
      acc += prob * std::log(prob / prob_prime);
      return;
    }
    const auto pi = strategy(hist);
    detail::require_same_size(pi.size(), n, "brute_force_history_kl strategy");
    for (std::size_t i = 0; i < n; ++i) {
      if (pi[i] <= 0.0) continue;
      out.expected_counts[i] += prob * pi[i];
      for (std::size_t x = 0; x < k; ++x) {
        const double px = theta[i][x];
        if (px <= 0.0) continue;
        for (int l = 0; l <= 1; ++l) {
          const double b = l ? mu[x] : 1.0 - mu[x];
          const double b2 = l ? mu_prime[x] : 1.0 - mu_prime[x];
          hist.push_back({i, x, l});
          recurse(prob * pi[i] * px * b, prob_prime * pi[i] * px * b2);
          hist.pop_back();
        }
      }
    }
  };
  recurse(1.0, 1.0);
  out.kl = infinite ? ExtendedReal::infinity() : ExtendedReal{std::max(0.0, acc)};
  return out;
}

inline ExtendedReal brute_force_history_kl(const HistoryStrategy& strategy, std::span<const double> mu,
                                           std::span<const double> mu_prime, const PolicySet& theta,
                                           std::size_t horizon) {
  return enumerate_history_kl(strategy, mu, mu_prime, theta, horizon).kl;
}

}  // namespace medfb
