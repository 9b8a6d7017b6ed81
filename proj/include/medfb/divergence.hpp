#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Finite-alphabet f-divergences and mutual f-information.
//
// All logarithms are natural; information quantities are in nats.
// Boundary conventions: 0 f(0/0) = 0 and 0 f(a/0) = a f'(inf), so KL and
// chi-squared are +inf when p puts mass outside the support of q. Zero-mass
// terms are dropped by support filtering, never by flooring.

namespace medfb {

inline constexpr double kProbabilityTolerance = 1e-9;

/// Non-negative real extended with +infinity. Infinity is an explicit flag.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr ExtendedReal(double v) : value_(v) {  // NOLINT: implicit by design of arithmetic use
    if (!(v >= 0.0) || std::isinf(v))
      throw std::domain_error("ExtendedReal: finite non-negative value required");
  }

  static constexpr ExtendedReal infinity() {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_finite() const { return !infinite_; }
  constexpr bool is_infinite() const { return infinite_; }

  /// Finite value; throws when infinite.
  constexpr double value() const {
    if (infinite_) throw std::domain_error("ExtendedReal: value() on infinity");
    return value_;
  }

  /// IEEE view, for printing and plotting only.
  constexpr double to_double() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  constexpr ExtendedReal& operator+=(const ExtendedReal& o) {
    if (infinite_ || o.infinite_) {
      infinite_ = true;
      value_ = 0.0;
    } else {
      value_ += o.value_;
    }
    return *this;
  }
  friend constexpr ExtendedReal operator+(ExtendedReal a, const ExtendedReal& b) { return a += b; }

  /// Scaling by a non-negative weight. A zero weight annihilates infinity
  /// (zero-mass summands contribute nothing).
  friend constexpr ExtendedReal operator*(double w, const ExtendedReal& a) {
    if (!(w >= 0.0)) throw std::domain_error("ExtendedReal: negative scale");
    if (w == 0.0) return ExtendedReal{};
    if (a.infinite_) return infinity();
    return ExtendedReal{w * a.value_};
  }

  friend constexpr bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }
  friend constexpr std::partial_ordering operator<=>(const ExtendedReal& a, const ExtendedReal& b) {
    if (a.infinite_ && b.infinite_) return std::partial_ordering::equivalent;
    if (a.infinite_) return std::partial_ordering::greater;
    if (b.infinite_) return std::partial_ordering::less;
    return a.value_ <=> b.value_;
  }

  friend std::ostream& operator<<(std::ostream& os, const ExtendedReal& r) {
    if (r.infinite_) return os << "inf";
    return os << r.value_;
  }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// Probability vector. Construction validates non-negativity and renormalizes
/// when the sum is within kProbabilityTolerance of one; otherwise throws.
///
/// Used both for outcome distributions (policies, mixtures) and for weights
/// over policies.
class Distribution {
 public:
  Distribution() = default;

  explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("Distribution: empty probability vector");
    double sum = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0)
        throw std::invalid_argument("Distribution: entries must be finite and non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance)
      throw std::invalid_argument("Distribution: entries sum to " + std::to_string(sum) +
                                  ", expected 1");
    // Deviations within summation round-off are left alone so that a
    // written and re-read distribution keeps its exact entries.
    const double roundoff = 4.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(probs_.size());
    if (std::abs(sum - 1.0) > roundoff)
      for (double& p : probs_) p /= sum;
  }

  Distribution(std::initializer_list<double> probs) : Distribution(std::vector<double>(probs)) {}

  static Distribution uniform(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Distribution::uniform: n must be positive");
    return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static Distribution point_mass(std::size_t n, std::size_t i) {
    if (i >= n) throw std::out_of_range("Distribution::point_mass: index out of range");
    std::vector<double> v(n, 0.0);
    v[i] = 1.0;
    return Distribution(std::move(v));
  }

  /// Normalizes an arbitrary non-negative vector with positive sum.
  static Distribution normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0)
        throw std::invalid_argument("Distribution::normalized: invalid weight");
      sum += w;
    }
    if (!(sum > 0.0)) throw std::invalid_argument("Distribution::normalized: zero total weight");
    for (double& w : weights) w /= sum;
    return Distribution(std::move(weights));
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> span() const { return probs_; }
  const std::vector<double>& vector() const { return probs_; }
  auto begin() const { return probs_.begin(); }
  auto end() const { return probs_.end(); }

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  std::vector<double> probs_;
};

using OutcomeDistribution = Distribution;
using MixtureWeights = Distribution;

enum class DivergenceKind { total_variation, hellinger_sq, triangular, kl, chi_sq };

inline std::string to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::total_variation: return "total_variation";
    case DivergenceKind::hellinger_sq: return "hellinger_sq";
    case DivergenceKind::triangular: return "triangular";
    case DivergenceKind::kl: return "kl";
    case DivergenceKind::chi_sq: return "chi_sq";
  }
  return "unknown";
}

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
}

/// D_f over raw spans; callers guarantee validity.
inline ExtendedReal f_divergence_raw(DivergenceKind kind, std::span<const double> p,
                                     std::span<const double> q) {
  double acc = 0.0;
  switch (kind) {
    case DivergenceKind::total_variation:
      for (std::size_t x = 0; x < p.size(); ++x) acc += std::abs(p[x] - q[x]);
      return ExtendedReal{std::max(0.0, 0.5 * acc)};
    case DivergenceKind::hellinger_sq:
      for (std::size_t x = 0; x < p.size(); ++x) {
        const double d = std::sqrt(p[x]) - std::sqrt(q[x]);
        acc += d * d;
      }
      return ExtendedReal{std::max(0.0, 0.5 * acc)};
    case DivergenceKind::triangular:
      for (std::size_t x = 0; x < p.size(); ++x) {
        const double s = p[x] + q[x];
        if (s > 0.0) acc += (p[x] - q[x]) * (p[x] - q[x]) / s;
      }
      return ExtendedReal{acc};
    case DivergenceKind::kl:
      for (std::size_t x = 0; x < p.size(); ++x) {
        if (p[x] == 0.0) continue;
        if (q[x] == 0.0) return ExtendedReal::infinity();
        acc += p[x] * std::log(p[x] / q[x]);
      }
      // Sum of p log(p/q) is >= 0 exactly; clear rounding residue around p == q.
      return ExtendedReal{std::max(0.0, acc)};
    case DivergenceKind::chi_sq:
      for (std::size_t x = 0; x < p.size(); ++x) {
        if (q[x] == 0.0) {
          if (p[x] > 0.0) return ExtendedReal::infinity();
          continue;
        }
        const double d = p[x] - q[x];
        acc += d * d / q[x];
      }
      return ExtendedReal{acc};
  }
  throw std::invalid_argument("f_divergence: unknown divergence kind");
}

}  // namespace detail

/// D_f(p || q) for one of the five supported generators.
inline ExtendedReal f_divergence(DivergenceKind kind, const Distribution& p, const Distribution& q) {
  detail::require_same_size(p.size(), q.size(), "f_divergence");
  return detail::f_divergence_raw(kind, p.span(), q.span());
}

/// Vincze-Le Cam divergence of order r:
///   r (1 - r) sum_x (p(x) - q(x))^2 / (r p(x) + (1 - r) q(x)).
/// Equals the chi-squared mutual information of the two-row channel with
/// prior (r, 1 - r). Zero-denominator terms contribute zero.
inline double vincze_le_cam(double r, const Distribution& p, const Distribution& q) {
  detail::require_same_size(p.size(), q.size(), "vincze_le_cam");
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("vincze_le_cam: r must lie in [0,1]");
  if (r == 0.0 || r == 1.0) return 0.0;
  double acc = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    const double den = r * p[x] + (1.0 - r) * q[x];
    if (den > 0.0) acc += (p[x] - q[x]) * (p[x] - q[x]) / den;
  }
  return r * (1.0 - r) * acc;
}

/// sum_x tau(x) D_f(rows_p[x] || rows_q[x]); zero-mass rows are skipped.
inline ExtendedReal conditional_f_divergence(DivergenceKind kind,
                                             std::span<const Distribution> rows_p,
                                             std::span<const Distribution> rows_q,
                                             const Distribution& tau) {
  detail::require_same_size(rows_p.size(), rows_q.size(), "conditional_f_divergence");
  detail::require_same_size(rows_p.size(), tau.size(), "conditional_f_divergence");
  ExtendedReal total;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (tau[i] == 0.0) continue;
    total += tau[i] * f_divergence(kind, rows_p[i], rows_q[i]);
  }
  return total;
}

/// Mutual f-information I_f(tau, rows): divergence between the joint and the
/// product of marginals, sum_x tau(x) D_f(row_x || sum_x' tau(x') row_x').
inline ExtendedReal mutual_f_information(DivergenceKind kind, const Distribution& tau,
                                         std::span<const Distribution> rows) {
  detail::require_same_size(rows.size(), tau.size(), "mutual_f_information");
  if (rows.empty()) throw std::invalid_argument("mutual_f_information: no rows");
  const std::size_t k = rows.front().size();
  std::vector<double> marginal(k, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail::require_same_size(rows[i].size(), k, "mutual_f_information");
    for (std::size_t x = 0; x < k; ++x) marginal[x] += tau[i] * rows[i][x];
  }
  ExtendedReal total;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (tau[i] == 0.0) continue;
    total += tau[i] * detail::f_divergence_raw(kind, rows[i].span(), marginal);
  }
  return total;
}

/// Shannon entropy in nats.
inline double shannon_entropy(const Distribution& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return std::max(0.0, h);
}

/// KL divergence between Bernoulli(a) and Bernoulli(b).
inline ExtendedReal kl_bernoulli(double a, double b) {
  if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0))
    throw std::invalid_argument("kl_bernoulli: means must lie in [0,1]");
  const double p[2] = {a, 1.0 - a};
  const double q[2] = {b, 1.0 - b};
  return detail::f_divergence_raw(DivergenceKind::kl, p, q);
}

}  // namespace medfb
