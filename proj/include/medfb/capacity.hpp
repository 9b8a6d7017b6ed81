#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "medfb/divergence.hpp"
#include "medfb/policy_set.hpp"

// Chi-squared policy-set capacity C(Theta) = sup_tau Q_tau(Theta) and the
// KL capacity (information radius) via Blahut-Arimoto.

namespace medfb {

// ---------------------------------------------------------------------------
// Q_tau and its gradient
// ---------------------------------------------------------------------------

namespace detail {

/// Q over raw weights that already sum to one. Written as
/// sum_x (sum_i tau_i theta_i(x)^2) / psi(x) - 1.
inline double q_tau_raw(std::span<const double> tau, const PolicySet& theta) {
  double total = 0.0;
  for (std::size_t x = 0; x < theta.num_outcomes(); ++x) {
    double psi = 0.0, second = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
      const double v = theta[i][x];
      psi += tau[i] * v;
      second += tau[i] * v * v;
    }
    if (psi > 0.0) total += second / psi;
  }
  return std::max(0.0, total - 1.0);
}

}  // namespace detail

/// Chi-squared mutual information between a tau-drawn policy and its outcome.
inline double q_tau(const Distribution& tau, const PolicySet& theta) {
  detail::require_same_size(tau.size(), theta.num_policies(), "q_tau");
  return detail::q_tau_raw(tau.span(), theta);
}

/// Partial derivatives of sum_x A(x)/psi(x) with A = sum tau theta^2:
///   d_i = sum_x theta_i(x)^2 / psi(x) - A(x) theta_i(x) / psi(x)^2.
/// The function is homogeneous of degree 0, so sum_i tau_i d_i = 0.
inline std::vector<double> q_tau_gradient(std::span<const double> tau, const PolicySet& theta) {
  detail::require_same_size(tau.size(), theta.num_policies(), "q_tau_gradient");
  const std::size_t n = tau.size(), k = theta.num_outcomes();
  std::vector<double> grad(n, 0.0);
  for (std::size_t x = 0; x < k; ++x) {
    double psi = 0.0, second = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = theta[i][x];
      psi += tau[i] * v;
      second += tau[i] * v * v;
    }
    if (psi <= 0.0) continue;
    const double inv = 1.0 / psi;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = theta[i][x];
      grad[i] += v * v * inv - second * v * inv * inv;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// C(Theta) for a tagged structured family.
inline double capacity_closed_form(const FamilyDescriptor& family) {
  return std::visit(
      [](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, EpsilonGreedyFamily>) {
          if (f.n < 2 || !(f.epsilon >= 0.0 && f.epsilon <= 1.0))
            throw std::invalid_argument("capacity_closed_form: bad epsilon_greedy parameters");
          return f.epsilon * f.epsilon * static_cast<double>(f.n - 1);
        } else if constexpr (std::is_same_v<F, UniformSupportedFamily>) {
          if (f.m < 1 || f.m > f.k)
            throw std::invalid_argument("capacity_closed_form: bad uniform_supported parameters");
          return static_cast<double>(f.k) / static_cast<double>(f.m) - 1.0;
        } else {
          if (f.m < 1 || f.q < 2)
            throw std::invalid_argument("capacity_closed_form: bad multitask parameters");
          return static_cast<double>(f.q) - 1.0;
        }
      },
      family);
}

// ---------------------------------------------------------------------------
// Two-policy capacity
// ---------------------------------------------------------------------------

struct TwoPolicyResult {
  double value = 0.0;
  double r = 0.5;  ///< weight on the first policy at the reported value
};

/// Golden-section maximisation of the Vincze-Le Cam divergence over r. Only
/// interior points are evaluated: q_r can jump to 0 at the endpoints, and the
/// supremum need not be attained.
inline TwoPolicyResult two_policy_capacity_detail(const Distribution& p, const Distribution& q,
                                                  double tol = 1e-10) {
  detail::require_same_size(p.size(), q.size(), "two_policy_capacity");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = 1.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = vincze_le_cam(c, p, q), fd = vincze_le_cam(d, p, q);
  TwoPolicyResult best{vincze_le_cam(0.5, p, q), 0.5};
  auto consider = [&](double r, double v) {
    if (v > best.value) best = {v, r};
  };
  consider(c, fc);
  consider(d, fd);
  const double step_tol = std::max(tol, 1e-15);
  while (b - a > step_tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = vincze_le_cam(c, p, q);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = vincze_le_cam(d, p, q);
      consider(d, fd);
    }
  }
  const double mid = 0.5 * (a + b);
  if (mid > 0.0 && mid < 1.0) consider(mid, vincze_le_cam(mid, p, q));
  return best;
}

inline double two_policy_capacity(const Distribution& p, const Distribution& q, double tol = 1e-10) {
  return two_policy_capacity_detail(p, q, tol).value;
}

// ---------------------------------------------------------------------------
// General chi-squared capacity bracket
// ---------------------------------------------------------------------------

struct CapacityBracket {
  double lower = 0.0;
  double upper = 0.0;
  Distribution argmax_tau;
  bool certified_exact = false;
};

struct ChiCapacityOptions {
  double tol = 1e-6;
  std::size_t budget = 4000;   ///< ascent iterations per start
  double step_scale = 0.1;     ///< step at iteration k is step_scale / sqrt(k)
  double floor = 1e-12;        ///< minimum weight kept during ascent
  double stationarity = 1e-12; ///< stop a start when max_i grad_i falls below this
};

/// Certified upper bound min{V, d_chi2, N - 1, K - 1}.
inline double capacity_upper_bound(const PolicySet& theta) {
  double upper = std::min(static_cast<double>(theta.num_policies() - 1),
                          static_cast<double>(theta.num_outcomes() - 1));
  upper = std::min(upper, s_and_v(theta).v);
  const auto d = chi_diameter(theta);
  if (d.is_finite()) upper = std::min(upper, d.value());
  return upper;
}

namespace detail {

struct AscentResult {
  double value = 0.0;
  std::vector<double> tau;
};

inline AscentResult mirror_ascent(std::vector<double> tau, const PolicySet& theta,
                                  const ChiCapacityOptions& opt) {
  AscentResult best{q_tau_raw(tau, theta), tau};
  const std::size_t n = tau.size();
  std::vector<double> logits(n);
  for (std::size_t k = 1; k <= opt.budget; ++k) {
    const auto grad = q_tau_gradient(tau, theta);
    const double gmax = *std::max_element(grad.begin(), grad.end());
    if (gmax <= opt.stationarity) break;
    const double step = opt.step_scale / std::sqrt(static_cast<double>(k));
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = std::log(tau[i]) + step * grad[i];
      top = std::max(top, logits[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += tau[i] = std::exp(logits[i] - top);
    double floored = 0.0;
    for (std::size_t i = 0; i < n; ++i) floored += tau[i] = std::max(tau[i] / sum, opt.floor);
    for (auto& w : tau) w /= floored;
    const double v = q_tau_raw(tau, theta);
    if (v > best.value) best = {v, tau};
  }
  return best;
}

}  // namespace detail

/// Bracket on C(Theta). Tagged families return their closed form with a
/// uniform maximiser. Two-policy sets use golden section on the Vincze-Le Cam
/// divergence; all other sets use multi-start entropic mirror ascent.
inline CapacityBracket chi_capacity(const PolicySet& theta, const ChiCapacityOptions& opt = {}) {
  const std::size_t n = theta.num_policies();
  if (theta.family()) {
    const double c = capacity_closed_form(*theta.family());
    return {c, c, Distribution::uniform(n), true};
  }
  CapacityBracket out;
  out.upper = capacity_upper_bound(theta);
  if (n == 2) {
    const auto r = two_policy_capacity_detail(theta[0], theta[1], std::min(opt.tol, 1e-10));
    out.lower = r.value;
    out.argmax_tau = Distribution({r.r, 1.0 - r.r});
  } else {
    std::vector<std::vector<double>> starts;
    starts.emplace_back(n, 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(n, 0.1 / static_cast<double>(n));
      s[i] += 0.9;
      starts.push_back(std::move(s));
    }
    detail::AscentResult best{-1.0, {}};
    for (const auto& s : starts) {
      auto r = detail::mirror_ascent(s, theta, opt);
      if (r.value > best.value) best = std::move(r);  // strict: ties keep the earlier start
    }
    out.lower = best.value;
    out.argmax_tau = Distribution::normalized(best.tau);
  }
  out.lower = std::min(out.lower, out.upper);
  out.certified_exact = out.upper - out.lower <= opt.tol;
  return out;
}

// ---------------------------------------------------------------------------
// KL capacity
// ---------------------------------------------------------------------------

struct KlCapacityResult {
  double value = 0.0;
  Distribution center;
  Distribution prior;  ///< Blahut-Arimoto weights; mixture(prior, theta) == center
  std::size_t iterations = 0;
  double gap = 0.0;
};

/// Blahut-Arimoto from the uniform prior. Terminates when
/// max_theta KL(theta || rho) - I_KL(tau) <= tol or after max_iter rounds.
inline KlCapacityResult kl_capacity(const PolicySet& theta, double tol = 1e-9,
                                    std::size_t max_iter = 100'000) {
  const std::size_t n = theta.num_policies();
  std::vector<double> tau(n, 1.0 / static_cast<double>(n));
  std::vector<double> kl(n);
  KlCapacityResult res;
  for (std::size_t it = 0;; ++it) {
    const auto rho = mixture_raw(tau, theta);
    double info = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // rho covers every policy with tau > 0, and tau stays positive.
      kl[i] = detail::f_divergence_raw(DivergenceKind::kl, theta[i].span(), rho).value();
      info += tau[i] * kl[i];
      worst = std::max(worst, kl[i]);
    }
    res.value = info;
    res.gap = std::max(0.0, worst - info);
    res.iterations = it;
    if (res.gap <= tol || it >= max_iter) {
      res.center = Distribution::normalized(rho);
      res.prior = Distribution::normalized(tau);
      return res;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += tau[i] *= std::exp(kl[i] - worst);
    for (auto& w : tau) w = std::max(w / sum, 1e-300);
  }
}

}  // namespace medfb
