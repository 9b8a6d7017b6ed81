#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medfb/capacity.hpp"
#include "medfb/divergence.hpp"
#include "medfb/policy_set.hpp"

namespace medfb {

// ---------------------------------------------------------------------------
// Learning-rate schedules
// ---------------------------------------------------------------------------

/// min{1, sqrt(log n / (e c t))}; 1 when c == 0.
inline double rate_fixed_capacity(std::size_t t, double c, std::size_t n) {
  if (t < 1) throw std::invalid_argument("rate_fixed_capacity: t must be at least 1");
  if (c < 0.0) throw std::invalid_argument("rate_fixed_capacity: negative capacity");
  if (c == 0.0) return 1.0;
  const double v = std::sqrt(std::log(static_cast<double>(n)) /
                             (std::numbers::e * c * static_cast<double>(t)));
  return std::min(1.0, v);
}

/// sqrt(log n / (log n + e (z_prev + j_t))).
inline double rate_adaptive(double z_prev, double j_t, std::size_t n) {
  if (z_prev < 0.0 || j_t < 0.0) throw std::invalid_argument("rate_adaptive: negative accumulator");
  const double ln = std::log(static_cast<double>(n));
  return std::sqrt(ln / (ln + std::numbers::e * (z_prev + j_t)));
}

/// gamma = sqrt(e c log(eT) / (2 log n)).
inline double bobw_gamma(double c, std::size_t horizon, std::size_t n) {
  if (horizon < 1) throw std::invalid_argument("bobw_gamma: horizon must be at least 1");
  const double ln = std::log(static_cast<double>(n));
  return std::sqrt(std::numbers::e * c * std::log(std::numbers::e * static_cast<double>(horizon)) /
                   (2.0 * ln));
}

inline double rate_bobw(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("rate_bobw: beta must be positive");
  return std::min(1.0, 1.0 / beta);
}

/// beta + gamma / sqrt(1 + entropy_accum / log n).
inline double bobw_advance(double beta, double gamma, double entropy_accum, std::size_t n) {
  return beta + gamma / std::sqrt(1.0 + entropy_accum / std::log(static_cast<double>(n)));
}

/// sqrt(log n / (e c T)): the horizon-tuned constant rate.
inline double rate_tuned_constant(double c, std::size_t horizon, std::size_t n) {
  if (!(c > 0.0)) throw std::invalid_argument("rate_tuned_constant: capacity must be positive");
  return std::sqrt(std::log(static_cast<double>(n)) /
                   (std::numbers::e * c * static_cast<double>(horizon)));
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

namespace detail {
inline void require_loss(double loss, const char* who) {
  if (!(loss >= 0.0 && loss <= 1.0))
    throw std::invalid_argument(std::string(who) + ": loss must lie in [0,1]");
}
}  // namespace detail

/// theta(x) loss / psi(x).
inline double loss_estimate(const Distribution& theta_row, std::size_t x, double observed_loss,
                            const Distribution& psi) {
  if (x >= theta_row.size() || x >= psi.size()) throw std::out_of_range("loss_estimate: outcome");
  if (!(psi[x] > 0.0)) throw std::logic_error("loss_estimate: observed outcome has zero mixture mass");
  return theta_row[x] * observed_loss / psi[x];
}

/// (theta(x) - psi(x)) loss / psi(x); estimates the loss shifted by the
/// play-distribution mean.
inline double shifted_estimate(const Distribution& theta_row, std::size_t x, double observed_loss,
                               const Distribution& psi) {
  if (x >= theta_row.size() || x >= psi.size()) throw std::out_of_range("shifted_estimate: outcome");
  if (!(psi[x] > 0.0))
    throw std::logic_error("shifted_estimate: observed outcome has zero mixture mass");
  return (theta_row[x] - psi[x]) * observed_loss / psi[x];
}

/// p(i) proportional to exp(-eta cum(i)), with max-subtraction.
inline Distribution softmax_weights(std::span<const double> cum, double eta) {
  if (cum.empty()) throw std::invalid_argument("softmax_weights: empty input");
  const double low = *std::min_element(cum.begin(), cum.end());
  std::vector<double> w(cum.size());
  for (std::size_t i = 0; i < cum.size(); ++i) w[i] = std::exp(-eta * (cum[i] - low));
  return Distribution::normalized(std::move(w));
}

// ---------------------------------------------------------------------------
// EXP4
// ---------------------------------------------------------------------------

enum class ScheduleKind { fixed_capacity, adaptive, bobw, constant };

inline std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::fixed_capacity: return "fixed_capacity";
    case ScheduleKind::adaptive: return "adaptive";
    case ScheduleKind::bobw: return "bobw";
    case ScheduleKind::constant: return "constant";
  }
  return "unknown";
}

/// EXP4 in FTRL form over N policies. Advice may change every round.
///
/// Per round: begin_round(advice) returns p_t; the caller samples the policy
/// and outcome and reports them through update().
class Exp4 {
 public:
  static Exp4 fixed_capacity(std::size_t n, double capacity) {
    if (capacity < 0.0) throw std::invalid_argument("Exp4: negative capacity");
    Exp4 e(n, ScheduleKind::fixed_capacity);
    e.capacity_ = capacity;
    return e;
  }
  static Exp4 adaptive(std::size_t n) { return Exp4(n, ScheduleKind::adaptive); }
  static Exp4 bobw(std::size_t n, double capacity, std::size_t horizon) {
    Exp4 e(n, ScheduleKind::bobw);
    e.capacity_ = capacity;
    e.gamma_ = bobw_gamma(capacity, horizon, n);
    if (!(e.gamma_ > 0.0))
      throw std::invalid_argument("Exp4: bobw schedule needs positive capacity (use a constant rate)");
    e.beta_ = e.gamma_;
    return e;
  }
  static Exp4 constant(std::size_t n, double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("Exp4: constant rate must be positive");
    Exp4 e(n, ScheduleKind::constant);
    e.eta_const_ = eta;
    return e;
  }

  /// Learning rate for the upcoming round.
  double eta() const {
    switch (kind_) {
      case ScheduleKind::fixed_capacity: return rate_fixed_capacity(t_, capacity_, n_);
      case ScheduleKind::adaptive: return rate_adaptive(z_accum_, j_running_, n_);
      case ScheduleKind::bobw: return rate_bobw(beta_);
      case ScheduleKind::constant: return eta_const_;
    }
    return 1.0;
  }

  /// Distribution over policies for round t at the current rate.
  Distribution predict() const { return softmax_weights(cum_, eta()); }

  /// Reveals the round's advice (needed by the adaptive schedule) and returns p_t.
  Distribution begin_round(const PolicySet& advice) {
    check_advice(advice);
    if (kind_ == ScheduleKind::adaptive) j_running_ = std::max(j_running_, s_and_v(advice).v);
    return predict();
  }

  void update(const PolicySet& advice, const Distribution& p, std::size_t chosen, std::size_t x,
              double loss) {
    check_advice(advice);
    detail::require_loss(loss, "Exp4::update");
    if (p.size() != n_ || chosen >= n_) throw std::invalid_argument("Exp4::update: bad policy index");
    if (x >= advice.num_outcomes()) throw std::out_of_range("Exp4::update: outcome out of range");
    if (!(advice[chosen][x] > 0.0))
      throw std::logic_error("Exp4::update: outcome impossible under the chosen policy");
    double psi = 0.0;
    for (std::size_t i = 0; i < n_; ++i) psi += p[i] * advice[i][x];
    for (std::size_t i = 0; i < n_; ++i) cum_[i] += advice[i][x] * loss / psi;
    switch (kind_) {
      case ScheduleKind::adaptive:
        z_accum_ += q_tau(p, advice);
        j_running_ = std::max(j_running_, s_and_v(advice).v);
        break;
      case ScheduleKind::bobw:
        entropy_accum_ += shannon_entropy(p);
        beta_ = bobw_advance(beta_, gamma_, entropy_accum_, n_);
        break;
      default: break;
    }
    ++t_;
  }

  std::size_t num_policies() const { return n_; }
  std::size_t round() const { return t_; }
  ScheduleKind schedule() const { return kind_; }
  const std::vector<double>& cumulative_estimates() const { return cum_; }
  double z_accum() const { return z_accum_; }
  double j_running() const { return j_running_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  double entropy_accum() const { return entropy_accum_; }

 private:
  Exp4(std::size_t n, ScheduleKind kind) : n_(n), kind_(kind), cum_(n, 0.0) {
    if (n < 2) throw std::invalid_argument("Exp4: need at least 2 policies");
  }
  void check_advice(const PolicySet& advice) const {
    if (advice.num_policies() != n_)
      throw std::invalid_argument("Exp4: advice has the wrong number of policies");
  }

  std::size_t n_;
  ScheduleKind kind_;
  std::vector<double> cum_;
  std::size_t t_ = 1;
  double capacity_ = 0.0;
  double eta_const_ = 1.0;
  double z_accum_ = 0.0;
  double j_running_ = 0.0;
  double gamma_ = 0.0;
  double beta_ = 1.0;
  double entropy_accum_ = 0.0;
};

// ---------------------------------------------------------------------------
// EXP3 directly over policies
// ---------------------------------------------------------------------------

/// Exponential weights over N arms that sees only the chosen policy's loss.
class Exp3Direct {
 public:
  explicit Exp3Direct(std::size_t n) : n_(n), cum_(n, 0.0) {
    if (n < 2) throw std::invalid_argument("Exp3Direct: need at least 2 policies");
  }

  double eta() const {
    return std::sqrt(std::log(static_cast<double>(n_)) /
                     (static_cast<double>(n_) * static_cast<double>(t_)));
  }
  Distribution predict() const { return softmax_weights(cum_, eta()); }

  void update(const Distribution& p, std::size_t chosen, double observed_policy_loss) {
    detail::require_loss(observed_policy_loss, "Exp3Direct::update");
    if (p.size() != n_ || chosen >= n_) throw std::invalid_argument("Exp3Direct: bad policy index");
    if (!(p[chosen] > 0.0)) throw std::logic_error("Exp3Direct: chosen policy has zero probability");
    cum_[chosen] += observed_policy_loss / p[chosen];
    ++t_;
  }

  std::size_t round() const { return t_; }
  const std::vector<double>& cumulative_estimates() const { return cum_; }

 private:
  std::size_t n_;
  std::vector<double> cum_;
  std::size_t t_ = 1;
};

// ---------------------------------------------------------------------------
// Full-information OMD on the convex hull of the policy set
// ---------------------------------------------------------------------------

struct OmdOptions {
  double capacity_tol = 1e-9;
  double inner_tol = 1e-9;         ///< Frank-Wolfe gap for the inner program
  std::size_t inner_max_iter = 100'000;
};

/// Online mirror descent with the KL regulariser over co(Theta), maintained
/// through mixture weights q so that u = mixture(q, Theta) stays in the hull.
class OmdFull {
 public:
  OmdFull(const PolicySet& theta, std::size_t horizon, OmdOptions opt = {})
      : OmdFull(theta, kl_capacity(theta, opt.capacity_tol), horizon, opt) {}

  /// Start from a precomputed KL capacity result (center and prior).
  OmdFull(const PolicySet& theta, const KlCapacityResult& kl, std::size_t horizon,
          OmdOptions opt = {})
      : opt_(opt) {
    if (horizon < 1) throw std::invalid_argument("OmdFull: horizon must be at least 1");
    if (kl.gap > opt.capacity_tol) {
      std::ostringstream os;
      os << "OmdFull: KL capacity did not converge (gap " << kl.gap << " after " << kl.iterations
         << " iterations)";
      throw std::runtime_error(os.str());
    }
    detail::require_same_size(kl.prior.size(), theta.num_policies(), "OmdFull");
    capacity_kl_ = kl.value;
    center_ = kl.center;
    eta_ = std::sqrt(2.0 * capacity_kl_ / static_cast<double>(horizon));
    q_ = kl.prior.vector();
    for (std::size_t i = 0; i < theta.num_policies(); ++i)
      for (std::size_t x = 0; x < theta.num_outcomes(); ++x)
        if (theta[i][x] > 0.0 && !(center_[x] > 0.0))
          throw std::logic_error("OmdFull: center misses the support of a policy");
    u_ = mixture_raw(q_, theta);
  }

  /// Explicit start, bypassing the capacity computation.
  OmdFull(const PolicySet& theta, Distribution q1, double eta, OmdOptions opt = {})
      : opt_(opt), eta_(eta), q_(q1.vector()) {
    detail::require_same_size(q_.size(), theta.num_policies(), "OmdFull");
    if (!(eta >= 0.0)) throw std::invalid_argument("OmdFull: eta must be non-negative");
    for (auto& w : q_) w = std::max(w, kFloor);
    normalize(q_);
    u_ = mixture_raw(q_, theta);
    center_ = Distribution::normalized(u_);
  }

  double eta() const { return eta_; }
  double capacity_kl() const { return capacity_kl_; }
  const Distribution& center() const { return center_; }
  /// Play distribution p_t over policies (its mixture is u_t).
  Distribution play_distribution() const { return Distribution::normalized(q_); }
  Distribution hull_point() const { return Distribution::normalized(u_); }
  std::size_t last_inner_iterations() const { return last_iters_; }

  /// u_{t+1} = argmin_{u in co(Theta)} eta <u, loss> + KL(u || u_t), solved
  /// over q by Newton steps on the support of q, with pairwise steps that
  /// bring new policies into the support.
  void step(const PolicySet& theta, std::span<const double> loss) {
    detail::require_same_size(loss.size(), theta.num_outcomes(), "OmdFull::step");
    for (double l : loss) detail::require_loss(l, "OmdFull::step");
    const std::size_t n = theta.num_policies(), k = theta.num_outcomes();
    const std::vector<double> u_old = u_;
    std::vector<double> g(n), h(k), du(k);

    for (std::size_t it = 0;; ++it) {
      for (std::size_t x = 0; x < k; ++x)
        h[x] = u_old[x] > 0.0 ? eta_ * loss[x] + std::log(u_[x] / u_old[x]) : 0.0;
      std::vector<std::size_t> active;
      std::size_t fw = 0;
      double avg = 0.0, active_lo = std::numeric_limits<double>::infinity();
      double active_hi = -active_lo;
      std::size_t away = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t x = 0; x < k; ++x) s += theta[i][x] * h[x];
        g[i] = s;
        avg += q_[i] * s;
        if (s < g[fw]) fw = i;
        if (q_[i] > 0.0) {
          active.push_back(i);
          active_lo = std::min(active_lo, s);
          if (s > active_hi) active_hi = s, away = i;
        }
      }
      const double gap = avg - g[fw];
      if (gap <= opt_.inner_tol) {
        last_iters_ = it;
        return;
      }
      if (it >= opt_.inner_max_iter) {
        std::ostringstream os;
        os << "OmdFull::step: inner solver stopped at gap " << gap << " after " << it
           << " iterations (eta " << eta_ << ")";
        throw std::runtime_error(os.str());
      }

      bool moved = false;
      if (q_[fw] > 0.0 || active_hi - active_lo > 0.5 * gap) {
        const auto dq = newton_direction(theta, active, g);
        double alpha_max = 1.0;
        std::size_t blocking = n;
        bool bounded = false;
        for (std::size_t a = 0; a < active.size(); ++a)
          if (dq[a] < 0.0 && (!bounded || -q_[active[a]] / dq[a] < alpha_max))
            alpha_max = -q_[active[a]] / dq[a], blocking = active[a], bounded = true;
        std::fill(du.begin(), du.end(), 0.0);
        for (std::size_t a = 0; a < active.size(); ++a)
          for (std::size_t x = 0; x < k; ++x) du[x] += dq[a] * theta[active[a]][x];
        const double alpha = line_search(du, h, alpha_max);
        if (alpha > 0.0) {
          for (std::size_t a = 0; a < active.size(); ++a)
            q_[active[a]] = std::max(q_[active[a]] + alpha * dq[a], 0.0);
          if (bounded && alpha >= alpha_max) q_[blocking] = 0.0;
          moved = true;
        }
      }
      if (!moved) {
        // Move mass from the worst supported policy onto the best one.
        for (std::size_t x = 0; x < k; ++x) du[x] = theta[fw][x] - theta[away][x];
        const double gamma = line_search(du, h, q_[away]);
        if (!(gamma > 0.0)) {
          last_iters_ = it;
          return;
        }
        q_[fw] += std::min(gamma, q_[away]);
        q_[away] = gamma >= q_[away] ? 0.0 : q_[away] - gamma;
      }
      normalize(q_);
      u_ = mixture_raw(q_, theta);
    }
  }

 private:
  static constexpr double kFloor = 1e-300;

  /// Newton direction for the objective restricted to the policies in
  /// `active`, keeping the total mass fixed.
  std::vector<double> newton_direction(const PolicySet& theta, const std::vector<std::size_t>& active,
                                       const std::vector<double>& g) const {
    const auto m = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd grad(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      grad(a) = g[active[a]];
      for (Eigen::Index b = 0; b <= a; ++b) {
        double v = 0.0;
        for (std::size_t x = 0; x < u_.size(); ++x)
          if (u_[x] > 0.0) v += theta[active[a]][x] * theta[active[b]][x] / u_[x];
        hess(a, b) = hess(b, a) = v;
      }
    }
    hess.diagonal().array() += 1e-12 * std::max(1.0, hess.diagonal().maxCoeff());
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    const Eigen::VectorXd y1 = ldlt.solve(grad);
    const Eigen::VectorXd y2 = ldlt.solve(Eigen::VectorXd::Ones(m));
    const double nu = y1.sum() / y2.sum();
    const Eigen::VectorXd d = -(y1 - nu * y2);
    return std::vector<double>(d.data(), d.data() + m);
  }

  /// Minimiser over [0, gamma_max] of the objective along u + gamma d, where
  /// h is the objective's gradient at u. The derivative is increasing in gamma.
  double line_search(const std::vector<double>& d, const std::vector<double>& h,
                     double gamma_max) const {
    auto slope = [&](double gamma) {
      double v = 0.0;
      for (std::size_t x = 0; x < d.size(); ++x) {
        if (d[x] == 0.0) continue;
        const double r = 1.0 + gamma * d[x] / u_[x];
        if (!(r > 0.0)) return std::numeric_limits<double>::infinity();
        v += d[x] * (h[x] + std::log(r));
      }
      return v;
    };
    if (slope(0.0) >= 0.0) return 0.0;
    if (slope(gamma_max) <= 0.0) return gamma_max;
    double lo = 0.0, hi = gamma_max;
    for (int i = 0; i < 200 && hi - lo > 1e-17 * gamma_max; ++i) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0.0 ? hi : lo) = mid;
    }
    return lo;
  }

  static void normalize(std::vector<double>& v) {
    double s = 0.0;
    for (double w : v) s += w;
    for (double& w : v) w /= s;
  }

  OmdOptions opt_;
  double capacity_kl_ = 0.0;
  double eta_ = 0.0;
  Distribution center_;
  std::vector<double> q_;
  std::vector<double> u_;
  std::size_t last_iters_ = 0;
};

}  // namespace medfb
