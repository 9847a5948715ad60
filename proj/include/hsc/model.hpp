#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "hsc/errors.hpp"
#include "hsc/periodic.hpp"

namespace hsc {

/// Hill-type recruitment rate beta(Q) = beta0 / (1 + Q^r) and the
/// recruitment flux j(Q) = beta(Q) Q.
struct Hill {
  double beta0 = 1.0;
  double r = 2.0;

  double beta(double q) const {
    if (q < 0.0) throw DomainError("beta: negative population");
    return beta0 / (1.0 + std::pow(q, r));
  }

  /// Inverse of beta on (0, beta0]; beta maps [0, inf) onto (0, beta0].
  double beta_inv(double y) const {
    if (!(y > 0.0) || y > beta0) throw DomainError("beta_inv: argument outside (0, beta0]");
    if (y == beta0) return 0.0;
    return std::pow(beta0 / y - 1.0, 1.0 / r);
  }

  double j(double q) const {
    if (q < 0.0) throw DomainError("j: negative population");
    return beta0 * q / (1.0 + std::pow(q, r));
  }

  double j_prime(double q) const {
    if (q < 0.0) throw DomainError("j_prime: negative population");
    const double qr = std::pow(q, r);
    const double d = 1.0 + qr;
    return beta0 * (1.0 + (1.0 - r) * qr) / (d * d);
  }

  /// Location of the maximum of j.
  double rbar() const { return std::pow(1.0 / (r - 1.0), 1.0 / r); }
  /// max_{Q>0} j(Q).
  double B() const { return j(rbar()); }
};

/// Full parameter set: Hill constants, delay, period and the three
/// T-periodic coefficients delta (loss), K (short-term fraction) and gamma
/// (apoptosis). Plain aggregate; call validate() to enforce H0.
struct ModelParams {
  double beta0 = 1.0;
  double hill_r = 2.0;
  double tau = 1.0;
  double period = 1.0;
  PeriodicCoefficient delta;
  PeriodicCoefficient K;
  PeriodicCoefficient gamma;

  Hill hill() const { return {beta0, hill_r}; }

  bool is_constant() const {
    return delta.is_constant() && K.is_constant() && gamma.is_constant();
  }

  /// Throws DomainError describing the first violated H0 condition.
  void validate() const {
    if (!(beta0 > 0.0)) throw DomainError("H0: beta0 must be > 0");
    if (!(hill_r > 1.0)) throw DomainError("H0: r must be > 1");
    if (!(tau > 0.0)) throw DomainError("H0: tau must be > 0");
    if (!(period > 0.0)) throw DomainError("H0: T must be > 0");
    const auto same = [this](const PeriodicCoefficient& c) {
      return std::abs(c.period() - period) <= 1e-12 * period;
    };
    if (!same(delta) || !same(K) || !same(gamma)) {
      throw DomainError("H0: coefficient period differs from T");
    }
    if (!(extrema(delta).min > 0.0)) throw DomainError("H0: delta must be positive");
    if (!(extrema(gamma).min > 0.0)) throw DomainError("H0: gamma must be positive");
    const auto ek = extrema(K);
    if (!(ek.min > 0.0)) throw DomainError("H0: K must be positive");
    if (!(ek.max < 1.0)) throw DomainError("H0: max(K) must be < 1");
  }

  /// Autonomous parameters with each coefficient replaced by its mean.
  ModelParams averaged() const {
    ModelParams a = *this;
    a.delta = PeriodicCoefficient::constant(period, delta.mean());
    a.K = PeriodicCoefficient::constant(period, K.mean());
    a.gamma = PeriodicCoefficient::constant(period, gamma.mean());
    return a;
  }

  static ModelParams constant(double beta0, double r, double tau, double period, double delta,
                              double K, double gamma) {
    return {beta0,
            r,
            tau,
            period,
            PeriodicCoefficient::constant(period, delta),
            PeriodicCoefficient::constant(period, K),
            PeriodicCoefficient::constant(period, gamma)};
  }
};

inline double beta(const ModelParams& p, double q) { return p.hill().beta(q); }
inline double beta_inv(const ModelParams& p, double y) { return p.hill().beta_inv(y); }
inline double j(const ModelParams& p, double q) { return p.hill().j(q); }
inline double j_prime(const ModelParams& p, double q) { return p.hill().j_prime(q); }

struct JMax {
  double rbar;
  double B;
};

inline JMax j_max(const ModelParams& p) {
  const Hill h = p.hill();
  return {h.rbar(), h.B()};
}

/// Coefficients derived from ModelParams: rho, h1, h2, their extrema and the
/// scalar thresholds alpha / alpha_max. Immutable after construction.
class DerivedCoefficients {
 public:
  explicit DerivedCoefficients(ModelParams p) : p_(std::move(p)) {
    p_.validate();
    const int order = std::max({p_.delta.highest_order(), p_.K.highest_order(),
                                p_.gamma.highest_order()});
    const std::size_t n = std::max<std::size_t>(4096, 16 * static_cast<std::size_t>(order + 1));
    const auto e1 = periodic_extrema([this](double t) { return h1(t); }, p_.period, n);
    const auto e2 = periodic_extrema([this](double t) { return h2(t); }, p_.period, n);
    const auto ed = extrema(p_.delta);
    h1_min = e1.min;
    h1_max = e1.max;
    h2_min = e2.min;
    h2_max = e2.max;
    delta_min = ed.min;
    delta_max = ed.max;
    constexpr double inf = std::numeric_limits<double>::infinity();
    alpha = h2_min < 1.0 ? h1_min / (1.0 - h2_min) - 1.0 : inf;
    alpha_max = h2_max < 1.0 ? h1_max / (1.0 - h2_max) - 1.0 : inf;
    const Hill hl = p_.hill();
    rbar = hl.rbar();
    B = hl.B();
  }

  const ModelParams& params() const noexcept { return p_; }
  Hill hill() const noexcept { return p_.hill(); }
  double tau() const noexcept { return p_.tau; }
  double period() const noexcept { return p_.period; }

  double delta(double t) const { return p_.delta(t); }
  double rho(double t) const { return p_.gamma.integrate(t - p_.tau, t); }
  double h1(double t) const { return 2.0 * (1.0 - p_.K(t)) * std::exp(-rho(t)); }
  double h2(double t) const { return 2.0 * p_.K(t) * std::exp(-rho(t)); }

  double h1_min = 0.0, h1_max = 0.0;
  double h2_min = 0.0, h2_max = 0.0;
  double delta_min = 0.0, delta_max = 0.0;
  double alpha = 0.0;      // min(h1)/(1 - min(h2)) - 1
  double alpha_max = 0.0;  // max(h1)/(1 - max(h2)) - 1
  double B = 0.0;
  double rbar = 0.0;

 private:
  ModelParams p_;
};

inline DerivedCoefficients derive(const ModelParams& p) { return DerivedCoefficients(p); }

struct HypothesisReport {
  bool H0 = false, H1 = false, H2 = false, H3 = false, H3prime = false;
  // Signed distance to each threshold; positive means the condition holds.
  double margin_H0 = 0.0;
  double margin_H1 = 0.0;       // 1 - max(h2)
  double margin_H2 = 0.0;       // alpha
  double margin_H3 = 0.0;       // alpha*beta0 - max(delta)
  double margin_H3prime = 0.0;  // min(delta) - alpha_max*beta0
  std::string H0_message;
};

inline HypothesisReport check_hypotheses(const DerivedCoefficients& c) {
  HypothesisReport r;
  const auto& p = c.params();
  r.H0 = true;
  {
    const auto ek = extrema(p.K);
    r.margin_H0 = std::min({c.delta_min, extrema(p.gamma).min, ek.min, 1.0 - ek.max});
  }
  r.margin_H1 = 1.0 - c.h2_max;
  r.H1 = r.margin_H1 > 0.0;
  r.margin_H2 = std::isfinite(c.alpha) ? c.alpha : std::numeric_limits<double>::quiet_NaN();
  r.H2 = r.H1 && c.alpha > 0.0;
  r.margin_H3 = r.H1 ? c.alpha * p.beta0 - c.delta_max : -std::numeric_limits<double>::infinity();
  r.H3 = r.H1 && r.margin_H3 > 0.0;
  r.margin_H3prime =
      r.H1 ? c.delta_min - c.alpha_max * p.beta0 : -std::numeric_limits<double>::infinity();
  r.H3prime = r.H1 && r.margin_H3prime > 0.0;
  return r;
}

inline HypothesisReport check_hypotheses(const ModelParams& p) {
  try {
    return check_hypotheses(DerivedCoefficients(p));
  } catch (const DomainError& e) {
    HypothesisReport r;
    r.H0_message = e.what();
    return r;
  }
}

struct TauWindow {
  double tau_low;             // max{ln(2K)/gamma, 0}
  double tau_high_existence;  // ln(2)/gamma
  double tau_high_H3;         // ln(2(beta0 + delta K)/(beta0 + delta))/gamma

  bool contains(double tau) const {
    return tau > tau_low && tau < std::min(tau_high_existence, tau_high_H3);
  }
};

/// Delay window equivalent to H1-H3 for autonomous parameters.
inline TauWindow tau_window(const ModelParams& p) {
  if (!p.is_constant()) throw UnsupportedModeError("tau_window: coefficients must be constant");
  const double g = p.gamma.mean();
  const double k = p.K.mean();
  const double d = p.delta.mean();
  return {std::max(std::log(2.0 * k) / g, 0.0), std::log(2.0) / g,
          std::log(2.0 * (p.beta0 + d * k) / (p.beta0 + d)) / g};
}

struct Equilibrium {
  double Q = 0.0;
  double u = 0.0;
};

/// Nontrivial equilibrium of the autonomous system. Evaluated directly from
/// the closed form: fails exactly when h2 >= 1, alpha <= 0 or delta/alpha
/// leaves the range (0, beta0) of beta.
inline Equilibrium equilibrium(const ModelParams& p) {
  if (!p.is_constant()) throw UnsupportedModeError("equilibrium: coefficients must be constant");
  p.validate();
  const double d = p.delta.mean();
  const double e = std::exp(-p.gamma.mean() * p.tau);
  const double h2 = 2.0 * p.K.mean() * e;
  const double h1 = 2.0 * (1.0 - p.K.mean()) * e;
  if (!(h2 < 1.0)) throw NoEquilibriumError("no nontrivial equilibrium: h2 >= 1");
  const double alpha = h1 / (1.0 - h2) - 1.0;
  if (!(alpha > 0.0)) throw NoEquilibriumError("no nontrivial equilibrium: alpha <= 0");
  const double y = d / alpha;
  if (!(y < p.beta0)) throw NoEquilibriumError("no nontrivial equilibrium: delta >= alpha*beta0");
  const double q = p.hill().beta_inv(y);
  // u = beta(Q) Q / (1 - h2) = delta Q / (2 e^{-gamma tau} - 1)
  return {q, d * q / (2.0 * e - 1.0)};
}

/// Right-hand side of the Q equation: -(delta(t) + beta(Q)) Q + h1(t) u(t - tau).
inline double vector_field(const DerivedCoefficients& c, double t, double q, double u_delayed) {
  if (q < 0.0 || u_delayed < 0.0) throw DomainError("vector_field: negative state");
  return -(c.delta(t) + c.hill().beta(q)) * q + c.h1(t) * u_delayed;
}

/// Smallest R = 2 rbar * 2^k satisfying
///   min(delta) > -beta(R) + B max(h1) / (R (1 - max(h2)))
/// with slack at least 10% of min(delta).
inline double c2_radius(const Hill& hill, double delta_min, double h1_max, double h2_max) {
  if (!(h2_max < 1.0)) throw ContractionError("upper radius: requires max(h2) < 1");
  if (!(delta_min > 0.0)) throw DomainError("upper radius: requires min(delta) > 0");
  const double B = hill.B();
  double R = 2.0 * hill.rbar();
  for (int k = 0; k < 200; ++k, R *= 2.0) {
    const double rhs = -hill.beta(R) + B * h1_max / (R * (1.0 - h2_max));
    if (delta_min - rhs >= 0.1 * delta_min) return R;
  }
  throw InfeasibleError("upper radius: condition C2 not met after 200 doublings");
}

inline double c2_radius(const DerivedCoefficients& c) {
  return c2_radius(c.hill(), c.delta_min, c.h1_max, c.h2_max);
}

}  // namespace hsc
