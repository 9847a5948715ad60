#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "hsc/errors.hpp"
#include "hsc/model.hpp"
#include "hsc/simulator.hpp"

namespace hsc {

/// Constant coefficients of the autonomous system that bounds the
/// nonautonomous one from above.
struct EnvelopeParams {
  double delta_star = 0.0;  // min(delta) - eps
  double h1_star = 0.0;     // max(h1) + eps
  double h2_star = 0.0;     // max(h2) + eps
  double eps_env = 0.0;

  /// h1* / (1 - h2*), the weight of the history term in V.
  double weight() const noexcept { return h1_star / (1.0 - h2_star); }
  /// w(s) = delta* - beta(s) (weight - 1); V' = -w(Q) Q along envelope solutions.
  double w(const Hill& hill, double s) const { return delta_star - hill.beta(s) * (weight() - 1.0); }
};

/// Builds the envelope, halving eps_env (at most 60 times) until
/// delta* > 0, h2* < 1 and delta* > beta0 (h1*/(1 - h2*) - 1).
inline EnvelopeParams envelope(const DerivedCoefficients& c, double eps_env) {
  if (!(eps_env > 0.0)) throw DomainError("envelope: eps_env must be positive");
  const auto hyp = check_hypotheses(c);
  if (!hyp.H1) throw ContractionError("envelope: requires max(h2) < 1 (H1)");
  if (!hyp.H3prime) {
    throw HypothesisError("envelope: requires min(delta) > beta0 * alpha_max (H3')");
  }
  const double beta0 = c.hill().beta0;
  double eps = eps_env;
  for (int k = 0; k <= 60; ++k, eps *= 0.5) {
    EnvelopeParams e{c.delta_min - eps, c.h1_max + eps, c.h2_max + eps, eps};
    if (e.delta_star > 0.0 && e.h2_star < 1.0 && e.delta_star > beta0 * (e.weight() - 1.0)) return e;
  }
  throw HypothesisError("envelope: no admissible eps_env after 60 halvings");
}

inline ConstantSystem envelope_system(const DerivedCoefficients& c, const EnvelopeParams& e) {
  return ConstantSystem(c.hill(), c.tau(), e.delta_star, e.h1_star, e.h2_star);
}

/// rbar / (1 + tau h1* / (1 - h2*)).
inline double basin_radius(const Hill& hill, double tau, const EnvelopeParams& e) {
  return hill.rbar() / (1.0 + e.weight() * tau);
}

inline double basin_radius(const DerivedCoefficients& c, const EnvelopeParams& e) {
  return basin_radius(c.hill(), c.tau(), e);
}

/// V(Q, phi) = |Q| + h1*/(1 - h2*) * int_{-tau}^0 |phi|, the integral by
/// composite Simpson on `panels` panels.
template <class Phi>
double lyapunov(const EnvelopeParams& e, double tau, double Q, Phi&& phi, int panels = 512) {
  if (panels < 1) throw DomainError("lyapunov: need at least one panel");
  const double h = tau / panels;
  double acc = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double a = -tau + k * h;
    acc += h / 6.0 * (std::abs(phi(a)) + 4.0 * std::abs(phi(a + 0.5 * h)) + std::abs(phi(a + h)));
  }
  return std::abs(Q) + e.weight() * acc;
}

/// V at every node of a trajectory, integrating the stored half-step samples
/// of u over the window [t - tau, t] (panels never straddle a jump of u).
inline std::vector<double> lyapunov_along(const Trajectory& tr, const EnvelopeParams& e) {
  std::vector<double> V(tr.size());
  const long m = tr.m;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const long gi = 2L * static_cast<long>(i);
    double acc = 0.0;
    for (long j = 0; j < m; ++j) {
      const long ga = gi - 2L * m + 2 * j;
      acc += tr.h / 6.0 *
             (std::abs(tr.u_right_at(ga)) + 4.0 * std::abs(tr.u_right_at(ga + 1)) +
              std::abs(tr.u_left_at(ga + 2)));
    }
    V[i] = std::abs(tr.Q[i]) + e.weight() * acc;
  }
  return V;
}

/// Sup norm of the initial pair (Q0, phi) over the simulator's sample points.
template <class Phi>
double initial_norm(double Q0, Phi&& phi, double tau, int m) {
  double s = std::abs(Q0);
  for (int g = -2 * m; g <= 0; ++g) s = std::max(s, std::abs(phi(g * 0.5 * tau / m)));
  return s;
}

/// Step-induction bound for the difference part: for t in ((n-1) tau, n tau],
///   u(t) <= C (1 - h2*^n)/(1 - h2*) sup Q + h2*^n sup |phi|,
/// with C = beta0 (j(Q) <= beta0 Q). Returns the smallest slack over nodes.
inline double iss_slack(const Trajectory& tr, const EnvelopeParams& e, const Hill& hill,
                        double phi_sup) {
  const double C = hill.beta0;
  double qsup = 0.0;
  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < tr.size(); ++i) {
    qsup = std::max(qsup, std::abs(tr.Q[i]));
    qsup = std::max(qsup, std::abs(tr.half_Q[2 * i - 1]));
    const double t = tr.times[i] - tr.t0;
    auto bound = [&](double n) {
      const double hn = std::pow(e.h2_star, n);
      return C * (1.0 - hn) / (1.0 - e.h2_star) * qsup + hn * phi_sup;
    };
    // The left limit belongs to the step interval ending here, the right
    // limit to the next one (they differ only at multiples of tau).
    const long g = 2L * static_cast<long>(i);
    slack = std::min(slack, bound(std::ceil(t / tr.tau - 1e-12)) - tr.u_left_at(g));
    slack = std::min(slack, bound(std::floor(t / tr.tau + 1e-12) + 1.0) - tr.u_right_at(g));
  }
  return slack;
}

struct ComparisonReport {
  EnvelopeParams env;
  double basin_radius_used = 0.0;
  double initial_norm = 0.0;

  bool ordering_ok = false;      // Q <= Q_env and u <= u_env at every node (slack >= -1e-10)
  double ordering_slack = 0.0;   // smallest of Q_env - Q, u_env - u
  bool lyapunov_monotone = false;
  double max_V_increase = 0.0;
  bool below_rbar = false;       // Q and Q_env stay below rbar
  double max_Q = 0.0;
  bool decay_ok = false;         // sup over the final period < 1e-3 * initial norm, both systems
  double final_sup = 0.0;
  double final_sup_env = 0.0;
  double iss_slack = 0.0;

  Trajectory traj;
  Trajectory traj_env;
  std::vector<double> V_env;
};

/// Simulates the nonautonomous system and its envelope from the same data
/// and evaluates the comparison, Lyapunov and decay properties from the raw
/// trajectories.
template <class Phi>
ComparisonReport run_comparison(const DerivedCoefficients& c, double Q0, Phi&& phi, int periods,
                                int m, double eps_env = 0.01) {
  if (periods < 1) throw DomainError("run_comparison: periods must be >= 1");
  ComparisonReport rep;
  rep.env = envelope(c, eps_env);
  rep.basin_radius_used = basin_radius(c, rep.env);
  rep.initial_norm = initial_norm(Q0, phi, c.tau(), m);
  if (rep.initial_norm > rep.basin_radius_used) {
    throw HypothesisError("run_comparison: initial data outside the basin radius");
  }

  const double horizon = periods * c.period();
  SimulateOptions so;
  rep.traj = simulate(c, Q0, phi, horizon, m, so);
  rep.traj_env = simulate(envelope_system(c, rep.env), Q0, phi, horizon, m, so);
  const auto& a = rep.traj;
  const auto& b = rep.traj_env;

  constexpr double slack_tol = -1e-10;
  rep.ordering_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) {
    rep.ordering_slack = std::min({rep.ordering_slack, b.Q[i] - a.Q[i], b.u[i] - a.u[i]});
  }
  rep.ordering_ok = rep.ordering_slack >= slack_tol;

  rep.V_env = lyapunov_along(b, rep.env);
  rep.max_V_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < rep.V_env.size(); ++i) {
    rep.max_V_increase = std::max(rep.max_V_increase, rep.V_env[i] - rep.V_env[i - 1]);
  }
  rep.lyapunov_monotone = rep.max_V_increase <= 1e-10;

  const double rbar = c.rbar;
  rep.max_Q = 0.0;
  for (std::size_t i = 0; i < a.half_Q.size(); ++i) {
    rep.max_Q = std::max({rep.max_Q, a.half_Q[i], b.half_Q[i]});
  }
  rep.below_rbar = rep.max_Q < rbar;

  // sup of (Q, u) over the last period, including half-step samples
  const double t_from = a.times.back() - c.period();
  auto final_sup = [t_from](const Trajectory& tr) {
    double s = 0.0;
    const long last = tr.last_half_index();
    for (long g = 0; g <= last; ++g) {
      if (tr.half_time(g) < t_from - 1e-12) continue;
      s = std::max({s, std::abs(tr.Q_at_half(g)), std::abs(tr.u_left_at(g)), std::abs(tr.u_right_at(g))});
    }
    return s;
  };
  rep.final_sup = final_sup(a);
  rep.final_sup_env = final_sup(b);
  if (rep.initial_norm == 0.0) {
    rep.decay_ok = rep.final_sup == 0.0 && rep.final_sup_env == 0.0;
  } else {
    rep.decay_ok = rep.final_sup < 1e-3 * rep.initial_norm && rep.final_sup_env < 1e-3 * rep.initial_norm;
  }

  double phi_sup = 0.0;
  for (int g = -2 * m; g <= 0; ++g) phi_sup = std::max(phi_sup, std::abs(phi(g * 0.5 * c.tau() / m)));
  rep.iss_slack = iss_slack(a, rep.env, c.hill(), phi_sup);
  return rep;
}

}  // namespace hsc
