#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "hsc/errors.hpp"
#include "hsc/model.hpp"
#include "hsc/simulator.hpp"

namespace hsc {

/// Age discretization. Nodes a_i = i da; q lives on [0, a_max_q] (n_q + 1
/// nodes), p on [0, tau] (n_p + 1 nodes). The time step equals da so that
/// transport is an exact shift by one node.
struct AgeGrid {
  double da = 0.0;
  double a_max_q = 0.0;
  std::size_t n_q = 0;
  std::size_t n_p = 0;
  double dt = 0.0;
};

/// Grid with tau/da integral and a_max_q = 20 / min(delta) (rounded up to
/// whole cells) unless given.
inline AgeGrid make_age_grid(const DerivedCoefficients& c, double da,
                             std::optional<double> a_max_q = std::nullopt) {
  if (!(da > 0.0)) throw DomainError("age grid: da must be positive");
  const double s = c.tau() / da;
  const double n_p = std::round(s);
  if (n_p < 1.0 || std::abs(s - n_p) > 1e-9 * s) throw DomainError("age grid: tau/da must be an integer");
  AgeGrid g;
  g.da = da;
  g.dt = da;
  g.n_p = static_cast<std::size_t>(n_p);
  const double amax = a_max_q ? *a_max_q : 20.0 / c.delta_min;
  if (!(amax > 0.0)) throw DomainError("age grid: a_max_q must be positive");
  g.n_q = static_cast<std::size_t>(std::ceil(amax / da - 1e-9));
  g.a_max_q = static_cast<double>(g.n_q) * da;
  return g;
}

struct PDEState {
  std::vector<double> q;  // quiescent density at ages i da
  std::vector<double> p;  // proliferating density at ages i da, i <= n_p
  double t = 0.0;
  double Q = 0.0;  // trapezoid integral of q
  double u = 0.0;  // p(t, 0)
  double tail_fraction = 0.0;  // estimated mass beyond a_max_q relative to Q
};

/// Upwind transport with unit CFL and multiplicative decay along the
/// characteristics (first-order splitting: beta is frozen at the start of
/// each step; the delta and gamma factors use their exact integrals).
class AgeStructuredModel {
 public:
  AgeStructuredModel(const DerivedCoefficients& c, AgeGrid grid) : c_(c), g_(grid) {}

  const AgeGrid& grid() const noexcept { return g_; }

  double trapezoid(const std::vector<double>& v) const {
    double s = 0.0;
    for (double x : v) s += x;
    return g_.da * (s - 0.5 * (v.front() + v.back()));
  }

  /// q0(a) proportional to exp(-c a), scaled so its trapezoid mass is Q0;
  /// p0(a) = exp(-int_{-a}^0 gamma) phi(-a) for a > 0. A nonpositive profile_rate
  /// selects the default min(delta) + beta(Q0).
  template <class Phi>
  PDEState init(double Q0, Phi&& phi, double profile_rate = 0.0) const {
    if (!(Q0 >= 0.0)) throw DomainError("pde init: Q0 must be nonnegative");
    const auto& gam = c_.params().gamma;
    double rate = profile_rate > 0.0 ? profile_rate : c_.delta_min + c_.hill().beta(Q0);
    PDEState s;
    s.q.resize(g_.n_q + 1);
    for (std::size_t i = 0; i <= g_.n_q; ++i) s.q[i] = std::exp(-rate * g_.da * static_cast<double>(i));
    const double mass = trapezoid(s.q);
    for (double& x : s.q) x *= Q0 / mass;
    s.p.resize(g_.n_p + 1);
    for (std::size_t i = 0; i <= g_.n_p; ++i) {
      const double a = g_.da * static_cast<double>(i);
      const double v = phi(-a);
      if (!(v >= 0.0)) throw DomainError("pde init: phi must be nonnegative");
      s.p[i] = std::exp(-gam.integrate(-a, 0.0)) * v;
    }
    s.t = 0.0;
    s.Q = trapezoid(s.q);
    // The corner node starts the boundary characteristic a = t, so it takes
    // the boundary value (right-continuous u at t = 0), not phi(0).
    s.p[0] = c_.hill().j(s.Q) + 2.0 * c_.params().K(0.0) * s.p[g_.n_p];
    s.u = s.p[0];
    update_tail(s);
    return s;
  }

  void step(PDEState& s) const {
    const auto& par = c_.params();
    const double t0 = s.t;
    const double t1 = t0 + g_.dt;
    const double fq = std::exp(-(par.delta.integrate(t0, t1) + c_.hill().beta(std::max(s.Q, 0.0)) * g_.dt));
    const double fp = std::exp(-par.gamma.integrate(t0, t1));
    for (std::size_t i = g_.n_q; i >= 1; --i) s.q[i] = s.q[i - 1] * fq;
    for (std::size_t i = g_.n_p; i >= 1; --i) s.p[i] = s.p[i - 1] * fp;
    const double p_tau = s.p[g_.n_p];
    const double K1 = par.K(t1);
    s.q[0] = 2.0 * (1.0 - K1) * p_tau;
    s.Q = trapezoid(s.q);
    s.p[0] = c_.hill().j(std::max(s.Q, 0.0)) + 2.0 * K1 * p_tau;
    s.u = s.p[0];
    s.t = t1;
    if (!(s.Q >= 0.0) || !(s.u >= 0.0)) throw SchemeError("pde step: negative density");
    update_tail(s);
    if (s.tail_fraction > 1e-8) throw SchemeError("pde step: mass beyond a_max_q exceeds 1e-8 of total");
  }

 private:
  // Tail beyond the last node estimated as an exponential with the
  // slowest possible decay rate min(delta).
  void update_tail(PDEState& s) const {
    if (s.Q <= 0.0) {
      s.tail_fraction = 0.0;
      return;
    }
    s.tail_fraction = s.q.back() / c_.delta_min / s.Q;
  }

  const DerivedCoefficients& c_;
  AgeGrid g_;
};

struct ReductionCheck {
  double max_rel_error = 0.0;
  double err_Q = 0.0;  // sup |Q_pde - Q| / sup |Q| over the window
  double err_u = 0.0;  // sup |u_pde - u| / sup |u|
  double max_tail_fraction = 0.0;
  std::vector<double> times;
  std::vector<double> Q_pde, u_pde, Q_red, u_red;
};

/// Runs the PDE and the reduced delay system on a common time grid
/// (dt = da = tau/m) and compares the aggregates on [2 tau, t_end]. Errors
/// are normalized by the sup of the reduced solution over that window.
template <class Phi>
ReductionCheck validate_reduction(const DerivedCoefficients& c, double Q0, Phi&& phi, double t_end,
                                  double da, double profile_rate = 0.0) {
  const AgeGrid g = make_age_grid(c, da);
  if (!(t_end > 2.0 * c.tau())) throw DomainError("validate_reduction: t_end must exceed 2 tau");
  const AgeStructuredModel pde(c, g);
  PDEState s = pde.init(Q0, phi, profile_rate);
  const int m = static_cast<int>(g.n_p);
  if (m < 8) throw DomainError("validate_reduction: need tau/da >= 8");
  const Trajectory tr = simulate(c, Q0, phi, t_end, m);

  ReductionCheck rc;
  const double t_from = 2.0 * c.tau();
  double dq = 0.0, du = 0.0, sq = 0.0, su = 0.0;
  for (std::size_t k = 1; k < tr.size(); ++k) {
    pde.step(s);
    rc.max_tail_fraction = std::max(rc.max_tail_fraction, s.tail_fraction);
    if (tr.times[k] < t_from - 1e-9 * t_from) continue;
    rc.times.push_back(tr.times[k]);
    rc.Q_pde.push_back(s.Q);
    rc.u_pde.push_back(s.u);
    rc.Q_red.push_back(tr.Q[k]);
    rc.u_red.push_back(tr.u[k]);
    dq = std::max(dq, std::abs(s.Q - tr.Q[k]));
    du = std::max(du, std::abs(s.u - tr.u[k]));
    sq = std::max(sq, std::abs(tr.Q[k]));
    su = std::max(su, std::abs(tr.u[k]));
  }
  rc.err_Q = sq > 0.0 ? dq / sq : dq;
  rc.err_u = su > 0.0 ? du / su : du;
  rc.max_rel_error = std::max(rc.err_Q, rc.err_u);
  return rc;
}

}  // namespace hsc
