#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hsc/difference_solver.hpp"
#include "hsc/errors.hpp"
#include "hsc/grid.hpp"
#include "hsc/model.hpp"
#include "hsc/simulator.hpp"

namespace hsc {

/// Grid size used when none is given: at least `floor` points and fine
/// enough that T/n <= tau/8. Always even.
inline std::size_t default_grid_size(const DerivedCoefficients& c, std::size_t floor = 512) {
  auto n = static_cast<std::size_t>(std::ceil(8.0 * c.period() / c.tau()));
  n = std::max(n, floor);
  return n + (n % 2);
}

namespace detail {

inline double inner_tolerance(const DerivedCoefficients& c) {
  const double scale = std::max(1.0, c.B / (1.0 - c.h2_max));
  const double floor = 50.0 * std::numeric_limits<double>::epsilon() / (1.0 - c.h2_max);
  return scale * std::max(1e-13, floor);
}

}  // namespace detail

/// Mean over one period of N(q) for the constant function Q = q, with u the
/// periodic solution of the difference equation for that Q.
inline double average_field(const DerivedCoefficients& c, double q, std::size_t n = 0) {
  if (!(q > 0.0)) throw DomainError("average_field: q must be positive");
  if (n == 0) n = default_grid_size(c);
  DifferenceOperator op(c, n);
  const auto qs = PeriodicGridFn::constant(c.period(), n, q);
  const auto sol = op.solve(qs.values(), detail::inner_tolerance(c));
  const Hill hl = c.hill();
  const double bq = hl.beta(q);
  double acc = 0.0;
  const double dt = c.period() / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = dt * static_cast<double>(i);
    acc += -(c.delta(t) + bq) * q + c.h1(t) * op.delayed(sol.u.values(), i);
  }
  // periodic trapezoid rule
  return acc / static_cast<double>(n);
}

struct AprioriBox {
  double eps = 0.0;
  double R = 0.0;
  bool C0 = false;  // j(eps) < j(R)
  bool C1 = false;  // 1 + eps^r < beta0 alpha / max(delta)
  bool C2 = false;  // min(delta) > -beta(R) + B max(h1) / (R (1 - max(h2)))
  double f_eps = 0.0;
  double f_R = 0.0;
  int sign_eps = 0;
  int sign_R = 0;

  bool satisfied() const noexcept { return C0 && C1 && C2; }
  bool degree_configuration() const noexcept { return sign_eps > 0 && sign_R < 0; }
};

inline int sign_of(double v) noexcept { return (v > 0.0) - (v < 0.0); }

/// Deterministic search for the localization box [eps, R]. R comes from
/// c2_radius (doubling from 2 rbar, 10% slack). eps halves from rbar/2
/// until 1 + eps^r stays below beta0 alpha / max(delta) by at least 10% of
/// that threshold's excess over 1, and j(eps) < j(R).
inline AprioriBox choose_box(const DerivedCoefficients& c) {
  const Hill hl = c.hill();
  AprioriBox box;
  box.R = c2_radius(c);

  const double threshold = hl.beta0 * c.alpha / c.delta_max;
  const double need = 0.1 * (threshold - 1.0);
  double eps = 0.5 * c.rbar;
  bool found = false;
  if (threshold > 1.0) {
    for (int k = 0; k < 200; ++k, eps *= 0.5) {
      const bool c1 = threshold - (1.0 + std::pow(eps, hl.r)) >= need;
      if (c1 && hl.j(eps) < hl.j(box.R)) {
        found = true;
        break;
      }
    }
  }
  if (!found) {
    throw InfeasibleError(
        "a-priori box: condition C1 cannot be met (requires beta0*alpha > max(delta), i.e. H3)");
  }
  box.eps = eps;

  // Re-verify every condition from scratch on the output.
  box.C0 = hl.j(box.eps) < hl.j(box.R);
  box.C1 = 1.0 + std::pow(box.eps, hl.r) < threshold;
  box.C2 = c.delta_min > -hl.beta(box.R) + c.B * c.h1_max / (box.R * (1.0 - c.h2_max));
  box.f_eps = average_field(c, box.eps);
  box.f_R = average_field(c, box.R);
  box.sign_eps = sign_of(box.f_eps);
  box.sign_R = sign_of(box.f_R);
  return box;
}

enum class OrbitMethod { collocation, poincare };

struct OrbitResult {
  PeriodicGridFn Q;
  PeriodicGridFn u;
  double residual = std::numeric_limits<double>::infinity();  // sup |Q' - N(Q)| on the grid
  double u_residual = std::numeric_limits<double>::infinity();
  int newton_iters = 0;
  bool converged = false;
  bool in_box = false;
  OrbitMethod method = OrbitMethod::collocation;
  std::optional<AprioriBox> box;
};

/// Q' - N(Q) at the grid nodes, using the trigonometric interpolant for Q'
/// and a fresh difference solve (from zero) for u. Independent of the
/// Newton iteration's internal quantities.
inline double orbit_residual(const DerivedCoefficients& c, const PeriodicGridFn& Q,
                             PeriodicGridFn* u_out = nullptr, double* u_res = nullptr) {
  DifferenceOperator op(c, Q.size());
  const auto sol = op.solve(Q.values(), detail::inner_tolerance(c));
  const TrigInterpolant ti(Q);
  const Hill hl = c.hill();
  double r = 0.0;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    const double t = Q.node(i);
    const double n_i =
        -(c.delta(t) + hl.beta(Q[i])) * Q[i] + c.h1(t) * op.delayed(sol.u.values(), i);
    r = std::max(r, std::abs(ti.derivative(t) - n_i));
  }
  if (u_res) *u_res = sol.residual;
  if (u_out) *u_out = sol.u;
  return r;
}

struct CollocationOptions {
  std::size_t n = 0;  // 0: default_grid_size(c, 256)
  double tol = 1e-10;
  std::optional<PeriodicGridFn> guess;
  int max_iters = 60;
};

namespace detail {

/// F(Q) = D Q - N(Q) on a fixed grid, with cached coefficient samples.
class CollocationSystem {
 public:
  CollocationSystem(const DerivedCoefficients& c, std::size_t n)
      : c_(c), op_(c, n), n_(n), D_(fourier_diff_matrix(n, c.period())), tol_in_(inner_tolerance(c)) {
    delta_.resize(n);
    h1_.resize(n);
    const double dt = c.period() / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      delta_[i] = c.delta(dt * static_cast<double>(i));
      h1_[i] = c.h1(dt * static_cast<double>(i));
    }
  }

  const Eigen::MatrixXd& D() const noexcept { return D_; }

  /// N(Q); `u` is used as warm start and overwritten with the new solution.
  Eigen::VectorXd N(const Eigen::VectorXd& Q, std::vector<double>& u) const {
    std::vector<double> q(Q.data(), Q.data() + n_);
    auto sol = u.empty() ? op_.solve(q, tol_in_) : op_.solve(q, tol_in_, u);
    u.assign(sol.u.values().begin(), sol.u.values().end());
    const Hill hl = c_.hill();
    Eigen::VectorXd out(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
      out[static_cast<Eigen::Index>(i)] =
          -(delta_[i] + hl.beta(q[i])) * q[i] + h1_[i] * op_.delayed(u, i);
    }
    return out;
  }

  Eigen::VectorXd F(const Eigen::VectorXd& Q, std::vector<double>& u) const {
    return D_ * Q - N(Q, u);
  }

  /// D - dN/dQ, with dN/dQ by forward differences (step 1e-7 (1 + |Q_i|)).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& Q, const Eigen::VectorXd& NQ,
                           const std::vector<double>& u) const {
    Eigen::MatrixXd J = D_;
    std::vector<double> uw;
    for (std::size_t i = 0; i < n_; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      Eigen::VectorXd Qp = Q;
      const double e = 1e-7 * (1.0 + std::abs(Q[ii]));
      Qp[ii] += e;
      uw = u;
      J.col(ii) -= (N(Qp, uw) - NQ) / e;
    }
    return J;
  }

 private:
  const DerivedCoefficients& c_;
  DifferenceOperator op_;
  std::size_t n_;
  Eigen::MatrixXd D_;
  double tol_in_;
  std::vector<double> delta_, h1_;
};

}  // namespace detail

/// Periodic solution of Q' = N(Q) by Fourier collocation on n nodes and
/// damped Newton. Requires H1-H3.
inline OrbitResult find_orbit_collocation(const DerivedCoefficients& c,
                                          const CollocationOptions& opt = {}) {
  const auto hyp = check_hypotheses(c);
  if (!(hyp.H1 && hyp.H2 && hyp.H3)) {
    throw HypothesisError("collocation orbit requires H1, H2 and H3");
  }
  const std::size_t n = opt.n ? opt.n : default_grid_size(c, 256);
  if (n < 128) throw DomainError("collocation: n must be at least 128");
  if (!(opt.tol > 0.0)) throw DomainError("collocation: tol must be positive");

  const AprioriBox box = choose_box(c);
  const double upper = 2.0 * box.R;

  Eigen::VectorXd Q0(static_cast<Eigen::Index>(n));
  if (opt.guess) {
    if (opt.guess->size() != n) throw DomainError("collocation: guess has wrong grid size");
    for (std::size_t i = 0; i < n; ++i) Q0[static_cast<Eigen::Index>(i)] = (*opt.guess)[i];
  } else {
    double g;
    try {
      g = equilibrium(c.params().averaged()).Q;
    } catch (const Error&) {
      g = std::sqrt(box.eps * box.R);
    }
    if (!(g > 0.0 && g <= upper)) g = std::sqrt(box.eps * box.R);
    Q0.setConstant(g);
  }

  const detail::CollocationSystem sys(c, n);
  auto inside = [upper](const Eigen::VectorXd& q) {
    return (q.array() > 0.0).all() && (q.array() <= upper).all();
  };
  if (!inside(Q0)) throw DomainError("collocation: initial guess outside (0, 2R]");

  struct Attempt {
    Eigen::VectorXd Q;
    double res;
    int iters;
    bool ok;
    bool left_range;
  };

  auto attempt = [&](double lambda_max) -> Attempt {
    Eigen::VectorXd Q = Q0;
    std::vector<double> u;
    Eigen::VectorXd NQ = sys.N(Q, u);
    Eigen::VectorXd F = sys.D() * Q - NQ;
    double res = F.lpNorm<Eigen::Infinity>();
    const double target = 1e-2 * opt.tol;
    for (int it = 1; it <= opt.max_iters; ++it) {
      if (res < target) return {Q, res, it - 1, true, false};
      const Eigen::MatrixXd J = sys.jacobian(Q, NQ, u);
      const Eigen::VectorXd dQ = -J.partialPivLu().solve(F);
      if (dQ.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, Q.lpNorm<Eigen::Infinity>())) {
        return {Q, res, it, res < opt.tol, false};
      }
      double lambda = lambda_max;
      bool accepted = false;
      bool blocked = false;
      while (lambda >= 1.0 / 1024.0) {
        Eigen::VectorXd trial = Q + lambda * dQ;
        if (!inside(trial)) {
          blocked = true;
          lambda *= 0.5;
          continue;
        }
        std::vector<double> ut = u;
        Eigen::VectorXd Nt = sys.N(trial, ut);
        Eigen::VectorXd Ft = sys.D() * trial - Nt;
        const double rt = Ft.lpNorm<Eigen::Infinity>();
        if (rt <= (1.0 - 1e-4 * lambda) * res) {
          Q = std::move(trial);
          u = std::move(ut);
          NQ = std::move(Nt);
          F = std::move(Ft);
          res = rt;
          accepted = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!accepted) return {Q, res, it, res < opt.tol, blocked};
    }
    return {Q, res, opt.max_iters, res < opt.tol, false};
  };

  Attempt a = attempt(1.0);
  if (!a.ok && a.left_range) a = attempt(0.5);
  if (!a.ok) {
    if (a.left_range) {
      throw ConvergenceError("collocation: Newton iterates kept leaving (0, 2R]", a.res);
    }
    throw ConvergenceError("collocation: Newton stagnated above tolerance", a.res);
  }

  OrbitResult out;
  out.method = OrbitMethod::collocation;
  out.newton_iters = a.iters;
  std::vector<double> qv(a.Q.data(), a.Q.data() + n);
  out.Q = PeriodicGridFn(c.period(), std::move(qv));
  out.residual = orbit_residual(c, out.Q, &out.u, &out.u_residual);
  out.converged = out.residual < opt.tol;
  out.in_box = out.Q.min() >= box.eps && out.Q.max() <= box.R;
  out.box = box;
  return out;
}

struct PoincareOptions {
  int max_iters = 500;
  double tol = 1e-10;
  int m = 0;           // steps per delay; 0: max(64, enough for h <= T/64)
  std::size_t n = 0;   // output grid; 0: default_grid_size(c, 256)
  std::optional<double> Q0;
  std::function<double(double)> phi;  // history on [-tau, 0]; default constant u of the averaged equilibrium
};

struct PoincareResult {
  OrbitResult orbit;
  int iterations = 0;
  double last_distance = std::numeric_limits<double>::infinity();
  bool converged = false;
  double Q0 = 0.0;  // Q at the fixed point's start time
};

/// Fixed point of the period map of the state (Q(0), u on [-tau, 0]),
/// iterated by simulation. The history handed to the next iteration is the
/// dense output of the last run; convergence is measured on the half-step
/// samples of the window. Non-convergence is reported, not thrown.
inline PoincareResult find_orbit_poincare(const DerivedCoefficients& c,
                                          const PoincareOptions& opt = {}) {
  const double T = c.period();
  const double tau = c.tau();
  int m = opt.m;
  if (m == 0) m = std::max(64, static_cast<int>(std::ceil(64.0 * tau / T)));
  const std::size_t n = opt.n ? opt.n : default_grid_size(c, 256);

  double q0;
  std::function<double(double)> phi;
  if (opt.Q0 && opt.phi) {
    q0 = *opt.Q0;
    phi = opt.phi;
  } else {
    double uq = 0.0;
    try {
      const auto e = equilibrium(c.params().averaged());
      q0 = e.Q;
      uq = e.u;
    } catch (const Error&) {
      q0 = c.rbar;
      uq = c.hill().j(q0);
    }
    if (opt.Q0) q0 = *opt.Q0;
    phi = opt.phi ? opt.phi : std::function<double(double)>([uq](double) { return uq; });
  }

  PoincareResult res;
  const long window = 2L * m;
  std::vector<double> prev(static_cast<std::size_t>(window + 1));
  const double half = 0.5 * tau / m;
  for (long g = 0; g <= window; ++g) prev[static_cast<std::size_t>(g)] = phi(-tau + half * static_cast<double>(g));

  Trajectory tr;
  for (int it = 1; it <= opt.max_iters; ++it) {
    // Run one step past T so the dense output covers [T - tau, T].
    tr = simulate(c, q0, phi, T + tau / m, m);
    std::vector<double> next(prev.size());
    for (long g = 0; g <= window; ++g) {
      next[static_cast<std::size_t>(g)] = tr.eval(T - tau + half * static_cast<double>(g));
    }
    const double q1 = tr.eval(T, true);
    double d = std::abs(q1 - q0);
    for (std::size_t k = 0; k < next.size(); ++k) d = std::max(d, std::abs(next[k] - prev[k]));
    res.iterations = it;
    res.last_distance = d;
    const Trajectory snapshot = tr;
    phi = [snapshot, T](double s) { return snapshot.eval(T + s); };
    q0 = q1;
    prev = std::move(next);
    if (d < opt.tol) {
      res.converged = true;
      break;
    }
  }

  res.Q0 = q0;
  // One more period from the converged state gives the orbit on the grid.
  tr = simulate(c, q0, phi, T + tau / m, m);
  std::vector<double> qv(n), uv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = T * static_cast<double>(i) / static_cast<double>(n);
    qv[i] = tr.eval(t, true);
    uv[i] = tr.eval(t);
  }
  OrbitResult& o = res.orbit;
  o.method = OrbitMethod::poincare;
  o.Q = PeriodicGridFn(T, std::move(qv));
  o.u = PeriodicGridFn(T, std::move(uv));
  o.newton_iters = 0;
  o.converged = res.converged;
  if (o.Q.min() > 0.0) {
    try {
      o.residual = orbit_residual(c, o.Q, nullptr, &o.u_residual);
      const auto box = choose_box(c);
      o.box = box;
      o.in_box = o.Q.min() >= box.eps && o.Q.max() <= box.R;
    } catch (const Error&) {
      // residual/box only meaningful under H1-H3
    }
  }
  return res;
}

/// Simulates forward from a computed orbit (Q(0) and the trigonometric
/// interpolant of u on [-tau, 0]) and returns the largest deviation of
/// Q(t) from the orbit at the grid nodes over `periods` periods.
inline double resimulation_drift(const DerivedCoefficients& c, const OrbitResult& orbit,
                                 int periods, int m) {
  const double T = c.period();
  const TrigInterpolant ui(orbit.u);
  const TrigInterpolant qi(orbit.Q);
  auto phi = [&ui](double s) { return std::max(ui(s), 0.0); };
  const auto tr = simulate(c, orbit.Q[0], phi, periods * T, m);
  const double t_end = tr.times.back();
  double drift = 0.0;
  const std::size_t n = orbit.Q.size();
  for (int k = 0; k < periods; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double t = k * T + orbit.Q.node(i);
      if (t > t_end) break;
      drift = std::max(drift, std::abs(tr.eval(t, true) - orbit.Q[i]));
    }
  }
  drift = std::max(drift, std::abs(tr.Q.back() - qi(t_end)));
  return drift;
}

}  // namespace hsc
