#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "hsc/errors.hpp"
#include "hsc/grid.hpp"
#include "hsc/model.hpp"

namespace hsc {

struct USolveResult {
  PeriodicGridFn u;
  int iterations = 0;
  double residual = 0.0;  // sup |u - j(Q) - h2 * u(. - tau)| recomputed on the grid
  double contraction_rate_est = 0.0;
};

/// The periodic difference equation u(t) = j(Q(t)) + h2(t) u(t - tau)
/// discretized on an n-point grid. h2 is sampled once; the tau-shift is
/// periodic linear interpolation between the two bracketing nodes, so the
/// discrete operator contracts with constant max(h2) exactly as the
/// continuous one does.
class DifferenceOperator {
 public:
  DifferenceOperator(const DerivedCoefficients& c, std::size_t n)
      : hill_(c.hill()), n_(n), h2_max_(c.h2_max), period_(c.period()) {
    if (n < 2) throw DomainError("DifferenceOperator: grid too small");
    if (!(c.h2_max < 1.0)) {
      throw ContractionError("difference equation is not contractive: max(h2) >= 1 (H1 fails)");
    }
    const double dt = c.period() / static_cast<double>(n);
    h2_.resize(n);
    for (std::size_t i = 0; i < n; ++i) h2_[i] = c.h2(dt * static_cast<double>(i));

    // t_i - tau lies between nodes i - lag - 1 and i - lag.
    const double s = c.tau() / dt;
    double lag = std::floor(s);
    double frac = s - lag;
    if (frac < 1e-12) frac = 0.0;
    if (frac > 1.0 - 1e-12) {
      frac = 0.0;
      lag += 1.0;
    }
    lag_ = static_cast<std::size_t>(lag) % n;
    frac_ = frac;
  }

  std::size_t size() const noexcept { return n_; }
  double h2_max() const noexcept { return h2_max_; }
  std::span<const double> h2() const noexcept { return h2_; }
  /// True when tau is an integer multiple of the grid step (exact shift).
  bool on_grid() const noexcept { return frac_ == 0.0; }

  double delayed(std::span<const double> u, std::size_t i) const noexcept {
    const std::size_t a = (i + n_ - lag_) % n_;
    if (frac_ == 0.0) return u[a];
    const std::size_t b = (a + n_ - 1) % n_;
    return (1.0 - frac_) * u[a] + frac_ * u[b];
  }

  double residual(std::span<const double> q, std::span<const double> u) const {
    double r = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      r = std::max(r, std::abs(u[i] - hill_.j(q[i]) - h2_[i] * delayed(u, i)));
    }
    return r;
  }

  /// Contraction iteration u_{k+1} = j(Q) + h2 * shift(u_k), started from
  /// `u0` (zero when empty). Stops once the sup-norm step drops below
  /// tol * (1 - max(h2)), which bounds the distance to the fixed point by tol.
  USolveResult solve(std::span<const double> q, double tol,
                     std::span<const double> u0 = {}) const {
    if (q.size() != n_) throw DomainError("solve_u: grid size mismatch");
    if (!(tol > 0.0)) throw DomainError("solve_u: tol must be positive");
    std::vector<double> jq(n_);
    double jsup = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (q[i] < 0.0) throw DomainError("solve_u: Q must be nonnegative");
      jq[i] = hill_.j(q[i]);
      jsup = std::max(jsup, jq[i]);
    }
    std::vector<double> u(n_, 0.0);
    if (!u0.empty()) {
      if (u0.size() != n_) throw DomainError("solve_u: initial iterate size mismatch");
      std::copy(u0.begin(), u0.end(), u.begin());
    }
    double scale = std::max(1.0, jsup / (1.0 - h2_max_));
    for (double v : u) scale = std::max(scale, std::abs(v));

    int budget = 50;
    if (h2_max_ > 0.0) {
      const double need = std::log(tol / scale) / std::log(h2_max_);
      if (need > 0.0) budget += static_cast<int>(std::ceil(need));
    }

    const double stop = tol * (1.0 - h2_max_);
    const double noise = 1e3 * std::numeric_limits<double>::epsilon() * scale;
    std::vector<double> next(n_);
    double prev_step = -1.0;
    double rate = 0.0;
    int it = 0;
    bool done = false;
    while (it < budget) {
      ++it;
      double step = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        next[i] = jq[i] + h2_[i] * delayed(u, i);
        step = std::max(step, std::abs(next[i] - u[i]));
      }
      u.swap(next);
      if (prev_step > noise && step > noise) rate = std::max(rate, step / prev_step);
      prev_step = step;
      if (step < stop) {
        done = true;
        break;
      }
    }
    if (!done) {
      throw ConvergenceError("solve_u: iteration budget exhausted", prev_step);
    }
    USolveResult r;
    r.residual = residual(q, u);
    r.iterations = it;
    r.contraction_rate_est = rate;
    r.u = PeriodicGridFn(period_, std::move(u));
    return r;
  }

  double period() const noexcept { return period_; }

 private:
  Hill hill_;
  std::size_t n_;
  double h2_max_;
  double period_;
  std::vector<double> h2_;
  std::size_t lag_ = 0;
  double frac_ = 0.0;
};

/// Unique T-periodic solution of the difference equation for given Q.
inline USolveResult solve_u(const PeriodicGridFn& q, const DerivedCoefficients& c, double tol,
                            const std::optional<PeriodicGridFn>& u0 = std::nullopt) {
  if (std::abs(q.period() - c.period()) > 1e-12 * c.period()) {
    throw DomainError("solve_u: grid period differs from model period");
  }
  DifferenceOperator op(c, q.size());
  if (u0) return op.solve(q.values(), tol, u0->values());
  return op.solve(q.values(), tol);
}

/// Checks the a-priori band
///   beta(eps) eps / (1 - min h2) <= u(t_i) <= B / (1 - max h2)
/// at every grid node.
inline bool u_box_check(const PeriodicGridFn& q, const PeriodicGridFn& u,
                        const DerivedCoefficients& c, double eps) {
  if (!(eps > 0.0) || eps > q.min()) throw DomainError("u_box_check: requires 0 < eps <= min(Q)");
  if (q.size() != u.size()) throw DomainError("u_box_check: grid size mismatch");
  const Hill h = c.hill();
  const double lower = h.beta(eps) * eps / (1.0 - c.h2_min);
  const double upper = c.B / (1.0 - c.h2_max);
  const double slack = 1e-12;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < lower * (1.0 - slack) || u[i] > upper * (1.0 + slack)) return false;
  }
  return true;
}

}  // namespace hsc
