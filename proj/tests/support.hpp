#pragma once

// Independent oracles and seeded parameter draws shared by the test suites.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "hsc/model.hpp"

namespace hsc::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline double log_uniform(Rng& rng, double a, double b) {
  return std::exp(uniform(rng, std::log(a), std::log(b)));
}

/// Adaptive Simpson quadrature, written independently of the library.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int depth = 50) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
          int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid);
    const double rm = 0.5 * (mid + hi);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    const double diff = left + right - whole;
    if (d <= 0 || std::abs(diff) <= 15.0 * eps) return left + right + diff / 15.0;
    return rec(lo, mid, flo, flm, fmid, left, eps / 2.0, d - 1) +
           rec(mid, hi, fmid, frm, fhi, right, eps / 2.0, d - 1);
  };
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

/// Straight evaluation of the displayed hypothesis inequalities for
/// constant data, with no use of the library's derived quantities.
struct ConstantTruth {
  double h1, h2, alpha;
  bool H1, H2, H3;
};

inline ConstantTruth constant_truth(double beta0, double tau, double delta, double K,
                                    double gamma) {
  ConstantTruth t{};
  const double e = std::exp(-gamma * tau);
  t.h1 = 2.0 * (1.0 - K) * e;
  t.h2 = 2.0 * K * e;
  t.H1 = t.h2 < 1.0;
  t.alpha = t.h1 / (1.0 - t.h2) - 1.0;
  t.H2 = t.H1 && t.alpha > 0.0;
  t.H3 = t.H1 && delta < t.alpha * beta0;
  return t;
}

/// Raw constant-parameter draw (no hypothesis filtering).
inline ModelParams draw_constant(Rng& rng, double period = 1.0) {
  const double beta0 = uniform(rng, 0.5, 3.0);
  const double r = uniform(rng, 1.5, 4.0);
  const double tau = uniform(rng, 0.1, 3.0);
  const double delta = log_uniform(rng, 0.01, 3.0);
  const double K = uniform(rng, 0.05, 0.9);
  const double gamma = log_uniform(rng, 0.01, 1.5);
  return ModelParams::constant(beta0, r, tau, period, delta, K, gamma);
}

/// Constant draw satisfying H1-H3 (rejection sampling).
inline ModelParams draw_constant_valid(Rng& rng, double period = 1.0) {
  for (;;) {
    ModelParams p = draw_constant(rng, period);
    const auto t = constant_truth(p.beta0, p.tau, p.delta.mean(), p.K.mean(), p.gamma.mean());
    if (t.H1 && t.H2 && t.H3) return p;
  }
}

/// Coefficient with the given mean and one or two random harmonics whose
/// total amplitude is at most `rel_amp` times the mean.
inline PeriodicCoefficient draw_periodic(Rng& rng, double period, double mean, double rel_amp) {
  const int count = 1 + static_cast<int>(rng() % 2);
  std::vector<Harmonic> hs;
  double budget = rel_amp * mean;
  for (int k = 0; k < count; ++k) {
    const double amp = uniform(rng, 0.0, budget / count);
    const double ph = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    hs.push_back({k + 1, amp * std::cos(ph), amp * std::sin(ph)});
  }
  return PeriodicCoefficient(period, mean, hs);
}

/// Slowest decay rate of the linearized constant system
///   Q' = -(d + b0) Q + h1 u(t - tau),  u = b0 Q + h2 u(t - tau),
/// i.e. -lambda for the rightmost real root of
///   (lambda + d + b0)(1 - h2 e^{-lambda tau}) = h1 b0 e^{-lambda tau}.
/// The system is cooperative, so that root dominates. Returns 0 when the
/// zero-mode gain h1 b0 / ((d + b0)(1 - h2)) is not below one.
inline double linear_decay_rate(double d, double h1, double h2, double b0, double tau) {
  auto f = [&](double lam) {
    const double e = std::exp(-lam * tau);
    return (lam + d + b0) * (1.0 - h2 * e) - h1 * b0 * e;
  };
  if (!(f(0.0) > 0.0)) return 0.0;
  // f(0) > 0; step left until the sign changes (f < 0 once h2 e^{-lam tau} > 1
  // or lam < -(d + b0)).
  double hi = 0.0, lo = -1e-3;
  while (f(lo) > 0.0) {
    hi = lo;
    lo *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return -0.5 * (lo + hi);
}

/// Periodic draw in the H3' regime: beta0 in [0.3, 2], r in [1.5, 4],
/// tau in [0.1, 2], T in [1, 3], harmonics at most 20% of the means,
/// min(delta) >= max(1.25 beta0 alpha_max, d0) with d0 log-uniform on
/// [0.3, 2]. The draw is kept when the linearized envelope (eps_env = 0.01)
/// decays at least like e^{-12} over 50 periods, the regime in which decay
/// to 1e-3 of the initial size is observable on that horizon.
inline ModelParams draw_h3prime(Rng& rng) {
  for (;;) {
    const double T = uniform(rng, 1.0, 3.0);
    ModelParams p = ModelParams::constant(uniform(rng, 0.3, 2.0), uniform(rng, 1.5, 4.0),
                                          uniform(rng, 0.1, 2.0), T, 1.0, 0.3, 0.5);
    p.K = draw_periodic(rng, T, uniform(rng, 0.05, 0.6), 0.2);
    p.gamma = draw_periodic(rng, T, uniform(rng, 0.2, 1.5), 0.2);
    const double amp = uniform(rng, 0.0, 0.2);
    p.delta = draw_periodic(rng, T, 1.0, amp);
    const DerivedCoefficients probe(p);
    if (!(probe.h2_max < 1.0)) continue;
    const double need = std::max(1.25 * p.beta0 * probe.alpha_max, log_uniform(rng, 0.3, 2.0));
    // rescale delta so that its minimum equals `need`
    const double scale = need / probe.delta_min;
    std::vector<Harmonic> hs(p.delta.harmonics().begin(), p.delta.harmonics().end());
    for (auto& h : hs) {
      h.cos_amp *= scale;
      h.sin_amp *= scale;
    }
    p.delta = PeriodicCoefficient(T, p.delta.mean() * scale, hs);
    if (!check_hypotheses(p).H3prime) continue;
    const double e = 0.01;
    const double rate = linear_decay_rate(need - e, probe.h1_max + e, probe.h2_max + e, p.beta0, p.tau);
    if (rate * 50.0 * T >= 12.0) return p;
  }
}

}  // namespace hsc::testing
