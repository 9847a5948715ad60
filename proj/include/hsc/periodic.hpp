#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "hsc/errors.hpp"

namespace hsc {

struct Harmonic {
  int order = 1;
  double cos_amp = 0.0;
  double sin_amp = 0.0;
};

/// A continuous T-periodic function in finite harmonic form
///
///   f(t) = c0 + sum_m ( a_m cos(2 pi m t / T) + b_m sin(2 pi m t / T) ).
///
/// Values are immutable; the antiderivative is exact, so integrals over
/// arbitrary windows carry only rounding error.
class PeriodicCoefficient {
 public:
  PeriodicCoefficient() = default;

  PeriodicCoefficient(double period, double mean, std::vector<Harmonic> harmonics = {})
      : period_(period), mean_(mean), harmonics_(std::move(harmonics)) {
    if (!(period_ > 0.0) || !std::isfinite(period_)) {
      throw DomainError("PeriodicCoefficient: period must be positive and finite");
    }
    for (const auto& h : harmonics_) {
      if (h.order < 1) throw DomainError("PeriodicCoefficient: harmonic order must be >= 1");
      if (!std::isfinite(h.cos_amp) || !std::isfinite(h.sin_amp)) {
        throw DomainError("PeriodicCoefficient: non-finite harmonic amplitude");
      }
    }
    if (!std::isfinite(mean_)) throw DomainError("PeriodicCoefficient: non-finite mean");
  }

  static PeriodicCoefficient constant(double period, double value) {
    return PeriodicCoefficient(period, value);
  }

  double period() const noexcept { return period_; }
  double mean() const noexcept { return mean_; }
  std::span<const Harmonic> harmonics() const noexcept { return harmonics_; }

  bool is_constant() const noexcept {
    return std::all_of(harmonics_.begin(), harmonics_.end(),
                       [](const Harmonic& h) { return h.cos_amp == 0.0 && h.sin_amp == 0.0; });
  }

  int highest_order() const noexcept {
    int m = 0;
    for (const auto& h : harmonics_) m = std::max(m, h.order);
    return m;
  }

  /// Same harmonic content, re-interpreted on a different period.
  PeriodicCoefficient with_period(double period) const {
    return PeriodicCoefficient(period, mean_, harmonics_);
  }

  double operator()(double t) const noexcept {
    const double theta = phase(t);
    double v = mean_;
    for (const auto& h : harmonics_) {
      const double a = h.order * theta;
      v += h.cos_amp * std::cos(a) + h.sin_amp * std::sin(a);
    }
    return v;
  }

  double eval(double t) const noexcept { return (*this)(t); }

  double derivative(double t) const noexcept {
    const double theta = phase(t);
    const double w = 2.0 * std::numbers::pi / period_;
    double v = 0.0;
    for (const auto& h : harmonics_) {
      const double a = h.order * theta;
      v += h.order * w * (-h.cos_amp * std::sin(a) + h.sin_amp * std::cos(a));
    }
    return v;
  }

  /// Exact integral over [t1, t2] (signed if t2 < t1).
  double integrate(double t1, double t2) const noexcept {
    double v = mean_ * (t2 - t1);
    if (harmonics_.empty()) return v;
    const double th1 = phase(t1);
    const double th2 = phase(t2);
    const double w = 2.0 * std::numbers::pi / period_;
    for (const auto& h : harmonics_) {
      const double s = 1.0 / (h.order * w);
      const double a1 = h.order * th1;
      const double a2 = h.order * th2;
      v += s * (h.cos_amp * (std::sin(a2) - std::sin(a1)) -
                h.sin_amp * (std::cos(a2) - std::cos(a1)));
    }
    return v;
  }

 private:
  // Phase in [0, 2 pi), computed from t reduced modulo the period so that
  // f(t) and f(t + T) agree to rounding.
  double phase(double t) const noexcept {
    double r = std::fmod(t, period_);
    if (r < 0.0) r += period_;
    return 2.0 * std::numbers::pi * (r / period_);
  }

  double period_ = 1.0;
  double mean_ = 0.0;
  std::vector<Harmonic> harmonics_;
};

struct Extrema {
  double min = 0.0;
  double argmin = 0.0;
  double max = 0.0;
  double argmax = 0.0;
};

namespace detail {

// Golden-section search for a minimum of f on [a, b].
template <class F>
std::pair<double, double> golden_min(F&& f, double a, double b, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < 200 && (b - a) > tol; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

// Refined minimum of a periodic callable. Candidates are discrete local
// minima of the scan whose sample value is within one cell-variation of the
// best sample; each is refined on its two-cell bracket.
template <class F>
std::pair<double, double> periodic_min(F&& f, double period, std::size_t n) {
  std::vector<double> s(n);
  const double dt = period / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = f(dt * static_cast<double>(i));

  std::size_t best = 0;
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] < s[best]) best = i;
    spread = std::max(spread, std::abs(s[(i + 1) % n] - s[i]));
  }
  double tmin = dt * static_cast<double>(best);
  double vmin = s[best];
  if (spread == 0.0) return {tmin, vmin};

  std::vector<std::size_t> cands;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = s[(i + n - 1) % n];
    const double r = s[(i + 1) % n];
    if (s[i] <= l && s[i] <= r && s[i] <= vmin + spread) cands.push_back(i);
  }
  std::sort(cands.begin(), cands.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  if (cands.size() > 64) cands.resize(64);

  const double tol = 1e-12 * std::max(1.0, period);
  for (std::size_t i : cands) {
    const double c = dt * static_cast<double>(i);
    auto [x, v] = golden_min(f, c - dt, c + dt, tol);
    if (v < vmin) {
      vmin = v;
      tmin = x;
    }
  }
  tmin = std::fmod(tmin, period);
  if (tmin < 0.0) tmin += period;
  return {tmin, vmin};
}

}  // namespace detail

/// Minimum and maximum of an arbitrary continuous T-periodic callable: a
/// uniform scan of `grid_n` samples followed by golden-section refinement
/// (tolerance 1e-12) of every competitive bracket. The returned min/max
/// bound every scanned sample.
template <class F>
Extrema periodic_extrema(F&& f, double period, std::size_t grid_n) {
  if (grid_n < 3) throw DomainError("periodic_extrema: need at least 3 samples");
  auto [tmin, vmin] = detail::periodic_min(f, period, grid_n);
  auto neg = [&f](double t) { return -f(t); };
  auto [tmax, vneg] = detail::periodic_min(neg, period, grid_n);
  return {vmin, tmin, -vneg, tmax};
}

inline Extrema extrema(const PeriodicCoefficient& f, std::size_t grid_n) {
  const auto needed = static_cast<std::size_t>(4 * (f.highest_order() + 1));
  if (grid_n < needed) {
    throw DomainError("extrema: grid_n must be at least 4*(highest harmonic order + 1)");
  }
  return periodic_extrema(f, f.period(), grid_n);
}

/// Default resolution used when extrema are needed internally.
inline Extrema extrema(const PeriodicCoefficient& f) {
  return extrema(f, std::max<std::size_t>(1024, 16 * (f.highest_order() + 1)));
}

}  // namespace hsc
