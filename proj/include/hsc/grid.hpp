#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hsc/errors.hpp"

namespace hsc {

/// A T-periodic function sampled at t_i = i T / n, i = 0..n-1. Off-grid
/// values come from periodic piecewise-linear interpolation, whose sup-norm
/// operator norm is exactly 1.
class PeriodicGridFn {
 public:
  PeriodicGridFn() = default;

  PeriodicGridFn(double period, std::vector<double> values)
      : period_(period), values_(std::move(values)) {
    if (!(period_ > 0.0)) throw DomainError("PeriodicGridFn: period must be positive");
    if (values_.empty()) throw DomainError("PeriodicGridFn: no samples");
  }

  template <class F>
  static PeriodicGridFn sample(double period, std::size_t n, F&& f) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = f(period * static_cast<double>(i) / n);
    return PeriodicGridFn(period, std::move(v));
  }

  static PeriodicGridFn constant(double period, std::size_t n, double c) {
    return PeriodicGridFn(period, std::vector<double>(n, c));
  }

  std::size_t size() const noexcept { return values_.size(); }
  double period() const noexcept { return period_; }
  double step() const noexcept { return period_ / static_cast<double>(values_.size()); }
  double node(std::size_t i) const noexcept { return step() * static_cast<double>(i); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  double operator()(double t) const noexcept {
    const double n = static_cast<double>(values_.size());
    double s = t / period_ * n;
    double fl = std::floor(s);
    double w = s - fl;
    auto k = static_cast<long long>(fl) % static_cast<long long>(values_.size());
    if (k < 0) k += static_cast<long long>(values_.size());
    const auto i0 = static_cast<std::size_t>(k);
    const auto i1 = (i0 + 1) % values_.size();
    return (1.0 - w) * values_[i0] + w * values_[i1];
  }

  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double mean() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s / static_cast<double>(values_.size());
  }

 private:
  double period_ = 1.0;
  std::vector<double> values_;
};

inline double sup_distance(const PeriodicGridFn& a, const PeriodicGridFn& b) {
  if (a.size() != b.size()) throw DomainError("sup_distance: grid size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Trigonometric interpolant of a PeriodicGridFn (Nyquist mode split
/// symmetrically for even n). Used where spectral accuracy between grid
/// nodes matters: residual verification and restarting simulations from a
/// computed orbit.
class TrigInterpolant {
 public:
  explicit TrigInterpolant(const PeriodicGridFn& f) : period_(f.period()), n_(f.size()) {
    const std::size_t n = n_;
    const std::size_t kmax = n / 2;
    coeffs_.assign(kmax + 1, {0.0, 0.0});
    for (std::size_t k = 0; k <= kmax; ++k) {
      std::complex<double> c{0.0, 0.0};
      for (std::size_t i = 0; i < n; ++i) {
        const double a = -2.0 * std::numbers::pi * static_cast<double>((k * i) % n) / n;
        c += f[i] * std::complex<double>(std::cos(a), std::sin(a));
      }
      coeffs_[k] = c / static_cast<double>(n);
    }
  }

  double operator()(double t) const { return eval(t, 0); }
  double derivative(double t) const { return eval(t, 1); }

 private:
  double eval(double t, int deriv) const {
    const double w = 2.0 * std::numbers::pi / period_;
    const std::size_t kmax = n_ / 2;
    const bool even = n_ % 2 == 0;
    double v = deriv == 0 ? coeffs_[0].real() : 0.0;
    for (std::size_t k = 1; k <= kmax; ++k) {
      const double kk = static_cast<double>(k);
      // c_k e^{ikwt} + conj(c_k) e^{-ikwt}; Nyquist mode enters with weight 1/2
      const double weight = (even && k == kmax) ? 1.0 : 2.0;
      const std::complex<double> e(std::cos(kk * w * t), std::sin(kk * w * t));
      if (deriv == 0) {
        v += weight * (coeffs_[k] * e).real();
      } else {
        v += weight * (coeffs_[k] * e * std::complex<double>(0.0, kk * w)).real();
      }
    }
    return v;
  }

  double period_;
  std::size_t n_;
  std::vector<std::complex<double>> coeffs_;
};

/// Fourier spectral differentiation matrix on n equispaced points of a
/// period T (cotangent form for even n, cosecant form for odd n).
inline Eigen::MatrixXd fourier_diff_matrix(std::size_t n, double period) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
  const double scale = 2.0 * std::numbers::pi / period;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const long long d = static_cast<long long>(i) - static_cast<long long>(j);
      const double sign = (d % 2 == 0) ? 1.0 : -1.0;
      const double x = static_cast<double>(d) * h / 2.0;
      const double v = (n % 2 == 0) ? 0.5 * sign / std::tan(x) : 0.5 * sign / std::sin(x);
      D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scale * v;
    }
  }
  return D;
}

}  // namespace hsc
