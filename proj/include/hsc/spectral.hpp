#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "hsc/errors.hpp"
#include "hsc/model.hpp"

namespace hsc {

/// Coefficients of the linearization at the autonomous equilibrium,
///   A psi'(t + tau) + Bc psi(t + tau) = a psi'(t) + b psi(t),
/// together with the base frequency omega = 2 pi / T.
struct CharacteristicData {
  double A = 1.0;
  double Bc = 0.0;     // delta + j'(Qbar)
  double a = 0.0;      // h2
  double b = 0.0;      // 2 e^{-gamma tau} (K delta + j'(Qbar))
  double omega = 0.0;  // 2 pi / T
  double Qbar = 0.0;
};

inline CharacteristicData characteristic_coeffs(const ModelParams& p) {
  if (!p.is_constant()) {
    throw UnsupportedModeError("characteristic_coeffs: coefficients must be constant");
  }
  const Equilibrium eq = equilibrium(p);
  const double d = p.delta.mean();
  const double k = p.K.mean();
  const double e = std::exp(-p.gamma.mean() * p.tau);
  const double jp = p.hill().j_prime(eq.Q);
  CharacteristicData cd;
  cd.A = 1.0;
  cd.Bc = d + jp;
  cd.a = 2.0 * k * e;
  cd.b = 2.0 * e * (k * d + jp);
  cd.omega = 2.0 * std::numbers::pi / p.period;
  cd.Qbar = eq.Q;
  return cd;
}

/// H(z) = (a i z + b) / (A i z + Bc).
inline std::complex<double> homography_eval(const CharacteristicData& cd, double z) {
  const std::complex<double> den(cd.Bc, cd.A * z);
  if (den == std::complex<double>(0.0, 0.0)) throw DomainError("homography: pole at z = 0 (Bc = 0)");
  return std::complex<double>(cd.b, cd.a * z) / den;
}

struct ResonancePoint {
  double r_star = 0.0;
  double eta = 0.0;  // arg H(r_star) in [0, 2 pi)
};

inline double wrap_angle(double x) {
  double w = std::fmod(x, 2.0 * std::numbers::pi);
  if (w < 0.0) w += 2.0 * std::numbers::pi;
  return w;
}

/// Positive r with |H(r)| = 1, when it exists (b^2 > Bc^2 under a < A).
inline std::optional<ResonancePoint> resonance_radius(const CharacteristicData& cd) {
  if (!(std::abs(cd.a) < cd.A)) throw ContractionError("resonance_radius: requires a < A (H1)");
  const double num = cd.b * cd.b - cd.Bc * cd.Bc;
  if (!(num > 0.0)) return std::nullopt;
  ResonancePoint rp;
  rp.r_star = std::sqrt(num / (cd.A * cd.A - cd.a * cd.a));
  rp.eta = wrap_angle(std::arg(homography_eval(cd, rp.r_star)));
  return rp;
}

struct DegenerateTau {
  double tau = 0.0;
  int k = 0;
  long l = 0;
};

/// Delays in [tau_lo, tau_hi] at which the mode k (k in [k_lo, k_hi],
/// k != 0) solves the characteristic equation: requires |k| omega to match
/// r_star to relative 1e-9, then tau = (arg H(k omega) + 2 pi l) / (k omega).
inline std::vector<DegenerateTau> degenerate_taus(const CharacteristicData& cd, int k_lo, int k_hi,
                                                  double tau_lo, double tau_hi) {
  std::vector<DegenerateTau> out;
  const auto rp = resonance_radius(cd);
  if (!rp || tau_hi < tau_lo) return out;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int k = k_lo; k <= k_hi; ++k) {
    if (k == 0) continue;
    const double kw = k * cd.omega;
    if (std::abs(std::abs(kw) - rp->r_star) > 1e-9 * rp->r_star) continue;
    const double eta_k = wrap_angle(std::arg(homography_eval(cd, kw)));
    // tau = (eta_k + 2 pi l) / kw within the window, for either sign of kw
    const double x_lo = std::min(tau_lo * kw, tau_hi * kw);
    const double x_hi = std::max(tau_lo * kw, tau_hi * kw);
    const auto l_lo = static_cast<long>(std::ceil((x_lo - eta_k) / two_pi));
    const auto l_hi = static_cast<long>(std::floor((x_hi - eta_k) / two_pi));
    for (long l = l_lo; l <= l_hi; ++l) {
      const double tau = (eta_k + two_pi * static_cast<double>(l)) / kw;
      if (tau >= tau_lo && tau <= tau_hi) out.push_back({tau, k, l});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const DegenerateTau& x, const DegenerateTau& y) { return x.tau < y.tau || (x.tau == y.tau && x.k < y.k); });
  return out;
}

struct MarginResult {
  double margin = 0.0;     // min over all integer k of |e^{i k w tau} - H(k w)|, bounded below
  int k_argmin = 0;
  int k_checked = 0;       // modes 0..k_checked evaluated explicitly
  double tail_bound = 0.0; // lower bound for every |k| > k_checked
};

/// Non-resonance certificate. Modes |k| <= K are evaluated; K starts at
/// k_max and doubles until K omega > 2 max(r_star, |Bc|, 1) and
/// |H(K omega)| <= (1 + a)/2. Since |H(z)|^2 is monotone in z^2 between
/// b^2/Bc^2 and a^2, every higher mode is then at distance at least
/// 1 - max(|H(K omega)|, a) from the unit circle. Negative k mirror positive
/// k by conjugation.
inline MarginResult nonresonance_margin(const CharacteristicData& cd, double tau, int k_max = 1024) {
  if (!(std::abs(cd.a) < cd.A)) throw ContractionError("nonresonance_margin: requires a < A (H1)");
  if (k_max < 1) throw DomainError("nonresonance_margin: k_max must be positive");
  const auto rp = resonance_radius(cd);
  const double need = 2.0 * std::max({rp ? rp->r_star : 0.0, std::abs(cd.Bc), 1.0});
  long K = k_max;
  for (int guard = 0; guard < 40; ++guard) {
    const double kw = static_cast<double>(K) * cd.omega;
    if (kw > need && std::abs(homography_eval(cd, kw)) <= 0.5 * (1.0 + std::abs(cd.a))) break;
    K *= 2;
  }
  if (K > (1L << 30)) throw DomainError("nonresonance_margin: tail bound not reachable");

  MarginResult res;
  res.margin = std::numeric_limits<double>::infinity();
  for (long k = 0; k <= K; ++k) {
    const double kw = static_cast<double>(k) * cd.omega;
    std::complex<double> h;
    if (k == 0 && cd.Bc == 0.0) {
      // Pole of H at the zero mode: characteristic relation reads b = 0.
      const double d = std::abs(cd.b);
      if (d < res.margin) {
        res.margin = d;
        res.k_argmin = 0;
      }
      continue;
    }
    h = homography_eval(cd, kw);
    const std::complex<double> e = std::polar(1.0, kw * tau);
    const double d = std::abs(e - h);
    if (d < res.margin) {
      res.margin = d;
      res.k_argmin = static_cast<int>(k);
    }
  }
  res.k_checked = static_cast<int>(K);
  res.tail_bound =
      1.0 - std::max(std::abs(homography_eval(cd, static_cast<double>(K) * cd.omega)), std::abs(cd.a));
  res.margin = std::min(res.margin, res.tail_bound);
  return res;
}

struct ResonanceReport {
  CharacteristicData data;
  bool intersects_unit_circle = false;
  std::optional<double> r_star;
  std::optional<double> eta;
  std::vector<DegenerateTau> degenerate;
  MarginResult margin;
};

inline ResonanceReport resonance_report(const ModelParams& p, int k_window, double tau_lo,
                                        double tau_hi, int k_max = 1024) {
  ResonanceReport r;
  r.data = characteristic_coeffs(p);
  if (const auto rp = resonance_radius(r.data)) {
    r.intersects_unit_circle = true;
    r.r_star = rp->r_star;
    r.eta = rp->eta;
  }
  r.degenerate = degenerate_taus(r.data, -k_window, k_window, tau_lo, tau_hi);
  r.margin = nonresonance_margin(r.data, p.tau, k_max);
  return r;
}

}  // namespace hsc
