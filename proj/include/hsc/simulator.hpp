#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "hsc/errors.hpp"
#include "hsc/model.hpp"

namespace hsc {

/// Anything that supplies the coefficients of
///   Q'(t) = -(delta(t) + beta(Q)) Q + h1(t) u(t - tau),
///   u(t)  = j(Q(t)) + h2(t) u(t - tau).
template <class S>
concept DelaySystem = requires(const S& s, double t) {
  { s.hill() } -> std::convertible_to<Hill>;
  { s.tau() } -> std::convertible_to<double>;
  { s.delta(t) } -> std::convertible_to<double>;
  { s.h1(t) } -> std::convertible_to<double>;
  { s.h2(t) } -> std::convertible_to<double>;
};

/// Autonomous system with fixed (delta, h1, h2); used for the comparison
/// envelope and for constant-coefficient checks.
class ConstantSystem {
 public:
  ConstantSystem(Hill hill, double tau, double delta, double h1, double h2)
      : hill_(hill), tau_(tau), delta_(delta), h1_(h1), h2_(h2) {}

  Hill hill() const noexcept { return hill_; }
  double tau() const noexcept { return tau_; }
  double delta(double) const noexcept { return delta_; }
  double h1(double) const noexcept { return h1_; }
  double h2(double) const noexcept { return h2_; }

 private:
  Hill hill_;
  double tau_, delta_, h1_, h2_;
};

inline double default_guard_radius(const DerivedCoefficients& c) {
  if (!(c.h2_max < 1.0)) return std::numeric_limits<double>::infinity();
  try {
    return c2_radius(c);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

inline double default_guard_radius(const ConstantSystem& s) {
  if (!(s.h2(0.0) < 1.0) || !(s.delta(0.0) > 0.0)) return std::numeric_limits<double>::infinity();
  try {
    return c2_radius(s.hill(), s.delta(0.0), s.h1(0.0), s.h2(0.0));
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Samples of u on [t - tau, t] at spacing h/2 (h = tau/m), kept in a ring.
/// Nodes that fall on a multiple of tau after the start may carry a jump of
/// u, so every sample stores its left and right limit (equal elsewhere).
/// Sample index g is measured in half steps from the start time.
class History {
 public:
  template <class Phi>
  History(int m, Phi&& phi, double tau, double u0_right)
      : m_(m), half_(tau / (2.0 * m)), ring_(static_cast<std::size_t>(2 * m + 3)) {
    for (long g = -2L * m; g <= 0; ++g) {
      const double v = phi(static_cast<double>(g) * half_);
      slot(g) = {v, v};
    }
    slot(0).right = u0_right;
    head_ = 0;
  }

  int steps_per_delay() const noexcept { return m_; }
  long head() const noexcept { return head_; }
  long tail() const noexcept { return head_ - 2L * m_; }

  double left(long g) const { return at(g).left; }
  double right(long g) const { return at(g).right; }

  void push(double left, double right) {
    ++head_;
    slot(head_) = {left, right};
  }

  /// u at an arbitrary time offset s (relative to the start) inside the
  /// window: cubic Lagrange through four neighbouring half-step samples,
  /// exact at the samples. Stencils stay on one side of a seam.
  double eval(double s) const {
    const double x = s / half_;
    long g0 = static_cast<long>(std::floor(x));
    if (g0 < tail() || g0 > head_) throw DomainError("History::eval: time outside window");
    if (g0 == head_) return at(head_).right;
    const long seg = floor_div(g0, 2L * m_);
    const long lo = std::max(seg * 2L * m_, tail());
    const long hi = std::min((seg + 1) * 2L * m_, head_);
    long start = std::clamp(g0 - 1, lo, std::max(lo, hi - 3));
    const long count = std::min(4L, hi - start + 1);
    std::array<double, 4> ys{};
    std::array<double, 4> xs{};
    for (long k = 0; k < count; ++k) {
      const long g = start + k;
      xs[k] = static_cast<double>(g);
      ys[k] = (g == lo) ? at(g).right : (g == hi ? at(g).left : at(g).right);
    }
    return lagrange(xs, ys, static_cast<int>(count), x);
  }

 private:
  struct Sample {
    double left = 0.0;
    double right = 0.0;
  };

  static long floor_div(long a, long b) {
    long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  }

  static double lagrange(const std::array<double, 4>& xs, const std::array<double, 4>& ys, int n,
                         double x) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      double w = 1.0;
      for (int k = 0; k < n; ++k) {
        if (k != i) w *= (x - xs[k]) / (xs[i] - xs[k]);
      }
      v += w * ys[i];
    }
    return v;
  }

  Sample& slot(long g) {
    const auto n = static_cast<long>(ring_.size());
    return ring_[static_cast<std::size_t>(((g % n) + n) % n)];
  }
  const Sample& at(long g) const {
    if (g < tail() - 2 || g > head_) throw DomainError("History: sample outside window");
    const auto n = static_cast<long>(ring_.size());
    return ring_[static_cast<std::size_t>(((g % n) + n) % n)];
  }

  int m_;
  double half_;
  std::vector<Sample> ring_;
  long head_ = 0;
};

/// Output of simulate(). Node values at t0 + i h plus the half-step samples
/// needed for dense output and for quadrature over delay windows.
struct Trajectory {
  double t0 = 0.0;
  double h = 0.0;
  double tau = 0.0;
  int m = 0;

  std::vector<double> times;
  std::vector<double> Q;
  std::vector<double> u;  // right limits at the nodes
  std::vector<double> P;  // filled by recover_P on request

  // Half-step samples from t0 - tau to the last node; index g + 2m.
  std::vector<double> half_u_left;
  std::vector<double> half_u_right;
  // Half-step samples of Q from t0; index g.
  std::vector<double> half_Q;

  /// u(t0+) - phi(0): nonzero when the initial data are incompatible with
  /// the difference equation; u then jumps at t0 + k tau.
  double initial_mismatch = 0.0;

  std::size_t size() const noexcept { return times.size(); }
  long first_half_index() const noexcept { return -2L * m; }
  long last_half_index() const noexcept { return 2L * static_cast<long>(times.size() - 1); }
  double half_time(long g) const noexcept { return t0 + static_cast<double>(g) * 0.5 * h; }
  double u_left_at(long g) const { return half_u_left.at(static_cast<std::size_t>(g + 2L * m)); }
  double u_right_at(long g) const { return half_u_right.at(static_cast<std::size_t>(g + 2L * m)); }
  double Q_at_half(long g) const { return half_Q.at(static_cast<std::size_t>(g)); }

  /// Dense output of u (or Q when `q` is set) at absolute time t: cubic
  /// Lagrange through half-step samples inside one delay segment.
  double eval(double t, bool q = false) const {
    const double half = 0.5 * h;
    const double x = (t - t0) / half;
    const long first = q ? 0 : first_half_index();
    const long last = last_half_index();
    long g0 = static_cast<long>(std::floor(x + 1e-9));
    if (g0 < first || g0 > last || x > static_cast<double>(last) + 1e-9) {
      throw DomainError("Trajectory::eval: time outside the simulated range");
    }
    if (g0 == last) return q ? half_Q.back() : half_u_right.back();
    const long span = 2L * m;
    long seg = g0 >= 0 ? g0 / span : -1;
    const long lo = std::max(seg * span, first);
    const long hi = std::min((seg + 1) * span, last);
    const long start = std::clamp(g0 - 1, lo, std::max(lo, hi - 3));
    const long count = std::min(4L, hi - start + 1);
    double v = 0.0;
    for (long i = 0; i < count; ++i) {
      const long gi = start + i;
      double y;
      if (q) {
        y = Q_at_half(gi);
      } else {
        y = (gi == hi && gi != last) ? u_left_at(gi) : u_right_at(gi);
      }
      double w = 1.0;
      for (long k = 0; k < count; ++k) {
        if (k != i) w *= (x - static_cast<double>(start + k)) / static_cast<double>(i - k);
      }
      v += w * y;
    }
    return v;
  }
};

struct SimulateOptions {
  double t0 = 0.0;
  /// Upper bound for Q; default 10 * max(R, sup of the initial data) with R
  /// the a-priori radius of the system (infinite if it has none).
  std::optional<double> guard;
};

/// Method of steps for the delay system: classical RK4 on Q with step
/// h = tau/m. Stage values of u(t - tau) are read exactly from the half-step
/// history; after each step Q at the half node is rebuilt by cubic Hermite
/// interpolation (from Q and Q' at both ends) and u at the half node and the
/// new node follow algebraically from the difference equation.
///
/// `phi` is the initial history on [-tau, 0] in time relative to t0, and
/// the trajectory covers [t0, t0 + t_end].
template <DelaySystem S, class Phi>
Trajectory simulate(const S& sys, double Q0, Phi&& phi, double t_end, int m,
                    const SimulateOptions& opt = {}) {
  if (!(t_end > 0.0)) throw DomainError("simulate: t_end must be positive");
  if (m < 8) throw DomainError("simulate: need at least 8 steps per delay");
  if (!(Q0 >= 0.0)) throw DomainError("simulate: Q0 must be nonnegative");

  const Hill hill = sys.hill();
  const double tau = sys.tau();
  const double h = tau / m;
  const double t0 = opt.t0;
  const auto nsteps = static_cast<long>(std::floor(t_end / h + 1e-9));
  if (nsteps < 1) throw DomainError("simulate: horizon shorter than one step");

  Trajectory tr;
  tr.t0 = t0;
  tr.h = h;
  tr.tau = tau;
  tr.m = m;
  tr.times.reserve(static_cast<std::size_t>(nsteps + 1));
  tr.Q.reserve(static_cast<std::size_t>(nsteps + 1));
  tr.u.reserve(static_cast<std::size_t>(nsteps + 1));
  tr.half_u_left.reserve(static_cast<std::size_t>(2 * m + 2 * nsteps + 1));
  tr.half_u_right.reserve(static_cast<std::size_t>(2 * m + 2 * nsteps + 1));
  tr.half_Q.reserve(static_cast<std::size_t>(2 * nsteps + 1));

  double phi_sup = 0.0;
  for (long g = -2L * m; g <= 0; ++g) {
    const double v = phi(static_cast<double>(g) * 0.5 * h);
    if (!(v >= 0.0)) throw DomainError("simulate: initial history must be nonnegative");
    phi_sup = std::max(phi_sup, v);
  }
  const double u0 = hill.j(Q0) + sys.h2(t0) * phi(-tau);
  History hist(m, phi, tau, u0);
  tr.initial_mismatch = u0 - phi(0.0);

  for (long g = -2L * m; g <= 0; ++g) {
    tr.half_u_left.push_back(hist.left(g));
    tr.half_u_right.push_back(hist.right(g));
  }
  tr.half_Q.push_back(Q0);
  tr.times.push_back(t0);
  tr.Q.push_back(Q0);
  tr.u.push_back(u0);

  double guard;
  if (opt.guard) {
    guard = *opt.guard;
  } else {
    guard = 10.0 * std::max(default_guard_radius(sys), std::max(Q0, phi_sup));
  }

  constexpr double neg_tol = -1e-12;
  auto field = [&](double t, double q, double ud) {
    return -(sys.delta(t) + hill.beta(std::max(q, 0.0))) * q + sys.h1(t) * ud;
  };

  double q = Q0;
  for (long i = 0; i < nsteps; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    const long g = 2 * i;
    const double ud0 = hist.right(g - 2L * m);
    const double udm = hist.right(g - 2L * m + 1);
    const double ud1 = hist.left(g - 2L * m + 2);

    const double k1 = field(t, q, ud0);
    const double k2 = field(t + 0.5 * h, q + 0.5 * h * k1, udm);
    const double k3 = field(t + 0.5 * h, q + 0.5 * h * k2, udm);
    const double k4 = field(t + h, q + h * k3, ud1);
    const double qn = q + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    if (!(qn >= neg_tol)) throw SchemeError("simulate: Q became negative");
    if (!(qn <= guard)) throw SchemeError("simulate: Q left the a-priori bound (blow-up guard)");

    const double dq1 = field(t + h, std::max(qn, 0.0), ud1);
    const double qmid = 0.5 * (q + qn) + h / 8.0 * (k1 - dq1);
    const double umid =
        hill.j(std::max(qmid, 0.0)) + sys.h2(t + 0.5 * h) * hist.right(g - 2L * m + 1);
    const double h2n = sys.h2(t + h);
    const double jn = hill.j(std::max(qn, 0.0));
    const double un_left = jn + h2n * hist.left(g - 2L * m + 2);
    const double un_right = jn + h2n * hist.right(g - 2L * m + 2);
    if (!(umid >= neg_tol) || !(un_left >= neg_tol) || !(un_right >= neg_tol)) {
      throw SchemeError("simulate: u became negative");
    }

    hist.push(umid, umid);
    hist.push(un_left, un_right);
    q = qn;

    tr.half_u_left.push_back(umid);
    tr.half_u_right.push_back(umid);
    tr.half_u_left.push_back(un_left);
    tr.half_u_right.push_back(un_right);
    tr.half_Q.push_back(qmid);
    tr.half_Q.push_back(qn);
    tr.times.push_back(t + h);
    tr.Q.push_back(qn);
    tr.u.push_back(un_right);
  }
  return tr;
}

/// Convenience overload for a constant initial history.
template <DelaySystem S>
Trajectory simulate(const S& sys, double Q0, double phi_const, double t_end, int m,
                    const SimulateOptions& opt = {}) {
  return simulate(sys, Q0, [phi_const](double) { return phi_const; }, t_end, m, opt);
}

/// P(t) = int_{t - tau}^{t} exp(-int_s^t gamma) u(s) ds at every node, by
/// composite Simpson on the half-step samples (panels never straddle a
/// jump of u).
inline std::vector<double> recover_P(const Trajectory& tr, const ModelParams& p) {
  if (tr.times.empty() || tr.half_u_right.size() < static_cast<std::size_t>(2 * tr.m + 1)) {
    throw DomainError("recover_P: trajectory lacks the initial history");
  }
  if (std::abs(tr.tau - p.tau) > 1e-12 * p.tau) throw DomainError("recover_P: delay mismatch");
  std::vector<double> P(tr.times.size());
  const long m = tr.m;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double t = tr.times[i];
    const long gi = 2L * static_cast<long>(i);
    auto kernel = [&](long g) { return std::exp(-p.gamma.integrate(tr.half_time(g), t)); };
    double acc = 0.0;
    for (long j = 0; j < m; ++j) {
      const long ga = gi - 2L * m + 2 * j;
      const double fa = kernel(ga) * tr.u_right_at(ga);
      const double fm = kernel(ga + 1) * tr.u_right_at(ga + 1);
      const double fb = kernel(ga + 2) * tr.u_left_at(ga + 2);
      acc += tr.h / 6.0 * (fa + 4.0 * fm + fb);
    }
    P[i] = std::max(acc, 0.0);
  }
  return P;
}

}  // namespace hsc
