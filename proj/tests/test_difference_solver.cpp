#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "hsc/difference_solver.hpp"
#include "support.hpp"

using namespace hsc;
using Catch::Matchers::WithinAbs;

namespace {

// Random parameters with periodic K and gamma satisfying H1.
DerivedCoefficients draw_contractive(testing::Rng& rng, double period) {
  for (;;) {
    ModelParams p = testing::draw_constant(rng, period);
    p.K = testing::draw_periodic(rng, period, p.K.mean(), 0.2);
    p.gamma = testing::draw_periodic(rng, period, p.gamma.mean(), 0.2);
    if (!check_hypotheses(p).H1) continue;
    return DerivedCoefficients(p);
  }
}

PeriodicGridFn smooth_positive(testing::Rng& rng, double period, std::size_t n, double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  const double amp = 0.5 * (hi - lo);
  const double a1 = testing::uniform(rng, 0.0, 0.6) * amp;
  const double a2 = testing::uniform(rng, 0.0, 0.4) * amp;
  const double ph = testing::uniform(rng, 0.0, 6.3);
  return PeriodicGridFn::sample(period, n, [&](double t) {
    const double w = 2 * std::numbers::pi * t / period;
    return mid + a1 * std::cos(w + ph) + a2 * std::sin(2 * w);
  });
}

}  // namespace

TEST_CASE("constant Q gives the geometric-series fixed point") {
  const DerivedCoefficients c(ModelParams::constant(2.0, 3.0, 1.0, 1.0, 0.5, 0.1, 0.2));
  const double q = 0.8;
  const auto r = solve_u(PeriodicGridFn::constant(1.0, 64, q), c, 1e-13);
  const double expect = c.hill().j(q) / (1.0 - c.h2(0.0));
  for (std::size_t i = 0; i < 64; ++i) CHECK_THAT(r.u[i], WithinAbs(expect, 1e-12));
}

TEST_CASE("zero Q gives zero u") {
  const DerivedCoefficients c(ModelParams::constant(2.0, 3.0, 0.7, 1.3, 0.5, 0.3, 0.2));
  const auto r = solve_u(PeriodicGridFn::constant(1.3, 50, 0.0), c, 1e-12);
  CHECK(r.u.max() == 0.0);
  CHECK(r.u.min() == 0.0);
}

TEST_CASE("non-contractive data is rejected") {
  const DerivedCoefficients c(ModelParams::constant(2.0, 3.0, 1.0, 1.0, 0.5, 0.6, 0.01));
  CHECK_THROWS_AS(solve_u(PeriodicGridFn::constant(1.0, 16, 1.0), c, 1e-10), ContractionError);
}

TEST_CASE("fixed point is independent of the initial iterate and contracts at rate max h2") {
  testing::Rng rng(31);
  for (int k = 0; k < 20; ++k) {
    const double T = testing::uniform(rng, 0.5, 3.0);
    const auto c = draw_contractive(rng, T);
    const auto q = smooth_positive(rng, T, 96, 0.1, 2.0);
    const auto a = solve_u(q, c, 1e-12);
    const auto u0 = PeriodicGridFn::constant(T, 96, 50.0);
    const auto b = solve_u(q, c, 1e-12, u0);
    CHECK(a.residual < 1e-10);
    CHECK(b.residual < 1e-10);
    CHECK(sup_distance(a.u, b.u) < 2e-10);
    CHECK(a.contraction_rate_est <= c.h2_max + 0.05);
  }
}

TEST_CASE("grid refinement converges at second order for an off-grid delay") {
  ModelParams p = ModelParams::constant(1.5, 2.5, std::sqrt(2.0) / 3.0, 1.0, 0.4, 0.35, 0.3);
  p.K = PeriodicCoefficient(1.0, 0.35, {Harmonic{1, 0.05, 0.02}});
  const DerivedCoefficients c(p);
  auto qf = [](double t) {
    return 1.0 + 0.4 * std::cos(2 * std::numbers::pi * t) + 0.1 * std::sin(6 * std::numbers::pi * t);
  };
  const std::size_t fine = 1u << 15;
  const auto ref = solve_u(PeriodicGridFn::sample(1.0, fine, qf), c, 1e-15).u;
  // The interpolation weight frac(1 - frac) changes with n, so single
  // ratios fluctuate; the least-squares slope of log(error) is the check.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t n = 64; n <= 2048; n *= 2) {
    CHECK_FALSE(DifferenceOperator(c, n).on_grid());
    const auto u = solve_u(PeriodicGridFn::sample(1.0, n, qf), c, 1e-15).u;
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::abs(u[i] - ref[i * (fine / n)]));
    const double x = std::log(static_cast<double>(n)), y = std::log(e);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  INFO("fitted order " << -slope);
  CHECK(-slope > 1.6);
  CHECK(-slope < 2.4);
}

TEST_CASE("a priori band for u") {
  const DerivedCoefficients c(ModelParams::constant(2.0, 3.0, 1.0, 1.0, 0.5, 0.1, 0.2));
  const double q = 0.9;
  const auto qg = PeriodicGridFn::constant(1.0, 32, q);
  const auto r = solve_u(qg, c, 1e-13);
  const double eps = 0.05;
  CHECK(c.hill().j(eps) < c.hill().j(3.0));
  CHECK(u_box_check(qg, r.u, c, eps));
  CHECK_FALSE(u_box_check(qg, PeriodicGridFn::constant(1.0, 32, 0.0), c, eps));
}

TEST_CASE("solved u always lies in the a priori band") {
  testing::Rng rng(47);
  for (int k = 0; k < 20; ++k) {
    const double T = testing::uniform(rng, 0.5, 3.0);
    const auto c = draw_contractive(rng, T);
    const auto q = smooth_positive(rng, T, 80, 0.2, 2.5);
    const double eps = std::min(q.min(), c.hill().j(q.max()) / c.hill().beta0);
    const auto r = solve_u(q, c, 1e-12);
    CHECK(u_box_check(q, r.u, c, eps));
  }
}
