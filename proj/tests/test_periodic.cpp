#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "hsc/periodic.hpp"
#include "support.hpp"

using hsc::Harmonic;
using hsc::PeriodicCoefficient;
using Catch::Matchers::WithinAbs;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("constant coefficient evaluates to its mean everywhere") {
  const auto f = PeriodicCoefficient::constant(2.0, 0.5);
  for (double t : {-3.7, 0.0, 0.3, 1.0, 17.25}) CHECK(f(t) == 0.5);
  CHECK(f.is_constant());
}

TEST_CASE("single cosine harmonic at t = 0 and t = T/2") {
  const double T = 3.0;
  const PeriodicCoefficient f(T, 1.0, {Harmonic{1, 0.1, 0.0}});
  CHECK_THAT(f(0.0), WithinAbs(1.1, 1e-15));
  CHECK_THAT(f(T / 2), WithinAbs(0.9, 1e-15));
  CHECK_THAT(f(T + 0.4), WithinAbs(f(0.4), 1e-14));
  CHECK_THAT(f(-0.4), WithinAbs(f(T - 0.4), 1e-14));
}

TEST_CASE("integral of a constant over a delay window") {
  const auto g = PeriodicCoefficient::constant(1.0, 0.37);
  CHECK_THAT(g.integrate(4.2 - 1.3, 4.2), WithinAbs(0.37 * 1.3, 1e-14));
}

TEST_CASE("harmonics integrate to zero over a full period") {
  hsc::testing::Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    const double T = hsc::testing::uniform(rng, 0.2, 5.0);
    const auto f = hsc::testing::draw_periodic(rng, T, 1.3, 0.4);
    const double t0 = hsc::testing::uniform(rng, -10.0, 10.0);
    CHECK_THAT(f.integrate(t0, t0 + T), WithinAbs(1.3 * T, 1e-12));
  }
}

TEST_CASE("integral against adaptive quadrature") {
  const double T = 2.5;
  const PeriodicCoefficient f(T, 1.0, {Harmonic{1, 0.0, 0.2}});
  const double closed = T / 2 + 0.2 * T / pi;
  CHECK_THAT(f.integrate(0.0, T / 2), WithinAbs(closed, 1e-12));
  const double quad = hsc::testing::adaptive_simpson([&](double t) { return f(t); }, 0.0, T / 2, 1e-14);
  CHECK_THAT(f.integrate(0.0, T / 2), WithinAbs(quad, 1e-12));

  hsc::testing::Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    const auto g = hsc::testing::draw_periodic(rng, T, 0.8, 0.5);
    const double a = hsc::testing::uniform(rng, -3.0, 3.0);
    const double b = a + hsc::testing::uniform(rng, 0.0, 4.0);
    const double q = hsc::testing::adaptive_simpson([&](double t) { return g(t); }, a, b, 1e-14);
    CHECK_THAT(g.integrate(a, b), WithinAbs(q, 1e-12));
  }
}

TEST_CASE("derivative matches central differences") {
  const PeriodicCoefficient f(1.7, 0.4, {Harmonic{1, 0.1, -0.05}, Harmonic{3, 0.02, 0.03}});
  for (double t : {0.0, 0.3, 1.1, 5.0}) {
    const double h = 1e-5;
    CHECK_THAT(f.derivative(t), WithinAbs((f(t + h) - f(t - h)) / (2 * h), 1e-8));
  }
}

TEST_CASE("extrema of simple coefficients") {
  const auto c = hsc::extrema(PeriodicCoefficient::constant(1.0, 0.5), 64);
  CHECK(c.min == 0.5);
  CHECK(c.max == 0.5);

  const double T = 2.0;
  const auto e = hsc::extrema(PeriodicCoefficient(T, 1.0, {Harmonic{1, 0.1, 0.0}}), 64);
  CHECK_THAT(e.min, WithinAbs(0.9, 1e-12));
  CHECK_THAT(e.argmin, WithinAbs(T / 2, 1e-6));
  CHECK_THAT(e.max, WithinAbs(1.1, 1e-12));
  CHECK((e.argmax < 1e-6 || e.argmax > T - 1e-6));
}

TEST_CASE("extrema against a dense brute-force scan") {
  const double T = 1.0;
  const PeriodicCoefficient f(T, 1.0, {Harmonic{1, 0.1, 0.0}, Harmonic{2, 0.0, 0.05}});
  double lo = 1e300, hi = -1e300;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double v = f(T * i / n);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const auto e = hsc::extrema(f, 256);
  CHECK_THAT(e.min, WithinAbs(lo, 1e-9));
  CHECK_THAT(e.max, WithinAbs(hi, 1e-9));
  CHECK(e.min <= lo);
  CHECK(e.max >= hi);
  CHECK_THAT(f(e.argmin), WithinAbs(e.min, 1e-15));
}

TEST_CASE("invalid coefficients are rejected") {
  CHECK_THROWS_AS(PeriodicCoefficient(0.0, 1.0), hsc::DomainError);
  CHECK_THROWS_AS(PeriodicCoefficient(1.0, 1.0, {Harmonic{0, 0.1, 0.0}}), hsc::DomainError);
  CHECK_THROWS_AS(hsc::extrema(PeriodicCoefficient(1.0, 1.0, {Harmonic{5, 0.1, 0.0}}), 8), hsc::DomainError);
}
