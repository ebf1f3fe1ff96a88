#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "liouville/special.hpp"

using namespace liouville;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("log_gamma") {
  CHECK(log_gamma(1.0).log_abs == doctest::Approx(0.0));
  CHECK(log_gamma(0.5).log_abs == doctest::Approx(0.5 * std::log(kPi)).epsilon(1e-14));
  CHECK(log_gamma(-0.5).sign == -1);
  CHECK(log_gamma(-0.5).value() == doctest::Approx(-2.0 * std::sqrt(kPi)).epsilon(1e-13));
  CHECK_THROWS_AS(log_gamma(0.0), PoleError);
  CHECK_THROWS_AS(log_gamma(-3.0), PoleError);
}

TEST_CASE("l function") {
  CHECK(l_fun(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(l_fun(-0.5) == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(l_fun(2.0) == 0.0);
  CHECK_THROWS_AS(l_fun(0.0), PoleError);
  CHECK_THROWS_AS(l_fun(-2.0), PoleError);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-4.0, 5.0);
  int n = 0;
  while (n < 1000) {
    const double x = u(rng);
    if (std::abs(x - std::round(x)) < 1e-3) continue;
    CHECK(std::abs(l_fun(x) * l_fun(1.0 - x) - 1.0) < 1e-12);
    ++n;
  }
}

TEST_CASE("Upsilon on the strip") {
  for (double g : {0.8, 1.0, 1.4}) {
    const double Q = 2.0 / g + g / 2.0;
    CHECK(std::abs(upsilon(Q / 2.0, g) - 1.0) < 1e-10);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const double z = Q * (0.005 + 0.99 * u(rng));
      const double v = upsilon(z, g);
      CHECK(v > 0.0);
      CHECK(std::abs(upsilon(Q - z, g) / v - 1.0) < 1e-9);
    }
    // tends to 0 at the edges
    CHECK(upsilon(1e-4 * Q, g) < 1e-3);
    CHECK(upsilon(Q * (1 - 1e-4), g) < 1e-3);
    CHECK_THROWS_AS(upsilon(0.0, g), std::domain_error);
    CHECK_THROWS_AS(upsilon(Q, g), std::domain_error);
    CHECK_THROWS_AS(upsilon(-0.3, g), std::domain_error);
  }
}

TEST_CASE("Upsilon functional equation and derivative at 0") {
  for (double g : {0.8, 1.0, 1.4}) {
    const double Q = 2.0 / g + g / 2.0;
    for (double z : {0.1, 0.4, 0.3 * Q}) {
      if (z + g / 2 >= Q) continue;
      // Upsilon(z + g/2) = l(g z/2) (g/2)^{1 - g z} Upsilon(z)
      const double lhs = upsilon(z + g / 2.0, g);
      const double rhs = l_fun(g * z / 2.0) * std::pow(g / 2.0, 1.0 - g * z) * upsilon(z, g);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
    // Upsilon(z) ~ Upsilon'(0) z near 0
    const double h = 1e-5;
    CHECK(upsilon(h, g) / h == doctest::Approx(upsilon_prime_zero(g)).epsilon(1e-4));
    // the continuation agrees with the strip integral inside the strip
    CHECK(log_upsilon_continued(0.7, g).log_abs == doctest::Approx(log_upsilon(0.7, g)).epsilon(1e-12));
  }
}

TEST_CASE("2F1 values") {
  CHECK(std::abs(hyp2f1(0.3, 0.7, 1.4, 0.0) - 1.0) < 1e-15);
  CHECK(hyp2f1(1.0, 1.0, 2.0, 0.5).real() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
  for (cplx z : {cplx(0.5, 0.87), cplx(-5.0, 0.0), cplx(1.7, 0.5), cplx(0.2, -0.9), cplx(10.0, 3.0), cplx(0.95, 0.01)}) {
    const cplx ex = -std::log(1.0 - z) / z;
    CHECK(std::abs(hyp2f1(1.0, 1.0, 2.0, z) - ex) < 1e-12 * std::abs(ex));
  }
  // (1 - z)^{-a} = 2F1(a, b; b; z)
  for (cplx z : {cplx(0.3, 0.2), cplx(-2.0, 1.0), cplx(0.8, -0.6), cplx(3.0, 2.0)}) {
    const cplx ex = std::pow(1.0 - z, -0.37);
    CHECK(std::abs(hyp2f1(0.37, 0.6, 0.6, z) - ex) < 1e-12 * std::abs(ex));
  }
  CHECK_THROWS(hyp2f1(0.3, 0.4, 0.7, cplx(1.5, 0.0)));
  CHECK_THROWS_AS(hyp2f1(0.3, 0.4, -1.0, cplx(0.2, 0.0)), PoleError);
}

TEST_CASE("2F1 contiguous relations") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.9, 0.9), pa(0.1, 1.7);
  for (int t = 0; t < 40; ++t) {
    const double a = pa(rng), b = pa(rng), c = pa(rng) + 0.55;
    const cplx z(u(rng), u(rng));
    auto F = [&](double aa, double bb, double cc) { return hyp2f1(aa, bb, cc, z); };
    // (c - a) F(a-1) + (2a - c + (b - a) z) F + a (z - 1) F(a+1) = 0
    const cplx r1 = (c - a) * F(a - 1, b, c) + (2 * a - c + (b - a) * z) * F(a, b, c) + a * (z - 1.0) * F(a + 1, b, c);
    // c (c - 1)(z - 1) F(c-1) + c (c - 1 - (2c - a - b - 1) z) F + (c - a)(c - b) z F(c+1) = 0
    const cplx r2 = c * (c - 1) * (z - 1.0) * F(a, b, c - 1) + c * (c - 1 - (2 * c - a - b - 1) * z) * F(a, b, c) +
                    (c - a) * (c - b) * z * F(a, b, c + 1);
    const double s1 = std::abs(c - a) * std::abs(F(a - 1, b, c)) + std::abs(F(a, b, c)) * (std::abs(2 * a - c) + 2) +
                      std::abs(a * (z - 1.0) * F(a + 1, b, c));
    const double s2 = std::abs(c * (c - 1)) * (std::abs(F(a, b, c - 1)) + 2 * std::abs(F(a, b, c))) +
                      std::abs((c - a) * (c - b) * F(a, b, c + 1)) + 4 * std::abs(F(a, b, c));
    CHECK(std::abs(r1) < 1e-10 * s1);
    CHECK(std::abs(r2) < 1e-10 * s2);
  }
}

TEST_CASE("F_plus leading behaviour") {
  const HypergeoParams hp = hypergeo_params(1.0, 1.8, 1.9, 1.9);
  for (double r : {1e-4, 1e-6}) {
    const cplx z(r, r);
    const cplx ratio = f_pm(hp, z, +1) / std::pow(z, 1.0 - hp.c);
    CHECK(std::abs(ratio - 1.0) < 10 * r);
    CHECK(std::abs(f_pm(hp, z, -1) - 1.0) < 10 * r);
  }
}

TEST_CASE("Selberg integrals against the quadrature oracle") {
  // pi l(1/4)^2 / l(1/2)
  const double closed = selberg_closed(0.25, 0.25, false);
  CHECK(closed == doctest::Approx(kPi * std::pow(l_fun(0.25), 2)).epsilon(1e-13));
  CHECK(closed == doctest::Approx(27.50).epsilon(1e-3));
  CHECK(planar_integral_oracle(0.25, 0.25, false) == doctest::Approx(closed).epsilon(1e-5));

  const double reg = selberg_closed(0.6, 0.6, true);
  CHECK(planar_integral_oracle(0.6, 0.6, true) == doctest::Approx(reg).epsilon(1e-4));
  // beta close to 1 exercises the small-radius part of the subtracted integrand
  CHECK(planar_integral_oracle(0.48, 0.935, true) == doctest::Approx(selberg_closed(0.48, 0.935, true)).epsilon(1e-8));

  CHECK_THROWS_AS(selberg_closed(0.5, 0.5, false), PoleError);
  CHECK_THROWS_AS(selberg_closed(0.7, 0.5, false), std::domain_error);
  CHECK_THROWS_AS(selberg_closed(0.2, 0.3, true), std::domain_error);
}
