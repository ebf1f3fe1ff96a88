#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "liouville/dozz.hpp"

using namespace liouville;

namespace {

const LiouvilleParams kP = derive_params(1.0, 1.0);

FourPointArgs args4() { return make_fourpoint_args({1.8, 1.9, 1.9}, kP); }

}  // namespace

TEST_CASE("structure constant symmetry and scaling") {
  const ThreePointArgs a{1.7, 1.8, 1.9};
  const double c = dozz_c(a, kP);
  CHECK(c > 0.0);
  for (const ThreePointArgs& b : {ThreePointArgs{1.8, 1.7, 1.9}, ThreePointArgs{1.9, 1.8, 1.7}, ThreePointArgs{1.8, 1.9, 1.7}})
    CHECK(dozz_c(b, kP) == doctest::Approx(c).epsilon(1e-12));
  const auto p2 = derive_params(1.0, 2.0);
  const double e = (2 * kP.q_background - a.alpha_bar()) / kP.gamma;
  CHECK(dozz_c(a, p2) / c == doctest::Approx(std::pow(2.0, e)).epsilon(1e-12));
  CHECK(dozz_c(a, kP, true) == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("shift relations") {
  for (double g : {0.6, 1.0, 1.2, std::sqrt(2.0), 1.7, 1.9}) {
    const auto p = derive_params(g, 1.0);
    for (bool dual : {false, true}) {
      // 4/gamma^2 integer: l(4/gamma^2) = 0 and the dual constant is infinite
      if (dual && g == 1.0) {
        CHECK_THROWS_AS(shift_sweep(p, dual, 1, 17), std::domain_error);
        continue;
      }
      const auto s = shift_sweep(p, dual, 6, 17);
      REQUIRE(s.size() == 6);
      for (const auto& x : s) CHECK(x.residual < 1e-8);
    }
  }
  const auto a = shift_sweep(kP, false, 4, 3), b = shift_sweep(kP, false, 4, 3);
  for (int i = 0; i < 4; ++i) CHECK(a[i].args.alpha1 == b[i].args.alpha1);
}

TEST_CASE("dual cosmological constant") {
  for (double g : {0.6, 1.3, 1.7}) {
    const auto p = derive_params(g, 1.0);
    const double pi = std::numbers::pi;
    const double direct = std::pow(pi * l_fun(g * g / 4), 4 / (g * g)) / (pi * l_fun(4 / (g * g)));
    CHECK(dual_cosmological_constant(p) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("four-point function near the singular points") {
  const FourPointArgs f = args4();
  CHECK(fourpoint_closed(0.0, f, kP).g_tilde == f.lambda1);
  CHECK(fourpoint_closed(cplx(1e-12, 0.0), f, kP).g_tilde == doctest::Approx(f.lambda1).epsilon(1e-6));
  // G~ - lambda1 |F_-|^2 = lambda2 |z|^{2(1-c)} (1 + O(z))
  for (double r : {1e-4, 1e-5}) {
    const cplx z = std::polar(r, 0.7);
    const double rest = fourpoint_closed(z, f, kP).g_tilde - f.lambda1 * std::norm(f_pm(f.hp, z, -1));
    CHECK(rest / std::pow(r, 2 * (1 - f.hp.c)) == doctest::Approx(f.lambda2).epsilon(10 * r));
  }
}

TEST_CASE("four-point function is single valued") {
  const FourPointArgs f = args4();
  for (cplx z : {cplx(0.3, 0.4), cplx(-0.7, 0.2), cplx(2.0, -1.0)})
    CHECK(fourpoint_closed(std::conj(z), f, kP).g_tilde == doctest::Approx(fourpoint_closed(z, f, kP).g_tilde).epsilon(1e-12));
  // Across the cuts G~(x + iy) is even in y, so a monodromy would show up as a |y| kink:
  // single valued means first differences shrink like y^2, not y.
  FourPointArgs bad = f;
  bad.lambda2 *= 1.01;
  for (double x : {1.5, 3.0}) {
    auto diff = [&](const FourPointArgs& a, double y) {
      return fourpoint_closed(cplx(x, 2 * y), a, kP).g_tilde - fourpoint_closed(cplx(x, y), a, kP).g_tilde;
    };
    const double good_ratio = diff(f, 1e-3) / diff(f, 1e-4);
    const double bad_ratio = diff(bad, 1e-3) / diff(bad, 1e-4);
    CHECK(good_ratio == doctest::Approx(100.0).epsilon(0.05));
    CHECK(bad_ratio < 15.0);
  }
}

TEST_CASE("hypergeometric equation") {
  const FourPointArgs f = args4();
  for (cplx z : {cplx(0.3, 0.2), cplx(0.6, -0.5), cplx(-1.2, 0.8), cplx(2.5, 0.3)}) {
    CHECK(hypergeo_residual(z, f, kP, 0) < 1e-6);
    CHECK(hypergeo_residual(z, f, kP, 1) < 1e-6);
    CHECK(hypergeo_residual(z, f, kP, 2) < 1e-6);
    CHECK(hypergeo_residual(z, f, kP, 3) >= 0.1);
  }
  CHECK_THROWS_AS(hypergeo_residual(cplx(1e-13, 0.0), f, kP), std::domain_error);
}

TEST_CASE("connection relation") {
  const FourPointArgs f = args4();
  CHECK(connection_check(f.lambda1, f.lambda2, f.hp) < 1e-8);
  CHECK(connection_check(0.0, 0.0, f.hp) == 0.0);
  CHECK(connection_check(1.01 * f.lambda1, f.lambda2, f.hp) > 1e-3);
}

TEST_CASE("four-point regime") {
  CHECK_THROWS_AS(make_fourpoint_args({1.4, 1.9, 1.9}, kP), std::domain_error);  // alpha1 <= Q - 1/gamma
  CHECK_THROWS_AS(make_fourpoint_args({2.1, 1.9, 1.9}, kP), std::domain_error);  // alpha1 >= Q - gamma/2
  CHECK_THROWS_AS(make_fourpoint_args({1.8, 1.8, 1.8}, kP), std::domain_error);  // sum too small
  CHECK_THROWS_AS(make_fourpoint_args({1.8, 2.6, 1.9}, kP), std::domain_error);
  const FourPointArgs f = args4();
  CHECK(f.lambda1 == doctest::Approx(dozz_c({1.3, 1.9, 1.9}, kP, true)).epsilon(1e-14));
}
