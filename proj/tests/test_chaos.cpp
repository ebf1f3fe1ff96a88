#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <memory>
#include <numbers>

#include "liouville/chaos.hpp"

using namespace liouville;

namespace {

constexpr double kPi = std::numbers::pi;
const double kChi = std::log(2.0) - 0.5;

ChaosMeasure measure(int res, double gamma, std::uint64_t seed, std::uint64_t i) {
  static std::shared_ptr<const SphereGrid> grids[4];
  auto& g = grids[res == 16 ? 0 : res == 32 ? 1 : res == 64 ? 2 : 3];
  if (!g || g->resolution() != res) g = std::make_shared<const SphereGrid>(res);
  return build_chaos(std::make_shared<const FieldSample>(sample_sphere_gff(g, res, seed, i)), gamma);
}

// 2 pi int_0^inf f(rho) rho d rho, split at 1 and mapped to finite intervals
template <class F>
double radial_plane_integral(F f) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  auto g = [&](double r) { return f(r) * r; };
  return 2 * kPi * (GK::integrate(g, 0.0, 1.0, 15, 1e-12) +
                    GK::integrate([&](double t) { return g(1.0 / t) / (t * t); }, 0.0, 1.0, 15, 1e-12));
}

}  // namespace

TEST_CASE("chaos mass at small gamma is the sphere area") {
  const ChaosMeasure m = measure(32, 1e-6, 3, 0);
  CHECK(m.total_mass() == doctest::Approx(4 * kPi).epsilon(1e-5));
  for (double c : m.cell_mass) CHECK(c > 0.0);
}

TEST_CASE("mean chaos mass") {
  const int n = 400;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = measure(32, 1.0, 11, i).total_mass();
    s += t;
    s2 += t * t;
  }
  const double m = s / n, se = std::sqrt((s2 / n - m * m) / (n - 1));
  const double expected = 4 * kPi * std::exp(kChi / 2);
  CHECK(expected == doctest::Approx(13.84).epsilon(1e-3));
  CHECK(std::abs(m - expected) < 3 * se);
}

TEST_CASE("build_chaos domain") {
  auto g = std::make_shared<const SphereGrid>(16);
  auto f = std::make_shared<const FieldSample>(sample_sphere_gff(g, 16, 1, 0));
  CHECK_THROWS_AS(build_chaos(f, 2.0), std::domain_error);
  CHECK_THROWS_AS(build_chaos(f, 0.0), std::domain_error);
}

TEST_CASE("singular kernel") {
  SingularKernel empty{InsertionSet{}, 1.3};
  CHECK(kernel_eval(empty, cplx(0.4, -2.0)) == 1.0);

  SingularKernel one{InsertionSet({{SpherePoint::at(0.0), 1.0}}), 1.0};
  CHECK(kernel_eval(one, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(kernel_eval(one, 0.0), std::domain_error);
  CHECK_THROWS_AS(chordal_kernel(one, SpherePoint::at(0.0)), std::domain_error);

  const Insertion a{SpherePoint::at(cplx(0.2, 0.1)), 0.7}, b{SpherePoint::at(cplx(-1.0, 2.0)), 1.1},
      c{SpherePoint::at_infinity(), 0.9};
  SingularKernel k1{InsertionSet({a, b, c}), 1.2}, k2{InsertionSet({c, a, b}), 1.2};
  for (cplx x : {cplx(0.5, 0.5), cplx(-3.0, 0.1), cplx(0.01, -0.02)}) {
    CHECK(kernel_eval(k1, x) == doctest::Approx(kernel_eval(k2, x)).epsilon(1e-14));
    CHECK(kernel_eval(k1, x) == doctest::Approx(planar_factor(k1) * chordal_kernel(k1, SpherePoint::at(x))).epsilon(1e-13));
  }
}

TEST_CASE("quadrature of d^-a over the sphere") {
  auto g = std::make_shared<const SphereGrid>(64);
  for (double alpha : {0.5, 1.0, 1.5}) {
    SingularKernel k{InsertionSet({{SpherePoint::at(cplx(0.3, 0.4)), alpha}}), 1.0};
    const KernelWeights w = build_kernel_weights(g, 64, k, QuadratureSpec{});
    const double a = alpha;
    const double exact = kPi * std::pow(4.0, 1.0 - a / 2) / (1.0 - a / 2);
    CHECK(w.expected_integral() / std::exp(kChi / 2) == doctest::Approx(exact).epsilon(2e-3));
  }
  SingularKernel bad{InsertionSet({{SpherePoint::at(0.0), 2.1}}), 1.0};
  CHECK_THROWS_AS(build_kernel_weights(g, 64, bad, QuadratureSpec{}), std::domain_error);
}

TEST_CASE("mean chaos integral against the plane quadrature") {
  const double gamma = 1.0, alpha = 0.5;
  SingularKernel k{InsertionSet({{SpherePoint::at(0.0), alpha}}), gamma};
  const double oracle = std::exp(gamma * gamma * kChi / 2) *
                        radial_plane_integral([&](double r) { return kernel_eval(k, r) * ghat(r); });
  const int n = 300;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = chaos_integral(measure(32, gamma, 21, i), k);
    s += v;
    s2 += v * v;
  }
  const double m = s / n, se = std::sqrt((s2 / n - m * m) / (n - 1));
  CHECK(std::abs(m - oracle) < 3 * se);

  SingularKernel over{InsertionSet({{SpherePoint::at(0.0), 2.6}}), gamma};
  CHECK_THROWS_AS(chaos_integral(measure(16, gamma, 1, 0), over), std::domain_error);
}

TEST_CASE("coalescence radius") {
  for (int l : {16, 64, 256}) {
    const double r = coalescence_radius(l);
    CHECK(-std::log(r) + kChi == doctest::Approx(truncated_variance(l)).epsilon(1e-14));
  }
}
