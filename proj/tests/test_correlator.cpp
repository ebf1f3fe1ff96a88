#include <doctest.h>

#include <cmath>
#include <numbers>

#include "liouville/chaos.hpp"
#include "liouville/correlator.hpp"
#include "liouville/dozz.hpp"

using namespace liouville;

namespace {

InsertionSet three(double alpha = 1.8) {
  return InsertionSet({{SpherePoint::at(0.0), alpha}, {SpherePoint::at(1.0), alpha}, {SpherePoint::at(cplx(0.3, 0.9)), alpha}});
}

McConfig small(std::size_t n = 40, int res = 16) {
  McConfig c;
  c.n_samples = n;
  c.resolutions = {{res, res}};
  c.base_seed = 5;
  return c;
}

}  // namespace

TEST_CASE("chart-free prefactor matches the plane prefactor") {
  const auto p = derive_params(1.0, 1.3);
  const InsertionSet ins = three();
  const double s = ins.s_exponent(p);
  const double planar = planar_factor(SingularKernel{ins, p.gamma});
  CHECK(std::exp(log_sphere_prefactor(ins, p)) ==
        doctest::Approx(correlator_prefactor(ins, p) * std::pow(planar, -s)).epsilon(1e-12));
}

TEST_CASE("argument validation") {
  const auto p = derive_params(1.0, 1.0);
  CHECK_THROWS_AS(estimate_correlator(three(1.0), p, small()), std::domain_error);
  CHECK_THROWS_AS(estimate_correlator(three(2.6), p, small()), std::domain_error);
  const InsertionSet two({{SpherePoint::at(0.0), 2.4}, {SpherePoint::at(1.0), 2.4}});
  CHECK_THROWS_AS(estimate_correlator(two, p, small()), std::invalid_argument);
  McConfig none = small();
  none.resolutions.clear();
  CHECK_THROWS_AS(estimate_correlator(three(), p, none), std::invalid_argument);
  CHECK_THROWS_AS(t_insertion(0.0, three(), p, small()), std::invalid_argument);
  CHECK_THROWS_AS(decay_scan(three(), {0.1, 0.2}, 0.0, p, small()), std::invalid_argument);
}

TEST_CASE("cosmological constant enters as mu^-s") {
  const InsertionSet ins = three();
  const auto p1 = derive_params(1.0, 1.0), p2 = derive_params(1.0, 2.0);
  const auto a = estimate_correlator(ins, p1, small()), b = estimate_correlator(ins, p2, small());
  CHECK(b.mean / a.mean == doctest::Approx(std::pow(2.0, -ins.s_exponent(p1))).epsilon(1e-12));
}

TEST_CASE("estimates are deterministic and independent of the worker count") {
  const auto p = derive_params(1.0, 1.0);
  McConfig c1 = small(), c4 = small();
  c4.workers = 4;
  const auto a = estimate_correlator(three(), p, c1), b = estimate_correlator(three(), p, c1),
             c = estimate_correlator(three(), p, c4);
  CHECK(a.mean == b.mean);
  CHECK(a.std_err == b.std_err);
  CHECK(a.mean == c.mean);
  CHECK(a.std_err == c.std_err);
  McConfig other = small();
  other.base_seed = 6;
  CHECK(estimate_correlator(three(), p, other).mean != a.mean);
}

TEST_CASE("resolution sweep pairs samples") {
  const auto p = derive_params(1.0, 1.0);
  McConfig c = small(30);
  c.resolutions = {{16, 16}, {32, 32}};
  const auto e = estimate_correlator(three(), p, c);
  REQUIRE(e.sweep.size() == 2);
  CHECK(e.mean == e.sweep[1].mean);
  CHECK(e.resolution_shift == doctest::Approx(e.sweep[1].mean - e.sweep[0].mean).epsilon(1e-10));
}

TEST_CASE("three-point shape gradient") {
  const auto p = derive_params(1.2, 1.0);
  const InsertionSet ins({{SpherePoint::at(cplx(0.1, 0.2)), 1.3}, {SpherePoint::at(cplx(1.0, -0.4)), 1.9},
                          {SpherePoint::at(cplx(-0.5, 0.7)), 0.8}});
  const auto sh = three_point_shape(ins, p, 2.5);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    auto at = [&](cplx dz) { return three_point_shape(ins.with_point(i, SpherePoint::at(ins[i].point.z + dz)), p, 2.5).value; };
    const double dx = (at(h) - at(-h)) / (2 * h), dy = (at(cplx(0, h)) - at(cplx(0, -h))) / (2 * h);
    const cplx dz = 0.5 * cplx(dx, -dy);
    CHECK(std::abs(dz - sh.gradient[i]) < 1e-6 * std::abs(sh.gradient[i]) + 1e-9);
  }
  // Ward identities hold exactly for the shape
  const auto r = ward_residuals(ins, p, sh.value, sh.gradient);
  for (const auto& x : r) CHECK(std::abs(x) < 1e-12 * sh.value * 10);
}

TEST_CASE("stress tensor residue at an insertion") {
  const auto p = derive_params(1.0, 1.0);
  const InsertionSet ins = three();
  const McConfig c = small(20);
  const double eps = 1e-4;
  const cplx z = ins[1].point.z + cplx(eps, 0.0);
  const ComplexEstimate t = t_insertion(z, ins, p, c);
  const double g = ward_sum_rules(ins, p, c).correlator.value;
  const cplx lead = eps * eps * t.value;
  CHECK(lead.real() == doctest::Approx(conformal_weight(ins[1].weight, p) * g).epsilon(1e-2));
  CHECK(std::abs(lead.imag()) < 1e-2 * g);
}

TEST_CASE("Moebius maps") {
  const auto p = derive_params(1.0, 1.0);
  const auto id = mobius_check(three(), MobiusMap{}, p, small(20));
  CHECK(id.ratio.value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(id.jacobian == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS((MobiusMap{1.0, 1.0, 1.0, 1.0}).normalized(), std::invalid_argument);
  CHECK_THROWS_AS(MobiusMap::scaling(-1.0), std::invalid_argument);
  // 0 is sent to infinity
  CHECK_THROWS_AS(mobius_check(three(), MobiusMap{0.0, 1.0, 1.0, 0.0}, p, small(20)), std::invalid_argument);

  // three equal weights at the cube roots of unity, rotated by 120 degrees
  const double w = 2 * std::numbers::pi / 3;
  const InsertionSet sym({{SpherePoint::at(1.0), 1.8}, {SpherePoint::at(std::polar(1.0, w)), 1.8},
                          {SpherePoint::at(std::polar(1.0, 2 * w)), 1.8}});
  const auto rot = mobius_check(sym, MobiusMap::rotation(w), p, small(100, 32));
  CHECK(rot.jacobian == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(rot.ratio.value - 1.0) < 3 * rot.ratio.std_err + 1e-12);
}

TEST_CASE("fusion scan") {
  const auto p = derive_params(1.0, 1.0);
  const InsertionSet spect({{SpherePoint::at(2.0), 1.2}, {SpherePoint::at(cplx(-1.5, 1.5)), 1.2}, {SpherePoint::at_infinity(), 1.15}});
  CHECK(fusion_exponent(1.0, 0.0, p) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(fusion_exponent(1.0, 0.5, p) == doctest::Approx(-1.0 * 0.5).epsilon(1e-14));  // -beta1 beta2 below Q
  CHECK_THROWS_AS(fusion_scan(1.0, 0.5, spect, {0.1, 0.2}, p, small()), std::invalid_argument);
  CHECK_THROWS_AS(fusion_scan(1.0, 0.5, spect, {0.1, 0.2, 0.3}, p, small()), std::invalid_argument);
  const auto f = fusion_scan(1.5, 0.0, spect, {0.01, 0.05, 0.2, 0.5}, p, small(40, 16));
  CHECK(f.expected == 0.0);
  CHECK(std::abs(f.slope) < 0.05);
}

TEST_CASE("four-point Monte Carlo needs s > 1/2") {
  const auto p = derive_params(1.0, 1.0);
  FourPointArgs args;
  args.three = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(fourpoint_mc(cplx(0.3, 0.1), args, p, small()), std::domain_error);
  args.three = {1.8, 1.9, 1.9};
  CHECK_THROWS_AS(fourpoint_mc(cplx(0.0), args, p, small()), std::invalid_argument);
}

TEST_CASE("ordered statistics") {
  std::vector<double> v(1001);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + i);
  double naive = 0.0;
  for (double x : v) naive += x;
  CHECK(ordered_sum(v.data(), v.size()) == doctest::Approx(naive).epsilon(1e-14));
  SampleTable t(4, 2);
  for (std::size_t i = 0; i < 4; ++i) t(i, 0) = double(i), t(i, 1) = 2.0;
  const Estimate m = column_mean(t, 0);
  CHECK(m.value == 1.5);
  CHECK(m.std_err == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(ratio_of(t, [](const double* r) { return r[0]; }, [](const double* r) { return r[1]; }).value == 0.75);
  SampleTable one(1, 1);
  CHECK_THROWS_AS(column_mean(one, 0), std::invalid_argument);
}
