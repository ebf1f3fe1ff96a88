#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <unordered_set>

#include "liouville/field.hpp"
#include "liouville/rng.hpp"

using namespace liouville;

namespace {

constexpr double kPi = std::numbers::pi;

CovarianceKernel sphere_kernel() { return {KernelKind::sphere_G, derive_params(1.0, 1.0)}; }

// Rotation of the sphere written as a Moebius map z -> (a z + b)/(-conj(b) z + conj(a)).
cplx rotate(cplx z, cplx a, cplx b) { return (a * z + b) / (-std::conj(b) * z + std::conj(a)); }

bool cholesky_ok(std::vector<double> m, int n) {
  for (int j = 0; j < n; ++j) {
    double d = m[j * n + j];
    for (int k = 0; k < j; ++k) d -= m[j * n + k] * m[j * n + k];
    if (d <= 0.0) return false;
    d = std::sqrt(d);
    m[j * n + j] = d;
    for (int i = j + 1; i < n; ++i) {
      double s = m[i * n + j];
      for (int k = 0; k < j; ++k) s -= m[i * n + k] * m[j * n + k];
      m[i * n + j] = s / d;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("kernel values") {
  const auto k = sphere_kernel();
  CHECK(covariance(k, 0.0, 1.0) == doctest::Approx(std::log(2.0) / 2.0 - 0.5).epsilon(1e-14));
  CHECK(covariance(k, 0.0, 1.0) == doctest::Approx(-0.153426).epsilon(1e-5));
  const CovarianceKernel g0{KernelKind::disk_G0, k.params};
  CHECK(covariance(g0, 0.0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const CovarianceKernel ly{KernelKind::lateral_Y, k.params};
  CHECK(covariance(ly, 0.5, 0.25) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(covariance(k, cplx(0.3, 0.1), cplx(0.3, 0.1)), std::domain_error);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.5);
  for (int i = 0; i < 50; ++i) {
    const cplx x(n(rng), n(rng)), y(n(rng), n(rng));
    CHECK(covariance(k, x, y) == doctest::Approx(covariance(k, y, x)).epsilon(1e-14));
    // chordal form: G = -ln d + chi
    const double d = chordal_distance(SpherePoint::at(x), SpherePoint::at(y));
    CHECK(covariance(k, x, y) == doctest::Approx(-std::log(d) + k.params.chi).epsilon(1e-12));
  }
}

TEST_CASE("kernel is invariant under sphere rotations") {
  const auto k = sphere_kernel();
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    cplx a(n(rng), n(rng)), b(n(rng), n(rng));
    const double norm = std::sqrt(std::norm(a) + std::norm(b));
    a /= norm;
    b /= norm;
    const cplx x(n(rng), n(rng)), y(n(rng), n(rng));
    CHECK(covariance(k, rotate(x, a, b), rotate(y, a, b)) == doctest::Approx(covariance(k, x, y)).epsilon(1e-10));
  }
}

TEST_CASE("kernel Gram matrix is positive definite") {
  const auto k = sphere_kernel();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 50;
  std::vector<SpherePoint> pts;
  while (int(pts.size()) < n) {
    const SpherePoint p = from_angles(std::acos(2 * u(rng) - 1), 2 * kPi * u(rng));
    bool far = true;
    for (const auto& q : pts) far = far && chordal_distance(p, q) > 0.2;
    if (far) pts.push_back(p);
  }
  std::vector<double> m(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m[i * n + j] = i == j ? truncated_variance(128) : covariance(k, pts[i].z, pts[j].z);
  // the diagonal is the truncated variance, the regularized value at lattice scale
  CHECK(cholesky_ok(m, n));
}

TEST_CASE("kernel integrates to zero against the round metric") {
  const auto k = sphere_kernel();
  for (cplx x : {cplx(0.0), cplx(0.7, -0.2), cplx(2.5, 1.0)}) {
    // polar coordinates around x in the plane
    auto radial = [&](double rho) {
      auto ang = [&](double phi) {
        const cplx y = x + std::polar(rho, phi);
        return covariance(k, x, y) * ghat(y) * rho;
      };
      return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(ang, 0.0, 2 * kPi, 8, 1e-12);
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double total = GK::integrate(radial, 0.0, 1.0, 10, 1e-11) +
                         GK::integrate([&](double t) { return radial(1.0 / t) / (t * t); }, 0.0, 1.0, 10, 1e-11);
    CHECK(std::abs(total) < 1e-7);
  }
}

TEST_CASE("sphere grid") {
  for (int res : {8, 64, 128}) {
    SphereGrid g(res);
    CHECK(g.total_area() == doctest::Approx(4 * kPi).epsilon(1e-12));
    const std::size_t c = g.size() / 3;
    const SphereAngles a = to_angles(g.center(c));
    CHECK(g.locate(a.theta, a.phi) == c);
  }
}

TEST_CASE("derive_seed") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(0, 0) == 0ull);  // splitmix finalizer fixes 0
  CHECK(derive_seed(12345, 0) == 0xF36CF1164265DD51ull);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(2000000);
  for (std::uint64_t i = 0; i < 1000000; ++i) seen.insert(derive_seed(42, i));
  CHECK(seen.size() == 1000000);
}

TEST_CASE("distinct base seeds give uncorrelated streams") {
  const int n = 20000;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  const NormalStream a(derive_seed(1, 0), 0, 0), b(derive_seed(2, 0), 0, 0);
  std::vector<double> x(n), y(n);
  a.fill(x.data(), n);
  b.fill(y.data(), n);
  for (int i = 0; i < n; ++i) sxy += x[i] * y[i], sxx += x[i] * x[i], syy += y[i] * y[i];
  CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 3.0 / std::sqrt(double(n)));
}

TEST_CASE("field samples are deterministic and centred") {
  auto grid = std::make_shared<const SphereGrid>(32);
  SphereSynthesizer syn(grid, 32);
  const FieldSample a = syn.sample(9, 3), b = syn.sample(9, 3), c = sample_sphere_gff(grid, 32, 9, 3);
  CHECK(a.values == b.values);
  CHECK(a.values == c.values);
  CHECK(a.values != syn.sample(9, 4).values);
  CHECK(a.regularization_scale == doctest::Approx(1.0 / 32));

  double s = 0.0;
  for (int r = 0; r < grid->n_theta(); ++r)
    for (int col = 0; col < grid->n_phi(); ++col) s += a.values[grid->index(r, col)] * grid->ring_area(r);
  CHECK(std::abs(s / (4 * kPi)) < 1e-3);

  // grid values agree with the spectral sum
  for (std::size_t cell : {std::size_t(5), grid->size() / 2, grid->size() - 7})
    CHECK(a.value_at(grid->center(cell)) == doctest::Approx(a.values[cell]).epsilon(1e-10));

  // low coefficients do not depend on lmax
  const FieldSample big = sample_coefficients(64, 9, 3);
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) CHECK(big.coeffs[i] == a.coeffs[i]);
}

TEST_CASE("empirical covariance matches the truncated kernel") {
  auto grid = std::make_shared<const SphereGrid>(32);
  SphereSynthesizer syn(grid, 32);
  const std::size_t c1 = grid->index(10, 3), c2 = grid->index(30, 40);
  const SpherePoint p1 = grid->center(c1), p2 = grid->center(c2);
  const int n = 3000;
  double sxy = 0.0, sxy2 = 0.0, sxx = 0.0;
  for (int i = 0; i < n; ++i) {
    const FieldSample f = syn.sample(17, i);
    const double v = f.values[c1] * f.values[c2];
    sxy += v;
    sxy2 += v * v;
    sxx += f.values[c1] * f.values[c1];
  }
  const double m = sxy / n, se = std::sqrt((sxy2 / n - m * m) / (n - 1));
  const auto u1 = unit_vector(p1), u2 = unit_vector(p2);
  const double t = u1[0] * u2[0] + u1[1] * u2[1] + u1[2] * u2[2];
  CHECK(std::abs(m - truncated_covariance(32, t)) < 4 * se);
  CHECK(sxx / n == doctest::Approx(truncated_variance(32)).epsilon(0.1));
  // the truncated kernel approaches the exact one away from the diagonal
  CHECK(truncated_covariance(512, t) == doctest::Approx(covariance(sphere_kernel(), p1.z, p2.z)).epsilon(0.02));
}

TEST_CASE("radial decomposition statistics") {
  const int n = 3000;
  const double ds = 1.0 / 16;
  const int k1 = 8, k2 = 24;  // s = 0.5 and 1.5
  double inc = 0.0, inc2 = 0.0, yy = 0.0, yy2 = 0.0, cross = 0.0, cross2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto r = sample_radial(2.0, ds, 32, 5, i);
    const double d = r.radial_path[k2] - r.radial_path[k1];
    inc += d * d;
    inc2 += d * d * d * d;
    // lateral field at z = 0.5 and z = 0.25 on the same ray
    const int a = int(std::round(std::log(2.0) / ds)), b = int(std::round(std::log(4.0) / ds));
    const double y = r.lateral_at(a, 0) * r.lateral_at(b, 0);
    yy += y;
    yy2 += y * y;
    const double c = r.radial_path[k2] * r.lateral_at(k1, 3);
    cross += c;
    cross2 += c * c;
  }
  const double mi = inc / n, si = std::sqrt((inc2 / n - mi * mi) / n);
  CHECK(std::abs(mi - 1.0) < 4 * si);
  const double a = std::round(std::log(2.0) / ds) * ds, b = std::round(std::log(4.0) / ds) * ds;
  const double target = std::log(std::exp(-a) / (std::exp(-a) - std::exp(-b)));
  const double my = yy / n, sy = std::sqrt((yy2 / n - my * my) / n);
  CHECK(std::abs(my - target) < 4 * sy);
  const double mc = cross / n, sc = std::sqrt((cross2 / n - mc * mc) / n);
  CHECK(std::abs(mc) < 4 * sc);
}

TEST_CASE("field export header") {
  auto grid = std::make_shared<const SphereGrid>(8);
  const FieldSample f = sample_sphere_gff(grid, 8, 77, 0);
  const auto path = std::filesystem::temp_directory_path() / "liouville_field_test.bin";
  export_field(f, path.string());
  std::ifstream is(path, std::ios::binary);
  char magic[8];
  std::int64_t h[5];
  is.read(magic, 8);
  is.read(reinterpret_cast<char*>(h), sizeof h);
  CHECK(std::string(magic, 8) == "LVFIELD1");
  CHECK(h[0] == 8);
  CHECK(h[1] == 8);
  CHECK(h[2] == 77);
  CHECK(std::filesystem::file_size(path) == 8 + sizeof h + f.values.size() * sizeof(double));
  std::filesystem::remove(path);
}

TEST_CASE("smooth cutoff and sub-grid mass") {
  CHECK(smooth_cutoff(0.3, 0.5) == 1.0);
  CHECK(smooth_cutoff(1.0, 0.5) == 0.0);
  CHECK(smooth_cutoff(0.75, 0.5) == doctest::Approx(0.5));
  // E W = 2 pi / (2 - a) with a hard cutoff
  CHECK(subgrid_mean(1.2, 1.0) == doctest::Approx(2 * kPi / 0.8).epsilon(1e-10));
  const int n = 1500;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = subgrid_mass(1.0, 0.9, {}, 3, i, 1, 0.5);
    s += w;
    s2 += w * w;
  }
  const double m = s / n, se = std::sqrt((s2 / n - m * m) / n);
  CHECK(std::abs(m - subgrid_mean(0.9, 0.5)) < 4 * se);
}
