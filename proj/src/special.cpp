#include "liouville/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

// glibc provides the reentrant variant; std::lgamma writes the global signgam.
extern "C" double lgamma_r(double, int*);

namespace liouville {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_nonpositive_integer(double x) { return x <= 0.0 && x == std::floor(x); }

// 1/Gamma(x), zero at the poles.
double rgamma(double x) {
  if (is_nonpositive_integer(x)) return 0.0;
  const SignedLog g = log_gamma(x);
  return g.sign * std::exp(-g.log_abs);
}

}  // namespace

double SignedLog::value() const { return sign * std::exp(log_abs); }

SignedLog SignedLog::pow(double e) const {
  if (sign < 0 && e != std::floor(e)) throw std::domain_error("non-integer power of a negative number");
  int sg = 1;
  if (sign < 0 && std::fmod(std::fabs(e), 2.0) == 1.0) sg = -1;
  return {log_abs * e, sg};
}

SignedLog log_gamma(double x) {
  if (is_nonpositive_integer(x)) throw PoleError("Gamma has a pole at " + std::to_string(x));
  int sg = 1;
  const double v = lgamma_r(x, &sg);
  return {v, sg};
}

double gamma_fn(double x) { return log_gamma(x).value(); }

SignedLog log_l_fun(double x) {
  if (is_nonpositive_integer(x)) throw PoleError("l(x) has a pole at " + std::to_string(x));
  if (x >= 1.0 && x == std::floor(x)) return {-std::numeric_limits<double>::infinity(), 1};
  return log_gamma(x) / log_gamma(1.0 - x);
}

double l_fun(double x) {
  const SignedLog v = log_l_fun(x);
  return std::isinf(v.log_abs) ? 0.0 : v.value();
}

// ---------------------------------------------------------------- Upsilon

namespace {

// sinh^2(u t/2) / (sinh(g t/4) sinh(t/g)) for t >= 1, written without overflow.
double sinh_ratio_large(double u, double gamma, double t) {
  const double au = std::fabs(u);
  const double A = gamma / 4.0, B = 1.0 / gamma;
  const double num = std::expm1(-au * t);
  return std::exp((au - A - B) * t) * num * num / (std::expm1(-2.0 * A * t) * std::expm1(-2.0 * B * t));
}

double integrate_01(const auto& f) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 6, 1e-14, &err);
}

double integrate_1inf(const auto& f) {
  boost::math::quadrature::exp_sinh<double> integ;
  return integ.integrate([&](double x) { return f(1.0 + x); }, 0.0, std::numeric_limits<double>::infinity(), 1e-13);
}

}  // namespace

double log_upsilon(double z, double gamma) {
  const double Q = 2.0 / gamma + gamma / 2.0;
  if (!(z > 0.0 && z < Q)) throw std::domain_error("upsilon: argument outside the strip (0,Q)");
  const double u = Q / 2.0 - z;
  if (u == 0.0) return 0.0;
  const double u2 = u * u;
  const double A = gamma / 4.0, B = 1.0 / gamma;
  const double c2 = u2 / 12.0 - (A * A + B * B) / 6.0;

  auto head = [&](double t) {
    if (t < 1e-4) return u2 * (-1.0 + (0.5 - c2) * t - t * t / 6.0);
    const double sh = std::sinh(u * t / 2.0);
    return (u2 * std::exp(-t) - sh * sh / (std::sinh(A * t) * std::sinh(B * t))) / t;
  };
  auto tail = [&](double t) { return (u2 * std::exp(-t) - sinh_ratio_large(u, gamma, t)) / t; };
  return integrate_01(head) + integrate_1inf(tail);
}

double upsilon(double z, double gamma) { return std::exp(log_upsilon(z, gamma)); }

double upsilon_prime_zero(double gamma) {
  if (!(gamma > 0.0 && gamma < 2.0)) throw std::domain_error("gamma must lie in (0,2)");
  const double Q = 2.0 / gamma + gamma / 2.0;
  const double A = gamma / 4.0, B = 1.0 / gamma;
  const double k = Q * Q / 4.0 - 1.0;
  const double c2 = Q * Q / 48.0 - (A * A + B * B) / 6.0;

  auto head = [&](double t) {
    if (t < 1e-4) return -k + (k / 2.0 - Q * Q * c2 / 4.0) * t;
    const double sh = std::sinh(Q * t / 4.0);
    return (k * std::exp(-t) + 1.0 - sh * sh / (std::sinh(A * t) * std::sinh(B * t))) / t;
  };
  // 1 - sinh^2(Qt/4)/(sinh(At)sinh(Bt)) = -(sqrt p - sqrt q)^2 / ((1-p)(1-q)), p=e^{-2At}, q=e^{-2Bt}
  auto tail = [&](double t) {
    const double sp = std::exp(-A * t), sq = std::exp(-B * t);
    const double d = sp - sq;
    const double one_minus = -d * d / (std::expm1(-2.0 * A * t) * std::expm1(-2.0 * B * t));
    return (k * std::exp(-t) + one_minus) / t;
  };
  return std::exp(integrate_01(head) + integrate_1inf(tail));
}

SignedLog log_upsilon_continued(double z, double gamma) {
  const double Q = 2.0 / gamma + gamma / 2.0;
  if (z > Q / 2.0) z = Q - z;
  const double z_lo = gamma / 8.0;
  SignedLog acc{0.0, 1};
  while (z <= z_lo) {
    // Upsilon(z) = Upsilon(z + gamma/2) / (l(gamma z/2) (gamma/2)^{1 - gamma z})
    SignedLog lz;
    try {
      lz = log_l_fun(gamma * z / 2.0);
    } catch (const PoleError&) {
      throw PoleError("Upsilon vanishes at " + std::to_string(z));
    }
    const SignedLog pw{(1.0 - gamma * z) * std::log(gamma / 2.0), 1};
    acc = acc / (lz * pw);
    z += gamma / 2.0;
  }
  return acc * SignedLog{log_upsilon(z, gamma), 1};
}

// ---------------------------------------------------------------- 2F1

namespace {

constexpr double kSeriesRadius = 0.6;

cplx series_2f1(double a, double b, double c, cplx z) {
  cplx term = 1.0, sum = 1.0;
  for (int n = 0; n < 5000; ++n) {
    term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
    sum += term;
    if (term == 0.0) break;
    if (std::abs(term) < 1e-17 * std::abs(sum) && n > 4) break;
  }
  return sum;
}

bool near_integer(double x) { return std::fabs(x - std::round(x)) < 1e-12; }

cplx hyp_direct(double a, double b, double c, cplx z);

// Continue the solution of the hypergeometric equation from z0 (value f0, slope f1)
// to z along a straight segment by local Taylor expansions.
cplx taylor_continue(double a, double b, double c, cplx z0, cplx f0, cplx f1, cplx z) {
  cplx cur = z0;
  while (std::abs(z - cur) > 0.0) {
    const double radius = std::min(std::abs(cur), std::abs(1.0 - cur));
    cplx h = z - cur;
    if (std::abs(h) > 0.5 * radius) h *= 0.5 * radius / std::abs(h);
    // z(1-z) F'' + (c - (a+b+1) z) F' - ab F = 0 in powers of h
    const cplx p0 = cur * (1.0 - cur);
    const cplx p1 = 1.0 - 2.0 * cur;
    const cplx q0 = c - (a + b + 1.0) * cur;
    cplx cn = f0, cn1 = f1;  // c_n, c_{n+1}
    cplx val = f0 + f1 * h, der = f1;
    cplx hp = h;  // h^{n+1}
    for (int n = 0; n < 2000; ++n) {
      const double nn = n;
      const cplx cn2 = -((nn + 1.0) * (p1 * nn + q0) * cn1 - (nn + a) * (nn + b) * cn) / (p0 * (nn + 2.0) * (nn + 1.0));
      der += (nn + 2.0) * cn2 * hp;
      hp *= h;
      const cplx t = cn2 * hp;
      val += t;
      cn = cn1;
      cn1 = cn2;
      if (std::abs(t) < 1e-18 * std::abs(val) && n > 6) break;
    }
    f0 = val;
    f1 = der;
    cur = (std::abs(z - (cur + h)) < 1e-15 * std::abs(z)) ? z : cur + h;
    if (cur == z) break;
  }
  return f0;
}

double segment_distance(cplx p, cplx s0, cplx s1) {
  const cplx d = s1 - s0;
  double t = std::real((p - s0) * std::conj(d)) / std::norm(d);
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(p - (s0 + t * d));
}

cplx hyp_direct(double a, double b, double c, cplx z) {
  if (std::abs(z) <= kSeriesRadius) return series_2f1(a, b, c, z);

  const cplx w = z / (z - 1.0);
  if (std::abs(w) <= kSeriesRadius) return std::pow(1.0 - z, -a) * series_2f1(a, c - b, c, w);

  const cplx omz = 1.0 - z;
  const bool near_one_ok = !near_integer(c - a - b);
  // integer c-a-b: the connection formula degenerates, so continue along the equation instead
  if (near_one_ok && std::abs(omz) <= kSeriesRadius) {
    const double d = c - a - b;
    const double gc = gamma_fn(c);
    const double A1 = gc * gamma_fn(d) * rgamma(c - a) * rgamma(c - b);
    const double A2 = gc * gamma_fn(-d) * rgamma(a) * rgamma(b);
    cplx r = 0.0;
    if (A1 != 0.0) r += A1 * series_2f1(a, b, 1.0 - d, omz);
    if (A2 != 0.0) r += A2 * std::pow(omz, d) * series_2f1(c - a, c - b, 1.0 + d, omz);
    return r;
  }

  if (std::abs(1.0 / omz) <= kSeriesRadius && !near_integer(a - b)) {
    const double gc = gamma_fn(c);
    const double B1 = gc * gamma_fn(b - a) * rgamma(b) * rgamma(c - a);
    const double B2 = gc * gamma_fn(a - b) * rgamma(a) * rgamma(c - b);
    const cplx v = 1.0 / omz;
    cplx r = 0.0;
    if (B1 != 0.0) r += B1 * std::pow(omz, -a) * series_2f1(a, c - b, a - b + 1.0, v);
    if (B2 != 0.0) r += B2 * std::pow(omz, -b) * series_2f1(b, c - a, b - a + 1.0, v);
    return r;
  }

  // Remaining region: continue from the safer of the two disks around 0 and 1.
  const double r0 = 0.55;
  const cplx start_a = r0 * z / std::abs(z);
  const cplx start_b = 1.0 - r0 * omz / std::abs(omz);
  const double clear_a = std::min(segment_distance(0.0, start_a, z), segment_distance(1.0, start_a, z));
  const double clear_b = std::min(segment_distance(0.0, start_b, z), segment_distance(1.0, start_b, z));
  const bool use_b = clear_b > clear_a && near_one_ok;
  if (std::max(clear_a, near_one_ok ? clear_b : 0.0) >= 0.25) {
    const cplx z0 = use_b ? start_b : start_a;
    const cplx f0 = hyp_direct(a, b, c, z0);
    const cplx f1 = (a * b / c) * hyp_direct(a + 1.0, b + 1.0, c + 1.0, z0);
    return taylor_continue(a, b, c, z0, f0, f1, z);
  }
  // Both straight paths graze a singular point: go around through the half plane of z.
  const double side = z.imag() < 0.0 ? -1.0 : 1.0;
  const cplx z0{0.0, r0 * side};
  const cplx via{z.real(), side};
  cplx f0 = hyp_direct(a, b, c, z0);
  cplx f1 = (a * b / c) * hyp_direct(a + 1.0, b + 1.0, c + 1.0, z0);
  const cplx g0 = taylor_continue(a, b, c, z0, f0, f1, via);
  const cplx g1 = taylor_continue(a + 1.0, b + 1.0, c + 1.0, z0, f1 * c / (a * b),
                                  (a + 1.0) * (b + 1.0) / (c + 1.0) * hyp_direct(a + 2.0, b + 2.0, c + 2.0, z0), via);
  return taylor_continue(a, b, c, via, g0, (a * b / c) * g1, z);
}

}  // namespace

cplx hyp2f1(double a, double b, double c, cplx z) {
  if (is_nonpositive_integer(c)) throw PoleError("2F1 with c a nonpositive integer");
  if (z.imag() == 0.0 && z.real() >= 1.0) throw std::domain_error("2F1: z on the branch cut [1,inf)");
  if (z == 0.0) return 1.0;
  return hyp_direct(a, b, c, z);
}

HypergeoParams hypergeo_params(double gamma, double alpha1, double alpha2, double alpha3) {
  const double Q = 2.0 / gamma + gamma / 2.0;
  HypergeoParams hp;
  hp.a = gamma / 2.0 * (alpha1 / 2.0 - Q / 2.0) + gamma / 2.0 * (alpha2 / 2.0 + alpha3 / 2.0 - gamma / 2.0) - 0.5;
  hp.b = gamma / 2.0 * (alpha1 / 2.0 - Q / 2.0) + gamma / 2.0 * (alpha2 / 2.0 - alpha3 / 2.0) + 0.5;
  hp.c = 1.0 + gamma / 2.0 * (alpha1 - Q);
  return hp;
}

cplx f_pm(const HypergeoParams& hp, cplx z, int sign) {
  if (sign < 0) return hyp2f1(hp.a, hp.b, hp.c, z);
  if (z.imag() == 0.0 && z.real() <= 0.0) throw std::domain_error("F_+: z on the branch cut (-inf,0]");
  const cplx lead = std::exp((1.0 - hp.c) * std::log(z));
  return lead * hyp2f1(1.0 + hp.a - hp.c, 1.0 + hp.b - hp.c, 2.0 - hp.c, z);
}

// ---------------------------------------------------------------- planar integrals

double selberg_closed(double alpha, double beta, bool regularized) {
  if (!(alpha > 0.0 && beta > 0.0)) throw std::domain_error("selberg: alpha and beta must be positive");
  const double s = alpha + beta;
  if (s == 1.0) throw PoleError("selberg: alpha+beta = 1 is a pole");
  if (!regularized && !(s < 1.0)) throw std::domain_error("selberg: needs alpha+beta < 1");
  if (regularized && !(s > 1.0 && s < 1.5)) throw std::domain_error("selberg: regularized form needs 1 < alpha+beta < 3/2");
  const SignedLog den = log_l_fun(1.0 - alpha) * log_l_fun(1.0 - beta) * log_l_fun(s);
  return den.sign * kPi * std::exp(-den.log_abs);
}

double planar_integral_oracle(double alpha, double beta, bool regularized) {
  if (!(alpha > 0.0 && beta > 0.0)) throw std::domain_error("oracle: alpha and beta must be positive");
  const double s = alpha + beta;
  if (!regularized && !(s < 1.0)) throw std::domain_error("oracle: needs alpha+beta < 1");
  if (regularized && !(s > 1.0 && s < 1.5)) throw std::domain_error("oracle: needs 1 < alpha+beta < 3/2");

  boost::math::quadrature::tanh_sinh<double> ts;
  const double e = beta - 1.0;
  // Angular integral over a circle of radius r = 1 - u, minus the constant 2 pi when
  // shifted (the |z|^{2(beta-1)} subtraction after inversion).
  auto angular = [&](double r, double u, bool minus_one) {
    auto f = [&](double th) {
      const double sn = std::sin(th / 2.0);
      const double base = u * u + 4.0 * r * sn * sn;
      if (!minus_one) return std::pow(base, e);
      // base - 1 = r (r - 2 cos th), kept exact for small r
      return std::expm1(e * (r < 0.5 ? std::log1p(r * (r - 2.0 + 4.0 * sn * sn)) : std::log(base)));
    };
    return 2.0 * ts.integrate(f, 0.0, kPi, 1e-12);
  };
  // integrand on r in (0,1) after folding r>1 onto r<1 by inversion
  auto radial = [&](double r, double u) {
    if (u < 1e-150 || r < 1e-150) return 0.0;  // integrable endpoints, contribute below 1e-50
    if (!regularized)
      return (std::pow(r, 2.0 * alpha - 1.0) + std::pow(r, 1.0 - 2.0 * s)) * angular(r, u, false);
    const double a_full = angular(r, u, false);
    const double part_in = std::pow(r, 2.0 * alpha - 1.0) * (a_full - 2.0 * kPi * std::pow(r, 2.0 * e));
    const double part_out = std::pow(r, 1.0 - 2.0 * s) * angular(r, u, true);
    return part_in + part_out;
  };
  const double lower = ts.integrate([&](double r) { return radial(r, 1.0 - r); }, 0.0, 0.5, 1e-10);
  const double upper = ts.integrate([&](double u) { return radial(1.0 - u, u); }, 0.0, 0.5, 1e-10);
  return lower + upper;
}

}  // namespace liouville
