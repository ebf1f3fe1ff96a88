#include "liouville/dozz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "liouville/rng.hpp"

namespace liouville {

namespace {

constexpr double kPi = std::numbers::pi;

SignedLog log_ups(double z, double gamma, bool continued) {
  if (continued) return log_upsilon_continued(z, gamma);
  return {log_upsilon(z, gamma), 1};
}

SignedLog named_l(double x, const char* name) {
  try {
    const SignedLog v = log_l_fun(x);
    return v;
  } catch (const PoleError&) {
    throw PoleError(std::string("shift relation: l-factor ") + name + " has a pole");
  }
}

// -1/(pi mu_eff) l(-b^2) l(b a1) l(b a1 - b^2) l(b/2 (abar - 2 a1 - b))
//   / [l(b/2 (abar - b - 2Q)) l(b/2 (abar - 2 a3 - b)) l(b/2 (abar - 2 a2 - b))]
double shift_ratio(const ThreePointArgs& a, double Q, double b, double mu_eff) {
  const double abar = a.alpha_bar();
  SignedLog num = named_l(-b * b, "l(-b^2)") * named_l(b * a.alpha1, "l(b alpha1)") *
                  named_l(b * a.alpha1 - b * b, "l(b alpha1 - b^2)") *
                  named_l(b / 2.0 * (abar - 2.0 * a.alpha1 - b), "l(b/2 (abar - 2 alpha1 - b))");
  SignedLog den = named_l(b / 2.0 * (abar - b - 2.0 * Q), "l(b/2 (abar - b - 2Q))") *
                  named_l(b / 2.0 * (abar - 2.0 * a.alpha3 - b), "l(b/2 (abar - 2 alpha3 - b))") *
                  named_l(b / 2.0 * (abar - 2.0 * a.alpha2 - b), "l(b/2 (abar - 2 alpha2 - b))");
  if (std::isinf(den.log_abs)) throw PoleError("shift relation: vanishing denominator factor");
  if (std::isinf(num.log_abs)) return 0.0;
  const SignedLog r = num / den;
  const int sign = mu_eff < 0.0 ? r.sign : -r.sign;  // mu~ is negative when l(4/gamma^2) < 0
  return sign * std::exp(r.log_abs - std::log(kPi * std::fabs(mu_eff)));
}

}  // namespace

SignedLog log_dozz_c(const ThreePointArgs& args, const LiouvilleParams& p, bool continued) {
  const double g = p.gamma, Q = p.q_background;
  const double abar = args.alpha_bar();
  const double base = std::log(kPi * p.mu) + log_l_fun(g * g / 4.0).log_abs + (2.0 - g * g / 2.0) * std::log(g / 2.0);
  SignedLog out{base * (2.0 * Q - abar) / g, 1};
  out = out * SignedLog{std::log(upsilon_prime_zero(g)), 1};
  out = out * log_ups(args.alpha1, g, continued) * log_ups(args.alpha2, g, continued) * log_ups(args.alpha3, g, continued);
  const SignedLog den = log_ups(abar / 2.0 - Q, g, continued) * log_ups(abar / 2.0 - args.alpha1, g, continued) *
                        log_ups(abar / 2.0 - args.alpha2, g, continued) * log_ups(abar / 2.0 - args.alpha3, g, continued);
  return out / den;
}

double dozz_c(const ThreePointArgs& args, const LiouvilleParams& p, bool continued) {
  return log_dozz_c(args, p, continued).value();
}

double dual_cosmological_constant(const LiouvilleParams& p) {
  const double g = p.gamma;
  const SignedLog inner = SignedLog{std::log(kPi * p.mu), 1} * log_l_fun(g * g / 4.0);
  const SignedLog den = SignedLog{std::log(kPi), 1} * log_l_fun(4.0 / (g * g));
  const double log_num = inner.log_abs * 4.0 / (g * g);
  return den.sign * std::exp(log_num - den.log_abs);
}

double shift_rhs(const ThreePointArgs& args, const LiouvilleParams& p, bool dual) {
  if (!dual) return shift_ratio(args, p.q_background, p.gamma / 2.0, p.mu);
  return shift_ratio(args, p.q_background, 2.0 / p.gamma, dual_cosmological_constant(p));
}

namespace {

// Every Upsilon argument of C(args) inside (0,Q).
bool in_strip(const ThreePointArgs& a, double Q) {
  const double h = a.alpha_bar() / 2.0;
  for (double x : {a.alpha1, a.alpha2, a.alpha3, h - Q, h - a.alpha1, h - a.alpha2, h - a.alpha3})
    if (!(x > 0.0 && x < Q)) return false;
  return true;
}

}  // namespace

std::vector<ShiftSample> shift_sweep(const LiouvilleParams& p, bool dual, std::size_t count, std::uint64_t seed) {
  const double Q = p.q_background, d = dual ? 2.0 / p.gamma : p.gamma / 2.0;
  if (dual) {
    const double mt = dual_cosmological_constant(p);
    if (!std::isfinite(mt) || mt == 0.0)
      throw std::domain_error("dual shift relation degenerate: 4/gamma^2 is an integer");
  }
  std::vector<ShiftSample> out;
  std::uint64_t k = 0, evaluated = 0;
  auto uniform = [&] { return double(derive_seed(seed, k++) >> 11) * 0x1.0p-53; };
  while (out.size() < count) {
    if (k > 300000000) throw std::runtime_error("shift_sweep: admissible region too small");
    ShiftSample s;
    s.args = {Q * uniform(), Q * uniform(), Q * uniform()};
    ThreePointArgs up = s.args, down = s.args;
    up.alpha1 += d;
    down.alpha1 -= d;
    if (!dual && !(in_strip(up, Q) && in_strip(down, Q))) continue;
    if (++evaluated > 100000) throw std::runtime_error("shift_sweep: too few evaluable triples");
    try {
      s.ratio = (log_dozz_c(up, p, dual) / log_dozz_c(down, p, dual)).value();
      s.rhs = shift_rhs(s.args, p, dual);
    } catch (const std::domain_error&) {
      continue;
    }
    if (!std::isfinite(s.ratio) || !std::isfinite(s.rhs) || s.rhs == 0.0) continue;
    s.residual = std::abs(s.ratio / s.rhs - 1.0);
    out.push_back(s);
  }
  return out;
}

double fourpoint_reflection_coefficient(double alpha1, const LiouvilleParams& p) {
  const double g = p.gamma;
  const SignedLog den = log_l_fun(-g * g / 4.0) * log_l_fun(g * alpha1 / 2.0) * log_l_fun(2.0 + g * g / 4.0 - g * alpha1 / 2.0);
  if (std::isinf(den.log_abs)) throw PoleError("four-point reflection coefficient: vanishing l-factor");
  return den.sign * p.mu * kPi * std::exp(-den.log_abs);
}

FourPointArgs make_fourpoint_args(const ThreePointArgs& args, const LiouvilleParams& p) {
  const double g = p.gamma, Q = p.q_background;
  if (!(args.alpha1 > Q - 1.0 / g)) throw std::domain_error("four-point regime: needs alpha1 > Q - 1/gamma");
  if (!(args.alpha1 < Q - g / 2.0)) throw std::domain_error("four-point regime: needs alpha1 < Q - gamma/2");
  if (!(args.alpha_bar() > 2.0 * Q + g / 2.0)) throw std::domain_error("four-point regime: needs sum alpha > 2Q + gamma/2");
  for (double a : {args.alpha1, args.alpha2, args.alpha3})
    if (!(a < Q)) throw std::domain_error("four-point regime: every alpha must be below Q");

  FourPointArgs f;
  f.three = args;
  f.hp = hypergeo_params(g, args.alpha1, args.alpha2, args.alpha3);
  f.lambda1 = dozz_c({args.alpha1 - g / 2.0, args.alpha2, args.alpha3}, p, true);
  f.lambda2 = -fourpoint_reflection_coefficient(args.alpha1, p) * dozz_c({args.alpha1 + g / 2.0, args.alpha2, args.alpha3}, p, true);
  return f;
}

FourPointValue fourpoint_closed(cplx z, const FourPointArgs& args, const LiouvilleParams& p) {
  FourPointValue v;
  if (z == 0.0) {
    v.g_tilde = args.lambda1;
    v.g = 0.0;
    return v;
  }
  const double fm = std::norm(f_pm(args.hp, z, -1));
  const double fp = std::norm(f_pm(args.hp, z, +1));
  v.g_tilde = args.lambda1 * fm + args.lambda2 * fp;
  const double g = p.gamma;
  v.g = std::pow(std::abs(z), g * args.three.alpha1 / 2.0) * std::pow(std::abs(z - 1.0), g * args.three.alpha2 / 2.0) * v.g_tilde;
  return v;
}

double hypergeo_residual(cplx z, const FourPointArgs& args, const LiouvilleParams& p, int kind) {
  const double scale = std::min(std::abs(z), std::abs(z - 1.0));
  const double h = 2e-3 * scale;
  if (!(h > 1e-12)) throw std::domain_error("hypergeometric residual: step underflow near a singular point");
  auto T = [&](double x, double y) {
    const cplx w{x, y};
    switch (kind) {
      case 1: return std::norm(f_pm(args.hp, w, -1));
      case 2: return std::norm(f_pm(args.hp, w, +1));
      case 3: return fourpoint_closed(w, args, p).g_tilde + 0.1 * x;
      default: return fourpoint_closed(w, args, p).g_tilde;
    }
  };
  const double x = z.real(), y = z.imag();
  constexpr double w1[5] = {1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0};
  constexpr double w2[5] = {-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0};
  double tx = 0, ty = 0, txx = 0, tyy = 0, txy = 0;
  for (int i = 0; i < 5; ++i) {
    const double o = (i - 2) * h;
    const double vx = T(x + o, y), vy = T(x, y + o);
    tx += w1[i] * vx;
    ty += w1[i] * vy;
    txx += w2[i] * vx;
    tyy += w2[i] * vy;
    for (int j = 0; j < 5; ++j) {
      if (w1[i] == 0.0 || w1[j] == 0.0) continue;
      txy += w1[i] * w1[j] * T(x + o, y + (j - 2) * h);
    }
  }
  tx /= h;
  ty /= h;
  txx /= h * h;
  tyy /= h * h;
  txy /= h * h;
  const double t0 = T(x, y);
  const cplx dz = 0.5 * cplx{tx, -ty};
  const cplx dzz = 0.25 * cplx{txx - tyy, -2.0 * txy};
  const auto& hp = args.hp;
  const cplx denom = z * (1.0 - z);
  const cplx term1 = dzz;
  const cplx term2 = (hp.c - z * (hp.a + hp.b + 1.0)) / denom * dz;
  const cplx term3 = -hp.a * hp.b / denom * t0;
  const double mag = std::max({std::abs(term1), std::abs(term2), std::abs(term3)});
  if (mag == 0.0) return 0.0;
  return std::abs(term1 + term2 + term3) / mag;
}

double connection_check(double lambda1, double lambda2, const HypergeoParams& hp) {
  const double a = hp.a, b = hp.b, c = hp.c;
  auto lg = [](double x, const char* name) {
    try {
      return log_gamma(x);
    } catch (const PoleError&) {
      throw PoleError(std::string("connection relation: Gamma pole in factor ") + name);
    }
  };
  const SignedLog k1 = lg(c, "Gamma(c)") * lg(c, "Gamma(c)") /
                       (lg(c - a, "Gamma(c-a)") * lg(c - b, "Gamma(c-b)") * lg(a, "Gamma(a)") * lg(b, "Gamma(b)"));
  const SignedLog k2 = lg(2.0 - c, "Gamma(2-c)") * lg(2.0 - c, "Gamma(2-c)") /
                       (lg(1.0 - a, "Gamma(1-a)") * lg(1.0 - b, "Gamma(1-b)") * lg(a - c + 1.0, "Gamma(a-c+1)") *
                        lg(b - c + 1.0, "Gamma(b-c+1)"));
  const double t1 = lambda1 * k1.value();
  const double t2 = lambda2 * k2.value();
  const double mag = std::max(std::fabs(t1), std::fabs(t2));
  if (mag == 0.0) return 0.0;
  return std::fabs(t1 + t2) / mag;
}

}  // namespace liouville
