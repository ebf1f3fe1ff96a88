#pragma once

#include <complex>
#include <stdexcept>

namespace liouville {

using cplx = std::complex<double>;

// Raised at poles and outside the domain of an exact-side function.
struct PoleError : std::domain_error {
  using std::domain_error::domain_error;
};

// ln|x| together with the sign of x.
struct SignedLog {
  double log_abs = 0.0;
  int sign = 1;

  double value() const;
  SignedLog operator*(const SignedLog& o) const { return {log_abs + o.log_abs, sign * o.sign}; }
  SignedLog operator/(const SignedLog& o) const { return {log_abs - o.log_abs, sign * o.sign}; }
  SignedLog pow(double e) const;  // requires positive sign unless e is an integer
};

SignedLog log_gamma(double x);
double gamma_fn(double x);

// l(x) = Gamma(x)/Gamma(1-x). Zero at positive integers, pole at x in {0,-1,-2,...}.
SignedLog log_l_fun(double x);
double l_fun(double x);

// Upsilon_{gamma/2}: strip integral for 0 < z < Q.
double log_upsilon(double z, double gamma);
double upsilon(double z, double gamma);
double upsilon_prime_zero(double gamma);
// Continuation to the real line via the gamma/2 functional equation and z <-> Q-z.
// Throws PoleError at the zeros.
SignedLog log_upsilon_continued(double z, double gamma);

// Gauss hypergeometric 2F1(a,b;c;z) on C minus [1,inf).
cplx hyp2f1(double a, double b, double c, cplx z);

struct HypergeoParams {
  double a = 0.0, b = 0.0, c = 0.0;
};

// Parameters of the hypergeometric equation for the degenerate 4-point function
// with weights (alpha1, alpha2, alpha3).
HypergeoParams hypergeo_params(double gamma, double alpha1, double alpha2, double alpha3);

// sign < 0: F_-(z) = 2F1(a,b,c,z); sign > 0: F_+(z) = z^{1-c} 2F1(1+a-c,1+b-c,2-c,z).
cplx f_pm(const HypergeoParams& hp, cplx z, int sign);

// Planar integral of |z|^{2(alpha-1)}|z-1|^{2(beta-1)} (alpha+beta<1), or of the
// version with |z|^{2(beta-1)} subtracted (1<alpha+beta<3/2).
double selberg_closed(double alpha, double beta, bool regularized);
double planar_integral_oracle(double alpha, double beta, bool regularized);

}  // namespace liouville
