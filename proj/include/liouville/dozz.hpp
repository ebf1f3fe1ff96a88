#pragma once

#include <complex>
#include <vector>

#include "liouville/correlator.hpp"
#include "liouville/params.hpp"
#include "liouville/special.hpp"

namespace liouville {

struct ThreePointArgs {
  double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
  double alpha_bar() const { return alpha1 + alpha2 + alpha3; }
};

// Degenerate -gamma/2 insertion at z, alpha1 at 0, alpha2 at 1, alpha3 at infinity.
struct FourPointArgs {
  ThreePointArgs three;
  HypergeoParams hp;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

// C_gamma(alpha1, alpha2, alpha3). `continued` evaluates Upsilon off the strip through
// its functional equations; otherwise every Upsilon argument must lie in (0,Q).
double dozz_c(const ThreePointArgs& args, const LiouvilleParams& p, bool continued = false);
SignedLog log_dozz_c(const ThreePointArgs& args, const LiouvilleParams& p, bool continued = false);

// Right-hand side of C(alpha1 + d)/C(alpha1 - d) with d = gamma/2 (primal) or 2/gamma (dual).
double shift_rhs(const ThreePointArgs& args, const LiouvilleParams& p, bool dual);

struct ShiftSample {
  ThreePointArgs args;
  double ratio = 0.0;  // C(alpha1 + d)/C(alpha1 - d)
  double rhs = 0.0;
  double residual = 0.0;  // |ratio/rhs - 1|
};

// `count` triples drawn uniformly from (0,Q)^3 and kept when both sides evaluate. The primal relation
// needs every Upsilon argument in the strip; the dual one uses the continued Upsilon.
std::vector<ShiftSample> shift_sweep(const LiouvilleParams& p, bool dual, std::size_t count, std::uint64_t seed);

// mu~ = (mu pi l(gamma^2/4))^{4/gamma^2} / (pi l(4/gamma^2))
double dual_cosmological_constant(const LiouvilleParams& p);

// The coefficient mu pi / (l(-g^2/4) l(g a1/2) l(2 + g^2/4 - g a1/2)) multiplying C(alpha1+gamma/2).
double fourpoint_reflection_coefficient(double alpha1, const LiouvilleParams& p);

FourPointArgs make_fourpoint_args(const ThreePointArgs& args, const LiouvilleParams& p);

struct FourPointValue {
  double g_tilde = 0.0;  // lambda1 |F_-|^2 + lambda2 |F_+|^2
  double g = 0.0;        // |z|^{g a1/2} |z-1|^{g a2/2} g_tilde
};

FourPointValue fourpoint_closed(cplx z, const FourPointArgs& args, const LiouvilleParams& p);

// Normalized residual of the hypergeometric PDE applied to `kind` at z:
// 0 = the physical combination, 1 = |F_-|^2, 2 = |F_+|^2, 3 = corrupted combination (+0.1 Re z).
double hypergeo_residual(cplx z, const FourPointArgs& args, const LiouvilleParams& p, int kind = 0);

double connection_check(double lambda1, double lambda2, const HypergeoParams& hp);

// The correlations here carry the global constant 4 e^{-chi/2 (sum alpha - 2Q)^2}; the DOZZ expression
// above and the closed four-point function are normalized to half of that.
// Compare dozz_c with estimate / kDozzConvention.
inline constexpr double kDozzConvention = 2.0;

// T(z) = B(-gamma/2, alpha) mu^{1/2-s} gamma^{-1} Gamma(s - 1/2) E[R(z)^{1/2-s}], s the three-point exponent.
// Same normalization as the correlations, so compare with g_tilde after dividing by kDozzConvention.
CorrelatorEstimate fourpoint_mc(cplx z, const FourPointArgs& args, const LiouvilleParams& p, const McConfig& cfg);
// Several z on common fields; `samples` receives one column per z.
std::vector<CorrelatorEstimate> fourpoint_mc_scan(const std::vector<cplx>& zs, const FourPointArgs& args,
                                                  const LiouvilleParams& p, const McConfig& cfg,
                                                  SampleTable* samples = nullptr);

}  // namespace liouville
