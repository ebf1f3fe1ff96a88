#include <cmath>
#include <stdexcept>

#include "liouville/dozz.hpp"

namespace liouville {

namespace {

InsertionSet fourpoint_insertions(cplx z, const ThreePointArgs& a, const LiouvilleParams& p) {
  if (z == cplx(0.0) || z == cplx(1.0)) throw std::invalid_argument("fourpoint_mc: z must differ from 0 and 1");
  return InsertionSet({{SpherePoint::at(z), -0.5 * p.gamma},
                       {SpherePoint::at(0.0), a.alpha1},
                       {SpherePoint::at(1.0), a.alpha2},
                       {SpherePoint::at_infinity(), a.alpha3}});
}

}  // namespace

std::vector<CorrelatorEstimate> fourpoint_mc_scan(const std::vector<cplx>& zs, const FourPointArgs& args,
                                                  const LiouvilleParams& p, const McConfig& cfg,
                                                  SampleTable* samples) {
  const ThreePointArgs& a = args.three;
  const double s = (a.alpha_bar() - 2.0 * p.q_background) / p.gamma;
  if (!(s > 0.5)) throw std::domain_error("fourpoint_mc needs s > 1/2");
  for (double al : {a.alpha1, a.alpha2, a.alpha3})
    if (!(al < p.q_background)) throw std::domain_error("fourpoint_mc: every weight must be below Q");
  if (cfg.resolutions.empty()) throw std::invalid_argument("no resolution configured");
  const double e = s - 0.5;
  const double lc = std::log(prefactor_b(a.alpha_bar() - 0.5 * p.gamma, p)) - e * std::log(p.mu) - std::log(p.gamma) +
                    log_gamma(e).log_abs;
  std::vector<KernelWeights> w;
  for (cplx z : zs)
    w.push_back(build_kernel_weights(shared_grid(cfg.resolutions.back().grid), cfg.resolutions.back().lmax,
                                     SingularKernel{fourpoint_insertions(z, a, p), p.gamma}, cfg.quadrature));
  const SampleTable t =
      run_configs(cfg, cfg.resolutions.back(), p.gamma, zs.size(), 1,
                  [&](ChaosEvaluator& ev, const ChaosMeasure&, std::size_t k, double* out) {
                    // R(z) in the plane chart: the chordal integral times the planar factor
                    out[0] = std::exp(lc - e * std::log(w[k].planar * ev.integrate(w[k]).total));
                  });
  if (samples) *samples = t;
  std::vector<CorrelatorEstimate> r;
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const Estimate m = column_mean(t, k);
    CorrelatorEstimate c;
    c.mean = m.value;
    c.std_err = m.std_err;
    c.n = cfg.n_samples;
    c.resolution = cfg.resolutions.back();
    c.sweep.push_back({c.resolution, m.value, m.std_err});
    c.insertions = fourpoint_insertions(zs[k], a, p);
    r.push_back(std::move(c));
  }
  return r;
}

CorrelatorEstimate fourpoint_mc(cplx z, const FourPointArgs& args, const LiouvilleParams& p, const McConfig& cfg) {
  return fourpoint_mc_scan({z}, args, p, cfg).front();
}

}  // namespace liouville
