#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "liouville/chaos.hpp"
#include "liouville/params.hpp"

namespace liouville {

struct Resolution {
  int grid = 128;  // rings per hemisphere
  int lmax = 128;
};

struct McConfig {
  std::size_t n_samples = 200;
  std::vector<Resolution> resolutions{{128, 128}};  // estimates are reported at the last entry
  std::uint64_t base_seed = 1;
  bool common_random_numbers = true;
  unsigned workers = 1;
  QuadratureSpec quadrature;
};

// Per-sample values, one row per sample index. Rows are filled independently, so the table
// does not depend on the number of workers.
class SampleTable {
 public:
  SampleTable() = default;
  SampleTable(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), v_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }
  double* row(std::size_t i) { return v_.data() + i * cols_; }
  const double* row(std::size_t i) const { return v_.data() + i * cols_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> v_;
};

struct Estimate {
  double value = 0.0;
  double std_err = 0.0;
};

struct ComplexEstimate {
  cplx value{};
  double std_err_re = 0.0;
  double std_err_im = 0.0;

  double std_err_abs() const { return std::hypot(std_err_re, std_err_im); }
};

// Pairwise sum in index order; the same values always give the same bits.
double ordered_sum(const double* v, std::size_t n, std::size_t stride = 1);
// Mean and sample standard deviation / sqrt(n) of f(row) over the table.
Estimate mean_of(const SampleTable& t, const std::function<double(const double*)>& f);
Estimate column_mean(const SampleTable& t, std::size_t col);
// mean(num)/mean(den) with the delta-method error.
Estimate ratio_of(const SampleTable& t, const std::function<double(const double*)>& num,
                  const std::function<double(const double*)>& den);

// Calls fn(i, row) for every row on up to `workers` threads; the first exception is rethrown.
SampleTable parallel_table(std::size_t rows, std::size_t cols, unsigned workers,
                           const std::function<void(std::size_t, double*)>& fn);

using SampleFn = std::function<void(ChaosEvaluator&, const ChaosMeasure&, double* row)>;

// Draws n_samples fields at `res` from `seed`, builds the chaos measure and calls fn once per sample.
SampleTable run_samples(const McConfig& cfg, const Resolution& res, double gamma, std::uint64_t seed,
                        std::size_t n_cols, const SampleFn& fn);

// Several configurations, each filling `cols_per` columns of the row. With common random numbers they
// share one set of fields; otherwise configuration k uses derive_seed(base_seed, k + 1).
using ConfigFn = std::function<void(ChaosEvaluator&, const ChaosMeasure&, std::size_t config, double* out)>;
SampleTable run_configs(const McConfig& cfg, const Resolution& res, double gamma, std::size_t n_configs,
                        std::size_t cols_per, const ConfigFn& fn);

// One grid object per resolution, shared by samplers and kernel weights.
std::shared_ptr<const SphereGrid> shared_grid(int resolution);

// Throws std::domain_error on a Seiberg failure, std::invalid_argument when N < 3.
void validate_insertions(const InsertionSet& ins, const LiouvilleParams& p);

// Chart-free prefactor: prod_k w_k^{Delta_k} B prod_{i<j} d_ij^{-alpha_i alpha_j} mu^{-s} gamma^{-1} Gamma(s),
// with d the chordal distance and w = ghat(z), or 4 at infinity. The correlation is this times
// E[I^{-s}], I the chordal-kernel chaos integral.
double log_sphere_prefactor(const InsertionSet& ins, const LiouvilleParams& p);

struct ResolutionEstimate {
  Resolution resolution;
  double mean = 0.0;
  double std_err = 0.0;
};

struct CorrelatorEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t n = 0;
  Resolution resolution;
  std::vector<ResolutionEstimate> sweep;  // one entry per configured resolution
  // last minus previous resolution, paired by sample (fields are nested in lmax)
  double resolution_shift = 0.0;
  double resolution_shift_std_err = 0.0;
  // m(eps) = m0 + c eps^p in eps = 1/lmax: order fitted from three resolutions, 1 with two. Diagnostic.
  double extrapolated = 0.0;
  double extrapolation_order = 0.0;
  InsertionSet insertions;
};

CorrelatorEstimate estimate_correlator(const InsertionSet& ins, const LiouvilleParams& p, const McConfig& cfg);

// G(x; z): the correlation with an extra gamma insertion at x.
CorrelatorEstimate insertion_density(const SpherePoint& x, const InsertionSet& ins, const LiouvilleParams& p,
                                     const McConfig& cfg);

struct ScanPoint {
  double distance = 0.0;
  double mean = 0.0;
  double std_err = 0.0;
};

// Least-squares slope of ln G against ln distance, jackknifed over sample groups.
struct PowerFit {
  std::vector<ScanPoint> points;
  double slope = 0.0;
  double slope_std_err = 0.0;
  double intercept = 0.0;
  double expected = 0.0;
  double log_correction = 0.0;  // coefficient of ln|ln r| in a three-term fit, diagnostic
  double log_correction_std_err = 0.0;
};

// G(x; z) at x = r e^{i phi} for each r, common fields across r.
PowerFit decay_scan(const InsertionSet& ins, const std::vector<double>& radii, double phi, const LiouvilleParams& p,
                    const McConfig& cfg);

struct KpzResult {
  double lhs = 0.0;             // mu gamma int G(x; z) d^2x
  double rhs = 0.0;             // (sum alpha - 2Q) G(z)
  double combined_sigma = 0.0;  // standard error of the paired difference
  double lhs_direct = 0.0;      // part from densities on the mesh away from the insertions
  double lhs_palm = 0.0;        // part from the disks around the insertions
  double constant_residual = 0.0;  // relative mismatch of the two prefactor bookkeepings
  std::size_t mesh_points = 0;
};

// The density is integrated on a coarse mesh of the chaos grid outside disks of chordal radius
// `disk_radius` around the insertions. Inside the disks, where the lattice cannot resolve G(x; z),
// the integral is carried by the equivalent shifted-field form mu gamma c E[I_disk I^{-s-1}].
KpzResult kpz_check(const InsertionSet& ins, const LiouvilleParams& p, const McConfig& cfg, double disk_radius = 0.5,
                    int block = 8);

struct DerivativeEstimate {
  ComplexEstimate analytic;           // pairwise term plus the principal-value integral
  ComplexEstimate finite_difference;  // central differences, step h
  ComplexEstimate difference;         // paired by sample
  Estimate correlator;
  double step = 0.0;
};

// Holomorphic derivative d/dz_i of the correlation. Finite points only.
DerivativeEstimate derivative_estimate(std::size_t i, const InsertionSet& ins, const LiouvilleParams& p,
                                       const McConfig& cfg);

ComplexEstimate t_insertion(cplx z, const InsertionSet& ins, const LiouvilleParams& p, const McConfig& cfg);

// r1 = sum dG_i, r2 = sum (Delta_i G + z_i dG_i), r3 = sum (2 z_i Delta_i G + z_i^2 dG_i)
std::array<cplx, 3> ward_residuals(const InsertionSet& ins, const LiouvilleParams& p, double g,
                                   const std::vector<cplx>& dg);

struct WardResult {
  std::array<ComplexEstimate, 3> residuals;
  std::array<double, 3> scale{};  // mean of sum |terms|, for reading the residuals
  Estimate correlator;
};

WardResult ward_sum_rules(const InsertionSet& ins, const LiouvilleParams& p, const McConfig& cfg);

// C |z12|^{2(D3-D1-D2)} |z13|^{2(D2-D1-D3)} |z23|^{2(D1-D2-D3)} and its z_i derivatives.
struct ThreePointShape {
  double value = 0.0;
  std::vector<cplx> gradient;
};
ThreePointShape three_point_shape(const InsertionSet& ins, const LiouvilleParams& p, double constant = 1.0);

struct MobiusMap {
  cplx a{1.0}, b{0.0}, c{0.0}, d{1.0};

  static MobiusMap translation(cplx y) { return {1.0, y, 0.0, 1.0}; }
  static MobiusMap rotation(double angle);
  static MobiusMap scaling(double factor);
  // Divided by sqrt(ad - bc); throws std::invalid_argument if ad - bc vanishes.
  MobiusMap normalized() const;
  cplx apply(cplx z) const { return (a * z + b) / (c * z + d); }
  cplx derivative(cplx z) const { return 1.0 / ((c * z + d) * (c * z + d)); }
};

struct MobiusResult {
  Estimate ratio;
  Estimate original;
  Estimate mapped;
  double jacobian = 1.0;  // prod |psi'(z_k)|^{-2 Delta_k}
};

MobiusResult mobius_check(const InsertionSet& ins, const MobiusMap& map, const LiouvilleParams& p,
                          const McConfig& cfg);

// beta1 at -r/2 and beta2 at r/2 on the real axis, with fixed spectators. A zero weight is omitted.
PowerFit fusion_scan(double beta1, double beta2, const InsertionSet& spectators, const std::vector<double>& distances,
                     const LiouvilleParams& p, const McConfig& cfg);

// 2 Delta_{min(b1+b2, Q)} - 2 Delta_{b1} - 2 Delta_{b2}
double fusion_exponent(double beta1, double beta2, const LiouvilleParams& p);

}  // namespace liouville
