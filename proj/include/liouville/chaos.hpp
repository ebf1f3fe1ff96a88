#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "liouville/field.hpp"
#include "liouville/params.hpp"

namespace liouville {

// Rotation placing insertion points on the grid. The field law is rotation invariant, so
// any fixed frame gives the same expectations; `generic` keeps the usual points 0, 1, i, -1,
// infinity away from the grid poles, where cells degenerate into slivers.
struct Frame {
  std::array<std::array<double, 3>, 3> m{};

  static Frame identity();
  static Frame generic();
  std::array<double, 3> apply(const std::array<double, 3>& v) const;
  std::array<double, 3> inverse(const std::array<double, 3>& v) const;
};

// Stereographic coordinate of a unit vector (north pole = 0).
SpherePoint point_from_unit(const std::array<double, 3>& u);
SphereAngles angles_from_unit(const std::array<double, 3>& u);

// e^{gamma^2 chi/2} e^{gamma X - gamma^2 Var X/2} times the cell area.
struct ChaosMeasure {
  std::shared_ptr<const FieldSample> field;
  std::shared_ptr<const SphereGrid> grid;
  std::vector<double> cell_mass;
  double gamma = 0.0;
  double regularization_scale = 0.0;

  double total_mass() const;
};

ChaosMeasure build_chaos(std::shared_ptr<const FieldSample> field, double gamma);

// F(x, z) = prod_k |x - z_k|^{-gamma alpha_k} ghat(x)^{-(gamma/4) sum alpha}; a point at infinity
// contributes only through the ghat exponent.
struct SingularKernel {
  InsertionSet insertions;
  double gamma = 1.0;
};

double kernel_eval(const SingularKernel& k, cplx x);
// Chart-free form prod_k d(x, z_k)^{-gamma alpha_k} with chordal distance d.
double chordal_kernel(const SingularKernel& k, const SpherePoint& x);
// F / chordal kernel, independent of x.
double planar_factor(const SingularKernel& k);

// exp(chi - Var X_L): the distance at which the continuum kernel equals the truncated variance.
double coalescence_radius(int lmax);

struct QuadratureSpec {
  Frame frame = Frame::generic();
  double near_cells = 8.0;  // refined cell integration inside this many cells of an insertion
  double mid_cells = 64.0;  // 2x2 Gauss inside this many cells, midpoint beyond
  bool closure = true;
  double closure_min_a = 1.2;  // insertions with gamma*alpha >= this get a sub-grid disk
  double closure_scale = 3.0;  // disk radius in units of coalescence_radius
  double closure_core = 0.5;
  SubgridSpec subgrid;
  int pv_index = -1;       // if >= 0, also integrate K/(z_i - x) around this insertion
  double pv_cells = 2.0;   // cutoff radius of the symmetric principal value, in cells
};

// Disk around an insertion whose mass is drawn from the radial decomposition rather than the grid.
struct ClosureDisk {
  std::size_t slot = 0;
  std::array<double, 3> center{};  // grid frame
  double radius = 0.0;
  double a = 0.0;
  double core = 0.5;
  double outer = 0.0;  // the other kernel factors at the centre
  cplx pv_factor{};    // 1/(z_pv - z_slot) for the principal-value integral, 0 if unused
};

// Deterministic per-configuration cell weights. I = sum_c cell_mass_c mean_kernel_c + sum inner masses.
struct KernelWeights {
  std::shared_ptr<const SphereGrid> grid;
  int lmax = 0;
  double gamma = 0.0;
  std::vector<double> mean_kernel;  // cell average of K (1 - sum psi)
  std::vector<cplx> pv_kernel;      // cell average of K/(z_i - x) outside the cutoff, if requested
  int pv_index = -1;
  std::vector<ClosureDisk> closures;
  double planar = 1.0;  // planar_factor of the kernel

  // E I = e^{gamma^2 chi/2} (int K dA over grid part + closure means)
  double expected_integral() const;
};

KernelWeights build_kernel_weights(std::shared_ptr<const SphereGrid> grid, int lmax, const SingularKernel& kernel,
                                   const QuadratureSpec& spec);

struct ChaosIntegral {
  double total = 0.0;  // chordal-kernel integral
  double inner = 0.0;  // part carried by closure disks
  cplx pv{};           // principal-value integral, if requested
};

// Per-sample evaluation with caches for circle averages and sub-grid masses, shared by all
// kernel configurations evaluated on the same field.
class ChaosEvaluator {
 public:
  ChaosEvaluator(const ChaosMeasure& measure, const SubgridSpec& subgrid);

  ChaosIntegral integrate(const KernelWeights& w);
  double inner_mass(const ClosureDisk& d);

 private:
  const ChaosMeasure& m_;
  SubgridSpec subgrid_;
  struct CircleEntry {
    std::array<double, 3> center;
    double radius, value;
  };
  struct MassEntry {
    std::size_t slot;
    double a, core, value;
  };
  std::vector<CircleEntry> circles_;
  std::vector<MassEntry> masses_;
};

// Planar integral sum_c (cell-averaged F) cell_mass of the kernel against the measure.
double chaos_integral(const ChaosMeasure& measure, const SingularKernel& kernel, const QuadratureSpec& spec = {});

}  // namespace liouville
