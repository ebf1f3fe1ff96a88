#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "liouville/params.hpp"

namespace liouville {

// Round metric 4/(1+|z|^2)^2 of the unit sphere in the plane chart.
double ghat(cplx z);

// Chordal distance on the unit sphere: 2|x-y| / sqrt((1+|x|^2)(1+|y|^2)), with the point at infinity.
double chordal_distance(const SpherePoint& a, const SpherePoint& b);

// Polar angle theta (0 at z=0, pi at infinity) and azimuth phi in [0, 2 pi).
struct SphereAngles {
  double theta = 0.0;
  double phi = 0.0;
};
SphereAngles to_angles(const SpherePoint& p);
SpherePoint from_angles(double theta, double phi);
std::array<double, 3> unit_vector(const SpherePoint& p);

enum class KernelKind { sphere_G, disk_G0, lateral_Y };

struct CovarianceKernel {
  KernelKind kind = KernelKind::sphere_G;
  LiouvilleParams params;
};

// Exact kernel value; x == y is an error.
double covariance(const CovarianceKernel& k, cplx x, cplx y);

// Equal-angle grid in (theta, phi). `resolution` rings per hemisphere; the northern
// hemisphere is the chart |z| <= 1, the southern one the inverted chart |z| >= 1.
// Cell areas are exact spherical areas, so they sum to 4 pi.
class SphereGrid {
 public:
  explicit SphereGrid(int resolution);

  int resolution() const { return res_; }
  int n_theta() const { return n_theta_; }
  int n_phi() const { return n_phi_; }
  std::size_t size() const { return std::size_t(n_theta_) * n_phi_; }
  std::size_t index(int ring, int col) const { return std::size_t(ring) * n_phi_ + col; }

  double theta(int ring) const { return (ring + 0.5) * dtheta_; }
  double phi(int col) const { return (col + 0.5) * dphi_; }
  double theta_edge(int k) const { return k * dtheta_; }
  double dtheta() const { return dtheta_; }
  double dphi() const { return dphi_; }
  double ring_area(int ring) const { return ring_area_[ring]; }  // area of one cell of the ring
  int chart(int ring) const { return ring < res_ ? 0 : 1; }

  SpherePoint center(std::size_t cell) const;
  std::size_t locate(double theta, double phi) const;
  double total_area() const;

 private:
  int res_, n_theta_, n_phi_;
  double dtheta_, dphi_;
  std::vector<double> ring_area_;
};

// Variance sum_{l=1}^{L} (2l+1)/(2l(l+1)) of the truncated field at every point.
double truncated_variance(int lmax);
// Truncated covariance at angular separation with cosine t.
double truncated_covariance(int lmax, double t);
// Variance of the truncated field averaged over a circle of chordal radius r.
double circle_average_variance(int lmax, double chordal_radius);

// One realization of the spectrally truncated sphere GFF.
struct FieldSample {
  std::shared_ptr<const SphereGrid> grid;
  int lmax = 0;
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
  double variance = 0.0;              // exact truncated variance (uniform)
  double regularization_scale = 0.0;  // 1/lmax
  std::vector<double> values;         // per cell centre
  std::vector<double> coeffs;         // xi_{lm}, real harmonic order, index l^2 + l +- m

  double value_at(const SpherePoint& p) const;
  // Average over the circle of chordal radius r around p (exact, per degree).
  double circle_average(const SpherePoint& p, double chordal_radius) const;
};

// Spectral synthesis X = sum_{l<=L} sqrt(2 pi/(l(l+1))) sum_m xi_lm Y_lm on the grid.
// Thread-safe: sample() may be called concurrently.
class SphereSynthesizer {
 public:
  SphereSynthesizer(std::shared_ptr<const SphereGrid> grid, int lmax);
  ~SphereSynthesizer();
  SphereSynthesizer(const SphereSynthesizer&) = delete;
  SphereSynthesizer& operator=(const SphereSynthesizer&) = delete;

  FieldSample sample(std::uint64_t seed, std::uint64_t sample_index) const;
  // Only the coefficients, without the grid values.
  FieldSample coefficients(std::uint64_t seed, std::uint64_t sample_index) const;

  const std::shared_ptr<const SphereGrid>& grid() const { return grid_; }
  int lmax() const { return lmax_; }

 private:
  struct Impl;
  std::shared_ptr<const SphereGrid> grid_;
  int lmax_;
  std::unique_ptr<Impl> impl_;
};

// Spectral coefficients only, no grid. The normals are drawn in degree order, so the
// coefficients at a smaller lmax are a prefix of these.
FieldSample sample_coefficients(int lmax, std::uint64_t seed, std::uint64_t sample_index = 0);

FieldSample sample_sphere_gff(std::shared_ptr<const SphereGrid> grid, int lmax, std::uint64_t seed,
                              std::uint64_t sample_index = 0);

// Flat binary dump: header (magic, resolution, lmax, seed, n_theta, n_phi) then values.
void export_field(const FieldSample& f, const std::string& path);

// Radial/lateral decomposition around a point: x_s Brownian, Y(s, sigma) with
// covariance ln((|z| v |z'|)/|z - z'|) at z = e^{-s + i sigma}, truncated to `modes` modes.
struct RadialDecomposition {
  double ds = 0.0;
  int n_sigma = 0;
  int modes = 0;
  std::vector<double> radial_path;  // x_{k ds}, k = 0..n_s
  std::vector<double> lateral;      // row k: Y(k ds, 2 pi j / n_sigma)

  double lateral_at(int k, int j) const { return lateral[std::size_t(k) * n_sigma + j]; }
};

RadialDecomposition sample_radial(double s_max, double ds, int modes, std::uint64_t seed,
                                  std::uint64_t sample_index = 0, std::uint32_t stream = 1);

// 1 for r <= core, 0 for r >= 1, quintic smoothstep in between.
double smooth_cutoff(double r, double core);

// Mass of the unit disk around an insertion of strength a = gamma*alpha under the radial
// decomposition, weighted by the radial profile psi = smooth_cutoff(., core):
//   W = int_0^inf int psi(e^{-s}) e^{gamma x_s - gamma^2 s/2 - (2-a) s} e^{gamma Y - gamma^2 Var Y/2} ds dsigma,
// so that E W = 2 pi int_0^1 psi(r) r^{1-a} dr (= 2 pi/(2-a) for core = 1).
struct SubgridSpec {
  double ds = 1.0 / 32.0;
  int modes = 32;
  double tail_log = 14.0;  // stop once the drift has removed e^{-tail_log}
};
double subgrid_mass(double gamma, double a, const SubgridSpec& spec, std::uint64_t seed,
                    std::uint64_t sample_index, std::uint32_t stream, double core = 1.0);
double subgrid_mean(double a, double core = 1.0);

}  // namespace liouville
