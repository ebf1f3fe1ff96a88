#include "liouville/field.hpp"

#include <fftw3.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "liouville/rng.hpp"

namespace liouville {

namespace {

constexpr double kPi = std::numbers::pi;
// Below this, P_mm and everything above it in l is invisible at double precision.
constexpr double kLogTiny = -575.0;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

double spectral_weight(int l) { return l == 0 ? 0.0 : std::sqrt(2.0 * kPi / (double(l) * (l + 1))); }

// Normalized associated Legendre functions P_lm(t), l = m..L, for one (t, m); writes out[l-m].
// Returns false when P_mm underflows.
bool legendre_column(double t, double sin_t, int m, int L, double* out) {
  double lp = -0.5 * std::log(4.0 * kPi);
  const double ls = std::log(std::max(sin_t, 1e-300));
  for (int k = 1; k <= m; ++k) lp += 0.5 * std::log((2.0 * k + 1.0) / (2.0 * k)) + ls;
  if (lp < kLogTiny) return false;
  double p2 = 0.0, p1 = (m % 2 ? -1.0 : 1.0) * std::exp(lp);
  out[0] = p1;
  for (int l = m + 1; l <= L; ++l) {
    const double ll = double(l) * l, mm = double(m) * m;
    const double a = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
    const double b = std::sqrt(((l - 1.0) * (l - 1.0) - mm) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
    const double p = a * (t * p1 - b * p2);
    out[l - m] = p;
    p2 = p1;
    p1 = p;
  }
  return true;
}

std::size_t cos_index(int l, int m) { return std::size_t(l) * l + l + m; }
std::size_t sin_index(int l, int m) { return std::size_t(l) * l + l - m; }

// Degree-l components X_l(p) of the truncated field.
std::vector<double> degree_components(const FieldSample& f, const SpherePoint& p) {
  const SphereAngles a = to_angles(p);
  const double t = std::cos(a.theta), st = std::sin(a.theta);
  const int L = f.lmax;
  std::vector<double> comp(L + 1, 0.0), col(L + 1);
  for (int m = 0; m <= L; ++m) {
    if (!legendre_column(t, st, m, L, col.data())) break;
    const double cm = std::cos(m * a.phi), sm = std::sin(m * a.phi);
    const double fm = m == 0 ? 1.0 : std::numbers::sqrt2;
    for (int l = std::max(m, 1); l <= L; ++l) {
      double v = f.coeffs[cos_index(l, m)] * cm;
      if (m > 0) v += f.coeffs[sin_index(l, m)] * sm;
      comp[l] += spectral_weight(l) * fm * col[l - m] * v;
    }
  }
  return comp;
}

// P_l(t) for l = 0..L
std::vector<double> legendre_p(int L, double t) {
  std::vector<double> p(L + 1);
  p[0] = 1.0;
  if (L >= 1) p[1] = t;
  for (int l = 2; l <= L; ++l) p[l] = ((2.0 * l - 1.0) * t * p[l - 1] - (l - 1.0) * p[l - 2]) / l;
  return p;
}

}  // namespace

double ghat(cplx z) {
  const double d = 1.0 + std::norm(z);
  return 4.0 / (d * d);
}

double chordal_distance(const SpherePoint& a, const SpherePoint& b) {
  if (a.infinite && b.infinite) return 0.0;
  if (a.infinite) return 2.0 / std::sqrt(1.0 + std::norm(b.z));
  if (b.infinite) return 2.0 / std::sqrt(1.0 + std::norm(a.z));
  return 2.0 * std::abs(a.z - b.z) / std::sqrt((1.0 + std::norm(a.z)) * (1.0 + std::norm(b.z)));
}

SphereAngles to_angles(const SpherePoint& p) {
  if (p.infinite) return {kPi, 0.0};
  double phi = std::arg(p.z);
  if (phi < 0.0) phi += 2.0 * kPi;
  return {2.0 * std::atan(std::abs(p.z)), phi};
}

SpherePoint from_angles(double theta, double phi) {
  if (theta >= kPi) return SpherePoint::at_infinity();
  return SpherePoint::at(std::polar(std::tan(0.5 * theta), phi));
}

std::array<double, 3> unit_vector(const SpherePoint& p) {
  const SphereAngles a = to_angles(p);
  return {std::sin(a.theta) * std::cos(a.phi), std::sin(a.theta) * std::sin(a.phi), std::cos(a.theta)};
}

double covariance(const CovarianceKernel& k, cplx x, cplx y) {
  if (x == y) throw std::domain_error("covariance: kernel diverges at x = y");
  const double lxy = std::log(std::abs(x - y));
  switch (k.kind) {
    case KernelKind::sphere_G:
      return -lxy - 0.25 * (std::log(ghat(x)) + std::log(ghat(y))) + k.params.chi;
    case KernelKind::disk_G0: {
      const double ax = std::abs(x), ay = std::abs(y);
      return -lxy + (ax >= 1.0 ? std::log(ax) : 0.0) + (ay >= 1.0 ? std::log(ay) : 0.0);
    }
    case KernelKind::lateral_Y:
      return std::log(std::max(std::abs(x), std::abs(y))) - lxy;
  }
  return 0.0;
}

// ---------------------------------------------------------------- grid

SphereGrid::SphereGrid(int resolution) : res_(resolution) {
  if (resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");
  n_theta_ = 2 * res_;
  n_phi_ = 4 * res_;
  dtheta_ = kPi / n_theta_;
  dphi_ = 2.0 * kPi / n_phi_;
  ring_area_.resize(n_theta_);
  for (int i = 0; i < n_theta_; ++i) {
    // cos(a) - cos(b) = 2 sin((a+b)/2) sin((b-a)/2)
    ring_area_[i] = 2.0 * std::sin(theta(i)) * std::sin(0.5 * dtheta_) * dphi_;
  }
}

SpherePoint SphereGrid::center(std::size_t cell) const {
  const int ring = int(cell / n_phi_), col = int(cell % n_phi_);
  return from_angles(theta(ring), phi(col));
}

std::size_t SphereGrid::locate(double th, double ph) const {
  int ring = int(th / dtheta_);
  ring = std::clamp(ring, 0, n_theta_ - 1);
  double p = std::fmod(ph, 2.0 * kPi);
  if (p < 0.0) p += 2.0 * kPi;
  int col = int(p / dphi_);
  if (col >= n_phi_) col = n_phi_ - 1;
  return index(ring, col);
}

double SphereGrid::total_area() const {
  double s = 0.0;
  for (double a : ring_area_) s += a * n_phi_;
  return s;
}

// ---------------------------------------------------------------- spectra

double truncated_variance(int lmax) {
  double v = 0.0;
  for (int l = 1; l <= lmax; ++l) v += (2.0 * l + 1.0) / (2.0 * l * (l + 1.0));
  return v;
}

double truncated_covariance(int lmax, double t) {
  const auto p = legendre_p(lmax, t);
  double v = 0.0;
  for (int l = 1; l <= lmax; ++l) v += (2.0 * l + 1.0) / (2.0 * l * (l + 1.0)) * p[l];
  return v;
}

double circle_average_variance(int lmax, double r) {
  const auto p = legendre_p(lmax, 1.0 - 0.5 * r * r);
  double v = 0.0;
  for (int l = 1; l <= lmax; ++l) v += (2.0 * l + 1.0) / (2.0 * l * (l + 1.0)) * p[l] * p[l];
  return v;
}

double FieldSample::value_at(const SpherePoint& p) const {
  const auto comp = degree_components(*this, p);
  double v = 0.0;
  for (double c : comp) v += c;
  return v;
}

double FieldSample::circle_average(const SpherePoint& p, double r) const {
  const auto comp = degree_components(*this, p);
  const auto pl = legendre_p(lmax, 1.0 - 0.5 * r * r);
  double v = 0.0;
  for (int l = 1; l <= lmax; ++l) v += pl[l] * comp[l];
  return v;
}

// ---------------------------------------------------------------- synthesis

struct SphereSynthesizer::Impl {
  int L = 0, res = 0, n_phi = 0;
  std::vector<std::size_t> offset;     // start of degree block for order m (l = m..L)
  std::vector<double> rec_a, rec_b;    // recurrence coefficients, same layout
  std::vector<double> ring_t, ring_pmm;  // cos(theta), P_mm for the northern rings
  std::vector<int> ring_mmax;
  std::vector<std::complex<double>> phase;  // e^{i m dphi/2}
  fftw_plan plan = nullptr;

  std::size_t at(int m, int l) const { return offset[m] + (l - m); }
};

SphereSynthesizer::SphereSynthesizer(std::shared_ptr<const SphereGrid> grid, int lmax)
    : grid_(std::move(grid)), lmax_(lmax), impl_(std::make_unique<Impl>()) {
  if (lmax < 1) throw std::invalid_argument("L_max must be at least 1");
  Impl& I = *impl_;
  I.L = lmax;
  I.res = grid_->resolution();
  I.n_phi = grid_->n_phi();
  if (lmax >= I.n_phi / 2) throw std::invalid_argument("L_max must be below n_phi/2 = 2 resolution");

  I.offset.resize(lmax + 2);
  std::size_t off = 0;
  for (int m = 0; m <= lmax; ++m) {
    I.offset[m] = off;
    off += std::size_t(lmax - m + 1);
  }
  I.offset[lmax + 1] = off;
  I.rec_a.assign(off, 0.0);
  I.rec_b.assign(off, 0.0);
  for (int m = 0; m <= lmax; ++m)
    for (int l = m + 1; l <= lmax; ++l) {
      const double ll = double(l) * l, mm = double(m) * m;
      I.rec_a[I.at(m, l)] = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
      I.rec_b[I.at(m, l)] = std::sqrt(((l - 1.0) * (l - 1.0) - mm) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
    }

  I.ring_t.resize(I.res);
  I.ring_mmax.resize(I.res);
  I.ring_pmm.assign(std::size_t(I.res) * (lmax + 1), 0.0);
  for (int i = 0; i < I.res; ++i) {
    const double th = grid_->theta(i);
    I.ring_t[i] = std::cos(th);
    const double ls = std::log(std::sin(th));
    double lp = -0.5 * std::log(4.0 * kPi);
    int mmax = -1;
    for (int m = 0; m <= lmax; ++m) {
      if (m > 0) lp += 0.5 * std::log((2.0 * m + 1.0) / (2.0 * m)) + ls;
      if (lp < kLogTiny) break;
      I.ring_pmm[std::size_t(i) * (lmax + 1) + m] = (m % 2 ? -1.0 : 1.0) * std::exp(lp);
      mmax = m;
    }
    I.ring_mmax[i] = mmax;
  }
  I.phase.resize(lmax + 1);
  for (int m = 0; m <= lmax; ++m) I.phase[m] = std::polar(1.0, 0.5 * m * grid_->dphi());

  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (I.n_phi / 2 + 1)));
  auto* out = static_cast<double*>(fftw_malloc(sizeof(double) * I.n_phi));
  I.plan = fftw_plan_dft_c2r_1d(I.n_phi, in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
}

SphereSynthesizer::~SphereSynthesizer() {
  if (impl_ && impl_->plan) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(impl_->plan);
  }
}

FieldSample sample_coefficients(int lmax, std::uint64_t seed, std::uint64_t sample_index) {
  if (lmax < 1) throw std::invalid_argument("lmax must be at least 1");
  FieldSample f;
  f.lmax = lmax;
  f.seed = seed;
  f.sample = sample_index;
  f.variance = truncated_variance(lmax);
  f.regularization_scale = 1.0 / lmax;
  const std::size_t n = std::size_t(lmax + 1) * (lmax + 1);
  f.coeffs.resize(n);
  NormalStream(seed, sample_index, 0).fill(f.coeffs.data(), n);
  f.coeffs[0] = 0.0;
  return f;
}

FieldSample SphereSynthesizer::coefficients(std::uint64_t seed, std::uint64_t sample_index) const {
  FieldSample f = sample_coefficients(lmax_, seed, sample_index);
  f.grid = grid_;
  return f;
}

FieldSample SphereSynthesizer::sample(std::uint64_t seed, std::uint64_t sample_index) const {
  FieldSample f = coefficients(seed, sample_index);
  const Impl& I = *impl_;
  const int L = I.L, n_phi = I.n_phi, n_theta = grid_->n_theta();
  f.values.assign(grid_->size(), 0.0);

  // Coefficients with the spectral weight folded in, per order m in degree order.
  std::vector<double> C(I.offset[L + 1]), S(I.offset[L + 1]);
  for (int m = 0; m <= L; ++m) {
    const double fm = m == 0 ? 1.0 : std::numbers::sqrt2;
    for (int l = m; l <= L; ++l) {
      const double w = spectral_weight(l) * fm;
      C[I.at(m, l)] = w * f.coeffs[cos_index(l, m)];
      S[I.at(m, l)] = m == 0 ? 0.0 : w * f.coeffs[sin_index(l, m)];
    }
  }

  const int nc = n_phi / 2 + 1;
  auto* north = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc));
  auto* south = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc));
  auto* out = static_cast<double*>(fftw_malloc(sizeof(double) * n_phi));

  for (int i = 0; i < I.res; ++i) {
    std::memset(north, 0, sizeof(fftw_complex) * nc);
    std::memset(south, 0, sizeof(fftw_complex) * nc);
    const double t = I.ring_t[i];
    for (int m = 0; m <= I.ring_mmax[i]; ++m) {
      const double* a = I.rec_a.data() + I.offset[m] - m;
      const double* b = I.rec_b.data() + I.offset[m] - m;
      const double* c = C.data() + I.offset[m] - m;
      const double* s = S.data() + I.offset[m] - m;
      double p2 = 0.0, p1 = I.ring_pmm[std::size_t(i) * (L + 1) + m];
      // parity of l - m: even terms are symmetric about the equator, odd ones antisymmetric
      double ce = c[m] * p1, se = s[m] * p1, co = 0.0, so = 0.0;
      int l = m + 1;
      for (; l + 1 <= L; l += 2) {
        double p = a[l] * (t * p1 - b[l] * p2);
        co += c[l] * p;
        so += s[l] * p;
        p2 = p1;
        p1 = p;
        p = a[l + 1] * (t * p1 - b[l + 1] * p2);
        ce += c[l + 1] * p;
        se += s[l + 1] * p;
        p2 = p1;
        p1 = p;
      }
      if (l <= L) {
        const double p = a[l] * (t * p1 - b[l] * p2);
        co += c[l] * p;
        so += s[l] * p;
      }
      const std::complex<double> ph = m == 0 ? 1.0 : 0.5 * I.phase[m];
      const std::complex<double> vn = ph * std::complex<double>(ce + co, -(se + so));
      const std::complex<double> vs = ph * std::complex<double>(ce - co, -(se - so));
      north[m][0] = vn.real();
      north[m][1] = vn.imag();
      south[m][0] = vs.real();
      south[m][1] = vs.imag();
    }
    fftw_execute_dft_c2r(I.plan, north, out);
    std::copy(out, out + n_phi, f.values.begin() + grid_->index(i, 0));
    fftw_execute_dft_c2r(I.plan, south, out);
    std::copy(out, out + n_phi, f.values.begin() + grid_->index(n_theta - 1 - i, 0));
  }
  fftw_free(north);
  fftw_free(south);
  fftw_free(out);
  return f;
}

FieldSample sample_sphere_gff(std::shared_ptr<const SphereGrid> grid, int lmax, std::uint64_t seed,
                              std::uint64_t sample_index) {
  return SphereSynthesizer(std::move(grid), lmax).sample(seed, sample_index);
}

void export_field(const FieldSample& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  const char magic[8] = {'L', 'V', 'F', 'I', 'E', 'L', 'D', '1'};
  os.write(magic, 8);
  const std::int64_t header[5] = {f.grid->resolution(), f.lmax, static_cast<std::int64_t>(f.seed),
                                  f.grid->n_theta(), f.grid->n_phi()};
  os.write(reinterpret_cast<const char*>(header), sizeof(header));
  os.write(reinterpret_cast<const char*>(f.values.data()), std::streamsize(f.values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------- radial decomposition

namespace {

// Steps the Brownian path and the OU mode amplitudes of the lateral field.
class RadialStepper {
 public:
  RadialStepper(double ds, int modes, int n_sigma, std::uint64_t seed, std::uint64_t sample, std::uint32_t stream)
      : ds_(ds), modes_(modes), n_sigma_(n_sigma), rng_(seed, sample, stream), amp_(2 * modes), noise_(2 * modes + 2),
        trig_(std::size_t(n_sigma) * 2 * modes), decay_(modes), kick_(modes) {
    for (int j = 0; j < n_sigma; ++j)
      for (int n = 1; n <= modes; ++n) {
        const double sg = 2.0 * kPi * j / n_sigma;
        trig_[std::size_t(j) * 2 * modes + 2 * (n - 1)] = std::cos(n * sg) / std::sqrt(double(n));
        trig_[std::size_t(j) * 2 * modes + 2 * (n - 1) + 1] = std::sin(n * sg) / std::sqrt(double(n));
      }
    for (int n = 1; n <= modes; ++n) {
      decay_[n - 1] = std::exp(-n * ds);
      kick_[n - 1] = std::sqrt(-std::expm1(-2.0 * n * ds));
    }
    rng_.fill(amp_.data(), amp_.size(), 0);
    for (int n = 1; n <= modes; ++n) lateral_var_ += 1.0 / n;
  }

  double lateral_variance() const { return lateral_var_; }
  double x() const { return x_; }

  void step() {
    ++k_;
    rng_.fill(noise_.data(), noise_.size(), std::uint64_t(k_) * (modes_ + 1));
    x_ += std::sqrt(ds_) * noise_[0];
    for (int n = 0; n < modes_; ++n) {
      amp_[2 * n] = decay_[n] * amp_[2 * n] + kick_[n] * noise_[1 + 2 * n];
      amp_[2 * n + 1] = decay_[n] * amp_[2 * n + 1] + kick_[n] * noise_[2 + 2 * n];
    }
  }

  double lateral(int j) const {
    const double* tr = trig_.data() + std::size_t(j) * 2 * modes_;
    double y = 0.0;
    for (int q = 0; q < 2 * modes_; ++q) y += tr[q] * amp_[q];
    return y;
  }

 private:
  double ds_;
  int modes_, n_sigma_;
  NormalStream rng_;
  std::vector<double> amp_, noise_, trig_, decay_, kick_;
  double lateral_var_ = 0.0;
  double x_ = 0.0;
  long k_ = 0;
};

}  // namespace

RadialDecomposition sample_radial(double s_max, double ds, int modes, std::uint64_t seed, std::uint64_t sample_index,
                                  std::uint32_t stream) {
  if (!(s_max > 0.0 && ds > 0.0)) throw std::invalid_argument("sample_radial needs s_max > 0 and ds > 0");
  if (modes < 1) throw std::invalid_argument("sample_radial needs at least one lateral mode");
  RadialDecomposition r;
  r.ds = ds;
  r.modes = modes;
  r.n_sigma = 4 * modes;
  const int n_s = int(std::ceil(s_max / ds - 1e-9));
  RadialStepper st(ds, modes, r.n_sigma, seed, sample_index, stream);
  r.radial_path.resize(n_s + 1);
  r.lateral.resize(std::size_t(n_s + 1) * r.n_sigma);
  for (int k = 0; k <= n_s; ++k) {
    if (k > 0) st.step();
    r.radial_path[k] = st.x();
    for (int j = 0; j < r.n_sigma; ++j) r.lateral[std::size_t(k) * r.n_sigma + j] = st.lateral(j);
  }
  return r;
}

double smooth_cutoff(double r, double core) {
  if (r <= core) return 1.0;
  if (r >= 1.0) return 0.0;
  const double t = (1.0 - r) / (1.0 - core);
  return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

double subgrid_mean(double a, double core) {
  if (!(a < 2.0)) throw std::domain_error("subgrid mass needs gamma*alpha < 2");
  const double kappa = 2.0 - a;
  double v = std::pow(core, kappa) / kappa;
  if (core < 1.0)
    v += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double r) { return smooth_cutoff(r, core) * std::pow(r, 1.0 - a); }, core, 1.0, 10, 1e-13);
  return 2.0 * kPi * v;
}

double subgrid_mass(double gamma, double a, const SubgridSpec& spec, std::uint64_t seed, std::uint64_t sample_index,
                    std::uint32_t stream, double core) {
  if (!(a < 2.0)) throw std::domain_error("subgrid mass needs gamma*alpha < 2");
  if (!(core > 0.0 && core <= 1.0)) throw std::invalid_argument("subgrid core must lie in (0,1]");
  const double kappa = 2.0 - a;
  const double drift = kappa + 0.5 * gamma * gamma;
  const double s_core = -std::log(core);
  const int n_s = std::max({8, int(std::ceil(spec.tail_log / drift / spec.ds)), int(std::ceil(s_core / spec.ds)) + 1});
  const int n_sigma = 2 * spec.modes;
  RadialStepper st(spec.ds, spec.modes, n_sigma, seed, sample_index, stream);
  const double norm = 0.5 * gamma * gamma * st.lateral_variance();
  using Gauss = boost::math::quadrature::gauss<double, 8>;
  double w = 0.0;
  for (int k = 0; k < n_s; ++k) {
    if (k > 0) st.step();
    const double s = k * spec.ds;
    double circ = 0.0;
    for (int j = 0; j < n_sigma; ++j) circ += std::exp(gamma * st.lateral(j) - norm);
    circ *= 2.0 * kPi / n_sigma;
    // int_{s}^{s+ds} psi(e^{-u}) e^{-kappa u} du
    double slab;
    if (s >= s_core) {
      slab = std::exp(-kappa * s) * (-std::expm1(-kappa * spec.ds)) / kappa;
    } else {
      slab = Gauss::integrate([&](double u) { return smooth_cutoff(std::exp(-u), core) * std::exp(-kappa * u); }, s,
                              s + spec.ds);
    }
    w += std::exp(gamma * st.x() - 0.5 * gamma * gamma * s) * slab * circ;
  }
  st.step();
  const double S = n_s * spec.ds;
  w += std::exp(gamma * st.x() - 0.5 * gamma * gamma * S - kappa * S) / kappa * 2.0 * kPi;
  return w;
}

}  // namespace liouville
