#include "liouville/correlator.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

#include "liouville/rng.hpp"
#include "liouville/special.hpp"

namespace liouville {

namespace {

using Vec3 = std::array<double, 3>;

double chord(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

Vec3 unit_at(double t, double p) { return {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)}; }

double corr_value(double lp, double s, double integral) { return std::exp(lp - s * std::log(integral)); }

KernelWeights weights_for(const InsertionSet& ins, const LiouvilleParams& p, const Resolution& res,
                          const QuadratureSpec& q) {
  return build_kernel_weights(shared_grid(res.grid), res.lmax, SingularKernel{ins, p.gamma}, q);
}

void require_finite(const InsertionSet& ins, const char* what) {
  if (ins.has_infinite_point()) throw std::invalid_argument(std::string(what) + " needs finite insertion points");
}

// Jackknife over contiguous groups of samples.
struct Groups {
  std::size_t count, n;
  std::size_t begin(std::size_t g) const { return g * n / count; }
  std::size_t end(std::size_t g) const { return (g + 1) * n / count; }
};

Groups make_groups(std::size_t n) { return {std::min<std::size_t>(20, n), n}; }

double ols_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept = nullptr) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double b = sxy / sxx;
  if (intercept) *intercept = my - b * mx;
  return b;
}

// Coefficient of ln|ln r| in y = c0 + c1 ln r + c2 ln|ln r|.
double log_term(const std::vector<double>& lr, const std::vector<double>& y) {
  double a[3][4] = {};
  for (std::size_t i = 0; i < lr.size(); ++i) {
    const double f[3] = {1.0, lr[i], std::log(std::abs(lr[i]))};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a[r][c] += f[r] * f[c];
      a[r][3] += f[r] * y[i];
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 4; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return a[2][3] / a[2][2];
}

PowerFit fit_power(const SampleTable& t, const std::vector<double>& dist, double expected, bool with_log) {
  PowerFit fit;
  fit.expected = expected;
  const std::size_t m = dist.size(), n = t.rows();
  std::vector<double> lx(m), ly(m);
  for (std::size_t j = 0; j < m; ++j) {
    const Estimate e = column_mean(t, j);
    fit.points.push_back({dist[j], e.value, e.std_err});
    lx[j] = std::log(dist[j]);
    ly[j] = std::log(e.value);
  }
  fit.slope = ols_slope(lx, ly, &fit.intercept);
  const bool log_ok = with_log && m >= 4 &&
                      std::all_of(dist.begin(), dist.end(), [](double r) { return std::abs(std::log(r)) > 1e-3; });
  if (log_ok) fit.log_correction = log_term(lx, ly);

  const Groups gr = make_groups(n);
  std::vector<double> js(gr.count), jl(gr.count);
  std::vector<double> tot(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) tot[j] = ordered_sum(t.row(0) + j, n, t.cols());
  for (std::size_t g = 0; g < gr.count; ++g) {
    const std::size_t b = gr.begin(g), e = gr.end(g);
    std::vector<double> y(m);
    for (std::size_t j = 0; j < m; ++j) {
      double part = 0.0;
      for (std::size_t i = b; i < e; ++i) part += t(i, j);
      y[j] = std::log((tot[j] - part) / double(n - (e - b)));
    }
    js[g] = ols_slope(lx, y);
    if (log_ok) jl[g] = log_term(lx, y);
  }
  auto jk = [&](const std::vector<double>& v) {
    double mean = 0.0, ss = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt((v.size() - 1.0) / v.size() * ss);
  };
  fit.slope_std_err = jk(js);
  if (log_ok) fit.log_correction_std_err = jk(jl);
  return fit;
}

ComplexEstimate complex_mean(const SampleTable& t, const std::function<cplx(const double*)>& f) {
  ComplexEstimate c;
  const Estimate re = mean_of(t, [&](const double* r) { return f(r).real(); });
  const Estimate im = mean_of(t, [&](const double* r) { return f(r).imag(); });
  c.value = {re.value, im.value};
  c.std_err_re = re.std_err;
  c.std_err_im = im.std_err;
  return c;
}

// Per-sample G and the analytic derivative d/dz_i for every i. Row layout per configuration i:
// (G, Re pv_i, Im pv_i).
struct DerivativeSamples {
  SampleTable table;
  double s = 0.0;
};

DerivativeSamples derivative_samples(const InsertionSet& ins, const LiouvilleParams& p, const McConfig& cfg,
                                     const std::vector<std::size_t>& which) {
  const Resolution res = cfg.resolutions.back();
  const double lp = log_sphere_prefactor(ins, p), s = ins.s_exponent(p);
  std::vector<KernelWeights> w;
  for (std::size_t i : which) {
    QuadratureSpec q = cfg.quadrature;
    q.pv_index = int(i);
    w.push_back(weights_for(ins, p, res, q));
  }
  DerivativeSamples d;
  d.s = s;
  d.table = run_configs(cfg, res, p.gamma, which.size(), 3,
                        [&](ChaosEvaluator& ev, const ChaosMeasure&, std::size_t k, double* out) {
                          const ChaosIntegral r = ev.integrate(w[k]);
                          out[0] = corr_value(lp, s, r.total);
                          out[1] = r.pv.real() / r.total;
                          out[2] = r.pv.imag() / r.total;
                        });
  return d;
}

// G (pair term + (gamma alpha_i/2) s J_i/I); the planar factors of J and I cancel.
cplx analytic_derivative(const InsertionSet& ins, const LiouvilleParams& p, double s, std::size_t i, const double* r) {
  cplx pair{};
  for (std::size_t j = 0; j < ins.size(); ++j)
    if (j != i) pair += -0.5 * ins[i].weight * ins[j].weight / (ins[i].point.z - ins[j].point.z);
  return r[0] * (pair + 0.5 * p.gamma * ins[i].weight * s * cplx(r[1], r[2]));
}

}  // namespace

std::shared_ptr<const SphereGrid> shared_grid(int resolution) {
  static std::mutex m;
  static std::map<int, std::shared_ptr<const SphereGrid>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& g = cache[resolution];
  if (!g) g = std::make_shared<SphereGrid>(resolution);
  return g;
}

double ordered_sum(const double* v, std::size_t n, std::size_t stride) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i * stride];
    return s;
  }
  const std::size_t h = n / 2;
  return ordered_sum(v, h, stride) + ordered_sum(v + h * stride, n - h, stride);
}

Estimate mean_of(const SampleTable& t, const std::function<double(const double*)>& f) {
  const std::size_t n = t.rows();
  if (n < 2) throw std::invalid_argument("a standard error needs at least two samples");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = f(t.row(i));
  const double mean = ordered_sum(v.data(), n) / n;
  for (auto& x : v) x = (x - mean) * (x - mean);
  return {mean, std::sqrt(ordered_sum(v.data(), n) / (n - 1.0) / n)};
}

Estimate column_mean(const SampleTable& t, std::size_t col) {
  return mean_of(t, [col](const double* r) { return r[col]; });
}

Estimate ratio_of(const SampleTable& t, const std::function<double(const double*)>& num,
                  const std::function<double(const double*)>& den) {
  const Estimate a = mean_of(t, num), b = mean_of(t, den);
  const double r = a.value / b.value;
  const Estimate d = mean_of(t, [&](const double* row) { return num(row) - r * den(row); });
  return {r, d.std_err / std::abs(b.value)};
}

SampleTable parallel_table(std::size_t rows, std::size_t cols, unsigned workers,
                           const std::function<void(std::size_t, double*)>& fn) {
  SampleTable t(rows, cols);
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_m;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= rows) return;
      try {
        fn(i, t.row(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_m);
        if (!err) err = std::current_exception();
        next = rows;
        return;
      }
    }
  };
  const unsigned nw = std::max(1u, std::min<unsigned>(workers, unsigned(std::max<std::size_t>(rows, 1))));
  if (nw == 1) {
    work();
  } else {
    std::vector<std::thread> th;
    for (unsigned k = 0; k < nw; ++k) th.emplace_back(work);
    for (auto& x : th) x.join();
  }
  if (err) std::rethrow_exception(err);
  return t;
}

SampleTable run_samples(const McConfig& cfg, const Resolution& res, double gamma, std::uint64_t seed,
                        std::size_t n_cols, const SampleFn& fn) {
  if (cfg.n_samples < 2) throw std::invalid_argument("n_samples must be at least 2");
  SphereSynthesizer syn(shared_grid(res.grid), res.lmax);
  return parallel_table(cfg.n_samples, n_cols, cfg.workers, [&](std::size_t i, double* row) {
    auto f = std::make_shared<const FieldSample>(syn.sample(seed, i));
    const ChaosMeasure m = build_chaos(f, gamma);
    ChaosEvaluator ev(m, cfg.quadrature.subgrid);
    fn(ev, m, row);
  });
}

SampleTable run_configs(const McConfig& cfg, const Resolution& res, double gamma, std::size_t n_configs,
                        std::size_t cols_per, const ConfigFn& fn) {
  if (cfg.common_random_numbers)
    return run_samples(cfg, res, gamma, cfg.base_seed, n_configs * cols_per,
                       [&](ChaosEvaluator& ev, const ChaosMeasure& m, double* row) {
                         for (std::size_t k = 0; k < n_configs; ++k) fn(ev, m, k, row + k * cols_per);
                       });
  SampleTable t(cfg.n_samples, n_configs * cols_per);
  for (std::size_t k = 0; k < n_configs; ++k) {
    const SampleTable part = run_samples(cfg, res, gamma, derive_seed(cfg.base_seed, k + 1), cols_per,
                                         [&](ChaosEvaluator& ev, const ChaosMeasure& m, double* row) {
                                           fn(ev, m, k, row);
                                         });
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t c = 0; c < cols_per; ++c) t(i, k * cols_per + c) = part(i, c);
  }
  return t;
}

void validate_insertions(const InsertionSet& ins, const LiouvilleParams& p) {
  if (ins.size() < 3) throw std::invalid_argument("a correlation needs at least three insertions");
  const SeibergReport r = seiberg_check(ins, p);
  if (!r.pass) throw std::domain_error("Seiberg bounds violated: " + r.failed);
}

double log_sphere_prefactor(const InsertionSet& ins, const LiouvilleParams& p) {
  const double s = ins.s_exponent(p);
  if (!(s > 0.0)) throw std::domain_error("correlation needs s > 0");
  double l = std::log(prefactor_b(ins.weight_sum(), p));
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const Insertion& a = ins[i];
    const double delta = conformal_weight(a.weight, p);
    l += delta * (a.point.infinite ? std::log(4.0) : std::log(ghat(a.point.z)));
    for (std::size_t j = 0; j < i; ++j)
      l -= a.weight * ins[j].weight * std::log(chordal_distance(a.point, ins[j].point));
  }
  return l - s * std::log(p.mu) - std::log(p.gamma) + log_gamma(s).log_abs;
}

CorrelatorEstimate estimate_correlator(const InsertionSet& ins, const LiouvilleParams& p, const McConfig& cfg) {
  validate_insertions(ins, p);
  if (cfg.resolutions.empty()) throw std::invalid_argument("no resolution configured");
  const double s = ins.s_exponent(p), lp = log_sphere_prefactor(ins, p);
  CorrelatorEstimate e;
  e.insertions = ins;
  e.n = cfg.n_samples;
  SampleTable prev;
  for (const Resolution& res : cfg.resolutions) {
    const KernelWeights w = weights_for(ins, p, res, cfg.quadrature);
    SampleTable t = run_samples(cfg, res, p.gamma, cfg.base_seed, 1,
                                [&](ChaosEvaluator& ev, const ChaosMeasure&, double* row) {
                                  row[0] = corr_value(lp, s, ev.integrate(w).total);
                                });
    const Estimate m = column_mean(t, 0);
    e.sweep.push_back({res, m.value, m.std_err});
    if (prev.rows() == t.rows()) {
      SampleTable d(t.rows(), 1);
      for (std::size_t i = 0; i < t.rows(); ++i) d(i, 0) = t(i, 0) - prev(i, 0);
      const Estimate sh = column_mean(d, 0);
      e.resolution_shift = sh.value;
      e.resolution_shift_std_err = sh.std_err;
    }
    prev = std::move(t);
  }
  e.mean = e.sweep.back().mean;
  e.std_err = e.sweep.back().std_err;
  e.resolution = e.sweep.back().resolution;
  e.extrapolated = e.mean;
  const std::size_t k = e.sweep.size();
  if (k >= 2) {
    const auto& b = e.sweep[k - 2];
    const auto& c = e.sweep[k - 1];
    const double rbc = double(c.resolution.lmax) / b.resolution.lmax;
    double order = 1.0;
    if (k >= 3) {
      const auto& a = e.sweep[k - 3];
      const double q = (a.mean - b.mean) / (b.mean - c.mean);
      if (q > 0.0 && std::isfinite(q))
        order = std::clamp(std::log(q) / std::log(double(b.resolution.lmax) / a.resolution.lmax), 0.25, 4.0);
    }
    if (rbc > 1.0) {
      e.extrapolation_order = order;
      e.extrapolated = c.mean - (b.mean - c.mean) / (std::pow(rbc, order) - 1.0);
    }
  }
  return e;
}

CorrelatorEstimate insertion_density(const SpherePoint& x, const InsertionSet& ins, const LiouvilleParams& p,
                                     const McConfig& cfg) {
  validate_insertions(ins, p);
  for (const auto& a : ins.items())
    if (chordal_distance(a.point, x) < 1e-12) throw std::invalid_argument("density point coincides with an insertion");
  return estimate_correlator(ins.with_extra({x, p.gamma}), p, cfg);
}

PowerFit decay_scan(const InsertionSet& ins, const std::vector<double>& radii, double phi, const LiouvilleParams& p,
                    const McConfig& cfg) {
  validate_insertions(ins, p);
  if (radii.size() < 3) throw std::invalid_argument("decay scan needs at least three radii");
  const Resolution res = cfg.resolutions.back();
  std::vector<KernelWeights> w;
  std::vector<double> lp;
  const double s = ins.s_exponent(p) + 1.0;
  for (double r : radii) {
    const SpherePoint x = SpherePoint::at(std::polar(r, phi));
    for (const auto& a : ins.items())
      if (chordal_distance(a.point, x) < 1e-12) throw std::invalid_argument("density point coincides with an insertion");
    const InsertionSet e = ins.with_extra({x, p.gamma});
    w.push_back(weights_for(e, p, res, cfg.quadrature));
    lp.push_back(log_sphere_prefactor(e, p));
  }
  const SampleTable t = run_configs(cfg, res, p.gamma, radii.size(), 1,
                                    [&](ChaosEvaluator& ev, const ChaosMeasure&, std::size_t k, double* out) {
                                      out[0] = corr_value(lp[k], s, ev.integrate(w[k]).total);
                                    });
  return fit_power(t, radii, -4.0 * conformal_weight(p.gamma, p), false);
}

namespace {

// Integral of (u^2 + v^2)^{-e/2} over [0,a] x [0,b].
double corner_integral(double a, double b, double e) {
  using boost::math::quadrature::gauss;
  auto part = [e](double side, double angle) {
    return gauss<double, 20>::integrate(
        [&](double t) { return std::pow(side / std::cos(t), 2.0 - e); }, 0.0, angle);
  };
  return (part(a, std::atan2(b, a)) + part(b, std::atan2(a, b))) / (2.0 - e);
}

}  // namespace

KpzResult kpz_check(const InsertionSet& ins, const LiouvilleParams& p, const McConfig& cfg, double disk_radius,
                    int block) {
  validate_insertions(ins, p);
  const Resolution res = cfg.resolutions.back();
  auto grid = shared_grid(res.grid);
  const SphereGrid& g = *grid;
  if (block < 2 || block % 2 || g.n_theta() % block || g.n_phi() % block)
    throw std::invalid_argument("mesh block must be even and divide the grid");
  const QuadratureSpec& q = cfg.quadrature;
  const double gam = p.gamma, e = gam * gam, s = ins.s_exponent(p);
  const KernelWeights w = weights_for(ins, p, res, q);
  const double lp = log_sphere_prefactor(ins, p);
  const std::size_t n_ins = ins.size();
  std::vector<Vec3> zu(n_ins);
  for (std::size_t k = 0; k < n_ins; ++k) zu[k] = q.frame.apply(unit_vector(ins[k].point));

  const int nbt = g.n_theta() / block, nbp = g.n_phi() / block, nb = nbt * nbp;
  struct Block {
    Vec3 center;
    double radius = 0.0, area = 0.0;
    bool mesh = false;
  };
  std::vector<Block> blocks(nb);
  std::vector<int> cell_block(g.size());
  for (int bi = 0; bi < nbt; ++bi)
    for (int bj = 0; bj < nbp; ++bj) {
      Block& b = blocks[bi * nbp + bj];
      b.center = unit_at((bi * block + block / 2) * g.dtheta(), (bj * block + block / 2) * g.dphi());
      for (int i = bi * block; i < (bi + 1) * block; ++i)
        for (int j = bj * block; j < (bj + 1) * block; ++j) {
          cell_block[g.index(i, j)] = bi * nbp + bj;
          b.area += g.ring_area(i);
          b.radius = std::max(b.radius, chord(b.center, unit_at(g.theta(i), g.phi(j))));
        }
      double dmin = 2.0;
      for (const auto& z : zu) dmin = std::min(dmin, chord(b.center, z));
      b.mesh = dmin > disk_radius;
    }

  // Mesh points with their prefactor and the source blocks resolved cell by cell.
  struct MeshPoint {
    int block;
    double weight;  // mu gamma area P_{N+1}(x)/ghat(x)
    std::vector<int> resolved;
    std::array<std::size_t, 4> touch;
    std::array<double, 4> touch_mean;
  };
  std::vector<MeshPoint> mesh;
  double palm_constant = 0.0;
  for (int b = 0; b < nb; ++b) {
    if (!blocks[b].mesh) continue;
    const Vec3& c = blocks[b].center;
    const SpherePoint x = point_from_unit(q.frame.inverse(c));
    if (x.infinite) continue;
    MeshPoint mp;
    mp.block = b;
    const double lx = log_sphere_prefactor(ins.with_extra({x, gam}), p) - std::log(ghat(x.z));
    mp.weight = p.mu * gam * blocks[b].area * std::exp(lx);
    if (mesh.empty()) {
      double ld = 0.0;
      for (std::size_t k = 0; k < n_ins; ++k) ld += gam * ins[k].weight * std::log(chord(c, zu[k]));
      palm_constant = p.mu * gam * std::exp(lx + ld + e * p.chi * (s + 0.5));
    }
    for (int o = 0; o < nb; ++o)
      if (chord(c, blocks[o].center) < 6.0 * blocks[o].radius || o == b) mp.resolved.push_back(o);
    const int bi = b / nbp, bj = b % nbp;
    const int r0 = bi * block + block / 2, c0 = bj * block + block / 2;
    int k = 0;
    for (int i : {r0 - 1, r0})
      for (int j : {c0 - 1, c0}) {
        mp.touch[k] = g.index(i, j);
        const double a = g.dtheta(), bw = std::sin(g.theta(i)) * g.dphi();
        mp.touch_mean[k] = corner_integral(a, bw, e) / (a * bw);
        ++k;
      }
    mesh.push_back(std::move(mp));
  }
  if (mesh.empty()) throw std::invalid_argument("no mesh point outside the insertion disks");

  KpzResult out;
  out.mesh_points = mesh.size();
  const double rhs_constant = gam * s * std::exp(lp);
  out.constant_residual = std::abs(palm_constant - rhs_constant) / rhs_constant;

  std::vector<Vec3> cell_u(g.size());
  for (int i = 0; i < g.n_theta(); ++i)
    for (int j = 0; j < g.n_phi(); ++j) cell_u[g.index(i, j)] = unit_at(g.theta(i), g.phi(j));
  const bool unit_e = std::abs(e - 1.0) < 1e-14;
  auto dpow = [&](double d2) { return unit_e ? 1.0 / std::sqrt(d2) : std::exp(-0.5 * e * std::log(d2)); };

  // columns: direct mesh part, disk part, rhs
  const SampleTable t = run_samples(cfg, res, gam, cfg.base_seed, 3,
                                    [&](ChaosEvaluator& ev, const ChaosMeasure& m, double* row) {
    const double total = ev.integrate(w).total;
    std::vector<double> wm(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) wm[c] = m.cell_mass[c] * w.mean_kernel[c];
    std::vector<double> bm(nb, 0.0);
    std::vector<Vec3> bc(nb, Vec3{0.0, 0.0, 0.0});
    for (std::size_t c = 0; c < g.size(); ++c) {
      const int b = cell_block[c];
      bm[b] += wm[c];
      for (int d = 0; d < 3; ++d) bc[b][d] += wm[c] * cell_u[c][d];
    }
    double outside = 0.0;
    for (int b = 0; b < nb; ++b) {
      if (bm[b] > 0.0)
        for (int d = 0; d < 3; ++d) bc[b][d] /= bm[b];
      if (blocks[b].mesh) outside += bm[b];
    }
    std::vector<double> inner;
    for (const auto& d : w.closures) inner.push_back(ev.inner_mass(d));
    std::vector<char> is_resolved(nb, 0);
    double direct = 0.0;
    for (const MeshPoint& mp : mesh) {
      const Vec3& x = blocks[mp.block].center;
      for (int o : mp.resolved) is_resolved[o] = 1;
      double ix = 0.0;
      for (int b = 0; b < nb; ++b) {
        if (is_resolved[b] || bm[b] == 0.0) continue;
        const double dx = x[0] - bc[b][0], dy = x[1] - bc[b][1], dz = x[2] - bc[b][2];
        ix += bm[b] * dpow(dx * dx + dy * dy + dz * dz);
      }
      for (int o : mp.resolved) {
        is_resolved[o] = 0;
        const int bi = o / nbp, bj = o % nbp;
        for (int i = bi * block; i < (bi + 1) * block; ++i)
          for (int j = bj * block; j < (bj + 1) * block; ++j) {
            const std::size_t c = g.index(i, j);
            const Vec3& u = cell_u[c];
            const double dx = x[0] - u[0], dy = x[1] - u[1], dz = x[2] - u[2];
            double kern = 0.0;
            bool touched = false;
            for (int k = 0; k < 4; ++k)
              if (mp.touch[k] == c) kern = mp.touch_mean[k], touched = true;
            if (!touched) kern = dpow(dx * dx + dy * dy + dz * dz);
            ix += wm[c] * kern;
          }
      }
      for (std::size_t k = 0; k < inner.size(); ++k) {
        const double d = chord(x, w.closures[k].center);
        ix += inner[k] * dpow(d * d);
      }
      direct += mp.weight * std::exp(-(s + 1.0) * std::log(ix));
    }
    const double tail = std::exp(-(s + 1.0) * std::log(total));
    row[0] = direct;
    row[1] = palm_constant * (total - outside) * tail;
    row[2] = rhs_constant * total * tail;
  });
  out.lhs_direct = column_mean(t, 0).value;
  out.lhs_palm = column_mean(t, 1).value;
  out.lhs = mean_of(t, [](const double* r) { return r[0] + r[1]; }).value;
  out.rhs = column_mean(t, 2).value;
  out.combined_sigma = mean_of(t, [](const double* r) { return r[0] + r[1] - r[2]; }).std_err;
  return out;
}

DerivativeEstimate derivative_estimate(std::size_t i, const InsertionSet& ins, const LiouvilleParams& p,
                                       const McConfig& cfg) {
  validate_insertions(ins, p);
  require_finite(ins, "derivative_estimate");
  if (i >= ins.size()) throw std::invalid_argument("insertion index out of range");
  const Resolution res = cfg.resolutions.back();
  double dmin = 1e300;
  for (std::size_t a = 0; a < ins.size(); ++a)
    for (std::size_t b = 0; b < a; ++b) dmin = std::min(dmin, std::abs(ins[a].point.z - ins[b].point.z));
  const double h = 1e-2 * dmin;
  const double s = ins.s_exponent(p);

  QuadratureSpec qpv = cfg.quadrature;
  qpv.pv_index = int(i);
  std::vector<KernelWeights> w;
  std::vector<double> lp;
  w.push_back(weights_for(ins, p, res, qpv));
  lp.push_back(log_sphere_prefactor(ins, p));
  for (cplx step : {cplx(h, 0.0), cplx(-h, 0.0), cplx(0.0, h), cplx(0.0, -h)}) {
    const InsertionSet moved = ins.with_point(i, SpherePoint::at(ins[i].point.z + step));
    w.push_back(weights_for(moved, p, res, cfg.quadrature));
    lp.push_back(log_sphere_prefactor(moved, p));
  }
  const SampleTable t = run_configs(cfg, res, p.gamma, w.size(), 3,
                                    [&](ChaosEvaluator& ev, const ChaosMeasure&, std::size_t k, double* out) {
                                      const ChaosIntegral r = ev.integrate(w[k]);
                                      out[0] = corr_value(lp[k], s, r.total);
                                      out[1] = k == 0 ? r.pv.real() / r.total : 0.0;
                                      out[2] = k == 0 ? r.pv.imag() / r.total : 0.0;
                                    });
  auto analytic = [&](const double* r) { return analytic_derivative(ins, p, s, i, r); };
  auto fd = [&](const double* r) {
    return 0.5 * cplx((r[3] - r[6]) / (2.0 * h), -(r[9] - r[12]) / (2.0 * h));
  };
  DerivativeEstimate d;
  d.step = h;
  d.analytic = complex_mean(t, analytic);
  d.finite_difference = complex_mean(t, fd);
  d.difference = complex_mean(t, [&](const double* r) { return analytic(r) - fd(r); });
  d.correlator = column_mean(t, 0);
  return d;
}

ComplexEstimate t_insertion(cplx z, const InsertionSet& ins, const LiouvilleParams& p, const McConfig& cfg) {
  validate_insertions(ins, p);
  require_finite(ins, "t_insertion");
  for (const auto& a : ins.items())
    if (a.point.z == z) throw std::invalid_argument("stress tensor point coincides with an insertion");
  std::vector<std::size_t> all(ins.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const DerivativeSamples d = derivative_samples(ins, p, cfg, all);
  return complex_mean(d.table, [&](const double* r) {
    cplx v{};
    for (std::size_t i = 0; i < ins.size(); ++i) {
      const cplx u = 1.0 / (z - ins[i].point.z);
      v += conformal_weight(ins[i].weight, p) * u * u * r[0] + u * analytic_derivative(ins, p, d.s, i, r + 3 * i);
    }
    return v;
  });
}

std::array<cplx, 3> ward_residuals(const InsertionSet& ins, const LiouvilleParams& p, double g,
                                   const std::vector<cplx>& dg) {
  if (dg.size() != ins.size()) throw std::invalid_argument("one derivative per insertion expected");
  std::array<cplx, 3> r{};
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const cplx z = ins[i].point.z;
    const double delta = conformal_weight(ins[i].weight, p);
    r[0] += dg[i];
    r[1] += delta * g + z * dg[i];
    r[2] += 2.0 * z * delta * g + z * z * dg[i];
  }
  return r;
}

WardResult ward_sum_rules(const InsertionSet& ins, const LiouvilleParams& p, const McConfig& cfg) {
  validate_insertions(ins, p);
  require_finite(ins, "ward_sum_rules");
  std::vector<std::size_t> all(ins.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const DerivativeSamples d = derivative_samples(ins, p, cfg, all);
  auto derivs = [&](const double* r) {
    std::vector<cplx> dg(ins.size());
    for (std::size_t i = 0; i < ins.size(); ++i) dg[i] = analytic_derivative(ins, p, d.s, i, r + 3 * i);
    return dg;
  };
  WardResult w;
  for (int k = 0; k < 3; ++k) {
    w.residuals[k] = complex_mean(d.table, [&](const double* r) { return ward_residuals(ins, p, r[0], derivs(r))[k]; });
    w.scale[k] = mean_of(d.table, [&](const double* r) {
                   const auto dg = derivs(r);
                   double s = 0.0;
                   for (std::size_t i = 0; i < ins.size(); ++i) {
                     const cplx z = ins[i].point.z;
                     const double delta = conformal_weight(ins[i].weight, p);
                     if (k == 0) s += std::abs(dg[i]);
                     if (k == 1) s += std::abs(delta * r[0]) + std::abs(z * dg[i]);
                     if (k == 2) s += std::abs(2.0 * z * delta * r[0]) + std::abs(z * z * dg[i]);
                   }
                   return s;
                 }).value;
  }
  w.correlator = column_mean(d.table, 0);
  return w;
}

ThreePointShape three_point_shape(const InsertionSet& ins, const LiouvilleParams& p, double constant) {
  if (ins.size() != 3) throw std::invalid_argument("three-point shape needs three insertions");
  require_finite(ins, "three_point_shape");
  double dl[3];
  for (int i = 0; i < 3; ++i) dl[i] = conformal_weight(ins[i].weight, p);
  const double dsum = dl[0] + dl[1] + dl[2];
  ThreePointShape sh;
  sh.gradient.assign(3, cplx{});
  double lv = std::log(constant);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < i; ++j) {
      const int k = 3 - i - j;
      const double e = 2.0 * (dl[k] - (dsum - dl[k]));  // 2(D_k - D_i - D_j)
      const cplx zij = ins[i].point.z - ins[j].point.z;
      lv += e * std::log(std::abs(zij));
      // d/dz_i |z_i - z_j|^e = (e/2)/(z_i - z_j) |...|^e
      sh.gradient[i] += 0.5 * e / zij;
      sh.gradient[j] -= 0.5 * e / zij;
    }
  sh.value = std::exp(lv);
  for (auto& gi : sh.gradient) gi *= sh.value;
  return sh;
}

MobiusMap MobiusMap::rotation(double angle) {
  return {std::polar(1.0, 0.5 * angle), 0.0, 0.0, std::polar(1.0, -0.5 * angle)};
}

MobiusMap MobiusMap::scaling(double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("scaling factor must be positive");
  return {std::sqrt(factor), 0.0, 0.0, 1.0 / std::sqrt(factor)};
}

MobiusMap MobiusMap::normalized() const {
  const cplx det = a * d - b * c;
  if (!(std::abs(det) > 1e-14)) throw std::invalid_argument("degenerate Moebius map: ad - bc = 0");
  const cplx r = std::sqrt(det);
  return {a / r, b / r, c / r, d / r};
}

MobiusResult mobius_check(const InsertionSet& ins, const MobiusMap& map, const LiouvilleParams& p,
                          const McConfig& cfg) {
  validate_insertions(ins, p);
  require_finite(ins, "mobius_check");
  const MobiusMap m = map.normalized();
  if (std::abs(m.a * m.d - m.b * m.c - 1.0) > 1e-12) throw std::invalid_argument("Moebius map normalization failed");
  std::vector<Insertion> moved;
  double log_jac = 0.0;
  for (const auto& x : ins.items()) {
    const cplx den = m.c * x.point.z + m.d;
    if (std::abs(den) < 1e-12) throw std::invalid_argument("Moebius map sends an insertion to infinity");
    moved.push_back({SpherePoint::at(m.apply(x.point.z)), x.weight});
    log_jac += -2.0 * conformal_weight(x.weight, p) * std::log(std::abs(m.derivative(x.point.z)));
  }
  const InsertionSet mapped(std::move(moved));
  const Resolution res = cfg.resolutions.back();
  const double s = ins.s_exponent(p);
  const KernelWeights w0 = weights_for(ins, p, res, cfg.quadrature);
  const KernelWeights w1 = weights_for(mapped, p, res, cfg.quadrature);
  const double lp0 = log_sphere_prefactor(ins, p), lp1 = log_sphere_prefactor(mapped, p);
  const SampleTable t = run_configs(cfg, res, p.gamma, 2, 1,
                                    [&](ChaosEvaluator& ev, const ChaosMeasure&, std::size_t k, double* out) {
                                      out[0] = k == 0 ? corr_value(lp0, s, ev.integrate(w0).total)
                                                      : corr_value(lp1, s, ev.integrate(w1).total);
                                    });
  MobiusResult r;
  r.jacobian = std::exp(log_jac);
  r.original = column_mean(t, 0);
  r.mapped = column_mean(t, 1);
  const double jac = r.jacobian;
  r.ratio = ratio_of(
      t, [](const double* row) { return row[1]; }, [jac](const double* row) { return jac * row[0]; });
  return r;
}

double fusion_exponent(double beta1, double beta2, const LiouvilleParams& p) {
  const double merged = std::min(beta1 + beta2, p.q_background);
  return 2.0 * (conformal_weight(merged, p) - conformal_weight(beta1, p) - conformal_weight(beta2, p));
}

PowerFit fusion_scan(double beta1, double beta2, const InsertionSet& spectators, const std::vector<double>& distances,
                     const LiouvilleParams& p, const McConfig& cfg) {
  if (distances.size() < 3) throw std::invalid_argument("fusion scan needs at least three distances");
  const auto [lo, hi] = std::minmax_element(distances.begin(), distances.end());
  if (!(*lo > 0.0) || std::log10(*hi / *lo) < 1.5)
    throw std::invalid_argument("fusion distances must be positive and span at least 1.5 decades");
  const Resolution res = cfg.resolutions.back();
  std::vector<KernelWeights> w;
  std::vector<double> lp, sv;
  for (double r : distances) {
    std::vector<Insertion> v = spectators.items();
    if (beta1 != 0.0) v.push_back({SpherePoint::at(-0.5 * r), beta1});
    if (beta2 != 0.0) v.push_back({SpherePoint::at(0.5 * r), beta2});
    const InsertionSet e(std::move(v));
    validate_insertions(e, p);
    w.push_back(weights_for(e, p, res, cfg.quadrature));
    lp.push_back(log_sphere_prefactor(e, p));
    sv.push_back(e.s_exponent(p));
  }
  const SampleTable t = run_configs(cfg, res, p.gamma, distances.size(), 1,
                                    [&](ChaosEvaluator& ev, const ChaosMeasure&, std::size_t k, double* out) {
                                      out[0] = corr_value(lp[k], sv[k], ev.integrate(w[k]).total);
                                    });
  return fit_power(t, distances, fusion_exponent(beta1, beta2, p), beta1 + beta2 > p.q_background);
}

}  // namespace liouville
