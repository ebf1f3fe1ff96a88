#include "liouville/chaos.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace liouville {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxDepth = 14;

struct Rule {
  std::vector<double> x, w;  // on [0,1]
};

template <int N>
Rule gauss_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& a = G::abscissa();
  const auto& w = G::weights();
  Rule r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) {
      r.x.push_back(0.5);
      r.w.push_back(0.5 * w[i]);
      continue;
    }
    r.x.push_back(0.5 * (1.0 - a[i]));
    r.w.push_back(0.5 * w[i]);
    r.x.push_back(0.5 * (1.0 + a[i]));
    r.w.push_back(0.5 * w[i]);
  }
  return r;
}

const Rule& rule2() {
  static const Rule r = gauss_rule<2>();
  return r;
}
const Rule& rule4() {
  static const Rule r = gauss_rule<4>();
  return r;
}
const Rule& rule12() {
  static const Rule r = gauss_rule<12>();
  return r;
}
const Rule& rule20() {
  static const Rule r = gauss_rule<20>();
  return r;
}

// Chordal distance between (t1, p1) and (t2, p2); accurate for tiny separations.
double haversine(double t1, double p1, double t2, double p2) {
  const double a = std::sin(0.5 * (t1 - t2));
  const double b = std::sin(0.5 * (p1 - p2));
  return 2.0 * std::sqrt(std::max(0.0, a * a + std::sin(t1) * std::sin(t2) * b * b));
}

std::array<double, 3> unit_from_angles(double t, double p) {
  return {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)};
}

double chordal_from_units(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double x = a[0] - b[0], y = a[1] - b[1], z = a[2] - b[2];
  return std::sqrt(x * x + y * y + z * z);
}

struct Val {
  double k = 0.0;
  cplx pv{};
  Val& operator+=(const Val& o) {
    k += o.k;
    pv += o.pv;
    return *this;
  }
  Val operator*(double s) const { return {k * s, pv * s}; }
};

struct Feature {
  std::size_t slot;
  double a;
  double theta, phi;
  std::array<double, 3> u;
  bool singular;  // integrable power singularity handled by the polar rule
  double cut_radius = 0.0;  // closure disk radius, 0 if none
  double core = 0.5;
};

class CellIntegrator {
 public:
  CellIntegrator(std::vector<Feature> f, const Frame& frame, int pv, double pv_radius, cplx pv_z)
      : feat_(std::move(f)), frame_(frame), pv_(pv), pv_radius_(pv_radius), pv_z_(pv_z) {}

  const std::vector<Feature>& features() const { return feat_; }

  // (t, p) = anchor feature position + (dt, dp) when anchor >= 0, so tiny offsets keep their precision.
  Val eval(double t, double p, int anchor = -1, double dt = 0.0, double dp = 0.0) const {
    double logk = 0.0, keep = 1.0, dpv = -1.0;
    for (std::size_t k = 0; k < feat_.size(); ++k) {
      const Feature& f = feat_[k];
      double d;
      if (int(k) == anchor) {
        const double a = std::sin(0.5 * dt), b = std::sin(0.5 * dp);
        d = 2.0 * std::sqrt(a * a + std::sin(t) * std::sin(f.theta) * b * b);
      } else {
        d = haversine(t, p, f.theta, f.phi);
      }
      if (f.cut_radius > 0.0) keep *= 1.0 - smooth_cutoff(d / f.cut_radius, f.core);
      if (f.a != 0.0) logk -= f.a * std::log(d);
      if (int(k) == pv_) dpv = d;
    }
    Val v;
    if (keep == 0.0) return v;
    v.k = keep * std::exp(logk);
    if (pv_ >= 0) {
      const double pk = 1.0 - smooth_cutoff(dpv / pv_radius_, 0.5);
      if (pk > 0.0) {
        const SpherePoint x = point_from_unit(frame_.inverse(unit_from_angles(t, p)));
        if (!x.infinite) v.pv = v.k * pk / (pv_z_ - x.z);
      }
    }
    return v;
  }

  Val gauss(double t0, double t1, double p0, double p1, const Rule& r) const {
    Val acc;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      const double t = t0 + (t1 - t0) * r.x[i];
      const double wt = r.w[i] * (t1 - t0) * std::sin(t);
      for (std::size_t j = 0; j < r.x.size(); ++j) {
        const double p = p0 + (p1 - p0) * r.x[j];
        acc += eval(t, p) * (wt * r.w[j] * (p1 - p0));
      }
    }
    return acc;
  }

  // Integral over the (theta, phi) rectangle of f dA, refined toward singular points and cutoffs.
  Val rect(double t0, double t1, double p0, double p1, int depth) const {
    const double tm = 0.5 * (t0 + t1), pm = 0.5 * (p0 + p1);
    const double smax = (t0 < 0.5 * kPi && t1 > 0.5 * kPi) ? 1.0 : std::max(std::sin(t0), std::sin(t1));
    const double diam = std::hypot(t1 - t0, smax * (p1 - p0));
    int inside = -1;
    bool split = false, all_cut = false, pv_cut = false;
    for (std::size_t k = 0; k < feat_.size(); ++k) {
      const Feature& f = feat_[k];
      const double pk = f.phi + 2.0 * kPi * std::round((pm - f.phi) / (2.0 * kPi));
      const double tq = std::clamp(f.theta, t0, t1), pq = std::clamp(pk, p0, p1);
      const double dist = haversine(tq, pq, f.theta, pk);
      const bool in = tq == f.theta && (pq == pk || std::sin(f.theta) < 1e-9);
      const bool cuts = f.cut_radius > 0.0;
      const bool pvk = int(k) == pv_;
      if (cuts || pvk) {
        const double R = cuts ? f.cut_radius : pv_radius_;
        const double c = cuts ? f.core : 0.5;
        double dmax = 0.0;
        for (double tc : {t0, t1})
          for (double pc : {p0, p1}) dmax = std::max(dmax, haversine(tc, pc, f.theta, pk));
        if (dmax < c * R) {
          if (cuts) all_cut = true;
          if (pvk) pv_cut = true;
        } else if (dist < R && diam > 0.25 * (1.0 - c) * R) {
          split = true;
        }
      }
      if (f.singular && !cuts) {
        if (in) {
          if (inside >= 0) split = true;
          inside = int(k);
        } else if (dist < 3.0 * diam) {
          split = true;
        }
      }
    }
    if (all_cut) return {};
    if (split && depth < kMaxDepth) {
      Val acc;
      acc += rect(t0, tm, p0, pm, depth + 1);
      acc += rect(tm, t1, p0, pm, depth + 1);
      acc += rect(t0, tm, pm, p1, depth + 1);
      acc += rect(tm, t1, pm, p1, depth + 1);
      return acc;
    }
    Val v = inside >= 0 ? polar(t0, t1, p0, p1, feat_[inside]) : gauss(t0, t1, p0, p1, rule4());
    if (pv_cut) v.pv = {};
    return v;
  }

 private:
  // Rectangle split into four triangles with apex at the singular point; sinh substitution
  // along each edge and u = t^q radially absorb the d^{-a} singularity.
  Val polar(double t0, double t1, double p0, double p1, const Feature& f) const {
    const double pk = f.phi + 2.0 * kPi * std::round((0.5 * (p0 + p1) - f.phi) / (2.0 * kPi));
    const double sp = std::sin(f.theta);
    const double q = 1.0 / (2.0 - f.a);
    if (sp < 1e-9) return pole(t0, t1, p0, p1, f, q);
    const std::array<std::array<double, 2>, 4> c = {{{t0 - f.theta, (p0 - pk) * sp},
                                                     {t1 - f.theta, (p0 - pk) * sp},
                                                     {t1 - f.theta, (p1 - pk) * sp},
                                                     {t0 - f.theta, (p1 - pk) * sp}}};
    const double scale = std::hypot(t1 - t0, (p1 - p0) * sp);
    const Rule& rw = rule20();
    const Rule& rt = rule12();
    Val acc;
    for (int e = 0; e < 4; ++e) {
      const auto& A = c[e];
      const auto& B = c[(e + 1) % 4];
      const double ex = B[0] - A[0], ey = B[1] - A[1];
      const double len = std::hypot(ex, ey);
      const double h = std::abs(A[0] * ey - A[1] * ex) / len;
      if (len == 0.0 || h < 1e-14 * scale) continue;
      const double vf = -(A[0] * ex + A[1] * ey) / (len * len);
      const double w0 = std::asinh(-vf * len / h), w1 = std::asinh((1.0 - vf) * len / h);
      for (std::size_t i = 0; i < rw.x.size(); ++i) {
        const double w = w0 + (w1 - w0) * rw.x[i];
        const double v = vf + h / len * std::sinh(w);
        const double jac_w = rw.w[i] * (w1 - w0) * h / len * std::cosh(w) * h * len;
        const double Ex = A[0] + v * ex, Ey = A[1] + v * ey;
        for (std::size_t j = 0; j < rt.x.size(); ++j) {
          const double t = rt.x[j];
          const double u = std::pow(t, q);
          const double th = f.theta + u * Ex;
          const double ph = pk + u * Ey / sp;
          const double wgt = jac_w * rt.w[j] * q * std::pow(t, 2.0 * q - 1.0) * std::sin(th) / sp;
          acc += eval(th, ph, int(&f - feat_.data()), u * Ex, u * Ey / sp) * wgt;
        }
      }
    }
    return acc;
  }

  // Singular point on a grid pole: the cell is a wedge, so substitute in theta only.
  Val pole(double t0, double t1, double p0, double p1, const Feature& f, double q) const {
    const bool north = f.theta < 0.5 * kPi;
    const double span = t1 - t0;
    const Rule& rt = rule20();
    const Rule& rp = rule12();
    Val acc;
    for (std::size_t i = 0; i < rt.x.size(); ++i) {
      const double t = rt.x[i];
      const double off = span * std::pow(t, q);
      const double th = north ? t0 + off : t1 - off;
      const double wt = rt.w[i] * span * q * std::pow(t, q - 1.0) * std::sin(north ? th : off + (kPi - t1));
      for (std::size_t j = 0; j < rp.x.size(); ++j) {
        const double ph = p0 + (p1 - p0) * rp.x[j];
        acc += eval(th, ph, int(&f - feat_.data()), north ? off : -off, 0.0) * (wt * rp.w[j] * (p1 - p0));
      }
    }
    return acc;
  }

  std::vector<Feature> feat_;
  Frame frame_;
  int pv_;
  double pv_radius_;
  cplx pv_z_;
};

}  // namespace

Frame Frame::identity() {
  Frame f;
  f.m = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  return f;
}

Frame Frame::generic() {
  // Rz(0.37) Rx(2.70526) Rz(0): grid poles at z = 4.51i and z = -0.222i
  const double a = 0.37, b = 2.70526, c = 0.0;
  const double ca = std::cos(a), sa = std::sin(a), cb = std::cos(b), sb = std::sin(b), cc = std::cos(c),
               sc = std::sin(c);
  Frame f;
  f.m = {{{ca * cc - sa * cb * sc, -ca * sc - sa * cb * cc, sa * sb},
          {sa * cc + ca * cb * sc, -sa * sc + ca * cb * cc, -ca * sb},
          {sb * sc, sb * cc, cb}}};
  return f;
}

std::array<double, 3> Frame::apply(const std::array<double, 3>& v) const {
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  return r;
}

std::array<double, 3> Frame::inverse(const std::array<double, 3>& v) const {
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) r[i] = m[0][i] * v[0] + m[1][i] * v[1] + m[2][i] * v[2];
  return r;
}

SpherePoint point_from_unit(const std::array<double, 3>& u) {
  const double den = 1.0 + u[2];
  if (den < 1e-300) return SpherePoint::at_infinity();
  return SpherePoint::at(cplx(u[0], u[1]) / den);
}

SphereAngles angles_from_unit(const std::array<double, 3>& u) {
  double phi = std::atan2(u[1], u[0]);
  if (phi < 0.0) phi += 2.0 * kPi;
  return {std::atan2(std::hypot(u[0], u[1]), u[2]), phi};
}

double ChaosMeasure::total_mass() const {
  double s = 0.0;
  for (double m : cell_mass) s += m;
  return s;
}

ChaosMeasure build_chaos(std::shared_ptr<const FieldSample> field, double gamma) {
  if (!(gamma > 0.0 && gamma < 2.0)) throw std::domain_error("build_chaos needs 0 < gamma < 2");
  ChaosMeasure m;
  m.grid = field->grid;
  m.gamma = gamma;
  m.regularization_scale = field->regularization_scale;
  const double chi = std::log(2.0) - 0.5;
  const double shift = 0.5 * gamma * gamma * (chi - field->variance);
  const SphereGrid& g = *m.grid;
  m.cell_mass.resize(g.size());
  for (int i = 0; i < g.n_theta(); ++i) {
    const double area = g.ring_area(i);
    for (int j = 0; j < g.n_phi(); ++j) {
      const std::size_t c = g.index(i, j);
      m.cell_mass[c] = area * std::exp(gamma * field->values[c] + shift);
    }
  }
  m.field = std::move(field);
  return m;
}

double kernel_eval(const SingularKernel& k, cplx x) {
  double logf = 0.0;
  for (const auto& ins : k.insertions.items()) {
    if (ins.point.infinite) continue;
    const double d = std::abs(x - ins.point.z);
    if (d == 0.0) {
      if (ins.weight > 0.0) throw std::domain_error("kernel_eval: x at an insertion with positive weight");
      return 0.0;
    }
    logf -= k.gamma * ins.weight * std::log(d);
  }
  logf -= 0.25 * k.gamma * k.insertions.weight_sum() * std::log(ghat(x));
  return std::exp(logf);
}

double chordal_kernel(const SingularKernel& k, const SpherePoint& x) {
  double logf = 0.0;
  for (const auto& ins : k.insertions.items()) {
    const double d = chordal_distance(x, ins.point);
    if (d == 0.0) {
      if (ins.weight > 0.0) throw std::domain_error("chordal_kernel: x at an insertion with positive weight");
      return 0.0;
    }
    logf -= k.gamma * ins.weight * std::log(d);
  }
  return std::exp(logf);
}

double planar_factor(const SingularKernel& k) {
  double l = 0.0;
  for (const auto& ins : k.insertions.items()) {
    const double a = k.gamma * ins.weight;
    l += ins.point.infinite ? 0.5 * a * std::log(2.0) : 0.25 * a * std::log(ghat(ins.point.z));
  }
  return std::exp(l);
}

double coalescence_radius(int lmax) { return std::exp(std::log(2.0) - 0.5 - truncated_variance(lmax)); }

double KernelWeights::expected_integral() const {
  const double chi = std::log(2.0) - 0.5;
  double s = 0.0;
  for (int i = 0; i < grid->n_theta(); ++i) {
    double r = 0.0;
    for (int j = 0; j < grid->n_phi(); ++j) r += mean_kernel[grid->index(i, j)];
    s += r * grid->ring_area(i);
  }
  for (const auto& d : closures) s += d.outer * std::pow(d.radius, 2.0 - d.a) * subgrid_mean(d.a, d.core);
  return std::exp(0.5 * gamma * gamma * chi) * s;
}

KernelWeights build_kernel_weights(std::shared_ptr<const SphereGrid> grid, int lmax, const SingularKernel& kernel,
                                   const QuadratureSpec& spec) {
  const SphereGrid& g = *grid;
  const auto& ins = kernel.insertions;
  const std::size_t n = ins.size();
  for (const auto& x : ins.items())
    if (!(kernel.gamma * x.weight < 2.0))
      throw std::domain_error("kernel not integrable: gamma*alpha must stay below 2");
  if (spec.pv_index >= int(n)) throw std::invalid_argument("principal-value index out of range");
  if (spec.pv_index >= 0 && ins[spec.pv_index].point.infinite)
    throw std::invalid_argument("principal value needs a finite insertion");

  std::vector<Feature> feat(n);
  for (std::size_t k = 0; k < n; ++k) {
    Feature& f = feat[k];
    f.slot = k;
    f.a = kernel.gamma * ins[k].weight;
    f.u = spec.frame.apply(unit_vector(ins[k].point));
    const SphereAngles an = angles_from_unit(f.u);
    f.theta = an.theta;
    f.phi = an.phi;
    f.singular = f.a != 0.0;
  }

  KernelWeights w;
  w.grid = grid;
  w.lmax = lmax;
  w.gamma = kernel.gamma;
  w.pv_index = spec.pv_index;
  w.planar = planar_factor(kernel);

  const double rc = coalescence_radius(lmax);
  for (std::size_t k = 0; k < n; ++k) {
    Feature& f = feat[k];
    if (!spec.closure || f.a < spec.closure_min_a) continue;
    double mind = 2.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != k) mind = std::min(mind, chordal_from_units(f.u, feat[j].u));
    f.cut_radius = std::min(spec.closure_scale * rc, 0.25 * mind);
    f.core = spec.closure_core;
    ClosureDisk d;
    d.slot = k;
    d.center = f.u;
    d.radius = f.cut_radius;
    d.a = f.a;
    d.core = f.core;
    double lo = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != k) lo -= feat[j].a * std::log(chordal_from_units(f.u, feat[j].u));
    d.outer = std::exp(lo);
    if (spec.pv_index >= 0 && int(k) != spec.pv_index && !ins[k].point.infinite)
      d.pv_factor = 1.0 / (ins[spec.pv_index].point.z - ins[k].point.z);
    w.closures.push_back(d);
  }

  const double h = g.dtheta();
  const cplx pv_z = spec.pv_index >= 0 ? ins[spec.pv_index].point.z : cplx{};
  CellIntegrator integ(feat, spec.frame, spec.pv_index, spec.pv_cells * h, pv_z);

  w.mean_kernel.assign(g.size(), 0.0);
  if (spec.pv_index >= 0) w.pv_kernel.assign(g.size(), cplx{});

  const int nt = g.n_theta(), np = g.n_phi();
  std::vector<double> col_phi(np), col_s2(np * n);
  for (int j = 0; j < np; ++j) col_phi[j] = g.phi(j);
  for (std::size_t k = 0; k < n; ++k)
    for (int j = 0; j < np; ++j) {
      const double b = std::sin(0.5 * (col_phi[j] - feat[k].phi));
      col_s2[k * np + j] = b * b;
    }
  std::vector<double> logd(n);
  for (int i = 0; i < nt; ++i) {
    const double t = g.theta(i), st = std::sin(t), area = g.ring_area(i);
    const double t0 = g.theta_edge(i), t1 = g.theta_edge(i + 1);
    std::vector<double> ring_a(n), ring_s(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = std::sin(0.5 * (t - feat[k].theta));
      ring_a[k] = a * a;
      ring_s[k] = st * std::sin(feat[k].theta);
    }
    for (int j = 0; j < np; ++j) {
      double dmin = 1e300, logk = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double d2 = 4.0 * (ring_a[k] + ring_s[k] * col_s2[k * np + j]);
        dmin = std::min(dmin, d2);
        logk -= 0.5 * feat[k].a * std::log(d2);
      }
      dmin = std::sqrt(dmin) / h;
      const std::size_t c = g.index(i, j);
      const double p0 = col_phi[j] - 0.5 * g.dphi(), p1 = col_phi[j] + 0.5 * g.dphi();
      Val v;
      if (dmin < spec.near_cells + 1.5) {
        v = integ.rect(t0, t1, p0, p1, 0) * (1.0 / area);
      } else if (dmin < spec.mid_cells) {
        v = integ.gauss(t0, t1, p0, p1, rule2()) * (1.0 / area);
      } else {
        v.k = std::exp(logk);
        if (spec.pv_index >= 0) {
          const SpherePoint x = point_from_unit(spec.frame.inverse(unit_from_angles(t, col_phi[j])));
          if (!x.infinite) v.pv = v.k / (pv_z - x.z);
        }
      }
      w.mean_kernel[c] = v.k;
      if (spec.pv_index >= 0) w.pv_kernel[c] = v.pv;
    }
  }
  return w;
}

ChaosEvaluator::ChaosEvaluator(const ChaosMeasure& measure, const SubgridSpec& subgrid)
    : m_(measure), subgrid_(subgrid) {}

double ChaosEvaluator::inner_mass(const ClosureDisk& d) {
  const FieldSample& f = *m_.field;
  double xr = 0.0;
  bool found = false;
  for (const auto& e : circles_)
    if (e.center == d.center && e.radius == d.radius) {
      xr = e.value;
      found = true;
      break;
    }
  if (!found) {
    xr = f.circle_average(point_from_unit(d.center), d.radius);
    circles_.push_back({d.center, d.radius, xr});
  }
  double wm = 0.0;
  found = false;
  for (const auto& e : masses_)
    if (e.slot == d.slot && e.a == d.a && e.core == d.core) {
      wm = e.value;
      found = true;
      break;
    }
  if (!found) {
    wm = subgrid_mass(m_.gamma, d.a, subgrid_, f.seed, f.sample, std::uint32_t(1 + d.slot), d.core);
    masses_.push_back({d.slot, d.a, d.core, wm});
  }
  const double g = m_.gamma, chi = std::log(2.0) - 0.5;
  const double vr = circle_average_variance(f.lmax, d.radius);
  return std::exp(0.5 * g * g * chi + g * xr - 0.5 * g * g * vr) * d.outer * std::pow(d.radius, 2.0 - d.a) * wm;
}

ChaosIntegral ChaosEvaluator::integrate(const KernelWeights& w) {
  if (w.grid != m_.grid && (w.grid->resolution() != m_.grid->resolution()))
    throw std::invalid_argument("kernel weights built for a different grid");
  if (w.lmax != m_.field->lmax) throw std::invalid_argument("kernel weights built for a different truncation");
  ChaosIntegral r;
  const std::size_t n = m_.cell_mass.size();
  const double* cm = m_.cell_mass.data();
  const double* mk = w.mean_kernel.data();
  double s = 0.0;
  for (std::size_t c = 0; c < n; ++c) s += cm[c] * mk[c];
  if (!w.pv_kernel.empty()) {
    cplx pv{};
    for (std::size_t c = 0; c < n; ++c) pv += cm[c] * w.pv_kernel[c];
    r.pv = pv;
  }
  for (const auto& d : w.closures) {
    const double m = inner_mass(d);
    r.inner += m;
    r.pv += m * d.pv_factor;
  }
  r.total = s + r.inner;
  return r;
}

double chaos_integral(const ChaosMeasure& measure, const SingularKernel& kernel, const QuadratureSpec& spec) {
  for (const auto& x : kernel.insertions.items())
    if (!(x.weight < 2.0 / kernel.gamma + kernel.gamma / 2.0))
      throw std::domain_error("chaos_integral: insertion weight violates alpha < Q");
  const KernelWeights w = build_kernel_weights(measure.grid, measure.field->lmax, kernel, spec);
  ChaosEvaluator ev(measure, spec.subgrid);
  return w.planar * ev.integrate(w).total;
}

}  // namespace liouville
