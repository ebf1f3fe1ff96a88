#include "liouville/harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "liouville/chaos.hpp"
#include "liouville/correlator.hpp"
#include "liouville/dozz.hpp"
#include "liouville/field.hpp"
#include "liouville/rng.hpp"
#include "liouville/special.hpp"

namespace liouville {

using json = nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

const std::array<std::pair<ExperimentKind, const char*>, 11> kKindNames{{
    {ExperimentKind::sample_field, "sample-field"},
    {ExperimentKind::covariance_audit, "covariance-audit"},
    {ExperimentKind::chaos_mass, "chaos-mass"},
    {ExperimentKind::three_point, "three-point"},
    {ExperimentKind::kpz_check, "kpz-check"},
    {ExperimentKind::ward_rules, "ward-rules"},
    {ExperimentKind::mobius_check, "mobius-check"},
    {ExperimentKind::fusion_scan, "fusion-scan"},
    {ExperimentKind::fourpoint_compare, "fourpoint-compare"},
    {ExperimentKind::dozz_sweep, "dozz-sweep"},
    {ExperimentKind::specfn_audit, "specfn-audit"},
}};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double uniform(std::uint64_t seed, std::uint64_t k) { return double(derive_seed(seed, k) >> 11) * 0x1.0p-53; }

// ------------------------------------------------------------------ parameters

// Typed access to the flat parameter object. Every key read is recorded; finish() rejects the rest.
class Params {
 public:
  explicit Params(const json& j) : j_(j) {
    if (!j_.is_object()) throw UsageError("", "configuration must be a set of key = value pairs");
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  const json* get(const std::string& k) {
    used_.insert(k);
    auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& k) {
    const json* v = get(k);
    if (!v) throw UsageError(k, "required key is missing");
    return as_number(*v, k);
  }
  double number(const std::string& k, double def) {
    const json* v = get(k);
    return v ? as_number(*v, k) : def;
  }

  long long integer(const std::string& k, long long def, long long min) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_number_integer()) throw UsageError(k, "expected an integer");
    const long long x = v->get<long long>();
    if (x < min) throw UsageError(k, "must be at least " + std::to_string(min));
    return x;
  }

  std::uint64_t seed(const std::string& k, std::uint64_t def) {
    const json* v = get(k);
    if (!v) return def;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer() && v->get<long long>() >= 0) return std::uint64_t(v->get<long long>());
    throw UsageError(k, "expected a nonnegative integer");
  }

  bool flag(const std::string& k, bool def) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_boolean()) throw UsageError(k, "expected true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& k, const std::string& def) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_string()) throw UsageError(k, "expected a string");
    return v->get<std::string>();
  }

  // A number or a list of numbers.
  std::vector<double> numbers(const std::string& k, std::vector<double> def) {
    const json* v = get(k);
    if (!v) return def;
    std::vector<double> out;
    if (v->is_array()) {
      for (const auto& x : *v) out.push_back(as_number(x, k));
    } else {
      out.push_back(as_number(*v, k));
    }
    if (out.empty()) throw UsageError(k, "empty list");
    return out;
  }
  std::vector<double> numbers(const std::string& k) {
    if (!has(k)) {
      used_.insert(k);
      throw UsageError(k, "required key is missing");
    }
    return numbers(k, {});
  }

  // A real number or [re, im].
  static cplx complex(const json& v, const std::string& k) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2) return {as_number(v[0], k), as_number(v[1], k)};
    throw UsageError(k, "expected a number or [re, im]");
  }
  cplx complex_value(const std::string& k, cplx def) {
    const json* v = get(k);
    return v ? complex(*v, k) : def;
  }
  std::vector<cplx> complexes(const std::string& k, std::vector<cplx> def) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_array() || v->empty()) throw UsageError(k, "expected a nonempty list of points");
    std::vector<cplx> out;
    for (const auto& x : *v) out.push_back(complex(x, k));
    return out;
  }

  InsertionSet insertions(const std::string& k, const InsertionSet& def) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_array() || v->empty()) throw UsageError(k, "expected [[re, im, alpha], ...] or [\"inf\", alpha]");
    std::vector<Insertion> items;
    for (const auto& e : *v) {
      if (e.is_array() && e.size() == 2 && e[0].is_string()) {
        const std::string tag = e[0].get<std::string>();
        if (tag != "inf" && tag != "infinity") throw UsageError(k, "unknown point '" + tag + "'");
        items.push_back({SpherePoint::at_infinity(), as_number(e[1], k)});
      } else if (e.is_array() && e.size() == 3) {
        items.push_back({SpherePoint::at({as_number(e[0], k), as_number(e[1], k)}), as_number(e[2], k)});
      } else {
        throw UsageError(k, "each insertion is [re, im, alpha] or [\"inf\", alpha]");
      }
    }
    try {
      return InsertionSet(std::move(items));
    } catch (const std::invalid_argument& ex) {
      throw UsageError(k, ex.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw UsageError(it.key(), "unknown key for this experiment");
  }

 private:
  static double as_number(const json& v, const std::string& k) {
    if (!v.is_number()) throw UsageError(k, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw UsageError(k, "expected a finite number");
    return x;
  }

  const json& j_;
  std::set<std::string> used_;
};

struct Common {
  LiouvilleParams p;
  McConfig mc;
};

LiouvilleParams make_params(double gamma, double mu) {
  if (!(gamma > 0.0 && gamma < 2.0)) throw UsageError("gamma", "must lie in (0,2)");
  if (!(mu > 0.0)) throw UsageError("mu", "must be positive");
  return derive_params(gamma, mu);
}

McConfig read_mc(Params& in, std::size_t samples, const std::vector<int>& resolutions) {
  McConfig mc;
  mc.n_samples = std::size_t(in.integer("samples", (long long)samples, 2));
  if (in.has("resolution") && in.has("resolutions")) throw UsageError("resolution", "give resolution or resolutions");
  std::vector<int> res = resolutions;
  if (in.has("resolution")) {
    res = {int(in.integer("resolution", 0, 8))};
  } else if (in.has("resolutions")) {
    res.clear();
    for (double r : in.numbers("resolutions")) {
      if (r < 8 || r != std::floor(r)) throw UsageError("resolutions", "entries must be integers >= 8");
      res.push_back(int(r));
    }
  }
  mc.resolutions.clear();
  for (int r : res) mc.resolutions.push_back({r, r});
  mc.base_seed = in.seed("seed", 1);
  mc.common_random_numbers = in.flag("crn", true);
  mc.workers = unsigned(in.integer("workers", 1, 1));
  return mc;
}

Common read_common(Params& in, std::size_t samples, const std::vector<int>& resolutions) {
  Common c;
  const double gamma = in.number("gamma");
  c.p = make_params(gamma, in.number("mu", 1.0));
  c.mc = read_mc(in, samples, resolutions);
  return c;
}

// ------------------------------------------------------------------ record helpers

Quantity& add(RunRecord& r, std::string name, double value, double std_err, double reference, double tolerance,
              std::string check, bool gated) {
  Quantity q;
  q.name = std::move(name);
  q.check = std::move(check);
  q.value = value;
  q.std_err = std_err;
  q.reference = reference;
  q.tolerance = tolerance;
  q.gated = gated;
  q.pass = std::abs(value - reference) <= tolerance;
  r.quantities.push_back(q);
  return r.quantities.back();
}

Quantity& gate(RunRecord& r, std::string name, double value, double std_err, double reference, double tolerance,
               std::string check = "") {
  return add(r, std::move(name), value, std_err, reference, tolerance, std::move(check), true);
}

Quantity& info(RunRecord& r, std::string name, double value, double std_err = 0.0, double reference = 0.0) {
  Quantity& q = add(r, std::move(name), value, std_err, reference, 0.0, "", false);
  q.tolerance = std::abs(value - reference);
  q.pass = true;
  return q;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string point_label(cplx z) {
  std::string s = fmt(z.real());
  if (z.imag() != 0.0) s += (z.imag() > 0 ? "+" : "-") + fmt(std::abs(z.imag())) + "i";
  return s;
}

void note_regularization(RunRecord& r, const McConfig& mc) {
  json res = json::array();
  for (const auto& x : mc.resolutions) {
    const double eps = coalescence_radius(x.lmax);
    res.push_back({{"grid", x.grid},
                   {"lmax", x.lmax},
                   {"regularization_scale", 1.0 / x.lmax},
                   {"calibration_c", x.lmax * eps}});
  }
  r.metadata["resolutions"] = res;
  r.metadata["samples"] = mc.n_samples;
  r.metadata["common_random_numbers"] = mc.common_random_numbers;
}

InsertionSet triple(cplx a, cplx b, cplx c, double alpha) {
  return InsertionSet({{SpherePoint::at(a), alpha}, {SpherePoint::at(b), alpha}, {SpherePoint::at(c), alpha}});
}

InsertionSet standard_triple(double alpha) {
  return InsertionSet({{SpherePoint::at(0.0), alpha}, {SpherePoint::at(1.0), alpha}, {SpherePoint::at_infinity(), alpha}});
}

// Weighted cell sums of X and X^2 over the sphere, divided by 4 pi.
std::array<double, 2> field_moments(const FieldSample& f) {
  const SphereGrid& g = *f.grid;
  double s1 = 0.0, s2 = 0.0;
  for (int r = 0; r < g.n_theta(); ++r) {
    const double a = g.ring_area(r);
    double r1 = 0.0, r2 = 0.0;
    for (int c = 0; c < g.n_phi(); ++c) {
      const double v = f.values[g.index(r, c)];
      r1 += v;
      r2 += v * v;
    }
    s1 += a * r1;
    s2 += a * r2;
  }
  return {s1 / (4.0 * kPi), s2 / (4.0 * kPi)};
}

// ------------------------------------------------------------------ experiments

void run_sample_field(Params& in, RunRecord& r) {
  const Common c = read_common(in, 4, {128});
  const std::string export_path = in.text("export", "");
  in.finish();

  const Resolution res = c.mc.resolutions.back();
  auto grid = shared_grid(res.grid);
  SphereSynthesizer syn(grid, res.lmax);
  const std::uint64_t seed = c.mc.base_seed;

  const FieldSample a = syn.sample(seed, 0);
  const FieldSample b = sample_sphere_gff(grid, res.lmax, seed, 0);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
  gate(r, "determinism_max_diff", diff, 0.0, 0.0, 0.0);

  const SampleTable t = parallel_table(c.mc.n_samples, 2, c.mc.workers, [&](std::size_t i, double* row) {
    const FieldSample f = syn.sample(seed, i);
    const auto m = field_moments(f);
    row[0] = m[0];
    row[1] = m[1];
  });
  const Estimate mean = column_mean(t, 0), second = column_mean(t, 1);
  gate(r, "weighted_mean", mean.value, mean.std_err, 0.0, std::max(3.0 * mean.std_err, 1e-12));
  info(r, "weighted_second_moment", second.value, second.std_err, truncated_variance(res.lmax));

  if (!export_path.empty()) {
    export_field(a, export_path);
    r.metadata["export"] = export_path;
  }
  r.metadata["cells"] = grid->size();
  note_regularization(r, c.mc);
}

void run_covariance_audit(Params& in, RunRecord& r) {
  const Common c = read_common(in, 2000, {128});
  const int pairs = int(in.integer("pairs", 20, 2));
  const double dmin = in.number("min_distance", 0.1), dmax = in.number("max_distance", 1.9);
  if (!(dmin > 0.0 && dmax > dmin && dmax < 2.0)) throw UsageError("max_distance", "need 0 < min < max < 2");
  std::vector<int> lmaxes;
  for (double l : in.numbers("variance_lmax", {64, 128, 256})) {
    if (l < 2 || l != std::floor(l)) throw UsageError("variance_lmax", "entries must be integers >= 2");
    lmaxes.push_back(int(l));
  }
  std::sort(lmaxes.begin(), lmaxes.end());
  if (lmaxes.size() < 2) throw UsageError("variance_lmax", "need at least two values");
  const int vpoints = int(in.integer("variance_points", 32, 1));
  in.finish();

  const Resolution res = c.mc.resolutions.back();
  auto grid = shared_grid(res.grid);
  const std::uint64_t seed = c.mc.base_seed;
  const CovarianceKernel kernel{KernelKind::sphere_G, c.p};

  // Point pairs at grid cell centres with chordal separations spread over [dmin, dmax].
  std::vector<std::array<std::size_t, 2>> cells;
  std::vector<std::array<SpherePoint, 2>> pts;
  std::uint64_t k = 1000;
  for (int j = 0; j < pairs; ++j) {
    const double d = dmin + (dmax - dmin) * j / (pairs - 1);
    const double ct = 2.0 * uniform(seed, k++) - 1.0, ph = 2.0 * kPi * uniform(seed, k++);
    const double st = std::sqrt(1.0 - ct * ct);
    const std::array<double, 3> x{st * std::cos(ph), st * std::sin(ph), ct};
    // unit tangent at x in a random direction
    const std::array<double, 3> e1{ct * std::cos(ph), ct * std::sin(ph), -st}, e2{-std::sin(ph), std::cos(ph), 0.0};
    const double w = 2.0 * kPi * uniform(seed, k++);
    const double ang = 2.0 * std::asin(0.5 * d);
    std::array<double, 3> y{};
    for (int i = 0; i < 3; ++i)
      y[i] = std::cos(ang) * x[i] + std::sin(ang) * (std::cos(w) * e1[i] + std::sin(w) * e2[i]);
    std::array<std::size_t, 2> cc{};
    std::array<SpherePoint, 2> pp{};
    for (int s = 0; s < 2; ++s) {
      const SphereAngles a = angles_from_unit(s == 0 ? x : y);
      cc[s] = grid->locate(a.theta, a.phi);
      pp[s] = grid->center(cc[s]);
    }
    cells.push_back(cc);
    pts.push_back(pp);
  }

  SphereSynthesizer syn(grid, res.lmax);
  const SampleTable t = parallel_table(c.mc.n_samples, pairs, c.mc.workers, [&](std::size_t i, double* row) {
    const FieldSample f = syn.sample(seed, i);
    for (int j = 0; j < pairs; ++j) row[j] = f.values[cells[j][0]] * f.values[cells[j][1]];
  });

  r.series_columns = {"distance", "empirical", "std_err", "exact"};
  for (int j = 0; j < pairs; ++j) {
    const Estimate e = column_mean(t, j);
    const double exact = covariance(kernel, pts[j][0].z, pts[j][1].z);
    const double d = chordal_distance(pts[j][0], pts[j][1]);
    gate(r, "covariance_d=" + fmt(d), e.value, e.std_err, exact, 5.0 * e.std_err, "2");
    r.series_rows.push_back({d, e.value, e.std_err, exact});
  }

  // Variance growth: the coefficients are nested in lmax, so truncations of one field share their low modes.
  std::vector<SpherePoint> vp;
  for (int j = 0; j < vpoints; ++j) {
    const double ct = 2.0 * uniform(seed, k++) - 1.0, ph = 2.0 * kPi * uniform(seed, k++);
    vp.push_back(from_angles(std::acos(ct), ph));
  }
  const int lmax_top = lmaxes.back();
  const std::uint64_t vseed = derive_seed(seed, 1);
  const std::size_t nl = lmaxes.size();
  // Columns: X_L^2 per lmax, then (X_L - X_L0)^2. The increments have the same slope in ln lmax
  // without the noise of the common low modes.
  const SampleTable v = parallel_table(c.mc.n_samples, 2 * nl, c.mc.workers, [&](std::size_t i, double* row) {
    FieldSample f = sample_coefficients(lmax_top, vseed, i);
    std::fill(row, row + 2 * nl, 0.0);
    for (const auto& x : vp) {
      f.lmax = lmaxes[0];
      const double base = f.value_at(x);
      for (std::size_t q = 0; q < nl; ++q) {
        f.lmax = lmaxes[q];
        const double val = q == 0 ? base : f.value_at(x);
        row[q] += val * val / vpoints;
        row[nl + q] += (val - base) * (val - base) / vpoints;
      }
    }
  });

  std::vector<double> lx(nl);
  for (std::size_t q = 0; q < nl; ++q) lx[q] = std::log(double(lmaxes[q]));
  auto slope_of = [&](const std::vector<double>& y) {
    double mx = 0.0, my = 0.0;
    for (std::size_t q = 0; q < nl; ++q) mx += lx[q] / nl, my += y[q] / nl;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t q = 0; q < nl; ++q) sxy += (lx[q] - mx) * (y[q] - my), sxx += (lx[q] - mx) * (lx[q] - mx);
    return sxy / sxx;
  };
  std::vector<double> ym(nl), yt(nl);
  for (std::size_t q = 0; q < nl; ++q) {
    const Estimate e = column_mean(v, q);
    ym[q] = column_mean(v, nl + q).value;
    yt[q] = truncated_variance(lmaxes[q]);
    info(r, "variance_lmax=" + std::to_string(lmaxes[q]), e.value, e.std_err, yt[q]);
  }
  const std::size_t n = v.rows(), groups = std::min<std::size_t>(20, n);
  std::vector<double> js;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t b = g * n / groups, e = (g + 1) * n / groups;
    std::vector<double> y(nl, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (i < b || i >= e)
        for (std::size_t q = 0; q < nl; ++q) y[q] += v(i, nl + q);
    for (auto& x : y) x /= double(n - (e - b));
    js.push_back(slope_of(y));
  }
  double jm = 0.0, jss = 0.0;
  for (double s : js) jm += s / js.size();
  for (double s : js) jss += (s - jm) * (s - jm);
  const double slope_se = std::sqrt((js.size() - 1.0) / js.size() * jss);
  gate(r, "variance_slope", slope_of(ym), slope_se, 1.0, 0.05, "2");
  info(r, "truncated_variance_slope", slope_of(yt), 0.0, 1.0);
  note_regularization(r, c.mc);
}

void run_chaos_mass(Params& in, RunRecord& r) {
  const std::vector<double> gammas = in.numbers("gamma");
  const double mu = in.number("mu", 1.0);
  for (double g : gammas) make_params(g, mu);
  const McConfig mc = read_mc(in, 2000, {128});
  in.finish();

  const Resolution res = mc.resolutions.back();
  auto grid = shared_grid(res.grid);
  SphereSynthesizer syn(grid, res.lmax);
  const LiouvilleParams p0 = derive_params(gammas[0], mu);
  const SampleTable t = parallel_table(mc.n_samples, gammas.size(), mc.workers, [&](std::size_t i, double* row) {
    auto f = std::make_shared<const FieldSample>(syn.sample(mc.base_seed, i));
    for (std::size_t q = 0; q < gammas.size(); ++q) row[q] = build_chaos(f, gammas[q]).total_mass();
  });
  for (std::size_t q = 0; q < gammas.size(); ++q) {
    const Estimate e = column_mean(t, q);
    const double expect = 4.0 * kPi * std::exp(0.5 * gammas[q] * gammas[q] * p0.chi);
    gate(r, "total_mass_gamma=" + fmt(gammas[q]), e.value, e.std_err, expect, 3.0 * e.std_err, "3");
  }
  note_regularization(r, mc);
}

// C_gamma times the position dependence of a three-point function; NaN if it has no such form.
double three_point_reference(const InsertionSet& ins, const LiouvilleParams& p, double* constant) {
  *constant = std::nan("");
  if (ins.size() != 3) return std::nan("");
  const ThreePointArgs args{ins[0].weight, ins[1].weight, ins[2].weight};
  try {
    *constant = dozz_c(args, p);
  } catch (const std::domain_error&) {
    return std::nan("");
  }
  for (std::size_t k = 0; k < 3; ++k) {
    if (!ins[k].point.infinite) continue;
    const std::size_t i = (k + 1) % 3, j = (k + 2) % 3;
    const double e = 2.0 * (conformal_weight(ins[k].weight, p) - conformal_weight(ins[i].weight, p) -
                            conformal_weight(ins[j].weight, p));
    return *constant * std::pow(std::abs(ins[i].point.z - ins[j].point.z), e);
  }
  return three_point_shape(ins, p, *constant).value;
}

// Seiberg bounds and point count, reported against the configuration key.
void require_correlation(const InsertionSet& ins, const LiouvilleParams& p, const std::string& key) {
  try {
    validate_insertions(ins, p);
  } catch (const std::exception& e) {
    throw UsageError(key, e.what());
  }
  for (const auto& a : ins.items())
    if (!(p.gamma * a.weight < 2.0))
      throw UsageError(key, "gamma*alpha must stay below 2 for the lattice quadrature");
}

void run_three_point(Params& in, RunRecord& r) {
  const Common c = read_common(in, 500, {128, 256});
  const InsertionSet ins = in.insertions("insertions", standard_triple(1.8));
  require_correlation(ins, c.p, "insertions");
  in.finish();

  const CorrelatorEstimate e = estimate_correlator(ins, c.p, c.mc);
  for (const auto& s : e.sweep)
    info(r, "correlator_L=" + std::to_string(s.resolution.lmax), s.mean, s.std_err);
  double constant = 0.0;
  const double ref = three_point_reference(ins, c.p, &constant);
  if (std::isfinite(ref)) {
    const double scale = kDozzConvention * ref / constant;
    gate(r, "dozz_normalized", e.mean / scale, e.std_err / scale, constant, 3.0 * e.std_err / scale, "10");
    info(r, "raw_ratio", e.mean / ref, e.std_err / ref, kDozzConvention);
  } else {
    info(r, "correlator", e.mean, e.std_err);
  }
  if (e.sweep.size() >= 2) {
    gate(r, "resolution_shift", e.resolution_shift, e.resolution_shift_std_err, 0.0, e.std_err, "10");
    info(r, "extrapolated", e.extrapolated, 0.0, e.mean);
    info(r, "extrapolation_order", e.extrapolation_order);
  }
  info(r, "s_exponent", ins.s_exponent(c.p));
  note_regularization(r, c.mc);
}

std::vector<double> geometric(double a, double b, int n) {
  std::vector<double> v;
  for (int k = 0; k < n; ++k) v.push_back(a * std::pow(b / a, double(k) / (n - 1)));
  return v;
}

void run_kpz_check(Params& in, RunRecord& r) {
  const Common c = read_common(in, 500, {256});
  const InsertionSet ins = in.insertions("insertions", standard_triple(1.8));
  require_correlation(ins, c.p, "insertions");
  const double disk = in.number("disk_radius", 0.5);
  const int block = int(in.integer("block", 8, 1));
  if (!(disk > 0.0 && disk < 1.0)) throw UsageError("disk_radius", "must lie in (0,1)");
  const bool decay = in.flag("decay", true);
  const InsertionSet dins = in.insertions("decay_insertions", triple(0.0, 1.0, {0.3, 0.9}, 1.8));
  require_correlation(dins, c.p, "decay_insertions");
  const std::vector<double> radii = in.numbers("decay_radii", geometric(5.0, 40.0, 6));
  const double phi = in.number("decay_phi", 0.7);
  McConfig dmc = c.mc;
  dmc.n_samples = std::size_t(in.integer("decay_samples", 200, 2));
  const int dres = int(in.integer("decay_resolution", 128, 8));
  dmc.resolutions = {{dres, dres}};
  if (radii.size() < 2) throw UsageError("decay_radii", "need at least two radii");
  in.finish();

  const KpzResult k = kpz_check(ins, c.p, c.mc, disk, block);
  gate(r, "kpz_lhs", k.lhs, k.combined_sigma, k.rhs, 3.0 * k.combined_sigma, "4");
  info(r, "kpz_rhs", k.rhs);
  info(r, "kpz_lhs_mesh", k.lhs_direct);
  info(r, "kpz_lhs_disks", k.lhs_palm);
  gate(r, "prefactor_consistency", k.constant_residual, 0.0, 0.0, 1e-10);
  r.metadata["mesh_points"] = k.mesh_points;

  if (decay) {
    const PowerFit f = decay_scan(dins, radii, phi, c.p, dmc);
    gate(r, "decay_slope", f.slope, f.slope_std_err, f.expected, 0.1 * std::abs(f.expected), "9");
    r.series_columns = {"radius", "estimate", "std_err"};
    for (const auto& pt : f.points) r.series_rows.push_back({pt.distance, pt.mean, pt.std_err});
  }
  note_regularization(r, c.mc);
}

InsertionSet six_points() {
  std::vector<Insertion> v;
  for (cplx z : {cplx(0.0), cplx(1.0), cplx(0.0, 1.0), cplx(-1.0, 0.5), cplx(0.5, -0.8), cplx(1.5, 1.0)})
    v.push_back({SpherePoint::at(z), 0.9});
  return InsertionSet(v);
}

void complex_gate(RunRecord& r, const std::string& name, const ComplexEstimate& e, const std::string& check) {
  gate(r, name + "_re", e.value.real(), e.std_err_re, 0.0, 3.0 * e.std_err_re, check);
  gate(r, name + "_im", e.value.imag(), e.std_err_im, 0.0, 3.0 * e.std_err_im, check);
}

void run_ward_rules(Params& in, RunRecord& r) {
  const Common c = read_common(in, 400, {128});
  const InsertionSet ins = in.insertions("insertions", six_points());
  require_correlation(ins, c.p, "insertions");
  const long long di = in.integer("derivative_index", 0, 0);
  const InsertionSet syn = in.insertions("synthetic_insertions", triple(0.0, 1.0, {0.3, 0.9}, 1.8));
  const double constant = in.number("synthetic_constant", 1.0);
  if (std::size_t(di) >= ins.size()) throw UsageError("derivative_index", "out of range");
  if (syn.size() != 3 || syn.has_infinite_point()) throw UsageError("synthetic_insertions", "need three finite points");
  in.finish();

  const ThreePointShape sh = three_point_shape(syn, c.p, constant);
  const auto sr = ward_residuals(syn, c.p, sh.value, sh.gradient);
  double scale = std::abs(sh.value);
  for (std::size_t i = 0; i < 3; ++i)
    scale = std::max(scale, std::abs(sh.gradient[i]) * std::max(1.0, std::norm(syn[i].point.z)));
  double worst = 0.0;
  for (const auto& x : sr) worst = std::max(worst, std::abs(x) / scale);
  gate(r, "ward_synthetic", worst, 0.0, 0.0, 1e-12, "6");

  const WardResult w = ward_sum_rules(ins, c.p, c.mc);
  for (int q = 0; q < 3; ++q) {
    complex_gate(r, "ward_r" + std::to_string(q + 1), w.residuals[q], "6");
    info(r, "ward_r" + std::to_string(q + 1) + "_scale", w.scale[q]);
  }
  info(r, "correlator", w.correlator.value, w.correlator.std_err);

  const DerivativeEstimate d = derivative_estimate(std::size_t(di), ins, c.p, c.mc);
  complex_gate(r, "derivative_difference", d.difference, "7");
  info(r, "derivative_analytic_re", d.analytic.value.real(), d.analytic.std_err_re);
  info(r, "derivative_analytic_im", d.analytic.value.imag(), d.analytic.std_err_im);
  info(r, "derivative_fd_re", d.finite_difference.value.real(), d.finite_difference.std_err_re);
  info(r, "derivative_fd_im", d.finite_difference.value.imag(), d.finite_difference.std_err_im);
  info(r, "fd_step", d.step);
  note_regularization(r, c.mc);
}

void run_mobius_check(Params& in, RunRecord& r) {
  const Common c = read_common(in, 400, {128});
  const InsertionSet ins = in.insertions("insertions", triple(0.0, 1.0, {0.3, 0.9}, 1.8));
  require_correlation(ins, c.p, "insertions");
  const cplx shift = in.complex_value("translation", {0.4, -0.3});
  const double angle = in.number("rotation", 1.1);
  const double factor = in.number("scaling", 2.0);
  if (!(factor > 0.0)) throw UsageError("scaling", "must be positive");
  in.finish();

  const std::array<std::pair<const char*, MobiusMap>, 3> maps{{{"translation", MobiusMap::translation(shift)},
                                                               {"rotation", MobiusMap::rotation(angle)},
                                                               {"scaling", MobiusMap::scaling(factor)}}};
  for (const auto& [name, m] : maps) {
    const MobiusResult res = mobius_check(ins, m, c.p, c.mc);
    gate(r, std::string("mobius_") + name, res.ratio.value, res.ratio.std_err, 1.0, 3.0 * res.ratio.std_err, "5");
    info(r, std::string("jacobian_") + name, res.jacobian);
  }
  note_regularization(r, c.mc);
}

void run_fusion_scan(Params& in, RunRecord& r) {
  const Common c = read_common(in, 200, {128});
  const double b1 = in.number("beta1", c.p.gamma), b2 = in.number("beta2", 0.5);
  const InsertionSet spectators = in.insertions(
      "spectators", InsertionSet({{SpherePoint::at(2.0), 1.2},
                                  {SpherePoint::at({-1.5, 1.5}), 1.2},
                                  {SpherePoint::at_infinity(), 1.15}}));
  const std::vector<double> dist = in.numbers("distances", geometric(0.02, 0.8, 7));
  if (dist.size() < 3) throw UsageError("distances", "need at least three distances");
  for (double d : dist)
    if (!(d > 0.0)) throw UsageError("distances", "must be positive");
  if (std::log10(*std::max_element(dist.begin(), dist.end()) / *std::min_element(dist.begin(), dist.end())) < 1.5)
    throw UsageError("distances", "must span at least 1.5 decades");
  {
    std::vector<Insertion> all = spectators.items();
    if (b1 != 0.0) all.push_back({SpherePoint::at(-dist.front() / 2.0), b1});
    if (b2 != 0.0) all.push_back({SpherePoint::at(dist.front() / 2.0), b2});
    require_correlation(InsertionSet(all), c.p, "spectators");
  }
  in.finish();

  const PowerFit f = fusion_scan(b1, b2, spectators, dist, c.p, c.mc);
  const double tol = f.expected != 0.0 ? 0.1 * std::abs(f.expected) : 3.0 * f.slope_std_err;
  gate(r, "fusion_slope", f.slope, f.slope_std_err, f.expected, tol, "8");
  if (f.log_correction != 0.0) info(r, "log_correction", f.log_correction, f.log_correction_std_err);
  r.series_columns = {"distance", "estimate", "stderr"};
  for (const auto& pt : f.points) r.series_rows.push_back({pt.distance, pt.mean, pt.std_err});
  note_regularization(r, c.mc);
}

void run_fourpoint_compare(Params& in, RunRecord& r) {
  const Common c = read_common(in, 400, {128, 256});
  const std::vector<double> alpha = in.numbers("alpha", {1.8, 1.9, 1.9});
  if (alpha.size() != 3) throw UsageError("alpha", "need three weights");
  const std::vector<cplx> zs = in.complexes("z", {cplx(0.3), cplx(0.5, 0.2)});
  const std::vector<cplx> trend = in.complexes("trend_z", {cplx(0.2), cplx(0.1), cplx(0.05)});
  const double rel = in.number("relative_tolerance", 0.1);
  in.finish();

  FourPointArgs fa;
  try {
    fa = make_fourpoint_args({alpha[0], alpha[1], alpha[2]}, c.p);
  } catch (const std::domain_error& e) {
    throw UsageError("alpha", e.what());
  }
  std::vector<cplx> all = zs;
  all.insert(all.end(), trend.begin(), trend.end());
  const auto est = fourpoint_mc_scan(all, fa, c.p, c.mc);

  r.series_columns = {"z_re", "z_im", "estimate", "stderr", "closed"};
  for (std::size_t k = 0; k < all.size(); ++k) {
    const double closed = fourpoint_closed(all[k], fa, c.p).g_tilde;
    const double m = est[k].mean / kDozzConvention, s = est[k].std_err / kDozzConvention;
    r.series_rows.push_back({all[k].real(), all[k].imag(), m, s, closed});
    const std::string lbl = point_label(all[k]);
    if (k < zs.size()) {
      gate(r, "fourpoint_z=" + lbl, m, s, closed, std::max(3.0 * s, rel * std::abs(closed)), "11");
    } else {
      info(r, "trend_z=" + lbl, m, s, fa.lambda1);
    }
    if (est[k].sweep.size() >= 2)
      info(r, "resolution_shift_z=" + lbl, est[k].resolution_shift / kDozzConvention,
           est[k].resolution_shift_std_err / kDozzConvention);
  }
  if (!trend.empty()) {
    std::size_t best = zs.size();
    for (std::size_t k = zs.size(); k < all.size(); ++k)
      if (std::abs(all[k]) < std::abs(all[best])) best = k;
    const double m = est[best].mean / kDozzConvention, s = est[best].std_err / kDozzConvention;
    gate(r, "trend_limit", m, s, fa.lambda1, std::max(3.0 * s, rel * std::abs(fa.lambda1)), "11");
  }
  info(r, "T0_three_point", fa.lambda1);
  info(r, "lambda2", fa.lambda2);
  note_regularization(r, c.mc);
}

void run_dozz_sweep(Params& in, RunRecord& r) {
  const double gamma = in.number("gamma");
  const double mu = in.number("mu", 1.0);
  const LiouvilleParams p = make_params(gamma, mu);
  const double dual_gamma = in.number("dual_gamma", 1.2);
  const LiouvilleParams pd = make_params(dual_gamma, mu);
  const double inv = 4.0 / (dual_gamma * dual_gamma);
  if (std::abs(inv - std::round(inv)) < 1e-9)
    throw UsageError("dual_gamma", "4/dual_gamma^2 is an integer, where the dual relation degenerates");
  const std::size_t count = std::size_t(in.integer("count", 20, 1));
  const std::uint64_t seed = in.seed("seed", 1);
  in.integer("workers", 1, 1);
  in.finish();

  const auto t0 = std::chrono::steady_clock::now();
  const auto primal = shift_sweep(p, false, count, seed);
  const auto dual = shift_sweep(pd, true, count, seed);
  const double elapsed = seconds_since(t0);

  r.series_columns = {"dual", "alpha1", "alpha2", "alpha3", "ratio", "rhs", "residual"};
  double wp = 0.0, wd = 0.0;
  for (const auto& s : primal) {
    wp = std::max(wp, s.residual);
    r.series_rows.push_back({0.0, s.args.alpha1, s.args.alpha2, s.args.alpha3, s.ratio, s.rhs, s.residual});
  }
  for (const auto& s : dual) {
    wd = std::max(wd, s.residual);
    r.series_rows.push_back({1.0, s.args.alpha1, s.args.alpha2, s.args.alpha3, s.ratio, s.rhs, s.residual});
  }
  gate(r, "primal_shift_max_residual", wp, 0.0, 0.0, 1e-8, "1b");
  gate(r, "dual_shift_max_residual", wd, 0.0, 0.0, 1e-8, "1b");
  gate(r, "sweep_runtime_seconds", elapsed, 0.0, 0.0, 1.0, "1b").timing = true;

  // Permutation symmetry and mu scaling on the primal triples.
  double perm = 0.0, scal = 0.0;
  const LiouvilleParams p2 = derive_params(gamma, 2.0 * mu);
  for (const auto& s : primal) {
    std::array<double, 3> a{s.args.alpha1, s.args.alpha2, s.args.alpha3};
    std::sort(a.begin(), a.end());
    const double base = dozz_c({a[0], a[1], a[2]}, p);
    do {
      perm = std::max(perm, std::abs(dozz_c({a[0], a[1], a[2]}, p) / base - 1.0));
    } while (std::next_permutation(a.begin(), a.end()));
    const double expect = std::pow(2.0, (2.0 * p.q_background - s.args.alpha_bar()) / gamma);
    scal = std::max(scal, std::abs(dozz_c(s.args, p2) / dozz_c(s.args, p) / expect - 1.0));
  }
  gate(r, "permutation_max_residual", perm, 0.0, 0.0, 1e-12);
  gate(r, "mu_scaling_max_residual", scal, 0.0, 0.0, 1e-12);
  r.metadata["dual_cosmological_constant"] = dual_cosmological_constant(pd);
  r.metadata["triples"] = count;
}

void run_specfn_audit(Params& in, RunRecord& r) {
  const std::vector<double> gammas = in.numbers("gamma");
  for (double g : gammas) make_params(g, 1.0);
  const int points = int(in.integer("points", 50, 1));
  const double fg = in.number("fourpoint_gamma", 1.0);
  const LiouvilleParams pf = make_params(fg, in.number("mu", 1.0));
  const std::vector<double> alpha = in.numbers("fourpoint_alpha", {1.8, 1.9, 1.9});
  if (alpha.size() != 3) throw UsageError("fourpoint_alpha", "need three weights");
  const int pde_points = int(in.integer("pde_points", 10, 1));
  const int pairs = int(in.integer("selberg_pairs", 5, 1));
  const std::uint64_t seed = in.seed("seed", 1);
  in.integer("workers", 1, 1);
  in.finish();

  std::uint64_t k = 0;
  for (double g : gammas) {
    const double Q = 2.0 / g + g / 2.0;
    gate(r, "upsilon_half_gamma=" + fmt(g), upsilon(Q / 2.0, g), 0.0, 1.0, 1e-10, "1a");
    double worst = 0.0;
    for (int j = 0; j < points; ++j) {
      const double z = Q * uniform(seed, k++);
      if (!(z > 0.0 && z < Q)) continue;
      worst = std::max(worst, std::abs(upsilon(Q - z, g) / upsilon(z, g) - 1.0));
    }
    gate(r, "upsilon_reflection_gamma=" + fmt(g), worst, 0.0, 0.0, 1e-9, "1a");
  }

  FourPointArgs fa;
  try {
    fa = make_fourpoint_args({alpha[0], alpha[1], alpha[2]}, pf);
  } catch (const std::domain_error& e) {
    throw UsageError("fourpoint_alpha", e.what());
  }
  double pde = 0.0, corrupt = 1e300;
  for (int j = 0; j < pde_points; ++j) {
    const double re = -1.5 + 4.0 * uniform(seed, k++);
    const double mag = 0.1 + 1.4 * uniform(seed, k++);
    const double im = uniform(seed, k++) < 0.5 ? -mag : mag;
    pde = std::max(pde, hypergeo_residual({re, im}, fa, pf, 0));
    corrupt = std::min(corrupt, hypergeo_residual({re, im}, fa, pf, 3));
  }
  gate(r, "pde_max_residual", pde, 0.0, 0.0, 1e-6, "1c");
  info(r, "pde_corrupted_min_residual", corrupt);
  gate(r, "connection_residual", connection_check(fa.lambda1, fa.lambda2, fa.hp), 0.0, 0.0, 1e-8, "1c");

  const auto t0 = std::chrono::steady_clock::now();
  r.series_columns = {"regularized", "alpha", "beta", "closed", "oracle", "relative_error"};
  for (bool reg : {false, true}) {
    double worst = 0.0;
    for (int j = 0; j < pairs;) {
      const double a = 0.05 + 0.9 * uniform(seed, k++), b = 0.05 + 0.9 * uniform(seed, k++);
      const double s = a + b;
      if (reg ? !(s > 1.05 && s < 1.45) : !(s < 0.95)) continue;
      const double cl = selberg_closed(a, b, reg), orc = planar_integral_oracle(a, b, reg);
      const double e = std::abs(cl / orc - 1.0);
      worst = std::max(worst, e);
      r.series_rows.push_back({reg ? 1.0 : 0.0, a, b, cl, orc, e});
      ++j;
    }
    gate(r, reg ? "selberg_regularized_max_error" : "selberg_max_error", worst, 0.0, 0.0, 1e-5, "1d");
  }
  gate(r, "selberg_runtime_seconds", seconds_since(t0), 0.0, 0.0, 30.0, "1d").timing = true;
}

// ------------------------------------------------------------------ serialization

json number_json(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double json_number(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

bool same_number(double a, double b) {
  return a == b || (std::isnan(a) && std::isnan(b));
}

}  // namespace

const std::vector<ExperimentKind>& all_kinds() {
  static const std::vector<ExperimentKind> v = [] {
    std::vector<ExperimentKind> out;
    for (const auto& [k, n] : kKindNames) out.push_back(k);
    return out;
  }();
  return v;
}

std::string kind_name(ExperimentKind k) {
  for (const auto& [kk, n] : kKindNames)
    if (kk == k) return n;
  return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
  for (const auto& [k, n] : kKindNames)
    if (name == n) return k;
  throw UsageError("kind", "unknown experiment '" + name + "'");
}

json parse_config_text(const std::string& text) {
  json out = json::object();
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(lineno);
    if (eq == std::string::npos) throw UsageError(where, "expected key = value");
    const std::string key = trim(line.substr(0, eq)), raw = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(where, "missing key");
    if (raw.empty()) throw UsageError(key, "missing value");
    if (out.contains(key)) throw UsageError(key, "given twice");
    json v = json::parse(raw, nullptr, false);
    if (v.is_discarded()) {
      const bool bare = std::all_of(raw.begin(), raw.end(), [](char ch) {
        return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.' || ch == '/';
      });
      if (!bare) throw UsageError(key, "cannot parse value '" + raw + "'");
      v = raw;
    }
    out[key] = v;
  }
  return out;
}

json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("config", "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

bool RunRecord::all_pass() const {
  return std::all_of(quantities.begin(), quantities.end(), [](const Quantity& q) { return !q.gated || q.pass; });
}

const Quantity* RunRecord::find(const std::string& name) const {
  for (const auto& q : quantities)
    if (q.name == name) return &q;
  return nullptr;
}

RunRecord run_experiment(const ExperimentConfig& config) {
  RunRecord r;
  r.kind = kind_name(config.kind);
  r.config = config.params;
  Params in(config.params);
  r.seed = Params(config.params).seed("seed", 1);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (config.kind) {
      case ExperimentKind::sample_field: run_sample_field(in, r); break;
      case ExperimentKind::covariance_audit: run_covariance_audit(in, r); break;
      case ExperimentKind::chaos_mass: run_chaos_mass(in, r); break;
      case ExperimentKind::three_point: run_three_point(in, r); break;
      case ExperimentKind::kpz_check: run_kpz_check(in, r); break;
      case ExperimentKind::ward_rules: run_ward_rules(in, r); break;
      case ExperimentKind::mobius_check: run_mobius_check(in, r); break;
      case ExperimentKind::fusion_scan: run_fusion_scan(in, r); break;
      case ExperimentKind::fourpoint_compare: run_fourpoint_compare(in, r); break;
      case ExperimentKind::dozz_sweep: run_dozz_sweep(in, r); break;
      case ExperimentKind::specfn_audit: run_specfn_audit(in, r); break;
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(r.kind + ": " + e.what());
  }
  r.wall_seconds = seconds_since(t0);
  return r;
}

std::string to_structured(const RunRecord& r) {
  json j;
  j["kind"] = r.kind;
  j["version"] = r.version;
  j["config"] = r.config;
  j["wall_seconds"] = r.wall_seconds;
  j["seed"] = r.seed;
  j["all_pass"] = r.all_pass();
  json qs = json::array();
  for (const auto& q : r.quantities)
    qs.push_back({{"name", q.name},
                  {"check", q.check},
                  {"value", number_json(q.value)},
                  {"std_err", number_json(q.std_err)},
                  {"reference", number_json(q.reference)},
                  {"tolerance", number_json(q.tolerance)},
                  {"pass", q.pass},
                  {"gated", q.gated},
                  {"timing", q.timing}});
  j["quantities"] = qs;
  json rows = json::array();
  for (const auto& row : r.series_rows) {
    json jr = json::array();
    for (double x : row) jr.push_back(number_json(x));
    rows.push_back(jr);
  }
  j["series"] = {{"columns", r.series_columns}, {"rows", rows}};
  j["metadata"] = r.metadata;
  return j.dump(2) + "\n";
}

RunRecord parse_structured(const std::string& text) {
  const json j = json::parse(text);
  RunRecord r;
  r.kind = j.at("kind").get<std::string>();
  r.version = j.at("version").get<std::string>();
  r.config = j.at("config");
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& q : j.at("quantities")) {
    Quantity x;
    x.name = q.at("name").get<std::string>();
    x.check = q.at("check").get<std::string>();
    x.value = json_number(q.at("value"));
    x.std_err = json_number(q.at("std_err"));
    x.reference = json_number(q.at("reference"));
    x.tolerance = json_number(q.at("tolerance"));
    x.pass = q.at("pass").get<bool>();
    x.gated = q.at("gated").get<bool>();
    x.timing = q.at("timing").get<bool>();
    r.quantities.push_back(x);
  }
  r.series_columns = j.at("series").at("columns").get<std::vector<std::string>>();
  for (const auto& row : j.at("series").at("rows")) {
    std::vector<double> v;
    for (const auto& x : row) v.push_back(json_number(x));
    r.series_rows.push_back(v);
  }
  r.metadata = j.at("metadata");
  return r;
}

std::string to_tabular(const RunRecord& r) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  if (r.kind == "fusion-scan") {
    for (std::size_t c = 0; c < r.series_columns.size(); ++c) os << (c ? "\t" : "") << r.series_columns[c];
    os << "\n";
    for (const auto& row : r.series_rows) {
      for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "\t" : "") << num(row[c]);
      os << "\n";
    }
    return os.str();
  }
  os << "name\tcheck\tvalue\tstd_err\treference\ttolerance\tpass\n";
  for (const auto& q : r.quantities)
    os << q.name << "\t" << (q.check.empty() ? "-" : q.check) << "\t" << num(q.value) << "\t" << num(q.std_err)
       << "\t" << num(q.reference) << "\t" << num(q.tolerance) << "\t" << (q.pass ? "pass" : "fail") << "\n";
  return os.str();
}

void write_results(const RunRecord& r, OutputFormat format, const std::string& path, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(path) && !force) throw std::runtime_error("refusing to overwrite " + path + " (use --force)");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << (format == OutputFormat::structured ? to_structured(r) : to_tabular(r));
  f.flush();
  if (!f) throw std::runtime_error("write failed: " + path);
}

bool same_values(const RunRecord& a, const RunRecord& b) {
  if (a.kind != b.kind || a.seed != b.seed || a.series_columns != b.series_columns || a.metadata != b.metadata)
    return false;
  std::vector<const Quantity*> qa, qb;
  for (const auto& q : a.quantities)
    if (!q.timing) qa.push_back(&q);
  for (const auto& q : b.quantities)
    if (!q.timing) qb.push_back(&q);
  if (qa.size() != qb.size()) return false;
  for (std::size_t i = 0; i < qa.size(); ++i) {
    const Quantity &x = *qa[i], &y = *qb[i];
    if (x.name != y.name || x.check != y.check || x.gated != y.gated || x.pass != y.pass ||
        !same_number(x.value, y.value) || !same_number(x.std_err, y.std_err) ||
        !same_number(x.reference, y.reference) || !same_number(x.tolerance, y.tolerance))
      return false;
  }
  if (a.series_rows.size() != b.series_rows.size()) return false;
  for (std::size_t i = 0; i < a.series_rows.size(); ++i) {
    if (a.series_rows[i].size() != b.series_rows[i].size()) return false;
    for (std::size_t j = 0; j < a.series_rows[i].size(); ++j)
      if (!same_number(a.series_rows[i][j], b.series_rows[i][j])) return false;
  }
  return true;
}

}  // namespace liouville
