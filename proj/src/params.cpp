#include "liouville/params.hpp"

#include <cmath>
#include <stdexcept>

#include "liouville/special.hpp"

namespace liouville {

LiouvilleParams derive_params(double gamma, double mu) {
  if (!(gamma > 0.0 && gamma < 2.0))
    throw std::domain_error("gamma must lie in (0,2)");
  if (!(mu > 0.0)) throw std::domain_error("mu must be positive");
  LiouvilleParams p;
  p.gamma = gamma;
  p.mu = mu;
  p.q_background = 2.0 / gamma + gamma / 2.0;
  p.chi = std::log(2.0) - 0.5;
  const double q2 = p.q_background * p.q_background;
  p.central_charge = 1.0 + 6.0 * q2;
  p.matter_charge = 25.0 - 6.0 * q2;
  return p;
}

double conformal_weight(double alpha, const LiouvilleParams& p) {
  return 0.5 * alpha * (p.q_background - 0.5 * alpha);
}

InsertionSet::InsertionSet(std::vector<Insertion> ins) : ins_(std::move(ins)) {
  for (std::size_t i = 0; i < ins_.size(); ++i) {
    if (ins_[i].weight == 0.0) throw std::invalid_argument("insertion weight must be nonzero");
    if (!ins_[i].point.infinite &&
        !(std::isfinite(ins_[i].point.z.real()) && std::isfinite(ins_[i].point.z.imag())))
      throw std::invalid_argument("insertion point must be finite or the point at infinity");
    for (std::size_t j = 0; j < i; ++j)
      if (ins_[i].point == ins_[j].point)
        throw std::invalid_argument("insertion points must be pairwise distinct");
  }
}

double InsertionSet::weight_sum() const {
  double s = 0.0;
  for (const auto& x : ins_) s += x.weight;
  return s;
}

double InsertionSet::s_exponent(const LiouvilleParams& p) const {
  return (weight_sum() - 2.0 * p.q_background) / p.gamma;
}

bool InsertionSet::has_infinite_point() const {
  for (const auto& x : ins_)
    if (x.point.infinite) return true;
  return false;
}

InsertionSet InsertionSet::with_point(std::size_t i, SpherePoint pt) const {
  auto v = ins_;
  v.at(i).point = pt;
  return InsertionSet(std::move(v));
}

InsertionSet InsertionSet::with_extra(Insertion extra) const {
  auto v = ins_;
  v.push_back(extra);
  return InsertionSet(std::move(v));
}

SeibergReport seiberg_check(const std::vector<double>& weights, const LiouvilleParams& p) {
  if (weights.empty()) throw std::invalid_argument("seiberg_check needs at least one weight");
  SeibergReport r;
  double sum = 0.0;
  r.individual_bound = true;
  for (double a : weights) {
    sum += a;
    if (!(a < p.q_background)) r.individual_bound = false;
  }
  r.sum_bound = sum > 2.0 * p.q_background;
  r.s = (sum - 2.0 * p.q_background) / p.gamma;
  r.pass = r.sum_bound && r.individual_bound;
  if (!r.sum_bound) r.failed = "sum of weights must exceed 2Q";
  if (!r.individual_bound) r.failed += std::string(r.failed.empty() ? "" : "; ") + "every weight must be below Q";
  return r;
}

SeibergReport seiberg_check(const InsertionSet& ins, const LiouvilleParams& p) {
  std::vector<double> w;
  for (const auto& x : ins.items()) w.push_back(x.weight);
  return seiberg_check(w, p);
}

double prefactor_b(double weight_sum, const LiouvilleParams& p) {
  const double d = weight_sum - 2.0 * p.q_background;
  return 4.0 * std::exp(-0.5 * p.chi * d * d);
}

double correlator_prefactor(const InsertionSet& ins, const LiouvilleParams& p) {
  const double s = ins.s_exponent(p);
  if (!(s > 0.0)) throw std::domain_error("correlator prefactor needs s > 0");
  double log_pref = std::log(prefactor_b(ins.weight_sum(), p));
  const auto& v = ins.items();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].point.infinite) throw std::invalid_argument("plane prefactor needs finite points");
    for (std::size_t j = 0; j < i; ++j)
      log_pref -= v[i].weight * v[j].weight * std::log(std::abs(v[i].point.z - v[j].point.z));
  }
  log_pref += -s * std::log(p.mu) - std::log(p.gamma) + log_gamma(s).log_abs;
  return std::exp(log_pref);
}

}  // namespace liouville
