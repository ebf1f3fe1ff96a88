#pragma once

#include <complex>
#include <string>
#include <vector>

namespace liouville {

using cplx = std::complex<double>;

struct LiouvilleParams {
  double gamma = 1.0;
  double mu = 1.0;
  double q_background = 2.5;   // Q = 2/gamma + gamma/2
  double chi = 0.0;            // ln 2 - 1/2
  double central_charge = 0.0; // c_L = 1 + 6 Q^2
  double matter_charge = 0.0;  // c_M = 25 - 6 Q^2
};

LiouvilleParams derive_params(double gamma, double mu);

// Delta_alpha = alpha/2 (Q - alpha/2)
double conformal_weight(double alpha, const LiouvilleParams& p);

// A point of the Riemann sphere in the plane chart, or the point at infinity.
struct SpherePoint {
  cplx z{0.0, 0.0};
  bool infinite = false;

  static SpherePoint at(cplx w) { return {w, false}; }
  static SpherePoint at_infinity() { return {cplx{}, true}; }
  bool operator==(const SpherePoint& o) const {
    return infinite == o.infinite && (infinite || z == o.z);
  }
};

struct Insertion {
  SpherePoint point;
  double weight = 0.0;
};

class InsertionSet {
 public:
  InsertionSet() = default;
  explicit InsertionSet(std::vector<Insertion> ins);

  const std::vector<Insertion>& items() const { return ins_; }
  std::size_t size() const { return ins_.size(); }
  const Insertion& operator[](std::size_t i) const { return ins_[i]; }

  double weight_sum() const;
  double s_exponent(const LiouvilleParams& p) const;  // (sum alpha - 2Q)/gamma
  bool has_infinite_point() const;

  InsertionSet with_point(std::size_t i, SpherePoint pt) const;
  InsertionSet with_extra(Insertion extra) const;

 private:
  std::vector<Insertion> ins_;
};

struct SeibergReport {
  bool pass = false;
  bool sum_bound = false;        // sum alpha > 2Q
  bool individual_bound = false; // every alpha < Q
  double s = 0.0;
  std::string failed;            // empty on pass
};

SeibergReport seiberg_check(const std::vector<double>& weights, const LiouvilleParams& p);
SeibergReport seiberg_check(const InsertionSet& ins, const LiouvilleParams& p);

// B(alpha) = 4 exp(-chi/2 (sum alpha - 2Q)^2)
double prefactor_b(double weight_sum, const LiouvilleParams& p);

// B(alpha) prod_{i<j}|z_i - z_j|^{-alpha_i alpha_j} mu^{-s} gamma^{-1} Gamma(s).
// Plane form: every point must be finite.
double correlator_prefactor(const InsertionSet& ins, const LiouvilleParams& p);

}  // namespace liouville
