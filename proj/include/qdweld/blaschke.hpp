#pragma once

#include <vector>

#include "qdweld/numerics.hpp"
#include "qdweld/quaddiff.hpp"

namespace qdw {

struct ZeroPole {
  cplx point;
  int mult = 1;
};

// Rational map C prod (z-a_k)^{p_k} / prod (z-b_k)^{q_k} with distinct finite
// zeros and poles stored explicitly with multiplicities.
class RationalMap {
 public:
  RationalMap(cplx constant, std::vector<ZeroPole> zeros, std::vector<ZeroPole> poles);
  static RationalMap from_polynomial(const std::vector<cplx>& coeffs_ascending);

  cplx constant() const { return constant_; }
  const std::vector<ZeroPole>& zeros() const { return zeros_; }
  const std::vector<ZeroPole>& poles() const { return poles_; }
  int zero_degree() const;  // n1
  int pole_degree() const;  // n2 (finite poles only)
  int degree() const;       // max(n1, n2), counting the pole/zero at infinity

  cplx eval(cplx z) const;
  cplx log_derivative(cplx z) const;  // f'/f
  cplx derivative(cplx z) const;

  // finite critical points that are not zeros or poles (roots of the
  // logarithmic-derivative numerator), with multiplicities
  std::vector<ZeroPole> finite_critical_points() const;
  // coefficients of the numerator of f'/f over prod(z-a_k)(z-b_k)
  std::vector<cplx> log_derivative_numerator() const;

 private:
  cplx constant_;
  std::vector<ZeroPole> zeros_, poles_;
};

// Finite Blaschke product lambda prod (z-a_k)/(1-conj(a_k) z), |lambda| = 1,
// all zeros strictly inside the unit disk.
class BlaschkeProduct {
 public:
  BlaschkeProduct(cplx lambda, std::vector<cplx> zeros);
  // product with poles at the given points outside the disk and at infinity
  // (multiplicity inf_degree); realized through the reflected zero data
  static BlaschkeProduct exterior_from_poles(cplx lambda, const std::vector<cplx>& poles_outside,
                                             int inf_degree);

  cplx lambda() const { return lambda_; }
  const std::vector<cplx>& zeros() const { return zeros_; }
  int degree() const { return int(zeros_.size()); }

  cplx eval(cplx z) const;
  cplx derivative(cplx z) const;
  // d/dtheta arg B(e^{i theta}) = sum of Poisson kernels; equals |B'| on the circle
  double phase_derivative(double theta) const;

  RationalMap as_rational() const;

 private:
  cplx lambda_;
  std::vector<cplx> zeros_;
};

// Q_f = -(1/4 pi^2) (f'/f)^2 dz^2
QuadDifferential log_derivative_qd(const RationalMap& f);
QuadDifferential log_derivative_qd(const BlaschkeProduct& B);

struct CircleCriticalReport {
  double min_abs_derivative = 0.0;
  double argmin_theta = 0.0;
  bool pass = false;  // min > 0 with certified margin
};

CircleCriticalReport no_circle_critical_points(const BlaschkeProduct& B, int samples = 4096);

struct QuotientCriticalResult {
  std::vector<double> thetas;     // circle zeros of (A/B)'
  bool identically_critical = false;  // A/B constant on the circle
};

QuotientCriticalResult quotient_circle_critical(const BlaschkeProduct& A,
                                                const BlaschkeProduct& B, int samples = 4096);

}  // namespace qdw
