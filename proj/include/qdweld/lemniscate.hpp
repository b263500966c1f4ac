#pragma once

#include <vector>

#include "qdweld/blaschke.hpp"
#include "qdweld/riemannmap.hpp"
#include "qdweld/welding.hpp"

namespace qdw {

struct LemniscateReport {
  double level = 1.0;
  std::vector<JordanCurve> components;
  // per component: indices of enclosed zeros / poles of R (into R.zeros()/R.poles())
  std::vector<std::vector<int>> enclosed_zeros, enclosed_poles;
  std::vector<double> critical_value_distances;  // | |R(c_j)| - level | per critical point
  bool analytic = false;   // no critical value within tolerance of the level
  bool connected = false;  // exactly one component
};

struct HypothesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LevelSetOptions {
  double critical_value_tol = 1e-6;
  double trace_max_step = 2e-3;
  double trace_tol = 1e-11;
};

LemniscateReport trace_level_set(const RationalMap& R, double c,
                                 const LevelSetOptions& opts = {});

struct FingerprintCertificate {
  Fingerprint fingerprint;
  BlaschkeProduct A;  // exterior-side product (pole at infinity)
  BlaschkeProduct B;  // interior-side product
  double residual = 0.0;       // sup |A(k(z)) - B(z)| over the circle
  cplx unimodular_factor = 1.0;  // recorded normalization of B (or of A for rational)
  cplx base_z0 = 1.0;            // matched base pair on the circle
  cplx base_k0 = 1.0;
  // oracle comparison (same curve, independent Riemann-map route)
  double oracle_distance = 0.0;         // raw sup distance to the oracle fingerprint
  double oracle_distance_fitted = 0.0;  // after the disk-automorphism fit
};

// Fingerprint of an analytic connected level-1 polynomial lemniscate via
// k(z) = B(z)^{1/n}, with B assembled from the disk images of the roots.
FingerprintCertificate poly_fingerprint(const std::vector<cplx>& coeffs,
                                        const LemniscateReport& report,
                                        const MapOptions& opts = {});

// Fingerprint of an analytic connected level-1 rational lemniscate via the
// functional equation A o k = B with exterior/interior Blaschke products.
FingerprintCertificate rational_fingerprint(const RationalMap& R, const LemniscateReport& report,
                                            const MapOptions& opts = {});

struct NotLogDerivativeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inverts Eq-4.5 data: given Q with all even orders whose square root has
// integer residues, returns R with (R'/R)^2 = -4 pi^2 Q and R(zeta0) = 1.
RationalMap reconstruct_rational(const QuadDifferential& Q, cplx zeta0);

}  // namespace qdw
