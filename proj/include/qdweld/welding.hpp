#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "qdweld/quaddiff.hpp"
#include "qdweld/riemannmap.hpp"

namespace qdw {

// A circle-symmetric pair whose arc systems match in count, sign, endpoint
// type, and finite length, aligned so plus-arc j corresponds to minus-arc j.
struct CoordinatedPair {
  QuadDifferential q_minus;
  QuadDifferential q_plus;
  CircleArcSystem arcs_minus;
  CircleArcSystem arcs_plus;  // rotated so indices align with arcs_minus
  int alignment_offset = 0;   // plus arc j corresponds to original index j + offset
  // representatives per arc (angles inside the arcs), filled by choose_representatives
  std::vector<double> rep_minus, rep_plus;
  std::vector<bool> rep_free;  // which representatives were free choices
};

struct CoordinationFailure {
  enum class Condition { arc_count, sign_match, endpoint_type, q_length } condition;
  int arc_index = -1;
  double detail_minus = 0.0, detail_plus = 0.0;
  std::string message;
};

struct CoordinationResult {
  std::optional<CoordinatedPair> pair;
  std::optional<CoordinationFailure> failure;
  bool ok() const { return pair.has_value(); }
};

CoordinationResult check_coordinated(const QuadDifferential& q_minus,
                                     const QuadDifferential& q_plus, double tol = 1e-8);

struct RepresentativeOverride {
  int arc_index;
  std::optional<double> minus_angle;
  std::optional<double> plus_angle;
};

// Defaults follow the welding construction: w_j = z_j when the arc start is a
// finite critical point, w_j = z_{j+1} when only the end is finite, and a free
// choice (midpoint, or angle 0 on the whole circle) otherwise. Overrides apply
// to free choices only and must lie inside the arc.
CoordinatedPair choose_representatives(CoordinatedPair pair,
                                       const std::vector<RepresentativeOverride>& overrides = {});

struct ArcMatchTable {
  std::vector<double> theta;  // minus-side angles
  std::vector<double> psi;    // matched plus-side angles
};

struct WeldingResult {
  Fingerprint fingerprint;
  double residual = 0.0;  // transformation-rule residual over regular samples
  std::vector<ArcMatchTable> arc_tables;
  std::vector<double> rep_minus, rep_plus;
};

WeldingResult welding_fingerprint(const CoordinatedPair& pair, int samples_per_arc = 256);

// sup over regular circle samples of the relative defect of
// Q_-(z) dz^2 = Q_+(k(z)) k'(z)^2 dz^2
double residual_transformation_rule(const Fingerprint& k, const QuadDifferential& q_minus,
                                    const QuadDifferential& q_plus, int samples = 1024);

struct WeldingFunctions {
  // branch-continuous cumulative integrals of sqrt(Q) along the circle
  std::function<cplx(double)> A;  // from arg k(z0), exterior differential
  std::function<cplx(double)> B;  // from arg z0, interior differential
  Fingerprint fingerprint;        // solution of A(k(theta)) = B(theta)
  double equation_residual = 0.0; // sup |A(k(theta)) - B(theta)|
};

// Lemma-level welding equation solver; requires the pair to be coordinated and
// the circle free of infinite critical points (otherwise the arc-by-arc mode
// of welding_fingerprint must be used).
WeldingFunctions qd_welding_functions(const QuadDifferential& q_minus,
                                      const QuadDifferential& q_plus, cplx z0, cplx k_z0,
                                      int samples = 1024);

struct ArcSplitRequired : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CoordinationViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Signed cumulative Q-length along the circle from a reference angle, with
// integrable endpoint handling; used to match arcs by flat length.
class CumulativeQLength {
 public:
  CumulativeQLength() = default;
  // domain [lo, hi] with reference point ref inside; endpoint orders are the
  // divisor orders at the endpoints (0 when regular)
  CumulativeQLength(const QuadDifferential& Q, double lo, double hi, double ref);

  double eval(double theta) const;     // signed length from ref
  double inverse(double length) const; // monotone inversion onto [lo_cap, hi_cap]
  double domain_lo() const { return lo_cap_; }
  double domain_hi() const { return hi_cap_; }
  double total_forward() const { return eval(hi_cap_); }
  double total_backward() const { return eval(lo_cap_); }

 private:
  const QuadDifferential* Q_ = nullptr;
  double lo_ = 0, hi_ = 0, ref_ = 0;
  double lo_cap_ = 0, hi_cap_ = 0;
  std::vector<double> knots_;
  std::vector<double> cum_;  // signed cumulative at knots
  double integrate(double a, double b) const;
};

}  // namespace qdw
