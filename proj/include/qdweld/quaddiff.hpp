#pragma once

#include <optional>
#include <vector>

#include "qdweld/numerics.hpp"

namespace qdw {

struct DivisorPoint {
  cplx point = 0.0;       // ignored when at_infinity
  int order = 0;          // > 0 zero, < 0 pole
  bool at_infinity = false;
};

struct DegreeReport {
  int total_pole_order = 0;  // p
  int total_zero_order = 0;  // q
  int order_at_infinity = 0;
  bool ok = false;           // p - q == 4
};

struct PoleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SymmetryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ReflectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Pole2Structure { radial, circular, spiral };

struct CriticalPoint {
  cplx location = 0.0;
  bool at_infinity = false;
  int order = 0;
  bool finite_kind() const { return order >= -1; }  // zeros and simple poles
  std::optional<Pole2Structure> tag;                // present iff order == -2
};

// Rational quadratic differential on the sphere: constant times the divisor
// product, with the order at infinity carried explicitly so that the degree
// relation p - q = 4 is an exact integer identity.
class QuadDifferential {
 public:
  QuadDifferential(cplx constant, std::vector<std::pair<cplx, int>> finite_divisor);

  cplx constant() const { return constant_; }
  const std::vector<DivisorPoint>& finite_divisor() const { return finite_; }
  int order_at_infinity() const { return order_infinity_; }

  cplx eval(cplx z) const;                          // throws PoleError at poles
  cplx eval_on_circle_dz2(double theta) const;      // Q(e^{i t}) (i e^{i t})^2
  // leading coefficient of the order-2 part: lim (z-a)^2 Q(z) (or z^2 Q at inf)
  cplx order2_coefficient(const CriticalPoint& c) const;

  DegreeReport divisor_check() const;
  std::vector<CriticalPoint> critical_points() const;  // finite + infinity when critical
  std::optional<CriticalPoint> critical_at(cplx z, double tol) const;
  int order_at(cplx z, double tol) const;              // 0 when z is regular

  // pointwise scale: distance from z to the nearest other divisor point
  double local_scale(cplx z) const;
  double global_scale() const;  // max divisor modulus, at least 1

  QuadDifferential scaled(cplx factor) const;
  // Q in the chart w = 1/z (transformation rule applied)
  QuadDifferential infinity_chart() const;

 private:
  cplx constant_;
  std::vector<DivisorPoint> finite_;
  int order_infinity_;
};

struct LocalStructure {
  int emanating_trajectories = 0;            // finite critical points
  std::vector<double> admissible_angles;     // pi k / (n+2) or pi k / (n-2)
  std::optional<Pole2Structure> pole2_tag;
};

LocalStructure classify_local_structure(const QuadDifferential& Q, const CriticalPoint& c);

// Catalog of circle-point orders of the pullback at a boundary corner.
// zeta_order: order of Q at the boundary point of the curve (0 = regular);
// the corner angle is (angle_num/angle_den) * pi measured in the chosen domain.
enum class Side { interior, exterior };
int boundary_order_map(int zeta_order, int angle_num, int angle_den, Side side);

enum class ArcKind { trajectory, orthogonal };

enum class ArcTermination { critical_point, closed, budget_exhausted };

struct TrajectoryArc {
  PathSample path;        // positions in the plane chart (may pass near infinity)
  ArcKind kind = ArcKind::trajectory;
  ArcTermination termination = ArcTermination::budget_exhausted;
  std::optional<CriticalPoint> endpoint;  // set when termination == critical_point
  double q_length = 0.0;
  bool q_length_infinite = false;
  bool passes_infinity = false;
};

struct TraceOptions {
  double guard_factor = 1e-6;   // times local scale
  double seed_offset = 2e-5;    // seed distance when starting at a critical point
  double step_tol = 1e-10;
  double closure_tol = 1e-7;
  double max_length = 400.0;
  double max_step = 0.0;        // 0: proportional to the divisor scale
  int max_steps = 400000;
};

TrajectoryArc trace_trajectory(const QuadDifferential& Q, cplx start, ArcKind kind,
                               int direction = +1, const TraceOptions& opts = {});

// Critical trajectory leaving a finite critical point along the given ray slot.
TrajectoryArc trace_critical_trajectory(const QuadDifferential& Q, const CriticalPoint& from,
                                        int ray_index, const TraceOptions& opts = {});
// Emanating ray angles of the critical trajectories at a finite critical point.
std::vector<double> critical_ray_angles(const QuadDifferential& Q, const CriticalPoint& c);

struct QLengthResult {
  double value = 0.0;
  bool infinite = false;
};

QLengthResult q_length(const QuadDifferential& Q, const PathSample& arc, double tol = kQuadTol);

// Q-length of the circle arc theta in [t1, t2]; honors integrable endpoint
// singularities at circle divisor points and flags divergent endpoints.
QLengthResult circle_arc_q_length(const QuadDifferential& Q, double t1, double t2,
                                  double tol = kQuadTol);

enum class EndpointType { finite_critical, infinite_critical };

struct CircleArc {
  double theta_start = 0.0;
  double theta_end = 0.0;  // > theta_start, wraps modulo 2 pi
  int sign = +1;           // sign of Q dz^2 on the arc
  // endpoint data (absent for the whole-circle arc)
  std::optional<EndpointType> start_type, end_type;
  cplx start_point = 0.0, end_point = 0.0;
  std::vector<double> interior_even_zeros;  // angles of even-order zeros inside the arc
  double width() const { return theta_end - theta_start; }
};

struct CircleArcSystem {
  std::vector<CircleArc> arcs;  // counterclockwise; single whole-circle arc allowed
  bool whole_circle() const { return arcs.size() == 1 && !arcs[0].start_type; }
};

CircleArcSystem circle_decomposition(const QuadDifferential& Q);

// Continues a disk-side differential (divisor in the closed disk) to the
// sphere by reflection across the unit circle, rotating the constant so the
// differential is real along the circle.
QuadDifferential reflect_extend(const QuadDifferential& disk_qd);

bool is_circle_symmetric(const QuadDifferential& Q, double tol = 1e-8);

}  // namespace qdw
