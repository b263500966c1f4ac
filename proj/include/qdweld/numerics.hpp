#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdw {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Default tolerances: inner quadrature two orders tighter than fingerprint
// sampling so quadrature noise never dominates a fingerprint comparison.
inline constexpr double kQuadTol = 1e-10;
inline constexpr double kFingerprintTol = 1e-8;

inline double wrap_angle(double t) {
  t = std::fmod(t, two_pi);
  return t < 0 ? t + two_pi : t;
}

// Ordered polyline with strictly increasing parameter values.
struct PathSample {
  std::vector<cplx> points;
  std::vector<double> params;

  PathSample() = default;
  PathSample(std::vector<cplx> pts, std::vector<double> prm);

  void validate() const;
  std::size_t size() const { return points.size(); }
  double param_start() const { return params.front(); }
  double param_end() const { return params.back(); }
  cplx front() const { return points.front(); }
  cplx back() const { return points.back(); }

  cplx at(double t) const;           // linear interpolation in the parameter
  cplx tangent_at(double t) const;   // forward-difference tangent, unnormalized
  double polyline_length() const;
  bool is_closed(double tol) const;

  static PathSample line(cplx a, cplx b, int n);
  static PathSample circle_arc(cplx center, double radius, double t0, double t1, int n);
};

// Value of a continued square root together with its winding count.
struct BranchedValue {
  cplx value;
  int branch_index = 0;
};

struct IntegralResult {
  cplx value;
  double error = 0.0;
};

struct IntegrationError : std::runtime_error {
  double worst_a, worst_b;
  IntegrationError(const std::string& msg, double a, double b)
      : std::runtime_error(msg), worst_a(a), worst_b(b) {}
};

struct BranchAmbiguityError : std::runtime_error {
  double param;
  BranchAmbiguityError(const std::string& msg, double t)
      : std::runtime_error(msg), param(t) {}
};

struct SingularityApproachError : std::runtime_error {
  cplx location;
  SingularityApproachError(const std::string& msg, cplx z)
      : std::runtime_error(msg), location(z) {}
};

// Declares that the integrand behaves like |t - endpoint|^exponent near an
// endpoint (exponent > -1). The substitution t = s^{1/(1+exponent)} makes the
// integrand bounded there before quadrature.
struct EndpointPower {
  double exponent;
};

// Adaptive Gauss-Kronrod (G7,K15) with worst-interval-first bisection.
IntegralResult adaptive_integral(const std::function<cplx(double)>& f, double a, double b,
                                 double tol = kQuadTol,
                                 std::optional<EndpointPower> sing_a = std::nullopt,
                                 std::optional<EndpointPower> sing_b = std::nullopt,
                                 int max_intervals = 4000);

// Strictly increasing F on [a, b]; returns x with |F(x) - target| <= tol
// (bisection with secant acceleration). Throws std::domain_error when target
// lies outside [F(a), F(b)].
double invert_monotone(const std::function<double(double)>& F, double a, double b,
                       double target, double tol = 1e-12);

// Continues sqrt(Q) along the path starting from `initial` (initial.value^2
// must equal Q at the first point). The path is refined until consecutive
// arguments of Q differ by less than pi/2, which pins the branch.
std::vector<BranchedValue> sqrt_along(const std::function<cplx(cplx)>& Q,
                                      const PathSample& path, BranchedValue initial);

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 0.1;
  double min_step = 1e-14;
  int max_steps = 400000;
  std::vector<cplx> singular_points;
  double guard_radius = 0.0;  // distance to singular_points that aborts the trace
  std::function<double(cplx)> step_limit;  // optional per-state cap on the step size
};

// Traces z'(s) = field(z)/|field(z)| from `start` until the stop predicate
// fires or the step budget runs out. Embedded Dormand-Prince 4(5) steps; the
// returned parameter is arc length. When `quadrature` is given, the line
// integral of it along the solution is accumulated with the same RK weights
// and written to *quadrature_out.
PathSample trace_ode(const std::function<cplx(cplx)>& field, cplx start,
                     const std::function<bool(double, cplx)>& stop,
                     const OdeOptions& opts = {},
                     const std::function<double(cplx)>& quadrature = nullptr,
                     double* quadrature_out = nullptr);

// Disk automorphism z -> lambda (z - a) / (1 - conj(a) z).
struct DiskMobius {
  cplx a = 0.0;
  cplx lambda = 1.0;
  cplx operator()(cplx z) const { return lambda * (z - a) / (1.0 - std::conj(a) * z); }
  double map_angle(double theta) const { return std::arg((*this)(std::polar(1.0, theta))); }
};

// Fritsch-Carlson monotone cubic interpolant of a nondecreasing table. Known
// derivative values may be supplied per node (NaN entries fall back to the
// Fritsch-Carlson slopes); supplied slopes are still limited for monotonicity.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y,
                const std::vector<double>& slopes = {});
  double operator()(double t) const;
  double derivative(double t) const;
  double inverse(double y, double tol = 1e-13) const;  // requires strictly increasing data
  const std::vector<double>& xs() const { return x_; }
  const std::vector<double>& ys() const { return y_; }

 private:
  std::vector<double> x_, y_, slope_;
};

}  // namespace qdw
