#include "qdweld/numerics.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <queue>

namespace qdw {

PathSample::PathSample(std::vector<cplx> pts, std::vector<double> prm)
    : points(std::move(pts)), params(std::move(prm)) {
  validate();
}

void PathSample::validate() const {
  if (points.size() != params.size())
    throw std::invalid_argument("PathSample: points/params length mismatch");
  if (points.size() < 2) throw std::invalid_argument("PathSample: needs at least 2 samples");
  for (std::size_t i = 1; i < params.size(); i++)
    if (!(params[i] > params[i - 1]))
      throw std::invalid_argument("PathSample: params not strictly increasing");
}

namespace {
std::size_t locate(const std::vector<double>& xs, double t) {
  auto it = std::upper_bound(xs.begin(), xs.end(), t);
  std::size_t i = it - xs.begin();
  if (i == 0) return 0;
  if (i >= xs.size()) return xs.size() - 2;
  return i - 1;
}
}  // namespace

cplx PathSample::at(double t) const {
  std::size_t i = locate(params, t);
  double h = params[i + 1] - params[i];
  double u = (t - params[i]) / h;
  u = std::clamp(u, 0.0, 1.0);
  return points[i] * (1.0 - u) + points[i + 1] * u;
}

cplx PathSample::tangent_at(double t) const {
  std::size_t i = locate(params, t);
  return (points[i + 1] - points[i]) / (params[i + 1] - params[i]);
}

double PathSample::polyline_length() const {
  double s = 0;
  for (std::size_t i = 1; i < points.size(); i++) s += std::abs(points[i] - points[i - 1]);
  return s;
}

bool PathSample::is_closed(double tol) const { return std::abs(front() - back()) <= tol; }

PathSample PathSample::line(cplx a, cplx b, int n) {
  std::vector<cplx> pts(n);
  std::vector<double> prm(n);
  for (int i = 0; i < n; i++) {
    double u = double(i) / (n - 1);
    pts[i] = a + (b - a) * u;
    prm[i] = u;
  }
  return PathSample(std::move(pts), std::move(prm));
}

PathSample PathSample::circle_arc(cplx center, double radius, double t0, double t1, int n) {
  std::vector<cplx> pts(n);
  std::vector<double> prm(n);
  for (int i = 0; i < n; i++) {
    double t = t0 + (t1 - t0) * double(i) / (n - 1);
    pts[i] = center + std::polar(radius, t);
    prm[i] = t;
  }
  return PathSample(std::move(pts), std::move(prm));
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
using G7 = boost::math::quadrature::gauss<double, 7>;

struct CellEstimate {
  cplx value;
  double error;
};

// One (G7,K15) application on [a,b]; error from the Gauss/Kronrod difference.
CellEstimate gk15(const std::function<cplx(double)>& f, double a, double b) {
  const auto& xk = GK::abscissa();  // 8 non-negative Kronrod nodes, xk[0] == 0
  const auto& wk = GK::weights();
  const auto& wg = G7::weights();  // 4 entries for the non-negative G7 nodes
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  cplx k_sum = wk[0] * f(c);
  cplx g_sum = wg[0] * f(c);
  for (std::size_t i = 1; i < xk.size(); i++) {
    cplx fp = f(c + h * xk[i]);
    cplx fm = f(c - h * xk[i]);
    k_sum += wk[i] * (fp + fm);
    if (i % 2 == 0) g_sum += wg[i / 2] * (fp + fm);
  }
  cplx kron = k_sum * h;
  cplx gauss = g_sum * h;
  double diff = std::abs(kron - gauss);
  // QUADPACK-style sharpened estimate
  double err = diff * std::min(1.0, std::pow(200.0 * diff / (1.0 + std::abs(kron)), 0.5));
  if (!(err > 0)) err = diff;
  return {kron, std::max(err, diff * 1e-6)};
}

cplx adaptive_core(const std::function<cplx(double)>& f, double a, double b, double tol,
                   int max_intervals, double* err_out) {
  struct Interval {
    double a, b, error;
    cplx value;
    bool operator<(const Interval& o) const { return error < o.error; }
  };
  std::priority_queue<Interval> q;
  auto first = gk15(f, a, b);
  q.push({a, b, first.error, first.value});
  cplx total = first.value;
  double total_err = first.error;
  int n = 1;
  auto converged = [&] { return total_err <= tol || total_err <= 5e-15 * std::abs(total); };
  while (!converged() && n < max_intervals) {
    Interval worst = q.top();
    q.pop();
    double m = 0.5 * (worst.a + worst.b);
    if (m <= worst.a || m >= worst.b) {
      // interval collapsed to machine precision; keep its estimate
      q.push({worst.a, worst.b, 0.0, worst.value});
      continue;
    }
    auto left = gk15(f, worst.a, m);
    auto right = gk15(f, m, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    q.push({worst.a, m, left.error, left.value});
    q.push({m, worst.b, right.error, right.value});
    n += 1;
  }
  if (!converged()) {
    Interval worst = q.top();
    throw IntegrationError("adaptive_integral: no convergence after max refinement", worst.a,
                           worst.b);
  }
  if (err_out) *err_out = total_err;
  return total;
}

}  // namespace

IntegralResult adaptive_integral(const std::function<cplx(double)>& f, double a, double b,
                                 double tol, std::optional<EndpointPower> sing_a,
                                 std::optional<EndpointPower> sing_b, int max_intervals) {
  if (a == b) return {0.0, 0.0};
  if (b < a) {
    auto r = adaptive_integral(f, b, a, tol, sing_b, sing_a, max_intervals);
    return {-r.value, r.error};
  }
  // Substitute away declared endpoint powers: with p > -1 and t = a + s^beta
  // (beta = 1/(1+p)) the factor |t-a|^p s^{beta-1} is bounded.
  if (sing_a && sing_b) {
    double m = 0.5 * (a + b);
    auto r1 = adaptive_integral(f, a, m, tol / 2, sing_a, std::nullopt, max_intervals);
    auto r2 = adaptive_integral(f, m, b, tol / 2, std::nullopt, sing_b, max_intervals);
    return {r1.value + r2.value, r1.error + r2.error};
  }
  if (sing_a) {
    double p = sing_a->exponent;
    if (p <= -1) throw std::invalid_argument("endpoint exponent must be > -1");
    double beta = 1.0 / (1.0 + p);
    double L = std::pow(b - a, 1.0 / beta);
    auto g = [&](double s) {
      double t = a + std::pow(s, beta);
      return f(t) * (beta * std::pow(s, beta - 1.0));
    };
    double err = 0;
    cplx v = adaptive_core(g, 0.0, L, tol, max_intervals, &err);
    return {v, err};
  }
  if (sing_b) {
    auto g = [&](double t) { return f(a + b - t); };
    auto r = adaptive_integral(g, a, b, tol, EndpointPower{sing_b->exponent}, std::nullopt,
                               max_intervals);
    return r;
  }
  double err = 0;
  cplx v = adaptive_core(f, a, b, tol, max_intervals, &err);
  return {v, err};
}

double invert_monotone(const std::function<double(double)>& F, double a, double b, double target,
                       double tol) {
  double fa = F(a), fb = F(b);
  if (!(fa <= target && target <= fb)) {
    if (target < fa && fa - target <= tol) return a;
    if (target > fb && target - fb <= tol) return b;
    throw std::domain_error("invert_monotone: target outside function range");
  }
  double lo = a, hi = b, flo = fa, fhi = fb;
  for (int it = 0; it < 300; it++) {
    double mid;
    // secant proposal, clipped into the bracket interior
    if (fhi > flo) {
      mid = lo + (target - flo) / (fhi - flo) * (hi - lo);
      double margin = 0.01 * (hi - lo);
      mid = std::clamp(mid, lo + margin, hi - margin);
    } else {
      mid = 0.5 * (lo + hi);
    }
    if (it % 3 == 2) mid = 0.5 * (lo + hi);  // guaranteed bisection progress
    double fm = F(mid);
    if (std::abs(fm - target) <= tol) return mid;
    if (fm < target) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
    if (hi - lo < 1e-16 * (1.0 + std::abs(lo))) return 0.5 * (lo + hi);
  }
  return 0.5 * (lo + hi);
}

std::vector<BranchedValue> sqrt_along(const std::function<cplx(cplx)>& Q, const PathSample& path,
                                      BranchedValue initial) {
  path.validate();
  cplx q0 = Q(path.front());
  if (std::abs(initial.value * initial.value - q0) > 1e-9 * (1.0 + std::abs(q0)))
    throw std::invalid_argument("sqrt_along: initial value does not square to Q(start)");

  // Walk the path, bisecting parameter steps until the argument of Q moves by
  // less than pi/2 per step; then the continued root is unambiguous.
  std::vector<BranchedValue> out;
  out.reserve(path.size());
  double phi = std::arg(q0);                      // continued argument of Q
  int branch = initial.branch_index;
  double phi_principal0 = phi;
  // align the continued argument with the initial branch choice
  double want = 2.0 * std::arg(initial.value);
  double shift = std::remainder(want - phi, 2.0 * two_pi);
  phi += shift;
  out.push_back({std::polar(std::sqrt(std::abs(q0)), phi / 2.0), branch});
  (void)phi_principal0;

  double t_prev = path.param_start();
  cplx q_prev = q0;
  for (std::size_t i = 1; i < path.size(); i++) {
    double t_target = path.params[i];
    while (t_prev < t_target) {
      double t_next = t_target;
      cplx q_next = Q(path.at(t_next));
      int depth = 0;
      while (true) {
        if (std::abs(q_next) < 1e-280 || std::abs(q_next) > 1e280)
          throw BranchAmbiguityError("sqrt_along: Q vanishes or blows up on path", t_next);
        double dphi = std::arg(q_next / q_prev);
        if (std::abs(dphi) < pi / 2.0) break;
        if (++depth > 48)
          throw BranchAmbiguityError("sqrt_along: cannot resolve branch (critical point on path?)",
                                     t_next);
        t_next = 0.5 * (t_prev + t_next);
        q_next = Q(path.at(t_next));
      }
      phi += std::arg(q_next / q_prev);
      t_prev = t_next;
      q_prev = q_next;
    }
    double princ = std::arg(q_prev);
    int wind = (int)std::lround((phi - princ) / two_pi);
    out.push_back({std::polar(std::sqrt(std::abs(q_prev)), phi / 2.0),
                   initial.branch_index + wind});
  }
  return out;
}

// ---------------------------------------------------------------------------
// ODE tracing (Dormand-Prince 4(5), arc-length parametrization)

namespace {
const double dp_c[7] = {0, 1. / 5, 3. / 10, 4. / 5, 8. / 9, 1., 1.};
const double dp_a[7][6] = {
    {},
    {1. / 5},
    {3. / 40, 9. / 40},
    {44. / 45, -56. / 15, 32. / 9},
    {19372. / 6561, -25360. / 2187, 64448. / 6561, -212. / 729},
    {9017. / 3168, -355. / 33, 46732. / 5247, 49. / 176, -5103. / 18656},
    {35. / 384, 0, 500. / 1113, 125. / 192, -2187. / 6784, 11. / 84}};
const double dp_b5[7] = {35. / 384, 0, 500. / 1113, 125. / 192, -2187. / 6784, 11. / 84, 0};
const double dp_b4[7] = {5179. / 57600,    0,          7571. / 16695, 393. / 640,
                         -92097. / 339200, 187. / 2100, 1. / 40};
}  // namespace

PathSample trace_ode(const std::function<cplx(cplx)>& field, cplx start,
                     const std::function<bool(double, cplx)>& stop, const OdeOptions& opts,
                     const std::function<double(cplx)>& quadrature, double* quadrature_out) {
  auto unit_field = [&](cplx z) {
    cplx v = field(z);
    double m = std::abs(v);
    if (m < 1e-300) throw SingularityApproachError("trace_ode: field vanished", z);
    return v / m;
  };
  auto guard_check = [&](cplx z) {
    if (opts.guard_radius <= 0) return;
    for (const cplx& s : opts.singular_points)
      if (std::abs(z - s) < opts.guard_radius)
        throw SingularityApproachError("trace_ode: entered guard radius of singular point", s);
  };

  std::vector<cplx> pts{start};
  std::vector<double> prm{0.0};
  cplx z = start;
  double s = 0.0;
  double quad = 0.0;
  double h = std::min(opts.max_step, 1e-3);
  cplx k[7];
  double g[7] = {0, 0, 0, 0, 0, 0, 0};
  k[0] = unit_field(z);

  for (int step = 0; step < opts.max_steps; step++) {
    if (stop(s, z)) break;
    guard_check(z);
    if (opts.step_limit) {
      double cap = opts.step_limit(z);
      if (cap > 0) h = std::min(h, cap);
    }
    bool accepted = false;
    cplx z5 = z;
    double dquad = 0.0;
    while (!accepted) {
      if (quadrature) g[0] = quadrature(z);
      for (int i = 1; i < 7; i++) {
        cplx zi = z;
        for (int j = 0; j < i; j++) zi += h * dp_a[i][j] * k[j];
        k[i] = unit_field(zi);
        if (quadrature) g[i] = quadrature(zi);
      }
      z5 = z;
      cplx z4 = z;
      dquad = 0.0;
      for (int i = 0; i < 7; i++) {
        z5 += h * dp_b5[i] * k[i];
        z4 += h * dp_b4[i] * k[i];
        if (quadrature) dquad += h * dp_b5[i] * g[i];
      }
      double err = std::abs(z5 - z4);
      double scale = opts.abs_tol + opts.rel_tol * (std::abs(z) + h);
      if (err <= scale || h <= opts.min_step) {
        accepted = true;
        double grow = err > 0 ? 0.9 * std::pow(scale / err, 0.2) : 5.0;
        h = std::min(opts.max_step, h * std::clamp(grow, 0.2, 5.0));
      } else {
        h = std::max(opts.min_step, h * std::clamp(0.9 * std::pow(scale / err, 0.2), 0.1, 0.9));
      }
    }
    double ds = std::abs(z5 - z);
    if (ds == 0) break;
    z = z5;
    s += ds;
    quad += dquad;
    pts.push_back(z);
    prm.push_back(s);
    k[0] = unit_field(z);  // FSAL not exploited; direction may flip between steps
  }
  if (quadrature_out) *quadrature_out = quad;
  if (pts.size() < 2) {
    pts.push_back(z + 1e-300);
    prm.push_back(1e-300);
  }
  return PathSample(std::move(pts), std::move(prm));
}

// ---------------------------------------------------------------------------

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y,
                             const std::vector<double>& slopes)
    : x_(std::move(x)), y_(std::move(y)) {
  if (x_.size() != y_.size() || x_.size() < 2)
    throw std::invalid_argument("MonotoneCubic: bad table");
  if (!slopes.empty() && slopes.size() != x_.size())
    throw std::invalid_argument("MonotoneCubic: slope table size mismatch");
  std::size_t n = x_.size();
  std::vector<double> d(n - 1);
  for (std::size_t i = 0; i + 1 < n; i++) {
    double h = x_[i + 1] - x_[i];
    if (!(h > 0)) throw std::invalid_argument("MonotoneCubic: x not increasing");
    d[i] = (y_[i + 1] - y_[i]) / h;
    if (d[i] < 0) throw std::invalid_argument("MonotoneCubic: y not nondecreasing");
  }
  slope_.assign(n, 0.0);
  slope_[0] = d[0];
  slope_[n - 1] = d[n - 2];
  for (std::size_t i = 1; i + 1 < n; i++) {
    if (d[i - 1] * d[i] <= 0) {
      slope_[i] = 0.0;
    } else {
      double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
      slope_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
  }
  if (!slopes.empty()) {
    for (std::size_t i = 0; i < n; i++)
      if (std::isfinite(slopes[i]) && slopes[i] >= 0) slope_[i] = slopes[i];
  }
  // Fritsch-Carlson limiter
  for (std::size_t i = 0; i + 1 < n; i++) {
    if (d[i] == 0) {
      slope_[i] = slope_[i + 1] = 0;
      continue;
    }
    double a = slope_[i] / d[i], b = slope_[i + 1] / d[i];
    double s = a * a + b * b;
    if (s > 9.0) {
      double t = 3.0 / std::sqrt(s);
      slope_[i] = t * a * d[i];
      slope_[i + 1] = t * b * d[i];
    }
  }
}

double MonotoneCubic::operator()(double t) const {
  std::size_t i = locate(x_, t);
  double h = x_[i + 1] - x_[i];
  double u = (t - x_[i]) / h;
  double u2 = u * u, u3 = u2 * u;
  double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
  double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
  return h00 * y_[i] + h10 * h * slope_[i] + h01 * y_[i + 1] + h11 * h * slope_[i + 1];
}

double MonotoneCubic::derivative(double t) const {
  std::size_t i = locate(x_, t);
  double h = x_[i + 1] - x_[i];
  double u = (t - x_[i]) / h;
  double u2 = u * u;
  double dh00 = (6 * u2 - 6 * u) / h, dh10 = 3 * u2 - 4 * u + 1;
  double dh01 = (-6 * u2 + 6 * u) / h, dh11 = 3 * u2 - 2 * u;
  return dh00 * y_[i] + dh10 * slope_[i] + dh01 * y_[i + 1] + dh11 * slope_[i + 1];
}

double MonotoneCubic::inverse(double y, double tol) const {
  if (y <= y_.front()) return x_.front();
  if (y >= y_.back()) return x_.back();
  auto it = std::upper_bound(y_.begin(), y_.end(), y);
  std::size_t i = std::max<std::ptrdiff_t>(1, it - y_.begin()) - 1;
  double lo = x_[i], hi = x_[std::min(i + 1, x_.size() - 1)];
  auto F = [&](double t) { return (*this)(t); };
  return invert_monotone(F, lo, hi, y, tol);
}

}  // namespace qdw
