#include "qdweld/quaddiff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>

namespace qdw {

namespace {
cplx ipow(cplx z, int n) {
  if (n == 0) return 1.0;
  cplx base = n > 0 ? z : 1.0 / z;
  int e = std::abs(n);
  cplx r = 1.0;
  while (e) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}
}  // namespace

QuadDifferential::QuadDifferential(cplx constant, std::vector<std::pair<cplx, int>> finite_divisor)
    : constant_(constant) {
  if (constant_ == 0.0) throw std::invalid_argument("QuadDifferential: zero constant");
  // merge coincident points
  for (auto& [pt, order] : finite_divisor) {
    if (order == 0) continue;
    bool merged = false;
    for (auto& d : finite_) {
      if (std::abs(d.point - pt) < 1e-12 * (1.0 + std::abs(pt))) {
        d.order += order;
        merged = true;
        break;
      }
    }
    if (!merged) finite_.push_back({pt, order, false});
  }
  std::erase_if(finite_, [](const DivisorPoint& d) { return d.order == 0; });
  int sum = 0;
  for (const auto& d : finite_) sum += d.order;
  order_infinity_ = -4 - sum;  // conformal transformation rule in the chart w = 1/z
}

cplx QuadDifferential::eval(cplx z) const {
  cplx v = constant_;
  for (const auto& d : finite_) {
    cplx f = z - d.point;
    if (d.order < 0 && std::abs(f) < 1e-14 * (1.0 + std::abs(z)))
      throw PoleError("QuadDifferential::eval at a pole");
    v *= ipow(f, d.order);
  }
  return v;
}

cplx QuadDifferential::eval_on_circle_dz2(double theta) const {
  cplx z = std::polar(1.0, theta);
  cplx iz = cplx(0, 1) * z;
  return eval(z) * iz * iz;
}

cplx QuadDifferential::order2_coefficient(const CriticalPoint& c) const {
  cplx v = constant_;
  if (c.at_infinity) {
    // lim z^2 Q(z); finite exactly when the order at infinity is -2
    int total = 0;
    for (const auto& d : finite_) total += d.order;
    if (total != -2) throw std::invalid_argument("order2_coefficient: infinity is not order -2");
    // expand prod (z-a)^m ~ z^total near infinity
    return constant_;
  }
  for (const auto& d : finite_) {
    if (std::abs(d.point - c.location) < 1e-12 * (1.0 + std::abs(c.location))) continue;
    v *= ipow(c.location - d.point, d.order);
  }
  return v;
}

DegreeReport QuadDifferential::divisor_check() const {
  DegreeReport r;
  for (const auto& d : finite_) {
    if (d.order > 0)
      r.total_zero_order += d.order;
    else
      r.total_pole_order -= d.order;
  }
  r.order_at_infinity = order_infinity_;
  if (order_infinity_ > 0)
    r.total_zero_order += order_infinity_;
  else
    r.total_pole_order -= order_infinity_;
  r.ok = (r.total_pole_order - r.total_zero_order == 4);
  return r;
}

std::vector<CriticalPoint> QuadDifferential::critical_points() const {
  std::vector<CriticalPoint> out;
  auto tag_of = [&](CriticalPoint& c) {
    if (c.order != -2) return;
    cplx a = order2_coefficient(c);
    double ph = std::arg(a);
    if (std::abs(ph) < 1e-9)
      c.tag = Pole2Structure::radial;
    else if (std::abs(std::abs(ph) - pi) < 1e-9)
      c.tag = Pole2Structure::circular;
    else
      c.tag = Pole2Structure::spiral;
  };
  for (const auto& d : finite_) {
    CriticalPoint c{d.point, false, d.order, {}};
    tag_of(c);
    out.push_back(c);
  }
  if (order_infinity_ != 0) {
    CriticalPoint c{0.0, true, order_infinity_, {}};
    if (c.order == -2) {
      cplx a = order2_coefficient(c);
      double ph = std::arg(a);
      if (std::abs(ph) < 1e-9)
        c.tag = Pole2Structure::radial;
      else if (std::abs(std::abs(ph) - pi) < 1e-9)
        c.tag = Pole2Structure::circular;
      else
        c.tag = Pole2Structure::spiral;
    }
    out.push_back(c);
  }
  return out;
}

std::optional<CriticalPoint> QuadDifferential::critical_at(cplx z, double tol) const {
  for (const auto& c : critical_points())
    if (!c.at_infinity && std::abs(c.location - z) <= tol) return c;
  return std::nullopt;
}

int QuadDifferential::order_at(cplx z, double tol) const {
  for (const auto& d : finite_)
    if (std::abs(d.point - z) <= tol) return d.order;
  return 0;
}

double QuadDifferential::local_scale(cplx z) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : finite_) {
    double dist = std::abs(d.point - z);
    if (dist > 1e-12 * (1.0 + std::abs(z))) best = std::min(best, dist);
  }
  if (!std::isfinite(best)) best = 1.0;
  return best;
}

double QuadDifferential::global_scale() const {
  double r = 1.0;
  for (const auto& d : finite_) r = std::max(r, std::abs(d.point));
  return r;
}

QuadDifferential QuadDifferential::scaled(cplx factor) const {
  std::vector<std::pair<cplx, int>> div;
  for (const auto& d : finite_) div.push_back({d.point, d.order});
  return QuadDifferential(constant_ * factor, div);
}

QuadDifferential QuadDifferential::infinity_chart() const {
  // Q1(w) = Q(1/w) / w^4
  cplx c = constant_;
  std::vector<std::pair<cplx, int>> div;
  for (const auto& d : finite_) {
    if (std::abs(d.point) < 1e-300) continue;  // 0 goes to infinity in the w chart
    c *= ipow(-d.point, d.order);
    div.push_back({1.0 / d.point, d.order});
  }
  if (order_infinity_ != 0) div.push_back({0.0, order_infinity_});
  return QuadDifferential(c, div);
}

// ---------------------------------------------------------------------------

LocalStructure classify_local_structure(const QuadDifferential& Q, const CriticalPoint& c) {
  LocalStructure s;
  int n = c.order;
  if (n >= 0) {  // regular point or zero of order n
    s.emanating_trajectories = (n == 0) ? 0 : n + 2;
    for (int k = 1; k < 2 * (n + 2); k++) s.admissible_angles.push_back(pi * k / (n + 2));
    return s;
  }
  if (n == -1) {
    s.emanating_trajectories = 1;
    s.admissible_angles = {pi};
    return s;
  }
  if (n == -2) {
    s.emanating_trajectories = 0;
    cplx a = Q.order2_coefficient(c);
    double ph = std::arg(a);
    if (std::abs(ph) < 1e-9)
      s.pole2_tag = Pole2Structure::radial;
    else if (std::abs(std::abs(ph) - pi) < 1e-9)
      s.pole2_tag = Pole2Structure::circular;
    else
      s.pole2_tag = Pole2Structure::spiral;
    return s;
  }
  int m = -n;  // pole of order m >= 3
  s.emanating_trajectories = m - 2;
  for (int k = 0; k <= 2 * (m - 2); k++) s.admissible_angles.push_back(pi * k / (m - 2));
  return s;
}

int boundary_order_map(int zeta_order, int angle_num, int angle_den, Side /*side*/) {
  if (angle_den <= 0) throw std::domain_error("boundary_order_map: bad angle denominator");
  int g = std::gcd(std::abs(angle_num), angle_den);
  if (g > 0) {
    angle_num /= g;
    angle_den /= g;
  }
  if (zeta_order == -2) return -2;  // any corner angle (or a spiral approach)
  if (zeta_order >= -1) {
    // angle = pi k / (n+2)  ->  order k - 2
    long long num = (long long)angle_num * (zeta_order + 2);
    if (num % angle_den != 0) throw std::domain_error("boundary_order_map: uncataloged angle");
    long long k = num / angle_den;
    if (k < 1 || k > 2 * zeta_order + 3)
      throw std::domain_error("boundary_order_map: angle outside catalog range");
    return int(k) - 2;
  }
  int m = -zeta_order;  // pole order m >= 3: angle = pi k/(m-2) -> order -(k+2)
  long long num = (long long)angle_num * (m - 2);
  if (num % angle_den != 0) throw std::domain_error("boundary_order_map: uncataloged angle");
  long long k = num / angle_den;
  if (k < 0 || k > 2 * (m - 2))
    throw std::domain_error("boundary_order_map: angle outside catalog range");
  return -(int(k) + 2);
}

// ---------------------------------------------------------------------------
// Trajectory tracing

namespace {

struct ChartState {
  int chart = 0;  // 0: z plane, 1: w = 1/z
  cplx pos;
  cplx ref_dir;
};

struct StopRecord {
  enum class Reason { none, guard, closure, chart_switch, budget } reason = Reason::none;
  cplx guard_point;
  int guard_order = 0;
};

}  // namespace

std::vector<double> critical_ray_angles(const QuadDifferential& Q, const CriticalPoint& c) {
  if (!c.finite_kind()) throw std::invalid_argument("critical_ray_angles: infinite critical point");
  int n = c.order;
  cplx a = Q.order2_coefficient(c);  // leading coefficient of (z - c)^n
  double base = -std::arg(a) / (n + 2);
  std::vector<double> out;
  for (int k = 0; k < n + 2; k++) out.push_back(base + two_pi * k / (n + 2));
  return out;
}

namespace {

double ray_stub_q_length(const QuadDifferential& Q, cplx from, cplx to, int order_at_from) {
  // q-length of the segment [from, to] where `from` is a critical point of the
  // given order; the integrand behaves like r^{order/2} there.
  double d = std::abs(to - from);
  if (d == 0) return 0.0;
  cplx dir = (to - from) / d;
  auto f = [&](double t) { return cplx(std::sqrt(std::abs(Q.eval(from + t * dir))), 0.0); };
  return adaptive_integral(f, 0.0, d, 1e-13, EndpointPower{order_at_from / 2.0}).value.real();
}

TrajectoryArc trace_impl(const QuadDifferential& Q, cplx start, ArcKind kind, cplx init_dir,
                         const TraceOptions& opts, const CriticalPoint* start_vertex) {
  QuadDifferential Qw = Q.infinity_chart();
  const QuadDifferential* charts[2] = {&Q, &Qw};
  const double R_switch = 2.0 * Q.global_scale() + 2.0;

  auto critical_sites = [&](int chart) {
    std::vector<std::pair<cplx, double>> sites;  // (location, guard radius)
    for (const auto& d : charts[chart]->finite_divisor()) {
      double guard = opts.guard_factor * charts[chart]->local_scale(d.point);
      sites.push_back({d.point, std::max(guard, 1e-13)});
    }
    return sites;
  };
  std::vector<std::pair<cplx, double>> sites[2] = {critical_sites(0), critical_sites(1)};

  ChartState st;
  st.chart = 0;
  st.pos = start;
  st.ref_dir = init_dir;

  TrajectoryArc arc;
  arc.kind = kind;
  std::vector<cplx> plane_pts;
  std::vector<double> plane_prm;
  auto append_plane = [&](cplx p) {
    if (!plane_pts.empty()) {
      double step = std::abs(p - plane_pts.back());
      if (step < 1e-15) return;
      plane_prm.push_back(plane_prm.back() + step);
    } else {
      plane_prm.push_back(0.0);
    }
    plane_pts.push_back(p);
  };
  if (start_vertex && !start_vertex->at_infinity) append_plane(start_vertex->location);

  double q_len = 0.0;
  double total_s = 0.0;
  bool done = false;

  for (int leg = 0; leg < 64 && !done; leg++) {
    const QuadDifferential& Qc = *charts[st.chart];
    auto ref_ptr = std::make_shared<cplx>(st.ref_dir);
    auto field = [&Qc, kind, ref_ptr](cplx z) {
      cplx q = Qc.eval(z);
      cplx d = std::polar(1.0, -std::arg(q) / 2.0);
      if (kind == ArcKind::orthogonal) d *= cplx(0, 1);
      if (std::real(d * std::conj(*ref_ptr)) < 0) d = -d;
      *ref_ptr = d;
      return d;
    };

    StopRecord rec;
    const double min_travel = 20.0 * opts.closure_tol + 1e-3;
    int chart_here = st.chart;
    bool first_chart = (chart_here == 0);
    const double h_max = opts.max_step > 0 ? opts.max_step : 0.05 * (Q.global_scale() + 1.0);
    bool closing_mode = false;
    auto stop = [&](double s, cplx z) {
      if (total_s + s > opts.max_length) {
        rec.reason = StopRecord::Reason::budget;
        return true;
      }
      for (const auto& [site, guard] : sites[chart_here]) {
        if (std::abs(z - site) < guard) {
          rec.reason = StopRecord::Reason::guard;
          rec.guard_point = site;
          rec.guard_order = charts[chart_here]->order_at(site, guard * 2);
          return true;
        }
      }
      if (first_chart && total_s + s > min_travel) {
        double dist = std::abs(z - start);
        if (dist < opts.closure_tol) {
          rec.reason = StopRecord::Reason::closure;
          return true;
        }
        // shrink steps toward the start once the trajectory comes back around
        if (!closing_mode && dist < 0.6 * h_max) closing_mode = true;
        if (closing_mode && dist > 1.5 * h_max) closing_mode = false;
      }
      if (std::abs(z) > R_switch && s > 0) {
        rec.reason = StopRecord::Reason::chart_switch;
        return true;
      }
      return false;
    };

    OdeOptions ode;
    ode.rel_tol = opts.step_tol;
    ode.abs_tol = opts.step_tol * 1e-2;
    ode.max_steps = opts.max_steps;
    ode.max_step = h_max;
    ode.step_limit = [&](cplx z) {
      double cap = ode.max_step;
      for (const auto& [site, guard] : sites[chart_here])
        cap = std::min(cap, std::max(0.25 * std::abs(z - site), 0.5 * guard));
      if (closing_mode)
        cap = std::min(cap, std::max(0.3 * std::abs(z - start), 0.3 * opts.closure_tol));
      return cap;
    };

    auto q_integrand = [&Qc](cplx z) { return std::sqrt(std::abs(Qc.eval(z))); };
    double leg_quad = 0.0;
    PathSample seg = trace_ode(field, st.pos, stop, ode, q_integrand, &leg_quad);
    q_len += leg_quad;
    total_s += seg.params.back();

    for (std::size_t i = (leg == 0 ? 0 : 1); i < seg.size(); i++) {
      cplx p = seg.points[i];
      if (chart_here == 1) {
        if (std::abs(p) < 1e-8) {
          arc.passes_infinity = true;
          continue;
        }
        p = 1.0 / p;
      }
      append_plane(p);
    }

    cplx leg_end = seg.back();
    if (seg.size() >= 2) {
      cplx d = seg.points[seg.size() - 1] - seg.points[seg.size() - 2];
      if (std::abs(d) > 0) st.ref_dir = d / std::abs(d);
    }
    st.pos = leg_end;

    switch (rec.reason) {
      case StopRecord::Reason::guard: {
        CriticalPoint cp;
        cp.order = rec.guard_order;
        if (chart_here == 0) {
          cp.location = rec.guard_point;
        } else if (std::abs(rec.guard_point) < 1e-12) {
          cp.location = 0.0;
          cp.at_infinity = true;
        } else {
          cp.location = 1.0 / rec.guard_point;
        }
        arc.endpoint = cp;
        arc.termination = ArcTermination::critical_point;
        q_len += ray_stub_q_length(*charts[chart_here], rec.guard_point, leg_end, rec.guard_order);
        if (!cp.at_infinity) append_plane(cp.location);
        done = true;
        break;
      }
      case StopRecord::Reason::closure: {
        arc.termination = ArcTermination::closed;
        q_len += std::sqrt(std::abs(Qc.eval(leg_end))) * std::abs(start - leg_end);
        append_plane(start);
        done = true;
        break;
      }
      case StopRecord::Reason::chart_switch: {
        cplx z = st.pos;
        st.chart = 1 - st.chart;
        st.pos = 1.0 / z;
        cplx nd = -st.ref_dir / (z * z);
        st.ref_dir = nd / std::abs(nd);
        break;
      }
      case StopRecord::Reason::budget:
      case StopRecord::Reason::none:
        arc.termination = ArcTermination::budget_exhausted;
        done = true;
        break;
    }
  }

  if (plane_pts.size() < 2) append_plane(start + 1e-12);
  arc.path = PathSample(std::move(plane_pts), std::move(plane_prm));
  arc.q_length = q_len;
  return arc;
}

}  // namespace

TrajectoryArc trace_trajectory(const QuadDifferential& Q, cplx start, ArcKind kind, int direction,
                               const TraceOptions& opts) {
  cplx q = Q.eval(start);
  if (std::abs(q) < 1e-250)
    throw std::invalid_argument("trace_trajectory: start is a critical point");
  cplx d = std::polar(1.0, -std::arg(q) / 2.0);
  if (kind == ArcKind::orthogonal) d *= cplx(0, 1);
  if (direction < 0) d = -d;
  return trace_impl(Q, start, kind, d, opts, nullptr);
}

TrajectoryArc trace_critical_trajectory(const QuadDifferential& Q, const CriticalPoint& from,
                                        int ray_index, const TraceOptions& opts) {
  auto rays = critical_ray_angles(Q, from);
  double phi = rays.at(ray_index);
  double r0 = std::max(opts.seed_offset * Q.local_scale(from.location), 1e-12);
  cplx seed = from.location + std::polar(r0, phi);
  TrajectoryArc arc = trace_impl(Q, seed, ArcKind::trajectory, std::polar(1.0, phi), opts, &from);
  arc.q_length += ray_stub_q_length(Q, from.location, seed, from.order);
  return arc;
}

// ---------------------------------------------------------------------------

QLengthResult q_length(const QuadDifferential& Q, const PathSample& arc, double tol) {
  arc.validate();
  const double snap = 1e-7 * (1.0 + Q.global_scale());
  // endpoint orders
  int order_front = Q.order_at(arc.front(), snap);
  int order_back = Q.order_at(arc.back(), snap);
  if (order_front <= -2 || order_back <= -2) return {0.0, true};

  // interior poles are integration errors
  for (const auto& d : Q.finite_divisor()) {
    if (d.order >= 0) continue;
    for (std::size_t i = 1; i + 1 < arc.size(); i++) {
      if (std::abs(arc.points[i] - d.point) < snap)
        throw IntegrationError("q_length: pole in the interior of the arc", arc.params[i],
                               arc.params[i]);
    }
  }

  auto integrand = [&](double t) {
    return cplx(std::sqrt(std::abs(Q.eval(arc.at(t)))) * std::abs(arc.tangent_at(t)), 0.0);
  };

  double total = 0.0;
  const auto& prm = arc.params;
  std::size_t nseg = arc.size() - 1;
  double seg_tol = tol / double(nseg);
  for (std::size_t i = 0; i < nseg; i++) {
    std::optional<EndpointPower> sa, sb;
    if (i == 0 && order_front != 0) sa = EndpointPower{order_front / 2.0};
    if (i == nseg - 1 && order_back != 0) sb = EndpointPower{order_back / 2.0};
    total += adaptive_integral(integrand, prm[i], prm[i + 1], std::max(seg_tol, 1e-14), sa, sb)
                 .value.real();
  }
  return {total, false};
}

QLengthResult circle_arc_q_length(const QuadDifferential& Q, double t1, double t2, double tol) {
  if (t2 <= t1) throw std::invalid_argument("circle_arc_q_length: empty arc");
  auto order_at_angle = [&](double t) {
    return Q.order_at(std::polar(1.0, t), 1e-9);
  };
  int m1 = order_at_angle(t1), m2 = order_at_angle(t2);
  if (m1 <= -2 || m2 <= -2) return {0.0, true};
  auto f = [&](double t) { return cplx(std::sqrt(std::abs(Q.eval(std::polar(1.0, t)))), 0.0); };
  // interior circle divisor points split the integration range
  std::vector<double> knots{t1, t2};
  for (const auto& d : Q.finite_divisor()) {
    if (std::abs(std::abs(d.point) - 1.0) > 1e-9) continue;
    double a = std::arg(d.point);
    for (double shift : {-two_pi, 0.0, two_pi}) {
      double t = a + shift;
      if (t > t1 + 1e-12 && t < t2 - 1e-12) {
        if (d.order <= -1)
          throw IntegrationError("circle_arc_q_length: pole inside the arc", t, t);
        knots.push_back(t);
      }
    }
  }
  std::sort(knots.begin(), knots.end());
  double total = 0;
  for (std::size_t i = 0; i + 1 < knots.size(); i++) {
    std::optional<EndpointPower> sa, sb;
    int ma = order_at_angle(knots[i]), mb = order_at_angle(knots[i + 1]);
    if (ma != 0) sa = EndpointPower{ma / 2.0};
    if (mb != 0) sb = EndpointPower{mb / 2.0};
    total += adaptive_integral(f, knots[i], knots[i + 1], tol / double(knots.size()), sa, sb)
                 .value.real();
  }
  return {total, false};
}

// ---------------------------------------------------------------------------

bool is_circle_symmetric(const QuadDifferential& Q, double tol) {
  // divisor symmetric under z -> 1/conj(z)
  const auto& div = Q.finite_divisor();
  for (const auto& d : div) {
    double r = std::abs(d.point);
    if (std::abs(r - 1.0) < 1e-9) continue;
    if (r < 1e-12) {
      if (Q.order_at_infinity() != d.order) return false;
      continue;
    }
    cplx mirror = 1.0 / std::conj(d.point);
    bool found = false;
    for (const auto& e : div)
      if (std::abs(e.point - mirror) < 1e-9 * (1.0 + std::abs(mirror)) && e.order == d.order)
        found = true;
    if (!found) return false;
  }
  if (Q.order_at_infinity() != 0 && Q.order_at(0.0, 1e-12) != Q.order_at_infinity()) return false;

  // real along the circle away from divisor points
  for (int i = 0; i < 64; i++) {
    double theta = two_pi * (i + 0.431) / 64.0;
    cplx z = std::polar(1.0, theta);
    bool near = false;
    for (const auto& d : div)
      if (std::abs(z - d.point) < 1e-3) near = true;
    if (near) continue;
    cplx v = Q.eval_on_circle_dz2(theta);
    if (std::abs(std::imag(v)) > tol * (1.0 + std::abs(v))) return false;
  }
  return true;
}

CircleArcSystem circle_decomposition(const QuadDifferential& Q) {
  if (!is_circle_symmetric(Q))
    throw SymmetryError("circle_decomposition: differential is not circle-symmetric");

  struct CirclePoint {
    double theta;
    cplx point;
    int order;
  };
  std::vector<CirclePoint> endpoints, even_zeros;
  for (const auto& d : Q.finite_divisor()) {
    if (std::abs(std::abs(d.point) - 1.0) > 1e-9) continue;
    CirclePoint cp{wrap_angle(std::arg(d.point)), d.point, d.order};
    bool odd = (std::abs(d.order) % 2) == 1;
    if (odd || d.order <= -2)
      endpoints.push_back(cp);
    else
      even_zeros.push_back(cp);
  }
  std::sort(endpoints.begin(), endpoints.end(),
            [](const CirclePoint& a, const CirclePoint& b) { return a.theta < b.theta; });

  auto sign_at = [&](double theta) {
    cplx v = Q.eval_on_circle_dz2(theta);
    if (std::abs(std::imag(v)) > 1e-6 * (1.0 + std::abs(v)))
      throw SymmetryError("circle_decomposition: differential not real on circle sample");
    return std::real(v) >= 0 ? +1 : -1;
  };
  auto good_sample = [&](double a, double b) {
    // pick a probe angle inside (a, b) away from interior even zeros
    double best = 0.5 * (a + b);
    double best_dist = -1.0;
    for (int i = 1; i <= 7; i++) {
      double t = a + (b - a) * i / 8.0;
      double dist = 1e9;
      for (const auto& z : even_zeros) {
        double d = std::abs(std::remainder(t - z.theta, two_pi));
        dist = std::min(dist, d);
      }
      if (dist > best_dist) {
        best_dist = dist;
        best = t;
      }
    }
    return best;
  };

  CircleArcSystem sys;
  if (endpoints.empty()) {
    CircleArc arc;
    arc.theta_start = 0.0;
    arc.theta_end = two_pi;
    arc.sign = sign_at(good_sample(0.0, two_pi));
    for (const auto& z : even_zeros) arc.interior_even_zeros.push_back(z.theta);
    std::sort(arc.interior_even_zeros.begin(), arc.interior_even_zeros.end());
    sys.arcs.push_back(arc);
    return sys;
  }

  std::size_t k = endpoints.size();
  for (std::size_t j = 0; j < k; j++) {
    const CirclePoint& zj = endpoints[j];
    const CirclePoint& zj1 = endpoints[(j + 1) % k];
    CircleArc arc;
    arc.theta_start = zj.theta;
    arc.theta_end = zj1.theta + (j + 1 == k ? two_pi : 0.0);
    if (arc.theta_end <= arc.theta_start) arc.theta_end += two_pi;
    arc.start_point = zj.point;
    arc.end_point = zj1.point;
    arc.start_type = zj.order >= -1 ? EndpointType::finite_critical : EndpointType::infinite_critical;
    arc.end_type = zj1.order >= -1 ? EndpointType::finite_critical : EndpointType::infinite_critical;
    arc.sign = sign_at(good_sample(arc.theta_start, arc.theta_end));
    for (const auto& z : even_zeros) {
      double t = z.theta;
      while (t < arc.theta_start) t += two_pi;
      if (t < arc.theta_end) arc.interior_even_zeros.push_back(t);
    }
    std::sort(arc.interior_even_zeros.begin(), arc.interior_even_zeros.end());
    sys.arcs.push_back(arc);
  }

  // two-type rule: the sign changes across z_j exactly when its order is odd
  for (std::size_t j = 0; j < k; j++) {
    const CircleArc& prev = sys.arcs[(j + k - 1) % k];
    const CircleArc& next = sys.arcs[j];
    bool changes = prev.sign != next.sign;
    bool odd = std::abs(endpoints[j].order) % 2 == 1;
    if (changes != odd)
      throw SymmetryError("circle_decomposition: endpoint parity inconsistent with signs");
  }
  return sys;
}

QuadDifferential reflect_extend(const QuadDifferential& disk_qd) {
  std::vector<std::pair<cplx, int>> div;
  for (const auto& d : disk_qd.finite_divisor()) {
    double r = std::abs(d.point);
    if (r > 1.0 + 1e-9)
      throw ReflectionError("reflect_extend: divisor point outside the closed disk");
    div.push_back({d.point, d.order});
    if (r < 1.0 - 1e-9 && r > 1e-12) div.push_back({1.0 / std::conj(d.point), d.order});
  }
  QuadDifferential sym(disk_qd.constant(), div);

  // the symmetric pairing forces order(infinity) == order(0)
  if (sym.order_at_infinity() != sym.order_at(0.0, 1e-12))
    throw ReflectionError("reflect_extend: divisor degrees incompatible with circle symmetry");

  // rotate the constant so Q dz^2 is real along the circle
  double probe = 0.0;
  double best_dist = -1.0;
  for (int i = 0; i < 257; i++) {
    double t = two_pi * i / 257.0;
    double dist = 1e9;
    for (const auto& d : sym.finite_divisor())
      if (std::abs(std::abs(d.point) - 1.0) < 1e-9)
        dist = std::min(dist, std::abs(std::remainder(t - std::arg(d.point), two_pi)));
    if (dist > best_dist) {
      best_dist = dist;
      probe = t;
    }
  }
  cplx v = sym.eval_on_circle_dz2(probe);
  QuadDifferential out = sym.scaled(std::polar(1.0, -std::arg(v)));
  if (!is_circle_symmetric(out))
    throw ReflectionError("reflect_extend: boundary reality condition violated");
  return out;
}

}  // namespace qdw
