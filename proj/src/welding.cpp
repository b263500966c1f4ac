#include "qdweld/welding.hpp"

#include <algorithm>
#include <cmath>

namespace qdw {

// ---------------------------------------------------------------------------
// CumulativeQLength

CumulativeQLength::CumulativeQLength(const QuadDifferential& Q, double lo, double hi, double ref)
    : Q_(&Q), lo_(lo), hi_(hi), ref_(ref) {
  if (!(lo <= ref && ref <= hi)) throw std::invalid_argument("CumulativeQLength: ref outside arc");
  double width = hi - lo;
  auto order_at_angle = [&](double t) { return Q.order_at(std::polar(1.0, t), 1e-9); };
  int m_lo = order_at_angle(lo), m_hi = order_at_angle(hi);

  double cap = 1e-9 * width;
  lo_cap_ = (m_lo <= -2) ? lo + cap : lo;
  hi_cap_ = (m_hi <= -2) ? hi - cap : hi;

  // knots: uniform base grid, geometric clusters toward capped (infinite)
  // endpoints, and interior circle divisor points. Finite singular endpoints
  // need no clustering; the endpoint-power substitution handles them.
  std::vector<double> ks;
  int base = 48;
  for (int i = 0; i <= base; i++) ks.push_back(lo_cap_ + (hi_cap_ - lo_cap_) * i / base);
  auto cluster = [&](double endpoint, int dir) {
    double d = width * 0.25;
    for (int j = 0; j < 40; j++) {
      double t = endpoint + dir * d;
      if (t > lo_cap_ && t < hi_cap_) ks.push_back(t);
      d *= 0.52;
      if (d < cap * 0.5) break;
    }
  };
  if (m_lo <= -2) cluster(lo_cap_, +1);
  if (m_hi <= -2) cluster(hi_cap_, -1);
  for (const auto& d : Q.finite_divisor()) {
    if (std::abs(std::abs(d.point) - 1.0) > 1e-9) continue;
    double a = std::arg(d.point);
    for (double shift : {-two_pi, 0.0, two_pi}) {
      double t = a + shift;
      if (t > lo_ + 1e-12 && t < hi_ - 1e-12) {
        if (d.order < 0)
          throw IntegrationError("CumulativeQLength: pole inside the arc", t, t);
        ks.push_back(t);
      }
    }
  }
  ks.push_back(ref);
  std::sort(ks.begin(), ks.end());
  knots_.clear();
  for (double t : ks) {
    if (!knots_.empty() && t - knots_.back() < 1e-13 * (1.0 + width)) continue;
    knots_.push_back(t);
  }

  // signed cumulative from ref
  std::size_t ref_idx = std::lower_bound(knots_.begin(), knots_.end(), ref) - knots_.begin();
  if (ref_idx >= knots_.size() || std::abs(knots_[ref_idx] - ref) > 1e-12)
    throw std::logic_error("CumulativeQLength: reference knot lost");
  cum_.assign(knots_.size(), 0.0);
  for (std::size_t i = ref_idx; i + 1 < knots_.size(); i++)
    cum_[i + 1] = cum_[i] + integrate(knots_[i], knots_[i + 1]);
  for (std::size_t i = ref_idx; i > 0; i--)
    cum_[i - 1] = cum_[i] - integrate(knots_[i - 1], knots_[i]);
}

double CumulativeQLength::integrate(double a, double b) const {
  if (b <= a) return 0.0;
  auto f = [&](double t) { return cplx(std::sqrt(std::abs(Q_->eval(std::polar(1.0, t)))), 0.0); };
  auto order_at_angle = [&](double t) { return Q_->order_at(std::polar(1.0, t), 1e-9); };
  std::optional<EndpointPower> sa, sb;
  int ma = order_at_angle(a), mb = order_at_angle(b);
  if (ma != 0 && ma >= -1) sa = EndpointPower{ma / 2.0};
  if (mb != 0 && mb >= -1) sb = EndpointPower{mb / 2.0};
  return adaptive_integral(f, a, b, 1e-12 * (1.0 + b - a), sa, sb).value.real();
}

double CumulativeQLength::eval(double theta) const {
  theta = std::clamp(theta, lo_cap_, hi_cap_);
  auto it = std::upper_bound(knots_.begin(), knots_.end(), theta);
  std::size_t i = std::max<std::ptrdiff_t>(1, it - knots_.begin()) - 1;
  return cum_[i] + integrate(knots_[i], theta);
}

double CumulativeQLength::inverse(double length) const {
  if (length <= cum_.front()) return lo_cap_;
  if (length >= cum_.back()) return hi_cap_;
  auto it = std::upper_bound(cum_.begin(), cum_.end(), length);
  std::size_t i = std::max<std::ptrdiff_t>(1, it - cum_.begin()) - 1;
  auto F = [&](double t) { return cum_[i] + integrate(knots_[i], t); };
  double tol = 1e-12 * (1.0 + std::abs(length));
  return invert_monotone(F, knots_[i], knots_[i + 1], length, tol);
}

// ---------------------------------------------------------------------------
// Coordination

namespace {

struct ArcLengthInfo {
  bool finite;
  double value;
};

ArcLengthInfo arc_length(const QuadDifferential& Q, const CircleArc& arc) {
  bool fin = true;
  if (arc.start_type && *arc.start_type == EndpointType::infinite_critical) fin = false;
  if (arc.end_type && *arc.end_type == EndpointType::infinite_critical) fin = false;
  if (!fin) return {false, 0.0};
  auto r = circle_arc_q_length(Q, arc.theta_start, arc.theta_end, 1e-10);
  return {!r.infinite, r.value};
}

}  // namespace

CoordinationResult check_coordinated(const QuadDifferential& q_minus,
                                     const QuadDifferential& q_plus, double tol) {
  CoordinationResult res;
  CircleArcSystem am = circle_decomposition(q_minus);
  CircleArcSystem ap = circle_decomposition(q_plus);
  std::size_t k = am.arcs.size();
  if (ap.arcs.size() != k) {
    res.failure = CoordinationFailure{CoordinationFailure::Condition::arc_count, -1,
                                      double(k), double(ap.arcs.size()),
                                      "arc systems have different sizes"};
    return res;
  }

  std::vector<ArcLengthInfo> len_m(k), len_p(k);
  for (std::size_t j = 0; j < k; j++) {
    len_m[j] = arc_length(q_minus, am.arcs[j]);
    len_p[j] = arc_length(q_plus, ap.arcs[j]);
  }

  CoordinationFailure last_failure{CoordinationFailure::Condition::arc_count, -1, 0, 0, ""};
  for (std::size_t offset = 0; offset < k; offset++) {
    bool ok = true;
    for (std::size_t j = 0; j < k && ok; j++) {
      const CircleArc& a = am.arcs[j];
      const CircleArc& b = ap.arcs[(j + offset) % k];
      if (a.sign != b.sign) {
        last_failure = {CoordinationFailure::Condition::sign_match, int(j), double(a.sign),
                        double(b.sign), "arc signs differ"};
        ok = false;
        break;
      }
      bool a_inf = a.start_type && *a.start_type == EndpointType::infinite_critical;
      bool b_inf = b.start_type && *b.start_type == EndpointType::infinite_critical;
      if (a.start_type.has_value() != b.start_type.has_value() || a_inf != b_inf) {
        last_failure = {CoordinationFailure::Condition::endpoint_type, int(j), double(a_inf),
                        double(b_inf), "endpoint types differ"};
        ok = false;
        break;
      }
      const ArcLengthInfo& lm = len_m[j];
      const ArcLengthInfo& lp = len_p[(j + offset) % k];
      if (lm.finite != lp.finite) {
        last_failure = {CoordinationFailure::Condition::q_length, int(j), lm.value, lp.value,
                        "one arc length finite, the other infinite"};
        ok = false;
        break;
      }
      if (lm.finite && std::abs(lm.value - lp.value) > tol * (1.0 + std::abs(lm.value))) {
        last_failure = {CoordinationFailure::Condition::q_length, int(j), lm.value, lp.value,
                        "finite arc lengths differ"};
        ok = false;
        break;
      }
    }
    if (ok) {
      CoordinatedPair pair{q_minus, q_plus, am, ap, int(offset), {}, {}, {}};
      // rotate the plus system so indices align
      CircleArcSystem rotated;
      for (std::size_t j = 0; j < k; j++) rotated.arcs.push_back(ap.arcs[(j + offset) % k]);
      pair.arcs_plus = rotated;
      res.pair = pair;
      return res;
    }
  }
  res.failure = last_failure;
  return res;
}

CoordinatedPair choose_representatives(CoordinatedPair pair,
                                       const std::vector<RepresentativeOverride>& overrides) {
  std::size_t k = pair.arcs_minus.arcs.size();
  pair.rep_minus.assign(k, 0.0);
  pair.rep_plus.assign(k, 0.0);
  pair.rep_free.assign(k, false);
  for (std::size_t j = 0; j < k; j++) {
    const CircleArc& a = pair.arcs_minus.arcs[j];
    const CircleArc& b = pair.arcs_plus.arcs[j];
    if (!a.start_type) {  // whole circle
      pair.rep_minus[j] = 0.0;
      pair.rep_plus[j] = 0.0;
      pair.rep_free[j] = true;
      continue;
    }
    bool start_finite = *a.start_type == EndpointType::finite_critical;
    bool end_finite = *a.end_type == EndpointType::finite_critical;
    if (start_finite) {
      pair.rep_minus[j] = a.theta_start;
      pair.rep_plus[j] = b.theta_start;
    } else if (end_finite) {
      pair.rep_minus[j] = a.theta_end;
      pair.rep_plus[j] = b.theta_end;
    } else {
      pair.rep_minus[j] = 0.5 * (a.theta_start + a.theta_end);
      pair.rep_plus[j] = 0.5 * (b.theta_start + b.theta_end);
      pair.rep_free[j] = true;
    }
  }
  for (const auto& ov : overrides) {
    if (ov.arc_index < 0 || ov.arc_index >= int(k))
      throw std::out_of_range("representative override: bad arc index");
    if (!pair.rep_free[ov.arc_index]) continue;  // forced representatives win
    const CircleArc& a = pair.arcs_minus.arcs[ov.arc_index];
    const CircleArc& b = pair.arcs_plus.arcs[ov.arc_index];
    auto place = [&](const CircleArc& arc, double angle) {
      if (!arc.start_type) return angle;  // whole circle: any angle
      double t = angle;
      while (t < arc.theta_start) t += two_pi;
      while (t > arc.theta_start + two_pi) t -= two_pi;
      if (t <= arc.theta_start || t >= arc.theta_end)
        throw std::domain_error("representative override outside its arc");
      return t;
    };
    if (ov.minus_angle) pair.rep_minus[ov.arc_index] = place(a, *ov.minus_angle);
    if (ov.plus_angle) pair.rep_plus[ov.arc_index] = place(b, *ov.plus_angle);
  }
  return pair;
}

// ---------------------------------------------------------------------------
// Welding

namespace {

// matches one aligned arc pair from the representatives outward
struct ArcMatch {
  ArcMatchTable table;
  std::vector<double> slopes;  // d psi / d theta, NaN where not available
};

ArcMatch match_arc(const QuadDifferential& qm, const QuadDifferential& qp, const CircleArc& am,
                   const CircleArc& ap, double rm, double rp, int samples) {
  bool whole = !am.start_type.has_value();
  double lo_m = whole ? rm : am.theta_start;
  double hi_m = whole ? rm + two_pi : am.theta_end;
  double lo_p = whole ? rp : ap.theta_start;
  double hi_p = whole ? rp + two_pi : ap.theta_end;
  double rm2 = rm;
  while (rm2 < lo_m) rm2 += two_pi;
  double rp2 = rp;
  while (rp2 < lo_p) rp2 += two_pi;

  CumulativeQLength sm(qm, lo_m, hi_m, rm2);
  CumulativeQLength sp(qp, lo_p, hi_p, rp2);

  double fwd = std::min(sm.total_forward(), sp.total_forward());
  double bwd = std::max(sm.total_backward(), sp.total_backward());

  ArcMatch out;
  auto& table = out.table;
  // identification rule differentiated: k' = |Q_-(z)|^{1/2} / |Q_+(k(z))|^{1/2}
  auto slope_at = [&](double th, double ps) {
    try {
      double qmv = std::abs(qm.eval(std::polar(1.0, th)));
      double qpv = std::abs(qp.eval(std::polar(1.0, ps)));
      if (qmv > 1e-200 && qpv > 1e-200) {
        double r = std::sqrt(qmv) / std::sqrt(qpv);
        if (std::isfinite(r) && r > 1e-8 && r < 1e8) return r;
      }
    } catch (const PoleError&) {
    }
    return std::nan("");
  };
  auto push = [&](double th, double ps) {
    if (!table.theta.empty() && !(th > table.theta.back() + 1e-14)) return;
    table.theta.push_back(th);
    table.psi.push_back(ps);
    out.slopes.push_back(slope_at(th, ps));
  };

  auto order_at = [](const QuadDifferential& Q, double t) {
    return Q.order_at(std::polar(1.0, t), 1e-9);
  };
  // cubic grading toward endpoints that carry divisor points
  auto side_grid = [&](double from, double to, int n, std::vector<double>& g) {
    bool graded = order_at(qm, to) != 0 || !whole;
    for (int i = 1; i <= n; i++) {
      double u = double(i) / n;
      double frac = graded ? u * u * u : u;
      g.push_back(from + (to - from) * frac);
    }
  };
  std::vector<double> grid{rm2};
  side_grid(rm2, sm.domain_hi(), std::max(8, samples / 2), grid);
  side_grid(rm2, sm.domain_lo(), std::max(8, samples / 2), grid);
  std::sort(grid.begin(), grid.end());

  push(lo_m, lo_p);  // endpoint pin by continuity
  for (double th : grid) {
    if (th <= lo_m || th >= hi_m) continue;
    double s = sm.eval(th);
    if (s < bwd || s > fwd) continue;
    push(th, sp.inverse(s));
  }
  push(hi_m, hi_p);
  if (table.theta.size() < 4)
    throw CoordinationViolation("match_arc: degenerate matching table");
  return out;
}

}  // namespace

WeldingResult welding_fingerprint(const CoordinatedPair& pair, int samples_per_arc) {
  std::size_t k = pair.arcs_minus.arcs.size();
  if (pair.rep_minus.size() != k)
    throw std::invalid_argument("welding_fingerprint: representatives not chosen");

  WeldingResult out;
  out.rep_minus = pair.rep_minus;
  out.rep_plus = pair.rep_plus;

  std::vector<std::vector<double>> arc_slopes;
  for (std::size_t j = 0; j < k; j++) {
    ArcMatch t = match_arc(pair.q_minus, pair.q_plus, pair.arcs_minus.arcs[j],
                           pair.arcs_plus.arcs[j], pair.rep_minus[j], pair.rep_plus[j],
                           samples_per_arc);
    out.arc_tables.push_back(t.table);
    arc_slopes.push_back(t.slopes);
  }

  // assemble a single monotone table over one period
  std::vector<double> thetas, psis, slopes;
  double theta_abs = out.arc_tables[0].theta.front();
  double psi_abs = out.arc_tables[0].psi.front();
  for (std::size_t j = 0; j < k; j++) {
    const ArcMatchTable& t = out.arc_tables[j];
    double th_shift = theta_abs - t.theta.front();
    double ps_shift = psi_abs - t.psi.front();
    for (std::size_t i = 0; i < t.theta.size(); i++) {
      double th = t.theta[i] + th_shift;
      double ps = t.psi[i] + ps_shift;
      if (!thetas.empty() && !(th > thetas.back() + 1e-13 && ps > psis.back() + 1e-13)) continue;
      thetas.push_back(th);
      psis.push_back(ps);
      slopes.push_back(arc_slopes[j][i]);
    }
    theta_abs = t.theta.back() + th_shift;
    psi_abs = t.psi.back() + ps_shift;
  }
  // drop the final wrap entry (first point + 2 pi)
  while (!thetas.empty() && thetas.back() >= thetas.front() + two_pi - 1e-12) {
    thetas.pop_back();
    psis.pop_back();
    slopes.pop_back();
  }
  double wind_theta = theta_abs - thetas.front();
  double wind_psi = psi_abs - psis.front();
  if (std::abs(wind_theta - two_pi) > 1e-6 || std::abs(wind_psi - two_pi) > 1e-6)
    throw CoordinationViolation("welding_fingerprint: matched tables do not wind by 2 pi");

  out.fingerprint = Fingerprint(thetas, psis, 0.0, slopes);
  out.residual = residual_transformation_rule(out.fingerprint, pair.q_minus, pair.q_plus);
  return out;
}

double residual_transformation_rule(const Fingerprint& k, const QuadDifferential& q_minus,
                                    const QuadDifferential& q_plus, int samples) {
  // exclusion windows around critical angles on both sides
  std::vector<double> bad_minus, bad_plus;
  for (const auto& d : q_minus.finite_divisor())
    if (std::abs(std::abs(d.point) - 1.0) < 1e-9) bad_minus.push_back(std::arg(d.point));
  for (const auto& d : q_plus.finite_divisor())
    if (std::abs(std::abs(d.point) - 1.0) < 1e-9) bad_plus.push_back(std::arg(d.point));
  const double window = 0.05;

  double worst = 0;
  for (int i = 0; i < samples; i++) {
    double th = two_pi * i / samples;
    bool skip = false;
    for (double b : bad_minus)
      if (circle_distance(th, b) < window) skip = true;
    double ps = k.eval(th);
    for (double b : bad_plus)
      if (circle_distance(ps, b) < window) skip = true;
    if (skip) continue;
    double kp = k.derivative(th);
    cplx lhs = q_minus.eval_on_circle_dz2(th);
    cplx rhs = q_plus.eval_on_circle_dz2(ps) * kp * kp;
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Lemma-level welding functions

WeldingFunctions qd_welding_functions(const QuadDifferential& q_minus,
                                      const QuadDifferential& q_plus, cplx z0, cplx k_z0,
                                      int samples) {
  for (const auto& d : q_minus.finite_divisor())
    if (std::abs(std::abs(d.point) - 1.0) < 1e-9 && d.order <= -2)
      throw ArcSplitRequired(
          "qd_welding_functions: infinite critical point on the circle; use per-arc welding");
  for (const auto& d : q_plus.finite_divisor())
    if (std::abs(std::abs(d.point) - 1.0) < 1e-9 && d.order <= -2)
      throw ArcSplitRequired(
          "qd_welding_functions: infinite critical point on the circle; use per-arc welding");

  CoordinationResult coord = check_coordinated(q_minus, q_plus);
  if (!coord.ok())
    throw CoordinationViolation("qd_welding_functions: pair is not coordinated: " +
                                coord.failure->message);
  CoordinatedPair pair = *coord.pair;

  double th0 = wrap_angle(std::arg(z0));
  double ps0 = wrap_angle(std::arg(k_z0));
  // anchor the base pair on the arc containing z0 when that representative is free
  std::vector<RepresentativeOverride> ov;
  pair = choose_representatives(pair);
  for (std::size_t j = 0; j < pair.arcs_minus.arcs.size(); j++) {
    const CircleArc& a = pair.arcs_minus.arcs[j];
    double t = th0;
    while (t < a.theta_start) t += two_pi;
    bool inside = !a.start_type || (t > a.theta_start && t < a.theta_end);
    if (inside && pair.rep_free[j]) {
      ov.push_back({int(j), th0, ps0});
      break;
    }
  }
  if (!ov.empty()) pair = choose_representatives(pair, ov);

  WeldingResult weld = welding_fingerprint(pair, std::max(512, samples));

  // cumulative integrals of sqrt(Q) with the per-arc phase convention:
  // real-increasing on trajectory arcs, imaginary-increasing on orthogonal arcs
  auto make_integral = [](const QuadDifferential& Q, const CircleArcSystem& arcs, double base) {
    struct ArcPiece {
      double lo, hi;
      cplx phase;
      std::shared_ptr<CumulativeQLength> cum;
    };
    auto pieces = std::make_shared<std::vector<ArcPiece>>();
    std::size_t k2 = arcs.arcs.size();
    bool whole = !arcs.arcs[0].start_type;
    // start with the arc containing `base` and unwrap angles forward from it
    std::size_t start = 0;
    if (!whole) {
      for (std::size_t j = 0; j < k2; j++) {
        double t = base;
        while (t < arcs.arcs[j].theta_start) t += two_pi;
        if (t <= arcs.arcs[j].theta_end) {
          start = j;
          break;
        }
      }
    }
    double cursor = 0.0;
    for (std::size_t idx = 0; idx < k2; idx++) {
      const CircleArc& a = arcs.arcs[(start + idx) % k2];
      ArcPiece piece;
      if (whole) {
        piece.lo = base;
        piece.hi = base + two_pi;
      } else {
        double lo = a.theta_start;
        if (idx == 0) {
          while (lo > base) lo -= two_pi;
          while (lo + two_pi <= base) lo += two_pi;
        } else {
          while (lo < cursor - 1e-12) lo += two_pi;
          while (lo - two_pi >= cursor - 1e-12) lo -= two_pi;
        }
        piece.lo = lo;
        piece.hi = lo + a.width();
      }
      piece.phase = a.sign > 0 ? cplx(1, 0) : cplx(0, 1);
      double ref = (idx == 0) ? std::clamp(base, piece.lo, piece.hi) : piece.lo;
      piece.cum = std::make_shared<CumulativeQLength>(Q, piece.lo, piece.hi, ref);
      cursor = piece.hi;
      pieces->push_back(piece);
    }
    // offsets make the value 0 at `base` and continuous across arc junctions
    auto offsets = std::make_shared<std::vector<cplx>>(pieces->size(), cplx(0, 0));
    for (std::size_t j = 0; j + 1 < pieces->size(); j++) {
      cplx end_val = (*offsets)[j] + (*pieces)[j].phase * (*pieces)[j].cum->eval((*pieces)[j].hi);
      (*offsets)[j + 1] =
          end_val - (*pieces)[j + 1].phase * (*pieces)[j + 1].cum->eval((*pieces)[j + 1].lo);
    }
    double lo0 = (*pieces)[0].lo;
    return std::function<cplx(double)>([pieces, offsets, lo0](double theta) {
      double t = lo0 + std::fmod(theta - lo0, two_pi);
      if (t < lo0) t += two_pi;
      for (std::size_t j = 0; j < pieces->size(); j++) {
        const auto& p = (*pieces)[j];
        if (t <= p.hi + 1e-12) return (*offsets)[j] + p.phase * p.cum->eval(std::clamp(t, p.lo, p.hi));
      }
      const auto& p = pieces->back();
      return (*offsets)[pieces->size() - 1] + p.phase * p.cum->eval(p.hi);
    });
  };

  WeldingFunctions wf;
  wf.B = make_integral(q_minus, pair.arcs_minus, th0);
  wf.A = make_integral(q_plus, pair.arcs_plus, ps0);
  wf.fingerprint = weld.fingerprint;
  double worst = 0;
  for (int i = 0; i < samples; i++) {
    double t = two_pi * i / samples;
    cplx a = wf.A(weld.fingerprint.eval(t));
    cplx b2 = wf.B(t);
    worst = std::max(worst, std::abs(a - b2));
  }
  wf.equation_residual = worst;
  return wf;
}

}  // namespace qdw
