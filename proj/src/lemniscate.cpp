#include "qdweld/lemniscate.hpp"

#include <algorithm>
#include <cmath>

#include "qdweld/polynomial.hpp"

namespace qdw {

namespace {

JordanCurve arc_to_curve(const PathSample& path) {
  std::vector<cplx> pts = path.points;
  if (std::abs(pts.front() - pts.back()) > 1e-12 * (1.0 + std::abs(pts.front())))
    pts.push_back(pts.front());
  else
    pts.back() = pts.front();
  std::vector<double> prm(pts.size());
  prm[0] = 0;
  for (std::size_t i = 1; i < pts.size(); i++)
    prm[i] = prm[i - 1] + std::max(1e-14, std::abs(pts[i] - pts[i - 1]));
  JordanCurve c;
  c.path = PathSample(pts, prm);
  if (c.signed_area() < 0) {
    std::reverse(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); i++)
      prm[i] = prm[i - 1] + std::max(1e-14, std::abs(pts[i] - pts[i - 1]));
    c.path = PathSample(pts, prm);
  }
  return c;
}

}  // namespace

LemniscateReport trace_level_set(const RationalMap& R, double c, const LevelSetOptions& opts) {
  if (!(c > 0) || !std::isfinite(c))
    throw std::invalid_argument("trace_level_set: level must be positive and finite");
  LemniscateReport rep;
  rep.level = c;

  for (const auto& cp : R.finite_critical_points()) {
    double cv = std::abs(R.eval(cp.point));
    rep.critical_value_distances.push_back(std::abs(cv - c));
  }
  double min_dist = 1e18;
  for (double d : rep.critical_value_distances) min_dist = std::min(min_dist, d);
  rep.analytic = rep.critical_value_distances.empty() || min_dist > opts.critical_value_tol * (1 + c);

  QuadDifferential Q = log_derivative_qd(R);
  TraceOptions topts;
  topts.max_step = opts.trace_max_step * Q.global_scale();
  topts.step_tol = opts.trace_tol;
  topts.closure_tol = 1e-8 * (1.0 + Q.global_scale());

  // one seed per zero/pole of R along a few rays; every component encloses at
  // least one of them, so this finds them all
  std::vector<cplx> centers;
  for (const auto& z : R.zeros()) centers.push_back(z.point);
  for (const auto& p : R.poles()) centers.push_back(p.point);
  double far = 4.0 * Q.global_scale() + 4.0;

  auto signature_of = [&](const JordanCurve& curve) {
    std::vector<int> zs, ps;
    for (std::size_t i = 0; i < R.zeros().size(); i++)
      if (curve.contains(R.zeros()[i].point)) zs.push_back(int(i));
    for (std::size_t i = 0; i < R.poles().size(); i++)
      if (curve.contains(R.poles()[i].point)) ps.push_back(int(i));
    return std::make_pair(zs, ps);
  };

  for (cplx center : centers) {
    bool seeded = false;
    for (double phi : {0.37, 1.93, 3.51, 5.09}) {
      if (seeded) break;
      cplx dir = std::polar(1.0, phi);
      auto g = [&](double t) { return std::abs(R.eval(center + t * dir)) - c; };
      // bracket a crossing along the ray
      double t_prev = 1e-7 * (1.0 + std::abs(center));
      double g_prev = g(t_prev);
      for (double t = t_prev * 2; t < far; t *= 1.35) {
        double gv = g(t);
        if (g_prev == 0.0 || (g_prev < 0) != (gv < 0)) {
          double lo = t_prev, hi = t;
          for (int it = 0; it < 200; it++) {
            double mid = 0.5 * (lo + hi);
            if ((g(mid) < 0) == (g_prev < 0))
              lo = mid;
            else
              hi = mid;
          }
          cplx seed = center + 0.5 * (lo + hi) * dir;
          TrajectoryArc arc;
          try {
            arc = trace_trajectory(Q, seed, ArcKind::trajectory, +1, topts);
          } catch (const std::exception&) {
            break;
          }
          if (arc.termination != ArcTermination::closed) {
            rep.analytic = false;  // ran into a critical point of the level set
            break;
          }
          JordanCurve curve = arc_to_curve(arc.path);
          auto sig = signature_of(curve);
          bool dup = false;
          for (std::size_t j = 0; j < rep.components.size(); j++)
            if (sig.first == std::vector<int>(rep.enclosed_zeros[j]) &&
                sig.second == std::vector<int>(rep.enclosed_poles[j]))
              dup = true;
          if (!dup) {
            rep.components.push_back(curve);
            rep.enclosed_zeros.push_back(sig.first);
            rep.enclosed_poles.push_back(sig.second);
          }
          seeded = true;
          break;
        }
        t_prev = t;
        g_prev = gv;
      }
    }
  }
  rep.connected = rep.components.size() == 1;
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

// unwrapped phase table of a product-form map along the circle
struct PhaseTable {
  std::vector<double> theta, phase;
  MonotoneCubic fwd, inv;
  double eval(double t) const {
    double t0 = theta.front();
    double shift = std::floor((t - t0) / two_pi);
    return fwd(t - shift * two_pi) + shift * phase_winding;
  }
  double invert(double p) const {
    double p0 = phase.front();
    double shift = std::floor((p - p0) / phase_winding);
    return inv(p - shift * phase_winding) + shift * two_pi;
  }
  double phase_winding = two_pi;
};

PhaseTable blaschke_phase_table(const BlaschkeProduct& B, int samples) {
  PhaseTable t;
  t.phase_winding = two_pi * B.degree();
  double acc = std::arg(B.eval(1.0));
  cplx prev = B.eval(1.0);
  std::vector<double> slopes;
  for (int i = 0; i <= samples; i++) {
    double th = two_pi * i / samples;
    cplx v = B.eval(std::polar(1.0, th));
    acc += std::arg(v / prev);
    prev = v;
    t.theta.push_back(th);
    t.phase.push_back(acc);
    slopes.push_back(B.phase_derivative(th));
  }
  std::vector<double> inv_slopes;
  for (double s : slopes) inv_slopes.push_back(s > 1e-12 ? 1.0 / s : std::nan(""));
  t.fwd = MonotoneCubic(t.theta, t.phase, slopes);
  t.inv = MonotoneCubic(t.phase, t.theta, inv_slopes);
  return t;
}

cplx pick_z0(const std::vector<cplx>& anchors, const JordanCurve& curve) {
  cplx mean = 0;
  for (cplx a : anchors) mean += a;
  mean /= double(anchors.size());
  if (curve.contains(mean)) return mean;
  for (cplx a : anchors)
    if (curve.contains(a)) return a;
  return curve.interior_point();
}

}  // namespace

FingerprintCertificate poly_fingerprint(const std::vector<cplx>& coeffs,
                                        const LemniscateReport& report, const MapOptions& opts) {
  auto trimmed = poly::trim(coeffs);
  int n = poly::degree(trimmed);
  if (n < 1) throw HypothesisError("poly_fingerprint: polynomial must be nonconstant");
  cplx lead = trimmed.back();
  if (std::abs(std::imag(lead)) > 1e-10 * std::abs(lead) || std::real(lead) <= 0)
    throw HypothesisError("poly_fingerprint: leading coefficient must be positive");
  if (!report.analytic || !report.connected)
    throw HypothesisError("poly_fingerprint: lemniscate must be analytic and connected");
  if (std::abs(report.level - 1.0) > 1e-12)
    throw HypothesisError("poly_fingerprint: level-1 lemniscate required");

  const JordanCurve& curve = report.components[0];
  auto rts = poly::roots(trimmed);
  cplx z0 = pick_z0(rts, curve);
  CurveMaps maps = conformal_maps(curve, z0, opts);

  std::vector<cplx> a;
  for (cplx r : rts) {
    cplx ak = maps.interior.to_disk(r);
    if (std::abs(ak) >= 1.0) ak *= (1.0 - 1e-12) / std::abs(ak);
    a.push_back(ak);
  }

  // unimodular factor alpha from the oracle anchor: k(1)^n = B(1)
  double psi0 = maps.fingerprint.eval(0.0);
  cplx prod1 = 1.0;
  for (cplx ak : a) prod1 *= (1.0 - ak) / (1.0 - std::conj(ak));
  cplx alpha = std::polar(1.0, double(n) * psi0) / prod1;
  alpha /= std::abs(alpha);
  BlaschkeProduct B(alpha, a);
  BlaschkeProduct A(1.0, std::vector<cplx>(n, 0.0));  // A(z) = z^n

  // k = branch-continuous n-th root of B anchored at psi0
  PhaseTable bt = blaschke_phase_table(B, 4096);
  int samples = 2048;
  std::vector<double> th(samples), ps(samples), slopes(samples);
  for (int i = 0; i < samples; i++) {
    th[i] = two_pi * i / samples;
    ps[i] = (bt.eval(th[i]) - bt.eval(0.0)) / n + psi0;
    slopes[i] = B.phase_derivative(th[i]) / n;
  }
  FingerprintCertificate cert{Fingerprint(th, ps, z0, slopes),
                              A,
                              B,
                              0.0,
                              alpha,
                              1.0,
                              std::polar(1.0, psi0),
                              0.0,
                              0.0};

  double worst = 0;
  for (int i = 0; i < 4 * samples; i++) {
    double t = two_pi * (i + 0.31) / (4 * samples);
    cplx kn = std::polar(1.0, double(n) * cert.fingerprint.eval(t));
    worst = std::max(worst, std::abs(kn - B.eval(std::polar(1.0, t))));
  }
  cert.residual = worst;

  double raw = 0;
  for (int i = 0; i < 512; i++) {
    double t = two_pi * i / 512;
    raw = std::max(raw, circle_distance(cert.fingerprint.eval(t), maps.fingerprint.eval(t)));
  }
  cert.oracle_distance = raw;
  cert.oracle_distance_fitted = fit_precomposition(maps.fingerprint, cert.fingerprint).sup_distance;
  return cert;
}

FingerprintCertificate rational_fingerprint(const RationalMap& R, const LemniscateReport& report,
                                            const MapOptions& opts) {
  int n1 = R.zero_degree(), n2 = R.pole_degree();
  if (n1 <= n2)
    throw HypothesisError("rational_fingerprint: R(inf) = inf requires zero degree > pole degree");
  if (!report.analytic || !report.connected)
    throw HypothesisError("rational_fingerprint: lemniscate must be analytic and connected");
  if (std::abs(report.level - 1.0) > 1e-12)
    throw HypothesisError("rational_fingerprint: level-1 lemniscate required");

  const JordanCurve& curve = report.components[0];
  std::vector<cplx> anchors;
  for (const auto& z : R.zeros()) anchors.push_back(z.point);
  cplx z0 = pick_z0(anchors, curve);
  CurveMaps maps = conformal_maps(curve, z0, opts);

  // B: interior product with zeros at the disk images of the zeros of R
  std::vector<cplx> bz;
  for (const auto& z : R.zeros())
    for (int m = 0; m < z.mult; m++) {
      cplx img = maps.interior.to_disk(z.point);
      if (std::abs(img) >= 1.0) img *= (1.0 - 1e-12) / std::abs(img);
      bz.push_back(img);
    }
  // A: exterior product with poles at the images of the poles of R and at infinity
  std::vector<cplx> apoles;
  for (const auto& p : R.poles())
    for (int m = 0; m < p.mult; m++) {
      cplx img = maps.exterior.to_disk(p.point);
      if (std::abs(img) <= 1.0) img *= (1.0 + 1e-12) / std::abs(img);
      apoles.push_back(img);
    }

  // base pair: z0 = 1 on the circle, k(z0) from the oracle
  double psi0 = maps.fingerprint.eval(0.0);

  // unimodular normalizations: B(1) = 1 and A(e^{i psi0}) = 1
  auto product_at = [](const std::vector<cplx>& zeros, cplx z) {
    cplx v = 1.0;
    for (cplx a : zeros) v *= (z - a) / (1.0 - std::conj(a) * z);
    return v;
  };
  cplx lamB = 1.0 / product_at(bz, 1.0);
  lamB /= std::abs(lamB);
  BlaschkeProduct B(lamB, bz);

  std::vector<cplx> az(n1 - n2, 0.0);
  for (cplx p : apoles) az.push_back(1.0 / std::conj(p));
  cplx lamA = 1.0 / product_at(az, std::polar(1.0, psi0));
  lamA /= std::abs(lamA);
  BlaschkeProduct A(lamA, az);

  // k by monotone inversion of the phase (Q-length) parametrizations
  PhaseTable at = blaschke_phase_table(A, 4096);
  PhaseTable btab = blaschke_phase_table(B, 4096);
  double a_at_psi0 = at.eval(psi0);
  double b_at_0 = btab.eval(0.0);
  int samples = 2048;
  std::vector<double> th(samples), ps(samples), slopes(samples);
  for (int i = 0; i < samples; i++) {
    th[i] = two_pi * i / samples;
    ps[i] = at.invert(btab.eval(th[i]) - b_at_0 + a_at_psi0);
    slopes[i] = B.phase_derivative(th[i]) / A.phase_derivative(ps[i]);
  }
  // enforce strict monotonicity against rounding noise at the seam
  for (int i = 1; i < samples; i++)
    if (ps[i] <= ps[i - 1]) ps[i] = ps[i - 1] + 1e-13;

  FingerprintCertificate cert{Fingerprint(th, ps, z0, slopes),
                              A,
                              B,
                              0.0,
                              lamA,
                              1.0,
                              std::polar(1.0, psi0),
                              0.0,
                              0.0};

  double worst = 0;
  for (int i = 0; i < 4 * samples; i++) {
    double t = two_pi * (i + 0.37) / (4 * samples);
    cplx lhs = A.eval(std::polar(1.0, cert.fingerprint.eval(t)));
    cplx rhs = B.eval(std::polar(1.0, t));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  cert.residual = worst;

  double raw = 0;
  for (int i = 0; i < 512; i++) {
    double t = two_pi * i / 512;
    raw = std::max(raw, circle_distance(cert.fingerprint.eval(t), maps.fingerprint.eval(t)));
  }
  cert.oracle_distance = raw;
  cert.oracle_distance_fitted = fit_precomposition(maps.fingerprint, cert.fingerprint).sup_distance;
  return cert;
}

// ---------------------------------------------------------------------------

RationalMap reconstruct_rational(const QuadDifferential& Q, cplx zeta0) {
  for (const auto& d : Q.finite_divisor())
    if (d.order % 2 != 0)
      throw NotLogDerivativeError("reconstruct_rational: divisor order not even");
  if (Q.order_at_infinity() % 2 != 0)
    throw NotLogDerivativeError("reconstruct_rational: order at infinity not even");

  // R1^2 = -4 pi^2 Q: half orders, constant 2 pi sqrt(-C)
  cplx c1 = 2.0 * pi * std::sqrt(-Q.constant());
  std::vector<std::pair<cplx, int>> half;
  for (const auto& d : Q.finite_divisor()) half.push_back({d.point, d.order / 2});

  // R1 must vanish at infinity like kappa / z with positive integer kappa
  int deg_r1 = 0;
  for (auto& [pt, m] : half) deg_r1 += m;
  if (deg_r1 != -1)
    throw NotLogDerivativeError("reconstruct_rational: sqrt(-Q) lacks a simple zero at infinity");

  auto residue_at = [&](std::size_t j, double sign) {
    cplx r = sign * c1;
    for (std::size_t i = 0; i < half.size(); i++) {
      if (i == j) continue;
      cplx base = half[j].first - half[i].first;
      int e = half[i].second;
      cplx p = 1.0;
      for (int t = 0; t < std::abs(e); t++) p *= base;
      r *= (e >= 0) ? p : 1.0 / p;
    }
    return r;
  };

  for (double sign : {+1.0, -1.0}) {
    std::vector<std::pair<cplx, int>> zeros, poles;
    double kappa = 0;
    bool ok = true;
    for (std::size_t j = 0; j < half.size(); j++) {
      if (half[j].second != -1) continue;  // only simple poles of R1 carry residues
      cplx r = residue_at(j, sign);
      double ri = std::round(std::real(r));
      if (std::abs(std::imag(r)) > 1e-6 * (1 + std::abs(r)) || std::abs(std::real(r) - ri) > 1e-6 ||
          ri == 0.0) {
        ok = false;
        break;
      }
      kappa += ri;
      if (ri > 0)
        zeros.push_back({half[j].first, int(ri)});
      else
        poles.push_back({half[j].first, int(-ri)});
    }
    if (!ok || kappa <= 0) continue;

    std::vector<ZeroPole> zs, psv;
    cplx norm = 1.0;
    for (auto& [pt, m] : zeros) {
      zs.push_back({pt, m});
      cplx p = 1.0;
      for (int t = 0; t < m; t++) p *= (zeta0 - pt);
      norm *= p;
    }
    for (auto& [pt, m] : poles) {
      psv.push_back({pt, m});
      cplx p = 1.0;
      for (int t = 0; t < m; t++) p *= (zeta0 - pt);
      norm /= p;
    }
    RationalMap R(1.0 / norm, zs, psv);

    // verify Eq-4.5 round trip at samples off the divisor
    QuadDifferential QR = log_derivative_qd(R);
    double worst = 0;
    for (int i = 0; i < 24; i++) {
      cplx z = std::polar(1.7 + 0.13 * i, 0.41 * i);
      bool near = false;
      for (const auto& d : Q.finite_divisor())
        if (std::abs(z - d.point) < 0.3) near = true;
      if (near) continue;
      cplx q1 = Q.eval(z), q2 = QR.eval(z);
      worst = std::max(worst, std::abs(q1 - q2) / (1.0 + std::abs(q1)));
    }
    if (worst > 1e-8)
      throw NotLogDerivativeError("reconstruct_rational: Q is not the differential of R");
    return R;
  }
  throw NotLogDerivativeError("reconstruct_rational: residues not integral for either branch");
}

}  // namespace qdw
