#include "qdweld/riemannmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qdw {

// ---------------------------------------------------------------------------
// JordanCurve

void JordanCurve::validate() const {
  path.validate();
  if (!path.is_closed(1e-9 * (1.0 + std::abs(path.front()))))
    throw std::invalid_argument("JordanCurve: path not closed");
  if (signed_area() <= 0)
    throw std::invalid_argument("JordanCurve: orientation must be counterclockwise");
}

double JordanCurve::signed_area() const {
  double a = 0;
  for (std::size_t i = 0; i + 1 < path.size(); i++) {
    cplx p = path.points[i], q = path.points[i + 1];
    a += p.real() * q.imag() - q.real() * p.imag();
  }
  return 0.5 * a;
}

bool JordanCurve::contains(cplx z) const {
  // crossing-number test on the polyline
  bool inside = false;
  for (std::size_t i = 0; i + 1 < path.size(); i++) {
    cplx p = path.points[i], q = path.points[i + 1];
    if ((p.imag() > z.imag()) != (q.imag() > z.imag())) {
      double x = p.real() + (z.imag() - p.imag()) / (q.imag() - p.imag()) * (q.real() - p.real());
      if (x > z.real()) inside = !inside;
    }
  }
  return inside;
}

cplx JordanCurve::interior_point() const {
  cplx centroid = 0;
  for (std::size_t i = 0; i + 1 < path.size(); i++) centroid += path.points[i];
  centroid /= double(path.size() - 1);
  if (contains(centroid)) return centroid;
  // march from boundary midpoints inward
  for (std::size_t i = 0; i + 1 < path.size(); i++) {
    cplx mid = 0.5 * (path.points[i] + path.points[i + 1]);
    cplx tang = path.points[i + 1] - path.points[i];
    cplx normal = cplx(0, 1) * tang / std::abs(tang);  // left normal = interior side
    for (double step : {1e-2, 1e-3, 1e-4}) {
      cplx cand = mid + step * normal * path.polyline_length() / double(path.size());
      if (contains(cand)) return cand;
    }
  }
  throw std::runtime_error("JordanCurve: could not find an interior point");
}

JordanCurve JordanCurve::circle(cplx center, double radius, int n) {
  JordanCurve c;
  c.path = PathSample::circle_arc(center, radius, 0.0, two_pi, n + 1);
  return c;
}

JordanCurve JordanCurve::ellipse(double a, double b, int n) {
  std::vector<cplx> pts(n + 1);
  std::vector<double> prm(n + 1);
  for (int i = 0; i <= n; i++) {
    double t = two_pi * i / n;
    pts[i] = cplx(a * std::cos(t), b * std::sin(t));
    prm[i] = t;
  }
  JordanCurve c;
  c.path = PathSample(std::move(pts), std::move(prm));
  return c;
}

JordanCurve JordanCurve::polygon(const std::vector<cplx>& vertices, int per_side) {
  std::size_t m = vertices.size();
  if (m < 3) throw std::invalid_argument("polygon: needs at least 3 vertices");
  std::vector<cplx> pts;
  std::vector<double> prm;
  std::vector<CornerTag> corners;
  double s = 0;
  for (std::size_t i = 0; i < m; i++) {
    cplx a = vertices[i], b = vertices[(i + 1) % m];
    CornerTag tag;
    tag.param = s;
    cplx prev = vertices[(i + m - 1) % m];
    double ang = std::arg((b - a) / (a - prev));          // exterior turn in (-pi, pi)
    double interior = pi - ang;                           // interior angle
    for (int den : {2, 3, 4, 6, 1}) {
      double k = interior * den / pi;
      if (std::abs(k - std::round(k)) < 1e-9 && std::round(k) > 0) {
        tag.angle_pi = {int(std::round(k)), den};
        break;
      }
    }
    corners.push_back(tag);
    for (int j = 0; j < per_side; j++) {
      double t = double(j) / per_side;
      pts.push_back(a + t * (b - a));
      prm.push_back(s + t * std::abs(b - a));
    }
    s += std::abs(b - a);
  }
  pts.push_back(vertices[0]);
  prm.push_back(s);
  JordanCurve c;
  c.path = PathSample(std::move(pts), std::move(prm));
  c.corners = std::move(corners);
  return c;
}

// ---------------------------------------------------------------------------
// Fingerprint

Fingerprint::Fingerprint(std::vector<double> thetas, std::vector<double> psis, cplx base_point,
                         const std::vector<double>& slopes)
    : theta_(std::move(thetas)), psi_(std::move(psis)), z0_(base_point) {
  if (theta_.size() != psi_.size() || theta_.size() < 3)
    throw std::invalid_argument("Fingerprint: bad table");
  // extended tables covering one full period for interpolation
  std::vector<double> tx = theta_, ty = psi_;
  tx.push_back(theta_.front() + two_pi);
  ty.push_back(psi_.front() + two_pi);
  std::vector<double> sl;
  if (!slopes.empty()) {
    sl = slopes;
    sl.push_back(slopes.front());
  }
  interp_ = MonotoneCubic(tx, ty, sl);
  std::vector<double> inv_sl;
  for (double s : sl) inv_sl.push_back(s > 1e-12 ? 1.0 / s : std::nan(""));
  inv_interp_ = MonotoneCubic(ty, tx, inv_sl);
}

double Fingerprint::eval(double theta) const {
  double t0 = theta_.front();
  double shift = std::floor((theta - t0) / two_pi);
  double t = theta - shift * two_pi;
  return interp_(t) + shift * two_pi;
}

double Fingerprint::derivative(double theta) const {
  double t0 = theta_.front();
  double shift = std::floor((theta - t0) / two_pi);
  return interp_.derivative(theta - shift * two_pi);
}

double Fingerprint::inverse(double psi) const {
  double p0 = psi_.front();
  double shift = std::floor((psi - p0) / two_pi);
  double p = psi - shift * two_pi;
  return inv_interp_(p) + shift * two_pi;
}

void Fingerprint::validate() const {
  for (std::size_t i = 1; i < theta_.size(); i++) {
    if (!(theta_[i] > theta_[i - 1])) throw std::runtime_error("Fingerprint: thetas not increasing");
    if (!(psi_[i] > psi_[i - 1])) throw std::runtime_error("Fingerprint: psis not increasing");
  }
  if (theta_.back() - theta_.front() >= two_pi)
    throw std::runtime_error("Fingerprint: theta table spans more than one period");
  if (psi_.back() - psi_.front() >= two_pi)
    throw std::runtime_error("Fingerprint: psi table spans more than one period");
}

double circle_distance(double a, double b) { return std::abs(std::remainder(a - b, two_pi)); }

// ---------------------------------------------------------------------------
// Geodesic algorithm

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sqrt branch with image in the closed upper half-plane (cut along [0, inf))
cplx sqrt_H(cplx v) {
  cplx s = std::sqrt(v);
  if (s.imag() < 0) s = -s;
  return s;
}

struct Step {
  bool c_finite = true;
  double c = 0.0;
  double d = 0.0;
};

}  // namespace

class ZipperChain {
 public:
  cplx za, zb;             // first two nodes (base and first tip)
  std::vector<Step> steps;
  double q = 0.0;          // pre-closing coordinate of the base node
  cplx W0;                 // final image of the interior normalization point
  cplx Winf;               // final image of infinity
  cplx lam_minus = 1.0, lam_plus = 1.0;
  double dinf = 0.0;       // phi_+'(inf)
  bool minus_upper = true; // interior half-plane is the upper one

  cplx t0_fwd(cplx z) const {
    cplx ratio = (z - zb) / (z - za);
    return cplx(0, 1) * std::sqrt(ratio);
  }
  cplx t0_inv(cplx w) const {
    cplx r = -w * w;
    return (zb - za * r) / (1.0 - r);
  }
  cplx t0_deriv(cplx z, cplx w) const {
    cplx dr = (zb - za) / ((z - za) * (z - za));
    return -dr / (2.0 * w);
  }

  static cplx step_fwd(const Step& s, cplx u) {
    cplx m = s.c_finite ? s.c * u / (s.c - u) : u;
    return sqrt_H(m * m + s.d * s.d);
  }
  static cplx step_deriv(const Step& s, cplx u, cplx f) {
    cplx m = s.c_finite ? s.c * u / (s.c - u) : u;
    cplx mp = s.c_finite ? (s.c * s.c) / ((s.c - u) * (s.c - u)) : 1.0;
    return m * mp / f;
  }
  static cplx step_inv(const Step& s, cplx f) {
    cplx m = sqrt_H(f * f - s.d * s.d);
    return s.c_finite ? s.c * m / (s.c + m) : m;
  }
  static double step_fwd_real(const Step& s, double u) {
    double m;
    if (std::isinf(u))
      m = s.c_finite ? -s.c : kInf;
    else if (s.c_finite)
      m = (u == s.c) ? kInf : s.c * u / (s.c - u);
    else
      m = u;
    if (std::isinf(m)) return kInf;
    double r = std::sqrt(m * m + s.d * s.d);
    return m >= 0 ? r : -r;
  }

  cplx close_fwd(cplx u) const {
    cplx mu = q * u / (q - u);
    return mu * mu;
  }
  double close_fwd_real(double u) const {
    if (std::isinf(u)) return q * q;
    if (u == q) return kInf;
    double mu = q * u / (q - u);
    return mu * mu;
  }
  cplx close_deriv(cplx u) const {
    cplx mu = q * u / (q - u);
    cplx mup = (q * q) / ((q - u) * (q - u));
    return 2.0 * mu * mup;
  }
  cplx close_inv(cplx F, bool upper) const {
    cplx mu = std::sqrt(F);
    if (!upper) mu = -mu;        // lower half-plane preimages sit in the second quadrant
    if (mu.imag() < 0) mu = -mu; // principal sqrt of upper-half arguments is quadrant one
    return q * mu / (q + mu);
  }

  // full forward transform of a point off the curve
  cplx fwd(cplx z) const {
    cplx w = t0_fwd(z);
    for (const auto& s : steps) w = step_fwd(s, w);
    return close_fwd(w);
  }
  cplx fwd_infinity() const {
    cplx w = cplx(0, 1);
    for (const auto& s : steps) w = step_fwd(s, w);
    return close_fwd(w);
  }
  // inverse transform into the given half-plane side
  cplx inv(cplx F, bool upper) const {
    cplx w = close_inv(F, upper);
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) w = step_inv(*it, w);
    return t0_inv(w);
  }

  cplx cayley_minus(double x) const {
    if (std::isinf(x)) return lam_minus;
    return lam_minus * (x - W0) / (x - std::conj(W0));
  }
  cplx cayley_minus(cplx w) const { return lam_minus * (w - W0) / (w - std::conj(W0)); }
  cplx cayley_minus_inv(cplx u) const {
    return (lam_minus * W0 - std::conj(W0) * u) / (lam_minus - u);
  }
  cplx cayley_plus(double x) const {
    if (std::isinf(x)) return lam_plus;
    return lam_plus * (x - std::conj(Winf)) / (x - Winf);
  }
  cplx cayley_plus(cplx w) const { return lam_plus * (w - std::conj(Winf)) / (w - Winf); }
  cplx cayley_plus_inv(cplx u) const {
    return (lam_plus * std::conj(Winf) - Winf * u) / (lam_plus - u);
  }
};

namespace {

struct NodeSet {
  std::vector<cplx> points;   // boundary nodes, counterclockwise, not closed
  std::vector<double> arcs;   // arclength of each node
  double total_len = 0.0;
};

NodeSet resample_boundary(const JordanCurve& curve, const MapOptions& opts) {
  const PathSample& p = curve.path;
  std::size_t m = p.size();
  std::vector<double> cum(m, 0.0);
  for (std::size_t i = 1; i < m; i++)
    cum[i] = cum[i - 1] + std::abs(p.points[i] - p.points[i - 1]);
  double L = cum[m - 1];
  if (!(L > 0)) throw std::invalid_argument("resample_boundary: degenerate curve");

  auto point_at_arclen = [&](double s) {
    s = std::fmod(s, L);
    if (s < 0) s += L;
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    std::size_t i = std::max<std::ptrdiff_t>(1, it - cum.begin()) - 1;
    if (i + 1 >= m) i = m - 2;
    double h = cum[i + 1] - cum[i];
    double u = h > 0 ? (s - cum[i]) / h : 0.0;
    return p.points[i] * (1.0 - u) + p.points[i + 1] * u;
  };
  auto arclen_at_param = [&](double t) {
    auto it = std::upper_bound(p.params.begin(), p.params.end(), t);
    std::size_t i = std::max<std::ptrdiff_t>(1, it - p.params.begin()) - 1;
    if (i + 1 >= m) i = m - 2;
    double u = (t - p.params[i]) / (p.params[i + 1] - p.params[i]);
    u = std::clamp(u, 0.0, 1.0);
    return cum[i] + u * (cum[i + 1] - cum[i]);
  };

  int n = std::max(opts.boundary_nodes, 16);
  double h = L / n;
  std::vector<double> positions;
  positions.reserve(n + curve.corners.size() * (2 * opts.corner_cluster_depth + 1));
  for (int i = 0; i < n; i++) positions.push_back(i * h);
  for (const auto& tag : curve.corners) {
    double sc = arclen_at_param(tag.param);
    positions.push_back(sc);
    double step = h;
    for (int j = 1; j <= opts.corner_cluster_depth; j++) {
      step *= opts.corner_cluster_ratio;
      positions.push_back(sc + step);
      positions.push_back(sc - step);
    }
  }
  for (double& s : positions) {
    s = std::fmod(s, L);
    if (s < 0) s += L;
  }
  std::sort(positions.begin(), positions.end());
  double min_sep = h * std::pow(opts.corner_cluster_ratio, opts.corner_cluster_depth) * 0.49;
  NodeSet ns;
  double last = -2 * min_sep;
  for (double s : positions) {
    if (s - last < min_sep) continue;
    ns.points.push_back(point_at_arclen(s));
    ns.arcs.push_back(s);
    last = s;
  }
  // keep the wrap gap open as well
  if (L - ns.arcs.back() < min_sep && ns.arcs.size() > 3) {
    ns.points.pop_back();
    ns.arcs.pop_back();
  }
  ns.total_len = L;
  if (ns.points.size() < 8) throw MapperError("resample_boundary: too few nodes");
  return ns;
}

struct TransportState {
  bool on_line = false;
  cplx w;                 // free position (upper half-plane)
  double x[2] = {0, 0};   // side coordinates once on the line
};

}  // namespace

CurveMaps conformal_maps(const JordanCurve& curve, cplx z0, const MapOptions& opts) {
  curve.validate();
  if (!curve.contains(z0)) throw std::invalid_argument("conformal_maps: z0 not inside the curve");

  NodeSet ns = resample_boundary(curve, opts);
  std::size_t N = ns.points.size();

  auto chain = std::make_shared<ZipperChain>();
  chain->za = ns.points[0];
  chain->zb = ns.points[1];

  std::vector<TransportState> st(N);
  st[0].on_line = true;
  st[0].x[0] = st[0].x[1] = kInf;
  st[1].on_line = true;
  st[1].x[0] = st[1].x[1] = 0.0;
  for (std::size_t i = 2; i < N; i++) {
    st[i].on_line = false;
    st[i].w = chain->t0_fwd(ns.points[i]);
    if (st[i].w.imag() <= 0) st[i].w = cplx(st[i].w.real(), 1e-14 * (1.0 + std::abs(st[i].w)));
  }

  // markers: interior normalization point (with derivative) and infinity
  cplx w_int = chain->t0_fwd(z0);
  cplx d_int = chain->t0_deriv(z0, w_int);
  cplx w_inf = cplx(0, 1);
  cplx b_inf = cplx(0, 1) * (chain->za - chain->zb) / 2.0;  // expansion T0 ~ i + b/z

  std::size_t tip = 1;
  for (std::size_t k = 2; k < N; k++) {
    cplx w = st[k].w;
    if (w.imag() <= 0) w = cplx(w.real(), 1e-14 * (1.0 + std::abs(w)));
    Step s;
    double x = w.real(), y = w.imag();
    if (std::abs(x) < 1e-14 * std::abs(w)) {
      s.c_finite = false;
      s.d = y;
    } else {
      s.c_finite = true;
      s.c = (x * x + y * y) / x;
      cplx m = s.c * w / (s.c - w);
      s.d = std::abs(m);
    }
    if (s.d <= 0) throw MapperError("conformal_maps: coincident boundary nodes");

    for (std::size_t i = 0; i < N; i++) {
      if (i == k) continue;
      if (st[i].on_line) {
        if (i == tip) {
          st[i].x[0] = -s.d;  // left side of the advancing curve unfolds to the negative edge
          st[i].x[1] = +s.d;
        } else {
          st[i].x[0] = ZipperChain::step_fwd_real(s, st[i].x[0]);
          st[i].x[1] = ZipperChain::step_fwd_real(s, st[i].x[1]);
        }
      } else if (i > k) {
        st[i].w = ZipperChain::step_fwd(s, st[i].w);
      }
    }
    d_int *= ZipperChain::step_deriv(s, w_int, ZipperChain::step_fwd(s, w_int));
    w_int = ZipperChain::step_fwd(s, w_int);
    b_inf *= ZipperChain::step_deriv(s, w_inf, ZipperChain::step_fwd(s, w_inf));
    w_inf = ZipperChain::step_fwd(s, w_inf);

    st[k].on_line = true;
    st[k].x[0] = st[k].x[1] = 0.0;
    tip = k;
    chain->steps.push_back(s);
  }

  // closing map; q = pre-closing coordinate of the base node
  if (std::isinf(st[0].x[0]) || st[0].x[0] == 0.0)
    throw MapperError("conformal_maps: degenerate closing configuration");
  chain->q = st[0].x[0];
  double q = chain->q;

  d_int *= chain->close_deriv(w_int);
  w_int = chain->close_fwd(w_int);
  b_inf *= chain->close_deriv(w_inf);
  w_inf = chain->close_fwd(w_inf);
  chain->W0 = w_int;
  chain->Winf = w_inf;
  if (w_int.imag() == 0 || w_inf.imag() == 0 || (w_int.imag() > 0) == (w_inf.imag() > 0))
    throw MapperError("conformal_maps: markers landed in the same half-plane");
  chain->minus_upper = w_int.imag() > 0;

  // classify node sides: the (0, q) group ends in the upper half-plane iff q > 0
  double lo = std::min(0.0, q), hi = std::max(0.0, q);
  std::vector<double> x_minus(N), x_plus(N);
  bool group_in_is_upper = q > 0;
  for (std::size_t i = 0; i < N; i++) {
    double u0 = st[i].x[0], u1 = st[i].x[1];
    bool in0 = !std::isinf(u0) && u0 > lo && u0 < hi;
    bool in1 = !std::isinf(u1) && u1 > lo && u1 < hi;
    double u_upper, u_lower;
    if (in0 == in1) {
      // base and final tip have coinciding side limits
      if (std::abs(u0 - u1) > 1e-9 * (1.0 + std::abs(u0)) && i != 0 && i != tip)
        throw MapperError("conformal_maps: side classification failed");
      u_upper = u_lower = u0;
    } else {
      u_upper = (in0 == group_in_is_upper) ? u0 : u1;
      u_lower = (in0 == group_in_is_upper) ? u1 : u0;
    }
    double um = chain->minus_upper ? u_upper : u_lower;
    double up = chain->minus_upper ? u_lower : u_upper;
    x_minus[i] = chain->close_fwd_real(um);
    x_plus[i] = chain->close_fwd_real(up);
  }

  // normalizations
  cplx dcay = 1.0 / (chain->W0 - std::conj(chain->W0));  // d/dw of the unrotated Cayley at W0
  cplx t_deriv = dcay * d_int;                           // tau_-'(z0) before rotation
  chain->lam_minus = std::conj(t_deriv) / std::abs(t_deriv);
  cplx Lc = (chain->Winf - std::conj(chain->Winf)) / b_inf;  // tau_+(z) ~ lam * Lc * z
  chain->lam_plus = std::conj(Lc) / std::abs(Lc);
  chain->dinf = 1.0 / std::abs(Lc);  // phi_+'(inf) = 1 / (lam_plus * Lc)

  // boundary tables
  std::vector<double> th_m(N), th_p(N);
  for (std::size_t i = 0; i < N; i++) {
    th_m[i] = std::arg(chain->cayley_minus(x_minus[i]));
    th_p[i] = std::arg(chain->cayley_plus(x_plus[i]));
  }
  auto unwrap = [&](std::vector<double>& th) {
    double prev = th[0];
    for (std::size_t i = 1; i < th.size(); i++) {
      double inc = th[i] - prev;
      inc = inc - two_pi * std::floor(inc / two_pi);  // [0, 2 pi)
      if (inc > two_pi - 1e-9) inc = 0;               // backwards rounding noise
      prev = th[i];
      th[i] = th[i - 1] + inc;
    }
    if (std::abs(th.back() - th.front() - two_pi) > two_pi * 0.5)
      throw MapperError("conformal_maps: boundary table failed to wind once");
  };
  unwrap(th_m);
  unwrap(th_p);
  // drop duplicate-angle entries (crowded nodes collapse at double precision)
  std::vector<double> ftheta, fpsi, s_arc;
  std::vector<cplx> fpoints;
  for (std::size_t i = 0; i < N; i++) {
    if (!ftheta.empty() &&
        !(th_m[i] > ftheta.back() + 1e-13 && th_p[i] > fpsi.back() + 1e-13))
      continue;
    if (th_m[i] >= th_m[0] + two_pi - 1e-13) continue;
    if (th_p[i] >= th_p[0] + two_pi - 1e-13) continue;
    ftheta.push_back(th_m[i]);
    fpsi.push_back(th_p[i]);
    fpoints.push_back(ns.points[i]);
    s_arc.push_back(ns.arcs[i]);
  }
  // unwrapped arclengths (increasing with node order)
  std::vector<double> s_unwrapped = s_arc;
  for (std::size_t i = 1; i < s_unwrapped.size(); i++)
    while (s_unwrapped[i] < s_unwrapped[i - 1]) s_unwrapped[i] += ns.total_len;

  Fingerprint k(ftheta, fpsi, z0);

  CurveMaps maps;
  maps.fingerprint = k;

  DiskMap& dm = maps.interior;
  dm.side_ = MapSide::interior;
  dm.z0_ = z0;
  dm.chain_ = chain;
  dm.node_theta_ = ftheta;
  dm.node_point_ = fpoints;
  dm.node_s_ = s_unwrapped;
  dm.total_len_ = ns.total_len;
  dm.dinf_ = 0.0;

  DiskMap& de = maps.exterior;
  de.side_ = MapSide::exterior;
  de.z0_ = z0;
  de.chain_ = chain;
  de.dinf_ = chain->dinf;
  de.node_theta_ = fpsi;
  de.node_point_ = fpoints;
  de.node_s_ = s_unwrapped;
  de.total_len_ = ns.total_len;
  return maps;
}

cplx DiskMap::to_disk(cplx domain_point) const {
  cplx F = chain_->fwd(domain_point);
  return side_ == MapSide::interior ? chain_->cayley_minus(F) : chain_->cayley_plus(F);
}

cplx DiskMap::from_disk(cplx disk_point) const {
  bool interior = side_ == MapSide::interior;
  cplx F = interior ? chain_->cayley_minus_inv(disk_point) : chain_->cayley_plus_inv(disk_point);
  bool upper = interior ? chain_->minus_upper : !chain_->minus_upper;
  return chain_->inv(F, upper);
}

cplx DiskMap::boundary_point(double theta) const {
  const auto& th = node_theta_;
  double t0 = th.front();
  double t = t0 + std::fmod(theta - t0, two_pi);
  if (t < t0) t += two_pi;
  auto it = std::upper_bound(th.begin(), th.end(), t);
  std::size_t i = std::max<std::ptrdiff_t>(1, it - th.begin()) - 1;
  bool wrap = (i + 1 >= th.size());
  std::size_t j = wrap ? 0 : i + 1;
  double tj = wrap ? th[0] + two_pi : th[j];
  double u = (tj > th[i]) ? (t - th[i]) / (tj - th[i]) : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return node_point_[i] * (1.0 - u) + node_point_[j] * u;
}

double DiskMap::derivative_at_infinity() const { return dinf_; }

DiskMap interior_map(const JordanCurve& curve, cplx z0, const MapOptions& opts) {
  return conformal_maps(curve, z0, opts).interior;
}

DiskMap exterior_map(const JordanCurve& curve, const MapOptions& opts) {
  return conformal_maps(curve, curve.interior_point(), opts).exterior;
}

Fingerprint fingerprint_oracle(const JordanCurve& curve, cplx z0, const MapOptions& opts) {
  return conformal_maps(curve, z0, opts).fingerprint;
}

// ---------------------------------------------------------------------------
// Corner surgery and Rado approximation

JordanCurve corner_surgery(const JordanCurve& curve, const std::vector<cplx>& points, double eps) {
  curve.validate();
  if (points.empty()) return curve;
  for (std::size_t i = 0; i < points.size(); i++)
    for (std::size_t j = i + 1; j < points.size(); j++)
      if (std::abs(points[i] - points[j]) < 2 * eps)
        throw SurgeryError("corner_surgery: eps too large for the marked points");

  const PathSample& p = curve.path;
  std::size_t m = p.size();
  std::vector<double> cum(m, 0.0);
  for (std::size_t i = 1; i < m; i++)
    cum[i] = cum[i - 1] + std::abs(p.points[i] - p.points[i - 1]);
  double L = cum.back();
  auto point_at = [&](double s) {
    s = std::fmod(s, L);
    if (s < 0) s += L;
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    std::size_t i = std::max<std::ptrdiff_t>(1, it - cum.begin()) - 1;
    if (i + 1 >= m) i = m - 2;
    double h = cum[i + 1] - cum[i];
    double u = h > 0 ? (s - cum[i]) / h : 0.0;
    return p.points[i] * (1.0 - u) + p.points[i + 1] * u;
  };

  struct Cut {
    double s_in, s_out;  // removed arc (s_out > s_in, possibly past L)
    cplx center;
  };
  std::vector<Cut> cuts;
  for (cplx a : points) {
    std::vector<double> crossings;
    for (std::size_t i = 0; i + 1 < m; i++) {
      cplx u = p.points[i] - a, v = p.points[i + 1] - p.points[i];
      double A = std::norm(v), B = 2 * (u.real() * v.real() + u.imag() * v.imag());
      double C = std::norm(u) - eps * eps;
      double disc = B * B - 4 * A * C;
      if (disc <= 0 || A == 0) continue;
      double r = std::sqrt(disc);
      for (double t : {(-B - r) / (2 * A), (-B + r) / (2 * A)})
        if (t >= 0 && t < 1) crossings.push_back(cum[i] + t * (cum[i + 1] - cum[i]));
    }
    if (crossings.size() != 2)
      throw SurgeryError("corner_surgery: circle does not cross the curve exactly twice");
    std::sort(crossings.begin(), crossings.end());
    // the removed piece is the one passing closest to the marked point
    double s1 = crossings[0], s2 = crossings[1];
    double d_mid = std::abs(point_at(0.5 * (s1 + s2)) - a);
    Cut c;
    c.center = a;
    if (d_mid < eps) {
      c.s_in = s1;
      c.s_out = s2;
    } else {
      c.s_in = s2;
      c.s_out = s1 + L;
    }
    cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end(), [](const Cut& a, const Cut& b) { return a.s_in < b.s_in; });
  for (std::size_t i = 1; i < cuts.size(); i++)
    if (cuts[i].s_in < cuts[i - 1].s_out)
      throw SurgeryError("corner_surgery: replacement arcs overlap");
  if (cuts.size() > 1 && cuts.back().s_out > cuts.front().s_in + L)
    throw SurgeryError("corner_surgery: replacement arcs overlap around the seam");

  // walk one period starting from a kept position
  double s_base = std::fmod(cuts.back().s_out, L) +
                  0.25 * std::fmod(cuts.front().s_in + L - cuts.back().s_out + L, L);
  double node_h = L / double(m - 1);

  std::vector<cplx> out;
  std::vector<double> junction_params;
  auto emit = [&](cplx z) {
    if (!out.empty() && std::abs(z - out.back()) < 1e-13 * (1.0 + std::abs(z))) return;
    out.push_back(z);
  };
  double s = s_base;
  const double s_stop = s_base + L;
  std::size_t next_cut = 0;
  // order cuts by position relative to s_base
  std::vector<Cut> ordered = cuts;
  for (auto& c : ordered) {
    while (c.s_in < s_base) {
      c.s_in += L;
      c.s_out += L;
    }
  }
  std::sort(ordered.begin(), ordered.end(), [](const Cut& a, const Cut& b) { return a.s_in < b.s_in; });

  while (s < s_stop - 1e-12) {
    double s_next_cut = next_cut < ordered.size() ? ordered[next_cut].s_in : s_stop;
    double s_end = std::min(s_stop, s_next_cut);
    int nseg = std::max(1, int(std::ceil((s_end - s) / node_h)));
    for (int j = 0; j <= nseg; j++) emit(point_at(s + (s_end - s) * j / nseg));
    if (s_end >= s_stop - 1e-12) break;
    const Cut& c = ordered[next_cut];
    cplx pin = point_at(c.s_in), pout = point_at(c.s_out);
    junction_params.push_back(0);  // filled below from out positions
    double a0 = std::arg(pin - c.center), a1 = std::arg(pout - c.center);
    double d1 = a1 - a0;
    while (d1 <= 0) d1 += two_pi;
    cplx ccw_mid = c.center + std::polar(eps, a0 + 0.5 * d1);
    double span = curve.contains(ccw_mid) ? d1 : d1 - two_pi;
    int narc = std::max(16, int(std::ceil(std::abs(span) * eps / node_h)));
    emit(pin);
    for (int j = 1; j < narc; j++) emit(c.center + std::polar(eps, a0 + span * j / narc));
    emit(pout);
    s = c.s_out;
    next_cut++;
  }
  emit(point_at(s_base));
  if (std::abs(out.back() - out.front()) > 1e-12 * (1.0 + std::abs(out.front())))
    out.push_back(out.front());
  else
    out.back() = out.front();

  std::vector<double> prm(out.size());
  prm[0] = 0;
  for (std::size_t i = 1; i < out.size(); i++)
    prm[i] = prm[i - 1] + std::max(1e-14, std::abs(out[i] - out[i - 1]));
  JordanCurve result;
  result.path = PathSample(std::move(out), std::move(prm));
  // tag the junction points as corners so nodes cluster there
  for (const Cut& c : cuts) {
    for (double sj : {c.s_in, c.s_out}) {
      cplx jp = point_at(sj);
      double best = 1e18, bp = 0;
      for (std::size_t i = 0; i < result.path.size(); i++) {
        double d = std::abs(result.path.points[i] - jp);
        if (d < best) {
          best = d;
          bp = result.path.params[i];
        }
      }
      result.corners.push_back({bp, std::nullopt});
    }
  }
  result.validate();
  return result;
}

RadoReport rado_sequence(const JordanCurve& curve, const std::vector<cplx>& singular_points,
                         const std::vector<double>& eps_schedule, cplx z0,
                         const MapOptions& opts) {
  for (std::size_t i = 1; i < eps_schedule.size(); i++)
    if (!(eps_schedule[i] < eps_schedule[i - 1]))
      throw std::invalid_argument("rado_sequence: schedule must strictly decrease");
  RadoReport rep;
  for (double eps : eps_schedule) {
    JordanCurve modified = corner_surgery(curve, singular_points, eps);
    rep.epsilons.push_back(eps);
    rep.fingerprints.push_back(fingerprint_oracle(modified, z0, opts));
  }
  for (std::size_t i = 1; i < rep.fingerprints.size(); i++) {
    double gap = 0;
    for (int j = 0; j < 512; j++) {
      double t = two_pi * j / 512;
      gap = std::max(gap, circle_distance(rep.fingerprints[i].eval(t),
                                          rep.fingerprints[i - 1].eval(t)));
    }
    rep.sup_gaps.push_back(gap);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Mobius fitting

namespace {

double fit_objective(const Fingerprint& k1, const Fingerprint& k2, const DiskMobius& phi,
                     int samples) {
  double worst = 0;
  for (int j = 0; j < samples; j++) {
    double t = two_pi * j / samples;
    double mapped = phi.map_angle(t);
    worst = std::max(worst, circle_distance(k1.eval(mapped), k2.eval(t)));
  }
  return worst;
}

}  // namespace

MobiusFit fit_precomposition(const Fingerprint& k1, const Fingerprint& k2, int samples) {
  // seed: Mobius through three boundary correspondences of k1^{-1} o k2
  double t[3] = {0.1, 0.1 + two_pi / 3, 0.1 + 2 * two_pi / 3};
  cplx z[3], w[3];
  for (int j = 0; j < 3; j++) {
    z[j] = std::polar(1.0, t[j]);
    w[j] = std::polar(1.0, k1.inverse(k2.eval(t[j])));
  }
  // matrices sending the triple to (0, 1, inf)
  auto tri = [](const cplx* v) {
    return std::array<cplx, 4>{v[1] - v[2], -v[0] * (v[1] - v[2]), v[1] - v[0],
                               -v[2] * (v[1] - v[0])};
  };
  auto A = tri(z), B = tri(w);
  // M = B^{-1} A
  cplx det = B[0] * B[3] - B[1] * B[2];
  (void)det;
  std::array<cplx, 4> Binv{B[3], -B[1], -B[2], B[0]};
  std::array<cplx, 4> M{Binv[0] * A[0] + Binv[1] * A[2], Binv[0] * A[1] + Binv[1] * A[3],
                        Binv[2] * A[0] + Binv[3] * A[2], Binv[2] * A[1] + Binv[3] * A[3]};
  DiskMobius seed;
  cplx a = (std::abs(M[0]) > 1e-300) ? -M[1] / M[0] : cplx(0.0);
  if (std::abs(a) < 0.999) {
    seed.a = a;
    cplx probe = std::polar(1.0, 1.0);
    cplx lam = (M[0] * probe + M[1]) / (M[2] * probe + M[3]) * (1.0 - std::conj(a) * probe) /
               (probe - a);
    seed.lambda = lam / std::abs(lam);
  }

  // Nelder-Mead polish on (Re a, Im a, arg lambda)
  auto make = [](double x, double y, double r) {
    DiskMobius p;
    cplx a2(x, y);
    if (std::abs(a2) > 0.995) a2 *= 0.995 / std::abs(a2);
    p.a = a2;
    p.lambda = std::polar(1.0, r);
    return p;
  };
  auto obj = [&](const std::array<double, 3>& v) {
    return fit_objective(k1, k2, make(v[0], v[1], v[2]), samples);
  };
  std::array<double, 3> x0{seed.a.real(), seed.a.imag(), std::arg(seed.lambda)};
  std::array<std::array<double, 3>, 4> simplex;
  simplex[0] = x0;
  for (int i = 1; i < 4; i++) {
    simplex[i] = x0;
    simplex[i][i - 1] += (i == 3 ? 0.02 : 0.01);
  }
  std::array<double, 4> fv;
  for (int i = 0; i < 4; i++) fv[i] = obj(simplex[i]);
  for (int it = 0; it < 400; it++) {
    std::array<int, 4> ord{0, 1, 2, 3};
    std::sort(ord.begin(), ord.end(), [&](int a2, int b2) { return fv[a2] < fv[b2]; });
    std::array<std::array<double, 3>, 4> s2;
    std::array<double, 4> f2;
    for (int i = 0; i < 4; i++) {
      s2[i] = simplex[ord[i]];
      f2[i] = fv[ord[i]];
    }
    simplex = s2;
    fv = f2;
    if (fv[3] - fv[0] < 1e-14) break;
    std::array<double, 3> c{0, 0, 0};
    for (int i = 0; i < 3; i++)
      for (int d = 0; d < 3; d++) c[d] += simplex[i][d] / 3.0;
    auto mix = [&](double alpha) {
      std::array<double, 3> v;
      for (int d = 0; d < 3; d++) v[d] = c[d] + alpha * (simplex[3][d] - c[d]);
      return v;
    };
    auto xr = mix(-1.0);
    double fr = obj(xr);
    if (fr < fv[0]) {
      auto xe = mix(-2.0);
      double fe = obj(xe);
      if (fe < fr) {
        simplex[3] = xe;
        fv[3] = fe;
      } else {
        simplex[3] = xr;
        fv[3] = fr;
      }
    } else if (fr < fv[2]) {
      simplex[3] = xr;
      fv[3] = fr;
    } else {
      auto xc = mix(0.5);
      double fc = obj(xc);
      if (fc < fv[3]) {
        simplex[3] = xc;
        fv[3] = fc;
      } else {
        for (int i = 1; i < 4; i++) {
          for (int d = 0; d < 3; d++) simplex[i][d] = 0.5 * (simplex[i][d] + simplex[0][d]);
          fv[i] = obj(simplex[i]);
        }
      }
    }
  }
  MobiusFit fit;
  fit.phi = make(simplex[0][0], simplex[0][1], simplex[0][2]);
  fit.sup_distance = fv[0];
  return fit;
}

}  // namespace qdw
