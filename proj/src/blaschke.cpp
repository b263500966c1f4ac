#include "qdweld/blaschke.hpp"

#include <algorithm>
#include <cmath>

#include "qdweld/polynomial.hpp"

namespace qdw {

namespace {
cplx ipow(cplx z, int n) {
  cplx base = n >= 0 ? z : 1.0 / z;
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

RationalMap::RationalMap(cplx constant, std::vector<ZeroPole> zeros, std::vector<ZeroPole> poles)
    : constant_(constant), zeros_(std::move(zeros)), poles_(std::move(poles)) {
  if (constant_ == 0.0) throw std::invalid_argument("RationalMap: zero constant");
  for (const auto& z : zeros_)
    for (const auto& p : poles_)
      if (std::abs(z.point - p.point) < 1e-12)
        throw std::invalid_argument("RationalMap: zero coincides with pole");
}

RationalMap RationalMap::from_polynomial(const std::vector<cplx>& coeffs) {
  auto trimmed = poly::trim(coeffs);
  if (poly::degree(trimmed) < 1)
    throw std::invalid_argument("RationalMap: polynomial must be nonconstant");
  auto rts = poly::roots(trimmed);
  auto clusters = poly::cluster_roots(rts, 1e-8);
  std::vector<ZeroPole> zeros;
  for (auto& [pt, mult] : clusters) zeros.push_back({pt, mult});
  return RationalMap(trimmed.back(), zeros, {});
}

int RationalMap::zero_degree() const {
  int n = 0;
  for (const auto& z : zeros_) n += z.mult;
  return n;
}

int RationalMap::pole_degree() const {
  int n = 0;
  for (const auto& p : poles_) n += p.mult;
  return n;
}

int RationalMap::degree() const { return std::max(zero_degree(), pole_degree()); }

cplx RationalMap::eval(cplx z) const {
  cplx v = constant_;
  for (const auto& a : zeros_) v *= ipow(z - a.point, a.mult);
  for (const auto& b : poles_) v *= ipow(z - b.point, -b.mult);
  return v;
}

cplx RationalMap::log_derivative(cplx z) const {
  cplx v = 0.0;
  for (const auto& a : zeros_) v += double(a.mult) / (z - a.point);
  for (const auto& b : poles_) v -= double(b.mult) / (z - b.point);
  return v;
}

cplx RationalMap::derivative(cplx z) const { return eval(z) * log_derivative(z); }

std::vector<cplx> RationalMap::log_derivative_numerator() const {
  // numerator of f'/f over the common denominator prod(z-a)(z-b)
  std::vector<cplx> pts;
  std::vector<double> weights;
  for (const auto& a : zeros_) {
    pts.push_back(a.point);
    weights.push_back(a.mult);
  }
  for (const auto& b : poles_) {
    pts.push_back(b.point);
    weights.push_back(-b.mult);
  }
  std::vector<cplx> num{0.0};
  for (std::size_t k = 0; k < pts.size(); k++) {
    std::vector<cplx> term{weights[k]};
    for (std::size_t j = 0; j < pts.size(); j++)
      if (j != k) term = poly::multiply(term, {-pts[j], 1.0});
    num.resize(std::max(num.size(), term.size()), 0.0);
    for (std::size_t i = 0; i < term.size(); i++) num[i] += term[i];
  }
  return poly::trim(num);
}

std::vector<ZeroPole> RationalMap::finite_critical_points() const {
  auto num = log_derivative_numerator();
  if (poly::degree(num) < 1 && std::abs(num[0]) < 1e-12) return {};
  auto rts = poly::roots(num);
  auto clusters = poly::cluster_roots(rts, 1e-7);
  std::vector<ZeroPole> out;
  for (auto& [pt, mult] : clusters) out.push_back({pt, mult});
  return out;
}

// ---------------------------------------------------------------------------

BlaschkeProduct::BlaschkeProduct(cplx lambda, std::vector<cplx> zeros)
    : lambda_(lambda), zeros_(std::move(zeros)) {
  if (std::abs(std::abs(lambda_) - 1.0) > 1e-12)
    throw std::invalid_argument("BlaschkeProduct: |lambda| must be 1");
  for (cplx a : zeros_)
    if (std::abs(a) >= 1.0)
      throw std::invalid_argument("BlaschkeProduct: zero not strictly inside the disk");
  if (zeros_.empty()) throw std::invalid_argument("BlaschkeProduct: degree must be >= 1");
}

BlaschkeProduct BlaschkeProduct::exterior_from_poles(cplx lambda,
                                                     const std::vector<cplx>& poles_outside,
                                                     int inf_degree) {
  if (inf_degree < 1)
    throw std::invalid_argument("exterior Blaschke product needs a pole at infinity");
  std::vector<cplx> zeros(inf_degree, 0.0);
  for (cplx b : poles_outside) {
    if (std::abs(b) <= 1.0)
      throw std::invalid_argument("exterior Blaschke product: pole not outside the circle");
    zeros.push_back(1.0 / std::conj(b));
  }
  return BlaschkeProduct(lambda, zeros);
}

cplx BlaschkeProduct::eval(cplx z) const {
  cplx v = lambda_;
  for (cplx a : zeros_) v *= (z - a) / (1.0 - std::conj(a) * z);
  return v;
}

cplx BlaschkeProduct::derivative(cplx z) const {
  // B' = B * sum (1-|a|^2) / ((z-a)(1-conj(a) z))
  cplx s = 0.0;
  for (cplx a : zeros_) s += (1.0 - std::norm(a)) / ((z - a) * (1.0 - std::conj(a) * z));
  return eval(z) * s;
}

double BlaschkeProduct::phase_derivative(double theta) const {
  cplx z = std::polar(1.0, theta);
  double s = 0.0;
  for (cplx a : zeros_) s += (1.0 - std::norm(a)) / std::norm(z - a);
  return s;
}

RationalMap BlaschkeProduct::as_rational() const {
  auto clusters = poly::cluster_roots(zeros_, 1e-12);
  std::vector<ZeroPole> zeros, poles;
  cplx c = lambda_;
  for (auto& [a, mult] : clusters) {
    zeros.push_back({a, mult});
    if (std::abs(a) > 1e-14) {
      poles.push_back({1.0 / std::conj(a), mult});
      c *= ipow(-1.0 / std::conj(a), mult);
    }
    // a zero at the origin has its reflected pole at infinity
  }
  return RationalMap(c, zeros, poles);
}

// ---------------------------------------------------------------------------

QuadDifferential log_derivative_qd(const RationalMap& f) {
  // Q_f = -(1/4 pi^2) (f'/f)^2: order-2 poles at every zero/pole of f, zeros
  // of even order at the critical points of f.
  std::vector<std::pair<cplx, int>> divisor;
  for (const auto& a : f.zeros()) divisor.push_back({a.point, -2});
  for (const auto& b : f.poles()) divisor.push_back({b.point, -2});
  auto num = f.log_derivative_numerator();
  if (poly::degree(num) >= 1 || std::abs(num[0]) > 1e-12) {
    for (const auto& c : f.finite_critical_points()) divisor.push_back({c.point, 2 * c.mult});
  }
  cplx lead = num.back();
  return QuadDifferential(-lead * lead / (4.0 * pi * pi), divisor);
}

QuadDifferential log_derivative_qd(const BlaschkeProduct& B) {
  return log_derivative_qd(B.as_rational());
}

CircleCriticalReport no_circle_critical_points(const BlaschkeProduct& B, int samples) {
  // |B'| on the circle equals the phase derivative, a sum of Poisson kernels.
  CircleCriticalReport rep;
  double best = std::numeric_limits<double>::infinity();
  double arg_best = 0.0;
  for (int i = 0; i < samples; i++) {
    double t = two_pi * i / samples;
    double v = B.phase_derivative(t);
    if (v < best) {
      best = v;
      arg_best = t;
    }
  }
  // refine around the sampled minimum
  double lo = arg_best - two_pi / samples, hi = arg_best + two_pi / samples;
  for (int round = 0; round < 40; round++) {
    double t1 = lo + (hi - lo) / 3.0, t2 = hi - (hi - lo) / 3.0;
    if (B.phase_derivative(t1) < B.phase_derivative(t2))
      hi = t2;
    else
      lo = t1;
  }
  double refined = B.phase_derivative(0.5 * (lo + hi));
  rep.min_abs_derivative = std::min(best, refined);
  rep.argmin_theta = wrap_angle(0.5 * (lo + hi));
  rep.pass = rep.min_abs_derivative > 1e-12;
  return rep;
}

QuotientCriticalResult quotient_circle_critical(const BlaschkeProduct& A,
                                                const BlaschkeProduct& B, int samples) {
  if (A.degree() != B.degree())
    throw std::invalid_argument("quotient_circle_critical: degrees must match");
  QuotientCriticalResult res;
  auto g = [&](double t) { return A.phase_derivative(t) - B.phase_derivative(t); };

  double max_abs = 0.0;
  std::vector<double> vals(samples);
  for (int i = 0; i < samples; i++) {
    vals[i] = g(two_pi * i / samples);
    max_abs = std::max(max_abs, std::abs(vals[i]));
  }
  if (max_abs < 1e-11) {
    res.identically_critical = true;
    return res;
  }
  for (int i = 0; i < samples; i++) {
    double t0 = two_pi * i / samples, t1 = two_pi * (i + 1) / samples;
    double v0 = vals[i], v1 = vals[(i + 1) % samples];
    if (v0 == 0.0) {
      res.thetas.push_back(t0);
      continue;
    }
    if (v0 * v1 < 0) {
      double lo = t0, hi = t1;
      for (int it = 0; it < 80; it++) {
        double mid = 0.5 * (lo + hi);
        if (g(mid) * v0 <= 0)
          hi = mid;
        else
          lo = mid;
      }
      res.thetas.push_back(0.5 * (lo + hi));
    }
  }
  if (res.thetas.empty())
    throw std::runtime_error(
        "quotient_circle_critical: no circle critical point found (contract violation)");
  return res;
}

}  // namespace qdw
