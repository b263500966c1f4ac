#include "qdweld/polygon.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace qdw {

namespace {

double wrap_pos(double t) {
  t = std::fmod(t, two_pi);
  return t < 0 ? t + two_pi : t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Polygon validation

void CartesianPolygon::validate() {
  std::size_t m = vertices.size();
  if (m < 4 || m % 2 != 0)
    throw std::invalid_argument("CartesianPolygon: needs an even number (>= 4) of vertices");
  double scale = 0;
  for (cplx v : vertices) scale = std::max(scale, std::abs(v));
  const double tol = 1e-9 * (1.0 + scale);
  // sides alternate horizontal / vertical, first side horizontal
  for (std::size_t k = 0; k < m; k++) {
    cplx d = vertices[(k + 1) % m] - vertices[k];
    if (std::abs(d) < tol) throw std::invalid_argument("CartesianPolygon: degenerate side");
    bool horizontal = std::abs(d.imag()) < tol;
    bool vertical = std::abs(d.real()) < tol;
    if (!(horizontal || vertical))
      throw std::invalid_argument("CartesianPolygon: side neither horizontal nor vertical");
    if (k % 2 == 0 && !horizontal)
      throw std::invalid_argument("CartesianPolygon: sides must alternate starting horizontal");
    if (k % 2 == 1 && !vertical)
      throw std::invalid_argument("CartesianPolygon: sides must alternate starting horizontal");
  }
  double area = 0;
  for (std::size_t k = 0; k < m; k++) {
    cplx p = vertices[k], q = vertices[(k + 1) % m];
    area += 0.5 * (p.real() * q.imag() - q.real() * p.imag());
  }
  if (area <= 0) throw std::invalid_argument("CartesianPolygon: orientation must be counterclockwise");

  alphas.assign(m, 0.0);
  int convex = 0, reflex = 0;
  for (std::size_t k = 0; k < m; k++) {
    cplx din = vertices[k] - vertices[(k + m - 1) % m];
    cplx dout = vertices[(k + 1) % m] - vertices[k];
    double cross = din.real() * dout.imag() - din.imag() * dout.real();
    if (cross > 0) {
      alphas[k] = 0.5;
      convex++;
    } else {
      alphas[k] = 1.5;
      reflex++;
    }
  }
  int n = int(m) / 2;
  if (convex != n + 2 || reflex != n - 2)
    throw std::invalid_argument("CartesianPolygon: angle counts must be n+2 right, n-2 reflex");
}

JordanCurve CartesianPolygon::to_curve(int per_side) const {
  return JordanCurve::polygon(vertices, per_side);
}

void PolarPolygon::validate() {
  std::size_t m = vertices.size();
  if (m < 4 || m % 2 != 0)
    throw std::invalid_argument("PolarPolygon: needs an even number (>= 4) of vertices");
  double scale = 0;
  for (cplx v : vertices) scale = std::max(scale, std::abs(v));
  const double tol = 1e-9 * (1.0 + scale);
  for (std::size_t k = 0; k < m; k++) {
    cplx a = vertices[k], b = vertices[(k + 1) % m];
    bool circular = std::abs(std::abs(a) - std::abs(b)) < tol;
    bool radial = std::abs(wrap_pos(std::arg(b)) - wrap_pos(std::arg(a))) < 1e-9 ||
                  std::abs(std::abs(wrap_pos(std::arg(b)) - wrap_pos(std::arg(a))) - two_pi) < 1e-9;
    if (k % 2 == 0 && !circular)
      throw std::invalid_argument("PolarPolygon: even sides must be circular arcs");
    if (k % 2 == 1 && !radial)
      throw std::invalid_argument("PolarPolygon: odd sides must be radial segments");
  }
  // tangent directions at each vertex give the interior angle
  alphas.assign(m, 0.0);
  int right = 0, reflex = 0;
  auto tangent_out = [&](std::size_t k) {
    cplx a = vertices[k], b = vertices[(k + 1) % m];
    if (k % 2 == 0) {  // circular, counterclockwise sweep
      double sweep = wrap_pos(std::arg(b) - std::arg(a));
      (void)sweep;
      return cplx(0, 1) * a / std::abs(a);
    }
    return (b - a) / std::abs(b - a);
  };
  auto tangent_in = [&](std::size_t k) {
    std::size_t j = (k + m - 1) % m;
    cplx a = vertices[j], b = vertices[k];
    if (j % 2 == 0) return cplx(0, 1) * b / std::abs(b);
    return (b - a) / std::abs(b - a);
  };
  for (std::size_t k = 0; k < m; k++) {
    double turn = std::arg(tangent_out(k) / tangent_in(k));
    double interior = pi - turn;
    double al = interior / pi;
    if (std::abs(al - 0.5) < 1e-6) {
      alphas[k] = 0.5;
      right++;
    } else if (std::abs(al - 1.5) < 1e-6) {
      alphas[k] = 1.5;
      reflex++;
    } else {
      throw std::invalid_argument("PolarPolygon: vertex angle must be pi/2 or 3 pi/2");
    }
  }
  if (right != reflex)
    throw std::invalid_argument("PolarPolygon: must have n right and n reflex vertices");
  JordanCurve c = to_curve(24);
  if (!c.contains(0.0)) throw std::invalid_argument("PolarPolygon: origin must lie inside");
}

JordanCurve PolarPolygon::to_curve(int per_side) const {
  std::size_t m = vertices.size();
  std::vector<cplx> pts;
  std::vector<CornerTag> corners;
  double s = 0;
  std::vector<double> prm;
  for (std::size_t k = 0; k < m; k++) {
    cplx a = vertices[k], b = vertices[(k + 1) % m];
    corners.push_back({s, std::nullopt});
    if (k % 2 == 0) {  // circular arc, counterclockwise
      double r = std::abs(a);
      double t0 = std::arg(a);
      double sweep = wrap_pos(std::arg(b) - std::arg(a));
      for (int j = 0; j < per_side; j++) {
        double t = t0 + sweep * j / per_side;
        pts.push_back(std::polar(r, t));
        prm.push_back(s + r * sweep * j / per_side);
      }
      s += r * sweep;
    } else {
      for (int j = 0; j < per_side; j++) {
        double t = double(j) / per_side;
        pts.push_back(a + t * (b - a));
        prm.push_back(s + t * std::abs(b - a));
      }
      s += std::abs(b - a);
    }
  }
  pts.push_back(vertices[0]);
  prm.push_back(s);
  JordanCurve c;
  c.path = PathSample(pts, prm);
  c.corners = corners;
  return c;
}

// ---------------------------------------------------------------------------
// Side-length integrals and the prevertex parameter problem

namespace {

// |prod (e^{i theta} - e^{i beta_j})^{e_j}| = prod (2 sin((theta-beta_j)/2))^{e_j}
double side_integrand_mod(const std::vector<double>& beta, const std::vector<double>& expo,
                          double theta) {
  double v = 1.0;
  for (std::size_t j = 0; j < beta.size(); j++) {
    double t = wrap_pos(theta - beta[j]);
    double s = 2.0 * std::sin(0.5 * t);
    v *= std::pow(std::abs(s), expo[j]);
  }
  return v;
}

double side_length(const std::vector<double>& beta, const std::vector<double>& expo,
                   std::size_t k, double quad_tol) {
  std::size_t m = beta.size();
  double a = beta[k], b = (k + 1 < m) ? beta[k + 1] : beta[0] + two_pi;
  auto f = [&](double th) { return cplx(side_integrand_mod(beta, expo, th), 0.0); };
  return adaptive_integral(f, a, b, quad_tol, EndpointPower{expo[k]},
                           EndpointPower{expo[(k + 1) % m]})
      .value.real();
}

// damped Gauss-Newton on softmax-parametrized gaps; residuals are log ratios;
// the initial gaps are proportional to the target side lengths
std::vector<double> solve_gaps(const std::vector<double>& expo, const std::vector<double>& targets,
                               const SolveOptions& opts) {
  std::size_t m = expo.size();
  auto gaps_of = [&](const Eigen::VectorXd& y) {
    std::vector<double> g(m);
    double mx = 0;
    for (std::size_t i = 1; i < m; i++) mx = std::max(mx, y[i - 1]);
    double sum = std::exp(0.0 - mx);
    g[0] = sum;
    for (std::size_t i = 1; i < m; i++) {
      g[i] = std::exp(y[i - 1] - mx);
      sum += g[i];
    }
    for (double& gi : g) gi *= two_pi / sum;
    return g;
  };
  auto residuals = [&](const Eigen::VectorXd& y) {
    std::vector<double> g = gaps_of(y);
    std::vector<double> beta(m);
    beta[0] = 0;
    for (std::size_t i = 1; i < m; i++) beta[i] = beta[i - 1] + g[i - 1];
    Eigen::VectorXd r(m - 1);
    double l0 = side_length(beta, expo, 0, opts.quad_tol);
    for (std::size_t k = 1; k < m; k++) {
      double lk = side_length(beta, expo, k, opts.quad_tol);
      r[k - 1] = std::log(lk / l0) - std::log(targets[k] / targets[0]);
    }
    return r;
  };

  Eigen::VectorXd y(m - 1);
  for (std::size_t i = 1; i < m; i++) y[i - 1] = std::log(targets[i] / targets[0]);
  Eigen::VectorXd r = residuals(y);
  double lambda = 1e-10;
  double best = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < opts.max_iterations && best > opts.tol; it++) {
    Eigen::MatrixXd J(m - 1, m - 1);
    double h = 1e-7;
    for (std::size_t j = 0; j + 1 < m; j++) {
      Eigen::VectorXd y2 = y;
      y2[j] += h;
      J.col(j) = (residuals(y2) - r) / h;
    }
    for (int tries = 0; tries < 12; tries++) {
      Eigen::MatrixXd A = J.transpose() * J + lambda * Eigen::MatrixXd::Identity(m - 1, m - 1);
      Eigen::VectorXd delta = A.ldlt().solve(-J.transpose() * r);
      Eigen::VectorXd y_new = y + delta;
      Eigen::VectorXd r_new = residuals(y_new);
      if (r_new.lpNorm<Eigen::Infinity>() < best) {
        y = y_new;
        r = r_new;
        best = r.lpNorm<Eigen::Infinity>();
        lambda = std::max(lambda * 0.25, 1e-12);
        break;
      }
      lambda *= 10;
      if (tries == 11) it = opts.max_iterations;  // stalled
    }
  }
  if (best > std::max(opts.tol, 1e-9))
    throw ParameterProblemError("solve_gaps: parameter problem did not converge", best);
  std::vector<double> g = gaps_of(y);
  return g;
}

std::vector<double> betas_from_gaps(const std::vector<double>& gaps) {
  std::vector<double> beta(gaps.size());
  beta[0] = 0;
  for (std::size_t i = 1; i < gaps.size(); i++) beta[i] = beta[i - 1] + gaps[i - 1];
  return beta;
}

// prod (1 - e^{i beta_j} / z)^{e_j} with principal per-factor powers; analytic
// and single-branch for |z| >= 1 (the bases stay in the right half-plane)
cplx outer_product(const std::vector<double>& beta, const std::vector<double>& expo, cplx z) {
  cplx v = 1.0;
  for (std::size_t j = 0; j < beta.size(); j++)
    v *= std::pow(1.0 - std::polar(1.0, beta[j]) / z, expo[j]);
  return v;
}

// prod (1 - e^{-i beta_j} z)^{e_j}, single branch on the closed disk
cplx inner_product(const std::vector<double>& beta, const std::vector<double>& expo, cplx z) {
  cplx v = 1.0;
  for (std::size_t j = 0; j < beta.size(); j++)
    v *= std::pow(1.0 - std::polar(1.0, -beta[j]) * z, expo[j]);
  return v;
}

cplx inner_anchor(const std::vector<double>& beta, const std::vector<double>& expo) {
  // prod (-e^{i beta_j})^{e_j}: (z - e^{i beta}) = (-e^{i beta}) (1 - e^{-i beta} z)
  cplx v = 1.0;
  for (std::size_t j = 0; j < beta.size(); j++)
    v *= std::pow(-std::polar(1.0, beta[j]), expo[j]);
  return v;
}

// complex side integral of the interior SC derivative over (beta_k, beta_{k+1})
cplx interior_side_integral(const std::vector<double>& beta, const std::vector<double>& expo,
                            std::size_t k, double quad_tol) {
  std::size_t m = beta.size();
  double a = beta[k], b = (k + 1 < m) ? beta[k + 1] : beta[0] + two_pi;
  cplx anchor = inner_anchor(beta, expo);
  auto f = [&](double th) {
    cplx z = std::polar(1.0, th);
    return anchor * inner_product(beta, expo, z) * cplx(0, 1) * z;
  };
  return adaptive_integral(f, a, b, quad_tol, EndpointPower{expo[k]},
                           EndpointPower{expo[(k + 1) % m]})
      .value;
}

// complex side integral of the exterior SC derivative phi' = S * outer_product
cplx exterior_side_integral(const std::vector<double>& beta, const std::vector<double>& expo,
                            std::size_t k, double quad_tol) {
  std::size_t m = beta.size();
  double a = beta[k], b = (k + 1 < m) ? beta[k + 1] : beta[0] + two_pi;
  auto f = [&](double th) {
    cplx z = std::polar(1.0, th);
    return outer_product(beta, expo, z) * cplx(0, 1) * z;
  };
  return adaptive_integral(f, a, b, quad_tol, EndpointPower{expo[k]},
                           EndpointPower{expo[(k + 1) % m]})
      .value;
}

std::vector<double> cartesian_targets(const std::vector<cplx>& vertices) {
  std::vector<double> L(vertices.size());
  for (std::size_t k = 0; k < vertices.size(); k++)
    L[k] = std::abs(vertices[(k + 1) % vertices.size()] - vertices[k]);
  return L;
}

std::vector<double> polar_targets(const std::vector<cplx>& vertices) {
  // side lengths of the logarithmic image: circular arcs become horizontal
  // sweeps, radial segments become vertical runs
  std::vector<double> L(vertices.size());
  for (std::size_t k = 0; k < vertices.size(); k++) {
    cplx a = vertices[k], b = vertices[(k + 1) % vertices.size()];
    if (k % 2 == 0)
      L[k] = wrap_pos(std::arg(b) - std::arg(a));
    else
      L[k] = std::abs(std::log(std::abs(b) / std::abs(a)));
    if (!(L[k] > 0)) throw std::invalid_argument("polar_targets: degenerate side");
  }
  return L;
}

}  // namespace

Prevertices solve_prevertices_interior(const CartesianPolygon& poly, const SolveOptions& opts) {
  CartesianPolygon p = poly;
  p.validate();
  std::size_t m = p.vertices.size();
  std::vector<double> expo(m);
  for (std::size_t k = 0; k < m; k++) expo[k] = p.alphas[k] - 1.0;
  auto targets = cartesian_targets(p.vertices);
  auto gaps = solve_gaps(expo, targets, opts);
  Prevertices pv;
  pv.beta = betas_from_gaps(gaps);
  pv.side = Side::interior;
  // SC scale from the first side
  cplx K1 = interior_side_integral(pv.beta, expo, 0, opts.quad_tol);
  pv.sc_scale = (p.vertices[1] - p.vertices[0]) / K1;
  double g = 0;
  for (std::size_t k = 0; k < m; k++) g += (1.0 - p.alphas[k]) * pv.beta[k];
  pv.gamma = std::remainder(g, two_pi);
  cplx constant = pv.sc_scale * pv.sc_scale;  // Q constant before splitting off gamma
  // evaluate against the stored-divisor convention at a test point
  cplx zt(0.33, 0.12);
  cplx num = constant * inner_anchor(pv.beta, expo) * inner_product(pv.beta, expo, zt) *
             inner_anchor(pv.beta, expo) * inner_product(pv.beta, expo, zt);
  cplx den = 1.0;
  for (std::size_t j = 0; j < m; j++)
    den *= std::pow(zt - std::polar(1.0, pv.beta[j]), 2.0 * expo[j]);
  cplx c_full = num / den;
  // the angle-sum formula determines gamma mod pi; fold the sign into gamma
  cplx rot = c_full * std::polar(1.0, -pv.gamma);
  if (std::abs(std::imag(rot)) > 1e-7 * std::abs(rot))
    throw ConstraintError("solve_prevertices_interior: constant not real");
  if (std::real(rot) < 0) pv.gamma = std::remainder(pv.gamma + pi, two_pi);
  pv.C = std::abs(rot);
  return pv;
}

Prevertices solve_prevertices_exterior(const CartesianPolygon& poly, const SolveOptions& opts) {
  CartesianPolygon p = poly;
  p.validate();
  std::size_t m = p.vertices.size();
  std::vector<double> expo(m);
  for (std::size_t k = 0; k < m; k++) expo[k] = 1.0 - p.alphas[k];
  auto targets = cartesian_targets(p.vertices);
  auto gaps = solve_gaps(expo, targets, opts);
  std::vector<double> beta = betas_from_gaps(gaps);

  // rotate the prevertex system so phi_+'(inf) > 0: shifting the prevertices
  // by c changes the scale by S(beta + c) = e^{-ic} S(beta)
  cplx J1 = exterior_side_integral(beta, expo, 0, opts.quad_tol);
  cplx S = (p.vertices[1] - p.vertices[0]) / J1;  // phi'(inf) in this gauge
  for (double& b : beta) b += std::arg(S);
  double base = wrap_pos(beta[0]) - beta[0];
  for (double& b : beta) b += base;

  Prevertices pv;
  pv.beta = beta;
  pv.side = Side::exterior;
  cplx J1r = exterior_side_integral(beta, expo, 0, opts.quad_tol);
  pv.sc_scale = (p.vertices[1] - p.vertices[0]) / J1r;
  if (std::abs(std::arg(pv.sc_scale)) > 1e-8)
    throw ConstraintError("solve_prevertices_exterior: rotation normalization failed");
  double g = 0;
  for (std::size_t k = 0; k < m; k++) g += (p.alphas[k] - 1.0) * pv.beta[k];
  pv.gamma = std::remainder(g, two_pi);
  cplx zt(1.7, 0.6);
  cplx sq = pv.sc_scale * outer_product(pv.beta, expo, zt);  // phi'(zt)
  cplx c_full = sq * sq;
  cplx den = 1.0;
  for (std::size_t j = 0; j < m; j++)
    den *= std::pow(zt - std::polar(1.0, pv.beta[j]), 2.0 * expo[j]);
  den /= zt * zt * zt * zt;
  c_full /= den;
  cplx rot = c_full * std::polar(1.0, -pv.gamma);
  if (std::abs(std::imag(rot)) > 1e-7 * std::abs(rot))
    throw ConstraintError("solve_prevertices_exterior: constant not real");
  if (std::real(rot) < 0) pv.gamma = std::remainder(pv.gamma + pi, two_pi);
  pv.C = std::abs(rot);
  return pv;
}

Prevertices solve_prevertices_interior(const PolarPolygon& poly, const SolveOptions& opts) {
  PolarPolygon p = poly;
  p.validate();
  std::size_t m = p.vertices.size();
  std::vector<double> expo(m);
  for (std::size_t k = 0; k < m; k++) expo[k] = p.alphas[k] - 1.0;
  auto targets = polar_targets(p.vertices);
  auto gaps = solve_gaps(expo, targets, opts);
  Prevertices pv;
  pv.beta = betas_from_gaps(gaps);
  pv.side = Side::interior;
  pv.C = 1.0;
  double g = 0;
  for (std::size_t k = 0; k < m; k++) g += 2.0 * (1.0 - p.alphas[k]) * pv.beta[k];
  pv.gamma = std::remainder(g, two_pi);
  // Eq 5.8: sum (1 - alpha_k) beta_k = pi (mod 2 pi)
  double s58 = 0;
  for (std::size_t k = 0; k < m; k++) s58 += (1.0 - p.alphas[k]) * pv.beta[k];
  if (std::abs(std::remainder(s58 - pi, two_pi)) > 1e-7)
    throw ConstraintError("solve_prevertices_interior(polar): angle-sum constraint violated");
  // residue normalization: g = S z^{-1} P0(z) with S P0(0) = 1
  cplx P0 = inner_anchor(pv.beta, expo);  // inner_product at z = 0 equals 1
  pv.sc_scale = 1.0 / P0;
  return pv;
}

Prevertices solve_prevertices_exterior(const PolarPolygon& poly, const SolveOptions& opts) {
  PolarPolygon p = poly;
  p.validate();
  std::size_t m = p.vertices.size();
  std::vector<double> expo(m);
  for (std::size_t k = 0; k < m; k++) expo[k] = 1.0 - p.alphas[k];
  auto targets = polar_targets(p.vertices);
  auto gaps = solve_gaps(expo, targets, opts);
  std::vector<double> beta = betas_from_gaps(gaps);

  // rotate so that phi_+(z)/z has positive limit: arg A via the ray integral
  // A = v1 e^{-i beta_1} exp(-int_ray (g - 1/tau) d tau), g = P_inf(tau)/tau
  auto ray_integral = [&](const std::vector<double>& bet) {
    cplx e1 = std::polar(1.0, bet[0]);
    auto f = [&](double u) {
      // tau = e1 / u, u in (0, 1]; d tau = -e1/u^2 du; (g - 1/tau) d tau
      if (u <= 0) return cplx(0, 0);
      cplx tau = e1 / u;
      cplx g = (outer_product(bet, expo, tau) - 1.0) / tau;
      return g * (-e1 / (u * u));
    };
    // integrate u from 1 to 0 along the ray to infinity; flip sign for 0 to 1
    return -adaptive_integral(f, 0.0, 1.0, opts.quad_tol, std::nullopt,
                              EndpointPower{expo[0]})
                .value;
  };
  // A(beta + c) = e^{-ic} A(beta); rotate so arg A = 0
  cplx ray = ray_integral(beta);
  cplx A = p.vertices[0] * std::polar(1.0, -beta[0]) * std::exp(-ray);
  for (double& b : beta) b += std::arg(A);
  double base = wrap_pos(beta[0]) - beta[0];
  for (double& b : beta) b += base;
  cplx ray2 = ray_integral(beta);
  cplx A2 = p.vertices[0] * std::polar(1.0, -beta[0]) * std::exp(-ray2);
  if (std::abs(std::arg(A2)) > 1e-6)
    throw ConstraintError("solve_prevertices_exterior(polar): rotation normalization failed");

  Prevertices pv;
  pv.beta = beta;
  pv.side = Side::exterior;
  pv.C = 1.0;
  pv.sc_scale = 1.0;
  double g = 0;
  for (std::size_t k = 0; k < m; k++) g += (p.alphas[k] - 1.0) * pv.beta[k];
  if (std::abs(std::remainder(g - pi, two_pi)) > 1e-7)
    throw ConstraintError("solve_prevertices_exterior(polar): angle-sum constraint violated");
  pv.gamma = std::remainder(2.0 * g, two_pi);
  return pv;
}

// ---------------------------------------------------------------------------
// Quadratic differentials from prevertex data

std::pair<QuadDifferential, QuadDifferential> cartesian_qds(const CartesianPolygon& poly,
                                                            const Prevertices& interior,
                                                            const Prevertices& exterior) {
  CartesianPolygon p = poly;
  p.validate();
  std::size_t m = p.vertices.size();

  std::vector<std::pair<cplx, int>> div_m, div_p;
  for (std::size_t k = 0; k < m; k++) {
    div_m.push_back({std::polar(1.0, interior.beta[k]), int(std::lround(2 * (p.alphas[k] - 1)))});
    div_p.push_back({std::polar(1.0, exterior.beta[k]), int(std::lround(2 * (1 - p.alphas[k])))});
  }
  div_p.push_back({0.0, -4});

  // constants: Q = (phi')^2 evaluated against the stored monomial divisor
  std::vector<double> expo_m(m), expo_p(m);
  for (std::size_t k = 0; k < m; k++) {
    expo_m[k] = p.alphas[k] - 1.0;
    expo_p[k] = 1.0 - p.alphas[k];
  }
  cplx zt(0.29, 0.17);
  cplx phi_d = interior.sc_scale * inner_anchor(interior.beta, expo_m) *
               inner_product(interior.beta, expo_m, zt);
  cplx den = 1.0;
  for (std::size_t j = 0; j < m; j++)
    den *= std::pow(zt - std::polar(1.0, interior.beta[j]), 2.0 * expo_m[j]);
  cplx c_minus = phi_d * phi_d / den;

  cplx zt2(1.61, 0.83);
  cplx phip_d = exterior.sc_scale * outer_product(exterior.beta, expo_p, zt2);
  cplx den2 = 1.0 / (zt2 * zt2 * zt2 * zt2);
  for (std::size_t j = 0; j < m; j++)
    den2 *= std::pow(zt2 - std::polar(1.0, exterior.beta[j]), 2.0 * expo_p[j]);
  cplx c_plus = phip_d * phip_d / den2;

  return {QuadDifferential(c_minus, div_m), QuadDifferential(c_plus, div_p)};
}

std::pair<QuadDifferential, QuadDifferential> polar_qds(const PolarPolygon& poly,
                                                        const Prevertices& interior,
                                                        const Prevertices& exterior) {
  PolarPolygon p = poly;
  p.validate();
  std::size_t m = p.vertices.size();
  std::vector<std::pair<cplx, int>> div_m, div_p;
  div_m.push_back({0.0, -2});
  div_p.push_back({0.0, -2});
  for (std::size_t k = 0; k < m; k++) {
    div_m.push_back({std::polar(1.0, interior.beta[k]), int(std::lround(2 * (p.alphas[k] - 1)))});
    div_p.push_back({std::polar(1.0, exterior.beta[k]), int(std::lround(2 * (1 - p.alphas[k])))});
  }

  std::vector<double> expo_m(m), expo_p(m);
  for (std::size_t k = 0; k < m; k++) {
    expo_m[k] = p.alphas[k] - 1.0;
    expo_p[k] = 1.0 - p.alphas[k];
  }
  // interior: Q = -(g)^2, g = S z^{-1} P0(z) with residue 1
  cplx zt(0.31, 0.18);
  cplx g_val = interior.sc_scale * inner_anchor(interior.beta, expo_m) *
               inner_product(interior.beta, expo_m, zt) / zt;
  cplx den = 1.0 / (zt * zt);
  for (std::size_t j = 0; j < m; j++)
    den *= std::pow(zt - std::polar(1.0, interior.beta[j]), 2.0 * expo_m[j]);
  cplx c_minus = -g_val * g_val / den;
  if (std::abs(c_minus - cplx(-1.0, 0.0)) > 1e-6)
    throw ConstraintError("polar_qds: interior z^{-2} coefficient is not -1");

  cplx zt2(1.73, 0.51);
  cplx g_plus = outer_product(exterior.beta, expo_p, zt2) / zt2;
  cplx den2 = 1.0 / (zt2 * zt2);
  for (std::size_t j = 0; j < m; j++)
    den2 *= std::pow(zt2 - std::polar(1.0, exterior.beta[j]), 2.0 * expo_p[j]);
  cplx c_plus = -g_plus * g_plus / den2;
  if (std::abs(c_plus - cplx(-1.0, 0.0)) > 1e-6)
    throw ConstraintError("polar_qds: exterior z^{-2} coefficient is not -1");

  return {QuadDifferential(cplx(-1.0, 0.0), div_m), QuadDifferential(cplx(-1.0, 0.0), div_p)};
}

// ---------------------------------------------------------------------------

std::vector<double> coordination_residual(const std::vector<double>& alphas,
                                          const Prevertices& interior,
                                          const Prevertices& exterior, bool polar) {
  std::size_t m = alphas.size();
  std::vector<double> expo_m(m), expo_p(m);
  for (std::size_t k = 0; k < m; k++) {
    expo_m[k] = alphas[k] - 1.0;
    expo_p[k] = 1.0 - alphas[k];
  }
  // target constant of the ratio identity
  cplx target;
  if (polar) {
    target = 1.0;
  } else {
    double C = std::sqrt(interior.C / exterior.C);
    double gamma = 0.5 * (interior.gamma - exterior.gamma);
    target = std::polar(C, gamma);
  }
  std::vector<double> out(m);
  for (std::size_t k = 0; k < m; k++) {
    cplx up, dn;
    if (polar) {
      auto f_up = [&](double th) {
        cplx z = std::polar(1.0, th);
        return outer_product(exterior.beta, expo_p, z);
      };
      auto f_dn = [&](double th) {
        cplx z = std::polar(1.0, th);
        return inner_anchor(interior.beta, expo_m) * inner_product(interior.beta, expo_m, z);
      };
      double a_up = exterior.beta[k],
             b_up = (k + 1 < m) ? exterior.beta[k + 1] : exterior.beta[0] + two_pi;
      double a_dn = interior.beta[k],
             b_dn = (k + 1 < m) ? interior.beta[k + 1] : interior.beta[0] + two_pi;
      up = adaptive_integral(f_up, a_up, b_up, 1e-12, EndpointPower{expo_p[k]},
                             EndpointPower{expo_p[(k + 1) % m]})
               .value;
      dn = adaptive_integral(f_dn, a_dn, b_dn, 1e-12, EndpointPower{expo_m[k]},
                             EndpointPower{expo_m[(k + 1) % m]})
               .value;
    } else {
      auto f_up = [&](double th) {
        cplx z = std::polar(1.0, th);
        return outer_product(exterior.beta, expo_p, z) * z;
      };
      auto f_dn = [&](double th) {
        cplx z = std::polar(1.0, th);
        return inner_anchor(interior.beta, expo_m) * inner_product(interior.beta, expo_m, z) * z;
      };
      double a_up = exterior.beta[k],
             b_up = (k + 1 < m) ? exterior.beta[k + 1] : exterior.beta[0] + two_pi;
      double a_dn = interior.beta[k],
             b_dn = (k + 1 < m) ? interior.beta[k + 1] : interior.beta[0] + two_pi;
      up = adaptive_integral(f_up, a_up, b_up, 1e-12, EndpointPower{expo_p[k]},
                             EndpointPower{expo_p[(k + 1) % m]})
               .value;
      dn = adaptive_integral(f_dn, a_dn, b_dn, 1e-12, EndpointPower{expo_m[k]},
                             EndpointPower{expo_m[(k + 1) % m]})
               .value;
    }
    cplx ratio = up / dn;
    out[k] = std::min(std::abs(ratio - target), std::abs(ratio + target));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

PolygonFingerprint fingerprint_from_qds(const QuadDifferential& qm, const QuadDifferential& qp,
                                        const Prevertices& pin, const Prevertices& pex,
                                        const std::vector<double>& coord) {
  // align arcs by vertex index: arc j runs from prevertex j to j+1
  CircleArcSystem am = circle_decomposition(qm);
  CircleArcSystem ap = circle_decomposition(qp);
  std::size_t m = pin.beta.size();
  if (am.arcs.size() != m || ap.arcs.size() != m)
    throw CoordinationViolation("polygon_fingerprint: arc count does not match vertex count");
  auto rotate_to = [&](CircleArcSystem sys, double start_angle) {
    std::size_t best = 0;
    double best_d = 1e9;
    for (std::size_t j = 0; j < sys.arcs.size(); j++) {
      double d = std::abs(std::remainder(sys.arcs[j].theta_start - start_angle, two_pi));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best_d > 1e-6)
      throw CoordinationViolation("polygon_fingerprint: prevertex does not start an arc");
    CircleArcSystem out;
    for (std::size_t j = 0; j < sys.arcs.size(); j++)
      out.arcs.push_back(sys.arcs[(best + j) % sys.arcs.size()]);
    return out;
  };
  CoordinatedPair pair{qm, qp, rotate_to(am, pin.beta[0]), rotate_to(ap, pex.beta[0]), 0, {}, {},
                       {}};
  pair = choose_representatives(pair);
  PolygonFingerprint out{welding_fingerprint(pair, 512), pin, pex, qm, qp, coord};
  return out;
}

}  // namespace

PolygonFingerprint polygon_fingerprint(const CartesianPolygon& poly, const SolveOptions& opts) {
  CartesianPolygon p = poly;
  p.validate();
  Prevertices pin = solve_prevertices_interior(p, opts);
  Prevertices pex = solve_prevertices_exterior(p, opts);
  auto coord = coordination_residual(p.alphas, pin, pex, false);
  for (double r : coord)
    if (r > 1e-6)
      throw CoordinationViolation("polygon_fingerprint: coordination residual too large");
  auto [qm, qp] = cartesian_qds(p, pin, pex);
  return fingerprint_from_qds(qm, qp, pin, pex, coord);
}

PolygonFingerprint polygon_fingerprint(const PolarPolygon& poly, const SolveOptions& opts) {
  PolarPolygon p = poly;
  p.validate();
  Prevertices pin = solve_prevertices_interior(p, opts);
  Prevertices pex = solve_prevertices_exterior(p, opts);
  auto coord = coordination_residual(p.alphas, pin, pex, true);
  for (double r : coord)
    if (r > 1e-6)
      throw CoordinationViolation("polygon_fingerprint: coordination residual too large");
  auto [qm, qp] = polar_qds(p, pin, pex);
  return fingerprint_from_qds(qm, qp, pin, pex, coord);
}

// ---------------------------------------------------------------------------

PropositionReport proposition_check(const std::vector<double>& alphas,
                                    const std::vector<double>& beta_interior,
                                    const std::vector<double>& beta_exterior_candidate) {
  std::size_t n = alphas.size();
  double asum = 0;
  for (double a : alphas) asum += a;
  if (std::abs(asum - (double(n) - 2.0)) > 1e-10)
    throw std::invalid_argument("proposition_check: angle sum must be n - 2");

  std::vector<double> expo_m(n), expo_p(n);
  for (std::size_t k = 0; k < n; k++) {
    expo_m[k] = alphas[k] - 1.0;
    expo_p[k] = 1.0 - alphas[k];
  }
  PropositionReport rep;
  // fit C e^{i gamma} from arc 1, check the remaining arcs
  std::vector<cplx> ratios(n);
  for (std::size_t k = 0; k < n; k++) {
    auto f_up = [&](double th) {
      cplx z = std::polar(1.0, th);
      return outer_product(beta_exterior_candidate, expo_p, z) * z;
    };
    auto f_dn = [&](double th) {
      cplx z = std::polar(1.0, th);
      return inner_anchor(beta_interior, expo_m) * inner_product(beta_interior, expo_m, z) * z;
    };
    double a_up = beta_exterior_candidate[k],
           b_up = (k + 1 < n) ? beta_exterior_candidate[k + 1] : beta_exterior_candidate[0] + two_pi;
    double a_dn = beta_interior[k],
           b_dn = (k + 1 < n) ? beta_interior[k + 1] : beta_interior[0] + two_pi;
    cplx up = adaptive_integral(f_up, a_up, b_up, 1e-12, EndpointPower{expo_p[k]},
                                EndpointPower{expo_p[(k + 1) % n]})
                  .value;
    cplx dn = adaptive_integral(f_dn, a_dn, b_dn, 1e-12, EndpointPower{expo_m[k]},
                                EndpointPower{expo_m[(k + 1) % n]})
                  .value;
    ratios[k] = up / dn;
  }
  rep.residuals.resize(n);
  rep.residuals[0] = 0.0;
  bool ok = true;
  for (std::size_t k = 1; k < n; k++) {
    rep.residuals[k] = std::abs(ratios[k] - ratios[0]);
    if (rep.residuals[k] > 1e-6 * (1.0 + std::abs(ratios[0]))) ok = false;
  }
  rep.coordinated = ok;

  // univalence: the SC image polyline must be simple
  std::vector<cplx> verts(n + 1, 0.0);
  for (std::size_t k = 0; k < n; k++) {
    auto f = [&](double th) {
      cplx z = std::polar(1.0, th);
      return inner_anchor(beta_interior, expo_m) * inner_product(beta_interior, expo_m, z) *
             cplx(0, 1) * z;
    };
    double a = beta_interior[k], b = (k + 1 < n) ? beta_interior[k + 1] : beta_interior[0] + two_pi;
    verts[k + 1] = verts[k] + adaptive_integral(f, a, b, 1e-12, EndpointPower{expo_m[k]},
                                                EndpointPower{expo_m[(k + 1) % n]})
                                  .value;
  }
  double scale = 0;
  for (cplx v : verts) scale = std::max(scale, std::abs(v));
  bool closes = std::abs(verts[n] - verts[0]) < 1e-7 * (1.0 + scale);
  auto seg_intersect = [](cplx p1, cplx p2, cplx q1, cplx q2) {
    auto cross = [](cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); };
    double d1 = cross(p2 - p1, q1 - p1), d2 = cross(p2 - p1, q2 - p1);
    double d3 = cross(q2 - q1, p1 - q1), d4 = cross(q2 - q1, p2 - q1);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
  };
  bool simple = closes;
  for (std::size_t i = 0; i < n && simple; i++)
    for (std::size_t j = i + 2; j < n; j++) {
      if (i == 0 && j == n - 1) continue;  // adjacent around the wrap
      if (seg_intersect(verts[i], verts[i + 1], verts[j], verts[j + 1])) simple = false;
    }
  rep.image_simple = simple;
  return rep;
}

}  // namespace qdw
