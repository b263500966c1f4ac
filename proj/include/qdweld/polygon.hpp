#pragma once

#include <vector>

#include "qdweld/quaddiff.hpp"
#include "qdweld/riemannmap.hpp"
#include "qdweld/welding.hpp"

namespace qdw {

// Rectilinear Jordan polygon: sides alternate horizontal/vertical, first side
// horizontal, vertices counterclockwise. Angles are pi/2 or 3 pi/2.
struct CartesianPolygon {
  std::vector<cplx> vertices;
  std::vector<double> alphas;  // interior angle / pi, in {1/2, 3/2}; derived by validate()

  void validate();  // fills alphas, checks alternation, counts, closure
  int n_half() const { return int(vertices.size()) / 2; }  // 2n vertices
  JordanCurve to_curve(int per_side = 96) const;
};

// Gearlike polygon: sides alternate circular (centered at 0) and radial, the
// side v1 -> v2 circular, origin strictly inside.
struct PolarPolygon {
  std::vector<cplx> vertices;
  std::vector<double> alphas;

  void validate();
  JordanCurve to_curve(int per_side = 96) const;
};

struct Prevertices {
  std::vector<double> beta;  // strictly increasing angles, beta[0] in [0, 2 pi)
  Side side = Side::interior;
  double gamma = 0.0;
  double C = 1.0;  // positive
  cplx sc_scale = 1.0;  // complex scale of the Schwarz-Christoffel derivative
};

struct ParameterProblemError : std::runtime_error {
  double best_residual;
  ParameterProblemError(const std::string& m, double r)
      : std::runtime_error(m), best_residual(r) {}
};
struct ConstraintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolveOptions {
  int max_iterations = 120;
  double tol = 1e-12;          // on log side-length ratios
  double quad_tol = 1e-13;
};

Prevertices solve_prevertices_interior(const CartesianPolygon& poly, const SolveOptions& = {});
Prevertices solve_prevertices_exterior(const CartesianPolygon& poly, const SolveOptions& = {});
Prevertices solve_prevertices_interior(const PolarPolygon& poly, const SolveOptions& = {});
Prevertices solve_prevertices_exterior(const PolarPolygon& poly, const SolveOptions& = {});

std::pair<QuadDifferential, QuadDifferential> cartesian_qds(const CartesianPolygon& poly,
                                                            const Prevertices& interior,
                                                            const Prevertices& exterior);
std::pair<QuadDifferential, QuadDifferential> polar_qds(const PolarPolygon& poly,
                                                        const Prevertices& interior,
                                                        const Prevertices& exterior);

// Per-arc coordination residuals (ratio identity of the side integrals).
std::vector<double> coordination_residual(const std::vector<double>& alphas,
                                          const Prevertices& interior,
                                          const Prevertices& exterior, bool polar);

struct PolygonFingerprint {
  WeldingResult welding;
  Prevertices interior, exterior;
  QuadDifferential q_minus, q_plus;
  std::vector<double> coordination;
};

PolygonFingerprint polygon_fingerprint(const CartesianPolygon& poly, const SolveOptions& = {});
PolygonFingerprint polygon_fingerprint(const PolarPolygon& poly, const SolveOptions& = {});

struct PropositionReport {
  bool coordinated = false;    // Eq-5.3 system satisfiable with some C > 0, gamma
  bool image_simple = false;   // the Schwarz-Christoffel image is a Jordan polyline
  std::vector<double> residuals;
};

// Checks whether the interior data maps the disk one-to-one onto a polygon,
// by testing the ratio identities against candidate exterior prevertices and
// the simplicity of the image polyline. Requires sum(alpha) = n - 2.
PropositionReport proposition_check(const std::vector<double>& alphas,
                                    const std::vector<double>& beta_interior,
                                    const std::vector<double>& beta_exterior_candidate);

}  // namespace qdw
