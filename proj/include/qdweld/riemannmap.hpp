#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "qdweld/numerics.hpp"

namespace qdw {

struct CornerTag {
  double param = 0.0;                       // parameter on the curve path
  std::optional<std::pair<int, int>> angle_pi;  // interior angle as a multiple of pi
};

// Positively oriented closed curve given as a dense polyline.
struct JordanCurve {
  PathSample path;  // closed: first point repeated last
  std::vector<CornerTag> corners;

  void validate() const;
  double signed_area() const;
  bool contains(cplx z) const;  // winding-number test
  cplx interior_point() const;  // any point strictly inside

  static JordanCurve circle(cplx center, double radius, int n = 512);
  static JordanCurve ellipse(double a, double b, int n = 512);
  static JordanCurve polygon(const std::vector<cplx>& vertices, int per_side = 64);
};

struct MapperError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SurgeryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sampled orientation-preserving circle homeomorphism theta -> psi(theta),
// strictly increasing with psi(theta + 2 pi) = psi(theta) + 2 pi.
class Fingerprint {
 public:
  Fingerprint() = default;
  // thetas strictly increasing within one period, psis strictly increasing;
  // slopes d psi/d theta may be supplied per node (NaN entries interpolated)
  Fingerprint(std::vector<double> thetas, std::vector<double> psis, cplx base_point,
              const std::vector<double>& slopes = {});

  double eval(double theta) const;
  double derivative(double theta) const;
  double inverse(double psi) const;
  std::size_t size() const { return theta_.size(); }
  const std::vector<double>& thetas() const { return theta_; }
  const std::vector<double>& psis() const { return psi_; }
  cplx base_point() const { return z0_; }

  void validate() const;  // strict monotonicity + 2 pi increment

 private:
  std::vector<double> theta_, psi_;
  MonotoneCubic interp_, inv_interp_;
  cplx z0_ = 0.0;
};

enum class MapSide { interior, exterior };

class ZipperChain;  // internal geodesic-algorithm state
class DiskMap;
struct CurveMaps;
struct MapOptions;
CurveMaps conformal_maps(const JordanCurve& curve, cplx z0, const MapOptions& opts);

// Conformal map between the unit disk (or its exterior) and a Jordan domain,
// with explicit boundary correspondence.
class DiskMap {
 public:
  MapSide side() const { return side_; }
  cplx normalization_point() const { return z0_; }  // interior: phi(0); exterior: unused

  // boundary tables: disk angle of each curve node, and node positions
  const std::vector<double>& node_angles() const { return node_theta_; }
  const std::vector<cplx>& node_points() const { return node_point_; }

  cplx to_disk(cplx domain_point) const;    // tau = phi^{-1}
  cplx from_disk(cplx disk_point) const;    // phi
  cplx boundary_point(double theta) const;  // curve point at the given disk angle
  double derivative_at_infinity() const;    // exterior maps: phi'(inf) > 0

 private:
  friend CurveMaps conformal_maps(const JordanCurve&, cplx, const MapOptions&);
  MapSide side_ = MapSide::interior;
  cplx z0_ = 0.0;
  std::shared_ptr<const ZipperChain> chain_;
  std::vector<double> node_theta_;  // strictly increasing, spans one period
  std::vector<cplx> node_point_;
  std::vector<double> node_s_;      // unwrapped arclength per node
  double total_len_ = 0.0;
  double dinf_ = 0.0;
};

struct MapOptions {
  int boundary_nodes = 1024;
  double corner_cluster_ratio = 0.6;  // geometric refinement factor toward corners
  int corner_cluster_depth = 10;      // deeper clustering collapses at double precision
};

// Both conformal maps of a Jordan curve computed with the geodesic algorithm:
// tau_- : Omega_- -> D normalized by phi_-(0) = z0, phi_-'(0) > 0, and
// tau_+ : Omega_+ -> D_+ normalized by phi_+(inf) = inf, phi_+'(inf) > 0.
struct CurveMaps {
  DiskMap interior;
  DiskMap exterior;
  Fingerprint fingerprint;  // k = tau_+ o phi_- on the circle
};

CurveMaps conformal_maps(const JordanCurve& curve, cplx z0, const MapOptions& opts);
inline CurveMaps conformal_maps(const JordanCurve& curve, cplx z0) {
  return conformal_maps(curve, z0, MapOptions{});
}

DiskMap interior_map(const JordanCurve& curve, cplx z0, const MapOptions& opts = {});
DiskMap exterior_map(const JordanCurve& curve, const MapOptions& opts = {});
Fingerprint fingerprint_oracle(const JordanCurve& curve, cplx z0, const MapOptions& opts = {});

// Replaces, for each marked point, the sub-arc inside |z - a| = eps by the
// circular arc on the Omega_- side joining the same endpoints.
JordanCurve corner_surgery(const JordanCurve& curve, const std::vector<cplx>& points, double eps);

struct RadoReport {
  std::vector<double> epsilons;
  std::vector<Fingerprint> fingerprints;
  std::vector<double> sup_gaps;  // |k_{n+1} - k_n|_sup, size = fingerprints.size() - 1
};

RadoReport rado_sequence(const JordanCurve& curve, const std::vector<cplx>& singular_points,
                         const std::vector<double>& eps_schedule, cplx z0,
                         const MapOptions& opts = {});

// Best disk automorphism phi with k1(phi(z)) ~ k2(z) (three-point cross-ratio
// seed plus Nelder-Mead polish), and the residual sup-distance it achieves.
struct MobiusFit {
  DiskMobius phi;
  double sup_distance = 0.0;
};

MobiusFit fit_precomposition(const Fingerprint& k1, const Fingerprint& k2, int samples = 512);

double circle_distance(double a, double b);  // |a - b| modulo 2 pi, in [0, pi]

}  // namespace qdw
