#pragma once

#include <vector>

#include "qdweld/numerics.hpp"

namespace qdw {

// Dense polynomial helpers; coefficients are stored in ascending degree order.
namespace poly {

cplx eval(const std::vector<cplx>& coeffs, cplx z);
std::vector<cplx> derivative(const std::vector<cplx>& coeffs);
std::vector<cplx> multiply(const std::vector<cplx>& a, const std::vector<cplx>& b);
std::vector<cplx> from_roots(const std::vector<cplx>& roots, cplx leading = 1.0);
std::vector<cplx> trim(std::vector<cplx> coeffs, double tol = 1e-13);
int degree(const std::vector<cplx>& coeffs);

// All complex roots via the balanced companion matrix.
std::vector<cplx> roots(const std::vector<cplx>& coeffs);

// Groups nearby roots into (representative, multiplicity) pairs.
std::vector<std::pair<cplx, int>> cluster_roots(const std::vector<cplx>& rts, double tol);

}  // namespace poly
}  // namespace qdw
