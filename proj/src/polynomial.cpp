#include "qdweld/polynomial.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace qdw::poly {

cplx eval(const std::vector<cplx>& c, cplx z) {
  cplx v = 0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * z + *it;
  return v;
}

std::vector<cplx> derivative(const std::vector<cplx>& c) {
  if (c.size() <= 1) return {0.0};
  std::vector<cplx> d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); i++) d[i - 1] = c[i] * double(i);
  return d;
}

std::vector<cplx> multiply(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  std::vector<cplx> r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); i++)
    for (std::size_t j = 0; j < b.size(); j++) r[i + j] += a[i] * b[j];
  return r;
}

std::vector<cplx> from_roots(const std::vector<cplx>& roots, cplx leading) {
  std::vector<cplx> p{leading};
  for (cplx r : roots) p = multiply(p, {-r, 1.0});
  return p;
}

std::vector<cplx> trim(std::vector<cplx> c, double tol) {
  double scale = 0;
  for (auto& x : c) scale = std::max(scale, std::abs(x));
  while (c.size() > 1 && std::abs(c.back()) <= tol * scale) c.pop_back();
  return c;
}

int degree(const std::vector<cplx>& c) { return int(c.size()) - 1; }

std::vector<cplx> roots(const std::vector<cplx>& coeffs_in) {
  std::vector<cplx> c = trim(coeffs_in);
  int n = degree(c);
  if (n <= 0) return {};
  if (n == 1) return {-c[0] / c[1]};
  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; i++) companion(i, n - 1) = -c[i] / c[n];
  for (int i = 1; i < n; i++) companion(i, i - 1) = 1.0;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
  std::vector<cplx> out(n);
  for (int i = 0; i < n; i++) out[i] = solver.eigenvalues()(i);
  // one Newton polish per root; improves clustered roots noticeably
  auto d = derivative(c);
  for (cplx& r : out) {
    for (int it = 0; it < 3; it++) {
      cplx f = eval(c, r), fp = eval(d, r);
      if (std::abs(fp) < 1e-300) break;
      cplx step = f / fp;
      if (!std::isfinite(std::abs(step))) break;
      r -= step;
    }
  }
  return out;
}

std::vector<std::pair<cplx, int>> cluster_roots(const std::vector<cplx>& rts, double tol) {
  std::vector<std::pair<cplx, int>> out;
  std::vector<bool> used(rts.size(), false);
  for (std::size_t i = 0; i < rts.size(); i++) {
    if (used[i]) continue;
    cplx sum = rts[i];
    int count = 1;
    used[i] = true;
    for (std::size_t j = i + 1; j < rts.size(); j++) {
      if (!used[j] && std::abs(rts[j] - rts[i]) <= tol) {
        sum += rts[j];
        count++;
        used[j] = true;
      }
    }
    out.push_back({sum / double(count), count});
  }
  return out;
}

}  // namespace qdw::poly
