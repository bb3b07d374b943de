#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "phiopt/design_space.hpp"
#include "phiopt/polynomial.hpp"

namespace phiopt {

struct RootsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Parlett-Reinsch balancing (radix 2, exact scaling).  Eigen's EigenSolver
// does not balance, and companion matrices of high-degree polynomials need it
// badly: row/column norms can differ by many orders of magnitude.
inline void balance_in_place(Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const double radix = 2.0, sqrdx = radix * radix;
  bool noconv = true;
  while (noconv) {
    noconv = false;
    for (int i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != i) {
          c += std::abs(a(j, i));
          r += std::abs(a(i, j));
        }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix, f = 1.0, s = c + r;
      while (c < g) {
        f *= radix;
        c *= sqrdx;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= sqrdx;
      }
      if ((c + r) / f < 0.95 * s) {
        noconv = true;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
}

inline std::complex<double> horner(const std::vector<double>& c,
                                   std::complex<double> z) {
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * z + c[i];
  return acc;
}

// One Schroeder step: Newton applied to p/p', which has only simple roots.
// Converges quadratically to roots of any multiplicity and pulls the
// conjugate pairs that a perturbed multiple root splits into back toward the
// real axis.
inline std::complex<double> polish(const std::vector<double>& c,
                                   const std::vector<double>& dc,
                                   const std::vector<double>& ddc,
                                   std::complex<double> z, int steps) {
  std::complex<double> best = z;
  double best_val = std::abs(horner(c, z));
  for (int it = 0; it < steps; ++it) {
    const std::complex<double> p = horner(c, z);
    const std::complex<double> dp = horner(dc, z);
    const std::complex<double> ddp = horner(ddc, z);
    const std::complex<double> denom = dp * dp - p * ddp;
    if (std::abs(denom) == 0.0) break;
    const std::complex<double> step = p * dp / denom;
    if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
    if (std::abs(step) > 0.5 * (1.0 + std::abs(z))) break;
    z -= step;
    const double val = std::abs(horner(c, z));
    if (val < best_val) {
      best_val = val;
      best = z;
    }
  }
  return best;
}

}  // namespace detail

// Real roots of p inside the design space, via eigenvalues of the balanced
// companion matrix, polished and then cleaned up:
//   - candidates with |Im| > tol are discarded,
//   - candidates further than tol from the space are discarded, the rest are
//     clamped onto it (endpoints within tol snap exactly),
//   - candidates within 10*tol of each other merge into their mean, which for
//     a noise-split double root recovers the true location to first order.
// Throws on the identically-zero polynomial, where "roots" has no meaning.
inline std::vector<double> real_roots_in(const Polynomial& p_in,
                                         const DesignSpace& space,
                                         double tol = 1e-6) {
  if (tol <= 0.0) throw RootsError("root tolerance must be positive");
  const Polynomial p_mono = p_in.basis() == PolyBasis::Monomial
                                ? p_in
                                : change_basis(p_in, PolyBasis::Monomial);
  if (p_mono.is_zero())
    throw RootsError("the zero polynomial has no root set");
  const Polynomial p = p_mono.trimmed(1e-12);
  const int n = p.degree();
  if (n == 0) return {};

  // Companion matrix of the monic rescaling: subdiagonal ones, negated
  // coefficients in the last column.
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  const double lead = p.coeffs().back();
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i)
    comp(i, n - 1) = -p.coeffs()[static_cast<std::size_t>(i)] / lead;
  detail::balance_in_place(comp);

  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw RootsError("companion eigenvalue iteration failed");

  const std::vector<double>& c = p.coeffs();
  const Polynomial dp = derivative(p);
  const Polynomial ddp = derivative(dp);

  std::vector<double> reals;
  for (int i = 0; i < n; ++i) {
    std::complex<double> z(es.eigenvalues()[i].real(), es.eigenvalues()[i].imag());
    z = detail::polish(c, dp.coeffs(), ddp.coeffs(), z, 8);
    if (std::abs(z.imag()) > tol) continue;
    double r = z.real();
    if (space.distance(r) > tol) continue;
    r = space.clamp(r);
    for (const Interval& iv : space.intervals()) {
      if (std::abs(r - iv.lo) <= tol) r = iv.lo;
      if (std::abs(r - iv.hi) <= tol) r = iv.hi;
    }
    reals.push_back(r);
  }
  std::sort(reals.begin(), reals.end());

  std::vector<double> merged;
  const double radius = 10.0 * tol;
  std::size_t i = 0;
  while (i < reals.size()) {
    std::size_t j = i + 1;
    double sum = reals[i];
    while (j < reals.size() && reals[j] - reals[j - 1] <= radius) {
      sum += reals[j];
      ++j;
    }
    double center = sum / static_cast<double>(j - i);
    merged.push_back(space.clamp(center));
    i = j;
  }
  return merged;
}

}  // namespace phiopt
