#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phiopt/design_space.hpp"
#include "phiopt/polynomial.hpp"
#include "phiopt/sdp.hpp"

namespace phiopt {

class ConeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Semidefinite description of the degree-d polynomials nonnegative on
// [lo, hi]: p belongs to the cone iff p_k = <cx[k], X> + <cy[k], Y> for
// k = 0..degree with X, Y positive semidefinite of the stated sizes.
// Even degree 2m uses X of size m+1 and Y of size m (absent when m = 0);
// odd degree 2m+1 uses two blocks of size m+1.
struct ConeRepresentation {
  int degree = 0;
  double lo = 0.0;
  double hi = 0.0;
  int dim_x = 0;
  int dim_y = 0;  // 0 means the Y block is absent
  std::vector<Eigen::MatrixXd> cx;
  std::vector<Eigen::MatrixXd> cy;  // entries are empty when dim_y == 0
};

namespace detail {

// Ones on the band i + j == s; zero when the band misses the matrix.
inline Eigen::MatrixXd antidiag_band(int dim, int s) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const int j = s - i;
    if (j >= 0 && j < dim) m(i, j) = 1.0;
  }
  return m;
}

}  // namespace detail

inline ConeRepresentation represent_interval(int degree, double lo, double hi) {
  if (degree < 0) throw ConeError("cone degree must be nonnegative");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ConeError("cone interval must satisfy lo < hi with finite bounds");
  }
  ConeRepresentation rep;
  rep.degree = degree;
  rep.lo = lo;
  rep.hi = hi;
  const int half = degree / 2;
  if (degree % 2 == 0) {
    rep.dim_x = half + 1;
    rep.dim_y = half;
    for (int k = 0; k <= degree; ++k) {
      rep.cx.push_back(detail::antidiag_band(rep.dim_x, k));
      if (rep.dim_y > 0) {
        Eigen::MatrixXd c = -lo * hi * detail::antidiag_band(rep.dim_y, k);
        c += (lo + hi) * detail::antidiag_band(rep.dim_y, k - 1);
        c -= detail::antidiag_band(rep.dim_y, k - 2);
        rep.cy.push_back(std::move(c));
      } else {
        rep.cy.emplace_back();
      }
    }
  } else {
    rep.dim_x = half + 1;
    rep.dim_y = half + 1;
    for (int k = 0; k <= degree; ++k) {
      rep.cx.push_back(-lo * detail::antidiag_band(rep.dim_x, k) +
                       detail::antidiag_band(rep.dim_x, k - 1));
      rep.cy.push_back(hi * detail::antidiag_band(rep.dim_y, k) -
                       detail::antidiag_band(rep.dim_y, k - 1));
    }
  }
  return rep;
}

// Evaluates the coefficient maps at a concrete block pair.
inline Polynomial cone_polynomial(const ConeRepresentation& rep,
                                  const Eigen::MatrixXd& x,
                                  const Eigen::MatrixXd& y) {
  if (x.rows() != rep.dim_x || x.cols() != rep.dim_x) {
    throw ConeError("X block has the wrong size");
  }
  if (y.rows() != rep.dim_y || y.cols() != rep.dim_y) {
    throw ConeError("Y block has the wrong size");
  }
  std::vector<double> coeffs(static_cast<std::size_t>(rep.degree) + 1, 0.0);
  for (int k = 0; k <= rep.degree; ++k) {
    double v = (rep.cx[static_cast<std::size_t>(k)].array() * x.array()).sum();
    if (rep.dim_y > 0) {
      v += (rep.cy[static_cast<std::size_t>(k)].array() * y.array()).sum();
    }
    coeffs[static_cast<std::size_t>(k)] = v;
  }
  return Polynomial(std::move(coeffs), PolyBasis::Monomial);
}

// Conjunction of per-component conditions on a design space: one interval
// cone per proper interval plus one inequality p(t0) >= 0 per singleton.
struct SpaceConeSet {
  int degree = 0;
  std::vector<ConeRepresentation> intervals;
  std::vector<double> singletons;
};

inline SpaceConeSet represent_space(int degree, const DesignSpace& space) {
  SpaceConeSet set;
  set.degree = degree;
  for (const Interval& iv : space.intervals()) {
    if (iv.is_singleton()) {
      set.singletons.push_back(iv.lo);
    } else {
      set.intervals.push_back(represent_interval(degree, iv.lo, iv.hi));
    }
  }
  return set;
}

enum class CertifyStatus { Certified, Refuted, SolverFailure };

struct IntervalCertificate {
  ConeRepresentation rep;
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;  // empty when the rep has no Y block
};

struct CertifyResult {
  CertifyStatus status = CertifyStatus::SolverFailure;
  std::vector<IntervalCertificate> certificates;  // one per proper interval
  double witness = std::numeric_limits<double>::quiet_NaN();
  double witness_value = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

namespace detail {

// Clamps negative eigenvalues to zero.
inline Eigen::MatrixXd floor_psd(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return m;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

struct MarginCertificate {
  bool solved = false;
  double margin = 0.0;  // largest lambda with X - lambda I, Y - lambda I PSD
  IntervalCertificate cert;
};

// Decides membership by maximizing the eigenvalue margin of the blocks.
// Unlike a plain feasibility solve this program is strictly feasible for
// every p (take lambda very negative), so the solver never loses its
// interior when p touches zero on the interval.
inline MarginCertificate certify_interval(const Polynomial& p,
                                          const ConeRepresentation& rep,
                                          const SolverSettings& settings) {
  SdpProblem prob;
  const int bx = prob.add_block(BlockKind::PSD, rep.dim_x);
  const int by =
      rep.dim_y > 0 ? prob.add_block(BlockKind::PSD, rep.dim_y) : -1;
  const int bl = prob.add_block(BlockKind::Free, 1);
  prob.add_objective_entry(bl, 0, -1.0);
  for (int k = 0; k <= rep.degree; ++k) {
    const double base = k <= p.degree() ? p.coeff(k) : 0.0;
    const int row = prob.add_row(base);
    const Eigen::MatrixXd& cxk = rep.cx[static_cast<std::size_t>(k)];
    prob.add_coeff(row, bx, cxk);
    double shift_gain = cxk.trace();
    if (by >= 0) {
      const Eigen::MatrixXd& cyk = rep.cy[static_cast<std::size_t>(k)];
      prob.add_coeff(row, by, cyk);
      shift_gain += cyk.trace();
    }
    prob.add_entry(row, bl, 0, shift_gain);
  }
  SdpSolver solver(prob, settings);
  const SdpSolution sol = solver.solve();
  MarginCertificate out;
  // A solve that ran out of iterations or broke down late still returns its
  // best iterate; the caller validates candidates by reconstruction, so any
  // usable iterate is worth reporting.
  const bool usable = sol.status == SolveStatus::Optimal ||
                      sol.status == SolveStatus::IterationLimit ||
                      sol.status == SolveStatus::NumericalError;
  if (!usable || sol.x_vec[static_cast<std::size_t>(bl)].size() == 0)
    return out;
  out.solved = true;
  out.margin = sol.x_vec[static_cast<std::size_t>(bl)](0);
  const Eigen::MatrixXd shift_x =
      out.margin * Eigen::MatrixXd::Identity(rep.dim_x, rep.dim_x);
  out.cert.rep = rep;
  out.cert.x = floor_psd(sol.x_psd[static_cast<std::size_t>(bx)] + shift_x);
  out.cert.y =
      by >= 0 ? floor_psd(sol.x_psd[static_cast<std::size_t>(by)] +
                          out.margin *
                              Eigen::MatrixXd::Identity(rep.dim_y, rep.dim_y))
              : Eigen::MatrixXd();
  return out;
}

inline double scan_minimum(const Polynomial& p, const DesignSpace& space,
                           int points_per_interval, double* argmin) {
  double best = std::numeric_limits<double>::infinity();
  for (const double t : space.grid(points_per_interval)) {
    const double v = p(t);
    if (v < best) {
      best = v;
      if (argmin != nullptr) *argmin = t;
    }
  }
  return best;
}

}  // namespace detail

// Certification needs the margin solve accurate to well under the 1e-6
// reconstruction tolerance, but no better; demanding full solver precision
// wastes iterations in the ill-conditioned endgame.
inline SolverSettings certify_solver_settings() {
  SolverSettings s;
  s.tolerance = 1e-7;
  return s;
}

// Decides nonnegativity of p on the space. Success carries per-interval
// block certificates reproducing the coefficients of p within
// 1e-6 * (1 + max |p_k|); failure carries a witness with p(t) < -1e-8.
// Solver breakdowns are reported as a distinct status, never as refutation.
inline CertifyResult certify_nonneg(
    const Polynomial& p, const DesignSpace& space,
    const SolverSettings& settings = certify_solver_settings()) {
  if (p.basis() != PolyBasis::Monomial) {
    throw ConeError("certify_nonneg expects a monomial-basis polynomial");
  }
  CertifyResult out;
  double argmin = space.min();
  if (detail::scan_minimum(p, space, 2001, &argmin) < -1e-8) {
    out.status = CertifyStatus::Refuted;
    out.witness = argmin;
    out.witness_value = p(argmin);
    return out;
  }
  const double scale = 1.0 + p.max_abs_coeff();
  for (const Interval& iv : space.intervals()) {
    if (iv.is_singleton()) continue;
    const ConeRepresentation rep =
        represent_interval(p.degree(), iv.lo, iv.hi);
    detail::MarginCertificate res =
        detail::certify_interval(p, rep, settings);
    if (!res.solved) {
      // The solve may have broken down because p dips below zero between
      // grid points; only report a breakdown when a finer scan stays clean.
      double fine_arg = iv.lo;
      if (detail::scan_minimum(p, space, 20001, &fine_arg) < -1e-8) {
        out.status = CertifyStatus::Refuted;
        out.witness = fine_arg;
        out.witness_value = p(fine_arg);
        return out;
      }
      out.status = CertifyStatus::SolverFailure;
      out.message = "interval margin solve did not reach optimality";
      return out;
    }
    bool margin_negative = false;
    if (res.margin < -1e-8 * scale) {
      // No decomposition exists, so p is negative somewhere; locate it.
      double fine_arg = iv.lo;
      if (detail::scan_minimum(p, space, 20001, &fine_arg) < -1e-8) {
        out.status = CertifyStatus::Refuted;
        out.witness = fine_arg;
        out.witness_value = p(fine_arg);
        return out;
      }
      // No witness clears the refutation bar, so the margin is negative only
      // within solver accuracy; the floored blocks may still certify.
      margin_negative = true;
    }
    const Polynomial recon =
        cone_polynomial(res.cert.rep, res.cert.x, res.cert.y);
    double err = 0.0;
    for (int k = 0; k <= rep.degree; ++k) {
      const double want = k <= p.degree() ? p.coeff(k) : 0.0;
      const double got = k <= recon.degree() ? recon.coeff(k) : 0.0;
      err = std::max(err, std::abs(want - got));
    }
    if (err > 1e-6 * scale) {
      out.status = CertifyStatus::SolverFailure;
      out.message = margin_negative
                        ? "negative margin but no grid witness"
                        : "certificate does not reproduce the polynomial";
      return out;
    }
    out.certificates.push_back(std::move(res.cert));
  }
  out.status = CertifyStatus::Certified;
  return out;
}

}  // namespace phiopt
