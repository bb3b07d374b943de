#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace phiopt {

struct SdpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class BlockKind { PSD, Nonneg, Free };

struct BlockSpec {
  BlockKind kind;
  int size;
};

// Conic program in block form:
//   minimize    sum_b <C_b, X_b>
//   subject to  sum_b <A_{i,b}, X_b> = b_i,   i = 1..m
//               X_b psd / nonnegative / free per block kind.
// PSD coefficients are dense symmetric matrices; nonnegative and free blocks
// are vectors and <.,.> is the dot product.  Coefficients accumulate, so a
// row can be assembled term by term.
class SdpProblem {
 public:
  int add_block(BlockKind kind, int size) {
    if (size <= 0) throw SdpError("block size must be positive");
    blocks_.push_back({kind, size});
    if (kind == BlockKind::PSD)
      c_psd_.push_back(Eigen::MatrixXd::Zero(size, size));
    else
      c_psd_.push_back(Eigen::MatrixXd());
    if (kind != BlockKind::PSD)
      c_vec_.push_back(Eigen::VectorXd::Zero(size));
    else
      c_vec_.push_back(Eigen::VectorXd());
    return static_cast<int>(blocks_.size()) - 1;
  }

  int block_count() const { return static_cast<int>(blocks_.size()); }
  const BlockSpec& block(int b) const { return blocks_.at(static_cast<std::size_t>(b)); }

  void add_objective(int b, const Eigen::MatrixXd& c) {
    check_psd_coeff(b, c, "objective");
    c_psd_[static_cast<std::size_t>(b)] += symmetrized(c);
  }
  void add_objective_vec(int b, const Eigen::VectorXd& c) {
    check_vec_coeff(b, c, "objective");
    c_vec_[static_cast<std::size_t>(b)] += c;
  }
  void add_objective_entry(int b, int i, double v) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(block(b).size);
    c[i] = v;
    add_objective_vec(b, c);
  }

  int add_row(double rhs) {
    if (!std::isfinite(rhs)) throw SdpError("row rhs is not finite");
    rows_.emplace_back();
    rows_.back().rhs = rhs;
    return static_cast<int>(rows_.size()) - 1;
  }

  void add_coeff(int row, int b, const Eigen::MatrixXd& a) {
    check_psd_coeff(b, a, "constraint");
    auto& terms = rows_.at(static_cast<std::size_t>(row)).psd;
    for (auto& [blk, mat] : terms)
      if (blk == b) {
        mat += symmetrized(a);
        return;
      }
    terms.emplace_back(b, symmetrized(a));
  }
  void add_coeff_vec(int row, int b, const Eigen::VectorXd& a) {
    check_vec_coeff(b, a, "constraint");
    auto& terms = rows_.at(static_cast<std::size_t>(row)).vec;
    for (auto& [blk, v] : terms)
      if (blk == b) {
        v += a;
        return;
      }
    terms.emplace_back(b, a);
  }
  void add_entry(int row, int b, int i, double v) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(block(b).size);
    a[i] = v;
    add_coeff_vec(row, b, a);
  }

  int row_count() const { return static_cast<int>(rows_.size()); }
  double rhs(int i) const { return rows_.at(static_cast<std::size_t>(i)).rhs; }
  const std::vector<std::pair<int, Eigen::MatrixXd>>& psd_terms(int i) const {
    return rows_.at(static_cast<std::size_t>(i)).psd;
  }
  const std::vector<std::pair<int, Eigen::VectorXd>>& vec_terms(int i) const {
    return rows_.at(static_cast<std::size_t>(i)).vec;
  }
  const Eigen::MatrixXd& objective_psd(int b) const {
    return c_psd_.at(static_cast<std::size_t>(b));
  }
  const Eigen::VectorXd& objective_vec(int b) const {
    return c_vec_.at(static_cast<std::size_t>(b));
  }

  // Plain-text round-trippable serialization.  Layout:
  //   phiopt-sdp 1
  //   blocks <B>           then B lines "psd|nonneg|free <size>"
  //   objective <n>        then n entry lines
  //   constraints <m>
  //   row <rhs> <n>        then n entry lines, repeated m times
  // Entries are "<block> <i> <j> <value>" for psd blocks (i <= j, symmetric
  // completion implied) and "<block> <i> <value>" otherwise.
  void dump(std::ostream& os) const {
    os.precision(17);
    os << "phiopt-sdp 1\n";
    os << "blocks " << block_count() << "\n";
    for (const BlockSpec& s : blocks_) {
      const char* k = s.kind == BlockKind::PSD
                          ? "psd"
                          : (s.kind == BlockKind::Nonneg ? "nonneg" : "free");
      os << k << " " << s.size << "\n";
    }
    std::ostringstream body;
    body.precision(17);
    int n_obj = 0;
    for (int b = 0; b < block_count(); ++b)
      n_obj += dump_entries(body, b, c_psd_[static_cast<std::size_t>(b)],
                            c_vec_[static_cast<std::size_t>(b)]);
    os << "objective " << n_obj << "\n" << body.str();
    os << "constraints " << row_count() << "\n";
    for (const Row& r : rows_) {
      std::ostringstream rb;
      rb.precision(17);
      int n = 0;
      for (const auto& [b, mat] : r.psd) n += dump_entries(rb, b, mat, Eigen::VectorXd());
      for (const auto& [b, v] : r.vec) n += dump_entries(rb, b, Eigen::MatrixXd(), v);
      os << "row " << r.rhs << " " << n << "\n" << rb.str();
    }
  }

  static SdpProblem parse(std::istream& is) {
    SdpProblem p;
    std::string tok;
    int version = 0;
    is >> tok >> version;
    if (tok != "phiopt-sdp" || version != 1)
      throw SdpError("not a phiopt-sdp version 1 stream");
    int nb = 0;
    is >> tok >> nb;
    if (tok != "blocks" || nb < 0) throw SdpError("malformed blocks header");
    for (int b = 0; b < nb; ++b) {
      std::string kind;
      int size = 0;
      is >> kind >> size;
      BlockKind k;
      if (kind == "psd")
        k = BlockKind::PSD;
      else if (kind == "nonneg")
        k = BlockKind::Nonneg;
      else if (kind == "free")
        k = BlockKind::Free;
      else
        throw SdpError("unknown block kind '" + kind + "'");
      p.add_block(k, size);
    }
    int n_obj = 0;
    is >> tok >> n_obj;
    if (tok != "objective") throw SdpError("expected objective section");
    for (int e = 0; e < n_obj; ++e) p.parse_entry(is, -1);
    int m = 0;
    is >> tok >> m;
    if (tok != "constraints") throw SdpError("expected constraints section");
    for (int i = 0; i < m; ++i) {
      double rhs = 0.0;
      int n = 0;
      is >> tok >> rhs >> n;
      if (tok != "row") throw SdpError("expected row header");
      const int row = p.add_row(rhs);
      for (int e = 0; e < n; ++e) p.parse_entry(is, row);
    }
    if (!is) throw SdpError("truncated phiopt-sdp stream");
    return p;
  }

  void validate() const {
    for (const Row& r : rows_) {
      if (!std::isfinite(r.rhs)) throw SdpError("row rhs is not finite");
      for (const auto& [b, mat] : r.psd)
        if (!mat.allFinite()) throw SdpError("constraint coefficient is not finite");
      for (const auto& [b, v] : r.vec)
        if (!v.allFinite()) throw SdpError("constraint coefficient is not finite");
    }
    for (const Eigen::MatrixXd& c : c_psd_)
      if (c.size() > 0 && !c.allFinite()) throw SdpError("objective is not finite");
    for (const Eigen::VectorXd& c : c_vec_)
      if (c.size() > 0 && !c.allFinite()) throw SdpError("objective is not finite");
  }

 private:
  struct Row {
    std::vector<std::pair<int, Eigen::MatrixXd>> psd;
    std::vector<std::pair<int, Eigen::VectorXd>> vec;
    double rhs = 0.0;
  };

  static Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) {
    return 0.5 * (a + a.transpose());
  }

  void check_psd_coeff(int b, const Eigen::MatrixXd& a, const char* what) const {
    const BlockSpec& s = block(b);
    if (s.kind != BlockKind::PSD)
      throw SdpError(std::string(what) + ": matrix coefficient on a vector block");
    if (a.rows() != s.size || a.cols() != s.size)
      throw SdpError(std::string(what) + ": coefficient size mismatch");
    if (!a.allFinite()) throw SdpError(std::string(what) + ": coefficient not finite");
  }
  void check_vec_coeff(int b, const Eigen::VectorXd& a, const char* what) const {
    const BlockSpec& s = block(b);
    if (s.kind == BlockKind::PSD)
      throw SdpError(std::string(what) + ": vector coefficient on a psd block");
    if (a.size() != s.size)
      throw SdpError(std::string(what) + ": coefficient size mismatch");
    if (!a.allFinite()) throw SdpError(std::string(what) + ": coefficient not finite");
  }

  int dump_entries(std::ostream& os, int b, const Eigen::MatrixXd& mat,
                   const Eigen::VectorXd& vec) const {
    int n = 0;
    if (mat.size() > 0) {
      for (int i = 0; i < mat.rows(); ++i)
        for (int j = i; j < mat.cols(); ++j)
          if (mat(i, j) != 0.0) {
            os << b << " " << i << " " << j << " " << mat(i, j) << "\n";
            ++n;
          }
    }
    if (vec.size() > 0) {
      for (int i = 0; i < vec.size(); ++i)
        if (vec[i] != 0.0) {
          os << b << " " << i << " " << vec[i] << "\n";
          ++n;
        }
    }
    return n;
  }

  // row == -1 targets the objective.
  void parse_entry(std::istream& is, int row) {
    int b = 0;
    is >> b;
    if (b < 0 || b >= block_count()) throw SdpError("entry block out of range");
    const BlockSpec& s = block(b);
    if (s.kind == BlockKind::PSD) {
      int i = 0, j = 0;
      double v = 0.0;
      is >> i >> j >> v;
      if (i < 0 || j < i || j >= s.size) throw SdpError("entry index out of range");
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(s.size, s.size);
      a(i, j) = v;
      a(j, i) = v;
      if (row < 0)
        add_objective(b, a);
      else
        add_coeff(row, b, a);
    } else {
      int i = 0;
      double v = 0.0;
      is >> i >> v;
      if (i < 0 || i >= s.size) throw SdpError("entry index out of range");
      if (row < 0)
        add_objective_entry(b, i, v);
      else
        add_entry(row, b, i, v);
    }
  }

  std::vector<BlockSpec> blocks_;
  std::vector<Eigen::MatrixXd> c_psd_;
  std::vector<Eigen::VectorXd> c_vec_;
  std::vector<Row> rows_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalError };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

struct SdpSolution {
  SolveStatus status = SolveStatus::NumericalError;
  std::vector<Eigen::MatrixXd> x_psd;  // indexed like the problem blocks
  std::vector<Eigen::VectorXd> x_vec;
  std::vector<Eigen::MatrixXd> z_psd;
  std::vector<Eigen::VectorXd> z_vec;
  Eigen::VectorXd y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  // Quality of the returned iterate in the solver's scaled units; lets
  // callers judge whether a non-optimal exit still carries usable data.
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double relative_gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

struct SolverSettings {
  double tolerance = 1e-8;
  int max_iterations = 200;
  double step_fraction = 0.98;
  bool verbose = false;
};

struct SdpResiduals {
  double primal = 0.0;     // ||Ax - b||_inf
  double dual = 0.0;       // ||C - A^T y - Z||_inf over all blocks
  double gap = 0.0;        // |<C,x> - b^T y|
  double min_eigenvalue = 0.0;  // most negative eigenvalue over conic blocks
};

namespace detail {

struct ScaledData {
  // Per active row and block: dense coefficients; inactive (all-zero) rows
  // are dropped up front.
  std::vector<std::vector<Eigen::MatrixXd>> a_psd;  // [row][psd_block_slot]
  std::vector<std::vector<Eigen::VectorXd>> a_nn;
  std::vector<std::vector<Eigen::VectorXd>> a_free;
  Eigen::VectorXd b;
  std::vector<Eigen::MatrixXd> c_psd;
  std::vector<Eigen::VectorXd> c_nn;
  std::vector<Eigen::VectorXd> c_free;
  std::vector<int> psd_blocks, nn_blocks, free_blocks;  // original block ids
  std::vector<int> active_rows;
  std::vector<double> row_scale;
  double b_scale = 1.0, c_scale = 1.0;
  int cone_dim = 0;
};

inline double step_to_boundary_psd(const Eigen::MatrixXd& x,
                                   const Eigen::MatrixXd& dx) {
  Eigen::LLT<Eigen::MatrixXd> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  Eigen::MatrixXd w = llt.matrixL().solve(dx);
  const Eigen::MatrixXd wt = w.transpose();
  w = llt.matrixL().solve(wt);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (w + w.transpose()), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= -1e-14) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

inline double step_to_boundary_vec(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i)
    if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
  return a;
}

}  // namespace detail

// Dense primal-dual interior-point method: HKM search direction in the XZ
// form with Mehrotra predictor-corrector, free variables kept in an
// augmented KKT system.  Deterministic; no randomized choices anywhere.
class SdpSolver {
 public:
  SdpSolver(const SdpProblem& problem, SolverSettings settings)
      : p_(problem), set_(settings) {}

  SdpSolution solve() {
    p_.validate();
    prepare();
    if (early_status_) return finish(*early_status_);
    if (d_.cone_dim == 0)
      throw SdpError("problem has no conic variables");
    initialize_iterates();

    const int m = static_cast<int>(d_.active_rows.size());
    const int nf = free_dim();
    SolveStatus status = SolveStatus::IterationLimit;

    for (iter_ = 0; iter_ < set_.max_iterations; ++iter_) {
      compute_residuals();
      const double pres = rp_.size() ? rp_.lpNorm<Eigen::Infinity>() / (1.0 + bnorm_) : 0.0;
      const double dres = dual_residual_norm() / (1.0 + cnorm_);
      const double pobj = primal_obj_scaled();
      const double dobj = dual_obj_scaled();
      const double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      if (set_.verbose)
        std::cerr << "iter " << iter_ << " pres " << pres << " dres " << dres
                  << " gap " << rel_gap << " mu " << mu() << " ap " << last_ap_
                  << " ad " << last_ad_ << " sigma " << last_sigma_ << "\n";
      if (pres <= set_.tolerance && dres <= set_.tolerance && rel_gap <= set_.tolerance) {
        status = SolveStatus::Optimal;
        break;
      }
      // The endgame can corrupt the iterate: near-singular scaled systems
      // produce directions that no longer reduce feasibility.  Remember the
      // best iterate so a late breakdown still returns a usable point.
      const double score = std::max({pres, dres, rel_gap});
      if (score < best_score_) {
        best_score_ = score;
        best_x_ = x_;
        best_z_ = z_;
        best_xn_ = xn_;
        best_zn_ = zn_;
        best_xf_ = xf_;
        best_y_ = y_;
      }
      // Divergence heuristics.  A dual ray (y exploding, dual residual
      // relatively tiny, b^T y > 0) certifies primal infeasibility; the
      // mirrored primal ray certifies unboundedness.
      const double ynorm = y_.size() ? y_.lpNorm<Eigen::Infinity>() : 0.0;
      if (ynorm > 1e9 && dual_residual_norm() <= 1e-9 * ynorm && dobj > 0.0) {
        status = SolveStatus::Infeasible;
        break;
      }
      if (iterate_norm() > 1e9 && rp_.lpNorm<Eigen::Infinity>() <= 1e-9 * iterate_norm() &&
          pobj < 0.0) {
        status = SolveStatus::Unbounded;
        break;
      }

      if (!factor_blocks()) {
        if (set_.verbose) std::cerr << "  fail: dual block not positive definite\n";
        status = SolveStatus::NumericalError;
        break;
      }
      build_schur();
      if (!factor_kkt(m, nf)) {
        status = SolveStatus::NumericalError;
        break;
      }

      // Predictor: pure Newton step onto the central-path target nu = 0.
      Direction aff = solve_direction(0.0, nullptr);
      if (!aff.ok) {
        if (set_.verbose) std::cerr << "  fail: affine direction not finite\n";
        status = SolveStatus::NumericalError;
        break;
      }
      const double a_aff =
          std::min(1.0, std::min(max_primal_step(aff), max_dual_step(aff)));
      // A full affine step can land exactly on the boundary; roundoff then
      // makes the predicted complementarity slightly negative, which would
      // poison the fractional power below.
      const double mu_aff =
          std::max(0.0, complementarity_after(aff, a_aff, a_aff));
      const double mu0 = mu();
      // Weak affine progress calls for more centering; the exponent relaxes
      // toward 1 as the affine step shrinks.
      const double expon = std::max(1.0, 3.0 * a_aff * a_aff);
      double sigma = mu0 > 0.0 ? std::pow(mu_aff / mu0, expon) : 0.0;
      sigma = std::clamp(sigma, 0.0, 1.0);
      if (set_.verbose) {
        double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
        for (const auto& dv : dvec_)
          for (int i = 0; i < dv.size(); ++i) {
            dmin = std::min(dmin, dv[i] * dv[i]);
            dmax = std::max(dmax, dv[i] * dv[i]);
          }
        for (std::size_t s = 0; s < xn_.size(); ++s)
          for (int i = 0; i < xn_[s].size(); ++i) {
            const double e = xn_[s][i] * zn_[s][i];
            dmin = std::min(dmin, e);
            dmax = std::max(dmax, e);
          }
        std::cerr << "  aff step " << a_aff << " mu ratio "
                  << (mu0 > 0.0 ? mu_aff / mu0 : 0.0) << " cent "
                  << (mu0 > 0.0 ? dmin / mu0 : 0.0) << " "
                  << (mu0 > 0.0 ? dmax / mu0 : 0.0) << "\n";
      }

      Direction dir = solve_direction(sigma * mu0, &aff);
      if (!dir.ok) {
        if (set_.verbose) std::cerr << "  fail: corrector direction not finite\n";
        status = SolveStatus::NumericalError;
        break;
      }
      // A common primal-dual step length keeps the iterate near the central
      // path; unequal steps can stall by driving the scaled spectrum apart.
      double alpha = std::min(
          1.0, set_.step_fraction *
                   std::min(max_primal_step(dir), max_dual_step(dir)));
      // The second-order term can destabilize nearly degenerate problems; if
      // it shrinks the step badly, retreat to a plain centering direction.
      if (alpha < 0.2 * a_aff) {
        Direction center = solve_direction(std::max(sigma, 0.8) * mu0, nullptr);
        if (center.ok) {
          const double ac = std::min(
              1.0, set_.step_fraction *
                       std::min(max_primal_step(center), max_dual_step(center)));
          if (ac > alpha) {
            dir = std::move(center);
            alpha = ac;
          }
        }
      }
      double ap = alpha;
      double ad = alpha;
      last_ap_ = ap;
      last_ad_ = ad;
      last_sigma_ = sigma;
      if (ap <= 1e-13 && ad <= 1e-13) {
        if (set_.verbose) std::cerr << "  fail: step lengths vanished\n";
        status = SolveStatus::NumericalError;
        break;
      }
      // The boundary computation is itself floating point; back off until
      // every block is genuinely positive definite after the step.
      bool stepped = false;
      for (int bt = 0; bt < 40; ++bt) {
        if (try_step(dir, ap, ad)) {
          stepped = true;
          break;
        }
        ap *= 0.7;
        ad *= 0.7;
      }
      if (!stepped) {
        if (set_.verbose) std::cerr << "  fail: no positive definite step\n";
        status = SolveStatus::NumericalError;
        break;
      }
    }
    if ((status == SolveStatus::IterationLimit ||
         status == SolveStatus::NumericalError) &&
        best_score_ < std::numeric_limits<double>::infinity()) {
      x_ = best_x_;
      z_ = best_z_;
      xn_ = best_xn_;
      zn_ = best_zn_;
      xf_ = best_xf_;
      y_ = best_y_;
    }
    return finish(status);
  }

 private:
  struct Direction {
    bool ok = false;
    std::vector<Eigen::MatrixXd> dx_psd, dz_psd;
    std::vector<Eigen::VectorXd> dx_nn, dz_nn;
    std::vector<Eigen::VectorXd> dx_free;
    Eigen::VectorXd dy;
  };

  int free_dim() const {
    int n = 0;
    for (const auto& v : xf_) n += static_cast<int>(v.size());
    return n;
  }

  // Splits blocks by kind, drops vacuous rows, scales rows and data.
  void prepare() {
    for (int b = 0; b < p_.block_count(); ++b) {
      switch (p_.block(b).kind) {
        case BlockKind::PSD: d_.psd_blocks.push_back(b); break;
        case BlockKind::Nonneg: d_.nn_blocks.push_back(b); break;
        case BlockKind::Free: d_.free_blocks.push_back(b); break;
      }
      if (p_.block(b).kind != BlockKind::Free) d_.cone_dim += p_.block(b).size;
    }
    slot_of_.assign(static_cast<std::size_t>(p_.block_count()), -1);
    for (std::size_t s = 0; s < d_.psd_blocks.size(); ++s)
      slot_of_[static_cast<std::size_t>(d_.psd_blocks[s])] = static_cast<int>(s);
    for (std::size_t s = 0; s < d_.nn_blocks.size(); ++s)
      slot_of_[static_cast<std::size_t>(d_.nn_blocks[s])] = static_cast<int>(s);
    for (std::size_t s = 0; s < d_.free_blocks.size(); ++s)
      slot_of_[static_cast<std::size_t>(d_.free_blocks[s])] = static_cast<int>(s);

    // Row activity and scale.
    std::vector<double> scales;
    for (int i = 0; i < p_.row_count(); ++i) {
      double s = 0.0;
      for (const auto& [b, mat] : p_.psd_terms(i))
        s = std::max(s, mat.cwiseAbs().maxCoeff());
      for (const auto& [b, v] : p_.vec_terms(i))
        if (v.size()) s = std::max(s, v.cwiseAbs().maxCoeff());
      if (s == 0.0) {
        if (std::abs(p_.rhs(i)) > 0.0) {
          early_status_ = SolveStatus::Infeasible;
          return;
        }
        continue;  // vacuous row
      }
      d_.active_rows.push_back(i);
      scales.push_back(s);
    }
    d_.row_scale = scales;

    const int m = static_cast<int>(d_.active_rows.size());
    d_.b.resize(m);
    d_.a_psd.assign(static_cast<std::size_t>(m), {});
    d_.a_nn.assign(static_cast<std::size_t>(m), {});
    d_.a_free.assign(static_cast<std::size_t>(m), {});
    for (int r = 0; r < m; ++r) {
      const int i = d_.active_rows[static_cast<std::size_t>(r)];
      const double s = d_.row_scale[static_cast<std::size_t>(r)];
      d_.b[r] = p_.rhs(i) / s;
      auto& ap = d_.a_psd[static_cast<std::size_t>(r)];
      auto& an = d_.a_nn[static_cast<std::size_t>(r)];
      auto& af = d_.a_free[static_cast<std::size_t>(r)];
      ap.assign(d_.psd_blocks.size(), Eigen::MatrixXd());
      an.assign(d_.nn_blocks.size(), Eigen::VectorXd());
      af.assign(d_.free_blocks.size(), Eigen::VectorXd());
      for (const auto& [b, mat] : p_.psd_terms(i))
        ap[static_cast<std::size_t>(slot_of_[static_cast<std::size_t>(b)])] = mat / s;
      for (const auto& [b, v] : p_.vec_terms(i)) {
        if (p_.block(b).kind == BlockKind::Nonneg)
          an[static_cast<std::size_t>(slot_of_[static_cast<std::size_t>(b)])] = v / s;
        else
          af[static_cast<std::size_t>(slot_of_[static_cast<std::size_t>(b)])] = v / s;
      }
    }

    d_.b_scale = std::max(1.0, m ? d_.b.lpNorm<Eigen::Infinity>() : 0.0);
    d_.b /= d_.b_scale;

    double cmax = 0.0;
    for (int b : d_.psd_blocks)
      cmax = std::max(cmax, p_.objective_psd(b).size()
                                ? p_.objective_psd(b).cwiseAbs().maxCoeff()
                                : 0.0);
    for (int b : d_.nn_blocks)
      cmax = std::max(cmax, p_.objective_vec(b).size()
                                ? p_.objective_vec(b).cwiseAbs().maxCoeff()
                                : 0.0);
    for (int b : d_.free_blocks)
      cmax = std::max(cmax, p_.objective_vec(b).size()
                                ? p_.objective_vec(b).cwiseAbs().maxCoeff()
                                : 0.0);
    d_.c_scale = std::max(1.0, cmax);
    for (int b : d_.psd_blocks)
      d_.c_psd.push_back(p_.objective_psd(b) / d_.c_scale);
    for (int b : d_.nn_blocks)
      d_.c_nn.push_back(p_.objective_vec(b) / d_.c_scale);
    for (int b : d_.free_blocks)
      d_.c_free.push_back(p_.objective_vec(b) / d_.c_scale);

    // A free variable touched by no constraint either certifies
    // unboundedness (nonzero cost) or is irrelevant (kept at zero by a
    // pinning row so the KKT system stays nonsingular).
    for (std::size_t s = 0; s < d_.free_blocks.size(); ++s) {
      const int n = p_.block(d_.free_blocks[s]).size;
      for (int k = 0; k < n; ++k) {
        bool touched = false;
        for (int r = 0; r < m && !touched; ++r) {
          const auto& af = d_.a_free[static_cast<std::size_t>(r)][s];
          touched = af.size() > 0 && af[k] != 0.0;
        }
        if (!touched) {
          if (std::abs(d_.c_free[s][k]) > 0.0) {
            early_status_ = SolveStatus::Unbounded;
            return;
          }
          pinned_free_.emplace_back(static_cast<int>(s), k);
        }
      }
    }

    bnorm_ = m ? d_.b.lpNorm<Eigen::Infinity>() : 0.0;
    cnorm_ = 0.0;
    for (const auto& c : d_.c_psd) cnorm_ = std::max(cnorm_, c.size() ? c.cwiseAbs().maxCoeff() : 0.0);
    for (const auto& c : d_.c_nn) cnorm_ = std::max(cnorm_, c.size() ? c.cwiseAbs().maxCoeff() : 0.0);
    for (const auto& c : d_.c_free) cnorm_ = std::max(cnorm_, c.size() ? c.cwiseAbs().maxCoeff() : 0.0);
  }

  void initialize_iterates() {
    const int m = static_cast<int>(d_.active_rows.size());
    for (std::size_t s = 0; s < d_.psd_blocks.size(); ++s) {
      const int n = p_.block(d_.psd_blocks[s]).size;
      double anorm = 0.0, xi = 10.0;
      for (int r = 0; r < m; ++r) {
        const auto& a = d_.a_psd[static_cast<std::size_t>(r)][s];
        if (!a.size()) continue;
        const double fn = a.norm();
        anorm = std::max(anorm, fn);
        xi = std::max(xi, static_cast<double>(n) * (1.0 + std::abs(d_.b[r])) / (1.0 + fn));
      }
      const double eta = std::max({10.0, std::sqrt(static_cast<double>(n)),
                                   d_.c_psd[s].norm(), anorm});
      x_.push_back(xi * Eigen::MatrixXd::Identity(n, n));
      z_.push_back(eta * Eigen::MatrixXd::Identity(n, n));
    }
    for (std::size_t s = 0; s < d_.nn_blocks.size(); ++s) {
      const int n = p_.block(d_.nn_blocks[s]).size;
      double anorm = 0.0, xi = 10.0;
      for (int r = 0; r < m; ++r) {
        const auto& a = d_.a_nn[static_cast<std::size_t>(r)][s];
        if (!a.size()) continue;
        const double fn = a.norm();
        anorm = std::max(anorm, fn);
        xi = std::max(xi, static_cast<double>(n) * (1.0 + std::abs(d_.b[r])) / (1.0 + fn));
      }
      const double eta = std::max({10.0, std::sqrt(static_cast<double>(n)),
                                   d_.c_nn[s].norm(), anorm});
      xn_.push_back(Eigen::VectorXd::Constant(n, xi));
      zn_.push_back(Eigen::VectorXd::Constant(n, eta));
    }
    for (std::size_t s = 0; s < d_.free_blocks.size(); ++s)
      xf_.push_back(Eigen::VectorXd::Zero(p_.block(d_.free_blocks[s]).size));
    y_ = Eigen::VectorXd::Zero(m);
  }

  double mu() const {
    double dot = 0.0;
    for (std::size_t s = 0; s < x_.size(); ++s)
      dot += (x_[s].array() * z_[s].array()).sum();
    for (std::size_t s = 0; s < xn_.size(); ++s) dot += xn_[s].dot(zn_[s]);
    return dot / static_cast<double>(d_.cone_dim);
  }

  double iterate_norm() const {
    double n = 0.0;
    for (const auto& x : x_) n = std::max(n, x.cwiseAbs().maxCoeff());
    for (const auto& x : xn_) n = std::max(n, x.size() ? x.cwiseAbs().maxCoeff() : 0.0);
    for (const auto& x : xf_) n = std::max(n, x.size() ? x.cwiseAbs().maxCoeff() : 0.0);
    return n;
  }

  double primal_obj_scaled() const {
    double v = 0.0;
    for (std::size_t s = 0; s < x_.size(); ++s)
      v += (d_.c_psd[s].array() * x_[s].array()).sum();
    for (std::size_t s = 0; s < xn_.size(); ++s) v += d_.c_nn[s].dot(xn_[s]);
    for (std::size_t s = 0; s < xf_.size(); ++s) v += d_.c_free[s].dot(xf_[s]);
    return v;
  }
  double dual_obj_scaled() const { return y_.size() ? d_.b.dot(y_) : 0.0; }

  void compute_residuals() {
    const int m = static_cast<int>(d_.active_rows.size());
    rp_.resize(m);
    for (int r = 0; r < m; ++r) {
      double ax = 0.0;
      for (std::size_t s = 0; s < x_.size(); ++s) {
        const auto& a = d_.a_psd[static_cast<std::size_t>(r)][s];
        if (a.size()) ax += (a.array() * x_[s].array()).sum();
      }
      for (std::size_t s = 0; s < xn_.size(); ++s) {
        const auto& a = d_.a_nn[static_cast<std::size_t>(r)][s];
        if (a.size()) ax += a.dot(xn_[s]);
      }
      for (std::size_t s = 0; s < xf_.size(); ++s) {
        const auto& a = d_.a_free[static_cast<std::size_t>(r)][s];
        if (a.size()) ax += a.dot(xf_[s]);
      }
      rp_[r] = d_.b[r] - ax;
    }
    rd_.assign(x_.size(), Eigen::MatrixXd());
    for (std::size_t s = 0; s < x_.size(); ++s) {
      Eigen::MatrixXd r = d_.c_psd[s] - z_[s];
      for (int i = 0; i < m; ++i) {
        const auto& a = d_.a_psd[static_cast<std::size_t>(i)][s];
        if (a.size()) r -= y_[i] * a;
      }
      rd_[s] = r;
    }
    rdn_.assign(xn_.size(), Eigen::VectorXd());
    for (std::size_t s = 0; s < xn_.size(); ++s) {
      Eigen::VectorXd r = d_.c_nn[s] - zn_[s];
      for (int i = 0; i < m; ++i) {
        const auto& a = d_.a_nn[static_cast<std::size_t>(i)][s];
        if (a.size()) r -= y_[i] * a;
      }
      rdn_[s] = r;
    }
    rdf_.assign(xf_.size(), Eigen::VectorXd());
    for (std::size_t s = 0; s < xf_.size(); ++s) {
      Eigen::VectorXd r = d_.c_free[s];
      for (int i = 0; i < m; ++i) {
        const auto& a = d_.a_free[static_cast<std::size_t>(i)][s];
        if (a.size()) r -= y_[i] * a;
      }
      rdf_[s] = r;
    }
  }

  double dual_residual_norm() const {
    double n = 0.0;
    for (const auto& r : rd_) if (r.size()) n = std::max(n, r.cwiseAbs().maxCoeff());
    for (const auto& r : rdn_) if (r.size()) n = std::max(n, r.cwiseAbs().maxCoeff());
    for (const auto& r : rdf_) if (r.size()) n = std::max(n, r.cwiseAbs().maxCoeff());
    return n;
  }

  // Nesterov-Todd scaling per psd block: the unique W > 0 with W Z W = X.
  // With Z = L L^T and L^T X L = U diag(lam) U^T,
  //   G = diag(lam)^{1/4} U^T L^{-1},   W = G^T G,
  // and both scaled iterates G^{-T} X G^{-1} and G Z G^T equal the diagonal
  // matrix D = diag(lam)^{1/2}.
  bool factor_blocks() {
    const std::size_t np = x_.size();
    w_.assign(np, Eigen::MatrixXd());
    g_.assign(np, Eigen::MatrixXd());
    ginv_.assign(np, Eigen::MatrixXd());
    dvec_.assign(np, Eigen::VectorXd());
    for (std::size_t s = 0; s < np; ++s) {
      const Eigen::Index n = z_[s].rows();
      Eigen::LLT<Eigen::MatrixXd> llt(z_[s]);
      if (llt.info() != Eigen::Success) return false;
      const Eigen::MatrixXd l = llt.matrixL();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l.transpose() * x_[s] * l);
      if (es.info() != Eigen::Success) return false;
      const Eigen::VectorXd lam = es.eigenvalues();
      if (lam.minCoeff() <= 0.0) return false;
      const Eigen::MatrixXd linv =
          l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
      g_[s] = lam.array().pow(0.25).matrix().asDiagonal() *
              es.eigenvectors().transpose() * linv;
      ginv_[s] = l * es.eigenvectors() *
                 lam.array().pow(-0.25).matrix().asDiagonal();
      w_[s] = g_[s].transpose() * g_[s];
      w_[s] = 0.5 * (w_[s] + w_[s].transpose());
      dvec_[s] = lam.array().sqrt();
    }
    return true;
  }

  // S_ij = sum_b tr(A_i W A_j W) + the diagonal x/z part of nonneg blocks;
  // symmetric positive definite whenever the rows are independent.
  void build_schur() {
    const int m = static_cast<int>(d_.active_rows.size());
    schur_.setZero(m, m);
    // U[i][s] = W A_i W reused across j.
    std::vector<std::vector<Eigen::MatrixXd>> u(
        static_cast<std::size_t>(m), std::vector<Eigen::MatrixXd>(x_.size()));
    for (int i = 0; i < m; ++i)
      for (std::size_t s = 0; s < x_.size(); ++s) {
        const auto& a = d_.a_psd[static_cast<std::size_t>(i)][s];
        if (a.size()) u[static_cast<std::size_t>(i)][s] = w_[s] * a * w_[s];
      }
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        double v = 0.0;
        for (std::size_t s = 0; s < x_.size(); ++s) {
          const auto& aj = d_.a_psd[static_cast<std::size_t>(j)][s];
          const auto& ui = u[static_cast<std::size_t>(i)][s];
          if (aj.size() && ui.size()) v += (aj.array() * ui.array()).sum();
        }
        for (std::size_t s = 0; s < xn_.size(); ++s) {
          const auto& ai = d_.a_nn[static_cast<std::size_t>(i)][s];
          const auto& aj = d_.a_nn[static_cast<std::size_t>(j)][s];
          if (ai.size() && aj.size())
            v += (ai.array() * aj.array() * xn_[s].array() / zn_[s].array()).sum();
        }
        schur_(i, j) = v;
        schur_(j, i) = v;
      }
  }

  bool factor_kkt(int m, int nf) {
    const int n = m + nf;
    kkt_.setZero(n, n);
    kkt_.topLeftCorner(m, m) = schur_;
    // Free-variable columns.
    int col = m;
    for (std::size_t s = 0; s < xf_.size(); ++s)
      for (int k = 0; k < xf_[s].size(); ++k, ++col)
        for (int i = 0; i < m; ++i) {
          const auto& a = d_.a_free[static_cast<std::size_t>(i)][s];
          if (a.size()) kkt_(i, col) = a[k];
        }
    kkt_.bottomLeftCorner(nf, m) = kkt_.topRightCorner(m, nf).transpose();
    // Pinned (untouched) free variables get an identity row to keep the
    // factorization nonsingular; their value stays zero.
    for (const auto& [s, k] : pinned_free_) {
      int idx = m;
      for (std::size_t t = 0; t < s; ++t) idx += static_cast<int>(xf_[t].size());
      idx += k;
      kkt_(idx, idx) = 1.0;
    }
    lu_.compute(kkt_);
    if (lu_.rcond() < 1e-15) {
      // Tikhonov fallback keeps the direction finite when the augmented
      // system is numerically singular.
      const double reg = 1e-12 * (1.0 + kkt_.cwiseAbs().maxCoeff());
      Eigen::MatrixXd k2 = kkt_;
      k2.topLeftCorner(m, m).diagonal().array() += reg;
      k2.bottomRightCorner(nf, nf).diagonal().array() -= reg;
      for (const auto& [s, k] : pinned_free_) {
        int idx = m;
        for (std::size_t t = 0; t < s; ++t) idx += static_cast<int>(xf_[t].size());
        idx += k;
        k2(idx, idx) = 1.0;
      }
      lu_.compute(k2);
    }
    return true;
  }

  // nu = 0 with corr == nullptr gives the affine predictor; otherwise the
  // centering-plus-corrector direction with target nu and the Mehrotra
  // second-order term from the affine direction.  In NT-scaled coordinates
  // the complementarity linearization is diagonal:
  //   (d_i + d_j)/2 (dXt + dZt)_ij = (nu I - D^2 - H(dXt_aff dZt_aff))_ij
  // so dX = base + W (A^T dy) W with base = G^T T(Rt) G - W Rd W.
  Direction solve_direction(double nu, const Direction* corr) {
    const int m = static_cast<int>(d_.active_rows.size());
    const int nf = free_dim();
    Direction dir;

    std::vector<Eigen::MatrixXd> g(x_.size());
    for (std::size_t s = 0; s < x_.size(); ++s) {
      const Eigen::VectorXd& dv = dvec_[s];
      const Eigen::Index n = dv.size();
      Eigen::MatrixXd rt = Eigen::MatrixXd::Zero(n, n);
      rt.diagonal() = nu - dv.array().square();
      if (corr) {
        const Eigen::MatrixXd dxt =
            ginv_[s].transpose() * corr->dx_psd[s] * ginv_[s];
        const Eigen::MatrixXd dzt = g_[s] * corr->dz_psd[s] * g_[s].transpose();
        rt -= 0.5 * (dxt * dzt + dzt * dxt);
      }
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          rt(i, j) *= 2.0 / (dv[i] + dv[j]);
      g[s] = g_[s].transpose() * rt * g_[s] - w_[s] * rd_[s] * w_[s];
    }
    std::vector<Eigen::VectorXd> gn(xn_.size());
    for (std::size_t s = 0; s < xn_.size(); ++s) {
      Eigen::VectorXd e = xn_[s].array() * rdn_[s].array();
      if (corr)
        e.array() += corr->dx_nn[s].array() * corr->dz_nn[s].array();
      gn[s] = (nu - e.array()).matrix().array() / zn_[s].array() - xn_[s].array();
    }

    Eigen::VectorXd rhs(m + nf);
    for (int i = 0; i < m; ++i) {
      double h = rp_[i];
      for (std::size_t s = 0; s < x_.size(); ++s) {
        const auto& a = d_.a_psd[static_cast<std::size_t>(i)][s];
        if (a.size()) h -= (a.array() * g[s].array()).sum();
      }
      for (std::size_t s = 0; s < xn_.size(); ++s) {
        const auto& a = d_.a_nn[static_cast<std::size_t>(i)][s];
        if (a.size()) h -= a.dot(gn[s]);
      }
      rhs[i] = h;
    }
    int idx = m;
    for (std::size_t s = 0; s < xf_.size(); ++s)
      for (int k = 0; k < xf_[s].size(); ++k, ++idx) rhs[idx] = rdf_[s][k];
    for (const auto& [s, k] : pinned_free_) {
      int j = m;
      for (std::size_t t = 0; t < s; ++t) j += static_cast<int>(xf_[t].size());
      rhs[j + k] = 0.0;
    }

    Eigen::VectorXd sol = lu_.solve(rhs);
    // One step of iterative refinement; the augmented system is often
    // ill-conditioned near the optimum.
    Eigen::VectorXd resid = rhs - kkt_ * sol;
    sol += lu_.solve(resid);
    if (!sol.allFinite()) return dir;

    dir.dy = sol.head(m);
    dir.dx_free.resize(xf_.size());
    idx = m;
    for (std::size_t s = 0; s < xf_.size(); ++s) {
      dir.dx_free[s] = sol.segment(idx, xf_[s].size());
      idx += static_cast<int>(xf_[s].size());
    }

    dir.dz_psd.resize(x_.size());
    dir.dx_psd.resize(x_.size());
    for (std::size_t s = 0; s < x_.size(); ++s) {
      Eigen::MatrixXd dz = rd_[s];
      for (int i = 0; i < m; ++i) {
        const auto& a = d_.a_psd[static_cast<std::size_t>(i)][s];
        if (a.size()) dz -= dir.dy[i] * a;
      }
      // dX = base + W (sum_i dy_i A_i) W, and sum_i dy_i A_i = Rd - dZ.
      Eigen::MatrixXd dx = g[s] + w_[s] * (rd_[s] - dz) * w_[s];
      dir.dz_psd[s] = 0.5 * (dz + dz.transpose());
      dir.dx_psd[s] = 0.5 * (dx + dx.transpose());
    }
    dir.dz_nn.resize(xn_.size());
    dir.dx_nn.resize(xn_.size());
    for (std::size_t s = 0; s < xn_.size(); ++s) {
      Eigen::VectorXd dz = rdn_[s];
      for (int i = 0; i < m; ++i) {
        const auto& a = d_.a_nn[static_cast<std::size_t>(i)][s];
        if (a.size()) dz -= dir.dy[i] * a;
      }
      dir.dz_nn[s] = dz;
      // dx = g + x .* (A^T dy) ./ z, and A^T dy = rd - dz.
      dir.dx_nn[s] =
          gn[s].array() + xn_[s].array() * (rdn_[s] - dz).array() / zn_[s].array();
    }
    dir.ok = true;
    return dir;
  }

  double max_primal_step(const Direction& dir) const {
    double a = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < x_.size(); ++s)
      a = std::min(a, detail::step_to_boundary_psd(x_[s], dir.dx_psd[s]));
    for (std::size_t s = 0; s < xn_.size(); ++s)
      a = std::min(a, detail::step_to_boundary_vec(xn_[s], dir.dx_nn[s]));
    return a;
  }
  double max_dual_step(const Direction& dir) const {
    double a = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < x_.size(); ++s)
      a = std::min(a, detail::step_to_boundary_psd(z_[s], dir.dz_psd[s]));
    for (std::size_t s = 0; s < xn_.size(); ++s)
      a = std::min(a, detail::step_to_boundary_vec(zn_[s], dir.dz_nn[s]));
    return a;
  }

  double complementarity_after(const Direction& dir, double ap, double ad) const {
    double dot = 0.0;
    for (std::size_t s = 0; s < x_.size(); ++s) {
      const Eigen::MatrixXd x = x_[s] + ap * dir.dx_psd[s];
      const Eigen::MatrixXd z = z_[s] + ad * dir.dz_psd[s];
      dot += (x.array() * z.array()).sum();
    }
    for (std::size_t s = 0; s < xn_.size(); ++s)
      dot += (xn_[s] + ap * dir.dx_nn[s]).dot(zn_[s] + ad * dir.dz_nn[s]);
    return dot / static_cast<double>(d_.cone_dim);
  }

  // Applies the step only if every conic block stays strictly inside its
  // cone; returns false (leaving the iterate untouched) otherwise.
  bool try_step(const Direction& dir, double ap, double ad) {
    for (std::size_t s = 0; s < x_.size(); ++s) {
      const Eigen::MatrixXd xs =
          (x_[s] + ap * dir.dx_psd[s] +
           (x_[s] + ap * dir.dx_psd[s]).transpose()) * 0.5;
      const Eigen::MatrixXd zs =
          (z_[s] + ad * dir.dz_psd[s] +
           (z_[s] + ad * dir.dz_psd[s]).transpose()) * 0.5;
      if (Eigen::LLT<Eigen::MatrixXd>(xs).info() != Eigen::Success) return false;
      if (Eigen::LLT<Eigen::MatrixXd>(zs).info() != Eigen::Success) return false;
    }
    for (std::size_t s = 0; s < xn_.size(); ++s) {
      if (((xn_[s] + ap * dir.dx_nn[s]).array() <= 0.0).any()) return false;
      if (((zn_[s] + ad * dir.dz_nn[s]).array() <= 0.0).any()) return false;
    }
    for (std::size_t s = 0; s < x_.size(); ++s) {
      x_[s] += ap * dir.dx_psd[s];
      x_[s] = 0.5 * (x_[s] + x_[s].transpose());
      z_[s] += ad * dir.dz_psd[s];
      z_[s] = 0.5 * (z_[s] + z_[s].transpose());
    }
    for (std::size_t s = 0; s < xn_.size(); ++s) {
      xn_[s] += ap * dir.dx_nn[s];
      zn_[s] += ad * dir.dz_nn[s];
    }
    for (std::size_t s = 0; s < xf_.size(); ++s) xf_[s] += ap * dir.dx_free[s];
    y_ += ad * dir.dy;
    return true;
  }

  // Unscale and package.
  SdpSolution finish(SolveStatus status) {
    SdpSolution out;
    out.status = status;
    out.iterations = iter_;
    out.x_psd.assign(static_cast<std::size_t>(p_.block_count()), Eigen::MatrixXd());
    out.x_vec.assign(static_cast<std::size_t>(p_.block_count()), Eigen::VectorXd());
    out.z_psd.assign(static_cast<std::size_t>(p_.block_count()), Eigen::MatrixXd());
    out.z_vec.assign(static_cast<std::size_t>(p_.block_count()), Eigen::VectorXd());
    out.y = Eigen::VectorXd::Zero(p_.row_count());
    if (early_status_) {
      for (int b = 0; b < p_.block_count(); ++b) {
        const BlockSpec& s = p_.block(b);
        if (s.kind == BlockKind::PSD) {
          out.x_psd[static_cast<std::size_t>(b)] = Eigen::MatrixXd::Zero(s.size, s.size);
          out.z_psd[static_cast<std::size_t>(b)] = Eigen::MatrixXd::Zero(s.size, s.size);
        } else {
          out.x_vec[static_cast<std::size_t>(b)] = Eigen::VectorXd::Zero(s.size);
          out.z_vec[static_cast<std::size_t>(b)] = Eigen::VectorXd::Zero(s.size);
        }
      }
      return out;
    }
    for (std::size_t s = 0; s < d_.psd_blocks.size(); ++s) {
      const int b = d_.psd_blocks[s];
      out.x_psd[static_cast<std::size_t>(b)] = x_[s] * d_.b_scale;
      out.z_psd[static_cast<std::size_t>(b)] = z_[s] * d_.c_scale;
    }
    for (std::size_t s = 0; s < d_.nn_blocks.size(); ++s) {
      const int b = d_.nn_blocks[s];
      out.x_vec[static_cast<std::size_t>(b)] = xn_[s] * d_.b_scale;
      out.z_vec[static_cast<std::size_t>(b)] = zn_[s] * d_.c_scale;
    }
    for (std::size_t s = 0; s < d_.free_blocks.size(); ++s) {
      const int b = d_.free_blocks[s];
      out.x_vec[static_cast<std::size_t>(b)] = xf_[s] * d_.b_scale;
      out.z_vec[static_cast<std::size_t>(b)] = Eigen::VectorXd::Zero(xf_[s].size());
    }
    for (std::size_t r = 0; r < d_.active_rows.size(); ++r)
      out.y[d_.active_rows[r]] =
          y_[static_cast<Eigen::Index>(r)] * d_.c_scale /
          d_.row_scale[r];
    // Objectives on the original data.
    double pobj = 0.0;
    for (int b = 0; b < p_.block_count(); ++b) {
      if (p_.block(b).kind == BlockKind::PSD)
        pobj += (p_.objective_psd(b).array() *
                 out.x_psd[static_cast<std::size_t>(b)].array())
                    .sum();
      else
        pobj += p_.objective_vec(b).dot(out.x_vec[static_cast<std::size_t>(b)]);
    }
    double dobj = 0.0;
    for (int i = 0; i < p_.row_count(); ++i) dobj += p_.rhs(i) * out.y[i];
    out.primal_objective = pobj;
    out.dual_objective = dobj;
    compute_residuals();
    out.primal_residual =
        rp_.size() ? rp_.lpNorm<Eigen::Infinity>() / (1.0 + bnorm_) : 0.0;
    out.dual_residual = dual_residual_norm() / (1.0 + cnorm_);
    const double ps = primal_obj_scaled();
    const double ds = dual_obj_scaled();
    out.relative_gap =
        std::abs(ps - ds) / (1.0 + std::abs(ps) + std::abs(ds));
    return out;
  }

  const SdpProblem& p_;
  SolverSettings set_;
  detail::ScaledData d_;
  std::vector<int> slot_of_;
  std::vector<std::pair<int, int>> pinned_free_;  // (free slot, entry)
  std::optional<SolveStatus> early_status_;

  std::vector<Eigen::MatrixXd> x_, z_, rd_;
  std::vector<Eigen::MatrixXd> w_, g_, ginv_;  // NT scaling per psd block
  std::vector<Eigen::VectorXd> dvec_;
  std::vector<Eigen::VectorXd> xn_, zn_, rdn_;
  std::vector<Eigen::VectorXd> xf_, rdf_;
  Eigen::VectorXd y_, rp_;
  std::vector<Eigen::MatrixXd> best_x_, best_z_;
  std::vector<Eigen::VectorXd> best_xn_, best_zn_, best_xf_;
  Eigen::VectorXd best_y_;
  double best_score_ = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd schur_, kkt_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double bnorm_ = 0.0, cnorm_ = 0.0;
  double last_ap_ = 0.0, last_ad_ = 0.0, last_sigma_ = 0.0;
  int iter_ = 0;
};

inline SdpSolution solve_sdp(const SdpProblem& p, const SolverSettings& s = {}) {
  return SdpSolver(p, s).solve();
}

// Feasibility and optimality measures of a solution against the original
// (unscaled) problem data.
inline SdpResiduals sdp_residuals(const SdpProblem& p, const SdpSolution& sol) {
  SdpResiduals r;
  for (int i = 0; i < p.row_count(); ++i) {
    double ax = 0.0;
    for (const auto& [b, mat] : p.psd_terms(i))
      ax += (mat.array() * sol.x_psd[static_cast<std::size_t>(b)].array()).sum();
    for (const auto& [b, v] : p.vec_terms(i))
      ax += v.dot(sol.x_vec[static_cast<std::size_t>(b)]);
    r.primal = std::max(r.primal, std::abs(ax - p.rhs(i)));
  }
  double mineig = std::numeric_limits<double>::infinity();
  for (int b = 0; b < p.block_count(); ++b) {
    const BlockSpec& s = p.block(b);
    if (s.kind == BlockKind::PSD) {
      Eigen::MatrixXd rd = p.objective_psd(b) - sol.z_psd[static_cast<std::size_t>(b)];
      for (int i = 0; i < p.row_count(); ++i)
        for (const auto& [bb, mat] : p.psd_terms(i))
          if (bb == b) rd -= sol.y[i] * mat;
      r.dual = std::max(r.dual, rd.size() ? rd.cwiseAbs().maxCoeff() : 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          sol.x_psd[static_cast<std::size_t>(b)], Eigen::EigenvaluesOnly);
      mineig = std::min(mineig, es.eigenvalues().minCoeff());
    } else {
      Eigen::VectorXd rd = p.objective_vec(b) - sol.z_vec[static_cast<std::size_t>(b)];
      for (int i = 0; i < p.row_count(); ++i)
        for (const auto& [bb, v] : p.vec_terms(i))
          if (bb == b) rd -= sol.y[i] * v;
      r.dual = std::max(r.dual, rd.size() ? rd.cwiseAbs().maxCoeff() : 0.0);
      if (s.kind == BlockKind::Nonneg && sol.x_vec[static_cast<std::size_t>(b)].size())
        mineig = std::min(mineig, sol.x_vec[static_cast<std::size_t>(b)].minCoeff());
    }
  }
  r.min_eigenvalue = std::isfinite(mineig) ? mineig : 0.0;
  r.gap = std::abs(sol.primal_objective - sol.dual_objective);
  return r;
}

}  // namespace phiopt
