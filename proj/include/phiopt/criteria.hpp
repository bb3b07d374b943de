#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phiopt/model.hpp"
#include "phiopt/sdp.hpp"

namespace phiopt {

struct CriterionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Index of the upper-triangle entry (r,c), r <= c, in the row-major basis of
// m x m symmetric matrices.
inline int sym_index(int m, int r, int c) {
  return r * m - r * (r - 1) / 2 + (c - r);
}
inline int sym_dim(int m) { return m * (m + 1) / 2; }

// One LMI block of a level-set description: its value at the information
// matrix M, level z, and auxiliary vector u is
//   A(M) + B z + C(u) + D,
// stored as one coefficient matrix per symmetric-basis entry of M (the
// off-diagonal coefficients already contain both mirror positions), one
// matrix for z, one per auxiliary variable, and a constant.
struct CriterionBlock {
  int size = 0;
  std::vector<Eigen::MatrixXd> a;
  Eigen::MatrixXd b;
  std::vector<Eigen::MatrixXd> c;
  Eigen::MatrixXd d;
};

// Level sets {X : Phi(X) >= z} described by simultaneous LMI blocks sharing
// one auxiliary vector: Phi(X) >= z iff some u makes every block PSD.
struct CriterionRepresentation {
  int dim = 0;      // side of the information matrix
  int aux_dim = 0;  // shared auxiliary variables
  std::vector<CriterionBlock> blocks;

  void validate() const {
    if (dim < 1) throw CriterionError("criterion dimension must be positive");
    if (aux_dim < 0) throw CriterionError("negative auxiliary dimension");
    if (blocks.empty()) throw CriterionError("criterion needs at least one block");
    for (const CriterionBlock& blk : blocks) {
      if (blk.size < 1) throw CriterionError("criterion block must be nonempty");
      const auto square = [&](const Eigen::MatrixXd& m) {
        return m.rows() == blk.size && m.cols() == blk.size;
      };
      if (static_cast<int>(blk.a.size()) != sym_dim(dim))
        throw CriterionError("criterion block has wrong matrix-coefficient count");
      if (static_cast<int>(blk.c.size()) != aux_dim)
        throw CriterionError("criterion block has wrong auxiliary-coefficient count");
      if (!square(blk.b) || !square(blk.d))
        throw CriterionError("criterion block matrices must match the block size");
      for (const Eigen::MatrixXd& m : blk.a)
        if (!square(m)) throw CriterionError("criterion block matrices must match the block size");
      for (const Eigen::MatrixXd& m : blk.c)
        if (!square(m)) throw CriterionError("criterion block matrices must match the block size");
    }
  }

  Eigen::MatrixXd block_value(int i, const Eigen::MatrixXd& m, double z,
                              const Eigen::VectorXd& u) const {
    const CriterionBlock& blk = blocks[static_cast<std::size_t>(i)];
    Eigen::MatrixXd v = blk.d + z * blk.b;
    for (int r = 0; r < dim; ++r)
      for (int c = r; c < dim; ++c)
        v += m(r, c) * blk.a[static_cast<std::size_t>(sym_index(dim, r, c))];
    for (int j = 0; j < aux_dim; ++j)
      v += u[j] * blk.c[static_cast<std::size_t>(j)];
    return v;
  }
};

namespace detail {

// Coefficient matrices that reproduce M itself from its upper triangle.
inline std::vector<Eigen::MatrixXd> identity_action(int m, int block_size,
                                                    int offset) {
  std::vector<Eigen::MatrixXd> a(static_cast<std::size_t>(sym_dim(m)),
                                 Eigen::MatrixXd::Zero(block_size, block_size));
  for (int r = 0; r < m; ++r)
    for (int c = r; c < m; ++c) {
      Eigen::MatrixXd& e = a[static_cast<std::size_t>(sym_index(m, r, c))];
      e(offset + r, offset + c) = 1.0;
      e(offset + c, offset + r) = 1.0;
      if (r == c) e(offset + r, offset + r) = 1.0;
    }
  return a;
}

}  // namespace detail

// Smallest eigenvalue: lambda_min(M) >= z iff M - z I is PSD.
inline CriterionRepresentation represent_e(int m) {
  if (m < 1) throw CriterionError("criterion dimension must be positive");
  CriterionRepresentation rep;
  rep.dim = m;
  rep.aux_dim = 0;
  CriterionBlock blk;
  blk.size = m;
  blk.a = detail::identity_action(m, m, 0);
  blk.b = -Eigen::MatrixXd::Identity(m, m);
  blk.d = Eigen::MatrixXd::Zero(m, m);
  rep.blocks.push_back(std::move(blk));
  return rep;
}

// Negative trace of the inverse: -tr(M^{-1}) >= z iff auxiliaries u_k bound
// the diagonal of the inverse through Schur-complement blocks
//   [[M, e_k], [e_k^T, u_k]] PSD,  k = 1..m,  and  -z >= sum_k u_k.
inline CriterionRepresentation represent_a(int m) {
  if (m < 1) throw CriterionError("criterion dimension must be positive");
  CriterionRepresentation rep;
  rep.dim = m;
  rep.aux_dim = m;
  for (int k = 0; k < m; ++k) {
    CriterionBlock blk;
    blk.size = m + 1;
    blk.a = detail::identity_action(m, m + 1, 0);
    blk.b = Eigen::MatrixXd::Zero(m + 1, m + 1);
    blk.c.assign(static_cast<std::size_t>(m),
                 Eigen::MatrixXd::Zero(m + 1, m + 1));
    blk.c[static_cast<std::size_t>(k)](m, m) = 1.0;
    blk.d = Eigen::MatrixXd::Zero(m + 1, m + 1);
    blk.d(k, m) = 1.0;
    blk.d(m, k) = 1.0;
    rep.blocks.push_back(std::move(blk));
  }
  CriterionBlock sum;
  sum.size = 1;
  sum.a.assign(static_cast<std::size_t>(sym_dim(m)), Eigen::MatrixXd::Zero(1, 1));
  sum.b = -Eigen::MatrixXd::Ones(1, 1);
  sum.c.assign(static_cast<std::size_t>(m), -Eigen::MatrixXd::Ones(1, 1));
  sum.d = Eigen::MatrixXd::Zero(1, 1);
  rep.blocks.push_back(std::move(sum));
  return rep;
}

// Geometric mean of the eigenvalues: det(M)^{1/m} >= z iff a lower-triangular
// auxiliary L satisfies [[M, L], [L^T, Diag(L)]] PSD (which forces
// det M >= prod_j L_jj, with equality reachable via Cholesky) and the
// geometric mean of the diagonal entries L_jj reaches z.  The geometric mean
// is reduced to 2x2 blocks [[a, c], [c, b]] (c^2 <= ab) along a binary tree
// padded to a power of two with copies of the tree root, whose value s obeys
// s^K <= prod_j L_jj * s^{K-m}, hence s <= (prod L_jj)^{1/m}; a final scalar
// block enforces s - z >= 0.
inline CriterionRepresentation represent_d(int m) {
  if (m < 1) throw CriterionError("criterion dimension must be positive");
  CriterionRepresentation rep;
  rep.dim = m;
  int tree = 1;
  while (tree < m) tree *= 2;
  const int lower = sym_dim(m);
  rep.aux_dim = lower + std::max(0, tree - 1);
  const int root =
      tree == 1 ? sym_index(m, 0, 0) : lower + tree - 2;
  // L is indexed by sym_index on (column, row) pairs with column <= row, so
  // the diagonal entry L_jj lives at sym_index(m, j, j).
  const auto lower_index = [m](int r, int c) { return sym_index(m, c, r); };

  CriterionBlock main;
  main.size = 2 * m;
  main.a = detail::identity_action(m, 2 * m, 0);
  main.b = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  main.c.assign(static_cast<std::size_t>(rep.aux_dim),
                Eigen::MatrixXd::Zero(2 * m, 2 * m));
  for (int r = 0; r < m; ++r)
    for (int c = 0; c <= r; ++c) {
      Eigen::MatrixXd& e = main.c[static_cast<std::size_t>(lower_index(r, c))];
      e(r, m + c) += 1.0;
      e(m + c, r) += 1.0;
      if (r == c) e(m + r, m + r) += 1.0;
    }
  main.d = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  rep.blocks.push_back(std::move(main));

  if (tree > 1) {
    std::vector<int> level(static_cast<std::size_t>(tree));
    for (int j = 0; j < tree; ++j)
      level[static_cast<std::size_t>(j)] = j < m ? lower_index(j, j) : root;
    int next_node = lower;
    while (level.size() > 1) {
      std::vector<int> parents;
      for (std::size_t j = 0; j + 1 < level.size(); j += 2) {
        const int node = next_node++;
        CriterionBlock blk;
        blk.size = 2;
        blk.a.assign(static_cast<std::size_t>(sym_dim(m)),
                     Eigen::MatrixXd::Zero(2, 2));
        blk.b = Eigen::MatrixXd::Zero(2, 2);
        blk.c.assign(static_cast<std::size_t>(rep.aux_dim),
                     Eigen::MatrixXd::Zero(2, 2));
        blk.c[static_cast<std::size_t>(level[j])](0, 0) += 1.0;
        blk.c[static_cast<std::size_t>(level[j + 1])](1, 1) += 1.0;
        blk.c[static_cast<std::size_t>(node)](0, 1) += 1.0;
        blk.c[static_cast<std::size_t>(node)](1, 0) += 1.0;
        blk.d = Eigen::MatrixXd::Zero(2, 2);
        rep.blocks.push_back(std::move(blk));
        parents.push_back(node);
      }
      level = std::move(parents);
    }
  }

  CriterionBlock lvl;
  lvl.size = 1;
  lvl.a.assign(static_cast<std::size_t>(sym_dim(m)), Eigen::MatrixXd::Zero(1, 1));
  lvl.b = -Eigen::MatrixXd::Ones(1, 1);
  lvl.c.assign(static_cast<std::size_t>(rep.aux_dim), Eigen::MatrixXd::Zero(1, 1));
  lvl.c[static_cast<std::size_t>(root)](0, 0) = 1.0;
  lvl.d = Eigen::MatrixXd::Zero(1, 1);
  rep.blocks.push_back(std::move(lvl));
  return rep;
}

enum class CriterionKind { E, A, D, Custom };

struct Criterion {
  CriterionKind kind = CriterionKind::E;
  CriterionRepresentation rep;

  static Criterion make(CriterionKind kind, int m) {
    Criterion out;
    out.kind = kind;
    switch (kind) {
      case CriterionKind::E: out.rep = represent_e(m); break;
      case CriterionKind::A: out.rep = represent_a(m); break;
      case CriterionKind::D: out.rep = represent_d(m); break;
      case CriterionKind::Custom:
        throw CriterionError("custom criteria need an explicit representation");
    }
    return out;
  }

  static Criterion custom(CriterionRepresentation rep) {
    rep.validate();
    Criterion out;
    out.kind = CriterionKind::Custom;
    out.rep = std::move(rep);
    return out;
  }
};

// Direct evaluation of the built-in criteria; the independent reference the
// representations are tested against.  A is -infinity off the PD cone, D is
// the continuous extension det^{1/m} = 0 on the PSD boundary.
inline double criterion_value(CriterionKind kind, const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw CriterionError("criterion_value needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd lam = es.eigenvalues();
  switch (kind) {
    case CriterionKind::E:
      return lam.minCoeff();
    case CriterionKind::A: {
      if (lam.minCoeff() <= 0.0)
        return -std::numeric_limits<double>::infinity();
      return -lam.cwiseInverse().sum();
    }
    case CriterionKind::D: {
      if (lam.minCoeff() <= 0.0) return 0.0;
      return std::exp(lam.array().log().sum() /
                      static_cast<double>(lam.size()));
    }
    case CriterionKind::Custom:
      break;
  }
  throw CriterionError("custom criteria have no direct evaluation");
}

namespace detail {

// (E_ab + E_ba)/2, whose inner product with a symmetric S extracts S_ab.
inline Eigen::MatrixXd entry_selector(int n, int a, int b) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
  if (a == b) {
    e(a, a) = 1.0;
  } else {
    e(a, b) = 0.5;
    e(b, a) = 0.5;
  }
  return e;
}

}  // namespace detail

// Largest level z with the blocks feasible at fixed M: the representation's
// notion of Phi(M).  Empty when the level problem is infeasible (M outside
// the criterion's domain) or the solve breaks down.
inline std::optional<double> max_feasible_level(
    const CriterionRepresentation& rep, const Eigen::MatrixXd& m,
    const SolverSettings& settings = {}) {
  rep.validate();
  if (m.rows() != rep.dim || m.cols() != rep.dim)
    throw CriterionError("matrix does not match the criterion dimension");
  SdpProblem prob;
  const int vars = prob.add_block(BlockKind::Free, 1 + rep.aux_dim);
  prob.add_objective_entry(vars, 0, -1.0);
  std::vector<int> slack;
  slack.reserve(rep.blocks.size());
  for (const CriterionBlock& blk : rep.blocks)
    slack.push_back(prob.add_block(BlockKind::PSD, blk.size));
  for (std::size_t i = 0; i < rep.blocks.size(); ++i) {
    const CriterionBlock& blk = rep.blocks[i];
    Eigen::MatrixXd base = blk.d;
    for (int r = 0; r < rep.dim; ++r)
      for (int c = r; c < rep.dim; ++c)
        base += m(r, c) * blk.a[static_cast<std::size_t>(sym_index(rep.dim, r, c))];
    for (int a = 0; a < blk.size; ++a)
      for (int b = a; b < blk.size; ++b) {
        const int row = prob.add_row(base(a, b));
        prob.add_coeff(row, slack[i], detail::entry_selector(blk.size, a, b));
        if (blk.b(a, b) != 0.0) prob.add_entry(row, vars, 0, -blk.b(a, b));
        for (int j = 0; j < rep.aux_dim; ++j) {
          const double v = blk.c[static_cast<std::size_t>(j)](a, b);
          if (v != 0.0) prob.add_entry(row, vars, 1 + j, -v);
        }
      }
  }
  const SdpSolution sol = solve_sdp(prob, settings);
  if (sol.status != SolveStatus::Optimal) return std::nullopt;
  return sol.x_vec[static_cast<std::size_t>(vars)](0);
}

struct AdmissibilityReport {
  bool admissible = false;
  double margin = 0.0;       // joint block eigenvalue floor reached, capped
  Eigen::MatrixXd probe;     // information matrix the blocks were tested on
  std::string message;
};

// Decides whether some feasible information matrix makes every block of the
// representation strictly positive definite, probing with the uniform design
// on equispaced points.  The probe maximizes t subject to every block
// dominating tI.  Two guards keep the solve well-posed: t is capped at a
// small multiple of the probe scale, so on healthy inputs the optimum stops
// with every block strictly inside the cone instead of chasing the supremal
// margin (which is typically attained only as auxiliaries diverge); and the
// level plus auxiliaries enter split into nonnegative parts under a shared
// magnitude budget, which bounds the escaping ray in the degenerate case.
// The budget row is normalized to unit right-hand side so it does not
// distort the problem scaling.
inline AdmissibilityReport admissibility_probe(
    const CriterionRepresentation& rep, const RegressionModel& model,
    int min_points_per_interval = 0,
    const SolverSettings& settings = {}) {
  rep.validate();
  if (model.dimension() != rep.dim)
    throw CriterionError("model dimension does not match the criterion");
  AdmissibilityReport out;
  const int points = std::max(2 * rep.dim, min_points_per_interval);
  const std::vector<double> grid = model.space.grid(points);
  const std::vector<double> weights(grid.size(),
                                    1.0 / static_cast<double>(grid.size()));
  out.probe = fisher_matrix(model, grid, weights);

  const double scale = 1.0 + out.probe.norm();
  const double cap_level = 1e-4 * scale;
  const double budget = 1e4 * scale;
  SdpProblem prob;
  const int vars = prob.add_block(BlockKind::Free, 1);
  const int pos = prob.add_block(BlockKind::Nonneg, 1 + rep.aux_dim);
  const int neg = prob.add_block(BlockKind::Nonneg, 1 + rep.aux_dim);
  prob.add_objective_entry(vars, 0, -1.0);
  {
    const int spare = prob.add_block(BlockKind::Nonneg, 1);
    const int row = prob.add_row(1.0);
    prob.add_entry(row, spare, 0, 1.0);
    for (int j = 0; j <= rep.aux_dim; ++j) {
      prob.add_entry(row, pos, j, 1.0 / budget);
      prob.add_entry(row, neg, j, 1.0 / budget);
    }
  }
  const int cap = prob.add_block(BlockKind::Nonneg, 1);
  {
    const int row = prob.add_row(cap_level);
    prob.add_entry(row, cap, 0, 1.0);
    prob.add_entry(row, vars, 0, 1.0);
  }
  for (const CriterionBlock& blk : rep.blocks) {
    const int slack = prob.add_block(BlockKind::PSD, blk.size);
    Eigen::MatrixXd base = blk.d;
    for (int r = 0; r < rep.dim; ++r)
      for (int c = r; c < rep.dim; ++c)
        base += out.probe(r, c) *
                blk.a[static_cast<std::size_t>(sym_index(rep.dim, r, c))];
    for (int a = 0; a < blk.size; ++a)
      for (int b = a; b < blk.size; ++b) {
        const int row = prob.add_row(base(a, b));
        prob.add_coeff(row, slack, detail::entry_selector(blk.size, a, b));
        if (blk.b(a, b) != 0.0) {
          prob.add_entry(row, pos, 0, -blk.b(a, b));
          prob.add_entry(row, neg, 0, blk.b(a, b));
        }
        for (int j = 0; j < rep.aux_dim; ++j) {
          const double v = blk.c[static_cast<std::size_t>(j)](a, b);
          if (v != 0.0) {
            prob.add_entry(row, pos, 1 + j, -v);
            prob.add_entry(row, neg, 1 + j, v);
          }
        }
        if (a == b) prob.add_entry(row, vars, 0, 1.0);
      }
  }
  const SdpSolution sol = solve_sdp(prob, settings);
  if (sol.status == SolveStatus::Infeasible) {
    out.message = "no level is feasible on the probe design";
    return out;
  }
  // A stalled solve with a near-feasible iterate still classifies reliably:
  // an underconverged t only understates the margin, while primal residual
  // bounds how much it can overstate it.
  const bool usable =
      sol.status == SolveStatus::Optimal ||
      (sol.primal_residual <= 1e-6 && sol.dual_residual <= 1e-4);
  if (!usable) {
    out.message = "admissibility probe solve did not reach optimality";
    return out;
  }
  out.margin = sol.x_vec[static_cast<std::size_t>(vars)](0);
  out.admissible = out.margin > 1e-6 * scale;
  if (!out.admissible)
    out.message = "blocks cannot be made positive definite on the probe design";
  return out;
}

}  // namespace phiopt
