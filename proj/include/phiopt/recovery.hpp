#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "phiopt/assembler.hpp"
#include "phiopt/criteria.hpp"
#include "phiopt/model.hpp"
#include "phiopt/sdp.hpp"

namespace phiopt {

struct RecoveryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Finitely supported probability measure on the design space.
struct Design {
  std::vector<double> points;
  std::vector<double> weights;
  double phi_value = 0.0;
};

inline void validate_design(const Design& d) {
  if (d.points.size() != d.weights.size())
    throw RecoveryError("design points and weights differ in length");
  if (d.points.empty())
    throw RecoveryError("design must carry at least one point");
  double sum = 0.0;
  for (double w : d.weights) {
    if (!(w >= -1e-12)) throw RecoveryError("design weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-10)
    throw RecoveryError("design weights must sum to one");
  for (std::size_t j = 1; j < d.points.size(); ++j)
    if (!(d.points[j] - d.points[j - 1] > 1e-7))
      throw RecoveryError("design points must be sorted and distinct");
}

namespace detail {

inline std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration limit";
    case SolveStatus::NumericalError: return "numerical error";
  }
  return "unknown";
}

// A non-optimal exit still counts when the recomputed residuals certify the
// returned iterate.
inline bool certified(const SdpSolution& sol) {
  if (sol.status == SolveStatus::Optimal) return true;
  return sol.primal_residual <= 1e-7 && sol.dual_residual <= 1e-7 &&
         sol.relative_gap <= 1e-7;
}

// Level program shared by weight recovery and direct criterion evaluation:
//   max z  s.t.  A_i(sum_j w_j M_j + F) + B_i z + C_i(u) + D_i >= 0 per block,
//                w >= 0, sum w = 1,
// where the moment list may be empty (evaluation at the fixed matrix F only).
struct LevelProgram {
  SdpProblem p;
  int lambda_block = -1;
  int zu_block = -1;
};

inline Eigen::MatrixXd block_action(const CriterionRepresentation& rep, int i,
                                    const Eigen::MatrixXd& m) {
  const CriterionBlock& blk = rep.blocks[static_cast<std::size_t>(i)];
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(blk.size, blk.size);
  for (int r = 0; r < rep.dim; ++r)
    for (int c = r; c < rep.dim; ++c)
      v += m(r, c) * blk.a[static_cast<std::size_t>(sym_index(rep.dim, r, c))];
  return v;
}

inline LevelProgram level_program(const CriterionRepresentation& rep,
                                  const std::vector<Eigen::MatrixXd>& moments,
                                  const Eigen::MatrixXd* fixed) {
  LevelProgram out;
  SdpProblem& p = out.p;
  std::vector<int> slack;
  slack.reserve(rep.blocks.size());
  for (const CriterionBlock& blk : rep.blocks)
    slack.push_back(p.add_block(BlockKind::PSD, blk.size));
  const int n = static_cast<int>(moments.size());
  if (n > 0) out.lambda_block = p.add_block(BlockKind::Nonneg, n);
  out.zu_block = p.add_block(BlockKind::Free, 1 + rep.aux_dim);
  p.add_objective_entry(out.zu_block, 0, -1.0);

  for (std::size_t i = 0; i < rep.blocks.size(); ++i) {
    const CriterionBlock& blk = rep.blocks[i];
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(moments.size());
    for (const Eigen::MatrixXd& m : moments)
      acts.push_back(block_action(rep, static_cast<int>(i), m));
    Eigen::MatrixXd base = blk.d;
    if (fixed) base += block_action(rep, static_cast<int>(i), *fixed);
    for (int a = 0; a < blk.size; ++a)
      for (int b = a; b < blk.size; ++b) {
        const int row = p.add_row(base(a, b));
        p.add_coeff(row, slack[i], entry_selector(blk.size, a, b));
        for (int j = 0; j < n; ++j) {
          const double v = acts[static_cast<std::size_t>(j)](a, b);
          if (v != 0.0) p.add_entry(row, out.lambda_block, j, -v);
        }
        if (blk.b(a, b) != 0.0)
          p.add_entry(row, out.zu_block, 0, -blk.b(a, b));
        for (int q = 0; q < rep.aux_dim; ++q) {
          const double v = blk.c[static_cast<std::size_t>(q)](a, b);
          if (v != 0.0) p.add_entry(row, out.zu_block, 1 + q, -v);
        }
      }
  }
  if (n > 0) {
    const int row = p.add_row(1.0);
    for (int j = 0; j < n; ++j) p.add_entry(row, out.lambda_block, j, 1.0);
  }
  return out;
}

inline std::vector<double> sorted_unique_points(std::vector<double> pts) {
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double t : pts)
    if (out.empty() || t - out.back() > 1e-7) out.push_back(t);
  return out;
}

}  // namespace detail

// Largest level z the criterion representation admits at a fixed information
// matrix; -inf when no level is feasible (singular matrix under an
// inverse-type criterion).
inline double criterion_level(const CriterionRepresentation& rep,
                              const Eigen::MatrixXd& m,
                              const SolverSettings& settings = {}) {
  rep.validate();
  if (m.rows() != rep.dim || m.cols() != rep.dim)
    throw RecoveryError("information matrix does not match the criterion");
  detail::LevelProgram lp = detail::level_program(rep, {}, &m);
  const SdpSolution sol = solve_sdp(lp.p, settings);
  if (sol.status == SolveStatus::Infeasible)
    return -std::numeric_limits<double>::infinity();
  if (!detail::certified(sol))
    throw RecoveryError("criterion evaluation failed: " +
                        detail::status_name(sol.status));
  return sol.x_vec.at(static_cast<std::size_t>(lp.zu_block))(0);
}

// Optimal weights on a fixed support set: maximizes the criterion level over
// probability vectors on the given points, then prunes weights below 1e-7 and
// renormalizes.  phi_value keeps the unpruned optimum.
inline Design recover_weights(const RegressionModel& model,
                              const std::vector<double>& support,
                              const CriterionRepresentation& rep,
                              const SolverSettings& settings = {}) {
  rep.validate();
  if (rep.dim != model.dimension())
    throw RecoveryError("criterion dimension does not match the model");
  if (support.empty()) throw RecoveryError("support set is empty");
  for (double t : support)
    if (!model.space.contains(t, 1e-9))
      throw RecoveryError("support point " + std::to_string(t) +
                          " lies outside the design space");
  const std::vector<double> pts = detail::sorted_unique_points(support);

  std::vector<Eigen::MatrixXd> moments;
  moments.reserve(pts.size());
  for (double t : pts) moments.push_back(fisher_single_point(model, t));

  detail::LevelProgram lp = detail::level_program(rep, moments, nullptr);
  const SdpSolution sol = solve_sdp(lp.p, settings);
  if (!detail::certified(sol))
    throw RecoveryError("weight recovery failed: " +
                        detail::status_name(sol.status));

  const Eigen::VectorXd lam =
      sol.x_vec.at(static_cast<std::size_t>(lp.lambda_block));
  Design out;
  out.phi_value = sol.x_vec.at(static_cast<std::size_t>(lp.zu_block))(0);
  double kept = 0.0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double w = lam(static_cast<int>(j));
    if (w < 1e-7) continue;
    out.points.push_back(pts[j]);
    out.weights.push_back(w);
    kept += w;
  }
  if (out.points.empty())
    throw RecoveryError("weight recovery assigned no mass to any point");
  for (double& w : out.weights) w /= kept;
  validate_design(out);
  return out;
}

// Brute-force reference: weight recovery over a dense equispaced grid
// (endpoints included) of the whole space.
inline Design grid_oracle(const RegressionModel& model,
                          const CriterionRepresentation& rep, int n,
                          const SolverSettings& settings = {}) {
  if (n < 2) throw RecoveryError("grid oracle needs at least 2 points per interval");
  return recover_weights(model, model.space.grid(n), rep, settings);
}

// Mass-weighted grouping of design points closer than gap; used to compare a
// discretized design against a continuous one.
struct SupportCluster {
  double center = 0.0;
  double mass = 0.0;
};

inline std::vector<SupportCluster> cluster_support(const Design& d,
                                                   double gap) {
  std::vector<SupportCluster> out;
  double num = 0.0, mass = 0.0, last = 0.0;
  for (std::size_t j = 0; j < d.points.size(); ++j) {
    if (mass > 0.0 && d.points[j] - last > gap) {
      out.push_back({num / mass, mass});
      num = mass = 0.0;
    }
    num += d.points[j] * d.weights[j];
    mass += d.weights[j];
    last = d.points[j];
  }
  if (mass > 0.0) out.push_back({num / mass, mass});
  return out;
}

// First-principles check of a solved design against the dual certificate.
struct VerificationReport {
  double phi_primal = 0.0;
  double dual_y = 0.0;
  double gap = 0.0;
  double max_pi_at_support = 0.0;
  double min_pi_on_grid = 0.0;
  double pi_scale = 0.0;
  int support_bound = 0;
  bool support_on_roots = false;
  bool poly_nonnegative = false;
  bool value_matches = false;
  bool bound_satisfied = false;
  bool all_passed() const {
    return support_on_roots && poly_nonnegative && value_matches &&
           bound_satisfied;
  }
};

inline VerificationReport verify_design(const RegressionModel& model,
                                        const Design& design,
                                        const CriterionRepresentation& rep,
                                        const Polynomial& pi, double y,
                                        const SolverSettings& settings = {}) {
  validate_design(design);
  VerificationReport rpt;
  rpt.dual_y = y;

  const std::vector<double> grid = model.space.grid(2001);
  double norm = 0.0, min_pi = std::numeric_limits<double>::infinity();
  for (double t : grid) {
    const double v = pi(t);
    norm = std::max(norm, std::abs(v));
    min_pi = std::min(min_pi, v);
  }
  for (double t : design.points) norm = std::max(norm, std::abs(pi(t)));
  rpt.pi_scale = norm;
  rpt.min_pi_on_grid = min_pi;

  double max_at_support = 0.0;
  for (double t : design.points)
    max_at_support = std::max(max_at_support, std::abs(pi(t)));
  rpt.max_pi_at_support = max_at_support;
  rpt.support_on_roots = max_at_support <= 1e-5 * norm;
  rpt.poly_nonnegative = min_pi >= -1e-6 * norm;

  try {
    const Eigen::MatrixXd info =
        fisher_matrix(model, design.points, design.weights);
    rpt.phi_primal = criterion_level(rep, info, settings);
    rpt.gap = rpt.phi_primal - y;
    rpt.value_matches =
        std::isfinite(rpt.phi_primal) && std::abs(rpt.gap) <= 1e-5 * (1.0 + std::abs(y));
  } catch (const std::exception&) {
    rpt.phi_primal = std::numeric_limits<double>::quiet_NaN();
    rpt.gap = std::numeric_limits<double>::quiet_NaN();
    rpt.value_matches = false;
  }

  rpt.support_bound = support_size_bound(model);
  rpt.bound_satisfied =
      static_cast<int>(design.points.size()) <= rpt.support_bound;
  return rpt;
}

}  // namespace phiopt
