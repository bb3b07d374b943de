#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phiopt/criteria.hpp"
#include "phiopt/design_space.hpp"
#include "phiopt/model.hpp"
#include "phiopt/nonneg_cone.hpp"
#include "phiopt/polynomial.hpp"
#include "phiopt/rational.hpp"
#include "phiopt/sdp.hpp"

namespace phiopt {

// Assembly of the support-locating conic program.  The optimal-design support
// is contained in the real zeros of one polynomial obtained by solving:
// minimize a level y over certificate matrices W_i (one per criterion block)
// subject to a normalization row, the auxiliary-variable balance, and the
// condition that
//   den(t) * (y - sum_i <W_i, A_i(M(t)) + D_i>)
// has nonnegative values on the design space, where M(t) is the one-point
// information matrix and den is a common-denominator multiplier chosen
// positive on the space.  The subsystem variant scores only K' theta: the
// moment coupling runs through a single matrix V with K'VK dominating
// sum_i A_i*(W_i) and the criterion acts in the subsystem dimension.

struct AssemblerError : std::runtime_error {
  explicit AssemblerError(const std::string& what) : std::runtime_error(what) {}
};

// The solved certificate can sit on a face where the output polynomial is
// identically zero; it then carries no support information and the caller
// should rescale the basis and retry.
struct DegeneratePolynomial : AssemblerError {
  explicit DegeneratePolynomial(const std::string& what)
      : AssemblerError(what) {}
};

// Model with every polynomial converted to the monomial basis; products and
// coefficient extraction below are monomial-only.
inline RegressionModel to_monomial_model(const RegressionModel& model) {
  const auto conv = [](const Polynomial& p) {
    return p.basis() == PolyBasis::Monomial
               ? p
               : change_basis(p, PolyBasis::Monomial);
  };
  RegressionModel out = model;
  out.weight = {conv(model.weight.num), conv(model.weight.den)};
  for (std::size_t i = 0; i < out.basis.size(); ++i)
    out.basis[i] = {conv(model.basis[i].num), conv(model.basis[i].den)};
  return out;
}

// Entrywise one-point information matrix: entry (r, c) is the rational
// function omega * f_r * f_c.
inline std::vector<std::vector<RationalFunction>> moment_functions(
    const RegressionModel& model) {
  const int m = model.dimension();
  std::vector<std::vector<RationalFunction>> out(
      static_cast<std::size_t>(m),
      std::vector<RationalFunction>(static_cast<std::size_t>(m)));
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
          model.weight * model.basis[static_cast<std::size_t>(r)] *
          model.basis[static_cast<std::size_t>(c)];
  return out;
}

namespace detail {

struct CommonDenominator {
  DenominatorLcm lcm;
  Polynomial den = Polynomial::zero();  // positive on the design space
  int degree_bound = 0;                 // allocated output degree
};

// Builds the clearing denominator.  The weight denominator enters once and
// every basis denominator squared; when the weight shares an atom class with
// a basis function the class power must cover 1 + 2 appearances at once.
// Odd atom powers can make the product negative somewhere on the space, in
// which case the weight atom is raised once more to restore positivity
// (basis atoms always enter at even powers and cannot flip sign).
inline CommonDenominator common_denominator(const RegressionModel& model) {
  CommonDenominator out;
  const Polynomial& wden = model.weight.den;
  out.lcm.require(wden, 1);
  bool shared = false;
  for (const RationalFunction& f : model.basis) {
    out.lcm.require(f.den, 2);
    if (wden.degree() >= 1 && f.den.degree() >= 1 &&
        proportional(wden, f.den))
      shared = true;
  }
  if (shared) out.lcm.require(wden, 3);
  out.den = out.lcm.polynomial();

  const std::vector<double> grid = model.space.grid(257);
  const auto positive = [&grid](const Polynomial& p) {
    for (double t : grid)
      if (p(t) <= 0.0) return false;
    return true;
  };
  if (!positive(out.den)) {
    if (wden.degree() < 1)
      throw AssemblerError("common denominator is not positive on the space");
    out.lcm.require(wden, out.lcm.power_of(wden) + 1);
    out.den = out.lcm.polynomial();
    if (!positive(out.den))
      throw AssemblerError("common denominator is not positive on the space");
  }

  const auto excess = [](const RationalFunction& f) {
    return f.num.degree() - f.den.degree();
  };
  int max_e = excess(model.basis.front());
  for (const RationalFunction& f : model.basis)
    max_e = std::max(max_e, excess(f));
  out.degree_bound =
      out.lcm.degree() +
      std::max(0, excess(model.weight) + 2 * max_e);
  return out;
}

}  // namespace detail

// Degree allocated for the output polynomial.  Individual coefficients above
// the true degree assemble to zero; the bound never undershoots.
inline int support_polynomial_degree(const RegressionModel& model) {
  validate_model(model);
  return detail::common_denominator(to_monomial_model(model)).degree_bound;
}

// Cap on the number of support points: a polynomial of degree d nonnegative
// on the space has at most (k1 + 2 k2 + d) / 2 zeros there (k1 singletons,
// k2 proper intervals; interior zeros are double), and trivially at most d.
inline int support_size_bound(const RegressionModel& model) {
  const int d = support_polynomial_degree(model);
  const int k1 = model.space.singleton_count();
  const int k2 = model.space.proper_count();
  return std::min((k1 + 2 * k2 + d) / 2, d);
}

// Linear map from the certificate (y, W_1..W_p) to output coefficients:
//   poly = den * y - sum_i sum_{a<=b} block_polys[i][sym_index(a,b)] * W_i(a,b).
// block_polys entries absorb the factor 2 for off-diagonal positions;
// moment_polys holds the raw cleared entries den * omega * f_r * f_c and
// serves the subsystem variant, where the certificate is (y, V, W_1..W_p).
struct CoefficientMap {
  Polynomial den = Polynomial::zero();
  int degree = 0;
  std::vector<Polynomial> moment_polys;
  std::vector<std::vector<Polynomial>> block_polys;
};

inline CoefficientMap coefficient_map(const RegressionModel& model_in,
                                      const CriterionRepresentation& rep) {
  validate_model(model_in);
  rep.validate();
  const RegressionModel model = to_monomial_model(model_in);
  const int m = model.dimension();
  if (rep.dim != m)
    throw AssemblerError("criterion dimension does not match the model");

  detail::CommonDenominator cd = detail::common_denominator(model);
  if (cd.degree_bound > 64)
    throw AssemblerError("output polynomial degree exceeds the cap of 64");

  CoefficientMap map;
  map.den = cd.den;
  map.degree = cd.degree_bound;

  map.moment_polys.reserve(static_cast<std::size_t>(sym_dim(m)));
  for (int r = 0; r < m; ++r)
    for (int c = r; c < m; ++c) {
      const RationalFunction& fr = model.basis[static_cast<std::size_t>(r)];
      const RationalFunction& fc = model.basis[static_cast<std::size_t>(c)];
      map.moment_polys.push_back(cd.lcm.clear(
          model.weight.num * fr.num * fc.num,
          {&model.weight.den, &fr.den, &fc.den}));
    }

  map.block_polys.resize(rep.blocks.size());
  for (std::size_t i = 0; i < rep.blocks.size(); ++i) {
    const CriterionBlock& blk = rep.blocks[i];
    const int k = blk.size;
    std::vector<Polynomial>& polys = map.block_polys[i];
    polys.reserve(static_cast<std::size_t>(sym_dim(k)));
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b) {
        Polynomial acc = map.den * blk.d(a, b);
        for (int r = 0; r < m; ++r)
          for (int c = r; c < m; ++c) {
            const double w =
                blk.a[static_cast<std::size_t>(sym_index(m, r, c))](a, b);
            if (w != 0.0)
              acc = acc +
                    map.moment_polys[static_cast<std::size_t>(
                        sym_index(m, r, c))] *
                        w;
          }
        polys.push_back(acc * (a == b ? 1.0 : 2.0));
      }
  }
  return map;
}

// Evaluates the map on a full-variant certificate.
inline Polynomial support_polynomial(const CoefficientMap& map, double y,
                                     const std::vector<Eigen::MatrixXd>& w) {
  Polynomial out = map.den * y;
  for (std::size_t i = 0; i < map.block_polys.size(); ++i) {
    const Eigen::MatrixXd& wi = w.at(i);
    const int k = static_cast<int>(wi.rows());
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b)
        out = out -
              map.block_polys[i][static_cast<std::size_t>(sym_index(k, a, b))] *
                  wi(a, b);
  }
  return out;
}

// Evaluates the map on a subsystem certificate: the moment coupling runs
// through V alone and the W_i contribute only their constant offsets.
inline Polynomial support_polynomial(const CoefficientMap& map,
                                     const CriterionRepresentation& rep,
                                     double y, const Eigen::MatrixXd& v,
                                     const std::vector<Eigen::MatrixXd>& w) {
  const int m = static_cast<int>(v.rows());
  Polynomial out = map.den * y;
  for (int r = 0; r < m; ++r)
    for (int c = r; c < m; ++c)
      out = out -
            map.moment_polys[static_cast<std::size_t>(sym_index(m, r, c))] *
                (v(r, c) * (r == c ? 1.0 : 2.0));
  for (std::size_t i = 0; i < rep.blocks.size(); ++i) {
    const CriterionBlock& blk = rep.blocks[i];
    for (int a = 0; a < blk.size; ++a)
      for (int b = a; b < blk.size; ++b) {
        const double c = blk.d(a, b) * (a == b ? 1.0 : 2.0);
        if (c != 0.0) out = out - map.den * (c * w.at(i)(a, b));
      }
  }
  return out;
}

// Design task: model, criterion, and optionally an m x s coefficient matrix
// whose columns name the parameter combinations being scored.  With a
// subsystem the criterion acts in dimension s.
struct DesignProblem {
  RegressionModel model;
  Criterion criterion;
  std::optional<Eigen::MatrixXd> subsystem;
};

namespace detail {

inline int svd_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i) r += s(i) > tol * s(0);
  return r;
}

}  // namespace detail

inline void validate_design_problem(const DesignProblem& prob) {
  validate_model(prob.model);
  prob.criterion.rep.validate();
  const int m = prob.model.dimension();
  if (!prob.subsystem) {
    if (prob.criterion.rep.dim != m)
      throw AssemblerError("criterion dimension does not match the model");
    return;
  }
  const Eigen::MatrixXd& k = *prob.subsystem;
  const int s = static_cast<int>(k.cols());
  if (static_cast<int>(k.rows()) != m)
    throw AssemblerError("subsystem matrix must have one row per parameter");
  if (s < 1 || s > m)
    throw AssemblerError("subsystem size must lie between 1 and the model dimension");
  if (!k.allFinite())
    throw AssemblerError("subsystem matrix must be finite");
  if (prob.criterion.rep.dim != s)
    throw AssemblerError("criterion dimension does not match the subsystem size");
  if (detail::svd_rank(k, 1e-10) != s)
    throw AssemblerError("subsystem matrix must have full column rank");
  // Estimability: the subsystem must be identifiable from some design, so
  // the columns of K must lie in the range of a saturated information
  // matrix (dense uniform grid).
  const std::vector<double> grid =
      prob.model.space.grid(std::max(8 * m, 32));
  const std::vector<double> weights(grid.size(), 1.0 / grid.size());
  const Eigen::MatrixXd info = fisher_matrix(prob.model, grid, weights);
  Eigen::MatrixXd aug(m, m + s);
  aug.leftCols(m) = info / std::max(1.0, info.norm());
  for (int j = 0; j < s; ++j)
    aug.col(m + j) = k.col(j) / std::max(1.0, k.col(j).norm());
  if (detail::svd_rank(aug, 1e-10) !=
      detail::svd_rank(aug.leftCols(m).eval(), 1e-10))
    throw AssemblerError("subsystem is not estimable on the design space");
}

// Assembled conic program plus the block and row bookkeeping needed to read
// the solution back.  Coefficient k of the output polynomial is entry 1 + k
// of the scalarization block; entry 0 is the level.
struct AssembledSdp {
  SdpProblem problem;
  int degree = 0;
  Polynomial den = Polynomial::zero();
  int scal_block = -1;
  std::vector<int> w_blocks;
  int v_block = -1;        // subsystem variant only
  int ineq_block = -1;     // slack of the subsystem domination inequality
  std::vector<int> cone_x_blocks;  // per proper interval
  std::vector<int> cone_y_blocks;  // -1 where the second cone factor is empty
  std::vector<int> singleton_blocks;
  int first_coeff_row = -1;  // degree + 1 consecutive rows pin the map
};

namespace detail {

inline void add_nonzero_coeff(SdpProblem& p, int row, int block,
                              const Eigen::MatrixXd& a) {
  if (a.size() != 0 && a.cwiseAbs().maxCoeff() > 0.0)
    p.add_coeff(row, block, a);
}

// Shared tail of both variants: cone membership rows tie the coefficient
// entries of the scalarization block to nonnegativity certificates on every
// piece of the design space.
inline void add_cone_rows(AssembledSdp& out, const DesignSpace& space) {
  SdpProblem& p = out.problem;
  const int d = out.degree;
  const SpaceConeSet set = represent_space(d, space);
  for (const ConeRepresentation& cr : set.intervals) {
    const int bx = p.add_block(BlockKind::PSD, cr.dim_x);
    const int by =
        cr.dim_y > 0 ? p.add_block(BlockKind::PSD, cr.dim_y) : -1;
    out.cone_x_blocks.push_back(bx);
    out.cone_y_blocks.push_back(by);
    for (int k = 0; k <= d; ++k) {
      const int row = p.add_row(0.0);
      p.add_entry(row, out.scal_block, 1 + k, -1.0);
      add_nonzero_coeff(p, row, bx, cr.cx[static_cast<std::size_t>(k)]);
      if (by >= 0)
        add_nonzero_coeff(p, row, by, cr.cy[static_cast<std::size_t>(k)]);
    }
  }
  for (double t0 : set.singletons) {
    const int bs = p.add_block(BlockKind::Nonneg, 1);
    out.singleton_blocks.push_back(bs);
    const int row = p.add_row(0.0);
    double tk = 1.0;
    for (int k = 0; k <= d; ++k) {
      p.add_entry(row, out.scal_block, 1 + k, tk);
      tk *= t0;
    }
    p.add_entry(row, bs, 0, -1.0);
  }
}

inline void add_certificate_rows(AssembledSdp& out,
                                 const CriterionRepresentation& rep) {
  SdpProblem& p = out.problem;
  const int norm_row = p.add_row(-1.0);
  for (std::size_t i = 0; i < rep.blocks.size(); ++i)
    add_nonzero_coeff(p, norm_row, out.w_blocks[i], rep.blocks[i].b);
  for (int j = 0; j < rep.aux_dim; ++j) {
    const int row = p.add_row(0.0);
    for (std::size_t i = 0; i < rep.blocks.size(); ++i)
      add_nonzero_coeff(p, row, out.w_blocks[i],
                        rep.blocks[i].c[static_cast<std::size_t>(j)]);
  }
}

}  // namespace detail

// Full variant: minimize the level y subject to the certificate rows and the
// coefficient map
//   coeff_k - den_k * y + sum_i <W_i, G_i^(k)> = 0,
// where G_i^(k) collects coefficient k of den * (A_i(M(t)) + D_i).
inline AssembledSdp assemble_full(const RegressionModel& model,
                                  const CriterionRepresentation& rep) {
  const CoefficientMap map = coefficient_map(model, rep);
  AssembledSdp out;
  out.degree = map.degree;
  out.den = map.den;
  SdpProblem& p = out.problem;

  out.scal_block = p.add_block(BlockKind::Free, 2 + map.degree);
  p.add_objective_entry(out.scal_block, 0, 1.0);
  for (const CriterionBlock& blk : rep.blocks)
    out.w_blocks.push_back(p.add_block(BlockKind::PSD, blk.size));

  detail::add_certificate_rows(out, rep);

  out.first_coeff_row = p.row_count();
  for (int k = 0; k <= map.degree; ++k) {
    const int row = p.add_row(0.0);
    p.add_entry(row, out.scal_block, 1 + k, 1.0);
    p.add_entry(row, out.scal_block, 0, -map.den.coeff(k));
    for (std::size_t i = 0; i < rep.blocks.size(); ++i) {
      const int kb = rep.blocks[i].size;
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(kb, kb);
      for (int a = 0; a < kb; ++a)
        for (int b = a; b < kb; ++b) {
          const double v =
              map.block_polys[i][static_cast<std::size_t>(sym_index(kb, a, b))]
                  .coeff(k);
          g(a, b) = a == b ? v : 0.5 * v;
          g(b, a) = g(a, b);
        }
      detail::add_nonzero_coeff(p, row, out.w_blocks[i], g);
    }
  }

  detail::add_cone_rows(out, model.space);
  return out;
}

// Subsystem variant: the moment coupling runs through one matrix V, bounded
// below in the subsystem coordinates by the certificate adjoints,
//   K' V K - sum_i A_i*(W_i) = T >= 0,
// and the coefficient map reads den * (y - <V, M(t)> - sum_i <W_i, D_i>).
inline AssembledSdp assemble_subsystem(const RegressionModel& model,
                                       const CriterionRepresentation& rep,
                                       const Eigen::MatrixXd& k_mat) {
  DesignProblem prob;
  prob.model = model;
  prob.criterion = Criterion::custom(rep);
  prob.subsystem = k_mat;
  validate_design_problem(prob);

  const RegressionModel mono = to_monomial_model(model);
  const int m = mono.dimension();
  const int s = static_cast<int>(k_mat.cols());
  detail::CommonDenominator cd = detail::common_denominator(mono);
  if (cd.degree_bound > 64)
    throw AssemblerError("output polynomial degree exceeds the cap of 64");

  std::vector<Polynomial> moment_polys;
  moment_polys.reserve(static_cast<std::size_t>(sym_dim(m)));
  for (int r = 0; r < m; ++r)
    for (int c = r; c < m; ++c) {
      const RationalFunction& fr = mono.basis[static_cast<std::size_t>(r)];
      const RationalFunction& fc = mono.basis[static_cast<std::size_t>(c)];
      moment_polys.push_back(cd.lcm.clear(
          mono.weight.num * fr.num * fc.num,
          {&mono.weight.den, &fr.den, &fc.den}));
    }

  AssembledSdp out;
  out.degree = cd.degree_bound;
  out.den = cd.den;
  SdpProblem& p = out.problem;

  out.scal_block = p.add_block(BlockKind::Free, 2 + out.degree);
  p.add_objective_entry(out.scal_block, 0, 1.0);
  for (const CriterionBlock& blk : rep.blocks)
    out.w_blocks.push_back(p.add_block(BlockKind::PSD, blk.size));
  out.v_block = p.add_block(BlockKind::PSD, m);
  out.ineq_block = p.add_block(BlockKind::PSD, s);

  detail::add_certificate_rows(out, rep);

  for (int a = 0; a < s; ++a)
    for (int b = a; b < s; ++b) {
      const int row = p.add_row(0.0);
      const Eigen::VectorXd ka = k_mat.col(a);
      const Eigen::VectorXd kb = k_mat.col(b);
      const Eigen::MatrixXd outer =
          0.5 * (ka * kb.transpose() + kb * ka.transpose());
      detail::add_nonzero_coeff(p, row, out.v_block, outer);
      const double scale = a == b ? 1.0 : 0.5;
      for (std::size_t i = 0; i < rep.blocks.size(); ++i)
        detail::add_nonzero_coeff(
            p, row, out.w_blocks[i],
            (-scale *
             rep.blocks[i].a[static_cast<std::size_t>(sym_index(s, a, b))])
                .eval());
      p.add_coeff(row, out.ineq_block, -detail::entry_selector(s, a, b));
    }

  out.first_coeff_row = p.row_count();
  for (int k = 0; k <= out.degree; ++k) {
    const int row = p.add_row(0.0);
    p.add_entry(row, out.scal_block, 1 + k, 1.0);
    const double den_k = out.den.coeff(k);
    p.add_entry(row, out.scal_block, 0, -den_k);
    Eigen::MatrixXd gv = Eigen::MatrixXd::Zero(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = r; c < m; ++c) {
        const double v =
            moment_polys[static_cast<std::size_t>(sym_index(m, r, c))]
                .coeff(k);
        gv(r, c) = v;
        gv(c, r) = v;
      }
    detail::add_nonzero_coeff(p, row, out.v_block, gv);
    if (den_k != 0.0)
      for (std::size_t i = 0; i < rep.blocks.size(); ++i)
        detail::add_nonzero_coeff(p, row, out.w_blocks[i],
                                  (den_k * rep.blocks[i].d).eval());
  }

  detail::add_cone_rows(out, model.space);
  return out;
}

inline AssembledSdp assemble(const DesignProblem& prob) {
  validate_design_problem(prob);
  return prob.subsystem
             ? assemble_subsystem(prob.model, prob.criterion.rep,
                                  *prob.subsystem)
             : assemble_full(prob.model, prob.criterion.rep);
}

// Level and output polynomial of a solved assembly, the polynomial scaled to
// unit max-abs coefficient.  Throws DegeneratePolynomial when every
// coefficient is negligible against the level.
struct SupportPolynomial {
  double level = 0.0;
  Polynomial poly = Polynomial::zero();
};

inline SupportPolynomial extract_support_polynomial(const AssembledSdp& asdp,
                                                    const SdpSolution& sol) {
  const Eigen::VectorXd& xs =
      sol.x_vec.at(static_cast<std::size_t>(asdp.scal_block));
  if (xs.size() != 2 + asdp.degree)
    throw AssemblerError("solution does not match the assembly");
  SupportPolynomial out;
  out.level = xs(0);
  std::vector<double> coeffs(static_cast<std::size_t>(asdp.degree) + 1);
  double max_abs = 0.0;
  for (int k = 0; k <= asdp.degree; ++k) {
    coeffs[static_cast<std::size_t>(k)] = xs(1 + k);
    max_abs = std::max(max_abs, std::abs(xs(1 + k)));
  }
  if (max_abs < 1e-7 * (1.0 + std::abs(out.level)))
    throw DegeneratePolynomial(
        "output polynomial is numerically zero; rescale the basis and retry");
  for (double& c : coeffs) c /= max_abs;
  out.poly = Polynomial(std::move(coeffs));
  return out;
}

// A numerically-zero output polynomial signals that the constant function
// sits in the span of the weighted basis products; shrinking the non-constant
// basis functions breaks that alignment without moving the design.
inline bool has_constant_basis_element(const RegressionModel& model) {
  for (const RationalFunction& f : model.basis)
    if (!f.num.is_zero() && detail::proportional(f.num, f.den)) return true;
  return false;
}

inline RegressionModel rescale_basis(const RegressionModel& model,
                                     double lambda) {
  if (!(lambda > 0.0) || !(lambda < 1.0))
    throw AssemblerError("basis rescale factor must lie in (0, 1)");
  RegressionModel out = model;
  for (RationalFunction& f : out.basis) {
    if (!f.num.is_zero() && detail::proportional(f.num, f.den)) continue;
    f.num = f.num * lambda;
  }
  return out;
}

}  // namespace phiopt
