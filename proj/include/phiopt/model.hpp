#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phiopt/design_space.hpp"
#include "phiopt/expr.hpp"
#include "phiopt/rational.hpp"
#include "phiopt/roots.hpp"

namespace phiopt {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear regression model on a compact design space: response
// y = sum_i theta_i f_i(t) + noise, observation precision omega(t) > 0.
// Basis and precision are rational functions whose denominators have no real
// zeros on the space.
struct RegressionModel {
  std::vector<RationalFunction> basis;
  RationalFunction weight = RationalFunction::constant(1.0);
  DesignSpace space = DesignSpace::interval(-1.0, 1.0);

  int dimension() const { return static_cast<int>(basis.size()); }

  Eigen::VectorXd eval_basis(double t) const {
    Eigen::VectorXd f(dimension());
    for (int i = 0; i < dimension(); ++i) f[i] = basis[static_cast<std::size_t>(i)](t);
    return f;
  }
};

// Elementary information matrix of a one-point design at t.
inline Eigen::MatrixXd fisher_single_point(const RegressionModel& model,
                                           double t) {
  const Eigen::VectorXd f = model.eval_basis(t);
  return model.weight(t) * f * f.transpose();
}

inline Eigen::MatrixXd fisher_matrix(const RegressionModel& model,
                                     const std::vector<double>& points,
                                     const std::vector<double>& weights) {
  if (points.size() != weights.size())
    throw ModelError("points and weights must have equal length");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(model.dimension(), model.dimension());
  for (std::size_t j = 0; j < points.size(); ++j)
    m += weights[j] * fisher_single_point(model, points[j]);
  return m;
}

namespace detail {

inline void require_root_free(const Polynomial& den, const DesignSpace& space,
                              const std::string& what) {
  if (den.degree() == 0) {
    if (den.coeffs()[0] == 0.0) throw ModelError(what + " has zero denominator");
    return;
  }
  // Zeros close to the space are as fatal as zeros on it: moments blow up.
  if (!real_roots_in(den, space, 1e-9).empty())
    throw ModelError(what + " has a denominator zero on the design space");
}

}  // namespace detail

// Structural validation: nonempty basis, denominators root-free on the
// space, strictly positive precision, finite values, and linearly
// independent basis functions (checked by the singular values of an
// evaluation matrix on a dense grid).
inline void validate_model(const RegressionModel& model) {
  const int m = model.dimension();
  if (m == 0) throw ModelError("model needs at least one basis function");

  for (int i = 0; i < m; ++i)
    detail::require_root_free(model.basis[static_cast<std::size_t>(i)].den,
                              model.space,
                              "basis function " + std::to_string(i + 1));
  detail::require_root_free(model.weight.den, model.space, "precision weight");
  if (model.weight.num.is_zero())
    throw ModelError("precision weight is identically zero");

  const std::vector<double> grid = model.space.grid(257);
  for (double t : grid) {
    const double w = model.weight(t);
    if (!std::isfinite(w) || w <= 0.0)
      throw ModelError("precision weight is not strictly positive at t = " +
                       std::to_string(t));
    for (int i = 0; i < m; ++i)
      if (!std::isfinite(model.basis[static_cast<std::size_t>(i)](t)))
        throw ModelError("basis function " + std::to_string(i + 1) +
                         " is not finite at t = " + std::to_string(t));
  }

  const std::vector<double> dense = model.space.grid(std::max(8 * m, 32));
  Eigen::MatrixXd e(static_cast<Eigen::Index>(dense.size()), m);
  for (std::size_t r = 0; r < dense.size(); ++r)
    e.row(static_cast<Eigen::Index>(r)) = model.eval_basis(dense[r]).transpose();
  if (static_cast<int>(dense.size()) < m)
    throw ModelError("design space too small for the basis dimension");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const double smin = svd.singularValues().tail(1)[0];
  const double smax = svd.singularValues()[0];
  if (smax == 0.0 || smin <= 1e-10 * smax)
    throw ModelError("basis functions are linearly dependent on the design space");
}

// Mean response h(t, theta) for a model that is nonlinear in theta; the
// design problem is posed for the linearization at a prior guess.
struct NonlinearModel {
  Expr mean;
  Expr weight = Expr::constant(1.0);
  int param_count = 0;
  DesignSpace space = DesignSpace::interval(-1.0, 1.0);
};

// Local design approximation: basis_j = d mean / d theta_j evaluated at
// theta_star, precision evaluated at theta_star.
inline RegressionModel linearize(const NonlinearModel& nl,
                                 const std::vector<double>& theta_star) {
  if (static_cast<int>(theta_star.size()) != nl.param_count)
    throw ModelError("theta_star length does not match the parameter count");
  RegressionModel out;
  out.space = nl.space;
  out.weight = to_rational(nl.weight, theta_star);
  out.basis.reserve(static_cast<std::size_t>(nl.param_count));
  for (int j = 0; j < nl.param_count; ++j)
    out.basis.push_back(to_rational(diff_param(nl.mean, j), theta_star));
  validate_model(out);
  return out;
}

}  // namespace phiopt
