#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "phiopt/recovery.hpp"

using phiopt::Criterion;
using phiopt::CriterionKind;
using phiopt::criterion_level;
using phiopt::criterion_value;
using phiopt::Design;
using phiopt::DesignSpace;
using phiopt::grid_oracle;
using phiopt::Polynomial;
using phiopt::RationalFunction;
using phiopt::recover_weights;
using phiopt::RecoveryError;
using phiopt::RegressionModel;
using phiopt::SolverSettings;

namespace {

RegressionModel quadratic_model() {
  RegressionModel m;
  m.space = DesignSpace::interval(-1.0, 1.0);
  m.basis = {RationalFunction::from_polynomial(Polynomial({1.0})),
             RationalFunction::from_polynomial(Polynomial({0.0, 1.0})),
             RationalFunction::from_polynomial(Polynomial({0.0, 0.0, 1.0}))};
  return m;
}

RegressionModel line_model() {
  RegressionModel m;
  m.space = DesignSpace::interval(-1.0, 1.0);
  m.basis = {RationalFunction::from_polynomial(Polynomial({1.0})),
             RationalFunction::from_polynomial(Polynomial({0.0, 1.0}))};
  return m;
}

RegressionModel radiation_model() {
  RegressionModel m;
  m.space = DesignSpace::interval(-1.0, 1.0);
  for (double x : {-2.0, 2.0, 4.0})
    m.basis.push_back(RationalFunction(
        Polynomial({1.0}), Polynomial({x * x, -2.0 * x, 1.0})));
  return m;
}

RegressionModel hetero_cubic_model() {
  RegressionModel m;
  m.space = DesignSpace::interval(-5.0, 5.0);
  m.basis = {RationalFunction::from_polynomial(Polynomial({1.0})),
             RationalFunction::from_polynomial(Polynomial({0.0, 1.0})),
             RationalFunction::from_polynomial(Polynomial({0.0, 0.0, 1.0})),
             RationalFunction::from_polynomial(Polynomial({0.0, 0.0, 0.0, 1.0}))};
  m.weight = RationalFunction(Polynomial({1.0}), Polynomial({1.0, 0.0, 1.0}));
  return m;
}

Eigen::MatrixXd mix(const RegressionModel& m, const std::vector<double>& pts,
                    const std::vector<double>& w) {
  return phiopt::fisher_matrix(m, pts, w);
}

}  // namespace

TEST_CASE("uniform weights maximize the determinant on the classical support") {
  const RegressionModel m = quadratic_model();
  const std::vector<double> support = {-1.0, 0.0, 1.0};

  // Independent reference: direct search over the weight simplex.
  double best = -1.0;
  double bw0 = 0.0, bw1 = 0.0;
  for (int i = 0; i <= 200; ++i)
    for (int j = 0; i + j <= 200; ++j) {
      const double w0 = i / 200.0, w1 = j / 200.0;
      const double det =
          mix(m, support, {w0, w1, 1.0 - w0 - w1}).determinant();
      if (det > best) {
        best = det;
        bw0 = w0;
        bw1 = w1;
      }
    }
  CHECK(std::abs(bw0 - 1.0 / 3.0) <= 0.006);
  CHECK(std::abs(bw1 - 1.0 / 3.0) <= 0.006);

  const Design d =
      recover_weights(m, support, Criterion::make(CriterionKind::D, 3).rep);
  REQUIRE(d.points.size() == 3);
  for (double w : d.weights) CHECK(w == Catch::Approx(1.0 / 3.0).margin(1e-4));
  CHECK(d.phi_value ==
        Catch::Approx(criterion_value(CriterionKind::D,
                                      mix(m, d.points, d.weights)))
            .epsilon(1e-7));
  CHECK(d.phi_value == Catch::Approx(std::cbrt(best)).margin(1e-4));
}

TEST_CASE("two-point smallest-eigenvalue recovery is the balanced design") {
  const RegressionModel m = line_model();
  const std::vector<double> support = {-1.0, 1.0};

  // Reference by scan: min eigenvalue of the mixture is 1 - |1 - 2w|.
  double best = -1.0, bw = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double w = i / 1000.0;
    const double lam = criterion_value(CriterionKind::E, mix(m, support, {w, 1.0 - w}));
    if (lam > best) {
      best = lam;
      bw = w;
    }
  }
  CHECK(bw == Catch::Approx(0.5).margin(1e-3));
  CHECK(best == Catch::Approx(1.0).margin(1e-6));

  const Design d =
      recover_weights(m, support, Criterion::make(CriterionKind::E, 2).rep);
  REQUIRE(d.points.size() == 2);
  CHECK(d.weights[0] == Catch::Approx(0.5).margin(1e-6));
  CHECK(d.weights[1] == Catch::Approx(0.5).margin(1e-6));
  CHECK(d.phi_value == Catch::Approx(1.0).margin(1e-7));
}

TEST_CASE("published three-point support carries strictly positive mass") {
  const RegressionModel m = radiation_model();
  const Design d = recover_weights(m, {-1.0, 0.231, 1.0},
                                   Criterion::make(CriterionKind::E, 3).rep);
  REQUIRE(d.points.size() == 3);
  for (double w : d.weights) CHECK(w > 1e-3);
  CHECK(d.phi_value > 0.0);
}

TEST_CASE("spurious candidates are pruned and the value is stable") {
  const RegressionModel m = quadratic_model();
  const auto rep = Criterion::make(CriterionKind::E, 3).rep;
  const Design d = recover_weights(m, {-1.0, -0.5, 0.0, 1.0}, rep);

  REQUIRE(d.points.size() == 3);
  CHECK(d.points[0] == Catch::Approx(-1.0));
  CHECK(d.points[1] == Catch::Approx(0.0));
  CHECK(d.points[2] == Catch::Approx(1.0));
  CHECK(d.weights[0] == Catch::Approx(0.2).margin(1e-5));
  CHECK(d.weights[1] == Catch::Approx(0.6).margin(1e-5));
  CHECK(d.weights[2] == Catch::Approx(0.2).margin(1e-5));

  // Re-solving on the pruned support does not move the optimum.
  const Design d2 = recover_weights(m, d.points, rep);
  CHECK(std::abs(d2.phi_value - d.phi_value) <= 1e-8 * (1.0 + std::abs(d.phi_value)));

  // The mixture information matrix stays PSD.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      mix(m, d.points, d.weights), Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-9);
}

TEST_CASE("recovered level matches direct criterion evaluation") {
  const RegressionModel m = quadratic_model();
  for (CriterionKind kind :
       {CriterionKind::E, CriterionKind::A, CriterionKind::D}) {
    const Design d =
        recover_weights(m, {-1.0, 0.0, 1.0}, Criterion::make(kind, 3).rep);
    const double direct = criterion_value(kind, mix(m, d.points, d.weights));
    CHECK(std::abs(d.phi_value - direct) <= 1e-7 * (1.0 + std::abs(direct)));
  }
}

TEST_CASE("criterion level of a fixed matrix matches eigenvalue formulas") {
  Eigen::MatrixXd m(3, 3);
  m << 2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 0.9;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);

  const double e = criterion_level(phiopt::represent_e(3), m);
  CHECK(e == Catch::Approx(es.eigenvalues().minCoeff()).margin(1e-7));

  const double a = criterion_level(phiopt::represent_a(3), m);
  CHECK(a == Catch::Approx(-m.inverse().trace()).margin(1e-7));

  const double d = criterion_level(phiopt::represent_d(3), m);
  CHECK(d == Catch::Approx(std::cbrt(m.determinant())).margin(1e-7));

  // Singular matrix under the inverse-type criterion admits no level.
  Eigen::MatrixXd sing = Eigen::MatrixXd::Zero(3, 3);
  sing(0, 0) = 1.0;
  sing(1, 1) = 1.0;
  bool no_level = false;
  try {
    const double v = criterion_level(phiopt::represent_a(3), sing);
    no_level = std::isinf(v) && v < 0.0;
  } catch (const RecoveryError&) {
    no_level = true;
  }
  CHECK(no_level);
}

TEST_CASE("input validation of supports and designs") {
  const RegressionModel m = quadratic_model();
  const auto rep = Criterion::make(CriterionKind::E, 3).rep;
  CHECK_THROWS_AS(recover_weights(m, {}, rep), RecoveryError);
  CHECK_THROWS_AS(recover_weights(m, {0.0, 2.0}, rep), RecoveryError);
  CHECK_THROWS_AS(recover_weights(m, {0.0}, phiopt::represent_e(2)),
                  RecoveryError);
  CHECK_THROWS_AS(grid_oracle(m, rep, 1), RecoveryError);

  Design d;
  d.points = {0.0, 1.0};
  d.weights = {0.5, 0.5};
  CHECK_NOTHROW(phiopt::validate_design(d));
  d.weights = {0.7, 0.4};
  CHECK_THROWS_AS(phiopt::validate_design(d), RecoveryError);
  d.weights = {-0.1, 1.1};
  CHECK_THROWS_AS(phiopt::validate_design(d), RecoveryError);
  d.points = {1.0, 0.0};
  d.weights = {0.5, 0.5};
  CHECK_THROWS_AS(phiopt::validate_design(d), RecoveryError);
  d.points = {1.0, 1.0};
  CHECK_THROWS_AS(phiopt::validate_design(d), RecoveryError);
}

TEST_CASE("grid reference reproduces the classical determinant design") {
  const RegressionModel m = quadratic_model();
  const Design d = grid_oracle(m, Criterion::make(CriterionKind::D, 3).rep, 201);
  const auto clusters = phiopt::cluster_support(d, 0.025);
  REQUIRE(clusters.size() == 3);
  const double targets[3] = {-1.0, 0.0, 1.0};
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(clusters[static_cast<std::size_t>(i)].center - targets[i]) <=
          0.01);
    CHECK(clusters[static_cast<std::size_t>(i)].mass ==
          Catch::Approx(1.0 / 3.0).margin(1e-3));
  }
}

TEST_CASE("grid reference localizes the published support") {
  const RegressionModel m = radiation_model();
  const Design d = grid_oracle(m, Criterion::make(CriterionKind::E, 3).rep, 201);
  const auto clusters = phiopt::cluster_support(d, 0.025);
  REQUIRE(clusters.size() == 3);
  const double targets[3] = {-1.0, 0.231, 1.0};
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(clusters[static_cast<std::size_t>(i)].center - targets[i]) <=
          0.01);
    CHECK(clusters[static_cast<std::size_t>(i)].mass > 0.01);
  }
}

TEST_CASE("verification accepts the solved design and flags defects") {
  const RegressionModel m = quadratic_model();
  const auto rep = Criterion::make(CriterionKind::E, 3).rep;

  // Solve the continuous problem for the certificate polynomial and level.
  const phiopt::AssembledSdp asdp = phiopt::assemble_full(m, rep);
  SolverSettings st;
  st.tolerance = 1e-9;
  const phiopt::SdpSolution sol = phiopt::solve_sdp(asdp.problem, st);
  REQUIRE((sol.status == phiopt::SolveStatus::Optimal ||
           (sol.primal_residual <= 1e-7 && sol.dual_residual <= 1e-7 &&
            sol.relative_gap <= 1e-7)));
  const phiopt::SupportPolynomial sp =
      phiopt::extract_support_polynomial(asdp, sol);

  const Design d = recover_weights(m, {-1.0, 0.0, 1.0}, rep);
  const phiopt::VerificationReport ok =
      phiopt::verify_design(m, d, rep, sp.poly, sp.level);
  CHECK(ok.support_on_roots);
  CHECK(ok.poly_nonnegative);
  CHECK(ok.value_matches);
  CHECK(ok.bound_satisfied);
  CHECK(ok.all_passed());
  CHECK(ok.support_bound == 3);

  // Shifting one support point off the root set trips the root check.
  Design shifted = d;
  shifted.points[1] = 0.05;
  const phiopt::VerificationReport bad =
      phiopt::verify_design(m, shifted, rep, sp.poly, sp.level);
  CHECK_FALSE(bad.support_on_roots);

  // A four-point design exceeds the support bound.
  Design wide;
  wide.points = {-1.0, -0.3, 0.4, 1.0};
  wide.weights = {0.25, 0.25, 0.25, 0.25};
  const phiopt::VerificationReport over =
      phiopt::verify_design(m, wide, rep, sp.poly, sp.level);
  CHECK_FALSE(over.bound_satisfied);
}

TEST_CASE("verification flags a suboptimal design for the weighted cubic") {
  const RegressionModel m = hetero_cubic_model();
  const auto rep = Criterion::make(CriterionKind::A, 4).rep;

  const phiopt::AssembledSdp asdp = phiopt::assemble_full(m, rep);
  SolverSettings st;
  st.tolerance = 1e-9;
  const phiopt::SdpSolution sol = phiopt::solve_sdp(asdp.problem, st);
  REQUIRE((sol.status == phiopt::SolveStatus::Optimal ||
           (sol.primal_residual <= 1e-7 && sol.dual_residual <= 1e-7 &&
            sol.relative_gap <= 1e-7)));
  const phiopt::SupportPolynomial sp =
      phiopt::extract_support_polynomial(asdp, sol);

  Design uniform;
  uniform.points = {-4.0, 0.5, 3.0};
  uniform.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  const phiopt::VerificationReport rpt =
      phiopt::verify_design(m, uniform, rep, sp.poly, sp.level);
  CHECK_FALSE(rpt.value_matches);
}
