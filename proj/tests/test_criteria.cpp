#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "phiopt/criteria.hpp"

using phiopt::admissibility_probe;
using phiopt::Criterion;
using phiopt::CriterionKind;
using phiopt::criterion_value;
using phiopt::CriterionRepresentation;
using phiopt::DesignSpace;
using phiopt::max_feasible_level;
using phiopt::Polynomial;
using phiopt::RationalFunction;
using phiopt::RegressionModel;
using phiopt::represent_a;
using phiopt::represent_d;
using phiopt::represent_e;
using phiopt::sym_index;

namespace {

Eigen::MatrixXd random_pd(std::mt19937& rng, int m) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd f(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) f(r, c) = g(rng);
  return f * f.transpose() + 0.2 * Eigen::MatrixXd::Identity(m, m);
}

double min_eig(const Eigen::MatrixXd& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Closed-form auxiliary witness certifying feasibility at levels below the
// criterion value: diagonal of the inverse for the trace criterion, a scaled
// Cholesky factor plus exact geometric-mean tower values for the determinant
// criterion.
Eigen::VectorXd analytic_witness(CriterionKind kind,
                                 const CriterionRepresentation& rep,
                                 const Eigen::MatrixXd& x) {
  const int m = static_cast<int>(x.rows());
  Eigen::VectorXd u = Eigen::VectorXd::Zero(rep.aux_dim);
  if (kind == CriterionKind::A) {
    const Eigen::MatrixXd inv = x.inverse();
    for (int k = 0; k < m; ++k) u[k] = inv(k, k);
    return u;
  }
  if (kind != CriterionKind::D) return u;
  const Eigen::MatrixXd r = Eigen::LLT<Eigen::MatrixXd>(x).matrixL();
  const Eigen::MatrixXd l = r * r.diagonal().asDiagonal();
  for (int i = 0; i < m; ++i)
    for (int c = 0; c <= i; ++c) u[sym_index(m, c, i)] = l(i, c);
  int tree = 1;
  while (tree < m) tree *= 2;
  if (tree == 1) return u;
  const double s = criterion_value(CriterionKind::D, x);
  std::vector<double> level(static_cast<std::size_t>(tree), s);
  for (int j = 0; j < m; ++j)
    level[static_cast<std::size_t>(j)] = l(j, j);
  int node = m * (m + 1) / 2;
  while (level.size() > 1) {
    std::vector<double> parents;
    for (std::size_t j = 0; j + 1 < level.size(); j += 2) {
      const double v = std::sqrt(level[j] * level[j + 1]);
      u[node++] = v;
      parents.push_back(v);
    }
    level = std::move(parents);
  }
  return u;
}

RegressionModel monomial_model(int m, double lo, double hi) {
  RegressionModel model;
  model.space = DesignSpace::interval(lo, hi);
  for (int k = 0; k < m; ++k) {
    std::vector<double> coeffs(static_cast<std::size_t>(k + 1), 0.0);
    coeffs.back() = 1.0;
    model.basis.push_back(RationalFunction::from_polynomial(Polynomial(coeffs)));
  }
  return model;
}

}  // namespace

TEST_CASE("representation shapes follow the constructions") {
  for (int m = 1; m <= 8; ++m) {
    const CriterionRepresentation e = represent_e(m);
    CHECK(e.blocks.size() == 1);
    CHECK(e.blocks[0].size == m);
    CHECK(e.aux_dim == 0);
    CHECK_NOTHROW(e.validate());

    const CriterionRepresentation a = represent_a(m);
    CHECK(a.blocks.size() == static_cast<std::size_t>(m + 1));
    CHECK(a.aux_dim == m);
    for (int k = 0; k < m; ++k) CHECK(a.blocks[static_cast<std::size_t>(k)].size == m + 1);
    CHECK(a.blocks.back().size == 1);
    CHECK_NOTHROW(a.validate());

    const CriterionRepresentation d = represent_d(m);
    int tree = 1;
    while (tree < m) tree *= 2;
    CHECK(d.aux_dim == m * (m + 1) / 2 + std::max(0, tree - 1));
    CHECK(d.blocks.size() == static_cast<std::size_t>(m == 1 ? 2 : tree + 1));
    CHECK(d.blocks.front().size == 2 * m);
    CHECK(d.blocks.back().size == 1);
    CHECK_NOTHROW(d.validate());
  }
}

TEST_CASE("malformed custom representations are rejected") {
  CriterionRepresentation rep = represent_a(3);
  SECTION("accepts a well-formed representation") {
    CHECK_NOTHROW(Criterion::custom(rep));
  }
  SECTION("wrong matrix-coefficient count") {
    rep.blocks[0].a.pop_back();
    CHECK_THROWS_AS(Criterion::custom(rep), phiopt::CriterionError);
  }
  SECTION("wrong auxiliary count") {
    rep.blocks[1].c.pop_back();
    CHECK_THROWS_AS(Criterion::custom(rep), phiopt::CriterionError);
  }
  SECTION("level coefficient of the wrong size") {
    rep.blocks[2].b = Eigen::MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(Criterion::custom(rep), phiopt::CriterionError);
  }
  SECTION("no blocks") {
    rep.blocks.clear();
    CHECK_THROWS_AS(Criterion::custom(rep), phiopt::CriterionError);
  }
  SECTION("built-in factory refuses the custom tag") {
    CHECK_THROWS_AS(Criterion::make(CriterionKind::Custom, 3),
                    phiopt::CriterionError);
  }
}

TEST_CASE("direct criterion values match hand computations") {
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(2, 2);

  d2.diagonal() << 3.0, 7.0;
  CHECK(criterion_value(CriterionKind::E, d2) == Catch::Approx(3.0));
  CHECK(criterion_value(CriterionKind::E, Eigen::MatrixXd::Identity(2, 2)) ==
        Catch::Approx(1.0));

  Eigen::MatrixXd one(1, 1);
  one << 4.0;
  CHECK(criterion_value(CriterionKind::A, one) == Catch::Approx(-0.25));
  CHECK(criterion_value(CriterionKind::D, one) == Catch::Approx(4.0));

  d2.diagonal() << 1.0, 2.0;
  CHECK(criterion_value(CriterionKind::A, d2) == Catch::Approx(-1.5));
  d2.diagonal() << 4.0, 1.0;
  CHECK(criterion_value(CriterionKind::D, d2) == Catch::Approx(2.0));

  Eigen::MatrixXd d3 = Eigen::MatrixXd::Zero(3, 3);
  d3.diagonal() << 2.0, 4.0, 8.0;
  CHECK(criterion_value(CriterionKind::D, d3) == Catch::Approx(4.0));

  d2.diagonal() << 1.0, 0.0;
  CHECK(criterion_value(CriterionKind::A, d2) ==
        -std::numeric_limits<double>::infinity());
  CHECK(criterion_value(CriterionKind::D, d2) == 0.0);
  CHECK(criterion_value(CriterionKind::E, d2) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("analytic witnesses certify levels below the criterion value") {
  std::mt19937 rng(4242);
  const CriterionKind kinds[] = {CriterionKind::E, CriterionKind::A,
                                 CriterionKind::D};
  for (CriterionKind kind : kinds) {
    for (int trial = 0; trial < 25; ++trial) {
      const int m = 1 + trial % 6;
      const Eigen::MatrixXd x = random_pd(rng, m);
      const CriterionRepresentation rep =
          Criterion::make(kind, m).rep;
      const double phi = criterion_value(kind, x);
      const double z = phi - 1e-8 * (1.0 + std::abs(phi));
      const Eigen::VectorXd u = analytic_witness(kind, rep, x);
      for (std::size_t i = 0; i < rep.blocks.size(); ++i) {
        const Eigen::MatrixXd v =
            rep.block_value(static_cast<int>(i), x, z, u);
        CHECK(min_eig(v) >= -1e-9 * (1.0 + x.norm()));
      }
    }
  }
}

TEST_CASE("smallest-eigenvalue level matches the eigenvalue oracle") {
  std::mt19937 rng(909);
  phiopt::SolverSettings settings;
  settings.tolerance = 1e-9;
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + trial % 5;
    const Eigen::MatrixXd x = random_pd(rng, m);
    const auto z = max_feasible_level(represent_e(m), x, settings);
    REQUIRE(z.has_value());
    CHECK(std::abs(*z - min_eig(x)) <= 1e-8 * (1.0 + x.norm()));
  }
}

TEST_CASE("representation levels match direct criterion values") {
  std::mt19937 rng(31337);
  const CriterionKind kinds[] = {CriterionKind::E, CriterionKind::A,
                                 CriterionKind::D};
  for (CriterionKind kind : kinds) {
    for (int trial = 0; trial < 50; ++trial) {
      const int m = 1 + trial % 6;
      const Eigen::MatrixXd x = random_pd(rng, m);
      const double phi = criterion_value(kind, x);
      const auto z = max_feasible_level(Criterion::make(kind, m).rep, x);
      REQUIRE(z.has_value());
      CHECK(std::abs(*z - phi) <= 1e-6 * (1.0 + std::abs(phi)));
    }
  }
}

TEST_CASE("levels are monotone in the semidefinite order") {
  std::mt19937 rng(2718);
  std::normal_distribution<double> g(0.0, 1.0);
  const CriterionKind kinds[] = {CriterionKind::E, CriterionKind::A,
                                 CriterionKind::D};
  for (CriterionKind kind : kinds) {
    for (int trial = 0; trial < 5; ++trial) {
      const int m = 2 + trial % 4;
      const Eigen::MatrixXd y = random_pd(rng, m);
      Eigen::MatrixXd gap(m, m);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) gap(r, c) = g(rng);
      const Eigen::MatrixXd x = y + gap * gap.transpose();
      const CriterionRepresentation rep = Criterion::make(kind, m).rep;
      const auto zx = max_feasible_level(rep, x);
      const auto zy = max_feasible_level(rep, y);
      REQUIRE(zx.has_value());
      REQUIRE(zy.has_value());
      CHECK(*zx >= *zy - 1e-8);
    }
  }
}

TEST_CASE("custom representation of a shifted eigenvalue criterion") {
  // Phi(X) = lambda_min(X) - 1/2, encoded by X - (z + 1/2) I psd.
  const int m = 3;
  CriterionRepresentation rep = represent_e(m);
  rep.blocks[0].d = -0.5 * Eigen::MatrixXd::Identity(m, m);
  const Criterion crit = Criterion::custom(rep);
  CHECK(crit.kind == CriterionKind::Custom);
  std::mt19937 rng(1618);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = random_pd(rng, m);
    const auto z = max_feasible_level(crit.rep, x);
    REQUIRE(z.has_value());
    const double phi = min_eig(x) - 0.5;
    CHECK(std::abs(*z - phi) <= 1e-6 * (1.0 + std::abs(phi)));
  }
}

TEST_CASE("levels reject mismatched matrix sizes") {
  CHECK_THROWS_AS(
      max_feasible_level(represent_e(3), Eigen::MatrixXd::Identity(2, 2)),
      phiopt::CriterionError);
}

TEST_CASE("trace criterion level is empty on singular matrices") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 2);
  x(0, 0) = 1.0;
  const auto z = max_feasible_level(represent_a(2), x);
  CHECK_FALSE(z.has_value());
}

TEST_CASE("admissibility probe separates usable and degenerate models") {
  SECTION("smallest-eigenvalue criterion passes on a healthy model") {
    const RegressionModel model = monomial_model(3, -1.0, 1.0);
    const auto report = admissibility_probe(represent_e(3), model);
    CHECK(report.admissible);
    CHECK(report.margin > 0.0);
    CHECK(report.probe.rows() == 3);
    CHECK(min_eig(report.probe) > 0.0);
  }
  SECTION("trace criterion passes on a healthy model") {
    const RegressionModel model = monomial_model(2, 0.0, 1.0);
    const auto report = admissibility_probe(represent_a(2), model);
    CHECK(report.admissible);
  }
  SECTION("determinant criterion passes on a healthy model") {
    const RegressionModel model = monomial_model(2, 0.0, 1.0);
    const auto report = admissibility_probe(represent_d(2), model);
    CHECK(report.admissible);
  }
  SECTION("trace criterion fails when the probe matrix is singular") {
    RegressionModel model;
    model.space = DesignSpace::interval(0.0, 1.0);
    model.basis = {RationalFunction::from_polynomial(Polynomial({0.0, 1.0})),
                   RationalFunction::from_polynomial(Polynomial({0.0, 2.0}))};
    const auto report = admissibility_probe(represent_a(2), model);
    CHECK_FALSE(report.admissible);
    CHECK_FALSE(report.message.empty());
  }
  SECTION("dimension mismatch throws") {
    const RegressionModel model = monomial_model(2, 0.0, 1.0);
    CHECK_THROWS_AS(admissibility_probe(represent_e(3), model),
                    phiopt::CriterionError);
  }
}
