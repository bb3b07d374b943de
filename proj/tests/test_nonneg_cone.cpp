#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "phiopt/design_space.hpp"
#include "phiopt/nonneg_cone.hpp"
#include "phiopt/polynomial.hpp"

using namespace phiopt;

namespace {

Polynomial random_poly(std::mt19937& rng, int degree) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> c(static_cast<std::size_t>(degree) + 1);
  for (double& v : c) v = gauss(rng);
  return Polynomial(std::move(c), PolyBasis::Monomial);
}

double grid_min(const Polynomial& p, double lo, double hi, int n) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double t = lo + (hi - lo) * i / (n - 1);
    best = std::min(best, p(t));
  }
  return best;
}

}  // namespace

TEST_CASE("interval representation block sizes") {
  for (int d = 0; d <= 20; ++d) {
    const ConeRepresentation rep = represent_interval(d, -1.0, 1.0);
    REQUIRE(rep.degree == d);
    REQUIRE(rep.cx.size() == static_cast<std::size_t>(d) + 1);
    REQUIRE(rep.cy.size() == static_cast<std::size_t>(d) + 1);
    if (d % 2 == 0) {
      REQUIRE(rep.dim_x == d / 2 + 1);
      REQUIRE(rep.dim_y == d / 2);
    } else {
      REQUIRE(rep.dim_x == (d - 1) / 2 + 1);
      REQUIRE(rep.dim_y == (d - 1) / 2 + 1);
    }
  }
  REQUIRE_THROWS_AS(represent_interval(2, 1.0, 1.0), ConeError);
  REQUIRE_THROWS_AS(represent_interval(-1, 0.0, 1.0), ConeError);
}

TEST_CASE("hand-checked coefficient maps") {
  SECTION("even degree on [-1, 1]") {
    const ConeRepresentation rep = represent_interval(2, -1.0, 1.0);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd y(1, 1);
    y << 1.0;
    const Polynomial p = cone_polynomial(rep, x, y);
    REQUIRE(p.coeff(0) == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(p.coeff(1) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(p.coeff(2) == Catch::Approx(-1.0).margin(1e-15));
  }
  SECTION("perfect square is interval independent") {
    const ConeRepresentation rep = represent_interval(2, 0.3, 2.7);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 2);
    x(1, 1) = 1.0;
    const Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 1);
    const Polynomial p = cone_polynomial(rep, x, y);
    REQUIRE(p.degree() == 2);
    REQUIRE(p.coeff(0) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(p.coeff(1) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(p.coeff(2) == Catch::Approx(1.0).margin(1e-15));
  }
  SECTION("odd degree on [0, 1]") {
    const ConeRepresentation rep = represent_interval(1, 0.0, 1.0);
    Eigen::MatrixXd x(1, 1), y(1, 1);
    x << 1.0;
    y << 0.0;
    const Polynomial p = cone_polynomial(rep, x, y);
    REQUIRE(p.degree() == 1);
    REQUIRE(p.coeff(0) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(p.coeff(1) == Catch::Approx(1.0).margin(1e-15));
  }
}

TEST_CASE("random gram blocks generate nonnegative polynomials") {
  std::mt19937 rng(20240311);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 12);
    double a = unif(rng), b = unif(rng);
    if (a > b) std::swap(a, b);
    if (b - a < 0.1) b = a + 0.1;
    const ConeRepresentation rep = represent_interval(d, a, b);
    Eigen::MatrixXd fx(rep.dim_x, rep.dim_x);
    for (int i = 0; i < fx.size(); ++i) fx(i) = gauss(rng);
    const Eigen::MatrixXd x = fx * fx.transpose();
    Eigen::MatrixXd y(rep.dim_y, rep.dim_y);
    if (rep.dim_y > 0) {
      Eigen::MatrixXd fy(rep.dim_y, rep.dim_y);
      for (int i = 0; i < fy.size(); ++i) fy(i) = gauss(rng);
      y = fy * fy.transpose();
    }
    const Polynomial p = cone_polynomial(rep, x, y);
    const double floor = -1e-9 * std::max(1.0, p.max_abs_coeff());
    REQUIRE(grid_min(p, a, b, 2001) >= floor);
  }
}

TEST_CASE("weighted square forms are certified") {
  std::mt19937 rng(555);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  const DesignSpace space = DesignSpace::interval(-1.0, 1.0);
  int certified = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 6);
    const Polynomial r = random_poly(rng, k);
    const Polynomial q = random_poly(rng, k - 1);
    const Polynomial weight({1.0, 0.0, -1.0}, PolyBasis::Monomial);
    const Polynomial p = r * r + weight * (q * q);
    const CertifyResult res = certify_nonneg(p, space);
    if (res.status == CertifyStatus::Certified) ++certified;
    REQUIRE(res.status == CertifyStatus::Certified);
    REQUIRE(res.certificates.size() == 1);
    const IntervalCertificate& cert = res.certificates.front();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(cert.x);
    REQUIRE(ex.eigenvalues().minCoeff() >= -1e-7);
    const Polynomial recon = cone_polynomial(cert.rep, cert.x, cert.y);
    const double tol = 1e-6 * (1.0 + p.max_abs_coeff());
    for (int j = 0; j <= p.degree(); ++j) {
      REQUIRE(recon.coeff(j) == Catch::Approx(p.coeff(j)).margin(tol));
    }
  }
  REQUIRE(certified == 100);
}

TEST_CASE("odd degree split forms are certified") {
  std::mt19937 rng(808);
  const DesignSpace space = DesignSpace::interval(0.5, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 5);
    const Polynomial r = random_poly(rng, k);
    const Polynomial s = random_poly(rng, k);
    const Polynomial t_minus_a({-0.5, 1.0}, PolyBasis::Monomial);
    const Polynomial b_minus_t({2.0, -1.0}, PolyBasis::Monomial);
    const Polynomial p = t_minus_a * (r * r) + b_minus_t * (s * s);
    const CertifyResult res = certify_nonneg(p, space);
    REQUIRE(res.status == CertifyStatus::Certified);
  }
}

TEST_CASE("certificates on unions require every component") {
  const DesignSpace space({Interval{-1.0, 0.0}, Interval{0.5, 1.0}});
  SECTION("globally matched square certifies on both pieces") {
    const Polynomial p({0.0, 0.0, 1.0}, PolyBasis::Monomial);
    const CertifyResult res = certify_nonneg(p, space);
    REQUIRE(res.status == CertifyStatus::Certified);
    REQUIRE(res.certificates.size() == 2);
  }
  SECTION("sign change on one component refutes") {
    const Polynomial shifted({0.2, 1.0}, PolyBasis::Monomial);
    const Polynomial drop({-0.2, 1.0}, PolyBasis::Monomial);
    const Polynomial p = shifted * shifted * drop;
    const CertifyResult res = certify_nonneg(p, space);
    REQUIRE(res.status == CertifyStatus::Refuted);
    REQUIRE(res.witness <= 0.0);
    REQUIRE(res.witness_value < -1e-8);
    REQUIRE(p(res.witness) == res.witness_value);
  }
}

TEST_CASE("singleton components become point constraints") {
  const DesignSpace space({Interval{0.3, 0.3}, Interval{1.0, 2.0}});
  const SpaceConeSet set = represent_space(4, space);
  REQUIRE(set.degree == 4);
  REQUIRE(set.intervals.size() == 1);
  REQUIRE(set.singletons == std::vector<double>{0.3});

  const Polynomial fine({2.25, -3.0, 1.0}, PolyBasis::Monomial);
  REQUIRE(certify_nonneg(fine, space).status == CertifyStatus::Certified);

  const Polynomial bad({-1.0, 1.0}, PolyBasis::Monomial);
  const CertifyResult res = certify_nonneg(bad, space);
  REQUIRE(res.status == CertifyStatus::Refuted);
  REQUIRE(res.witness == Catch::Approx(0.3).margin(1e-12));
}

TEST_CASE("boundary touching polynomials still certify") {
  const DesignSpace space = DesignSpace::interval(-1.0, 1.0);
  const Polynomial p({1.0, 0.0, -1.0}, PolyBasis::Monomial);
  const CertifyResult res = certify_nonneg(p, space);
  REQUIRE(res.status == CertifyStatus::Certified);
  const IntervalCertificate& cert = res.certificates.front();
  // The decomposition of 1 - t^2 on [-1, 1] is unique: X = 0, Y = [1].
  REQUIRE(cert.x.cwiseAbs().maxCoeff() <= 1e-4);
  REQUIRE(cert.y(0, 0) == Catch::Approx(1.0).margin(1e-4));
}

TEST_CASE("linear polynomial on symmetric interval is refuted at the edge") {
  const DesignSpace space = DesignSpace::interval(-1.0, 1.0);
  const Polynomial p({0.0, 1.0}, PolyBasis::Monomial);
  const CertifyResult res = certify_nonneg(p, space);
  REQUIRE(res.status == CertifyStatus::Refuted);
  REQUIRE(res.witness == Catch::Approx(-1.0).margin(1e-9));
  REQUIRE(res.witness_value == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("zero polynomial certifies everywhere") {
  const DesignSpace space = DesignSpace::interval(-2.0, 3.0);
  const CertifyResult res = certify_nonneg(Polynomial::zero(), space);
  REQUIRE(res.status == CertifyStatus::Certified);
}

TEST_CASE("legendre basis input is rejected") {
  const DesignSpace space = DesignSpace::interval(-1.0, 1.0);
  const Polynomial p({1.0, 0.0}, PolyBasis::Legendre);
  REQUIRE_THROWS_AS(certify_nonneg(p, space), ConeError);
}
