#include <catch2/catch_amalgamated.hpp>

#include "phiopt/rational.hpp"

using phiopt::DenominatorLcm;
using phiopt::Polynomial;
using phiopt::RationalFunction;

TEST_CASE("rational arithmetic never cancels") {
  const RationalFunction f(Polynomial({1.0}), Polynomial({1.0, 1.0}));  // 1/(1+t)
  const RationalFunction g(Polynomial({0.0, 1.0}), Polynomial({1.0, 1.0}));

  const RationalFunction sum = f + g;  // (1+t)*(1+t) over (1+t)^2
  CHECK(sum.den.degree() == 2);
  CHECK(sum(2.0) == Catch::Approx(1.0));

  const RationalFunction prod = f * g;
  CHECK(prod.den.degree() == 2);
  CHECK(prod(1.0) == Catch::Approx(0.25));

  const RationalFunction quot = f / g;
  CHECK(quot(2.0) == Catch::Approx(0.5));
  CHECK_THROWS_AS(f / RationalFunction::constant(0.0), phiopt::RationalError);
  CHECK_THROWS_AS(RationalFunction(Polynomial({1.0}), Polynomial::zero()),
                  phiopt::RationalError);
}

TEST_CASE("proportional denominators share one atom") {
  DenominatorLcm lcm;
  const Polynomial d1({1.0, 0.0, 1.0});   // 1 + t^2
  const Polynomial d2({2.0, 0.0, 2.0});   // 2(1 + t^2)
  const Polynomial d3({0.0, -1.0, 1.0});  // t^2 - t

  lcm.require(d1, 1);
  lcm.require(d2, 2);
  lcm.require(d3, 1);
  REQUIRE(lcm.atoms().size() == 2);
  CHECK(lcm.power_of(d1) == 2);
  CHECK(lcm.power_of(d2) == 2);
  CHECK(lcm.power_of(d3) == 1);
  CHECK(lcm.degree() == 6);
  CHECK(lcm.polynomial().degree() == 6);

  // Constant denominators never register.
  lcm.require(Polynomial::constant(3.0), 5);
  CHECK(lcm.atoms().size() == 2);
}

TEST_CASE("clear() multiplies the missing cofactor") {
  DenominatorLcm lcm;
  const Polynomial d1({1.0, 0.0, 1.0});  // 1 + t^2
  const Polynomial d2({4.0, 1.0});       // 4 + t
  lcm.require(d1, 2);
  lcm.require(d2, 1);

  // num / (d1 * const) times lcm = num * d1 * d2 / const.
  const Polynomial num({0.0, 1.0});
  const Polynomial two = Polynomial::constant(2.0);
  const Polynomial cleared = lcm.clear(num, {&d1, &two});
  const Polynomial expect = num * d1 * d2 * 0.5;
  REQUIRE(cleared.degree() == expect.degree());
  for (int k = 0; k <= expect.degree(); ++k)
    CHECK(cleared.coeff(k) == Catch::Approx(expect.coeff(k)));

  // A scaled copy of an atom clears against the same class.
  const Polynomial d1s = d1 * 3.0;
  const Polynomial c2 = lcm.clear(Polynomial::constant(1.0), {&d1s, &d1});
  CHECK(c2.degree() == d2.degree());
  CHECK(c2(1.0) == Catch::Approx(d2(1.0) / 3.0));

  CHECK_THROWS_AS(lcm.clear(num, {&d2, &d2}), phiopt::RationalError);
  const Polynomial unknown({1.0, 1.0});
  CHECK_THROWS_AS(lcm.clear(num, {&unknown}), phiopt::RationalError);
}
