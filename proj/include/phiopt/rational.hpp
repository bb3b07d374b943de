#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "phiopt/polynomial.hpp"

namespace phiopt {

struct RationalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Quotient of two monomial-basis polynomials.  No cancellation is ever
// attempted; callers that need a common denominator multiply numerators up
// instead of dividing coefficients.
struct RationalFunction {
  Polynomial num;
  Polynomial den;

  RationalFunction() : num(Polynomial::zero()), den(Polynomial::constant(1.0)) {}

  RationalFunction(Polynomial n, Polynomial d)
      : num(std::move(n)), den(std::move(d)) {
    if (num.basis() != PolyBasis::Monomial || den.basis() != PolyBasis::Monomial)
      throw RationalError("rational functions use the monomial basis");
    if (den.is_zero()) throw RationalError("zero denominator");
  }

  static RationalFunction from_polynomial(Polynomial p) {
    return RationalFunction(std::move(p), Polynomial::constant(1.0));
  }

  static RationalFunction constant(double c) {
    return from_polynomial(Polynomial::constant(c));
  }

  bool is_polynomial() const { return den.degree() == 0; }

  double operator()(double t) const { return num(t) / den(t); }
};

inline RationalFunction operator+(const RationalFunction& a,
                                  const RationalFunction& b) {
  return RationalFunction(a.num * b.den + b.num * a.den, a.den * b.den);
}

inline RationalFunction operator-(const RationalFunction& a,
                                  const RationalFunction& b) {
  return RationalFunction(a.num * b.den - b.num * a.den, a.den * b.den);
}

inline RationalFunction operator*(const RationalFunction& a,
                                  const RationalFunction& b) {
  return RationalFunction(a.num * b.num, a.den * b.den);
}

inline RationalFunction operator/(const RationalFunction& a,
                                  const RationalFunction& b) {
  if (b.num.is_zero()) throw RationalError("division by zero rational function");
  return RationalFunction(a.num * b.den, a.den * b.num);
}

inline RationalFunction operator*(const RationalFunction& a, double s) {
  return RationalFunction(a.num * s, a.den);
}

inline RationalFunction operator-(const RationalFunction& a) { return a * -1.0; }

namespace detail {

// True when q == c * p for some nonzero scalar c (coefficientwise, relative
// tolerance).  Proportional denominators describe the same zero set, so they
// share one atom in the common-denominator bookkeeping.
inline bool proportional(const Polynomial& p, const Polynomial& q,
                         double rel_tol = 1e-9) {
  if (p.degree() != q.degree()) return false;
  if (p.is_zero() || q.is_zero()) return p.is_zero() && q.is_zero();
  std::size_t ref = 0;
  double best = 0.0;
  for (std::size_t i = 0; i < p.coeffs().size(); ++i)
    if (std::abs(p.coeffs()[i]) > best) {
      best = std::abs(p.coeffs()[i]);
      ref = i;
    }
  if (std::abs(q.coeffs()[ref]) == 0.0) return false;
  const double c = q.coeffs()[ref] / p.coeffs()[ref];
  const double scale = std::abs(c) * p.max_abs_coeff();
  for (std::size_t i = 0; i < p.coeffs().size(); ++i)
    if (std::abs(q.coeffs()[i] - c * p.coeffs()[i]) > rel_tol * scale)
      return false;
  return true;
}

}  // namespace detail

// Common denominator built from proportionality classes of the contributing
// denominator polynomials.  Each distinct (non-constant) denominator is one
// atom raised to the largest power any caller asked for; the result therefore
// clears every requested product by multiplication alone.
class DenominatorLcm {
 public:
  // Requires the given power of den's proportionality class.
  void require(const Polynomial& den, int power) {
    if (power <= 0 || den.degree() == 0) return;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      if (detail::proportional(atoms_[i], den)) {
        powers_[i] = std::max(powers_[i], power);
        return;
      }
    // Store a normalized representative so the assembled coefficients do not
    // inherit an arbitrary scale from whichever model mentioned the atom
    // first.
    atoms_.push_back(den * (1.0 / den.coeffs().back()));
    powers_.push_back(power);
  }

  // Power of den's class currently required (0 when absent).
  int power_of(const Polynomial& den) const {
    if (den.degree() == 0) return 0;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      if (detail::proportional(atoms_[i], den)) return powers_[i];
    return 0;
  }

  const std::vector<Polynomial>& atoms() const { return atoms_; }
  const std::vector<int>& powers() const { return powers_; }

  int degree() const {
    int d = 0;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      d += atoms_[i].degree() * powers_[i];
    return d;
  }

  Polynomial polynomial() const {
    Polynomial acc = Polynomial::constant(1.0);
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      for (int k = 0; k < powers_[i]; ++k) acc = acc * atoms_[i];
    return acc;
  }

  // num * polynomial() / (factors[0] * factors[1] * ...), evaluated without
  // coefficientwise division: every factor must match a registered atom class
  // (constants just contribute their scale), and its class power must cover
  // the number of times it appears.  This is how the assembler turns
  // den * omega * f_a * f_b into an exact polynomial.
  Polynomial clear(const Polynomial& num,
                   const std::vector<const Polynomial*>& factors) const {
    std::vector<int> used(atoms_.size(), 0);
    double scale = 1.0;
    for (const Polynomial* f : factors) {
      if (f->is_zero()) throw RationalError("zero factor in clear()");
      scale *= f->coeffs().back();  // factor == leading * monic atom
      if (f->degree() == 0) continue;
      bool found = false;
      for (std::size_t i = 0; i < atoms_.size(); ++i)
        if (detail::proportional(atoms_[i], *f)) {
          ++used[i];
          found = true;
          break;
        }
      if (!found) throw RationalError("clear() factor is not a known atom");
    }
    Polynomial acc = num * (1.0 / scale);
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (used[i] > powers_[i])
        throw RationalError("clear() factor power exceeds the lcm");
      for (int k = used[i]; k < powers_[i]; ++k) acc = acc * atoms_[i];
    }
    return acc;
  }

 private:
  std::vector<Polynomial> atoms_;
  std::vector<int> powers_;
};

}  // namespace phiopt
