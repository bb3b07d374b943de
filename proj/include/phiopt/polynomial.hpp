#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace phiopt {

enum class PolyBasis { Monomial, Legendre };

inline const char* to_string(PolyBasis b) {
  return b == PolyBasis::Monomial ? "monomial" : "legendre";
}

struct PolynomialError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense univariate polynomial with real coefficients, stored low degree
// first.  Coefficients are interpreted in the monomial basis {1, t, t^2, ...}
// or the Legendre basis {P_0, P_1, ...}.  After construction the trailing
// coefficient is nonzero unless the polynomial is identically zero, so
// degree() is canonical.
class Polynomial {
 public:
  Polynomial() : coeffs_{0.0}, basis_(PolyBasis::Monomial) {}

  explicit Polynomial(std::vector<double> coeffs,
                      PolyBasis basis = PolyBasis::Monomial)
      : coeffs_(std::move(coeffs)), basis_(basis) {
    if (coeffs_.empty()) throw PolynomialError("polynomial needs coefficients");
    for (double c : coeffs_)
      if (!std::isfinite(c))
        throw PolynomialError("polynomial coefficient is not finite");
    normalize();
  }

  static Polynomial zero(PolyBasis basis = PolyBasis::Monomial) {
    return Polynomial({0.0}, basis);
  }

  static Polynomial constant(double c, PolyBasis basis = PolyBasis::Monomial) {
    return Polynomial({c}, basis);
  }

  // t^k in the monomial basis.
  static Polynomial power(int k, double scale = 1.0) {
    if (k < 0) throw PolynomialError("negative monomial power");
    std::vector<double> c(static_cast<std::size_t>(k) + 1, 0.0);
    c.back() = scale;
    return Polynomial(std::move(c));
  }

  const std::vector<double>& coeffs() const { return coeffs_; }
  PolyBasis basis() const { return basis_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }

  bool is_zero() const { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }

  double coeff(int k) const {
    if (k < 0) throw PolynomialError("negative coefficient index");
    return k < static_cast<int>(coeffs_.size())
               ? coeffs_[static_cast<std::size_t>(k)]
               : 0.0;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (double c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  double operator()(double t) const {
    if (basis_ == PolyBasis::Monomial) {
      double acc = 0.0;
      for (std::size_t i = coeffs_.size(); i-- > 0;) acc = acc * t + coeffs_[i];
      return acc;
    }
    // Legendre via the three-term recurrence
    // (n+1) P_{n+1} = (2n+1) t P_n - n P_{n-1}.
    double pm1 = 1.0, p = t;
    double acc = coeffs_[0] * pm1;
    if (coeffs_.size() > 1) acc += coeffs_[1] * p;
    for (std::size_t n = 1; n + 1 < coeffs_.size(); ++n) {
      double pn1 = ((2.0 * n + 1.0) * t * p - n * pm1) / (n + 1.0);
      pm1 = p;
      p = pn1;
      acc += coeffs_[n + 1] * p;
    }
    return acc;
  }

  // Drops leading coefficients that are negligible relative to the largest
  // one.  Used before root finding on numerically computed coefficients.
  Polynomial trimmed(double rel_tol) const {
    double scale = max_abs_coeff();
    if (scale == 0.0) return zero(basis_);
    std::size_t n = coeffs_.size();
    while (n > 1 && std::abs(coeffs_[n - 1]) <= rel_tol * scale) --n;
    return Polynomial(std::vector<double>(coeffs_.begin(),
                                          coeffs_.begin() + static_cast<std::ptrdiff_t>(n)),
                      basis_);
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.basis_ == b.basis_ && a.coeffs_ == b.coeffs_;
  }

 private:
  void normalize() {
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
    if (coeffs_.size() == 1 && coeffs_[0] == 0.0) coeffs_[0] = 0.0;  // kill -0
  }

  std::vector<double> coeffs_;
  PolyBasis basis_;
};

namespace detail {
inline void require_same_basis(const Polynomial& a, const Polynomial& b,
                               const char* op) {
  if (a.basis() != b.basis())
    throw PolynomialError(std::string("basis mismatch in ") + op);
}
}  // namespace detail

inline Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  detail::require_same_basis(a, b, "operator+");
  std::vector<double> c(std::max(a.coeffs().size(), b.coeffs().size()), 0.0);
  for (std::size_t i = 0; i < a.coeffs().size(); ++i) c[i] += a.coeffs()[i];
  for (std::size_t i = 0; i < b.coeffs().size(); ++i) c[i] += b.coeffs()[i];
  return Polynomial(std::move(c), a.basis());
}

inline Polynomial operator-(const Polynomial& a, const Polynomial& b) {
  detail::require_same_basis(a, b, "operator-");
  std::vector<double> c(std::max(a.coeffs().size(), b.coeffs().size()), 0.0);
  for (std::size_t i = 0; i < a.coeffs().size(); ++i) c[i] += a.coeffs()[i];
  for (std::size_t i = 0; i < b.coeffs().size(); ++i) c[i] -= b.coeffs()[i];
  return Polynomial(std::move(c), a.basis());
}

inline Polynomial operator*(const Polynomial& a, double s) {
  std::vector<double> c = a.coeffs();
  for (double& x : c) x *= s;
  return Polynomial(std::move(c), a.basis());
}

inline Polynomial operator*(double s, const Polynomial& a) { return a * s; }

// Product is defined in the monomial basis only; Legendre products do not
// stay coefficient-local.
inline Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.basis() != PolyBasis::Monomial || b.basis() != PolyBasis::Monomial)
    throw PolynomialError("polynomial product requires the monomial basis");
  if (a.is_zero() || b.is_zero()) return Polynomial::zero();
  std::vector<double> c(a.coeffs().size() + b.coeffs().size() - 1, 0.0);
  for (std::size_t i = 0; i < a.coeffs().size(); ++i)
    for (std::size_t j = 0; j < b.coeffs().size(); ++j)
      c[i + j] += a.coeffs()[i] * b.coeffs()[j];
  return Polynomial(std::move(c));
}

inline Polynomial operator-(const Polynomial& a) { return a * -1.0; }

inline Polynomial derivative(const Polynomial& p) {
  if (p.basis() != PolyBasis::Monomial)
    throw PolynomialError("derivative requires the monomial basis");
  if (p.degree() == 0) return Polynomial::zero();
  std::vector<double> c(p.coeffs().size() - 1);
  for (std::size_t i = 1; i < p.coeffs().size(); ++i)
    c[i - 1] = static_cast<double>(i) * p.coeffs()[i];
  return Polynomial(std::move(c));
}

// P_0, ..., P_n as monomial-basis polynomials, from the recurrence
// (k+1) P_{k+1} = (2k+1) t P_k - k P_{k-1}.
inline std::vector<Polynomial> legendre_basis(int n) {
  if (n < 0) throw PolynomialError("legendre_basis needs n >= 0");
  std::vector<Polynomial> ps;
  ps.reserve(static_cast<std::size_t>(n) + 1);
  ps.push_back(Polynomial::constant(1.0));
  if (n >= 1) ps.push_back(Polynomial({0.0, 1.0}));
  const Polynomial t({0.0, 1.0});
  for (int k = 1; k < n; ++k) {
    Polynomial next =
        (t * ps.back()) * ((2.0 * k + 1.0) / (k + 1.0)) -
        ps[static_cast<std::size_t>(k) - 1] * (static_cast<double>(k) / (k + 1.0));
    ps.push_back(std::move(next));
  }
  return ps;
}

// Exact basis conversion.  Legendre -> monomial expands each P_k; the reverse
// direction solves the triangular system by eliminating monomial degrees from
// the top down (P_k has nonzero leading coefficient).
inline Polynomial change_basis(const Polynomial& p, PolyBasis target) {
  if (p.basis() == target) return p;
  const int n = p.degree();
  std::vector<Polynomial> ps = legendre_basis(n);
  if (target == PolyBasis::Monomial) {
    Polynomial acc = Polynomial::zero();
    for (int k = 0; k <= n; ++k) acc = acc + ps[static_cast<std::size_t>(k)] * p.coeff(k);
    return acc;
  }
  std::vector<double> rem = p.coeffs();
  std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = n; k >= 0; --k) {
    const auto& pk = ps[static_cast<std::size_t>(k)].coeffs();
    double c = rem[static_cast<std::size_t>(k)] / pk.back();
    out[static_cast<std::size_t>(k)] = c;
    for (std::size_t i = 0; i < pk.size(); ++i) rem[i] -= c * pk[i];
  }
  return Polynomial(std::move(out), PolyBasis::Legendre);
}

inline std::ostream& operator<<(std::ostream& os, const Polynomial& p) {
  os << "[";
  for (std::size_t i = 0; i < p.coeffs().size(); ++i) {
    if (i) os << ", ";
    os << p.coeffs()[i];
  }
  return os << "]:" << to_string(p.basis());
}

}  // namespace phiopt
