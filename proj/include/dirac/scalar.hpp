#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dirac {

using Rational = boost::multiprecision::cpp_rational;

/// Name reserved for the imaginary unit inside scalar monomials.
inline constexpr const char *kImaginary = "I";

/// Exact coefficient: a rational times a Laurent monomial in named constants.
///
/// The imaginary unit `I` is kept with exponent 0 or 1; `I^2` folds into the sign.
/// Zero always carries the empty monomial.
class Scalar {
  public:
    using Monomial = std::vector<std::pair<std::string, int>>; // sorted by name, nonzero exps

    Scalar() = default;
    Scalar(long long v) : value_(v) {}
    Scalar(Rational v) : value_(std::move(v)) { normalize(); }
    Scalar(Rational v, Monomial m) : value_(std::move(v)), mono_(std::move(m)) { normalize(); }

    static Scalar symbol(const std::string &name, int exponent = 1);

    const Rational &rational() const { return value_; }
    const Monomial &monomial() const { return mono_; }
    bool is_zero() const { return value_ == 0; }
    bool is_one() const { return value_ == 1 && mono_.empty(); }
    int exponent(const std::string &name) const;

    Scalar operator-() const { return Scalar(-value_, mono_); }
    Scalar operator*(const Scalar &o) const;
    Scalar operator/(const Scalar &o) const;
    Scalar &operator*=(const Scalar &o) { return *this = *this * o; }
    Scalar inverse() const;
    Scalar pow(int n) const;

    /// Same monomial: sums the rationals. Throws std::logic_error otherwise.
    Scalar add_like(const Scalar &o) const;

    bool operator==(const Scalar &o) const = default;

    std::string render() const;

  private:
    void normalize();

    Rational value_{0};
    Monomial mono_;
};

/// Multiplies monomials (exponents add, zero exponents removed).
Scalar::Monomial monomial_product(const Scalar::Monomial &a, const Scalar::Monomial &b, int sign_b = 1);

/// Total order on monomials used for canonical term ordering.
bool monomial_less(const Scalar::Monomial &a, const Scalar::Monomial &b);

std::string render_rational(const Rational &q);

/// Univariate polynomial in the formal dimension symbol N with rational coefficients.
class DimPoly {
  public:
    DimPoly() = default;
    DimPoly(long long c) { if (c != 0) coeffs_[0] = Rational(c); }
    static DimPoly n() { DimPoly p; p.coeffs_[1] = 1; return p; }

    DimPoly operator+(const DimPoly &o) const;
    DimPoly operator-(const DimPoly &o) const;
    DimPoly operator*(const DimPoly &o) const;
    DimPoly operator*(const Rational &c) const;
    bool operator==(const DimPoly &o) const = default;

    bool is_zero() const { return coeffs_.empty(); }
    bool is_constant() const { return coeffs_.empty() || (coeffs_.size() == 1 && coeffs_.begin()->first == 0); }
    Rational constant() const;
    Rational evaluate(long long n) const;
    bool integer_coefficients() const;
    const std::map<int, Rational> &coeffs() const { return coeffs_; }

    /// e.g. "20*N^2 - 20", "0", "3"
    std::string render() const;
    /// Inverse of render() on its own output.
    static DimPoly parse(const std::string &text);

  private:
    std::map<int, Rational> coeffs_; // degree -> nonzero coefficient
};

} // namespace dirac
