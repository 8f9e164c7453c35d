#include "dirac/scalar.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

namespace dirac {

Scalar Scalar::symbol(const std::string &name, int exponent) {
    return Scalar(Rational(1), Monomial{{name, exponent}});
}

int Scalar::exponent(const std::string &name) const {
    for (const auto &[n, e] : mono_)
        if (n == name)
            return e;
    return 0;
}

void Scalar::normalize() {
    if (value_ == 0) {
        mono_.clear();
        return;
    }
    std::sort(mono_.begin(), mono_.end());
    Monomial merged;
    for (auto &[name, e] : mono_) {
        if (!merged.empty() && merged.back().first == name)
            merged.back().second += e;
        else
            merged.emplace_back(name, e);
    }
    Monomial out;
    for (auto &[name, e] : merged) {
        if (name == kImaginary) {
            // I^e = I^(e mod 2) * (-1)^(e div 2)
            int r = ((e % 4) + 4) % 4;
            if (r >= 2)
                value_ = -value_;
            e = r % 2;
        }
        if (e != 0)
            out.emplace_back(name, e);
    }
    mono_ = std::move(out);
}

Scalar::Monomial monomial_product(const Scalar::Monomial &a, const Scalar::Monomial &b, int sign_b) {
    Scalar::Monomial out;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
            out.push_back(a[i++]);
        } else if (i == a.size() || b[j].first < a[i].first) {
            out.emplace_back(b[j].first, sign_b * b[j].second);
            ++j;
        } else {
            int e = a[i].second + sign_b * b[j].second;
            if (e != 0)
                out.emplace_back(a[i].first, e);
            ++i;
            ++j;
        }
    }
    return out;
}

bool monomial_less(const Scalar::Monomial &a, const Scalar::Monomial &b) { return a < b; }

Scalar Scalar::operator*(const Scalar &o) const {
    if (is_zero() || o.is_zero())
        return Scalar();
    return Scalar(value_ * o.value_, monomial_product(mono_, o.mono_));
}

Scalar Scalar::inverse() const {
    if (is_zero())
        throw std::domain_error("inverse of zero scalar");
    Monomial m;
    for (const auto &[n, e] : mono_)
        m.emplace_back(n, -e);
    Rational v = 1 / value_;
    return Scalar(v, std::move(m));
}

Scalar Scalar::operator/(const Scalar &o) const { return *this * o.inverse(); }

Scalar Scalar::pow(int n) const {
    if (n < 0)
        return inverse().pow(-n);
    Scalar r(1);
    for (int k = 0; k < n; ++k)
        r *= *this;
    return r;
}

Scalar Scalar::add_like(const Scalar &o) const {
    if (is_zero())
        return o;
    if (o.is_zero())
        return *this;
    if (mono_ != o.mono_)
        throw std::logic_error("add_like on different monomials");
    return Scalar(value_ + o.value_, mono_);
}

std::string render_rational(const Rational &q) {
    std::ostringstream os;
    os << boost::multiprecision::numerator(q);
    if (boost::multiprecision::denominator(q) != 1)
        os << "/" << boost::multiprecision::denominator(q);
    return os.str();
}

std::string Scalar::render() const {
    std::string out = render_rational(value_);
    for (const auto &[n, e] : mono_) {
        out += "*" + n;
        if (e != 1)
            out += "^" + std::to_string(e);
    }
    return out;
}

// ---------------------------------------------------------------------------

DimPoly DimPoly::operator+(const DimPoly &o) const {
    DimPoly r = *this;
    for (const auto &[d, c] : o.coeffs_) {
        Rational v = r.coeffs_[d] + c;
        if (v == 0)
            r.coeffs_.erase(d);
        else
            r.coeffs_[d] = v;
    }
    return r;
}

DimPoly DimPoly::operator-(const DimPoly &o) const { return *this + o * Rational(-1); }

DimPoly DimPoly::operator*(const Rational &c) const {
    DimPoly r;
    if (c == 0)
        return r;
    for (const auto &[d, v] : coeffs_)
        r.coeffs_[d] = v * c;
    return r;
}

DimPoly DimPoly::operator*(const DimPoly &o) const {
    DimPoly r;
    for (const auto &[d1, c1] : coeffs_)
        for (const auto &[d2, c2] : o.coeffs_) {
            DimPoly t;
            t.coeffs_[d1 + d2] = c1 * c2;
            r = r + t;
        }
    return r;
}

Rational DimPoly::constant() const {
    auto it = coeffs_.find(0);
    return it == coeffs_.end() ? Rational(0) : it->second;
}

Rational DimPoly::evaluate(long long n) const {
    Rational r = 0;
    for (const auto &[d, c] : coeffs_) {
        Rational p = 1;
        for (int k = 0; k < d; ++k)
            p *= n;
        r += c * p;
    }
    return r;
}

bool DimPoly::integer_coefficients() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(),
                       [](const auto &kv) { return boost::multiprecision::denominator(kv.second) == 1; });
}

std::string DimPoly::render() const {
    if (coeffs_.empty())
        return "0";
    std::string out;
    bool first = true;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
        Rational c = it->second;
        int d = it->first;
        bool neg = c < 0;
        if (neg)
            c = -c;
        if (first)
            out += neg ? "-" : "";
        else
            out += neg ? " - " : " + ";
        first = false;
        std::string cs = render_rational(c);
        if (d == 0)
            out += cs;
        else {
            if (c != 1)
                out += cs + "*";
            out += "N";
            if (d != 1)
                out += "^" + std::to_string(d);
        }
    }
    return out;
}

DimPoly DimPoly::parse(const std::string &text) {
    std::string s;
    for (char ch : text)
        if (!std::isspace(static_cast<unsigned char>(ch)))
            s += ch;
    if (s.empty())
        throw std::invalid_argument("empty dimension");
    DimPoly result;
    std::size_t i = 0;
    while (i < s.size()) {
        int sign = 1;
        if (s[i] == '+' || s[i] == '-') {
            sign = s[i] == '-' ? -1 : 1;
            ++i;
        }
        Rational c = 1;
        bool have_num = false;
        std::size_t start = i;
        while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '/'))
            ++i;
        if (i > start) {
            c = Rational(s.substr(start, i - start));
            have_num = true;
        }
        int degree = 0;
        if (i < s.size() && s[i] == '*')
            ++i;
        if (i < s.size() && s[i] == 'N') {
            ++i;
            degree = 1;
            if (i < s.size() && s[i] == '^') {
                ++i;
                std::size_t ds = i;
                while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
                    ++i;
                if (ds == i)
                    throw std::invalid_argument("bad exponent in dimension '" + text + "'");
                degree = std::stoi(s.substr(ds, i - ds));
            }
        } else if (!have_num) {
            throw std::invalid_argument("bad dimension '" + text + "'");
        }
        DimPoly t;
        t.coeffs_[degree] = c * sign;
        result = result + t;
        if (i < s.size() && s[i] != '+' && s[i] != '-')
            throw std::invalid_argument("bad dimension '" + text + "'");
    }
    return result;
}

} // namespace dirac
