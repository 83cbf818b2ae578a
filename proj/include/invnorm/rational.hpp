#pragma once

// Exact rational helpers on top of GMP's mpq_class.

#include <gmpxx.h>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace invnorm {

using Rational = mpq_class;
using Integer = mpz_class;

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses "p/q", "-p/q" or a plain integer. The result is canonicalized.
inline Rational parse_rational(std::string_view text) {
    std::string s;
    for (char c : text)
        if (c != ' ' && c != '\t')
            s.push_back(c);
    if (s.empty())
        throw ParseError("empty rational literal");
    if (s.front() == '+')
        s.erase(s.begin());
    const auto slash = s.find('/');
    auto valid_int = [](std::string_view v) {
        if (v.empty())
            return false;
        std::size_t i = (v.front() == '-') ? 1 : 0;
        if (i == v.size())
            return false;
        for (; i < v.size(); ++i)
            if (v[i] < '0' || v[i] > '9')
                return false;
        return true;
    };
    if (slash == std::string::npos) {
        if (!valid_int(s))
            throw ParseError("bad rational literal '" + std::string(text) + "'");
        return Rational(Integer(s, 10));
    }
    const std::string num = s.substr(0, slash);
    const std::string den = s.substr(slash + 1);
    if (!valid_int(num) || !valid_int(den) || den.front() == '-')
        throw ParseError("bad rational literal '" + std::string(text) + "'");
    Integer d(den, 10);
    if (d == 0)
        throw ParseError("zero denominator in '" + std::string(text) + "'");
    Rational r(Integer(num, 10), d);
    r.canonicalize();
    return r;
}

/// num/den in lowest terms (den != 0).
inline Rational frac(const Integer& num, const Integer& den) {
    Rational r(num, den);
    r.canonicalize();
    return r;
}

/// "p/q", or "p" when the denominator is 1.
inline std::string to_string(const Rational& r) { return r.get_str(10); }

inline std::string to_string(const Integer& z) { return z.get_str(10); }

inline Integer ceil(const Rational& r) {
    Integer q;
    mpz_cdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
    return q;
}

inline Integer floor(const Rational& r) {
    Integer q;
    mpz_fdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
    return q;
}

inline Rational abs(const Rational& r) { return r < 0 ? Rational(-r) : r; }

inline std::size_t hash_value(const Integer& z) {
    const mpz_srcptr p = z.get_mpz_t();
    std::size_t h = static_cast<std::size_t>(mpz_sgn(p)) * 0x9e3779b97f4a7c15ULL;
    const std::size_t n = mpz_size(p);
    for (std::size_t i = 0; i < n; ++i)
        h = (h ^ static_cast<std::size_t>(mpz_getlimbn(p, static_cast<mp_size_t>(i)))) * 0x100000001b3ULL;
    return h;
}

inline std::size_t hash_value(const Rational& r) {
    return hash_value(r.get_num()) * 31u + hash_value(r.get_den());
}

/// The rational with the smallest denominator (then smallest |numerator|)
/// strictly inside the open interval (lo, hi). Stern–Brocot descent.
inline Rational simplest_between(const Rational& lo, const Rational& hi) {
    if (!(lo < hi))
        throw std::invalid_argument("simplest_between: empty interval");
    if (lo < 0 && hi > 0)
        return Rational(0);
    if (hi <= 0) {
        Rational r = simplest_between(-hi, -lo);
        return -r;
    }
    // 0 <= lo < hi.
    Integer fl = floor(lo);
    if (Rational(fl + 1) < hi)
        return Rational(fl + 1);
    // lo and hi lie in [fl, fl+1]; recurse on reciprocals of the fractional parts.
    Rational lo_frac = lo - fl;
    Rational hi_frac = hi - fl;
    if (lo_frac == 0) {
        // interval (fl, fl + hi_frac): pick fl + 1/k with 1/k < hi_frac.
        Integer k = floor(Rational(1) / hi_frac) + 1;
        Rational r(fl * k + 1, k);
        r.canonicalize();
        return r;
    }
    // 1/hi_frac < 1/x < 1/lo_frac
    Rational inner = simplest_between(Rational(1) / hi_frac, Rational(1) / lo_frac);
    Rational r = fl + Rational(1) / inner;
    r.canonicalize();
    return r;
}

} // namespace invnorm

template <>
struct std::hash<invnorm::Rational> {
    std::size_t operator()(const invnorm::Rational& r) const noexcept { return invnorm::hash_value(r); }
};
