#pragma once

// Scalar types for the two computational backends.
//
//   Cx  - std::complex<double>, used by the floating-point backend.
//   GQ  - Gaussian rationals  p + q i  with  p, q exact rationals,
//         used by the exact backend.  Supports field arithmetic and the
//         conjugation tau(p + q i) = p - q i.
//
// Text formats (one scalar):
//   float backend:  "re,im"     e.g.  "1.5,-2"
//   exact backend:  "p/q,r/s"   e.g.  "1/2,-3"   (denominator optional)

#include <complex>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

#include <gmpxx.h>

#include "torsionlab/errors.hpp"

namespace torsionlab {

using Cx = std::complex<double>;

inline Cx tau(const Cx& z) { return std::conj(z); }
inline double abs2(const Cx& z) { return std::norm(z); }

// Gaussian rational: re + im * i with exact rational parts.
struct GQ {
    mpq_class re, im;

    GQ() : re(0), im(0) {}
    GQ(long r) : re(r), im(0) {}
    GQ(const mpq_class& r) : re(r), im(0) {}
    GQ(const mpq_class& r, const mpq_class& i) : re(r), im(i) {}

    bool is_zero() const { return re == 0 && im == 0; }

    friend GQ operator+(const GQ& a, const GQ& b) { return {a.re + b.re, a.im + b.im}; }
    friend GQ operator-(const GQ& a, const GQ& b) { return {a.re - b.re, a.im - b.im}; }
    friend GQ operator-(const GQ& a) { return {-a.re, -a.im}; }
    friend GQ operator*(const GQ& a, const GQ& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend GQ operator/(const GQ& a, const GQ& b) {
        mpq_class n = b.re * b.re + b.im * b.im;
        if (n == 0) throw ConfigError("GQ division by zero");
        return {(a.re * b.re + a.im * b.im) / n, (a.im * b.re - a.re * b.im) / n};
    }
    GQ& operator+=(const GQ& b) { *this = *this + b; return *this; }
    GQ& operator-=(const GQ& b) { *this = *this - b; return *this; }
    GQ& operator*=(const GQ& b) { *this = *this * b; return *this; }
    GQ& operator/=(const GQ& b) { *this = *this / b; return *this; }

    friend bool operator==(const GQ& a, const GQ& b) { return a.re == b.re && a.im == b.im; }
    friend bool operator!=(const GQ& a, const GQ& b) { return !(a == b); }
};

inline GQ tau(const GQ& z) { return {z.re, -z.im}; }

inline Cx to_cx(const GQ& z) { return {z.re.get_d(), z.im.get_d()}; }
inline Cx to_cx(const Cx& z) { return z; }

// ---------------------------------------------------------------------------
// Parsing and formatting.

inline mpq_class parse_rational(const std::string& s) {
    if (s.empty()) throw ConfigError("empty rational literal");
    try {
        mpq_class q(s);
        q.canonicalize();
        return q;
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad rational literal: '" + s + "'");
    }
}

// "p/q,r/s" (imaginary part optional, defaults to 0).
inline GQ parse_gq(const std::string& s) {
    auto comma = s.find(',');
    if (comma == std::string::npos) return GQ(parse_rational(s));
    return GQ(parse_rational(s.substr(0, comma)), parse_rational(s.substr(comma + 1)));
}

// "re,im" (imaginary part optional, defaults to 0).
inline Cx parse_cx(const std::string& s) {
    auto parse_double = [](const std::string& t) {
        std::size_t pos = 0;
        double v;
        try {
            v = std::stod(t, &pos);
        } catch (const std::exception&) {
            throw ConfigError("bad float literal: '" + t + "'");
        }
        if (pos != t.size()) throw ConfigError("bad float literal: '" + t + "'");
        return v;
    };
    auto comma = s.find(',');
    if (comma == std::string::npos) return Cx(parse_double(s), 0.0);
    return Cx(parse_double(s.substr(0, comma)), parse_double(s.substr(comma + 1)));
}

inline std::string format_scalar(const GQ& z) {
    return z.re.get_str() + "," + z.im.get_str();
}

inline std::string format_scalar(const Cx& z) {
    std::ostringstream os;
    os.precision(17);
    os << z.real() << "," << z.imag();
    return os.str();
}

// Scalar traits used by code templated over the backend scalar.
template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<Cx> {
    static Cx parse(const std::string& s) { return parse_cx(s); }
    static bool is_zero(const Cx& z) { return z == Cx(0.0, 0.0); }
};

template <>
struct ScalarTraits<GQ> {
    static GQ parse(const std::string& s) { return parse_gq(s); }
    static bool is_zero(const GQ& z) { return z.is_zero(); }
};

} // namespace torsionlab
