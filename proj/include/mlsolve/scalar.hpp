#pragma once

// Scalar kinds accepted by the expression evaluator: double, std::complex<double>,
// Interval, ComplexInterval and Dual<T> (nest Dual<Dual<T>> for second order).

#include "mlsolve/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>

namespace mlsolve {

using Complex = std::complex<double>;

inline double round_down(double v) { return std::nextafter(v, -std::numeric_limits<double>::infinity()); }
inline double round_up(double v) { return std::nextafter(v, std::numeric_limits<double>::infinity()); }

/// Closed binary64 interval. Every arithmetic result is widened by one ulp on
/// each side, which encloses the exact result under round-to-nearest.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    constexpr Interval() = default;
    constexpr Interval(double v) : lo(v), hi(v) {} // NOLINT(google-explicit-constructor)
    constexpr Interval(double l, double h) : lo(l), hi(h) {}

    double mid() const { return lo == hi ? lo : 0.5 * lo + 0.5 * hi; }
    double width() const { return hi - lo; }
    double rad() const { return round_up(0.5 * (hi - lo)); }
    double mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains_zero() const { return lo <= 0.0 && 0.0 <= hi; }
    bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
    /// Strict containment of `o` in the interior of *this.
    bool interior_contains(const Interval& o) const { return lo < o.lo && o.hi < hi; }
    bool overlaps(const Interval& o) const { return !(o.hi < lo || hi < o.lo); }
    bool is_finite() const { return std::isfinite(lo) && std::isfinite(hi); }
};

inline Interval operator+(const Interval& a, const Interval& b) { return {round_down(a.lo + b.lo), round_up(a.hi + b.hi)}; }
inline Interval operator-(const Interval& a, const Interval& b) { return {round_down(a.lo - b.hi), round_up(a.hi - b.lo)}; }
inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator*(const Interval& a, const Interval& b)
{
    double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
    return {round_down(std::min({p1, p2, p3, p4})), round_up(std::max({p1, p2, p3, p4}))};
}

inline Interval sqr(const Interval& a)
{
    double l = a.lo * a.lo, h = a.hi * a.hi;
    if (a.contains_zero())
        return {0.0, round_up(std::max(l, h))};
    return {round_down(std::min(l, h)), round_up(std::max(l, h))};
}

inline Interval reciprocal(const Interval& a)
{
    if (a.contains_zero())
        throw SingularEvaluation("interval reciprocal of a range containing zero");
    return {round_down(1.0 / a.hi), round_up(1.0 / a.lo)};
}

inline Interval operator/(const Interval& a, const Interval& b) { return a * reciprocal(b); }
inline Interval& operator+=(Interval& a, const Interval& b) { return a = a + b; }
inline Interval& operator-=(Interval& a, const Interval& b) { return a = a - b; }
inline Interval& operator*=(Interval& a, const Interval& b) { return a = a * b; }

inline Interval hull(const Interval& a, const Interval& b) { return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)}; }

inline std::ostream& operator<<(std::ostream& os, const Interval& a) { return os << '[' << a.lo << ", " << a.hi << ']'; }

/// Rectangular complex interval: independent real and imaginary ranges.
struct ComplexInterval {
    Interval re;
    Interval im;

    ComplexInterval() = default;
    ComplexInterval(double v) : re(v), im(0.0) {} // NOLINT(google-explicit-constructor)
    ComplexInterval(Interval r, Interval i = Interval(0.0)) : re(r), im(i) {} // NOLINT(google-explicit-constructor)
    ComplexInterval(const Complex& z) : re(z.real()), im(z.imag()) {} // NOLINT(google-explicit-constructor)

    Complex mid() const { return {re.mid(), im.mid()}; }
    bool contains(const Complex& z) const { return re.contains(z.real()) && im.contains(z.imag()); }
    bool contains(const ComplexInterval& o) const { return re.contains(o.re) && im.contains(o.im); }
    bool interior_contains(const ComplexInterval& o) const { return re.interior_contains(o.re) && im.interior_contains(o.im); }
    bool overlaps(const ComplexInterval& o) const { return re.overlaps(o.re) && im.overlaps(o.im); }
    bool contains_zero() const { return re.contains_zero() && im.contains_zero(); }
    double mag() const { return round_up(std::hypot(re.mag(), im.mag())); }
};

inline ComplexInterval operator+(const ComplexInterval& a, const ComplexInterval& b) { return {a.re + b.re, a.im + b.im}; }
inline ComplexInterval operator-(const ComplexInterval& a, const ComplexInterval& b) { return {a.re - b.re, a.im - b.im}; }
inline ComplexInterval operator-(const ComplexInterval& a) { return {-a.re, -a.im}; }
inline ComplexInterval operator*(const ComplexInterval& a, const ComplexInterval& b)
{
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}

inline ComplexInterval sqr(const ComplexInterval& a)
{
    return {sqr(a.re) - sqr(a.im), Interval(2.0) * a.re * a.im};
}

inline ComplexInterval reciprocal(const ComplexInterval& a)
{
    Interval den = sqr(a.re) + sqr(a.im);
    if (den.contains_zero())
        throw SingularEvaluation("complex interval reciprocal of a box containing zero");
    Interval inv = reciprocal(den);
    return {a.re * inv, -a.im * inv};
}

inline ComplexInterval& operator+=(ComplexInterval& a, const ComplexInterval& b) { return a = a + b; }
inline ComplexInterval& operator-=(ComplexInterval& a, const ComplexInterval& b) { return a = a - b; }
inline ComplexInterval& operator*=(ComplexInterval& a, const ComplexInterval& b) { return a = a * b; }

inline std::ostream& operator<<(std::ostream& os, const ComplexInterval& a) { return os << a.re << "+i" << a.im; }

/// Forward-mode dual number v + d·ε with ε² = 0.
template <class T>
struct Dual {
    T v{};
    T d{};

    Dual() = default;
    Dual(double x) : v(x), d(0.0) {} // NOLINT(google-explicit-constructor)
    Dual(T value, T deriv) : v(value), d(deriv) {}
};

template <class T> Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.v + b.v, a.d + b.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.v - b.v, a.d - b.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T> Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
template <class T> Dual<T>& operator+=(Dual<T>& a, const Dual<T>& b) { return a = a + b; }
template <class T> Dual<T>& operator*=(Dual<T>& a, const Dual<T>& b) { return a = a * b; }

/// Per-kind hooks used by the tape evaluator.
template <class T>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
    static double constant(double value, double /*lo*/, double /*hi*/) { return value; }
    static double reciprocal(double a)
    {
        if (a == 0.0)
            throw SingularEvaluation("reciprocal of zero");
        return 1.0 / a;
    }
};

template <>
struct ScalarTraits<Complex> {
    static Complex constant(double value, double, double) { return {value, 0.0}; }
    static Complex reciprocal(const Complex& a)
    {
        if (a.real() == 0.0 && a.imag() == 0.0)
            throw SingularEvaluation("reciprocal of zero");
        double den = a.real() * a.real() + a.imag() * a.imag();
        return {a.real() / den, -a.imag() / den};
    }
};

template <>
struct ScalarTraits<Interval> {
    static Interval constant(double, double lo, double hi) { return {lo, hi}; }
    static Interval reciprocal(const Interval& a) { return mlsolve::reciprocal(a); }
};

template <>
struct ScalarTraits<ComplexInterval> {
    static ComplexInterval constant(double, double lo, double hi) { return ComplexInterval(Interval(lo, hi)); }
    static ComplexInterval reciprocal(const ComplexInterval& a) { return mlsolve::reciprocal(a); }
};

template <class T>
struct ScalarTraits<Dual<T>> {
    static Dual<T> constant(double value, double lo, double hi) { return {ScalarTraits<T>::constant(value, lo, hi), T(0.0)}; }
    static Dual<T> reciprocal(const Dual<T>& a)
    {
        T r = ScalarTraits<T>::reciprocal(a.v);
        return {r, -(a.d * r * r)};
    }
};

/// Integer power by repeated squaring; negative exponents go through the reciprocal.
template <class T>
T integer_power(const T& base, int exponent)
{
    if (exponent < 0)
        return integer_power(ScalarTraits<T>::reciprocal(base), -exponent);
    if constexpr (std::is_same_v<T, Interval> || std::is_same_v<T, ComplexInterval>) {
        if (exponent == 2)
            return sqr(base);
    }
    T result = ScalarTraits<T>::constant(1.0, 1.0, 1.0);
    T b = base;
    bool first = true;
    while (exponent > 0) {
        if (exponent & 1) {
            result = first ? b : result * b;
            first = false;
        }
        exponent >>= 1;
        if (exponent > 0) {
            if constexpr (std::is_same_v<T, Interval> || std::is_same_v<T, ComplexInterval>)
                b = sqr(b);
            else
                b = b * b;
        }
    }
    return result;
}

} // namespace mlsolve
