#pragma once

// Exact complex rationals for residual evaluation at binary64 points.

#include "mlsolve/errors.hpp"
#include "mlsolve/expr.hpp"
#include "mlsolve/rational.hpp"
#include "mlsolve/scalar.hpp"

namespace mlsolve {

struct ExactComplex {
    Rational re;
    Rational im;

    ExactComplex() = default;
    ExactComplex(double v) : re(v), im(0) {} // NOLINT(google-explicit-constructor)
    ExactComplex(Rational r, Rational i = 0) : re(std::move(r)), im(std::move(i)) {} // NOLINT(google-explicit-constructor)
    ExactComplex(const Complex& z) : re(z.real()), im(z.imag()) {} // NOLINT(google-explicit-constructor)

    Complex to_complex() const { return {to_double(re), to_double(im)}; }
    /// Outward enclosure of the exact value.
    ComplexInterval enclosure() const
    {
        auto [rl, rh] = enclose(re);
        auto [il, ih] = enclose(im);
        return {Interval(rl, rh), Interval(il, ih)};
    }
};

inline ExactComplex operator+(const ExactComplex& a, const ExactComplex& b) { return {a.re + b.re, a.im + b.im}; }
inline ExactComplex operator-(const ExactComplex& a, const ExactComplex& b) { return {a.re - b.re, a.im - b.im}; }
inline ExactComplex operator-(const ExactComplex& a) { return {-a.re, -a.im}; }
inline ExactComplex operator*(const ExactComplex& a, const ExactComplex& b)
{
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
inline ExactComplex& operator+=(ExactComplex& a, const ExactComplex& b) { return a = a + b; }
inline ExactComplex& operator-=(ExactComplex& a, const ExactComplex& b) { return a = a - b; }
inline ExactComplex& operator*=(ExactComplex& a, const ExactComplex& b) { return a = a * b; }

template <>
struct ScalarTraits<ExactComplex> {
    static ExactComplex constant(double value, double, double) { return ExactComplex(value); }
    static ExactComplex from_rational(const Rational& q) { return ExactComplex(q); }
    static ExactComplex reciprocal(const ExactComplex& a)
    {
        Rational den = a.re * a.re + a.im * a.im;
        if (den == 0)
            throw SingularEvaluation("reciprocal of zero");
        return {a.re / den, -a.im / den};
    }
};

} // namespace mlsolve
