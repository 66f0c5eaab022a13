#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>
#include <utility>

namespace mlsolve {

using Rational = mpq_class;

/// Parses "12", "-3.25", "1.5e-3", "7/9". Decimal input is converted exactly.
Rational parse_rational(std::string_view text);

/// "p" or "p/q" in lowest terms.
std::string to_string(const Rational& q);

/// Nearest binary64 value.
double to_double(const Rational& q);

/// Exact rational value of a finite double.
Rational from_double(double v);

/// Binary64 enclosure lo <= q <= hi; lo == hi when q is representable.
std::pair<double, double> enclose(const Rational& q);

/// Shortest-roundtrip-safe decimal with 17 significant digits.
std::string to_decimal17(double v);

double parse_double(std::string_view text);

} // namespace mlsolve
