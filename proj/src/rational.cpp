#include "mlsolve/rational.hpp"

#include "mlsolve/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace mlsolve {

namespace {

bool all_digits(std::string_view s)
{
    if (s.empty())
        return false;
    for (char c : s)
        if (c < '0' || c > '9')
            return false;
    return true;
}

Rational pow10(long e)
{
    mpz_class p;
    mpz_ui_pow_ui(p.get_mpz_t(), 10, static_cast<unsigned long>(e));
    return Rational(p);
}

} // namespace

Rational parse_rational(std::string_view text)
{
    std::string_view s = text;
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    if (s.empty())
        throw FormatError("empty number");

    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        Rational num = parse_rational(s.substr(0, slash));
        Rational den = parse_rational(s.substr(slash + 1));
        if (den == 0)
            throw FormatError("zero denominator in '" + std::string(text) + "'");
        Rational q = num / den;
        q.canonicalize();
        return q;
    }

    bool negative = false;
    if (s.front() == '+' || s.front() == '-') {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    long exponent = 0;
    if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
        std::string_view exp_part = s.substr(e + 1);
        bool exp_neg = false;
        if (!exp_part.empty() && (exp_part.front() == '+' || exp_part.front() == '-')) {
            exp_neg = exp_part.front() == '-';
            exp_part.remove_prefix(1);
        }
        if (!all_digits(exp_part) || exp_part.size() > 6)
            throw FormatError("bad exponent in '" + std::string(text) + "'");
        exponent = std::stol(std::string(exp_part));
        if (exp_neg)
            exponent = -exponent;
        s = s.substr(0, e);
    }
    std::string digits;
    if (auto dot = s.find('.'); dot != std::string_view::npos) {
        std::string_view ip = s.substr(0, dot);
        std::string_view fp = s.substr(dot + 1);
        if ((!ip.empty() && !all_digits(ip)) || (!fp.empty() && !all_digits(fp)) || (ip.empty() && fp.empty()))
            throw FormatError("bad number '" + std::string(text) + "'");
        digits = std::string(ip) + std::string(fp);
        exponent -= static_cast<long>(fp.size());
    } else {
        if (!all_digits(s))
            throw FormatError("bad number '" + std::string(text) + "'");
        digits = std::string(s);
    }
    Rational q(mpz_class(digits, 10));
    if (exponent > 0)
        q *= pow10(exponent);
    else if (exponent < 0)
        q /= pow10(-exponent);
    q.canonicalize();
    return negative ? Rational(-q) : q;
}

std::string to_string(const Rational& q)
{
    return q.get_str(10);
}

double to_double(const Rational& q)
{
    // mpq_get_d truncates; pick the nearer of the two neighbours.
    double t = q.get_d();
    if (Rational(t) == q)
        return t;
    double other = Rational(t) < q ? std::nextafter(t, INFINITY) : std::nextafter(t, -INFINITY);
    Rational et = abs(Rational(t) - q);
    Rational eo = abs(Rational(other) - q);
    return eo < et ? other : t;
}

Rational from_double(double v)
{
    if (!std::isfinite(v))
        throw FormatError("non-finite value cannot become a rational");
    return Rational(v);
}

std::pair<double, double> enclose(const Rational& q)
{
    double t = q.get_d();
    Rational rt(t);
    if (rt == q)
        return {t, t};
    if (rt < q)
        return {t, std::nextafter(t, INFINITY)};
    return {std::nextafter(t, -INFINITY), t};
}

std::string to_decimal17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(std::string_view text)
{
    std::string s(text);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw FormatError("bad decimal '" + s + "'");
    return v;
}

} // namespace mlsolve
