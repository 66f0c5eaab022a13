#include "doctest.h"

#include "mlsolve/errors.hpp"
#include "mlsolve/expr.hpp"
#include "mlsolve/models.hpp"

#include <random>

using namespace mlsolve;

TEST_CASE("rational parsing is exact")
{
    CHECK(parse_rational("0.1") == Rational(1, 10));
    CHECK(parse_rational("-3.25") == Rational(-13, 4));
    CHECK(parse_rational("1.5e-3") == Rational(3, 2000));
    CHECK(parse_rational("7/21") == Rational(1, 3));
    CHECK(parse_rational("8263") == Rational(8263));
    CHECK_THROWS(parse_rational("abc"));
    auto [lo, hi] = enclose(Rational(1, 3));
    CHECK(lo < hi);
    CHECK(Rational(lo) <= Rational(1, 3));
    CHECK(Rational(hi) >= Rational(1, 3));
    auto [a, b] = enclose(Rational(3, 4));
    CHECK(a == b);
}

TEST_CASE("hash-consing shares structurally equal nodes")
{
    ExprGraph g(2, 1);
    ExprId a = g.add(g.var(0), g.var(1));
    ExprId b = g.add(g.var(1), g.var(0));
    CHECK(a == b);
    CHECK(g.mul(g.var(0), g.one()) == g.var(0));
    CHECK(g.add(g.var(0), g.zero()) == g.var(0));
    CHECK(g.negate(g.negate(g.var(1))) == g.var(1));
    CHECK(g.reciprocal(g.reciprocal(g.var(1))) == g.var(1));
    CHECK(g.is_zero(g.mul(g.var(0), g.zero())));
    CHECK_THROWS_AS(g.reciprocal(g.zero()), ModelError);
}

TEST_CASE("gradient of a one-dimensional potential")
{
    auto g = std::make_shared<ExprGraph>(1, 2);
    std::vector<PotentialTerm> terms{{0, g->var(0)}, {1, g->sub(g->one(), g->var(0))}};
    Potential pot(g, terms);
    RationalSystem sys = gradient(pot);
    std::vector<double> x{0.5}, s{1.0, 1.0};
    // F = 1/x - 1/(1-x), J = -1/x^2 - 1/(1-x)^2
    auto f = evaluate<double>(sys, x, s);
    CHECK(f[0] == doctest::Approx(0.0));
    auto j = jacobian<double>(sys, x, s);
    CHECK(j(0, 0) == doctest::Approx(-8.0));
    std::vector<double> x2{0.25}, s2{2.0, 3.0};
    auto f2 = evaluate<double>(sys, x2, s2);
    CHECK(f2[0] == doctest::Approx(2.0 / 0.25 - 3.0 / 0.75));
}

TEST_CASE("symbolic Jacobian agrees with central differences")
{
    auto model = chy_model(7);
    RationalSystem sys = gradient(build_potential(model));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    std::vector<double> x(sys.dim()), s(model.num_states());
    for (auto& v : x)
        v = u(rng);
    std::sort(x.begin(), x.end());
    for (auto& v : s)
        v = 1.0 + 10.0 * u(rng);
    auto jac = jacobian<double>(sys, x, s);
    const double h = 1e-6;
    for (std::size_t j = 0; j < sys.dim(); ++j) {
        auto xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        auto fp = evaluate<double>(sys, xp, s);
        auto fm = evaluate<double>(sys, xm, s);
        for (std::size_t i = 0; i < sys.dim(); ++i) {
            double fd = (fp[i] - fm[i]) / (2 * h);
            CHECK(jac(i, j) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("dual numbers reproduce directional derivatives")
{
    auto model = chy_model(6);
    RationalSystem sys = gradient(build_potential(model));
    std::vector<double> x{0.2, 0.5, 0.7}, s(model.num_states(), 2.0), dir{0.3, -1.0, 0.5};
    std::vector<Dual<double>> xd(3), sd(s.begin(), s.end());
    for (std::size_t i = 0; i < 3; ++i)
        xd[i] = Dual<double>(x[i], dir[i]);
    auto fd = evaluate<Dual<double>>(sys, xd, sd);
    auto jac = jacobian<double>(sys, x, s);
    for (std::size_t i = 0; i < 3; ++i) {
        double expect = 0.0;
        for (std::size_t j = 0; j < 3; ++j)
            expect += jac(i, j) * dir[j];
        CHECK(fd[i].d == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("interval evaluation encloses the floating point value")
{
    auto model = chy_model(6);
    RationalSystem sys = gradient(build_potential(model));
    std::vector<double> x{0.2, 0.5, 0.7}, s{25, 23, 16, 12, 22, 14, 16, 15, 27};
    std::vector<Interval> xi(x.begin(), x.end()), si(s.begin(), s.end());
    auto fi = evaluate<Interval>(sys, xi, si);
    auto f = evaluate<double>(sys, x, s);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fi[i].contains(f[i]));
        CHECK(fi[i].width() < 1e-10);
    }
    std::vector<ComplexInterval> xc(x.begin(), x.end()), sc(s.begin(), s.end());
    auto fc = evaluate<ComplexInterval>(sys, xc, sc);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(fc[i].contains(Complex(f[i])));
}

TEST_CASE("a reciprocal straddling zero raises a singular evaluation")
{
    auto g = std::make_shared<ExprGraph>(1, 1);
    Potential pot(g, {{0, g->var(0)}});
    RationalSystem sys = gradient(pot);
    std::vector<Interval> x{Interval(-0.1, 0.1)}, s{Interval(1.0)};
    CHECK_THROWS_AS(evaluate<Interval>(sys, x, s), SingularEvaluation);
}

TEST_CASE("toric Hessian is the Hessian in logarithmic coordinates")
{
    auto model = chy_model(7);
    RationalSystem sys = gradient(build_potential(model));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t d = sys.dim();
    std::vector<Complex> x(d), s(model.num_states());
    for (auto& v : x)
        v = {u(rng), u(rng)};
    for (auto& v : s)
        v = {u(rng), u(rng)};
    auto h = toric_hessian(sys, x, s);
    // G_j(t) = x_j F_j(x) with x = exp(t); H_ij = ∂G_j/∂t_i.
    auto g_of = [&](const std::vector<Complex>& xx) {
        auto f = evaluate<Complex>(sys, xx, s);
        for (std::size_t j = 0; j < d; ++j)
            f[j] *= xx[j];
        return f;
    };
    const double step = 1e-5;
    for (std::size_t i = 0; i < d; ++i) {
        auto xp = x, xm = x;
        xp[i] *= std::exp(step);
        xm[i] *= std::exp(-step);
        auto gp = g_of(xp), gm = g_of(xm);
        for (std::size_t j = 0; j < d; ++j) {
            Complex fd = (gp[j] - gm[j]) / (2 * step);
            CHECK(std::abs(h(i, j) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
            CHECK(std::abs(h(i, j) - h(j, i)) <= 1e-10 * std::max(1.0, std::abs(h(i, j))));
        }
    }
}

TEST_CASE("parameter derivative and predictor tape")
{
    auto model = chy_model(5);
    RationalSystem sys = gradient(build_potential(model));
    const std::size_t d = sys.dim(), n = model.num_states();
    std::vector<double> x{0.3, 0.6}, s(n), sigma(n);
    for (std::size_t k = 0; k < n; ++k) {
        s[k] = 1.0 + k;
        sigma[k] = 0.5 - 0.1 * k;
    }
    std::vector<double> params(s);
    params.insert(params.end(), sigma.begin(), sigma.end());
    std::vector<double> out(d * d + d), slots;
    sys.predictor_tape().eval<double>(x, params, out, slots);
    // F is linear in s, so Σ σ_k ∂F/∂s_k = F(x; σ).
    auto f_sigma = evaluate<double>(sys, x, sigma);
    for (std::size_t i = 0; i < d; ++i)
        CHECK(out[d * d + i] == doctest::Approx(f_sigma[i]).epsilon(1e-13));
    auto jac = jacobian<double>(sys, x, s);
    for (std::size_t k = 0; k < d * d; ++k)
        CHECK(out[k] == doctest::Approx(jac.data()[k]).epsilon(1e-13));
}
