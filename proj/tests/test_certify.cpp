#include "doctest.h"

#include "mlsolve/certify.hpp"
#include "mlsolve/io.hpp"
#include "mlsolve/kinematics.hpp"
#include "mlsolve/monodromy.hpp"

#include <random>

using namespace mlsolve;

namespace {

RationalSystem line_system()
{
    auto g = std::make_shared<ExprGraph>(1, 2);
    Potential pot(g, {{0, g->var(0)}, {1, g->sub(g->one(), g->var(0))}}, true);
    return gradient(pot);
}

SolutionSet solve_at(const ModelSpec& model, const RationalSystem& sys, const std::vector<Rational>& data)
{
    MonodromyOptions mo;
    mo.target = model.known_solution_count;
    auto mono = monodromy_solve(model, sys, std::nullopt, {}, mo);
    std::vector<std::vector<Complex>> starts;
    for (const auto& p : mono.solutions.points)
        starts.push_back(p.x);
    std::vector<Complex> s;
    for (const auto& q : data)
        s.emplace_back(to_double(q));
    auto set = parameter_homotopy(sys, starts, mono.s_star, s);
    set.exact_parameters = data;
    return set;
}

} // namespace

TEST_CASE("Krawczyk on a one-dimensional system")
{
    auto sys = line_system();
    auto s = parameter_box(std::vector<Rational>{Rational(1), Rational(1)});
    auto cert = krawczyk_certify(sys, s, std::vector<Complex>{0.5});
    REQUIRE(cert.certified);
    CHECK(cert.box[0].contains(Complex(0.5)));
    CHECK(cert.real_certified);
    CHECK(recheck(sys, s, cert));

    auto far = krawczyk_certify(sys, s, std::vector<Complex>{0.9});
    CHECK_FALSE(far.certified);
    CHECK_FALSE(far.reason.empty());

    // x = 1/3 for s = (1, 2): 1/3 is not a binary64 value, the box must still hold it.
    auto s12 = parameter_box(std::vector<Rational>{Rational(1), Rational(2)});
    auto third = krawczyk_certify(sys, s12, std::vector<Complex>{1.0 / 3.0});
    REQUIRE(third.certified);
    CHECK(Rational(third.box[0].re.lo) < Rational(1, 3));
    CHECK(Rational(third.box[0].re.hi) > Rational(1, 3));
    CHECK_FALSE(recheck(sys, s, third));
}

TEST_CASE("CHY m=6 at the example data: all certified and real")
{
    auto model = chy_model(6);
    auto sys = gradient(build_potential(model));
    auto data = order_counts(model, read_data(std::string(MLSOLVE_TEST_DATA) + "/chy6_example.json"));
    auto set = solve_at(model, sys, data);
    REQUIRE(set.points.size() == 6);
    auto box = parameter_box(set);
    auto summary = certify_set(sys, box, set.points);
    CHECK(summary.certified == 6);
    CHECK(summary.distinct == 6);
    CHECK(summary.real_certified == 6);
    CHECK(summary.heuristic_real == 6);
    for (const auto& p : set.points) {
        CHECK(recheck(sys, box, *p.certificate));
        // Containment is strict in every real and imaginary part.
        for (std::size_t i = 0; i < p.x.size(); ++i)
            CHECK(p.certificate->box[i].interior_contains(p.certificate->image[i]));
    }

    // A repeated point does not add a distinct solution.
    auto doubled = set.points;
    doubled.push_back(set.points[2]);
    auto again = certify_set(sys, box, doubled, {}, 1);
    CHECK(again.certified == 7);
    CHECK(again.distinct == 6);
    CHECK(again.cluster[6] == again.cluster[2]);
}

TEST_CASE("certified boxes are closed under conjugation for real data")
{
    auto model = cegm3_model(6);
    auto sys = gradient(build_potential(model));
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> u(1, 40);
    std::vector<Rational> data(model.num_states());
    for (auto& q : data)
        q = Rational(u(rng));
    auto set = solve_at(model, sys, data);
    REQUIRE(set.points.size() == 26);
    auto box = parameter_box(set);
    auto summary = certify_set(sys, box, set.points);
    CHECK(summary.certified == 26);
    CHECK(summary.distinct == 26);
    CHECK(summary.real_certified == 26);

    // Complex data: no point may claim a real certificate, conjugates still certify
    // against the conjugate data.
    std::vector<Complex> cs(model.num_states());
    for (std::size_t k = 0; k < cs.size(); ++k)
        cs[k] = Complex(to_double(data[k]), 0.25 * static_cast<double>(k % 3));
    std::vector<std::vector<Complex>> starts;
    for (const auto& p : set.points)
        starts.push_back(p.x);
    std::vector<Complex> real_s;
    for (const auto& q : data)
        real_s.emplace_back(to_double(q));
    auto cset = parameter_homotopy(sys, starts, real_s, cs);
    REQUIRE(cset.points.size() == 26);
    std::vector<Complex> conj_s(cs.size());
    for (std::size_t k = 0; k < cs.size(); ++k)
        conj_s[k] = std::conj(cs[k]);
    auto cbox = parameter_box(std::span<const Complex>(cs));
    auto conj_box = parameter_box(std::span<const Complex>(conj_s));
    CHECK_FALSE(cbox.real);
    auto csum = certify_set(sys, cbox, cset.points);
    CHECK(csum.distinct == 26);
    CHECK(csum.real_certified == 0);
    for (const auto& p : cset.points) {
        std::vector<Complex> c(p.x.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            c[i] = std::conj(p.x[i]);
        CHECK(krawczyk_certify(sys, conj_box, c).certified);
    }
}

TEST_CASE("parallel and serial certification agree")
{
    auto model = chy_model(7);
    auto sys = gradient(build_potential(model));
    std::vector<Rational> data(model.num_states());
    for (std::size_t k = 0; k < data.size(); ++k)
        data[k] = Rational(static_cast<long>(3 + (7 * k) % 11));
    auto set = solve_at(model, sys, data);
    REQUIRE(set.points.size() == 24);
    auto box = parameter_box(set);
    auto a = set.points, b = set.points;
    auto sa = certify_set(sys, box, a, {}, 1);
    auto sb = certify_set(sys, box, b, {}, 4);
    CHECK(sa.distinct == 24);
    CHECK(sa.real_certified == 24);
    CHECK(sa.cluster == sb.cluster);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < a[i].x.size(); ++k) {
            CHECK(a[i].certificate->box[k].re.lo == b[i].certificate->box[k].re.lo);
            CHECK(a[i].certificate->box[k].im.hi == b[i].certificate->box[k].im.hi);
        }
}

TEST_CASE("exact residual evaluation")
{
    auto sys = line_system();
    std::vector<ExactComplex> s{Rational(1), Rational(2)};
    std::vector<ExactComplex> half{ExactComplex(0.5)};
    auto f = evaluate<ExactComplex>(sys, half, s);
    // 1/x - 2/(1-x) at 1/2
    CHECK(f[0].re == Rational(-2));
    CHECK(f[0].im == 0);
    std::vector<ExactComplex> third{ExactComplex(Rational(1, 3))};
    CHECK(evaluate<ExactComplex>(sys, third, s)[0].re == 0);
    auto box = f[0].enclosure();
    CHECK(box.re.lo == -2.0);
    CHECK(box.re.hi == -2.0);
}
