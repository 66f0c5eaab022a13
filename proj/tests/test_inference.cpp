#include "doctest.h"

#include "mlsolve/errors.hpp"
#include "mlsolve/inference.hpp"

#include <filesystem>
#include <random>

using namespace mlsolve;

namespace {

std::string scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("mlsolve-test-" + name);
    std::filesystem::remove_all(dir);
    return dir.string();
}

InferenceOptions options_for(const std::string& name)
{
    InferenceOptions o;
    o.cache_dir = scratch_dir(name);
    return o;
}

std::vector<Rational> random_counts(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(1, 50);
    std::vector<Rational> v(n);
    for (auto& q : v)
        q = Rational(u(rng));
    return v;
}

std::vector<Rational> example_data(const ModelSpec& model, const char* file)
{
    return order_counts(model, read_data(std::string(MLSOLVE_TEST_DATA) + "/" + file));
}

} // namespace

TEST_CASE("CHY solution counts with certification and the ordering bijection")
{
    auto opt = options_for("chy-counts");
    for (int m = 4; m <= 8; ++m) {
        auto model = chy_model(m);
        auto sys = gradient(build_potential(model));
        auto report = solve_model(model, sys, random_counts(model.num_states(), 100 + m), opt);
        const auto expect = factorial(m - 3);
        CHECK(report.set.points.size() == expect);
        REQUIRE(report.summary);
        CHECK(report.summary->distinct == expect);
        CHECK(report.summary->real_certified == expect);
        CHECK(report.set.complete);
        auto v = varchenko_check(model, report.set);
        CHECK(v.all_real);
        CHECK(v.orderings_bijective);
    }
}

TEST_CASE("CHY m=6 example: solutions, MLE and learned distribution")
{
    auto opt = options_for("chy6");
    auto model = chy_model(6);
    auto sys = gradient(build_potential(model));
    auto data = example_data(model, "chy6_example.json");
    auto res = mle(model, sys, data, MLEMode::full, opt);
    CHECK(res.domain_points == 1);
    CHECK(std::abs(res.x[0] - 0.240043275929170) < 1e-8);
    CHECK(std::abs(res.x[1] - 0.508172206739870) < 1e-8);
    CHECK(std::abs(res.x[2] - 0.777005866817260) < 1e-8);
    const std::pair<const char*, double> learned[] = {{"23", 0.13336}, {"24", 0.16939}, {"25", 0.08633},
                                                      {"34", 0.02979}, {"35", 0.05966}, {"36", 0.25332},
                                                      {"45", 0.02987}, {"46", 0.16394}, {"56", 0.07433}};
    for (const auto& [label, value] : learned)
        CHECK(std::abs(res.p[*model.state_index(label)] - value) < 5e-6);
    REQUIRE(res.report);
    CHECK(res.report->summary->real_certified == 6);
}

TEST_CASE("closed-form MLEs")
{
    auto opt = options_for("closed");
    auto line = simplex_model(1);
    auto lsys = gradient(build_potential(line));
    // p = (1 - x, x)
    auto r = mle(line, lsys, {Rational(1), Rational(3)}, MLEMode::full, opt);
    CHECK(r.x[0] == doctest::Approx(0.75).epsilon(1e-12));
    auto fast = mle(line, lsys, {Rational(1), Rational(3)}, MLEMode::fast, opt);
    CHECK(fast.x[0] == doctest::Approx(0.75).epsilon(1e-12));

    ModelDescriptor desc;
    desc.family = Family::simplex;
    desc.n = 2;
    desc.chart = true;
    auto tri = make_model(desc);
    auto tsys = gradient(build_potential(tri));
    std::vector<Rational> s{Rational(4), Rational(7), Rational(13)};
    auto t = mle(tri, tsys, s, MLEMode::full, opt);
    CHECK(t.x[0] == doctest::Approx(7.0 / 4.0).epsilon(1e-12));
    CHECK(t.x[1] == doctest::Approx(13.0 / 4.0).epsilon(1e-12));
}

TEST_CASE("fast and full MLE agree on a linear model")
{
    auto opt = options_for("linear");
    auto model = random_linear_model(7, 3, 11);
    auto sys = gradient(build_potential(model));
    auto data = random_counts(model.num_states(), 5);
    auto full = mle(model, sys, data, MLEMode::full, opt);
    auto fast = mle(model, sys, data, MLEMode::fast, opt);
    REQUIRE(full.x.size() == fast.x.size());
    for (std::size_t i = 0; i < full.x.size(); ++i)
        CHECK(std::abs(full.x[i] - fast.x[i]) < 1e-10);
    CHECK(full.domain_points == 1);
    CHECK(varchenko_check(model, full.report->set).all_real);
    CHECK(full.report->set.points.size() == binomial(7, 3));
    auto tensor = tensor_model(2, 2, 4);
    CHECK_THROWS_AS(mle(tensor, gradient(build_potential(tensor)), random_counts(5, 1), MLEMode::fast, opt),
                    SolveError);
}

TEST_CASE("start-system cache round trip, staleness and ownership")
{
    auto opt = options_for("cache");
    auto model = chy_model(7);
    auto sys = gradient(build_potential(model));
    auto data = random_counts(model.num_states(), 9);
    auto first = solve_model(model, sys, data, opt);
    const auto path = cache_path(model, opt.cache_dir);
    REQUIRE(std::filesystem::exists(path));
    auto second = solve_model(model, sys, data, opt);
    REQUIRE(first.set.points.size() == second.set.points.size());
    for (std::size_t i = 0; i < first.set.points.size(); ++i)
        for (std::size_t j = 0; j < first.set.points[i].x.size(); ++j)
            CHECK(std::abs(first.set.points[i].x[j] - second.set.points[i].x[j]) < 1e-10);

    auto loaded = load_start_system(model, sys, path);
    CHECK(loaded.solutions.size() == 24);
    CHECK(loaded.complete);

    // Another model's cache is refused.
    auto other = chy_model(6);
    CHECK_THROWS_AS(load_start_system(other, gradient(build_potential(other)), path), CacheError);

    // A perturbed solution makes the cache stale.
    auto tampered = loaded;
    tampered.solutions[3][0] += 1e-3;
    write_file_atomic(path, cache_to_json(tampered));
    CHECK_THROWS_AS(load_start_system(model, sys, path), CacheError);
    write_file_atomic(path, "{\"format\": \"mlsolve-start-system\", \"version\": 99}");
    CHECK_THROWS_AS(load_start_system(model, sys, path), CacheError);
}

TEST_CASE("solutions file round trip")
{
    auto opt = options_for("solutions");
    auto model = chy_model(6);
    auto sys = gradient(build_potential(model));
    auto report = solve_model(model, sys, example_data(model, "chy6_example.json"), opt);
    auto text = solutions_to_json(report.set, model, report.summary);
    auto back = solutions_from_json(text, &model);
    CHECK(solutions_to_json(back.set, model, back.summary) == text);
    REQUIRE(back.summary);
    CHECK(back.summary->distinct == 6);
    auto box = parameter_box(back.set);
    for (const auto& p : back.set.points)
        CHECK(recheck(sys, box, *p.certificate));
    auto other = chy_model(7);
    CHECK_THROWS_AS(solutions_from_json(text, &other), DataError);
    auto bumped = text;
    bumped.replace(bumped.find("\"version\": 1"), 12, "\"version\": 2");
    CHECK_THROWS_AS(solutions_from_json(bumped, &model), FormatError);
}

TEST_CASE("ML degree estimates")
{
    auto opt = options_for("mldegree");
    {
        auto model = chy_model(6);
        auto r = ml_degree(model, gradient(build_potential(model)), opt);
        CHECK(r.estimate == 6);
        CHECK(r.certified_lower_bound == 6);
        CHECK(r.stabilized);
    }
    {
        auto model = cegm3_model(6);
        auto r = ml_degree(model, gradient(build_potential(model)), opt);
        CHECK(r.estimate == 26);
        CHECK(r.certified_lower_bound == 26);
    }
    {
        auto model = tensor_model(2, 2, 4);
        auto r = ml_degree(model, gradient(build_potential(model)), opt);
        CHECK(r.group_order == 2);
        CHECK(r.gradient_zeros == 24);
        CHECK(r.estimate == 12);
        CHECK(r.certified_lower_bound == 24);
    }
}
