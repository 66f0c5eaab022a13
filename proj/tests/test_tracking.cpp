#include "doctest.h"

#include "mlsolve/errors.hpp"
#include "mlsolve/monodromy.hpp"

#include <algorithm>

using namespace mlsolve;

namespace {

RationalSystem line_system()
{
    auto g = std::make_shared<ExprGraph>(1, 2);
    Potential pot(g, {{0, g->var(0)}, {1, g->sub(g->one(), g->var(0))}}, true);
    return gradient(pot);
}

std::vector<Complex> to_complex(const std::vector<double>& v) { return {v.begin(), v.end()}; }

} // namespace

TEST_CASE("one-dimensional homotopy follows the closed form")
{
    auto sys = line_system();
    std::vector<Complex> x{0.5}, s0{1.0, 1.0}, s1{1.0, 3.0};
    auto out = track_path(sys, x, s0, s1);
    REQUIRE(out.status == PathStatus::success);
    CHECK(std::abs(out.end[0] - 0.25) < 1e-12);
    CHECK(out.t == 1.0);
    CHECK(out.residual <= 1e-11);

    TrackerOptions real;
    real.field = Field::real;
    auto rout = track_path(sys, x, s0, s1, real);
    REQUIRE(rout.status == PathStatus::success);
    CHECK(std::abs(rout.end[0] - 0.25) < 1e-12);

    auto same = track_path(sys, x, s0, s0);
    CHECK(same.status == PathStatus::success);
    CHECK(same.steps <= 1);
    CHECK(std::abs(same.end[0] - 0.5) < 1e-14);
}

TEST_CASE("tracker rejects bad input")
{
    auto sys = line_system();
    std::vector<Complex> far{0.9}, s0{1.0, 1.0}, s1{1.0, 3.0};
    CHECK(track_path(sys, far, s0, s1).status == PathStatus::corrector_failure);
    TrackerOptions bad;
    bad.shrink = 1.5;
    CHECK_THROWS_AS(track_path(sys, std::vector<Complex>{0.5}, s0, s1, bad), SolveError);

    auto tensor = tensor_model(2, 2, 4);
    auto tsys = gradient(build_potential(tensor));
    TrackerOptions real;
    real.field = Field::real;
    std::vector<Complex> x(3, 0.3), ts0(5, 1.0), ts1(5, 2.0);
    CHECK_THROWS_AS(track_path(tsys, x, ts0, ts1, real), SolveError);

    auto empty = parameter_homotopy(sys, {}, s0, s1);
    CHECK(empty.points.empty());
}

TEST_CASE("CHY m=6 homotopy reaches the six known critical points")
{
    auto model = chy_model(6);
    auto sys = gradient(build_potential(model));
    MonodromyOptions mo;
    mo.target = 6;
    mo.workers = 1;
    auto mono = monodromy_solve(model, sys, std::nullopt, {}, mo);
    REQUIRE(mono.solutions.points.size() == 6);
    std::vector<std::vector<Complex>> starts;
    for (const auto& p : mono.solutions.points)
        starts.push_back(p.x);

    auto data = to_complex({25, 23, 16, 12, 22, 16, 14, 15, 27});
    // state order is 23 24 25 34 35 36 45 46 56
    std::vector<Complex> s(model.num_states());
    const char* labels[] = {"23", "24", "25", "34", "35", "45", "36", "46", "56"};
    for (int i = 0; i < 9; ++i)
        s[*model.state_index(labels[i])] = data[i];

    auto serial = parameter_homotopy(sys, starts, mono.s_star, s, {}, 1);
    REQUIRE(serial.points.size() == 6);
    const double table[6][3] = {{0.240043275929170, 0.508172206739870, 0.777005866817260},
                                {0.223437550855307, 0.843543048681696, 0.518706389808326},
                                {0.481967726451097, 0.235545240880672, 0.781115679885971},
                                {0.618277926209287, 0.851974456945199, 0.155992558374125},
                                {0.861996060709608, 0.217605043343923, 0.453238947004789},
                                {0.863192417250353, 0.578669456252017, 0.157960116395912}};
    for (const auto& row : table) {
        bool found = false;
        for (const auto& p : serial.points) {
            double err = 0.0;
            for (int j = 0; j < 3; ++j)
                err = std::max(err, std::abs(p.x[j] - row[j]));
            found = found || err < 1e-8;
        }
        CHECK(found);
    }

    // Same endpoints when the starts are permuted and tracked concurrently.
    std::reverse(starts.begin(), starts.end());
    auto parallel = parameter_homotopy(sys, starts, mono.s_star, s, {}, 4);
    REQUIRE(parallel.points.size() == 6);
    for (const auto& p : serial.points) {
        bool found = false;
        for (const auto& q : parallel.points)
            found = found || scaled_distance(p.x, q.x) < 1e-8;
        CHECK(found);
    }
}

TEST_CASE("real-field tracking on a linear model")
{
    auto model = random_linear_model(6, 3, 5);
    auto sys = gradient(build_potential(model));
    MonodromyOptions mo;
    mo.target = 20;
    auto mono = monodromy_solve(model, sys, std::nullopt, {}, mo);
    REQUIRE(mono.solutions.points.size() == 20);

    // Real start: complex homotopy to positive data s0, then real tracking to s1.
    std::vector<Complex> s0(model.num_states()), s1(model.num_states());
    for (std::size_t k = 0; k < s0.size(); ++k) {
        s0[k] = 1.0 + static_cast<double>(k % 3);
        s1[k] = 7.0 - static_cast<double>(k % 4);
    }
    std::vector<std::vector<Complex>> starts;
    for (const auto& p : mono.solutions.points)
        starts.push_back(p.x);
    auto at_s0 = parameter_homotopy(sys, starts, mono.s_star, s0);
    REQUIRE(at_s0.points.size() == 20);
    std::vector<std::vector<Complex>> real_starts;
    for (const auto& p : at_s0.points) {
        std::vector<Complex> x(p.x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::abs(p.x[i].imag()) < 1e-8);
            x[i] = p.x[i].real();
        }
        refine(sys, x, s0, 1e-13);
        for (auto& v : x)
            v = v.real();
        real_starts.push_back(x);
    }
    TrackerOptions real;
    real.field = Field::real;
    auto rset = parameter_homotopy(sys, real_starts, s0, s1, real);
    CHECK(rset.points.size() == 20);
    auto cset = parameter_homotopy(sys, real_starts, s0, s1);
    REQUIRE(cset.points.size() == 20);
    for (const auto& p : rset.points) {
        bool found = false;
        for (const auto& q : cset.points)
            found = found || scaled_distance(p.x, q.x) < 1e-8;
        CHECK(found);
    }
}
