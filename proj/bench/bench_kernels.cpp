// Serial reference (workers = 1) against the OpenMP kernels (workers = 0).

#include "mlsolve/amplitude.hpp"
#include "mlsolve/monodromy.hpp"

#include <benchmark/benchmark.h>

using namespace mlsolve;

namespace {

struct Fixture {
    ModelSpec model = chy_model(8);
    RationalSystem sys = gradient(build_potential(model));
    std::vector<Rational> data;
    std::vector<Complex> s_data;
    std::vector<std::vector<Complex>> starts;
    std::vector<Complex> s_star;
    SolutionSet set;
    ModelSpec chart = positive_chart(model);
    std::vector<std::vector<Complex>> chart_pts;

    Fixture()
    {
        for (std::size_t k = 0; k < model.num_states(); ++k)
            data.emplace_back(static_cast<long>(3 + (7 * k) % 13));
        for (const auto& q : data)
            s_data.emplace_back(to_double(q));
        MonodromyOptions mo;
        mo.target = factorial(5);
        auto r = monodromy_solve(model, sys, std::nullopt, {}, mo);
        s_star = r.s_star;
        for (const auto& p : r.solutions.points)
            starts.push_back(p.x);
        set = parameter_homotopy(sys, starts, s_star, s_data);
        set.exact_parameters = data;
        chart_pts = chart_points(chart, set);
    }
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

void BM_track(benchmark::State& state)
{
    const auto& f = fixture();
    for (auto _ : state) {
        auto out = track_all(f.sys, f.starts, f.s_star, f.s_data, {}, static_cast<int>(state.range(0)));
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(f.starts.size()));
}

void BM_certify(benchmark::State& state)
{
    const auto& f = fixture();
    auto box = parameter_box(f.data);
    for (auto _ : state) {
        auto points = f.set.points;
        auto summary = certify_set(f.sys, box, points, {}, static_cast<int>(state.range(0)));
        benchmark::DoNotOptimize(summary.distinct);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(f.set.points.size()));
}

void BM_amplitude(benchmark::State& state)
{
    const auto& f = fixture();
    for (auto _ : state) {
        auto r = amplitude(f.chart, f.data, f.chart_pts, static_cast<int>(state.range(0)));
        benchmark::DoNotOptimize(r.value);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(f.chart_pts.size()));
}

} // namespace

// Argument: workers (1 = serial reference, 0 = all OpenMP threads).
BENCHMARK(BM_track)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_certify)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_amplitude)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
