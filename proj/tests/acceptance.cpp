// One line per criterion: PASS or FAIL, the measured values and the wall time.
// Exit status is nonzero when a pass/fail criterion fails.

#include "mlsolve/amplitude.hpp"
#include "mlsolve/errors.hpp"
#include "mlsolve/exact.hpp"
#include "mlsolve/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace mlsolve;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

InferenceOptions options_for(const std::string& name)
{
    InferenceOptions o;
    auto dir = std::filesystem::temp_directory_path() / "mlsolve-acceptance" / name;
    std::filesystem::remove_all(dir);
    o.cache_dir = dir.string();
    return o;
}

std::vector<Rational> random_counts(std::size_t n, std::mt19937_64& rng, int hi = 50)
{
    std::uniform_int_distribution<int> u(1, hi);
    std::vector<Rational> v(n);
    for (auto& q : v)
        q = Rational(u(rng));
    return v;
}

std::vector<Rational> example(const ModelSpec& model, const char* file)
{
    return order_counts(model, read_data(std::string(MLSOLVE_TEST_DATA) + "/" + file));
}

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

// 1. CHY counts, certification, reality and the ordering bijection.
void chy_counts(Outcome& out)
{
    auto opt = options_for("chy-counts");
    std::mt19937_64 rng(2024);
    auto t0 = Clock::now();
    for (int m = 4; m <= 8; ++m) {
        auto model = chy_model(m);
        auto sys = gradient(build_potential(model));
        auto report = solve_model(model, sys, random_counts(model.num_states(), rng), opt);
        const auto expect = factorial(m - 3);
        const auto& s = *report.summary;
        auto v = varchenko_check(model, report.set);
        out.detail << " m=" << m << ":" << s.distinct << "/" << s.real_certified;
        out.require(s.distinct == expect && s.certified == expect && report.set.points.size() == expect,
                    "m=" + std::to_string(m) + " count");
        out.require(s.real_certified == expect && v.all_real, "m=" + std::to_string(m) + " real");
        out.require(v.orderings_bijective, "m=" + std::to_string(m) + " orderings");
    }
    const double t = seconds_since(t0);
    out.detail << " time=" << t << "s";
    out.require(t < 10.0, "time < 10 s");
}

// 2. CHY m=6 at the example data.
void chy6_example(Outcome& out)
{
    auto opt = options_for("chy6");
    auto model = chy_model(6);
    auto sys = gradient(build_potential(model));
    auto data = example(model, "chy6_example.json");
    const double triples[6][3] = {{0.240043275929170, 0.508172206739870, 0.777005866817260},
                                  {0.223437550855307, 0.843543048681696, 0.518706389808326},
                                  {0.481967726451097, 0.235545240880672, 0.781115679885971},
                                  {0.618277926209287, 0.851974456945199, 0.155992558374125},
                                  {0.861996060709608, 0.217605043343923, 0.453238947004789},
                                  {0.863192417250353, 0.578669456252017, 0.157960116395912}};
    auto t0 = Clock::now();
    auto res = mle(model, sys, data, MLEMode::full, opt);
    const double t = seconds_since(t0);
    const auto& set = res.report->set;
    out.require(set.points.size() == 6 && res.report->summary->distinct == 6, "six certified solutions");
    double worst = 0.0;
    for (const auto& row : triples) {
        double best = 1e300;
        for (const auto& p : set.points) {
            double d = 0.0;
            for (int i = 0; i < 3; ++i)
                d = std::max(d, std::abs(p.x[i] - Complex(row[i])));
            best = std::min(best, d);
        }
        worst = std::max(worst, best);
    }
    out.detail << " triples max dev=" << worst;
    out.require(worst < 1e-8, "triples to 1e-8");
    double mle_dev = 0.0;
    for (int i = 0; i < 3; ++i)
        mle_dev = std::max(mle_dev, std::fabs(res.x[i] - triples[0][i]));
    out.detail << " mle dev=" << mle_dev;
    out.require(mle_dev < 1e-8, "MLE is the first triple");
    const std::pair<const char*, double> learned[] = {{"23", 0.13336}, {"24", 0.16939}, {"25", 0.08633},
                                                      {"34", 0.02979}, {"35", 0.05966}, {"36", 0.25332},
                                                      {"45", 0.02987}, {"46", 0.16394}, {"56", 0.07433}};
    double p_dev = 0.0;
    for (const auto& [label, value] : learned)
        p_dev = std::max(p_dev, std::fabs(res.p[*model.state_index(label)] - value));
    out.detail << " p dev=" << p_dev << " time=" << t << "s";
    out.require(p_dev <= 5e-6, "p to 5 decimals");
    out.require(t < 1.0, "time < 1 s");
}

// 3. CEGM ML degrees and the m=7 example.
void cegm_degrees(Outcome& out, const InferenceOptions& shared)
{
    {
        auto opt = options_for("cegm6");
        auto model = cegm3_model(6);
        auto t0 = Clock::now();
        auto r = ml_degree(model, gradient(build_potential(model)), opt);
        const double t = seconds_since(t0);
        out.detail << " m=6 bound=" << r.certified_lower_bound << " (" << t << "s)";
        out.require(r.certified_lower_bound == 26, "m=6 bound 26");
        out.require(t < 5.0, "m=6 time < 5 s");
    }
    auto model = cegm3_model(7);
    auto sys = gradient(build_potential(model));
    auto t0 = Clock::now();
    MLDegreeOptions deg;
    deg.stability_runs = 1;
    deg.max_runs = 1;
    auto r = ml_degree(model, sys, shared, deg);
    const double t = seconds_since(t0);
    out.detail << " m=7 bound=" << r.certified_lower_bound << " (" << t << "s)";
    out.require(r.certified_lower_bound == 1272, "m=7 bound 1272");
    out.require(t < 180.0, "m=7 time < 3 min");

    auto report = solve_model(model, sys, example(model, "cegm7_example.json"), shared);
    const auto& s = *report.summary;
    out.detail << " example distinct=" << s.distinct << " real=" << s.real_certified;
    out.require(s.distinct == 1272 && s.certified == s.points, "example distinct 1272");
    out.require(s.real_certified == 1210, "example real 1210");
}

// 4. Tensor ML degrees and the (3,2,3) example.
void tensor_degrees(Outcome& out)
{
    struct Case {
        int m, k, l;
        std::size_t zeros, degree;
    };
    for (const Case& c : {Case{2, 2, 4, 24, 12}, Case{2, 2, 5, 78, 39}, Case{2, 2, 6, 164, 82}, Case{3, 2, 3, 242, 121}}) {
        auto opt = options_for("tensor");
        auto model = tensor_model(c.m, c.k, c.l);
        auto t0 = Clock::now();
        auto r = ml_degree(model, gradient(build_potential(model)), opt);
        const double t = seconds_since(t0);
        const std::string tag = "(" + std::to_string(c.m) + "," + std::to_string(c.k) + "," + std::to_string(c.l) + ")";
        out.detail << " " << tag << "=" << r.gradient_zeros << "/" << r.group_order << "=" << r.estimate << " (" << t
                   << "s)";
        out.require(r.stabilized && r.gradient_zeros == c.zeros && r.estimate == c.degree, tag + " degree");
        out.require(t < 120.0, tag + " time < 2 min");
    }
    auto opt = options_for("tensor323");
    auto model = tensor_model(3, 2, 3);
    auto res = mle(model, gradient(build_potential(model)), example(model, "tensor323_example.json"), MLEMode::full,
                   opt);
    const std::pair<const char*, double> learned[] = {{"300", 0.0661}, {"210", 0.1585}, {"201", 0.0937},
                                                      {"120", 0.1269}, {"111", 0.1542}, {"102", 0.0711},
                                                      {"030", 0.0340}, {"021", 0.0658}, {"012", 0.0883},
                                                      {"003", 0.1414}};
    double p_dev = 0.0;
    for (const auto& [label, value] : learned)
        p_dev = std::max(p_dev, std::fabs(res.p[*model.state_index(label)] - value));
    out.detail << " example points=" << res.report->summary->distinct << " domain=" << res.domain_points
               << " p dev=" << p_dev;
    out.require(res.report->summary->distinct == 242, "example 242 points");
    out.require(res.domain_points == 16, "example 16 domain points");
    out.require(p_dev <= 5e-5, "example p to 4 decimals");
}

// 5. Random linear model (12, 6).
void linear_model(Outcome& out)
{
    auto opt = options_for("linear");
    auto model = random_linear_model(12, 6, 7);
    auto sys = gradient(build_potential(model));
    std::mt19937_64 rng(12);
    auto data = random_counts(model.num_states(), rng);
    auto t0 = Clock::now();
    auto full = mle(model, sys, data, MLEMode::full, opt);
    auto fast = mle(model, sys, data, MLEMode::fast, opt);
    const double t = seconds_since(t0);
    const auto& s = *full.report->summary;
    double dev = 0.0;
    for (std::size_t i = 0; i < full.x.size(); ++i)
        dev = std::max(dev, std::fabs(full.x[i] - fast.x[i]));
    out.detail << " distinct=" << s.distinct << " real=" << s.real_certified << " fast/full dev=" << dev
               << " time=" << t << "s";
    out.require(s.distinct == 924 && s.certified == s.points, "924 certified");
    out.require(s.real_certified == 924 && varchenko_check(model, full.report->set).all_real, "all real");
    out.require(dev < 1e-10, "fast and full MLE agree");
    out.require(t < 30.0, "time < 30 s");
}

// 6. Amplitudes against closed forms and the CEGM m=7 value.
void amplitudes(Outcome& out, const InferenceOptions& shared)
{
    auto opt = options_for("amplitude");
    ModelDescriptor tri_desc;
    tri_desc.family = Family::simplex;
    tri_desc.n = 2;
    tri_desc.chart = true;
    const std::pair<ModelSpec, OracleKind> cases[] = {{make_model(tri_desc), OracleKind::triangle},
                                                     {independence_model(), OracleKind::square},
                                                     {positive_chart(chy_model(6)), OracleKind::associahedron_m6}};
    std::mt19937_64 rng(66);
    for (const auto& [model, kind] : cases) {
        double worst = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            auto s = random_counts(model.num_states(), rng, 60);
            auto r = amplitude(model, s, opt);
            worst = std::max(worst, rel(r.value, to_double(oracle_amplitude(kind, s))));
        }
        out.detail << " " << oracle_name(kind) << " max rel=" << worst;
        out.require(worst < 1e-9, oracle_name(kind));
    }
    auto chy6 = positive_chart(chy_model(6));
    auto data6 = example(*chy6.chart->base, "chy6_example.json");
    const Rational exact6 = parse_rational("16074421/56770632000");
    auto r6 = amplitude(chy6, data6, opt);
    out.detail << " example m=6 rel=" << rel(r6.value, to_double(exact6));
    out.require(oracle_amplitude(OracleKind::associahedron_m6, data6) == exact6, "m=6 exact value");
    out.require(rel(r6.value, to_double(exact6)) < 1e-9, "m=6 example");

    auto cegm7 = positive_chart(cegm3_model(7));
    auto r7 = amplitude(cegm7, example(*cegm7.chart->base, "cegm7_example.json"), shared);
    const double ref = 3.5930250842e-19;
    out.detail << " cegm m=7 value=" << r7.value << " rel=" << rel(r7.value, ref) << " points=" << r7.points;
    out.require(r7.points == 1272, "m=7 points");
    out.require(rel(r7.value, ref) < 1e-6, "m=7 value");
}

// 7a. Gradient of Σ s log|p| against central differences.
double gradient_check(const ModelSpec& model, std::mt19937_64& rng)
{
    auto sys = gradient(build_potential(model));
    std::uniform_real_distribution<double> u(0.1, 0.9);
    std::vector<double> x(model.num_unknowns), s(model.num_states());
    for (auto& v : x)
        v = u(rng);
    std::sort(x.begin(), x.end());
    for (auto& v : s)
        v = 1.0 + 10.0 * u(rng);
    auto log_l = [&](const std::vector<double>& y) {
        auto p = evaluate_probabilities<double>(model, y);
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k)
            acc += s[k] * std::log(std::fabs(p[k]));
        return acc;
    };
    auto g = evaluate<double>(sys, x, s);
    double err = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = 1e-6;
        auto xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        err = std::max(err, std::fabs((log_l(xp) - log_l(xm)) / (2 * h) - g[j]));
        norm = std::max(norm, std::fabs(g[j]));
    }
    return err / std::max(norm, 1.0);
}

// 7b. Random expressions: the exact value lies in the interval image of any box
// holding the point, and a sub-box maps into the image of the box.
std::pair<std::size_t, std::size_t> interval_fuzz(std::size_t cases, std::mt19937_64& rng)
{
    std::size_t checked = 0, violations = 0;
    std::uniform_int_distribution<int> op(0, 5), var(0, 2), small(-5, 5), depth(1, 4);
    std::uniform_real_distribution<double> u(-2.0, 2.0), w(0.0, 0.3), frac(0.0, 1.0);
    for (std::size_t c = 0; c < cases; ++c) {
        ExprGraph g(3, 0);
        std::function<ExprId(int)> build = [&](int d) -> ExprId {
            if (d == 0)
                return op(rng) % 2 ? g.var(var(rng)) : g.constant(Rational(small(rng), 1 + std::abs(small(rng))));
            switch (op(rng)) {
            case 0:
                return g.add(build(d - 1), build(d - 1));
            case 1:
                return g.sub(build(d - 1), build(d - 1));
            case 2:
                return g.mul(build(d - 1), build(d - 1));
            case 3: {
                auto e = build(d - 1);
                return g.is_zero(e) ? e : g.reciprocal(e);
            }
            case 4:
                return g.power(build(d - 1), 2 + op(rng) % 2);
            default:
                return g.var(var(rng));
            }
        };
        ExprId root = build(depth(rng));
        Tape tape(g, std::span<const ExprId>(&root, 1));
        std::vector<Interval> box(3), sub(3);
        std::vector<ExactComplex> point(3);
        for (int i = 0; i < 3; ++i) {
            const double lo = u(rng), hi = lo + w(rng);
            box[i] = Interval(lo, hi);
            const double a = lo + frac(rng) * (hi - lo), b = a + frac(rng) * (hi - a);
            sub[i] = Interval(a, b);
            point[i] = ExactComplex(a + frac(rng) * (b - a));
        }
        try {
            std::vector<Interval> outer(1), inner(1), islots;
            std::vector<ExactComplex> exact(1), eslots;
            tape.eval<Interval>(box, {}, outer, islots);
            tape.eval<Interval>(sub, {}, inner, islots);
            tape.eval<ExactComplex>(point, {}, exact, eslots);
            ++checked;
            const auto& v = exact[0].re;
            const bool inside = Rational(inner[0].lo) <= v && v <= Rational(inner[0].hi);
            if (!inside || !outer[0].contains(inner[0]))
                ++violations;
        } catch (const SingularEvaluation&) {
        }
    }
    return {checked, violations};
}

void properties(Outcome& out)
{
    std::mt19937_64 rng(7);
    {
        double worst = 0.0;
        for (const auto& model : {chy_model(6), chy_model(8), cegm3_model(6), cegm3_model(7), random_linear_model(7, 3, 5),
                                  tensor_model(2, 2, 4), tensor_model(3, 2, 3), simplex_model(3), independence_model(),
                                  positive_chart(chy_model(6))})
            worst = std::max(worst, gradient_check(model, rng));
        out.detail << " gradient fd rel=" << worst;
        out.require(worst < 1e-6, "gradient vs finite differences");
    }
    {
        auto [checked, bad] = interval_fuzz(10000, rng);
        out.detail << " interval fuzz " << checked << " checked, " << bad << " violations";
        out.require(bad == 0 && checked >= 5000, "interval inclusion");
    }
    {
        auto opt = options_for("properties");
        std::size_t rechecked = 0, failed = 0, uncertified = 0, orbit_misses = 0;
        for (const auto& model : {chy_model(7), cegm3_model(6), tensor_model(2, 2, 4), tensor_model(2, 2, 5)}) {
            auto sys = gradient(build_potential(model));
            auto report = solve_model(model, sys, random_counts(model.num_states(), rng), opt);
            auto box = parameter_box(report.set);
            for (const auto& p : report.set.points) {
                if (!p.certificate || !p.certificate->certified) {
                    ++uncertified;
                } else {
                    ++rechecked;
                    if (!recheck(sys, box, *p.certificate))
                        ++failed;
                }
                for (const auto& gmap : model.group) {
                    auto y = gmap.apply(p.x);
                    bool found = false;
                    for (const auto& q : report.set.points)
                        found = found || scaled_distance(y, q.x) < 1e-8;
                    orbit_misses += found ? 0 : 1;
                }
            }
        }
        out.detail << " krawczyk recheck " << rechecked - failed << "/" << rechecked << " (uncertified " << uncertified
                   << ") orbit misses=" << orbit_misses;
        out.require(failed == 0, "Krawczyk recheck");
        out.require(orbit_misses == 0, "orbit closure");
    }
    {
        std::size_t nonzero = 0;
        std::uniform_int_distribution<int> u(-40, 40);
        for (int m = 4; m <= 12; ++m) {
            std::vector<Rational> c(chy_model(m).num_states());
            for (auto& v : c)
                v = Rational(u(rng), 1 + std::abs(u(rng)));
            auto full = complete_k2(c, m);
            for (int i = 1; i <= m; ++i)
                nonzero += full.row_sum(i) != 0;
            nonzero += restrict_k2(full) != c;
        }
        for (int m = 6; m <= 9; ++m) {
            std::vector<Rational> c(cegm3_model(m).num_states());
            for (auto& v : c)
                v = Rational(u(rng), 1 + std::abs(u(rng)));
            auto full = complete_k3(c, m);
            for (int i = 1; i <= m; ++i)
                nonzero += full.slice_sum(i) != 0;
            nonzero += restrict_k3(full) != c;
        }
        out.detail << " kinematics nonzero sums=" << nonzero;
        out.require(nonzero == 0, "kinematics sums");
    }
    {
        auto opt = options_for("scaling");
        const Rational lambda(7, 3);
        ModelDescriptor tri;
        tri.family = Family::simplex;
        tri.n = 2;
        tri.chart = true;
        double worst = 0.0;
        for (const auto& model : {make_model(tri), independence_model(), positive_chart(chy_model(6))}) {
            auto s = random_counts(model.num_states(), rng);
            auto scaled = s;
            for (auto& q : scaled)
                q *= lambda;
            auto a = amplitude(model, s, opt);
            auto b = amplitude(model, scaled, opt);
            worst = std::max(worst, rel(b.value, a.value * std::pow(to_double(lambda), -a.dimension)));
        }
        out.detail << " scaling rel=" << worst;
        out.require(worst < 1e-9, "amplitude scaling");
    }
    {
        auto opt = options_for("roundtrip");
        auto model = cegm3_model(6);
        auto sys = gradient(build_potential(model));
        auto cache = obtain_start_system(model, sys, opt);
        auto text = cache_to_json(cache);
        const bool cache_same = cache_to_json(cache_from_json(text)) == text;
        auto loaded = load_start_system(model, sys, cache_path(model, opt.cache_dir));
        const bool file_same = cache_to_json(loaded) == text;
        auto report = solve_model(model, sys, random_counts(model.num_states(), rng), opt);
        auto sol = solutions_to_json(report.set, model, report.summary);
        auto back = solutions_from_json(sol, &model);
        const bool sol_same = solutions_to_json(back.set, model, back.summary) == sol;
        out.detail << " cache round trip=" << (cache_same && file_same) << " solutions round trip=" << sol_same;
        out.require(cache_same && file_same && sol_same, "round trip identity");
    }
}

// 8. CHY m=10 wall time.
void chy10(Outcome& out)
{
    auto opt = options_for("chy10");
    auto model = chy_model(10);
    auto sys = gradient(build_potential(model));
    std::mt19937_64 rng(10);
    auto t0 = Clock::now();
    auto report = solve_model(model, sys, random_counts(model.num_states(), rng), opt);
    const double t = seconds_since(t0);
    out.detail << " solutions=" << report.summary->distinct << " time=" << t << "s";
    out.require(report.summary->distinct == 5040, "5040 solutions");
    out.require(t <= 60.0, "time <= 60 s");
}

} // namespace

int main(int argc, char** argv)
{
    // Optional arguments select criteria by number.
    std::vector<std::string> only(argv + 1, argv + argc);
    auto shared = options_for("cegm7");
    struct Criterion {
        const char* name;
        std::function<void(Outcome&)> run;
        bool informational;
    };
    const Criterion criteria[] = {
        {"1 chy counts m=4..8", chy_counts, false},
        {"2 chy m=6 example", chy6_example, false},
        {"3 cegm degrees", [&](Outcome& o) { cegm_degrees(o, shared); }, false},
        {"4 tensor degrees", tensor_degrees, false},
        {"5 linear (12,6)", linear_model, false},
        {"6 amplitudes", [&](Outcome& o) { amplitudes(o, shared); }, false},
        {"7 property suites", properties, false},
        {"8 chy m=10 timing (informational)", chy10, true},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), std::string(c.name, std::strchr(c.name, ' '))) == only.end())
            continue;
        Outcome out;
        auto t0 = Clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << " [exception: " << e.what() << "]";
        }
        std::printf("%s %s:%s (%.1fs)\n", out.pass ? "PASS" : "FAIL", c.name, out.detail.str().c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        if (!out.pass && !c.informational)
            ++failures;
    }
    return failures == 0 ? 0 : 1;
}
