#include "mlsolve/inference.hpp"

#include "mlsolve/errors.hpp"
#include "mlsolve/registry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <set>

namespace mlsolve {

namespace {

std::vector<Complex> as_complex(const std::vector<Rational>& data)
{
    std::vector<Complex> s;
    s.reserve(data.size());
    for (const auto& q : data)
        s.emplace_back(to_double(q));
    return s;
}

bool nearly_real(std::span<const Complex> x, double tol = 1e-8)
{
    return std::all_of(x.begin(), x.end(), [&](const Complex& v) { return std::abs(v.imag()) < tol; });
}

std::vector<double> real_part(std::span<const Complex> x)
{
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        r[i] = x[i].real();
    return r;
}

MonodromyOptions monodromy_options(const InferenceOptions& options, std::uint64_t seed,
                                   std::optional<std::size_t> target)
{
    MonodromyOptions mo = options.monodromy;
    mo.seed = seed;
    mo.target = target;
    mo.workers = options.workers;
    mo.tracker = options.tracker;
    return mo;
}

/// Real start for the fast MLE path: the domain solution at all-ones data.
void attach_real_start(const ModelSpec& model, const RationalSystem& sys, StartSystemCache& cache,
                       const InferenceOptions& options)
{
    std::vector<Rational> ones(model.num_states(), Rational(1));
    auto set = parameter_homotopy(sys, cache.solutions, cache.s_star, as_complex(ones), options.tracker,
                                  options.workers);
    for (const auto& p : set.points) {
        if (!nearly_real(p.x))
            continue;
        std::vector<Complex> x(p.x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = p.x[i].real();
        refine(sys, x, as_complex(ones), 1e-14);
        auto xr = real_part(x);
        if (in_domain(model, xr, options.domain_tolerance)) {
            cache.real_parameters = ones;
            cache.real_start = xr;
            return;
        }
    }
}

} // namespace

std::string default_cache_dir()
{
    if (const char* d = std::getenv("MLSOLVE_CACHE_DIR"); d && *d)
        return d;
    if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x)
        return std::string(x) + "/mlsolve";
    if (const char* h = std::getenv("HOME"); h && *h)
        return std::string(h) + "/.cache/mlsolve";
    return ".mlsolve-cache";
}

std::string cache_path(const ModelSpec& model, const std::string& dir)
{
    std::string name = model.descriptor.canonical();
    for (char& c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)))
            c = '_';
    return (std::filesystem::path(dir) / (name + "-" + model.digest() + ".json")).string();
}

StartSystemCache prepare_start_system(const ModelSpec& model, const RationalSystem& sys,
                                      const InferenceOptions& options)
{
    std::optional<std::size_t> target;
    if (model.known_solution_count)
        target = static_cast<std::size_t>(*model.known_solution_count);
    auto result = monodromy_solve(model, sys, std::nullopt, {}, monodromy_options(options, options.seed, target));
    StartSystemCache cache;
    cache.model = model.descriptor.canonical();
    cache.model_digest = model.digest();
    cache.s_star = result.s_star;
    cache.seed = options.seed;
    cache.expected = target;
    cache.complete = result.reached_target;
    for (auto& p : result.solutions.points)
        cache.solutions.push_back(std::move(p.x));
    if (model.linear)
        attach_real_start(model, sys, cache, options);
    return cache;
}

StartSystemCache load_start_system(const ModelSpec& model, const RationalSystem& sys, const std::string& path)
{
    StartSystemCache cache;
    try {
        cache = cache_from_json(read_file(path));
    } catch (const FormatError& e) {
        throw CacheError(path + ": " + e.what());
    }
    if (cache.model_digest != model.digest())
        throw CacheError(path + ": cache belongs to " + cache.model + " (digest " + cache.model_digest + "), not " +
                         model.descriptor.canonical());
    if (cache.s_star.size() != sys.num_params())
        throw CacheError(path + ": parameter vector has the wrong length");
    for (std::size_t i = 0; i < cache.solutions.size(); ++i) {
        const auto& x = cache.solutions[i];
        if (x.size() != sys.dim() || !accept_endpoint<Complex>(sys, x, cache.s_star, 1e-11))
            throw CacheError(path + ": stale cache, solution " + std::to_string(i) + " no longer solves the system");
    }
    if (cache.real_start && cache.real_parameters) {
        std::vector<Complex> x(cache.real_start->begin(), cache.real_start->end());
        if (!accept_endpoint<Complex>(sys, x, as_complex(*cache.real_parameters), 1e-11))
            throw CacheError(path + ": stale cache, real start no longer solves the system");
    }
    return cache;
}

StartSystemCache obtain_start_system(const ModelSpec& model, const RationalSystem& sys,
                                     const InferenceOptions& options)
{
    const std::string dir = options.cache_dir.empty() ? default_cache_dir() : options.cache_dir;
    const std::string path = cache_path(model, dir);
    if (options.use_cache && std::filesystem::exists(path))
        return load_start_system(model, sys, path);
    auto cache = prepare_start_system(model, sys, options);
    if (options.use_cache)
        write_file_atomic(path, cache_to_json(cache));
    return cache;
}

SolveReport solve_model(const ModelSpec& model, const RationalSystem& sys, const std::vector<Rational>& data,
                        const InferenceOptions& options)
{
    if (data.size() != model.num_states())
        throw DataError(model.name + ": expected " + std::to_string(model.num_states()) + " data values, got " +
                        std::to_string(data.size()));
    SolveReport report;
    for (std::size_t k = 0; k < data.size(); ++k)
        if (sgn(data[k]) <= 0) {
            report.warnings.push_back("data value for " + model.labels[k] + " is not positive");
        }

    auto cache = obtain_start_system(model, sys, options);
    const std::vector<Complex> s = as_complex(data);
    const std::size_t expected = cache.solutions.size();

    SolutionSet set = parameter_homotopy(sys, cache.solutions, cache.s_star, s, options.tracker, options.workers);
    report.homotopy_failures = set.failures.size();

    // Lost paths: one detour through random parameters, then seeded monodromy.
    if (set.points.size() < expected && !set.failures.empty()) {
        std::mt19937_64 rng(options.seed ^ 0x5bd1e995ULL);
        auto detour = random_parameters(s.size(), std::max(1.0, inf_norm<Complex>(s)), rng);
        std::vector<std::vector<Complex>> retry;
        for (const auto& f : set.failures)
            retry.push_back(cache.solutions[f.start_index]);
        auto mid = parameter_homotopy(sys, retry, cache.s_star, detour, options.tracker, options.workers);
        std::vector<std::vector<Complex>> mid_points;
        for (const auto& p : mid.points)
            mid_points.push_back(p.x);
        auto second = parameter_homotopy(sys, mid_points, detour, s, options.tracker, options.workers);
        PointRegistry registry(sys.dim());
        for (const auto& p : set.points)
            registry.insert(p.x);
        for (auto& p : second.points)
            if (registry.insert(p.x))
                set.points.push_back(std::move(p));
    }
    if (set.points.size() < expected && !set.points.empty()) {
        std::vector<std::vector<Complex>> seeds;
        for (const auto& p : set.points)
            seeds.push_back(p.x);
        auto mono = monodromy_solve(model, sys, s, seeds, monodromy_options(options, options.seed + 1, expected));
        std::vector<Solution> merged;
        for (auto& p : mono.solutions.points) {
            if (p.origin == Provenance::seed)
                p.origin = Provenance::tracked;
            merged.push_back(std::move(p));
        }
        if (merged.size() > set.points.size()) {
            report.topped_up = merged.size() - set.points.size();
            set.points = std::move(merged);
        }
    }

    set.parameters = s;
    set.exact_parameters = data;
    set.expected = expected;
    if (options.certify) {
        auto box = parameter_box(data);
        report.summary = certify_set(sys, box, set.points, options.krawczyk, options.workers);
        set.complete = report.summary->distinct == expected && report.summary->certified == set.points.size();
    } else {
        set.complete = set.points.size() == expected;
    }
    if (!cache.complete)
        report.warnings.push_back("start system did not reach its target count; the solution set may be partial");
    if (set.points.size() < expected)
        report.warnings.push_back("found " + std::to_string(set.points.size()) + " of " + std::to_string(expected) +
                                  " solutions");
    report.set = std::move(set);
    return report;
}

bool in_domain(const ModelSpec& model, std::span<const double> x, double tolerance)
{
    std::vector<double> no_params(model.graph->num_params(), 0.0), slots;
    try {
        if (!model.domain.inequalities.empty()) {
            Tape tape(*model.graph, model.domain.inequalities);
            std::vector<double> out(model.domain.inequalities.size());
            tape.eval<double>(x, no_params, out, slots);
            for (double v : out)
                if (!(v > tolerance))
                    return false;
        }
        for (double p : evaluate_probabilities<double>(model, x))
            if (!(p > tolerance))
                return false;
    } catch (const SingularEvaluation&) {
        return false;
    }
    return true;
}

double log_likelihood(const ModelSpec& model, std::span<const double> x, const std::vector<Rational>& data)
{
    auto p = evaluate_probabilities<double>(model, x);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
        acc += to_double(data[k]) * std::log(p[k]);
    return acc;
}

MLEResult mle(const ModelSpec& model, const RationalSystem& sys, const std::vector<Rational>& data, MLEMode mode,
              const InferenceOptions& options)
{
    MLEResult out;
    if (mode == MLEMode::fast) {
        if (!model.linear)
            throw SolveError("the real single-path MLE needs a linear model");
        auto cache = obtain_start_system(model, sys, options);
        if (!cache.real_start || !cache.real_parameters)
            throw CacheError(model.name + ": start system has no real domain start");
        TrackerOptions real = options.tracker;
        real.field = Field::real;
        std::vector<Complex> x0(cache.real_start->begin(), cache.real_start->end());
        auto path = track_path(sys, x0, as_complex(*cache.real_parameters), as_complex(data), real);
        if (path.status != PathStatus::success)
            throw SolveError("real MLE path failed: " + path_status_name(path.status));
        auto x = real_part(path.end);
        if (!in_domain(model, x, options.domain_tolerance))
            throw SolveError("real MLE path left the domain");
        out.x = x;
        out.p = evaluate_probabilities<double>(model, x);
        out.log_likelihood = log_likelihood(model, x, data);
        out.domain_points = 1;
        out.margin = std::numeric_limits<double>::infinity();
        return out;
    }

    auto report = solve_model(model, sys, data, options);
    std::vector<std::pair<double, std::vector<double>>> candidates;
    const auto s = as_complex(data);
    for (const auto& p : report.set.points) {
        bool real = p.certificate ? p.certificate->real_certified : nearly_real(p.x);
        if (!real)
            continue;
        std::vector<Complex> xr(p.x.size());
        for (std::size_t i = 0; i < xr.size(); ++i)
            xr[i] = p.x[i].real();
        refine(sys, xr, s, 1e-15, 2);
        auto x = real_part(xr);
        if (in_domain(model, x, options.domain_tolerance))
            candidates.emplace_back(log_likelihood(model, x, data), std::move(x));
    }
    if (candidates.empty())
        throw SolveError(model.name + ": no real critical point in the domain");
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    out.x = candidates[0].second;
    out.p = evaluate_probabilities<double>(model, out.x);
    out.log_likelihood = candidates[0].first;
    out.domain_points = candidates.size();
    out.margin = candidates.size() > 1 ? candidates[0].first - candidates[1].first
                                       : std::numeric_limits<double>::infinity();
    out.report = std::move(report);
    return out;
}

MLDegreeResult ml_degree(const ModelSpec& model, const RationalSystem& sys, const InferenceOptions& options,
                         const MLDegreeOptions& degree)
{
    if (degree.stability_runs < 1 || degree.max_runs < degree.stability_runs)
        throw SolveError("ml_degree: need 1 <= stability_runs <= max_runs");
    MLDegreeResult out;
    out.group_order = model.group_order();
    MonodromyResult last;
    for (int run = 0; run < degree.max_runs; ++run) {
        const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(run) * 7919;
        auto mo = monodromy_options(options, seed, std::nullopt);
        if (run == 0) {
            last = monodromy_solve(model, sys, std::nullopt, {}, mo);
        } else {
            std::mt19937_64 rng(seed);
            auto [x0, s_new] = generic_start(model, sys, rng);
            std::vector<std::vector<Complex>> starts;
            for (const auto& p : last.solutions.points)
                starts.push_back(p.x);
            auto moved = parameter_homotopy(sys, starts, last.s_star, s_new, options.tracker, options.workers);
            std::vector<std::vector<Complex>> seeds{x0};
            for (auto& p : moved.points)
                seeds.push_back(std::move(p.x));
            last = monodromy_solve(model, sys, s_new, seeds, mo);
        }
        out.run_counts.push_back(last.solutions.points.size());
        const auto n = out.run_counts.size();
        if (n >= static_cast<std::size_t>(degree.stability_runs) &&
            std::all_of(out.run_counts.end() - degree.stability_runs, out.run_counts.end(),
                        [&](std::size_t c) { return c == out.run_counts.back(); })) {
            out.stabilized = true;
            break;
        }
    }
    out.gradient_zeros = last.solutions.points.size();
    if (out.gradient_zeros % out.group_order != 0)
        throw SolveError(model.name + ": " + std::to_string(out.gradient_zeros) +
                         " gradient zeros is not a multiple of the group order " + std::to_string(out.group_order) +
                         "; spurious or missing solutions");
    out.estimate = out.gradient_zeros / out.group_order;
    auto box = parameter_box(std::span<const Complex>(last.s_star));
    auto summary = certify_set(sys, box, last.solutions.points, options.krawczyk, options.workers);
    out.certified_lower_bound = summary.distinct;
    return out;
}

VarchenkoReport varchenko_check(const ModelSpec& model, const SolutionSet& set)
{
    VarchenkoReport r;
    r.all_real = std::all_of(set.points.begin(), set.points.end(), [](const Solution& p) {
        return p.certificate ? p.certificate->real_certified : nearly_real(p.x);
    });
    if (model.domain.kind != DomainKind::ordered_cube)
        return r;
    std::set<std::vector<std::size_t>> orderings;
    bool inside = true;
    for (const auto& p : set.points) {
        auto x = real_part(p.x);
        inside = inside && std::all_of(x.begin(), x.end(), [](double v) { return v > 0.0 && v < 1.0; });
        std::vector<std::size_t> idx(x.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
        orderings.insert(idx);
    }
    r.distinct_orderings = orderings.size();
    r.orderings_bijective = inside && r.all_real && orderings.size() == set.points.size() &&
                            orderings.size() == model.domain.ordering_regions;
    return r;
}

} // namespace mlsolve
