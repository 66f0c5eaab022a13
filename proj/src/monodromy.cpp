#include "mlsolve/monodromy.hpp"

#include "mlsolve/errors.hpp"
#include "mlsolve/parallel.hpp"
#include "mlsolve/registry.hpp"

#include <cmath>
#include <numbers>

namespace mlsolve {

std::vector<Complex> random_parameters(std::size_t n, double scale, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> radius(0.5, 1.5);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::vector<Complex> s(n);
    for (auto& v : s)
        v = std::polar(scale * radius(rng), angle(rng));
    return s;
}

namespace {

/// x sampled from the model, s in the kernel of s ↦ F(x; s), then x carried
/// along one path to `target`.
std::optional<std::vector<Complex>> start_toward(const ModelSpec& model, const RationalSystem& sys,
                                                 std::span<const Complex> target, std::mt19937_64& rng)
{
    const std::size_t d = sys.dim(), np = sys.num_params();
    std::vector<Complex> x = sample_generic_point(model, rng);
    // F is linear in s: column k of G is F(x; e_k).
    Matrix<Complex> g(d, np);
    std::vector<Complex> e(np, Complex(0.0));
    try {
        for (std::size_t k = 0; k < np; ++k) {
            e[k] = 1.0;
            auto col = evaluate<Complex>(sys, x, e);
            e[k] = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                g(i, k) = col[i];
        }
    } catch (const SingularEvaluation&) {
        return std::nullopt;
    }
    std::vector<Complex> r = random_parameters(np, 1.0, rng);
    // s = r - G^H (G G^H)^{-1} G r
    Matrix<Complex> ggh(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            Complex acc = 0.0;
            for (std::size_t k = 0; k < np; ++k)
                acc += g(i, k) * std::conj(g(j, k));
            ggh(i, j) = acc;
        }
    std::vector<Complex> gr(d, Complex(0.0)), scratch;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < np; ++k)
            gr[i] += g(i, k) * r[k];
    std::vector<std::size_t> perm;
    if (!lu_factor(ggh, perm))
        return std::nullopt;
    lu_solve(ggh, perm, std::span<Complex>(gr), scratch);
    std::vector<Complex> s = r;
    for (std::size_t k = 0; k < np; ++k)
        for (std::size_t i = 0; i < d; ++i)
            s[k] -= std::conj(g(i, k)) * gr[i];
    if (inf_norm<Complex>(s) < 1e-3 || refine(sys, x, s, 1e-14, 4) > 1e-12)
        return std::nullopt;
    auto path = track_path(sys, x, s, target);
    if (path.status != PathStatus::success)
        return std::nullopt;
    if (refine(sys, path.end, target, 1e-14, 4) > 1e-12 || inf_norm<Complex>(path.end) >= 1e6)
        return std::nullopt;
    return path.end;
}

} // namespace

std::pair<std::vector<Complex>, std::vector<Complex>> generic_start(const ModelSpec& model, const RationalSystem& sys,
                                                                    std::mt19937_64& rng)
{
    // The kernel of G always contains p(x), which biases s toward special data,
    // so s* is drawn independently and the start point is tracked to it.
    std::uniform_real_distribution<double> box(-1.0, 1.0);
    for (int attempt = 0; attempt < 20; ++attempt) {
        std::vector<Complex> target(sys.num_params());
        for (auto& v : target)
            do
                v = {box(rng), box(rng)};
            while (std::abs(v) < 0.25);
        if (auto x = start_toward(model, sys, target, rng))
            return {std::move(*x), std::move(target)};
    }
    throw SolveError(model.name + ": could not construct a generic start pair");
}

std::vector<std::vector<Complex>> group_orbit(const ModelSpec& model, const RationalSystem& sys,
                                              std::span<const Complex> x, std::span<const Complex> s)
{
    std::vector<std::vector<Complex>> out;
    for (const auto& g : model.group) {
        auto y = g.apply(x);
        // The image of a zero is a zero; the polish only has to confirm accuracy.
        if (refine(sys, y, s, 1e-13, 3) <= 1e-10 || at_noise_level<Complex>(sys, y, s, 1e-11))
            out.push_back(std::move(y));
    }
    return out;
}

namespace {

struct Loop {
    std::vector<Complex> a, b;
};

/// s -> a -> b -> s. Returns the endpoint, or nothing when a leg fails.
std::optional<std::vector<Complex>> run_loop(const RationalSystem& sys, const std::vector<Complex>& x,
                                             const std::vector<Complex>& s, const Loop& loop,
                                             const TrackerOptions& opt)
{
    auto leg1 = track_path(sys, x, s, loop.a, opt);
    if (leg1.status != PathStatus::success)
        return std::nullopt;
    auto leg2 = track_path(sys, leg1.end, loop.a, loop.b, opt);
    if (leg2.status != PathStatus::success)
        return std::nullopt;
    auto leg3 = track_path(sys, leg2.end, loop.b, s, opt);
    if (leg3.status != PathStatus::success)
        return std::nullopt;
    return leg3.end;
}

} // namespace

MonodromyResult monodromy_solve(const ModelSpec& model, const RationalSystem& sys,
                                std::optional<std::vector<Complex>> s_star,
                                const std::vector<std::vector<Complex>>& seeds, const MonodromyOptions& options)
{
    options.tracker.validate();
    if (options.stagnation_limit < 1 || options.max_loops < 1)
        throw SolveError("monodromy limits must be positive");
    std::mt19937_64 rng(options.seed);
    const double tol = options.tracker.tolerance;

    MonodromyResult result;
    std::vector<std::vector<Complex>> start_points;
    if (!s_star) {
        auto [x0, s] = generic_start(model, sys, rng);
        result.s_star = s;
        start_points.push_back(x0);
    } else {
        if (s_star->size() != sys.num_params())
            throw SolveError("parameter vector has the wrong length");
        result.s_star = *s_star;
        for (const auto& x : seeds) {
            std::vector<Complex> y = x;
            if (refine(sys, y, result.s_star, 1e-13, 3) <= 10 * tol)
                start_points.push_back(std::move(y));
        }
        if (seeds.empty()) {
            for (int attempt = 0; attempt < options.seed_retries && start_points.empty(); ++attempt) {
                auto y = start_toward(model, sys, result.s_star, rng);
                if (y && condition_number(sys, *y, result.s_star) <= options.max_condition)
                    start_points.push_back(std::move(*y));
            }
        }
    }
    if (start_points.empty())
        throw SolveError(model.name + ": monodromy has no starting solution");

    const std::vector<Complex>& s = result.s_star;
    PointRegistry registry(sys.dim(), options.dedup_threshold);
    auto& points = result.solutions.points;
    std::vector<std::size_t> progress;

    auto add_point = [&](std::vector<Complex> x, Provenance origin, long source) {
        if (!registry.insert(x))
            return false;
        Solution sol;
        sol.residual = scaled_residual<Complex>(sys, x, s);
        sol.x = std::move(x);
        sol.origin = origin;
        sol.source = source;
        points.push_back(sol);
        progress.push_back(0);
        if (options.use_group && !model.group.empty()) {
            for (auto& y : group_orbit(model, sys, points.back().x, s)) {
                if (registry.insert(y)) {
                    Solution gs;
                    gs.residual = scaled_residual<Complex>(sys, y, s);
                    gs.x = std::move(y);
                    gs.origin = Provenance::group_orbit;
                    gs.source = source;
                    points.push_back(std::move(gs));
                    progress.push_back(0);
                }
            }
        }
        return true;
    };

    for (auto& x : start_points)
        add_point(std::move(x), Provenance::seed, -1);

    const double scale = std::max(1.0, inf_norm<Complex>(s));
    std::vector<Loop> loops;
    std::size_t found_since_loop = 0;
    int unproductive = 0;
    auto target_met = [&] { return options.target && points.size() >= *options.target; };

    while (!target_met()) {
        std::vector<std::pair<std::size_t, std::size_t>> batch;
        for (std::size_t i = 0; i < points.size(); ++i) {
            // Loops commute with the group action: the loop image of g(x) is
            // g(loop image of x), which the orbit of that endpoint supplies.
            if (points[i].origin != Provenance::group_orbit)
                for (std::size_t l = progress[i]; l < loops.size(); ++l)
                    batch.emplace_back(i, l);
            progress[i] = loops.size();
        }
        if (batch.empty()) {
            if (!loops.empty()) {
                unproductive = found_since_loop == 0 ? unproductive + 1 : 0;
                if (unproductive >= options.stagnation_limit) {
                    result.stagnated = true;
                    break;
                }
            }
            if (static_cast<int>(loops.size()) >= options.max_loops)
                break;
            loops.push_back({random_parameters(s.size(), scale, rng), random_parameters(s.size(), scale, rng)});
            found_since_loop = 0;
            continue;
        }

        std::vector<std::optional<std::vector<Complex>>> ends(batch.size());
        parallel_for(batch.size(), options.workers, [&](std::size_t k) {
            const auto [i, l] = batch[k];
            ends[k] = run_loop(sys, points[i].x, s, loops[l], options.tracker);
        });
        result.paths_tracked += batch.size();

        // Deterministic merge in batch order.
        for (std::size_t k = 0; k < batch.size(); ++k) {
            if (!ends[k]) {
                ++result.paths_failed;
                continue;
            }
            std::vector<Complex>& y = *ends[k];
            double upd = newton<Complex>(sys, y, s, 3);
            if (!std::isfinite(upd) || upd > 1e-6 * (1.0 + inf_norm<Complex>(y))) {
                ++result.paths_failed;
                continue;
            }
            if ((refine(sys, y, s, 1e-13, 2) > tol && !at_noise_level<Complex>(sys, y, s, tol)) ||
                condition_number(sys, y, s) > options.max_condition) {
                ++result.paths_failed;
                continue;
            }
            if (add_point(std::move(y), Provenance::monodromy, static_cast<long>(batch[k].second)))
                ++found_since_loop;
            if (target_met())
                break;
        }
    }
    result.loops = static_cast<int>(loops.size());
    result.reached_target = target_met();
    result.solutions.parameters = s;
    result.solutions.expected = options.target;
    result.solutions.complete = result.reached_target;
    return result;
}

} // namespace mlsolve
