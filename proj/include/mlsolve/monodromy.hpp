#pragma once

// Populates F(x; s*) = 0 for generic s* by tracking triangle loops
// s* -> s1 -> s2 -> s* in parameter space.

#include "mlsolve/models.hpp"
#include "mlsolve/tracking.hpp"

#include <optional>

namespace mlsolve {

struct MonodromyOptions {
    std::optional<std::size_t> target;
    /// Consecutive loops that add no new orbit before giving up.
    int stagnation_limit = 10;
    int max_loops = 500;
    std::uint64_t seed = 1;
    /// Saturate every new point under the model's group action.
    bool use_group = true;
    TrackerOptions tracker{};
    /// 0 = all available threads, 1 = serial reference loop.
    int workers = 0;
    double dedup_threshold = 1e-8;
    /// Attempts to find a first solution when s_star is given without seeds.
    int seed_retries = 200;
    /// Endpoints with a worse Jacobian condition number are treated as lying on an
    /// extraneous component and discarded.
    double max_condition = 1e13;
};

struct MonodromyResult {
    std::vector<Complex> s_star;
    SolutionSet solutions;
    int loops = 0;
    std::size_t paths_tracked = 0;
    std::size_t paths_failed = 0;
    bool reached_target = false;
    bool stagnated = false;
};

/// Picks a generic point x0 and a generic s* with F(x0; s*) = 0. A start pair is
/// built by projecting a random complex vector onto the kernel of the linear map
/// s ↦ F(x0; s), then tracked to s* drawn uniformly from the complex unit box.
std::pair<std::vector<Complex>, std::vector<Complex>> generic_start(const ModelSpec& model, const RationalSystem& sys,
                                                                    std::mt19937_64& rng);

/// Random complex parameter vector with entries of modulus about `scale`, away from zero.
std::vector<Complex> random_parameters(std::size_t n, double scale, std::mt19937_64& rng);

/// Without s_star a fresh generic start is drawn. With s_star but no seeds, a
/// kernel-projection start pair is tracked to s_star for the first solution. Throws SolveError
/// when no solution can be found.
MonodromyResult monodromy_solve(const ModelSpec& model, const RationalSystem& sys,
                                std::optional<std::vector<Complex>> s_star,
                                const std::vector<std::vector<Complex>>& seeds, const MonodromyOptions& options);

/// Points g(x) for every group element, Newton-polished at s. Points that do
/// not polish are dropped.
std::vector<std::vector<Complex>> group_orbit(const ModelSpec& model, const RationalSystem& sys,
                                              std::span<const Complex> x, std::span<const Complex> s);

} // namespace mlsolve
