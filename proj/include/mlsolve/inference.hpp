#pragma once

// Offline/online workflow: monodromy once per model into a start-system
// cache, then parameter homotopy to the data, certification, MLE selection
// and ML-degree estimation.

#include "mlsolve/certify.hpp"
#include "mlsolve/io.hpp"
#include "mlsolve/monodromy.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlsolve {

struct InferenceOptions {
    /// 0 = all threads, 1 = serial and deterministic ordering.
    int workers = 0;
    std::uint64_t seed = 1;
    /// Empty: default_cache_dir().
    std::string cache_dir;
    /// Read and write the start-system cache.
    bool use_cache = true;
    bool certify = true;
    TrackerOptions tracker{};
    /// Applied to offline and top-up monodromy runs (target and seed are set per call).
    MonodromyOptions monodromy{};
    KrawczykOptions krawczyk{};
    /// Strict domain inequalities hold with this margin.
    double domain_tolerance = 1e-10;
};

/// MLSOLVE_CACHE_DIR, else $XDG_CACHE_HOME/mlsolve, else $HOME/.cache/mlsolve, else ./.mlsolve-cache.
std::string default_cache_dir();
std::string cache_path(const ModelSpec& model, const std::string& dir);

/// Offline step: monodromy at fresh generic parameters, aiming for the known
/// solution count when the model has one. For linear models a real start in
/// the domain is attached for the fast MLE path.
StartSystemCache prepare_start_system(const ModelSpec& model, const RationalSystem& sys,
                                      const InferenceOptions& options);

/// Reads a cache and revalidates every point (residual ≤ 1e-11 at s*).
/// Throws CacheError for another model's cache or a stale one.
StartSystemCache load_start_system(const ModelSpec& model, const RationalSystem& sys, const std::string& path);

/// Cached start system, building and saving it when absent.
StartSystemCache obtain_start_system(const ModelSpec& model, const RationalSystem& sys,
                                     const InferenceOptions& options);

struct SolveReport {
    SolutionSet set;
    std::optional<CertifySummary> summary;
    std::size_t homotopy_failures = 0;
    /// Points recovered by seeded monodromy at the data.
    std::size_t topped_up = 0;
    std::vector<std::string> warnings;
};

/// Homotopy from the cached start system to `data`, then a seeded monodromy
/// top-up if paths were lost, then certification.
SolveReport solve_model(const ModelSpec& model, const RationalSystem& sys, const std::vector<Rational>& data,
                        const InferenceOptions& options);

/// Domain membership with every inequality > tolerance and every p_i > tolerance.
bool in_domain(const ModelSpec& model, std::span<const double> x, double tolerance = 1e-10);

/// Σ s_i log p_i(x).
double log_likelihood(const ModelSpec& model, std::span<const double> x, const std::vector<Rational>& data);

struct MLEResult {
    std::vector<double> x;
    std::vector<double> p;
    double log_likelihood = 0.0;
    /// Real critical points inside the domain.
    std::size_t domain_points = 0;
    /// L(x̂) minus the next best domain value (infinite when x̂ is the only one).
    double margin = 0.0;
    /// Full mode only.
    std::optional<SolveReport> report;
};

enum class MLEMode { full, fast };

/// Full mode solves completely and maximizes over domain points; fast mode
/// (linear models) tracks the domain point alone over the reals.
MLEResult mle(const ModelSpec& model, const RationalSystem& sys, const std::vector<Rational>& data,
              MLEMode mode, const InferenceOptions& options);

struct MLDegreeOptions {
    int stability_runs = 3;
    int max_runs = 8;
};

struct MLDegreeResult {
    /// Certified distinct gradient zeros at the last run's parameters: a proven lower bound.
    std::size_t certified_lower_bound = 0;
    /// Gradient zeros found, once stable over `stability_runs` runs. Not proven.
    std::size_t gradient_zeros = 0;
    std::size_t group_order = 1;
    /// gradient_zeros / group_order.
    std::size_t estimate = 0;
    std::vector<std::size_t> run_counts;
    bool stabilized = false;
};

/// Monodromy at fresh random parameters per run. Each run starts from the
/// previous run's solutions tracked to its parameters. Throws SolveError when
/// the count is not divisible by the group order.
MLDegreeResult ml_degree(const ModelSpec& model, const RationalSystem& sys, const InferenceOptions& options,
                         const MLDegreeOptions& degree = {});

struct VarchenkoReport {
    bool all_real = false;
    /// CHY only: one solution per ordering of x_1..x_{m-3} in (0, 1).
    bool orderings_bijective = false;
    std::size_t distinct_orderings = 0;
};

VarchenkoReport varchenko_check(const ModelSpec& model, const SolutionSet& set);

} // namespace mlsolve
