#pragma once

// Predictor-corrector tracking of F(x; s(t)) = 0 along the segment
// s(t) = (1 - t) s_start + t s_target. RK4 on the Davidenko equation
// dx/dt = -J_x^{-1} J_s (s_target - s_start), Newton as corrector.

#include "mlsolve/expr.hpp"
#include "mlsolve/solution.hpp"

#include <span>
#include <string>
#include <vector>

namespace mlsolve {

enum class Field { complex, real };

struct TrackerOptions {
    /// Endpoint bound on ‖F‖∞ / max(1, ‖s‖∞).
    double tolerance = 1e-11;
    int max_corrector_iterations = 3;
    double initial_step = 0.05;
    double min_step = 1e-12;
    double growth = 2.0;
    int successes_before_growth = 4;
    double shrink = 0.5;
    int max_steps = 10000;
    double divergence_bound = 1e10;
    Field field = Field::complex;
    /// Relative Newton update accepted as converged along the path.
    double path_accuracy = 1e-8;
    /// Largest first corrector update, relative to 1 + ‖x‖∞, before a step is rejected.
    double max_predictor_error = 1e-3;

    /// Throws SolveError when the options are inconsistent.
    void validate() const;
};

enum class PathStatus { success, corrector_failure, diverged, singular_evaluation, step_underflow };

std::string path_status_name(PathStatus s);

struct PathOutcome {
    PathStatus status = PathStatus::corrector_failure;
    std::vector<Complex> end;
    double residual = 0.0;
    int steps = 0;
    double t = 0.0;
};

/// ‖F(x; s)‖∞ / max(1, ‖s‖∞); +inf when the evaluation is singular.
template <class T>
double scaled_residual(const RationalSystem& sys, std::span<const T> x, std::span<const T> s);

/// True when the residual cannot be reduced in binary64: either the scaled
/// residual is at most 1e3·tolerance and ‖F(x)‖∞ is at most the widest component
/// of the interval evaluation of F at (x, s), or the scaled residual is at most
/// 1e-4 and a Newton step moves x by at most 1e-12 (1 + ‖x‖∞).
template <class T>
bool at_noise_level(const RationalSystem& sys, std::span<const T> x, std::span<const T> s, double tolerance);

/// Scaled residual at most `tolerance`, or at noise level.
template <class T>
bool accept_endpoint(const RationalSystem& sys, std::span<const T> x, std::span<const T> s, double tolerance);

/// Plain Newton iterations. Returns the final update norm, or +inf on a singular step.
template <class T>
double newton(const RationalSystem& sys, std::span<T> x, std::span<const T> s, int iterations);

/// Newton until the scaled residual is at most `tolerance` (at most `max_iterations`).
/// Returns the residual reached.
double refine(const RationalSystem& sys, std::span<Complex> x, std::span<const Complex> s, double tolerance,
              int max_iterations = 8);

PathOutcome track_path(const RationalSystem& sys, std::span<const Complex> start, std::span<const Complex> s_start,
                       std::span<const Complex> s_target, const TrackerOptions& options = {});

/// Tracks every start (concurrently unless workers == 1). Outcomes are in start order.
std::vector<PathOutcome> track_all(const RationalSystem& sys, const std::vector<std::vector<Complex>>& starts,
                                   std::span<const Complex> s_start, std::span<const Complex> s_target,
                                   const TrackerOptions& options, int workers);

/// Tracks all starts, collects successes with tracked provenance and records
/// failures. Endpoints closer than 1e-8 (scaled) are merged.
SolutionSet parameter_homotopy(const RationalSystem& sys, const std::vector<std::vector<Complex>>& starts,
                               std::span<const Complex> s_start, std::span<const Complex> s_target,
                               const TrackerOptions& options = {}, int workers = 0);

/// ‖DJE‖∞ ‖(DJE)⁻¹‖∞ with E = diag(max(1, |x_j|)) and D scaling the rows to unit
/// ∞-norm; +inf when J is singular.
double condition_number(const RationalSystem& sys, std::span<const Complex> x, std::span<const Complex> s);

/// Scaled distance max_i |a_i - b_i| / max(1, |a_i|) used for deduplication.
double scaled_distance(std::span<const Complex> a, std::span<const Complex> b);

} // namespace mlsolve
