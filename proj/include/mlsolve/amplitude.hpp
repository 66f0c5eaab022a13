#pragma once

// String amplitudes of positive models as the critical-point sum
// (−1)^d Σ det H_L(ξ)^{-1} of toric Hessians, plus closed-form oracles.

#include "mlsolve/inference.hpp"
#include "mlsolve/kinematics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlsolve {

struct AmplitudeTerm {
    /// Chart coordinates of the critical point.
    std::vector<Complex> y;
    Complex determinant{0.0, 0.0};
    /// ‖H‖∞ ‖H⁻¹‖∞.
    double condition = 0.0;
    /// Scaled gradient residual in chart coordinates.
    double residual = 0.0;
    /// Empty when the term entered the sum.
    std::string error;
};

/// Signs of the exponents in L = Σ u_i log y_i − Σ v_j log q_j. Informational only.
struct HypothesisReport {
    std::vector<Rational> u;
    std::vector<Rational> v;
    std::vector<std::string> factors;
    bool u_nonnegative = false;
    bool v_positive = false;
};

struct AmplitudeResult {
    /// Real part of the signed sum.
    double value = 0.0;
    Complex sum{0.0, 0.0};
    /// |Im| / |sum|.
    double imaginary_ratio = 0.0;
    std::size_t points = 0;
    /// Chart dimension; the sum carries the sign (−1)^d.
    int dimension = 0;
    int sign = 1;
    /// False when any term failed (zero coordinate, singular Hessian).
    bool reliable = true;
    std::vector<AmplitudeTerm> terms;
    HypothesisReport hypotheses;
    std::optional<Rational> oracle;
    /// Set when the critical points came from solve_model.
    std::optional<SolveReport> report;
};

/// Sum over the given critical points in chart coordinates. Each point gets a
/// short Newton polish on the chart system first. workers == 1 is serial; the
/// reduction is compensated and in point order either way.
AmplitudeResult amplitude(const ModelSpec& chart_model, const std::vector<Rational>& data,
                          const std::vector<std::vector<Complex>>& chart_points, int workers = 0);

/// Solves the base model (or the chart model when it is positive as built),
/// maps the solutions into chart coordinates and sums.
AmplitudeResult amplitude(const ModelSpec& chart_model, const std::vector<Rational>& data,
                          const InferenceOptions& options);

/// Base-model solutions in chart coordinates.
std::vector<std::vector<Complex>> chart_points(const ModelSpec& chart_model, const SolutionSet& base_set);

HypothesisReport hypothesis_report(const ModelSpec& chart_model, const std::vector<Rational>& data);

enum class OracleKind { triangle, square, associahedron_m6 };

std::string oracle_name(OracleKind k);
OracleKind parse_oracle(const std::string& name);

/// triangle: (s0, s1, s2); square: (s00, s01, s10, s11); associahedron_m6: the
/// nine CHY m=6 counts, completed to the full Mandelstam array. Throws
/// DataError on a wrong arity or a vanishing denominator.
Rational oracle_amplitude(OracleKind kind, const std::vector<Rational>& s);

/// Sum over the 14 planar trivalent trees with six leaves, s_ijk = s_ij + s_ik + s_jk.
Rational associahedron_m6(const MandelstamK2& s);

/// Oracle matching a chart model, if there is one.
std::optional<OracleKind> oracle_for(const ModelSpec& chart_model);

/// JSON report: value, sign convention, counts, hypotheses, oracle, optionally per-point terms.
std::string amplitude_to_json(const AmplitudeResult& result, const ModelSpec& chart_model, bool per_point);

} // namespace mlsolve
