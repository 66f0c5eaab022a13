#pragma once

// Model families: CHY on M_{0,m}, CEGM for k = 3, random linear models,
// low-rank symmetric tensors, the probability simplex, and the binary
// independence model. Each constructor yields an immutable ModelSpec.

#include "mlsolve/expr.hpp"
#include "mlsolve/linalg.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mlsolve {

enum class Family { chy, cegm3, linear, tensor, simplex, independence };

std::string family_name(Family f);
Family parse_family(const std::string& name);

/// Family + size parameters (+ seed for random families). Serialized as the cache key.
struct ModelDescriptor {
    Family family = Family::chy;
    int m = 0;
    int k = 0;
    int l = 0;
    int n = 0;
    int d = 0;
    std::uint64_t seed = 0;
    bool chart = false;

    /// e.g. "chy:m=6", "linear:n=12,d=6,seed=7", "chy:m=6+chart".
    std::string canonical() const;
    static ModelDescriptor parse(const std::string& text);
    friend bool operator==(const ModelDescriptor&, const ModelDescriptor&) = default;
};

enum class DomainKind {
    ordered_cube,         // CHY: 0 < x_1 < ... < x_{m-3} < 1
    polytope,             // linear models: all p_i > 0
    product_of_simplices, // tensor models
    orthant,              // positive charts and toric models
    positive_minors       // CEGM: every p_I > 0
};

struct Domain {
    DomainKind kind = DomainKind::polytope;
    /// Expressions in the model graph that are strictly positive on the domain.
    std::vector<ExprId> inequalities;
    /// CHY: number of bounded ordering simplices, (m-3)!.
    std::uint64_t ordering_regions = 0;
};

/// x ↦ A x + b acting on the unknowns.
struct AffineMap {
    Matrix<double> linear;
    std::vector<double> offset;

    std::vector<Complex> apply(std::span<const Complex> x) const;
};

struct ModelSpec;

/// Positive reparametrization: model coordinates as positive rational
/// functions of orthant coordinates, with the factor/exponent data of
/// L = Σ u_i log(y_i) − Σ v_j log(q_j).
struct PositiveChart {
    /// Model on the original coordinates (null for models that are positive as built).
    std::shared_ptr<const ModelSpec> base;
    /// Base coordinates as expressions in chart coordinates (graph of the chart model).
    std::vector<ExprId> to_base;
    /// Chart coordinates as expressions in base coordinates.
    std::shared_ptr<const ExprGraph> inverse_graph;
    std::vector<ExprId> from_base;
    /// Non-monomial factors q_j with positive coefficients (graph of the chart model).
    std::vector<ExprId> factors;
    std::vector<std::string> factor_text;
    /// u_i = Σ_k u_map[i][k] s_k and v_j = Σ_k v_map[j][k] s_k.
    std::vector<std::vector<long>> u_map;
    std::vector<std::vector<long>> v_map;
};

struct ModelSpec {
    std::string name;
    ModelDescriptor descriptor;
    std::size_t num_unknowns = 0;
    std::vector<std::string> unknown_names;
    std::vector<std::string> labels;
    std::vector<std::vector<int>> state_tuples;
    /// Variables are the unknowns, parameters the data slots (one per state).
    std::shared_ptr<const ExprGraph> graph;
    std::vector<ExprId> probabilities;
    Domain domain;
    std::optional<PositiveChart> chart;
    /// Non-identity elements of a symmetry group acting on solutions.
    std::vector<AffineMap> group;
    bool linear = false;
    /// The p_I are Plücker minors, not a probability vector (CEGM).
    bool potential_only = false;
    /// Number of gradient zeros for generic data, where the literature fixes it.
    std::optional<std::uint64_t> known_solution_count;

    std::size_t num_states() const { return labels.size(); }
    std::size_t group_order() const { return group.size() + 1; }
    /// Accepts canonical labels and tuple spellings such as "(2,2)" or "2,3".
    std::optional<std::size_t> state_index(const std::string& label) const;
    /// Content digest of descriptor, labels and expression structure.
    std::string digest() const;
};

ModelSpec chy_model(int m);
ModelSpec cegm3_model(int m);
ModelSpec random_linear_model(int n, int d, std::uint64_t seed);
ModelSpec tensor_model(int m, int k, int l);
ModelSpec simplex_model(int n);
ModelSpec independence_model();
/// Re-expresses a simplex, CHY or CEGM model over the positive orthant.
ModelSpec positive_chart(const ModelSpec& model);
ModelSpec make_model(const ModelDescriptor& desc);

/// One term per state, s_i · log p_i(x).
Potential build_potential(const ModelSpec& model);

/// Max over random interior points of |Σ p_i − 1| (relative); used for the sum-to-one invariant.
double sum_to_one_defect(const ModelSpec& model, int samples, std::uint64_t seed);

/// Point for seeding monodromy. Tensor models draw distinct-row rank-k
/// parameters in the interior of Θ with a small complex perturbation; the
/// rest draw random complex points.
std::vector<Complex> sample_generic_point(const ModelSpec& model, std::mt19937_64& rng);

/// Maps base-model solutions to chart coordinates.
std::vector<Complex> to_chart_coordinates(const PositiveChart& chart, std::span<const Complex> x);
/// Maps chart coordinates back to base coordinates.
std::vector<Complex> from_chart_coordinates(const ModelSpec& chart_model, std::span<const Complex> y);

/// All values of the probability expressions at a point.
template <class T>
std::vector<T> evaluate_probabilities(const ModelSpec& model, std::span<const T> x)
{
    Tape tape(*model.graph, model.probabilities);
    std::vector<T> out(model.probabilities.size());
    std::vector<T> slots;
    std::vector<T> no_params(model.graph->num_params(), T(0.0));
    tape.eval<T>(x, no_params, std::span<T>(out), slots);
    return out;
}

std::uint64_t binomial(int n, int k);
std::uint64_t factorial(int n);

} // namespace mlsolve
