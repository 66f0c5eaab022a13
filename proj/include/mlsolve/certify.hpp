#pragma once

// Krawczyk certification of approximate zeros of F(·; s). The parameters are
// enclosed in intervals so that exact rational data is certified exactly.

#include "mlsolve/exact.hpp"
#include "mlsolve/expr.hpp"
#include "mlsolve/solution.hpp"

#include <span>
#include <string>
#include <vector>

namespace mlsolve {

/// Interval enclosure of a parameter vector plus its digest.
struct ParameterBox {
    std::vector<ComplexInterval> values;
    /// The same parameters as exact values.
    std::vector<ExactComplex> exact;
    std::string digest;
    /// Every value has a zero imaginary part.
    bool real = false;
};

ParameterBox parameter_box(const std::vector<Rational>& exact);
/// Binary64 values are taken as exact.
ParameterBox parameter_box(std::span<const Complex> values);
/// Exact parameters when present, the floating values otherwise.
ParameterBox parameter_box(const SolutionSet& set);

struct KrawczykOptions {
    /// Box radius relative to max(1, |x_i|).
    double inflation = 1e-7;
    /// Retries with inflation ÷10 and ×10, this many each.
    int retries = 3;
    /// |Im x_i| below this selects a point for the real test.
    double real_candidate = 1e-8;
};

/// Krawczyk operator K(B) = x̃ − Y F(x̃) + (I − Y J(B)) (B − x̃) for the box
/// B = x̃ ± r. Certified iff K(B) lies in the interior of B. When the
/// floating evaluation of F(x̃) is too noisy, x̃ is refined against the exact
/// residual and F(x̃) is enclosed from its exact value.
Certificate krawczyk_certify(const RationalSystem& sys, const ParameterBox& s, std::span<const Complex> x,
                             const KrawczykOptions& options = {});

/// Recomputes K(B) for a stored certificate and checks containment again.
bool recheck(const RationalSystem& sys, const ParameterBox& s, const Certificate& cert);

struct CertifySummary {
    std::size_t points = 0;
    std::size_t certified = 0;
    /// Certified points after merging overlapping boxes.
    std::size_t distinct = 0;
    std::size_t real_certified = 0;
    /// Distinct points with every |Im x_i| < 1e-8, certified or not.
    std::size_t heuristic_real = 0;
    /// Cluster index per point, -1 when uncertified.
    std::vector<long> cluster;
};

/// Certifies every point in place and summarizes. workers == 1 is the serial loop.
CertifySummary certify_set(const RationalSystem& sys, const ParameterBox& s, std::vector<Solution>& points,
                           const KrawczykOptions& options = {}, int workers = 0);

} // namespace mlsolve
