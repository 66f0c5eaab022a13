#pragma once

#include "mlsolve/rational.hpp"
#include "mlsolve/scalar.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlsolve {

/// Krawczyk outcome for one approximate zero.
struct Certificate {
    bool certified = false;
    bool real_certified = false;
    std::vector<ComplexInterval> box;
    std::vector<ComplexInterval> image;
    double inflation = 0.0;
    std::string reason;
    /// Digest of the exact parameter vector the box was certified against.
    std::string parameter_digest;
};

enum class Provenance { seed, monodromy, group_orbit, tracked, loaded };

std::string provenance_name(Provenance p);
Provenance parse_provenance(const std::string& name);

struct Solution {
    std::vector<Complex> x;
    double residual = 0.0;
    Provenance origin = Provenance::tracked;
    /// Monodromy loop or start index that produced the point, -1 if none.
    long source = -1;
    std::optional<Certificate> certificate;
};

struct PathFailure {
    std::size_t start_index = 0;
    std::string status;
    double t = 0.0;
    double residual = 0.0;
};

struct SolutionSet {
    /// Parameter values the points solve.
    std::vector<Complex> parameters;
    /// Exact values when the parameters are real data.
    std::optional<std::vector<Rational>> exact_parameters;
    std::vector<Solution> points;
    std::vector<PathFailure> failures;
    /// Expected count when known (cached start system size, ML degree).
    std::optional<std::size_t> expected;
    bool complete = false;
};

} // namespace mlsolve
