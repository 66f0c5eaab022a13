#pragma once

// Point set with near-duplicate lookup: points are keyed by a fixed random
// projection, so a query only inspects the window of keys it could match.

#include "mlsolve/scalar.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace mlsolve {

class PointRegistry {
public:
    /// Points a, b are the same when max_i |a_i - b_i| / max(1, |a_i|) < threshold.
    PointRegistry(std::size_t dim, double threshold = 1e-8);

    std::optional<std::size_t> find(std::span<const Complex> x) const;
    /// Returns the index of the new point, or nullopt when it is already present.
    std::optional<std::size_t> insert(std::span<const Complex> x);
    std::size_t size() const { return points_.size(); }
    const std::vector<Complex>& point(std::size_t i) const { return points_[i]; }

private:
    double key(std::span<const Complex> x) const;

    std::size_t dim_;
    double threshold_;
    std::vector<double> weights_;
    double weight_sum_ = 0.0;
    std::vector<std::vector<Complex>> points_;
    std::multimap<double, std::size_t> index_;
};

} // namespace mlsolve
