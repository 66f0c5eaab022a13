#include "mlsolve/errors.hpp"
#include "mlsolve/registry.hpp"
#include "mlsolve/solution.hpp"
#include "mlsolve/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mlsolve {

std::string provenance_name(Provenance p)
{
    switch (p) {
    case Provenance::seed:
        return "seed";
    case Provenance::monodromy:
        return "monodromy";
    case Provenance::group_orbit:
        return "group-orbit";
    case Provenance::tracked:
        return "tracked";
    case Provenance::loaded:
        return "loaded";
    }
    return "?";
}

Provenance parse_provenance(const std::string& name)
{
    for (Provenance p : {Provenance::seed, Provenance::monodromy, Provenance::group_orbit, Provenance::tracked,
                         Provenance::loaded})
        if (provenance_name(p) == name)
            return p;
    throw FormatError("unknown provenance '" + name + "'");
}

PointRegistry::PointRegistry(std::size_t dim, double threshold) : dim_(dim), threshold_(threshold)
{
    std::mt19937_64 rng(0x7e6157);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    weights_.resize(2 * dim);
    for (auto& w : weights_) {
        w = u(rng);
        weight_sum_ += w;
    }
}

double PointRegistry::key(std::span<const Complex> x) const
{
    double k = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
        k += weights_[2 * i] * x[i].real() + weights_[2 * i + 1] * x[i].imag();
    return k;
}

std::optional<std::size_t> PointRegistry::find(std::span<const Complex> x) const
{
    double scale = 1.0;
    for (const Complex& v : x)
        scale = std::max(scale, std::abs(v));
    const double k = key(x);
    // |key(a) - key(b)| <= Σ w · |a - b| and |a_i - b_i| < threshold · max(1, |x_i|) for matches.
    const double window = 2.0 * threshold_ * weight_sum_ * scale;
    for (auto it = index_.lower_bound(k - window); it != index_.end() && it->first <= k + window; ++it) {
        const auto& p = points_[it->second];
        if (scaled_distance(x, p) < threshold_ || scaled_distance(p, x) < threshold_)
            return it->second;
    }
    return std::nullopt;
}

std::optional<std::size_t> PointRegistry::insert(std::span<const Complex> x)
{
    if (find(x))
        return std::nullopt;
    points_.emplace_back(x.begin(), x.end());
    index_.emplace(key(x), points_.size() - 1);
    return points_.size() - 1;
}

} // namespace mlsolve
