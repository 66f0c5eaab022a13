#pragma once

// Mandelstam arrays on kinematic space and their completion from the n+1
// independent counts, in exact rational arithmetic.

#include "mlsolve/models.hpp"
#include "mlsolve/rational.hpp"

#include <map>
#include <string>
#include <vector>

namespace mlsolve {

using LabeledCounts = std::map<std::string, Rational>;

/// Symmetric m×m array with zero diagonal; indices are 1-based.
class MandelstamK2 {
public:
    explicit MandelstamK2(int m = 0) : m_(m), s_((m + 1) * (m + 1)) {}
    int m() const { return m_; }
    const Rational& operator()(int i, int j) const { return s_[i * (m_ + 1) + j]; }
    void set(int i, int j, const Rational& v)
    {
        s_[i * (m_ + 1) + j] = v;
        s_[j * (m_ + 1) + i] = v;
    }
    Rational row_sum(int i) const;

private:
    int m_;
    std::vector<Rational> s_;
};

/// Fully symmetric 3-tensor, zero unless the indices are distinct; 1-based.
class MandelstamK3 {
public:
    explicit MandelstamK3(int m = 0) : m_(m), s_((m + 1) * (m + 1) * (m + 1)) {}
    int m() const { return m_; }
    const Rational& operator()(int i, int j, int k) const { return s_[(i * (m_ + 1) + j) * (m_ + 1) + k]; }
    void set(int i, int j, int k, const Rational& v);
    /// Σ_{j<k} s_ijk.
    Rational slice_sum(int i) const;

private:
    int m_;
    std::vector<Rational> s_;
};

/// Orders labeled counts by the model's states. Throws DataError listing
/// every unknown and every missing label.
std::vector<Rational> order_counts(const ModelSpec& model, const LabeledCounts& counts);

/// Unique completion with zero row sums from the CHY counts (states 2 ≤ i < j ≤ m, (i,j) ≠ (2,m)).
MandelstamK2 complete_k2(const LabeledCounts& counts, int m);
MandelstamK2 complete_k2(const std::vector<Rational>& chy_counts, int m);

/// Completion of the m excluded invariants (12j, 134, 234) from Σ_{j<k} s_ijk = 0.
MandelstamK3 complete_k3(const LabeledCounts& counts, int m);
MandelstamK3 complete_k3(const std::vector<Rational>& cegm_counts, int m);

/// Entries at the model states.
std::vector<Rational> restrict_k2(const MandelstamK2& s);
std::vector<Rational> restrict_k3(const MandelstamK3& s);

/// Solves a square system exactly by Gaussian elimination. Throws DataError when singular.
std::vector<Rational> solve_exact(std::vector<std::vector<Rational>> a, std::vector<Rational> b);

} // namespace mlsolve
