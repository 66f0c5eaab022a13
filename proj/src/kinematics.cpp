#include "mlsolve/kinematics.hpp"

#include "mlsolve/errors.hpp"

#include <array>

namespace mlsolve {

Rational MandelstamK2::row_sum(int i) const
{
    Rational acc = 0;
    for (int j = 1; j <= m_; ++j)
        if (j != i)
            acc += (*this)(i, j);
    return acc;
}

void MandelstamK3::set(int i, int j, int k, const Rational& v)
{
    const std::array<std::array<int, 3>, 6> perms{{{i, j, k}, {i, k, j}, {j, i, k}, {j, k, i}, {k, i, j}, {k, j, i}}};
    for (const auto& p : perms)
        s_[(p[0] * (m_ + 1) + p[1]) * (m_ + 1) + p[2]] = v;
}

Rational MandelstamK3::slice_sum(int i) const
{
    Rational acc = 0;
    for (int j = 1; j <= m_; ++j)
        for (int k = j + 1; k <= m_; ++k)
            if (j != i && k != i)
                acc += (*this)(i, j, k);
    return acc;
}

std::vector<Rational> order_counts(const ModelSpec& model, const LabeledCounts& counts)
{
    std::vector<Rational> out(model.num_states());
    std::vector<bool> seen(model.num_states(), false);
    std::string unknown;
    for (const auto& [label, value] : counts) {
        auto idx = model.state_index(label);
        if (!idx) {
            unknown += (unknown.empty() ? "" : ", ") + label;
            continue;
        }
        if (seen[*idx])
            throw DataError("label " + label + " given twice for state " + model.labels[*idx]);
        seen[*idx] = true;
        out[*idx] = value;
    }
    std::string missing;
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            missing += (missing.empty() ? "" : ", ") + model.labels[i];
    if (!unknown.empty() || !missing.empty()) {
        std::string msg = "data does not match " + model.name + ":";
        if (!unknown.empty())
            msg += " unknown labels [" + unknown + "]";
        if (!missing.empty())
            msg += " missing labels [" + missing + "]";
        throw DataError(msg);
    }
    return out;
}

std::vector<Rational> solve_exact(std::vector<std::vector<Rational>> a, std::vector<Rational> b)
{
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        while (p < n && a[p][k] == 0)
            ++p;
        if (p == n)
            throw DataError("singular kinematic completion");
        std::swap(a[p], a[k]);
        std::swap(b[p], b[k]);
        for (std::size_t i = 0; i < n; ++i) {
            if (i == k || a[i][k] == 0)
                continue;
            Rational f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j)
                a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        b[i] /= a[i][i];
    return b;
}

MandelstamK2 complete_k2(const std::vector<Rational>& chy_counts, int m)
{
    auto model = chy_model(m);
    if (chy_counts.size() != model.num_states())
        throw DataError("expected " + std::to_string(model.num_states()) + " counts for m=" + std::to_string(m));
    MandelstamK2 s(m);
    for (std::size_t k = 0; k < chy_counts.size(); ++k)
        s.set(model.state_tuples[k][0], model.state_tuples[k][1], chy_counts[k]);
    std::vector<std::pair<int, int>> unknowns;
    for (int j = 2; j <= m; ++j)
        unknowns.emplace_back(1, j);
    unknowns.emplace_back(2, m);
    const std::size_t n = unknowns.size();
    std::vector<std::vector<Rational>> a(n, std::vector<Rational>(n));
    std::vector<Rational> b(n);
    for (int i = 1; i <= m; ++i) {
        b[i - 1] = -s.row_sum(i);
        for (std::size_t u = 0; u < n; ++u)
            if (unknowns[u].first == i || unknowns[u].second == i)
                a[i - 1][u] = 1;
    }
    auto sol = solve_exact(std::move(a), std::move(b));
    for (std::size_t u = 0; u < n; ++u)
        s.set(unknowns[u].first, unknowns[u].second, sol[u]);
    return s;
}

MandelstamK2 complete_k2(const LabeledCounts& counts, int m)
{
    return complete_k2(order_counts(chy_model(m), counts), m);
}

MandelstamK3 complete_k3(const std::vector<Rational>& cegm_counts, int m)
{
    auto model = cegm3_model(m);
    if (cegm_counts.size() != model.num_states())
        throw DataError("expected " + std::to_string(model.num_states()) + " counts for m=" + std::to_string(m));
    MandelstamK3 s(m);
    for (std::size_t k = 0; k < cegm_counts.size(); ++k) {
        const auto& t = model.state_tuples[k];
        s.set(t[0], t[1], t[2], cegm_counts[k]);
    }
    std::vector<std::array<int, 3>> unknowns;
    for (int j = 3; j <= m; ++j)
        unknowns.push_back({1, 2, j});
    unknowns.push_back({1, 3, 4});
    unknowns.push_back({2, 3, 4});
    const std::size_t n = unknowns.size();
    std::vector<std::vector<Rational>> a(n, std::vector<Rational>(n));
    std::vector<Rational> b(n);
    for (int i = 1; i <= m; ++i) {
        b[i - 1] = -s.slice_sum(i);
        for (std::size_t u = 0; u < n; ++u) {
            const auto& t = unknowns[u];
            if (t[0] == i || t[1] == i || t[2] == i)
                a[i - 1][u] = 1;
        }
    }
    auto sol = solve_exact(std::move(a), std::move(b));
    for (std::size_t u = 0; u < n; ++u)
        s.set(unknowns[u][0], unknowns[u][1], unknowns[u][2], sol[u]);
    return s;
}

MandelstamK3 complete_k3(const LabeledCounts& counts, int m)
{
    return complete_k3(order_counts(cegm3_model(m), counts), m);
}

std::vector<Rational> restrict_k2(const MandelstamK2& s)
{
    auto model = chy_model(s.m());
    std::vector<Rational> out;
    for (const auto& t : model.state_tuples)
        out.push_back(s(t[0], t[1]));
    return out;
}

std::vector<Rational> restrict_k3(const MandelstamK3& s)
{
    auto model = cegm3_model(s.m());
    std::vector<Rational> out;
    for (const auto& t : model.state_tuples)
        out.push_back(s(t[0], t[1], t[2]));
    return out;
}

} // namespace mlsolve
