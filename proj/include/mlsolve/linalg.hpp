#pragma once

// Small dense row-major matrices and partial-pivot LU. Sizes here are the
// number of unknowns of a model (at most a few dozen), so nothing fancier.

#include "mlsolve/scalar.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace mlsolve {

template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T(0.0)) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n)
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = T(1.0);
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    void resize(std::size_t rows, std::size_t cols)
    {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, T(0.0));
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

inline double magnitude(double v) { return std::fabs(v); }
inline double magnitude(const Complex& v) { return std::abs(v); }

/// In-place LU with partial pivoting. Returns false on an exactly zero pivot.
template <class T>
bool lu_factor(Matrix<T>& a, std::vector<std::size_t>& perm, int* sign = nullptr)
{
    const std::size_t n = a.rows();
    perm.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        perm[i] = i;
    int s = 1;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = magnitude(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            double v = magnitude(a(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best))
            return false;
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a(k, j), a(p, j));
            std::swap(perm[k], perm[p]);
            s = -s;
        }
        const T inv = T(1.0) / a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            T f = a(i, k) * inv;
            a(i, k) = f;
            if (f == T(0.0))
                continue;
            for (std::size_t j = k + 1; j < n; ++j)
                a(i, j) -= f * a(k, j);
        }
    }
    if (sign)
        *sign = s;
    return true;
}

/// Solves with a factorization from lu_factor; `b` is overwritten by the solution.
template <class T>
void lu_solve(const Matrix<T>& lu, const std::vector<std::size_t>& perm, std::span<T> b, std::vector<T>& scratch)
{
    const std::size_t n = lu.rows();
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        scratch[i] = b[perm[i]];
    for (std::size_t i = 0; i < n; ++i) {
        T acc = scratch[i];
        for (std::size_t j = 0; j < i; ++j)
            acc -= lu(i, j) * scratch[j];
        scratch[i] = acc;
    }
    for (std::size_t i = n; i-- > 0;) {
        T acc = scratch[i];
        for (std::size_t j = i + 1; j < n; ++j)
            acc -= lu(i, j) * scratch[j];
        scratch[i] = acc / lu(i, i);
    }
    for (std::size_t i = 0; i < n; ++i)
        b[i] = scratch[i];
}

template <class T>
T determinant(Matrix<T> a)
{
    std::vector<std::size_t> perm;
    int sign = 1;
    if (!lu_factor(a, perm, &sign))
        return T(0.0);
    T det = T(static_cast<double>(sign));
    for (std::size_t i = 0; i < a.rows(); ++i)
        det *= a(i, i);
    return det;
}

/// Inverse via LU; returns false when singular.
template <class T>
bool invert(const Matrix<T>& a, Matrix<T>& out)
{
    Matrix<T> lu = a;
    std::vector<std::size_t> perm;
    if (!lu_factor(lu, perm))
        return false;
    const std::size_t n = a.rows();
    out.resize(n, n);
    std::vector<T> col(n), scratch;
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(col.begin(), col.end(), T(0.0));
        col[j] = T(1.0);
        lu_solve(lu, perm, std::span<T>(col), scratch);
        for (std::size_t i = 0; i < n; ++i)
            out(i, j) = col[i];
    }
    return true;
}

template <class T>
double inf_norm(std::span<const T> v)
{
    double m = 0.0;
    for (const T& x : v)
        m = std::max(m, magnitude(x));
    return m;
}

} // namespace mlsolve
