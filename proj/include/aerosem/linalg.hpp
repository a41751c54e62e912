#pragma once

/// @file linalg.hpp
/// @brief Vector kernels, a compressed-sparse-row matrix, and diagonally
/// preconditioned conjugate gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "aerosem/error.hpp"

namespace aerosem::linalg {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sum(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v;
    return s;
}

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

/// (row, column, value)
using Triplet = std::tuple<std::size_t, std::size_t, double>;

class CsrMatrix {
public:
    CsrMatrix() = default;

    /// Builds from unsorted (row, col, value) triplets; duplicates are summed.
    CsrMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets)
        : rows_(rows), cols_(cols) {
        std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
        });
        row_ptr_.assign(rows + 1, 0);
        for (std::size_t k = 0; k < triplets.size();) {
            const auto [r, c, v0] = triplets[k];
            double v = v0;
            std::size_t m = k + 1;
            while (m < triplets.size() && std::get<0>(triplets[m]) == r && std::get<1>(triplets[m]) == c)
                v += std::get<2>(triplets[m++]);
            col_.push_back(c);
            val_.push_back(v);
            ++row_ptr_[r + 1];
            k = m;
        }
        for (std::size_t r = 0; r < rows; ++r) row_ptr_[r + 1] += row_ptr_[r];
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return val_.size(); }

    void multiply(std::span<const double> x, std::span<double> y) const {
        for (std::size_t r = 0; r < rows_; ++r) {
            double s = 0.0;
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += val_[k] * x[col_[k]];
            y[r] = s;
        }
    }

    std::vector<double> multiply(std::span<const double> x) const {
        std::vector<double> y(rows_);
        multiply(x, y);
        return y;
    }

    /// Column sums, i.e. 1^T A.
    std::vector<double> column_sums() const {
        std::vector<double> s(cols_, 0.0);
        for (std::size_t k = 0; k < val_.size(); ++k) s[col_[k]] += val_[k];
        return s;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(std::min(rows_, cols_), 0.0);
        for (std::size_t r = 0; r < d.size(); ++r)
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
                if (col_[k] == r) d[r] += val_[k];
        return d;
    }

    double at(std::size_t r, std::size_t c) const {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            if (col_[k] == c) return val_[k];
        return 0.0;
    }

    const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const { return col_; }
    const std::vector<double>& values() const { return val_; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_;
    std::vector<double> val_;
};

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Preconditioned CG for an SPD operator `apply(x, y)` (y = A x) with a
/// diagonal preconditioner. `x` carries the initial guess in and the
/// solution out. Convergence is ||r|| <= tol * ||b||.
template <class Apply>
CgResult pcg(const Apply& apply, std::span<const double> diag, std::span<const double> b, std::span<double> x,
             double tol, int max_iter) {
    const std::size_t n = b.size();
    CgResult res;
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        res.converged = true;
        return res;
    }
    std::vector<double> r(n), z(n), p(n), q(n);
    apply(std::span<const double>(x), std::span<double>(q));
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    double rnorm = norm2(r);
    if (rnorm <= tol * bnorm) {
        res.converged = true;
        res.relative_residual = rnorm / bnorm;
        return res;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= max_iter; ++it) {
        apply(std::span<const double>(p), std::span<double>(q));
        const double pq = dot(p, q);
        if (!(pq > 0.0)) {
            res.iterations = it;
            res.relative_residual = rnorm / bnorm;
            return res;
        }
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rnorm = norm2(r);
        res.iterations = it;
        res.relative_residual = rnorm / bnorm;
        if (rnorm <= tol * bnorm) {
            res.converged = true;
            return res;
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return res;
}

/// pcg that throws on non-convergence, naming the context.
template <class Apply>
CgResult pcg_or_throw(const Apply& apply, std::span<const double> diag, std::span<const double> b, std::span<double> x,
                      double tol, int max_iter, const std::string& context) {
    const auto res = pcg(apply, diag, b, x, tol, max_iter);
    if (!res.converged)
        throw Error(ErrorCode::solver_failure, context + ": CG did not converge in " + std::to_string(res.iterations) +
                                                   " iterations (relative residual " +
                                                   std::to_string(res.relative_residual) + ")");
    return res;
}

} // namespace aerosem::linalg
