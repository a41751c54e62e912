#pragma once

/// @file gll.hpp
/// @brief Gauss-Legendre-Lobatto rules, the nodal Lagrange basis built on them,
/// and the nodal differentiation matrix on the reference interval [-1, 1].

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "aerosem/error.hpp"

namespace aerosem::gll {

inline constexpr int max_degree = 12;

/// Legendre P_n(x) and P_{n-1}(x) by the three-term recurrence.
inline void legendre_pair(int n, double x, double& pn, double& pnm1) {
    double p0 = 1.0, p1 = x;
    if (n == 0) {
        pn = 1.0;
        pnm1 = 0.0;
        return;
    }
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    pn = p1;
    pnm1 = p0;
}

inline double legendre(int n, double x) {
    double pn = 0.0, pnm1 = 0.0;
    legendre_pair(n, x, pn, pnm1);
    return pn;
}

/// Degree-r GLL rule: r+1 nodes (the roots of (1-x^2) P'_r) with their weights.
/// Also carries the barycentric weights of the nodal basis so evaluation
/// does not recompute them.
struct GllRule {
    int degree = 0;
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> barycentric;

    int size() const { return degree + 1; }
};

inline GllRule gll_rule(int r) {
    detail::require(r >= 1 && r <= max_degree, ErrorCode::invalid_argument,
                    "GLL degree " + std::to_string(r) + " outside supported range [1, 12]");
    const int n = r + 1;
    GllRule rule;
    rule.degree = r;
    rule.nodes.resize(n);
    rule.weights.resize(n);

    // Newton on (1 - x^2) P'_r(x) = r (P_{r-1} - x P_r), started from the
    // Chebyshev-Gauss-Lobatto points. The update below is that Newton step
    // written with the Legendre recurrence.
    for (int i = 0; i < n; ++i) {
        double x = -std::cos(std::numbers::pi * i / r);
        if (i == 0 || i == r) {
            rule.nodes[i] = x;
            continue;
        }
        for (int it = 0; it < 100; ++it) {
            double pn = 0.0, pnm1 = 0.0;
            legendre_pair(r, x, pn, pnm1);
            // d/dx[(1-x^2)P'_r] = -r(r+1) P_r, and (1-x^2)P'_r = r(P_{r-1} - x P_r)
            const double f = r * (pnm1 - x * pn);
            const double df = -r * (r + 1) * pn;
            const double dx = f / df;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = x;
    }
    rule.nodes.front() = -1.0;
    rule.nodes.back() = 1.0;
    // enforce exact antisymmetry of the node set
    for (int i = 0; i < n / 2; ++i) {
        const double s = 0.5 * (rule.nodes[r - i] - rule.nodes[i]);
        rule.nodes[i] = -s;
        rule.nodes[r - i] = s;
    }
    if (n % 2 == 1) rule.nodes[r / 2] = 0.0;

    for (int i = 0; i < n; ++i) {
        const double p = legendre(r, rule.nodes[i]);
        rule.weights[i] = 2.0 / (r * (r + 1) * p * p);
    }

    rule.barycentric.assign(n, 1.0);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k)
            if (k != j) rule.barycentric[j] *= rule.nodes[j] - rule.nodes[k];
        rule.barycentric[j] = 1.0 / rule.barycentric[j];
    }
    return rule;
}

/// Values of all r+1 cardinal polynomials at x (barycentric form). Works
/// outside [-1, 1] as well, which the point-location iterations rely on.
inline void lagrange_all(const GllRule& rule, double x, std::span<double> out) {
    const int n = rule.size();
    for (int j = 0; j < n; ++j) {
        if (x == rule.nodes[j]) {
            for (int k = 0; k < n; ++k) out[k] = (k == j) ? 1.0 : 0.0;
            return;
        }
    }
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
        out[j] = rule.barycentric[j] / (x - rule.nodes[j]);
        denom += out[j];
    }
    for (int j = 0; j < n; ++j) out[j] /= denom;
}

inline double lagrange_eval(const GllRule& rule, int j, double x) {
    std::vector<double> vals(rule.size());
    lagrange_all(rule, x, vals);
    return vals[j];
}

/// D(i, j) = l_j'(xi_i), stored row-major.
struct DiffMatrix {
    int n = 0;
    std::vector<double> entries;

    double operator()(int i, int j) const { return entries[i * n + j]; }
};

inline DiffMatrix diff_matrix(const GllRule& rule) {
    const int n = rule.size();
    DiffMatrix d{n, std::vector<double>(n * n, 0.0)};
    for (int i = 0; i < n; ++i) {
        double diag = 0.0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double v =
                (rule.barycentric[j] / rule.barycentric[i]) / (rule.nodes[i] - rule.nodes[j]);
            d.entries[i * n + j] = v;
            diag -= v;
        }
        // negative-sum trick: rows sum to zero to roundoff
        d.entries[i * n + i] = diag;
    }
    return d;
}

} // namespace aerosem::gll
