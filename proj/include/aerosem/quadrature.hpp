#pragma once

/// @file quadrature.hpp
/// @brief Gauss-Legendre and tetrahedral rules used away from the GLL grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "aerosem/error.hpp"
#include "aerosem/geometry.hpp"
#include "aerosem/gll.hpp"
#include "aerosem/mesh.hpp"
#include "aerosem/space.hpp"

namespace aerosem::quad {

/// n-point Gauss-Legendre rule on [-1, 1], exact to degree 2n-1.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussRule gauss_legendre(int n) {
    detail::require(n >= 1 && n <= 64, ErrorCode::invalid_argument, "Gauss-Legendre point count must lie in [1, 64]");
    GaussRule g;
    g.nodes.resize(n);
    g.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p, pm1;
            gll::legendre_pair(n, x, p, pm1);
            dp = n * (x * p - pm1) / (x * x - 1.0);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p, pm1;
        gll::legendre_pair(n, x, p, pm1);
        dp = n * (x * p - pm1) / (x * x - 1.0);
        g.nodes[n - 1 - i] = x;
        g.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return g;
}

/// Points in barycentric form (weights of vertices 1..3; vertex 0 takes the
/// rest) with weights summing to 1 (multiply by the tet volume).
struct TetRule {
    std::vector<Vec3> points;
    std::vector<double> weights;
    int order = 0;
};

/// order 1: centroid; order 2: symmetric 4-point rule (degree 2);
/// order n >= 3: collapsed Gauss product rule with n points per direction,
/// exact for polynomials of total degree 2n - 3.
inline TetRule tet_rule(int order) {
    detail::require(order >= 1 && order <= 16, ErrorCode::invalid_argument, "tetrahedral rule order must lie in [1, 16]");
    TetRule t;
    t.order = order;
    if (order == 1) {
        t.points = {{0.25, 0.25, 0.25}};
        t.weights = {1.0};
        return t;
    }
    if (order == 2) {
        const double a = 0.5854101966249685, b = 0.1381966011250105;
        t.points = {{b, b, b}, {a, b, b}, {b, a, b}, {b, b, a}};
        t.weights = {0.25, 0.25, 0.25, 0.25};
        return t;
    }
    const auto g = gauss_legendre(order);
    for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j)
            for (int k = 0; k < order; ++k) {
                const double u = 0.5 * (g.nodes[i] + 1.0), v = 0.5 * (g.nodes[j] + 1.0), w = 0.5 * (g.nodes[k] + 1.0);
                const double wt = 0.125 * g.weights[i] * g.weights[j] * g.weights[k];
                t.points.push_back({u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * w});
                // dV = (1-u)^2 (1-v) du dv dw, reference tet volume 1/6
                t.weights.push_back(6.0 * wt * (1.0 - u) * (1.0 - u) * (1.0 - v));
            }
    return t;
}

/// Smallest collapsed rule exact for total degree p.
inline int tet_order_for_degree(int p) { return std::max(3, (p + 4) / 2); }

inline double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return det(Mat3{{{b[0] - a[0], c[0] - a[0], d[0] - a[0]},
                     {b[1] - a[1], c[1] - a[1], d[1] - a[1]},
                     {b[2] - a[2], c[2] - a[2], d[2] - a[2]}}}) /
           6.0;
}

/// L2 distance between a discrete field and `exact`, integrated with
/// n-point Gauss-Legendre per axis (independent of the GLL grid).
inline double l2_error(const SpectralSpace& space, std::span<const double> values, const ScalarFunction& exact,
                       int points_per_axis) {
    const auto g = gauss_legendre(points_per_axis);
    const int n = space.nodes_per_axis();
    std::vector<std::vector<double>> lag(points_per_axis, std::vector<double>(n));
    for (int q = 0; q < points_per_axis; ++q) gll::lagrange_all(space.rule(), g.nodes[q], lag[q]);
    double sum = 0.0;
    std::vector<double> tmp(space.nodes_per_element());
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const auto corners = space.mesh().corners(e);
        const auto dofs = space.element_dofs(e);
        for (int l = 0; l < space.nodes_per_element(); ++l) tmp[l] = values[dofs[l]];
        for (int qc = 0; qc < points_per_axis; ++qc)
            for (int qb = 0; qb < points_per_axis; ++qb)
                for (int qa = 0; qa < points_per_axis; ++qa) {
                    const Vec3 xi = {g.nodes[qa], g.nodes[qb], g.nodes[qc]};
                    double uh = 0.0;
                    for (int c = 0; c < n; ++c)
                        for (int b = 0; b < n; ++b) {
                            const double lbc = lag[qb][b] * lag[qc][c];
                            for (int a = 0; a < n; ++a) uh += tmp[a + n * b + n * n * c] * lag[qa][a] * lbc;
                        }
                    const double d = det(detail::trilinear_jacobian(corners, xi));
                    const double diff = uh - exact(detail::trilinear(corners, xi));
                    sum += g.weights[qa] * g.weights[qb] * g.weights[qc] * std::abs(d) * diff * diff;
                }
    }
    return std::sqrt(sum);
}

} // namespace aerosem::quad
