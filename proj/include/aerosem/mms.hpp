#pragma once

/// @file mms.hpp
/// @brief Manufactured solutions for the wave equation rho_tt - c0^2 lap(rho) = f
/// on the unit cube with Neumann data on all faces.
///
/// Trigonometric case: u = sin(pi t) g1 g2, g1 = sin(4 pi P), g2 = sin(4 pi Q),
/// P = (x-1)(y-1)(z-1), Q = xyz. Both P and Q are harmonic, so
/// lap(g1) = -16 pi^2 g1 |grad P|^2 and likewise for g2, and
/// lap(g1 g2) = g2 lap(g1) + 2 grad(g1).grad(g2) + g1 lap(g2).

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "aerosem/assembly.hpp"
#include "aerosem/error.hpp"
#include "aerosem/geometry.hpp"
#include "aerosem/mesh.hpp"
#include "aerosem/newmark.hpp"
#include "aerosem/quadrature.hpp"
#include "aerosem/space.hpp"

namespace aerosem::mms {

/// Space-time solution u = s(t) g(x) with the pieces needed for forcing and data.
struct Manufactured {
    std::function<double(double)> s, s_t, s_tt;
    std::function<double(const Vec3&)> g;
    std::function<Vec3(const Vec3&)> grad_g;
    std::function<double(const Vec3&)> lap_g;

    double value(const Vec3& x, double t) const { return s(t) * g(x); }
    double velocity(const Vec3& x, double t) const { return s_t(t) * g(x); }
    double forcing(const Vec3& x, double t, double c0) const { return s_tt(t) * g(x) - c0 * c0 * s(t) * lap_g(x); }
    double flux(const Vec3& x, const Vec3& n, double t) const { return s(t) * dot(grad_g(x), n); }
};

inline Manufactured trigonometric() {
    constexpr double pi = std::numbers::pi;
    constexpr double k = 4.0 * pi;
    auto P = [](const Vec3& x) { return (x[0] - 1) * (x[1] - 1) * (x[2] - 1); };
    auto gP = [](const Vec3& x) {
        return Vec3{(x[1] - 1) * (x[2] - 1), (x[0] - 1) * (x[2] - 1), (x[0] - 1) * (x[1] - 1)};
    };
    auto Q = [](const Vec3& x) { return x[0] * x[1] * x[2]; };
    auto gQ = [](const Vec3& x) { return Vec3{x[1] * x[2], x[0] * x[2], x[0] * x[1]}; };

    Manufactured m;
    m.s = [](double t) { return std::sin(pi * t); };
    m.s_t = [](double t) { return pi * std::cos(pi * t); };
    m.s_tt = [](double t) { return -pi * pi * std::sin(pi * t); };
    m.g = [=](const Vec3& x) { return std::sin(k * P(x)) * std::sin(k * Q(x)); };
    m.grad_g = [=](const Vec3& x) {
        const double g1 = std::sin(k * P(x)), g2 = std::sin(k * Q(x));
        return (k * std::cos(k * P(x)) * g2) * gP(x) + (k * std::cos(k * Q(x)) * g1) * gQ(x);
    };
    m.lap_g = [=](const Vec3& x) {
        const double g1 = std::sin(k * P(x)), g2 = std::sin(k * Q(x));
        const Vec3 dp = gP(x), dq = gQ(x);
        const double lap1 = -k * k * g1 * dot(dp, dp);
        const double lap2 = -k * k * g2 * dot(dq, dq);
        const double cross_term = 2.0 * k * k * std::cos(k * P(x)) * std::cos(k * Q(x)) * dot(dp, dq);
        return g2 * lap1 + cross_term + g1 * lap2;
    };
    return m;
}

/// u = sin(pi t) p(x) p(y) p(z) with p(s) = sum_{j<=r} s^j / (j+1), a member of
/// Q_r so that the spatial representation is exact.
inline Manufactured polynomial(int r) {
    constexpr double pi = std::numbers::pi;
    auto p = [r](double s) {
        double v = 0.0;
        for (int j = r; j >= 0; --j) v = v * s + 1.0 / (j + 1);
        return v;
    };
    auto dp = [r](double s) {
        double v = 0.0;
        for (int j = r; j >= 1; --j) v = v * s + static_cast<double>(j) / (j + 1);
        return v;
    };
    auto ddp = [r](double s) {
        double v = 0.0;
        for (int j = r; j >= 2; --j) v = v * s + static_cast<double>(j * (j - 1)) / (j + 1);
        return v;
    };
    Manufactured m;
    m.s = [](double t) { return std::sin(pi * t); };
    m.s_t = [](double t) { return pi * std::cos(pi * t); };
    m.s_tt = [](double t) { return -pi * pi * std::sin(pi * t); };
    m.g = [=](const Vec3& x) { return p(x[0]) * p(x[1]) * p(x[2]); };
    m.grad_g = [=](const Vec3& x) {
        return Vec3{dp(x[0]) * p(x[1]) * p(x[2]), p(x[0]) * dp(x[1]) * p(x[2]), p(x[0]) * p(x[1]) * dp(x[2])};
    };
    m.lap_g = [=](const Vec3& x) {
        return ddp(x[0]) * p(x[1]) * p(x[2]) + p(x[0]) * ddp(x[1]) * p(x[2]) + p(x[0]) * p(x[1]) * ddp(x[2]);
    };
    return m;
}

/// Largest deviation between lap_g and a central-difference Laplacian of g.
inline double laplacian_check(const Manufactured& m, const std::vector<Vec3>& points, double h = 1e-4) {
    double worst = 0.0;
    for (const auto& x : points) {
        double fd = -6.0 * m.g(x);
        for (int a = 0; a < 3; ++a) {
            Vec3 p = x, q = x;
            p[a] += h;
            q[a] -= h;
            fd += m.g(p) + m.g(q);
        }
        fd /= h * h;
        worst = std::max(worst, std::abs(fd - m.lap_g(x)) / std::max(1.0, std::abs(m.lap_g(x))));
    }
    return worst;
}

struct CaseParams {
    int divisions = 4;
    int degree = 1;
    double dt = 1e-4;
    double t_final = 0.05;
    double c0 = 1.0;
    double beta = 0.25;
    double gamma = 0.5;
    double cg_tol = 1e-12;
    int cg_max_iter = 1000;
};

struct CaseResult {
    int degree = 0;
    int divisions = 0;
    double h = 0.0;
    std::size_t dofs = 0;
    double l2_error = 0.0;
    double runtime_s = 0.0;
    long cg_iterations = 0;
};

/// One row of a convergence study: unit cube, Neumann data on every face,
/// consistent initial data rho(0) = u(0), v(0) = u_t(0).
inline CaseResult run_case(const Manufactured& m, const CaseParams& p) {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = p.divisions;
    const auto space = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {n, n, n}), p.degree);
    AssembledOperators ops(space, p.c0, 1.0);
    const std::set<std::string> all = {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"};
    const auto mass = ops.mass();
    const double c0 = p.c0;

    // the Neumann load at the surface nodes and the forcing at all nodes are
    // precomputed in space and scaled by s(t), s_tt(t) per step
    std::vector<double> f_space(space.num_dofs()), f_lap(space.num_dofs()), f_neu(space.num_dofs(), 0.0);
    for (std::size_t i = 0; i < space.num_dofs(); ++i) {
        f_space[i] = mass[i] * m.g(space.nodes()[i]);
        f_lap[i] = -c0 * c0 * mass[i] * m.lap_g(space.nodes()[i]);
    }
    add_neumann_load(space, all, [&](const Vec3& x, const Vec3& nrm, double) { return dot(m.grad_g(x), nrm); }, 0.0, c0,
                     f_neu);
    auto load = [&](std::size_t, double t, std::span<double> out) {
        const double s = m.s(t), stt = m.s_tt(t);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = stt * f_space[i] + s * (f_lap[i] + f_neu[i]);
    };

    std::vector<double> rho0(space.num_dofs()), v0(space.num_dofs());
    for (std::size_t i = 0; i < space.num_dofs(); ++i) {
        rho0[i] = m.value(space.nodes()[i], 0.0);
        v0[i] = m.velocity(space.nodes()[i], 0.0);
    }
    NewmarkConfig cfg{.dt = p.dt, .t_final = p.t_final, .beta = p.beta, .gamma = p.gamma, .cg_tol = p.cg_tol,
                      .cg_max_iter = p.cg_max_iter};
    const auto res = run(ops, load, cfg, std::move(rho0), std::move(v0), {});
    const double T = res.final_state.t;

    CaseResult out;
    out.degree = p.degree;
    out.divisions = n;
    out.h = 1.0 / n;
    out.dofs = space.num_dofs();
    out.l2_error = quad::l2_error(space, res.final_state.rho, [&](const Vec3& x) { return m.value(x, T); }, p.degree + 4);
    out.cg_iterations = res.total_cg_iterations;
    out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace aerosem::mms
