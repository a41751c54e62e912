#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aerosem/assembly.hpp"
#include "aerosem/newmark.hpp"

using namespace aerosem;

namespace {

/// Scalar oscillator m a + b v + c0^2 k rho = f.
struct Scalar {
    std::vector<double> m{1.0}, b{};
    double k = 1.0;
    double c = 1.0;
    std::size_t size() const { return 1; }
    std::span<const double> mass() const { return m; }
    std::span<const double> damping() const { return b; }
    double c0() const { return c; }
    void apply_stiffness(std::span<const double> x, std::span<double> y) const { y[0] = k * x[0]; }
};

double oscillator_error(double dt, double beta) {
    Scalar sys;
    NewmarkConfig cfg{.dt = dt, .t_final = 1.0, .beta = beta, .gamma = 0.5};
    const auto res = run(sys, [](std::size_t, double, std::span<double>) {}, cfg, {1.0}, {0.0}, {});
    return std::abs(res.final_state.rho[0] - std::cos(1.0));
}

std::vector<double> smooth_bump(const SpectralSpace& s) {
    return std::vector<double>(interpolate(s, [](const Vec3& x) {
                                   return std::exp(-20 * ((x[0] - 0.4) * (x[0] - 0.4) + (x[1] - 0.5) * (x[1] - 0.5) +
                                                          (x[2] - 0.6) * (x[2] - 0.6)));
                               }).take());
}

} // namespace

TEST(Newmark, ScalarFirstStep) {
    Scalar sys;
    NewmarkConfig cfg{.dt = 0.1, .t_final = 0.1};
    NewmarkIntegrator<Scalar> integ(sys, cfg);
    std::vector<double> zero{0.0};
    auto s = integ.initialize({1.0}, {0.0}, zero);
    EXPECT_DOUBLE_EQ(s.a[0], -1.0);
    integ.step(s, zero);
    // trapezoidal rule amplification for x'' = -x: (1 - dt^2/4) / (1 + dt^2/4)
    EXPECT_NEAR(s.rho[0], 0.9975 / 1.0025, 1e-14);
    EXPECT_NEAR(s.rho[0], 0.99501246, 1e-8);
    EXPECT_EQ(s.k, 1u);
    EXPECT_DOUBLE_EQ(s.t, 0.1);
}

TEST(Newmark, SecondOrderInTime) {
    for (double beta : {0.25, 0.0}) {
        const double e1 = oscillator_error(0.01, beta), e2 = oscillator_error(0.005, beta);
        EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.1) << "beta=" << beta;
    }
}

TEST(Newmark, ExplicitPathIsCentralDifference) {
    Scalar sys;
    sys.k = 3.0;
    const double dt = 0.05;
    NewmarkConfig cfg{.dt = dt, .t_final = 1.0, .beta = 0.0, .gamma = 0.5};
    const auto res = run(sys, [](std::size_t, double, std::span<double>) {}, cfg, {1.0}, {0.0}, {});
    // central difference with the Taylor starter rho^1 = rho^0 + dt^2/2 a^0
    std::vector<double> x{1.0, 1.0 - 0.5 * dt * dt * 3.0};
    for (std::size_t k = 1; k < 20; ++k) x.push_back(2 * x[k] - x[k - 1] - dt * dt * 3.0 * x[k]);
    EXPECT_NEAR(res.final_state.rho[0], x[20], 1e-13);
}

TEST(Newmark, EnergyIsConservedWithoutDamping) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {2, 2, 2}), 3);
    AssembledOperators ops(s, 1.0, 1.0);
    NewmarkConfig cfg{.dt = 0.01, .t_final = 0.5, .cg_tol = 1e-14};
    NewmarkIntegrator<AssembledOperators> integ(ops, cfg);
    std::vector<double> f(ops.size(), 0.0);
    auto st = integ.initialize(smooth_bump(s), std::vector<double>(ops.size(), 0.0), f);
    const double e0 = discrete_energy(st, ops);
    for (std::size_t k = 0; k < cfg.num_steps(); ++k) integ.step(st, f);
    EXPECT_NEAR(discrete_energy(st, ops) / e0, 1.0, 1e-10);
}

TEST(Newmark, DampedEnergyDecreasesMonotonically) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {2, 2, 2}), 3);
    AssembledOperators ops(s, 1.0, 1.0);
    ops.add_impedance({"xmin", "xmax"}, 1.0);
    NewmarkConfig cfg{.dt = 0.01, .t_final = 1.0, .cg_tol = 1e-14};
    NewmarkIntegrator<AssembledOperators> integ(ops, cfg);
    std::vector<double> f(ops.size(), 0.0);
    auto st = integ.initialize(smooth_bump(s), std::vector<double>(ops.size(), 0.0), f);
    double prev = discrete_energy(st, ops);
    const double e0 = prev;
    for (std::size_t k = 0; k < cfg.num_steps(); ++k) {
        integ.step(st, f);
        const double e = discrete_energy(st, ops);
        EXPECT_LE(e, prev * (1 + 1e-12));
        prev = e;
    }
    EXPECT_LT(prev, 0.9 * e0);
}

TEST(Newmark, ResponseIsLinearInTheLoad) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {2, 1, 1}), 2);
    AssembledOperators ops(s, 1.0, 1.0);
    ops.add_impedance({"xmax"}, 2.0);
    const PointSource src(s, {0.3, 0.5, 0.5}, [](double t) { return std::sin(10 * t); });
    NewmarkConfig cfg{.dt = 0.01, .t_final = 0.2, .cg_tol = 1e-14};
    const std::vector<double> zero(ops.size(), 0.0);
    const auto one = run(ops, [&](std::size_t, double t, std::span<double> out) { src.add_load(t, out); }, cfg, zero,
                         zero, {});
    const auto two = run(
        ops,
        [&](std::size_t, double t, std::span<double> out) {
            src.add_load(t, out);
            src.add_load(t, out);
        },
        cfg, zero, zero, {});
    for (std::size_t i = 0; i < ops.size(); ++i)
        EXPECT_NEAR(two.final_state.rho[i], 2 * one.final_state.rho[i], 1e-12);
}

TEST(Newmark, RunRecordsProbesAndSnapshots) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {2, 2, 2}), 2);
    AssembledOperators ops(s, 1.0, 1.0);
    const auto rho0 = smooth_bump(s);
    const auto probe = make_probe(s, "p", {0.4, 0.5, 0.6});
    NewmarkConfig cfg{.dt = 0.05, .t_final = 0.5, .snapshot_stride = 5};
    int snaps = 0;
    RunHooks hooks;
    hooks.on_snapshot = [&](const WaveState&) { ++snaps; };
    const auto res = run(ops, [](std::size_t, double, std::span<double>) {}, cfg, rho0,
                         std::vector<double>(ops.size(), 0.0), {probe}, hooks);
    ASSERT_EQ(res.rows.size(), 11u);
    EXPECT_DOUBLE_EQ(res.rows[0][0], 0.0);
    EXPECT_NEAR(res.rows[0][1], evaluate(s, rho0, {0.4, 0.5, 0.6}), 1e-14);
    EXPECT_NEAR(res.rows.back()[0], 0.5, 1e-14);
    EXPECT_EQ(snaps, 3);
}

TEST(Newmark, ConfigValidation) {
    EXPECT_THROW((NewmarkConfig{.dt = 0.0, .t_final = 1.0}.validate()), Error);
    EXPECT_THROW((NewmarkConfig{.dt = 0.1, .t_final = 1.0, .beta = 0.7}.validate()), Error);
    EXPECT_NO_THROW((NewmarkConfig{.dt = 0.1, .t_final = 1.0}.validate()));
}

TEST(Newmark, CgFailureNamesTheStep) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {2, 2, 2}), 3);
    AssembledOperators ops(s, 1.0, 1.0);
    NewmarkConfig cfg{.dt = 0.5, .t_final = 1.0, .cg_tol = 1e-14, .cg_max_iter = 1};
    try {
        run(ops, [](std::size_t, double, std::span<double>) {}, cfg, smooth_bump(s),
            std::vector<double>(ops.size(), 0.0), {});
        FAIL() << "expected solver failure";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::solver_failure);
        EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
    }
}
