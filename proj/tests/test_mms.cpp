#include <gtest/gtest.h>

#include <random>

#include "aerosem/mms.hpp"

using namespace aerosem;

namespace {

std::vector<Vec3> random_points(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> p(n);
    for (auto& x : p) x = {u(rng), u(rng), u(rng)};
    return p;
}

} // namespace

TEST(Manufactured, LaplacianMatchesFiniteDifferences) {
    const auto pts = random_points(100, 3);
    EXPECT_LT(mms::laplacian_check(mms::trigonometric(), pts), 1e-6);
    for (int r = 1; r <= 4; ++r) EXPECT_LT(mms::laplacian_check(mms::polynomial(r), pts), 1e-6);
}

TEST(Manufactured, NeumannDatumMatchesFiniteDifferenceNormalDerivative) {
    const auto m = mms::trigonometric();
    const double h = 1e-6, t = 0.3;
    for (const auto& p : random_points(20, 5)) {
        // point on the face x = 1 with outward normal +x
        const Vec3 x = {1.0, p[1], p[2]};
        const double fd = (m.value(x, t) - m.value({1.0 - h, p[1], p[2]}, t)) / h;
        EXPECT_NEAR(m.flux(x, {1, 0, 0}, t), fd, 1e-4 * std::max(1.0, std::abs(fd)));
        const Vec3 y = {p[0], 0.0, p[2]};
        const double fdy = (m.value(y, t) - m.value({p[0], h, p[2]}, t)) / h;
        EXPECT_NEAR(m.flux(y, {0, -1, 0}, t), fdy, 1e-4 * std::max(1.0, std::abs(fdy)));
    }
}

TEST(Manufactured, VanishesAtTimeZeroWithNonzeroVelocity) {
    const auto m = mms::trigonometric();
    const Vec3 x = {0.3, 0.6, 0.8};
    EXPECT_EQ(m.value(x, 0.0), 0.0);
    EXPECT_NEAR(m.velocity(x, 0.0), std::numbers::pi * m.g(x), 1e-15);
}

TEST(MmsCase, ErrorDecreasesUnderRefinement) {
    const auto m = mms::trigonometric();
    mms::CaseParams p{.divisions = 2, .degree = 2, .dt = 1e-3, .t_final = 0.02};
    const auto a = mms::run_case(m, p);
    p.divisions = 4;
    const auto b = mms::run_case(m, p);
    EXPECT_LT(b.l2_error, a.l2_error);
    EXPECT_EQ(b.dofs, 9u * 9u * 9u);
}

TEST(MmsCase, PolynomialSolutionHasSmallSpatialError) {
    mms::CaseParams p{.divisions = 2, .degree = 3, .dt = 1e-3, .t_final = 0.02};
    const auto r = mms::run_case(mms::polynomial(3), p);
    EXPECT_LT(r.l2_error, 1e-5);
}
