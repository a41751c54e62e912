#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aerosem/gll.hpp"

using namespace aerosem;

namespace {

// Bisection on (1 - x^2) P_4'(x) with P_4' = (140 x^3 - 60 x) / 8, written out
// by hand so it does not share code with the Newton iteration.
double bisect_p4(double lo, double hi) {
    auto f = [](double x) { return (1 - x * x) * (140 * x * x * x - 60 * x) / 8.0; };
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((f(lo) < 0) == (f(mid) < 0))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double poly_eval(const std::vector<double>& c, double x) {
    double s = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) s = s * x + c[k];
    return s;
}

} // namespace

TEST(GllRule, DegreeOneIsTheEndpointRule) {
    const auto rule = gll::gll_rule(1);
    ASSERT_EQ(rule.nodes.size(), 2u);
    EXPECT_DOUBLE_EQ(rule.nodes[0], -1.0);
    EXPECT_DOUBLE_EQ(rule.nodes[1], 1.0);
    EXPECT_DOUBLE_EQ(rule.weights[0], 1.0);
    EXPECT_DOUBLE_EQ(rule.weights[1], 1.0);
}

TEST(GllRule, DegreeTwoNodesAndWeights) {
    const auto rule = gll::gll_rule(2);
    EXPECT_NEAR(rule.nodes[1], 0.0, 1e-15);
    EXPECT_NEAR(rule.weights[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(rule.weights[1], 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(rule.weights[2], 1.0 / 3.0, 1e-15);
    // oracle: monomials up to degree 3 integrate exactly
    for (int k = 0; k <= 3; ++k) {
        double q = 0.0;
        for (int i = 0; i < 3; ++i) q += rule.weights[i] * std::pow(rule.nodes[i], k);
        const double exact = (k % 2) ? 0.0 : 2.0 / (k + 1);
        EXPECT_NEAR(q, exact, 1e-15) << "k=" << k;
    }
}

TEST(GllRule, DegreeFourInteriorNodesMatchBisection) {
    const auto rule = gll::gll_rule(4);
    const double root = bisect_p4(0.3, 0.9);
    EXPECT_NEAR(root, std::sqrt(3.0 / 7.0), 1e-14);
    EXPECT_NEAR(rule.nodes[3], root, 1e-14);
    EXPECT_NEAR(rule.nodes[1], -root, 1e-14);
    EXPECT_NEAR(rule.nodes[2], 0.0, 1e-15);
    for (double x : rule.nodes) {
        const double res = (1 - x * x) * (140 * x * x * x - 60 * x) / 8.0;
        EXPECT_LT(std::abs(res), 1e-14);
    }
}

TEST(GllRule, RejectsUnsupportedDegree) {
    EXPECT_THROW(gll::gll_rule(0), Error);
    EXPECT_THROW(gll::gll_rule(13), Error);
}

TEST(GllRule, InvariantsHoldForAllSupportedDegrees) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (int r = 1; r <= gll::max_degree; ++r) {
        const auto rule = gll::gll_rule(r);
        EXPECT_EQ(rule.nodes.front(), -1.0);
        EXPECT_EQ(rule.nodes.back(), 1.0);
        double wsum = 0.0;
        for (int i = 0; i <= r; ++i) {
            EXPECT_GT(rule.weights[i], 0.0);
            wsum += rule.weights[i];
            if (i > 0) {
                EXPECT_GT(rule.nodes[i], rule.nodes[i - 1]);
            }
        }
        EXPECT_NEAR(wsum, 2.0, 1e-13);

        // random polynomial of degree 2r-1 against its exact integral
        std::vector<double> c(2 * r);
        for (auto& v : c) v = coef(rng);
        double exact = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (k % 2 == 0) exact += 2.0 * c[k] / (k + 1);
            scale += std::abs(c[k]);
        }
        double q = 0.0;
        for (int i = 0; i <= r; ++i) q += rule.weights[i] * poly_eval(c, rule.nodes[i]);
        EXPECT_NEAR(q, exact, 1e-12 * scale) << "r=" << r;
    }
}

TEST(Lagrange, CardinalValues) {
    const auto rule = gll::gll_rule(2);
    EXPECT_DOUBLE_EQ(gll::lagrange_eval(rule, 1, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(gll::lagrange_eval(rule, 0, 1.0), 0.0);
    EXPECT_NEAR(gll::lagrange_eval(rule, 1, 0.5), 0.75, 1e-15);
}

TEST(Lagrange, PartitionOfUnity) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> x(-1.0, 1.0);
    for (int r = 1; r <= gll::max_degree; ++r) {
        const auto rule = gll::gll_rule(r);
        std::vector<double> v(r + 1);
        for (int s = 0; s < 20; ++s) {
            gll::lagrange_all(rule, x(rng), v);
            double sum = 0.0;
            for (double e : v) sum += e;
            EXPECT_NEAR(sum, 1.0, 1e-13);
        }
    }
}

TEST(DiffMatrix, LinearCase) {
    const auto d = gll::diff_matrix(gll::gll_rule(1));
    EXPECT_NEAR(d(0, 0), -0.5, 1e-15);
    EXPECT_NEAR(d(0, 1), 0.5, 1e-15);
    EXPECT_NEAR(d(1, 0), -0.5, 1e-15);
    EXPECT_NEAR(d(1, 1), 0.5, 1e-15);
}

TEST(DiffMatrix, QuadraticMiddleRow) {
    const auto d = gll::diff_matrix(gll::gll_rule(2));
    EXPECT_NEAR(d(1, 0), -0.5, 1e-15);
    EXPECT_NEAR(d(1, 1), 0.0, 1e-15);
    EXPECT_NEAR(d(1, 2), 0.5, 1e-15);
}

TEST(DiffMatrix, RowSumsAndMonomialDerivatives) {
    for (int r = 1; r <= gll::max_degree; ++r) {
        const auto rule = gll::gll_rule(r);
        const auto d = gll::diff_matrix(rule);
        for (int i = 0; i <= r; ++i) {
            double s = 0.0;
            for (int j = 0; j <= r; ++j) s += d(i, j);
            EXPECT_NEAR(s, 0.0, 1e-13);
        }
        for (int k = 1; k <= r; ++k)
            for (int i = 0; i <= r; ++i) {
                double s = 0.0;
                for (int j = 0; j <= r; ++j) s += d(i, j) * std::pow(rule.nodes[j], k);
                EXPECT_NEAR(s, k * std::pow(rule.nodes[i], k - 1), 1e-11 * r * r) << "r=" << r << " k=" << k;
            }
    }
}

TEST(DiffMatrix, NilpotentOnDegreeRPolynomials) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (int r = 1; r <= 6; ++r) {
        const auto rule = gll::gll_rule(r);
        const auto d = gll::diff_matrix(rule);
        std::vector<double> c(r + 1);
        for (auto& v : c) v = coef(rng);
        std::vector<double> u(r + 1);
        for (int i = 0; i <= r; ++i) u[i] = poly_eval(c, rule.nodes[i]);
        for (int p = 0; p <= r; ++p) {
            std::vector<double> w(r + 1, 0.0);
            for (int i = 0; i <= r; ++i)
                for (int j = 0; j <= r; ++j) w[i] += d(i, j) * u[j];
            u = w;
        }
        for (double v : u) EXPECT_NEAR(v, 0.0, 1e-6);
    }
}
