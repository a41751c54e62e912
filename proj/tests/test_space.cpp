#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aerosem/space.hpp"

using namespace aerosem;

namespace {

double cubic(const Vec3& x) { return 1.0 + x[0] * x[0] * x[1] - 2.0 * x[2] * x[2] * x[2] + x[0] * x[1] * x[2]; }

} // namespace

TEST(SpectralSpace, DofCounts) {
    EXPECT_EQ(build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {1, 1, 1}), 2).num_dofs(), 27u);
    EXPECT_EQ(build_space(generate_box_mesh({0, 0, 0}, {2, 1, 1}, {2, 1, 1}), 2).num_dofs(), 45u);
    EXPECT_EQ(build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {4, 4, 4}), 3).num_dofs(), 2197u);
}

TEST(SpectralSpace, SharedFaceNodesAreShared) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {2, 1, 1}, {2, 1, 1}), 3);
    const auto left = s.face_nodes(1);
    const auto right = s.face_nodes(0);
    ASSERT_EQ(left.size(), right.size());
    for (std::size_t i = 0; i < left.size(); ++i)
        EXPECT_EQ(s.element_dofs(0)[left[i].local], s.element_dofs(1)[right[i].local]);
}

TEST(SpectralSpace, NodesMatchElementMaps) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 2, 1}, {2, 3, 2}), 4);
    for (std::size_t e = 0; e < s.num_elements(); ++e)
        for (int l = 0; l < s.nodes_per_element(); ++l) {
            const auto x = map_to_physical(s.mesh(), {e, s.local_xi(l)});
            EXPECT_LT(distance(x, s.nodes()[s.element_dofs(e)[l]]), 1e-13);
        }
}

TEST(SpectralSpace, BoundaryDofSets) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {1, 1, 1}), 2);
    EXPECT_EQ(s.boundary_dofs("xmin").size(), 9u);
    for (auto d : s.boundary_dofs("zmax")) EXPECT_DOUBLE_EQ(s.nodes()[d][2], 1.0);
    EXPECT_THROW(s.boundary_dofs("nope"), Error);
}

TEST(SpectralSpace, InterpolationReproducesDegreeRPolynomials) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {3, 2, 2}), 3);
    const auto f = interpolate(s, cubic);
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Vec3 x = {u(rng), u(rng), u(rng)};
        EXPECT_NEAR(evaluate(f, x), cubic(x), 1e-12);
    }
    EXPECT_NEAR(l2_error(f, cubic), 0.0, 1e-14);
}

TEST(SpectralSpace, L2ErrorOfAConstantOffset) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {2, 1, 1}, {2, 1, 1}), 2);
    const auto f = interpolate(s, [](const Vec3&) { return 1.0; });
    EXPECT_NEAR(l2_error(f, [](const Vec3&) { return 0.0; }), std::sqrt(2.0), 1e-13);
}

TEST(SpectralSpace, BasisValuesFormPartitionOfUnity) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {2, 2, 2}), 4);
    const auto w = basis_at(s, Vec3{0.31, 0.77, 0.5});
    double sum = 0.0;
    for (const auto& [d, phi] : w) sum += phi;
    EXPECT_NEAR(sum, 1.0, 1e-13);
    try {
        basis_at(s, Vec3{2.0, 0.0, 0.0});
        FAIL() << "expected not_found";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
    }
}

TEST(SpectralField, RejectsBadValues) {
    const auto s = build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {1, 1, 1}), 1);
    EXPECT_THROW(SpectralField(s, std::vector<double>(7, 0.0)), Error);
    std::vector<double> v(8, 0.0);
    v[3] = std::nan("");
    EXPECT_THROW(SpectralField(s, v), Error);
    EXPECT_NO_THROW(SpectralField(s, std::vector<double>(8, 1.0)));
}

TEST(SpectralSpace, RejectsBadDegree) {
    EXPECT_THROW(build_space(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {1, 1, 1}), 0), Error);
}
