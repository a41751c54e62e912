#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <random>
#include <string>

#include "aerosem/gll.hpp"
#include "aerosem/mesh.hpp"
#include "aerosem/mesh_io.hpp"

using namespace aerosem;

namespace {

HexMesh unit_cube(int n) { return generate_box_mesh({0, 0, 0}, {1, 1, 1}, {n, n, n}); }

/// 4^3 unit-cube mesh with interior vertices displaced by up to `amp` * h.
HexMesh distorted_cube(double amp, unsigned seed) {
    const auto base = unit_cube(4);
    auto verts = base.vertices();
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(-amp, amp);
    for (auto& v : verts) {
        bool interior = true;
        for (double c : v) interior = interior && c > 1e-12 && c < 1 - 1e-12;
        if (interior)
            for (double& c : v) c += d(rng) * 0.25;
    }
    return HexMesh(verts, base.elements(), base.boundary());
}

} // namespace

TEST(BoxMesh, SingleElement) {
    const auto m = unit_cube(1);
    EXPECT_EQ(m.num_elements(), 1u);
    EXPECT_EQ(m.vertices().size(), 8u);
    EXPECT_EQ(m.boundary().size(), 6u);
}

TEST(BoxMesh, VertexAndElementCounts) {
    const auto m = unit_cube(4);
    EXPECT_EQ(m.num_elements(), 64u);
    EXPECT_EQ(m.vertices().size(), 125u);
    EXPECT_EQ(m.boundary().size(), 6u * 16u);
}

TEST(BoxMesh, SharedFaceIsNotABoundaryFace) {
    const auto m = generate_box_mesh({0, 0, 0}, {1, 1, 1}, {2, 1, 1});
    EXPECT_EQ(m.boundary().size(), 10u);
    for (const auto& b : m.boundary()) {
        EXPECT_FALSE(b.element == 0 && b.local_face == 1);
        EXPECT_FALSE(b.element == 1 && b.local_face == 0);
    }
}

TEST(BoxMesh, RejectsBadParameters) {
    EXPECT_THROW(generate_box_mesh({0, 0, 0}, {1, 1, 1}, {0, 1, 1}), Error);
    EXPECT_THROW(generate_box_mesh({0, 0, 0}, {1, -1, 1}, {1, 1, 1}), Error);
}

TEST(BoxMesh, TagsFollowBoxFaces) {
    BoxTags tags = {"inlet", "outlet", "wall", "wall", "wall", "wall"};
    const auto m = generate_box_mesh({0, 0, 0}, {2, 1, 1}, {2, 1, 1}, tags);
    const auto t = m.tags();
    EXPECT_EQ(t.size(), 3u);
    for (const auto& b : m.boundary()) {
        if (b.local_face == 0) {
            EXPECT_EQ(b.tag, "inlet");
        }
        if (b.local_face == 1) {
            EXPECT_EQ(b.tag, "outlet");
        }
    }
}

TEST(ElementMap, TrilinearExamples) {
    const auto m = unit_cube(1);
    const auto c = map_to_physical(m, {0, {0, 0, 0}});
    for (double v : c) EXPECT_DOUBLE_EQ(v, 0.5);
    const auto corner = map_to_physical(m, {0, {-1, -1, -1}});
    for (double v : corner) EXPECT_DOUBLE_EQ(v, 0.0);

    const auto big = generate_box_mesh({0, 0, 0}, {2, 2, 2}, {1, 1, 1});
    const auto f = map_to_physical(big, {0, {1, 0, 0}});
    EXPECT_DOUBLE_EQ(f[0], 2.0);
    EXPECT_DOUBLE_EQ(f[1], 1.0);
    EXPECT_DOUBLE_EQ(f[2], 1.0);
}

TEST(ElementMap, JacobianExamples) {
    const auto m = unit_cube(1);
    const auto j = jacobian(m, {0, {0.3, -0.2, 0.9}});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(j.J[r][c], r == c ? 0.5 : 0.0, 1e-15);
    EXPECT_NEAR(j.det, 0.125, 1e-15);

    const auto slab = generate_box_mesh({0, 0, 0}, {2, 1, 1}, {1, 1, 1});
    EXPECT_NEAR(jacobian(slab, {0, {0, 0, 0}}).det, 0.25, 1e-15);
}

TEST(ElementMap, ShearedHexHasVaryingJacobian) {
    auto verts = unit_cube(1).vertices();
    // shift the top face (zeta = +1 corners 4..7) partially
    verts[6][0] += 0.3;
    verts[7][0] += 0.3;
    const HexMesh m(verts, unit_cube(1).elements(), unit_cube(1).boundary());
    const auto a = jacobian(m, {0, {-0.5, -0.5, 0.0}});
    const auto b = jacobian(m, {0, {0.5, 0.5, 0.0}});
    double diff = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) diff += std::abs(a.J[r][c] - b.J[r][c]);
    EXPECT_GT(diff, 1e-3);

    // finite-difference oracle on the map
    const Vec3 xi = {0.2, -0.4, 0.6};
    const auto jac = jacobian(m, {0, xi});
    const double h = 1e-6;
    for (int c = 0; c < 3; ++c) {
        Vec3 p = xi, q = xi;
        p[c] += h;
        q[c] -= h;
        const auto xp = map_to_physical(m, {0, p});
        const auto xq = map_to_physical(m, {0, q});
        for (int r = 0; r < 3; ++r) EXPECT_NEAR(jac.J[r][c], (xp[r] - xq[r]) / (2 * h), 1e-9);
    }
}

TEST(ElementMap, InvertedElementIsRejected) {
    auto m = unit_cube(1);
    auto elems = m.elements();
    std::swap(elems[0][0], elems[0][1]);
    std::swap(elems[0][2], elems[0][3]);
    std::swap(elems[0][4], elems[0][5]);
    std::swap(elems[0][6], elems[0][7]);
    EXPECT_THROW(HexMesh(m.vertices(), elems, m.boundary()), Error);
}

TEST(LocatePoint, FacePointGoesToTheContainingElement) {
    const auto m = unit_cube(4);
    const auto p = locate_point(m, {0.5 + 1e-12, 0.5, 0.5});
    ASSERT_TRUE(p.has_value());
    const auto lo = map_to_physical(m, {p->element, {-1, -1, -1}});
    EXPECT_NEAR(lo[0], 0.5, 1e-14);
    EXPECT_NEAR(p->xi[0], -1.0, 1e-10);
}

TEST(LocatePoint, ExactSharedFaceTiesGoToLowestIndex) {
    const auto m = generate_box_mesh({0, 0, 0}, {1, 1, 1}, {2, 1, 1});
    const auto p = locate_point(m, {0.5, 0.5, 0.5});
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(p->element, 0u);
}

TEST(LocatePoint, CentroidAndOutside) {
    const auto m = unit_cube(4);
    const auto p = locate_point(m, {0.625, 0.375, 0.125});
    ASSERT_TRUE(p.has_value());
    for (double v : p->xi) EXPECT_NEAR(v, 0.0, 1e-10);
    EXPECT_FALSE(locate_point(m, {1.5, 0.5, 0.5}).has_value());
    EXPECT_FALSE(locate_point(m, {0.5, -1e-6, 0.5}).has_value());
}

TEST(LocatePoint, RoundTripOnDistortedMesh) {
    const auto m = distorted_cube(0.2, 5);
    std::mt19937 rng(17);
    std::uniform_int_distribution<std::size_t> el(0, m.num_elements() - 1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const RefPoint src{el(rng), {u(rng), u(rng), u(rng)}};
        const auto x = map_to_physical(m, src);
        const auto p = locate_point(m, x);
        ASSERT_TRUE(p.has_value());
        EXPECT_LT(distance(map_to_physical(m, *p), x), 1e-9 * m.h());
        for (double v : p->xi) EXPECT_LE(std::abs(v), 1.0 + 1e-10);
    }
}

TEST(MeshValidation, VolumeFromGllQuadrature) {
    const auto m = generate_box_mesh({0, 0, 0}, {2, 1, 0.5}, {3, 2, 5});
    const auto rule = gll::gll_rule(3);
    double vol = 0.0;
    for (std::size_t e = 0; e < m.num_elements(); ++e)
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    vol += rule.weights[a] * rule.weights[b] * rule.weights[c] *
                           jacobian(m, {e, {rule.nodes[a], rule.nodes[b], rule.nodes[c]}}).det;
    EXPECT_NEAR(vol, 1.0, 1e-12);

    const auto d = distorted_cube(0.2, 9);
    double dv = 0.0;
    for (std::size_t e = 0; e < d.num_elements(); ++e)
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    dv += rule.weights[a] * rule.weights[b] * rule.weights[c] *
                          jacobian(d, {e, {rule.nodes[a], rule.nodes[b], rule.nodes[c]}}).det;
    EXPECT_NEAR(dv, 1.0, 1e-12);
}

TEST(MeshValidation, PerturbedSharedVertexIsRejected) {
    // two elements with their own copies of the shared-face vertices
    const auto good = generate_box_mesh({0, 0, 0}, {2, 1, 1}, {2, 1, 1});
    auto verts = good.vertices();
    auto elems = good.elements();
    for (int c = 0; c < 8; ++c) {
        if ((c & 1) == 0) {  // xi = -1 corners of element 1 lie on the shared face
            verts.push_back(verts[elems[1][c]]);
            elems[1][c] = verts.size() - 1;
        }
    }
    EXPECT_NO_THROW(HexMesh(verts, elems, good.boundary()));
    verts.back()[1] += 0.01;
    EXPECT_THROW(HexMesh(verts, elems, good.boundary()), Error);
}

TEST(MeshValidation, UntaggedOrDoublyTaggedFacesAreRejected) {
    const auto m = unit_cube(1);
    auto b = m.boundary();
    b.pop_back();
    EXPECT_THROW(HexMesh(m.vertices(), m.elements(), b), Error);
    b = m.boundary();
    b.push_back({0, 0, "extra"});
    EXPECT_THROW(HexMesh(m.vertices(), m.elements(), b), Error);
}

TEST(MeshIo, JsonRoundTripAndSchemaErrors) {
    const auto m = generate_box_mesh({0, 0, 0}, {1, 2, 3}, {2, 2, 1});
    const auto j = mesh_to_json(m);
    const auto back = mesh_from_json(j);
    EXPECT_EQ(back.vertices(), m.vertices());
    EXPECT_EQ(back.elements(), m.elements());
    ASSERT_EQ(back.boundary().size(), m.boundary().size());

    auto bad = j;
    bad.erase("version");
    EXPECT_THROW(mesh_from_json(bad), Error);
    bad = j;
    bad["elements"][0] = "oops";
    EXPECT_THROW(mesh_from_json(bad), Error);
}
