#pragma once

/// @file mesh.hpp
/// @brief Conforming hexahedral mesh with trilinear element maps.
///
/// Corner ordering is lexicographic in the reference coordinates: corner
/// c = i + 2j + 4k sits at (xi, eta, zeta) = (2i-1, 2j-1, 2k-1).
///
/// Local faces: 0 = {xi=-1}, 1 = {xi=+1}, 2 = {eta=-1}, 3 = {eta=+1},
/// 4 = {zeta=-1}, 5 = {zeta=+1}.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "aerosem/error.hpp"
#include "aerosem/geometry.hpp"

namespace aerosem {

struct BoundaryFace {
    std::size_t element = 0;
    int local_face = 0;
    std::string tag;
};

struct RefPoint {
    std::size_t element = 0;
    Vec3 xi{};
};

struct Jacobian {
    Mat3 J{};  ///< J[r][c] = d x_r / d xi_c
    double det = 0.0;
};

namespace detail {

inline constexpr std::array<std::array<int, 4>, 6> face_corners = {{
    {0, 2, 4, 6},  // xi = -1
    {1, 3, 5, 7},  // xi = +1
    {0, 1, 4, 5},  // eta = -1
    {2, 3, 6, 7},  // eta = +1
    {0, 1, 2, 3},  // zeta = -1
    {4, 5, 6, 7},  // zeta = +1
}};

inline double corner_sign(int c, int axis) { return ((c >> axis) & 1) ? 1.0 : -1.0; }

inline Vec3 trilinear(const std::array<Vec3, 8>& corners, const Vec3& xi) {
    Vec3 x{};
    for (int c = 0; c < 8; ++c) {
        const double n = 0.125 * (1.0 + corner_sign(c, 0) * xi[0]) * (1.0 + corner_sign(c, 1) * xi[1]) *
                         (1.0 + corner_sign(c, 2) * xi[2]);
        x += n * corners[c];
    }
    return x;
}

inline Mat3 trilinear_jacobian(const std::array<Vec3, 8>& corners, const Vec3& xi) {
    Mat3 J{};
    for (int c = 0; c < 8; ++c) {
        const double s0 = corner_sign(c, 0), s1 = corner_sign(c, 1), s2 = corner_sign(c, 2);
        const double a = 1.0 + s0 * xi[0], b = 1.0 + s1 * xi[1], d = 1.0 + s2 * xi[2];
        const std::array<double, 3> dn = {0.125 * s0 * b * d, 0.125 * a * s1 * d, 0.125 * a * b * s2};
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) J[r][k] += corners[c][r] * dn[k];
    }
    return J;
}

} // namespace detail

class HexMesh {
public:
    HexMesh() = default;

    /// Validates positivity of the element maps, conformity, and boundary tagging.
    HexMesh(std::vector<Vec3> vertices, std::vector<std::array<std::size_t, 8>> elements,
            std::vector<BoundaryFace> boundary)
        : vertices_(std::move(vertices)), elements_(std::move(elements)), boundary_(std::move(boundary)) {
        validate();
        build_locator();
    }

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<std::array<std::size_t, 8>>& elements() const { return elements_; }
    const std::vector<BoundaryFace>& boundary() const { return boundary_; }
    std::size_t num_elements() const { return elements_.size(); }
    double h() const { return h_; }

    std::array<Vec3, 8> corners(std::size_t e) const {
        std::array<Vec3, 8> c{};
        for (int i = 0; i < 8; ++i) c[i] = vertices_[elements_[e][i]];
        return c;
    }

    std::set<std::string> tags() const {
        std::set<std::string> t;
        for (const auto& b : boundary_) t.insert(b.tag);
        return t;
    }

    Vec3 bbox_lo() const { return lo_; }
    Vec3 bbox_hi() const { return hi_; }

    /// Elements whose (slightly inflated) bounding box contains x, ascending.
    std::vector<std::size_t> candidates(const Vec3& x) const {
        std::vector<std::size_t> out;
        for (int a = 0; a < 3; ++a)
            if (x[a] < lo_[a] - pad_ || x[a] > hi_[a] + pad_) return out;
        std::array<int, 3> b{};
        for (int a = 0; a < 3; ++a)
            b[a] = std::clamp(static_cast<int>((x[a] - lo_[a]) / cell_[a]), 0, nb_[a] - 1);
        for (auto e : buckets_[(b[2] * nb_[1] + b[1]) * nb_[0] + b[0]]) {
            const auto& [elo, ehi] = ebox_[e];
            bool in = true;
            for (int a = 0; a < 3; ++a) in = in && x[a] >= elo[a] - pad_ && x[a] <= ehi[a] + pad_;
            if (in) out.push_back(e);
        }
        return out;
    }

    /// Elements whose bounding box overlaps [lo, hi], ascending.
    std::vector<std::size_t> candidates(const Vec3& lo, const Vec3& hi) const {
        std::vector<std::size_t> out;
        std::array<int, 3> b0{}, b1{};
        for (int a = 0; a < 3; ++a) {
            if (hi[a] < lo_[a] - pad_ || lo[a] > hi_[a] + pad_) return out;
            b0[a] = std::clamp(static_cast<int>((lo[a] - lo_[a]) / cell_[a]), 0, nb_[a] - 1);
            b1[a] = std::clamp(static_cast<int>((hi[a] - lo_[a]) / cell_[a]), 0, nb_[a] - 1);
        }
        for (int z = b0[2]; z <= b1[2]; ++z)
            for (int y = b0[1]; y <= b1[1]; ++y)
                for (int x = b0[0]; x <= b1[0]; ++x)
                    for (auto e : buckets_[(z * nb_[1] + y) * nb_[0] + x]) {
                        const auto& [elo, ehi] = ebox_[e];
                        bool in = true;
                        for (int a = 0; a < 3; ++a) in = in && hi[a] >= elo[a] - pad_ && lo[a] <= ehi[a] + pad_;
                        if (in) out.push_back(e);
                    }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// True when the element map is affine (a parallelepiped).
    bool is_affine(std::size_t e) const {
        const auto c = corners(e);
        const Vec3 a = c[1] - c[0], b = c[2] - c[0], d = c[4] - c[0];
        for (int k = 0; k < 8; ++k) {
            const Vec3 x = c[0] + static_cast<double>(k & 1) * a + static_cast<double>((k >> 1) & 1) * b +
                           static_cast<double>((k >> 2) & 1) * d;
            if (distance(x, c[k]) > 1e-12 * h_) return false;
        }
        return true;
    }

private:
    void validate() {
        detail::require(!elements_.empty(), ErrorCode::invalid_argument, "mesh has no elements");
        for (const auto& v : vertices_)
            detail::require(is_finite(v), ErrorCode::invalid_argument, "non-finite vertex coordinate");
        h_ = 0.0;
        for (std::size_t e = 0; e < elements_.size(); ++e) {
            for (auto v : elements_[e])
                detail::require(v < vertices_.size(), ErrorCode::invalid_argument,
                                "element " + std::to_string(e) + " references missing vertex");
            const auto c = corners(e);
            for (int k = 0; k < 8; ++k) {
                const Vec3 xi = {detail::corner_sign(k, 0), detail::corner_sign(k, 1), detail::corner_sign(k, 2)};
                const double d = det(detail::trilinear_jacobian(c, xi));
                detail::require(d > 0.0, ErrorCode::degenerate_element,
                                "element " + std::to_string(e) + " has detJ <= 0 at corner " + std::to_string(k));
                for (int l = k + 1; l < 8; ++l) h_ = std::max(h_, distance(c[k], c[l]));
            }
        }

        // Faces are identified through geometrically merged vertices so that a
        // mesh with duplicated-but-mismatched vertices is caught.
        const double tol = 1e-10 * h_;
        std::vector<std::size_t> merged(vertices_.size());
        {
            std::map<std::array<long long, 3>, std::vector<std::size_t>> grid;
            const double cell = std::max(tol * 100.0, 1e-300);
            for (std::size_t v = 0; v < vertices_.size(); ++v) {
                std::array<long long, 3> key{};
                for (int a = 0; a < 3; ++a) key[a] = static_cast<long long>(std::floor(vertices_[v][a] / cell));
                std::optional<std::size_t> found;
                for (int dx = -1; dx <= 1 && !found; ++dx)
                    for (int dy = -1; dy <= 1 && !found; ++dy)
                        for (int dz = -1; dz <= 1 && !found; ++dz) {
                            auto it = grid.find({key[0] + dx, key[1] + dy, key[2] + dz});
                            if (it == grid.end()) continue;
                            for (auto w : it->second)
                                if (distance(vertices_[v], vertices_[w]) < tol) {
                                    found = merged[w];
                                    break;
                                }
                        }
                merged[v] = found ? *found : v;
                grid[key].push_back(v);
            }
        }

        std::map<std::array<std::size_t, 4>, std::vector<std::pair<std::size_t, int>>> faces;
        for (std::size_t e = 0; e < elements_.size(); ++e)
            for (int f = 0; f < 6; ++f) faces[face_key(e, f, merged)].push_back({e, f});

        std::map<std::pair<std::size_t, int>, int> tag_count;
        for (const auto& b : boundary_) {
            detail::require(b.element < elements_.size() && b.local_face >= 0 && b.local_face < 6,
                            ErrorCode::invalid_argument, "boundary entry references missing element face");
            detail::require(!b.tag.empty(), ErrorCode::invalid_argument, "boundary face with empty tag");
            ++tag_count[{b.element, b.local_face}];
        }
        for (const auto& [key, owners] : faces) {
            if (owners.size() > 2)
                throw Error(ErrorCode::invalid_argument, "face shared by more than two elements");
            for (const auto& o : owners) {
                const int n = tag_count.count(o) ? tag_count[o] : 0;
                if (owners.size() == 2 && n != 0)
                    throw Error(ErrorCode::invalid_argument, "interior face of element " + std::to_string(o.first) +
                                                                 " carries a boundary tag");
                if (owners.size() == 1 && n != 1)
                    throw Error(ErrorCode::invalid_argument,
                                "face " + std::to_string(o.second) + " of element " + std::to_string(o.first) +
                                    (n == 0 ? " is unmatched and untagged (non-conforming mesh?)"
                                            : " carries more than one tag"));
            }
        }
    }

    std::array<std::size_t, 4> face_key(std::size_t e, int f, const std::vector<std::size_t>& merged) const {
        std::array<std::size_t, 4> k{};
        for (int i = 0; i < 4; ++i) k[i] = merged[elements_[e][detail::face_corners[f][i]]];
        std::sort(k.begin(), k.end());
        return k;
    }

    void build_locator() {
        lo_ = {1e300, 1e300, 1e300};
        hi_ = {-1e300, -1e300, -1e300};
        ebox_.resize(elements_.size());
        for (std::size_t e = 0; e < elements_.size(); ++e) {
            Vec3 a = {1e300, 1e300, 1e300}, b = {-1e300, -1e300, -1e300};
            for (auto v : elements_[e])
                for (int k = 0; k < 3; ++k) {
                    a[k] = std::min(a[k], vertices_[v][k]);
                    b[k] = std::max(b[k], vertices_[v][k]);
                }
            ebox_[e] = {a, b};
            for (int k = 0; k < 3; ++k) {
                lo_[k] = std::min(lo_[k], a[k]);
                hi_[k] = std::max(hi_[k], b[k]);
            }
        }
        pad_ = 1e-9 * h_;
        const double per_axis = std::max(1.0, std::cbrt(static_cast<double>(elements_.size())));
        for (int k = 0; k < 3; ++k) {
            nb_[k] = static_cast<int>(std::min(per_axis * 2.0, 256.0));
            cell_[k] = std::max((hi_[k] - lo_[k]) / nb_[k], 1e-300);
        }
        buckets_.assign(static_cast<std::size_t>(nb_[0]) * nb_[1] * nb_[2], {});
        for (std::size_t e = 0; e < elements_.size(); ++e) {
            std::array<int, 3> b0{}, b1{};
            for (int k = 0; k < 3; ++k) {
                b0[k] = std::clamp(static_cast<int>((ebox_[e].first[k] - pad_ - lo_[k]) / cell_[k]), 0, nb_[k] - 1);
                b1[k] = std::clamp(static_cast<int>((ebox_[e].second[k] + pad_ - lo_[k]) / cell_[k]), 0, nb_[k] - 1);
            }
            for (int z = b0[2]; z <= b1[2]; ++z)
                for (int y = b0[1]; y <= b1[1]; ++y)
                    for (int x = b0[0]; x <= b1[0]; ++x) buckets_[(z * nb_[1] + y) * nb_[0] + x].push_back(e);
        }
    }

    std::vector<Vec3> vertices_;
    std::vector<std::array<std::size_t, 8>> elements_;
    std::vector<BoundaryFace> boundary_;
    double h_ = 0.0;

    Vec3 lo_{}, hi_{};
    double pad_ = 0.0;
    std::vector<std::pair<Vec3, Vec3>> ebox_;
    std::array<int, 3> nb_{1, 1, 1};
    Vec3 cell_{1, 1, 1};
    std::vector<std::vector<std::size_t>> buckets_;
};

/// Box-face tag names, ordered xmin, xmax, ymin, ymax, zmin, zmax.
using BoxTags = std::array<std::string, 6>;

inline BoxTags default_box_tags() { return {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"}; }

inline HexMesh generate_box_mesh(const Vec3& lo, const Vec3& hi, const std::array<int, 3>& divisions,
                                 const BoxTags& tags = default_box_tags()) {
    for (int a = 0; a < 3; ++a) {
        detail::require(divisions[a] >= 1, ErrorCode::invalid_argument, "box divisions must be >= 1");
        detail::require(hi[a] > lo[a], ErrorCode::invalid_argument, "box extents must be positive");
    }
    const auto [nx, ny, nz] = divisions;
    auto vid = [&](int i, int j, int k) { return static_cast<std::size_t>((k * (ny + 1) + j) * (nx + 1) + i); };

    std::vector<Vec3> verts;
    verts.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                // endpoints hit exactly, interior planes evenly spaced
                auto coord = [](double a, double b, int idx, int n) {
                    return idx == n ? b : a + (b - a) * static_cast<double>(idx) / n;
                };
                verts.push_back({coord(lo[0], hi[0], i, nx), coord(lo[1], hi[1], j, ny), coord(lo[2], hi[2], k, nz)});
            }

    std::vector<std::array<std::size_t, 8>> elems;
    std::vector<BoundaryFace> boundary;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const std::size_t e = elems.size();
                std::array<std::size_t, 8> el{};
                for (int c = 0; c < 8; ++c) el[c] = vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                elems.push_back(el);
                if (i == 0) boundary.push_back({e, 0, tags[0]});
                if (i == nx - 1) boundary.push_back({e, 1, tags[1]});
                if (j == 0) boundary.push_back({e, 2, tags[2]});
                if (j == ny - 1) boundary.push_back({e, 3, tags[3]});
                if (k == 0) boundary.push_back({e, 4, tags[4]});
                if (k == nz - 1) boundary.push_back({e, 5, tags[5]});
            }
    return HexMesh(std::move(verts), std::move(elems), std::move(boundary));
}

inline Vec3 map_to_physical(const HexMesh& mesh, const RefPoint& p) {
    return detail::trilinear(mesh.corners(p.element), p.xi);
}

inline Jacobian jacobian(const HexMesh& mesh, const RefPoint& p) {
    Jacobian j;
    j.J = detail::trilinear_jacobian(mesh.corners(p.element), p.xi);
    j.det = det(j.J);
    detail::require(j.det > 0.0, ErrorCode::degenerate_element,
                    "element " + std::to_string(p.element) + " has detJ <= 0 at queried point");
    return j;
}

namespace detail {

/// Newton inversion of one element's trilinear map. Empty when the
/// iteration fails to converge or hits a singular Jacobian.
inline std::optional<Vec3> invert_trilinear(const std::array<Vec3, 8>& corners, const Vec3& x, double h) {
    Vec3 xi{0.0, 0.0, 0.0};
    for (int it = 0; it < 50; ++it) {
        const Vec3 res = trilinear(corners, xi) - x;
        const Mat3 J = trilinear_jacobian(corners, xi);
        const double d = det(J);
        if (!(std::abs(d) > 0.0)) return std::nullopt;
        const Vec3 dxi = mul(inverse(J, d), res);
        xi = xi - dxi;
        for (double& v : xi)
            if (std::abs(v) > 10.0) return std::nullopt;
        if (std::max({std::abs(dxi[0]), std::abs(dxi[1]), std::abs(dxi[2])}) < 1e-12) {
            if (norm(trilinear(corners, xi) - x) <= 1e-10 * h) return xi;
        }
    }
    if (norm(trilinear(corners, xi) - x) <= 1e-10 * h) return xi;
    return std::nullopt;
}

inline double outside_distance(const Vec3& xi) {
    double d = 0.0;
    for (double v : xi) d = std::max(d, std::abs(v) - 1.0);
    return d;
}

} // namespace detail

/// Element and reference coordinates of a physical point. Points lying
/// strictly inside an element win over points that are inside only up to the
/// 1e-10 tolerance; exact ties (shared faces) go to the lowest element index.
inline std::optional<RefPoint> locate_point(const HexMesh& mesh, const Vec3& x) {
    std::optional<RefPoint> best;
    double best_out = 1e-10;
    for (auto e : mesh.candidates(x)) {
        const auto xi = detail::invert_trilinear(mesh.corners(e), x, mesh.h());
        if (!xi) continue;
        const double out = detail::outside_distance(*xi);
        if (out <= 0.0) return RefPoint{e, *xi};
        if (out <= best_out && (!best || out < best_out)) {
            best = RefPoint{e, *xi};
            best_out = out;
        }
    }
    return best;
}

} // namespace aerosem
