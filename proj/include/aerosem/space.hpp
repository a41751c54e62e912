#pragma once

/// @file space.hpp
/// @brief Continuous degree-r spectral element space on a HexMesh.
///
/// Element-local nodes are numbered a + n*b + n*n*c (n = r+1), with a, b, c
/// the GLL indices along xi, eta, zeta. Global numbering comes from merging
/// geometrically coincident nodes in first-encounter order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aerosem/error.hpp"
#include "aerosem/geometry.hpp"
#include "aerosem/gll.hpp"
#include "aerosem/mesh.hpp"

namespace aerosem {

/// Local node indices of a face together with the GLL indices (p, q) along the
/// face's two free reference axes (ascending axis order).
struct FaceNode {
    int local = 0;
    int p = 0;
    int q = 0;
};

class SpectralSpace {
public:
    SpectralSpace(std::shared_ptr<const HexMesh> mesh, int degree)
        : mesh_(std::move(mesh)), rule_(gll::gll_rule(degree)), diff_(gll::diff_matrix(rule_)) {
        detail::require(mesh_ != nullptr, ErrorCode::invalid_argument, "null mesh");
        number_dofs();
    }

    const HexMesh& mesh() const { return *mesh_; }
    std::shared_ptr<const HexMesh> mesh_ptr() const { return mesh_; }
    int degree() const { return rule_.degree; }
    int nodes_per_axis() const { return rule_.size(); }
    int nodes_per_element() const { return npe_; }
    std::size_t num_dofs() const { return nodes_.size(); }
    std::size_t num_elements() const { return mesh_->num_elements(); }
    const gll::GllRule& rule() const { return rule_; }
    const gll::DiffMatrix& diff() const { return diff_; }

    std::span<const std::size_t> element_dofs(std::size_t e) const {
        return {dofs_.data() + e * npe_, static_cast<std::size_t>(npe_)};
    }
    const std::vector<std::size_t>& dof_map() const { return dofs_; }
    const std::vector<Vec3>& nodes() const { return nodes_; }

    /// Sorted unique global DOFs on faces with the given tag.
    const std::vector<std::size_t>& boundary_dofs(const std::string& tag) const {
        auto it = boundary_dofs_.find(tag);
        detail::require(it != boundary_dofs_.end(), ErrorCode::invalid_argument, "unknown boundary tag '" + tag + "'");
        return it->second;
    }

    std::vector<FaceNode> face_nodes(int face) const {
        const int n = rule_.size();
        const int axis = face / 2;
        const int fixed = (face % 2) ? n - 1 : 0;
        std::vector<FaceNode> out;
        for (int q = 0; q < n; ++q)
            for (int p = 0; p < n; ++p) {
                std::array<int, 3> idx{};
                idx[axis] = fixed;
                idx[axis == 0 ? 1 : 0] = p;
                idx[axis == 2 ? 1 : 2] = q;
                out.push_back({idx[0] + n * idx[1] + n * n * idx[2], p, q});
            }
        return out;
    }

    Vec3 local_xi(int local) const {
        const int n = rule_.size();
        return {rule_.nodes[local % n], rule_.nodes[(local / n) % n], rule_.nodes[local / (n * n)]};
    }

private:
    void number_dofs() {
        const int n = rule_.size();
        npe_ = n * n * n;
        const auto ne = mesh_->num_elements();
        const double h = mesh_->h();
        const double tol = 1e-10 * h;
        const double cell = 1e-8 * h;
        dofs_.assign(ne * npe_, 0);

        struct KeyHash {
            std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
                std::uint64_t x = static_cast<std::uint64_t>(k[0]) * 0x9E3779B97F4A7C15ULL;
                x ^= static_cast<std::uint64_t>(k[1]) * 0xC2B2AE3D27D4EB4FULL + (x << 6) + (x >> 2);
                x ^= static_cast<std::uint64_t>(k[2]) * 0x165667B19E3779F9ULL + (x << 6) + (x >> 2);
                return static_cast<std::size_t>(x);
            }
        };
        std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, KeyHash> grid;
        grid.reserve(ne * npe_ / 2);

        for (std::size_t e = 0; e < ne; ++e) {
            const auto corners = mesh_->corners(e);
            for (int l = 0; l < npe_; ++l) {
                const Vec3 x = detail::trilinear(corners, local_xi(l));
                std::array<std::int64_t, 3> key{};
                for (int a = 0; a < 3; ++a) key[a] = static_cast<std::int64_t>(std::floor(x[a] / cell));
                std::optional<std::size_t> found;
                for (int dx = -1; dx <= 1 && !found; ++dx)
                    for (int dy = -1; dy <= 1 && !found; ++dy)
                        for (int dz = -1; dz <= 1 && !found; ++dz) {
                            auto it = grid.find({key[0] + dx, key[1] + dy, key[2] + dz});
                            if (it == grid.end()) continue;
                            for (auto g : it->second)
                                if (distance(nodes_[g], x) < tol) {
                                    found = g;
                                    break;
                                }
                        }
                if (!found) {
                    found = nodes_.size();
                    nodes_.push_back(x);
                    grid[key].push_back(*found);
                }
                dofs_[e * npe_ + l] = *found;
            }
        }

        std::map<std::string, std::vector<std::size_t>> sets;
        for (const auto& tag : mesh_->tags()) sets[tag];
        for (const auto& bf : mesh_->boundary()) {
            auto& s = sets[bf.tag];
            for (const auto& fn : face_nodes(bf.local_face)) s.push_back(dofs_[bf.element * npe_ + fn.local]);
        }
        for (auto& [tag, s] : sets) {
            std::sort(s.begin(), s.end());
            s.erase(std::unique(s.begin(), s.end()), s.end());
        }
        boundary_dofs_ = std::move(sets);
    }

    std::shared_ptr<const HexMesh> mesh_;
    gll::GllRule rule_;
    gll::DiffMatrix diff_;
    int npe_ = 0;
    std::vector<std::size_t> dofs_;
    std::vector<Vec3> nodes_;
    std::map<std::string, std::vector<std::size_t>> boundary_dofs_;
};

inline SpectralSpace build_space(std::shared_ptr<const HexMesh> mesh, int degree) {
    return SpectralSpace(std::move(mesh), degree);
}

inline SpectralSpace build_space(HexMesh mesh, int degree) {
    return SpectralSpace(std::make_shared<const HexMesh>(std::move(mesh)), degree);
}

/// Coefficient vector tied to a space.
class SpectralField {
public:
    SpectralField(const SpectralSpace& space, std::vector<double> values) : space_(&space), values_(std::move(values)) {
        detail::require(values_.size() == space.num_dofs(), ErrorCode::invalid_argument,
                        "field length does not match the space's DOF count");
        for (double v : values_) detail::require(std::isfinite(v), ErrorCode::non_finite, "non-finite field entry");
    }

    const SpectralSpace& space() const { return *space_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::vector<double>&& take() && { return std::move(values_); }

private:
    const SpectralSpace* space_;
    std::vector<double> values_;
};

using ScalarFunction = std::function<double(const Vec3&)>;

inline SpectralField interpolate(const SpectralSpace& space, const ScalarFunction& g) {
    std::vector<double> v(space.num_dofs());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = g(space.nodes()[i]);
        detail::require(std::isfinite(v[i]), ErrorCode::non_finite,
                        "interpolated function is non-finite at node " + std::to_string(i));
    }
    return SpectralField(space, std::move(v));
}

/// Nonzero basis values at a reference point: (global dof, phi_i(x)).
inline std::vector<std::pair<std::size_t, double>> basis_at(const SpectralSpace& space, const RefPoint& p) {
    const int n = space.nodes_per_axis();
    std::vector<double> lx(n), ly(n), lz(n);
    gll::lagrange_all(space.rule(), p.xi[0], lx);
    gll::lagrange_all(space.rule(), p.xi[1], ly);
    gll::lagrange_all(space.rule(), p.xi[2], lz);
    const auto dofs = space.element_dofs(p.element);
    std::vector<std::pair<std::size_t, double>> out;
    out.reserve(dofs.size());
    for (int c = 0; c < n; ++c)
        for (int b = 0; b < n; ++b)
            for (int a = 0; a < n; ++a) out.emplace_back(dofs[a + n * b + n * n * c], lx[a] * ly[b] * lz[c]);
    return out;
}

inline std::vector<std::pair<std::size_t, double>> basis_at(const SpectralSpace& space, const Vec3& x) {
    const auto p = locate_point(space.mesh(), x);
    detail::require(p.has_value(), ErrorCode::not_found,
                    "point (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) + ", " + std::to_string(x[2]) +
                        ") lies outside the mesh");
    return basis_at(space, *p);
}

inline double evaluate(const SpectralSpace& space, std::span<const double> values, const Vec3& x) {
    double s = 0.0;
    for (const auto& [dof, phi] : basis_at(space, x)) s += phi * values[dof];
    return s;
}

inline double evaluate(const SpectralField& f, const Vec3& x) { return evaluate(f.space(), f.values(), x); }

/// Discrete L2 distance using the space's own GLL points.
inline double l2_error(const SpectralSpace& space, std::span<const double> values, const ScalarFunction& exact) {
    const int n = space.nodes_per_axis();
    const auto& w = space.rule().weights;
    double sum = 0.0;
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const auto corners = space.mesh().corners(e);
        const auto dofs = space.element_dofs(e);
        for (int l = 0; l < space.nodes_per_element(); ++l) {
            const Vec3 xi = space.local_xi(l);
            const double d = det(detail::trilinear_jacobian(corners, xi));
            const std::size_t g = dofs[l];
            const double diff = values[g] - exact(space.nodes()[g]);
            sum += w[l % n] * w[(l / n) % n] * w[l / (n * n)] * std::abs(d) * diff * diff;
        }
    }
    return std::sqrt(sum);
}

inline double l2_error(const SpectralField& f, const ScalarFunction& exact) { return l2_error(f.space(), f.values(), exact); }

} // namespace aerosem
