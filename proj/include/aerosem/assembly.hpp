#pragma once

/// @file assembly.hpp
/// @brief SEM-NI operators on a SpectralSpace: collocated (diagonal) mass,
/// matrix-free stiffness, impedance damping, convective operators C^x, C^y,
/// C^z, and the load vectors for volume forcing, Neumann data and point
/// sources.
///
/// All element kernels use sum factorization over the 1D differentiation
/// matrix; geometric factors are evaluated once at the GLL nodes and stored.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aerosem/error.hpp"
#include "aerosem/geometry.hpp"
#include "aerosem/linalg.hpp"
#include "aerosem/space.hpp"

namespace aerosem {

/// Per-element, per-GLL-node metric data.
///   wdet  = w_a w_b w_c |det J|
///   g     = wdet * Jinv Jinv^T   (symmetric; xx, yy, zz, xy, xz, yz)
///   wjinv = wdet * Jinv          (Jinv[m][l] = d xi_m / d x_l)
class GeometricFactors {
public:
    explicit GeometricFactors(const SpectralSpace& space) {
        const int n = space.nodes_per_axis();
        const int npe = space.nodes_per_element();
        const auto& w = space.rule().weights;
        const auto ne = space.num_elements();
        wdet_.resize(ne * npe);
        g_.resize(ne * npe);
        wjinv_.resize(ne * npe);
        for (std::size_t e = 0; e < ne; ++e) {
            const auto corners = space.mesh().corners(e);
            for (int l = 0; l < npe; ++l) {
                const Mat3 J = detail::trilinear_jacobian(corners, space.local_xi(l));
                const double d = det(J);
                detail::require(d > 0.0, ErrorCode::degenerate_element,
                                "element " + std::to_string(e) + " has detJ <= 0 at a GLL node");
                const Mat3 Ji = inverse(J, d);
                const double wd = w[l % n] * w[(l / n) % n] * w[l / (n * n)] * d;
                const std::size_t k = e * npe + l;
                wdet_[k] = wd;
                auto& g = g_[k];
                auto gg = [&](int a, int b) { return wd * (Ji[a][0] * Ji[b][0] + Ji[a][1] * Ji[b][1] + Ji[a][2] * Ji[b][2]); };
                g = {gg(0, 0), gg(1, 1), gg(2, 2), gg(0, 1), gg(0, 2), gg(1, 2)};
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) wjinv_[k][a][b] = wd * Ji[a][b];
            }
        }
    }

    std::span<const double> wdet() const { return wdet_; }
    const std::vector<std::array<double, 6>>& g() const { return g_; }
    const std::vector<Mat3>& wjinv() const { return wjinv_; }

private:
    std::vector<double> wdet_;
    std::vector<std::array<double, 6>> g_;
    std::vector<Mat3> wjinv_;
};

namespace detail {

/// Reference gradient of element-local nodal values: out_m(a,b,c) = d/dxi_m.
inline void ref_gradient(const gll::DiffMatrix& D, int n, const double* u, double* g0, double* g1, double* g2) {
    const int n2 = n * n;
    for (int c = 0; c < n; ++c)
        for (int b = 0; b < n; ++b)
            for (int a = 0; a < n; ++a) {
                double s0 = 0.0, s1 = 0.0, s2 = 0.0;
                for (int k = 0; k < n; ++k) {
                    s0 += D(a, k) * u[k + n * b + n2 * c];
                    s1 += D(b, k) * u[a + n * k + n2 * c];
                    s2 += D(c, k) * u[a + n * b + n2 * k];
                }
                const int l = a + n * b + n2 * c;
                g0[l] = s0;
                g1[l] = s1;
                g2[l] = s2;
            }
}

/// Transposed reference gradient: out(a,b,c) = sum_m sum_j d(phi_abc)/dxi_m (xi_j) f_m(j).
inline void ref_gradient_transpose(const gll::DiffMatrix& D, int n, const double* f0, const double* f1,
                                   const double* f2, double* out) {
    const int n2 = n * n;
    for (int c = 0; c < n; ++c)
        for (int b = 0; b < n; ++b)
            for (int a = 0; a < n; ++a) {
                double s = 0.0;
                for (int k = 0; k < n; ++k) {
                    s += D(k, a) * f0[k + n * b + n2 * c];
                    s += D(k, b) * f1[a + n * k + n2 * c];
                    s += D(k, c) * f2[a + n * b + n2 * k];
                }
                out[a + n * b + n2 * c] = s;
            }
}

} // namespace detail

/// Collocated mass: M_i = sum over elements touching i of w |det J| at the node.
inline std::vector<double> assemble_mass(const SpectralSpace& space, const GeometricFactors& geo) {
    std::vector<double> m(space.num_dofs(), 0.0);
    const auto& map = space.dof_map();
    const auto wd = geo.wdet();
    for (std::size_t k = 0; k < map.size(); ++k) m[map[k]] += wd[k];
    return m;
}

inline std::vector<double> assemble_mass(const SpectralSpace& space) { return assemble_mass(space, GeometricFactors(space)); }

/// Matrix-free K with K_ij = sum_e (grad phi_j, grad phi_i)^NI.
class StiffnessOperator {
public:
    explicit StiffnessOperator(const SpectralSpace& space)
        : space_(&space), geo_(std::make_shared<const GeometricFactors>(space)) {}
    StiffnessOperator(const SpectralSpace& space, std::shared_ptr<const GeometricFactors> geo)
        : space_(&space), geo_(std::move(geo)) {}

    std::size_t size() const { return space_->num_dofs(); }
    const SpectralSpace& space() const { return *space_; }
    const GeometricFactors& geometry() const { return *geo_; }

    void apply(std::span<const double> u, std::span<double> out) const {
        const int n = space_->nodes_per_axis();
        const int npe = space_->nodes_per_element();
        const auto& D = space_->diff();
        const auto& map = space_->dof_map();
        const auto& G = geo_->g();
        std::vector<double> ul(npe), g0(npe), g1(npe), g2(npe), f0(npe), f1(npe), f2(npe), ol(npe);
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t e = 0; e < space_->num_elements(); ++e) {
            const std::size_t base = e * npe;
            for (int l = 0; l < npe; ++l) ul[l] = u[map[base + l]];
            detail::ref_gradient(D, n, ul.data(), g0.data(), g1.data(), g2.data());
            for (int l = 0; l < npe; ++l) {
                const auto& g = G[base + l];
                f0[l] = g[0] * g0[l] + g[3] * g1[l] + g[4] * g2[l];
                f1[l] = g[3] * g0[l] + g[1] * g1[l] + g[5] * g2[l];
                f2[l] = g[4] * g0[l] + g[5] * g1[l] + g[2] * g2[l];
            }
            detail::ref_gradient_transpose(D, n, f0.data(), f1.data(), f2.data(), ol.data());
            for (int l = 0; l < npe; ++l) out[map[base + l]] += ol[l];
        }
    }

    std::vector<double> apply(std::span<const double> u) const {
        std::vector<double> out(u.size());
        apply(u, out);
        return out;
    }

private:
    const SpectralSpace* space_;
    std::shared_ptr<const GeometricFactors> geo_;
};

inline std::vector<double> apply_stiffness(const SpectralSpace& space, std::span<const double> u) {
    return StiffnessOperator(space).apply(u);
}

/// C^l with C^l_ij = sum_e (phi_j, [grad phi_i]_l)^NI, applied matrix-free.
class ConvectiveOperators {
public:
    explicit ConvectiveOperators(const SpectralSpace& space)
        : space_(&space), geo_(std::make_shared<const GeometricFactors>(space)) {}
    ConvectiveOperators(const SpectralSpace& space, std::shared_ptr<const GeometricFactors> geo)
        : space_(&space), geo_(std::move(geo)) {}

    /// out = sum_l C^l q_l; pass an empty span for a component that is zero.
    void apply_sum(std::span<const double> qx, std::span<const double> qy, std::span<const double> qz,
                   std::span<double> out) const {
        const int n = space_->nodes_per_axis();
        const int npe = space_->nodes_per_element();
        const auto& D = space_->diff();
        const auto& map = space_->dof_map();
        const auto& WJ = geo_->wjinv();
        const std::array<std::span<const double>, 3> q = {qx, qy, qz};
        std::vector<double> f0(npe), f1(npe), f2(npe), ol(npe);
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t e = 0; e < space_->num_elements(); ++e) {
            const std::size_t base = e * npe;
            for (int l = 0; l < npe; ++l) {
                const auto& wj = WJ[base + l];
                const std::size_t g = map[base + l];
                double s0 = 0.0, s1 = 0.0, s2 = 0.0;
                for (int c = 0; c < 3; ++c) {
                    if (q[c].empty()) continue;
                    const double v = q[c][g];
                    s0 += wj[0][c] * v;
                    s1 += wj[1][c] * v;
                    s2 += wj[2][c] * v;
                }
                f0[l] = s0;
                f1[l] = s1;
                f2[l] = s2;
            }
            detail::ref_gradient_transpose(D, n, f0.data(), f1.data(), f2.data(), ol.data());
            for (int l = 0; l < npe; ++l) out[map[base + l]] += ol[l];
        }
    }

    void apply(int component, std::span<const double> q, std::span<double> out) const {
        detail::require(component >= 0 && component < 3, ErrorCode::invalid_argument, "component must be 0, 1 or 2");
        const std::span<const double> none;
        apply_sum(component == 0 ? q : none, component == 1 ? q : none, component == 2 ? q : none, out);
    }

    std::size_t size() const { return space_->num_dofs(); }

private:
    const SpectralSpace* space_;
    std::shared_ptr<const GeometricFactors> geo_;
};

inline ConvectiveOperators assemble_convective(const SpectralSpace& space) { return ConvectiveOperators(space); }

/// Visit every GLL node of every boundary face whose tag is in `tags`:
/// fn(global dof, position, outward unit normal, surface weight w_p w_q |dS|).
template <class Fn>
void for_each_surface_node(const SpectralSpace& space, const std::set<std::string>& tags, Fn&& fn) {
    for (const auto& tag : tags) (void)space.boundary_dofs(tag);  // unknown tags throw
    const auto& w = space.rule().weights;
    for (const auto& bf : space.mesh().boundary()) {
        if (!tags.count(bf.tag)) continue;
        const auto corners = space.mesh().corners(bf.element);
        const int axis = bf.local_face / 2;
        const double side = (bf.local_face % 2) ? 1.0 : -1.0;
        const int t1 = axis == 0 ? 1 : 0;
        const int t2 = axis == 2 ? 1 : 2;
        for (const auto& fn_node : space.face_nodes(bf.local_face)) {
            const Mat3 J = detail::trilinear_jacobian(corners, space.local_xi(fn_node.local));
            const Vec3 a = {J[0][t1], J[1][t1], J[2][t1]};
            const Vec3 b = {J[0][t2], J[1][t2], J[2][t2]};
            const Vec3 axis_dir = {J[0][axis], J[1][axis], J[2][axis]};
            Vec3 nrm = cross(a, b);
            const double ds = norm(nrm);
            nrm = (1.0 / ds) * nrm;
            if (side * dot(nrm, axis_dir) < 0.0) nrm = -1.0 * nrm;
            const std::size_t g = space.element_dofs(bf.element)[fn_node.local];
            fn(g, space.nodes()[g], nrm, w[fn_node.p] * w[fn_node.q] * ds);
        }
    }
}

/// Collocated surface mass over the tagged faces.
inline std::vector<double> surface_mass(const SpectralSpace& space, const std::set<std::string>& tags) {
    std::vector<double> s(space.num_dofs(), 0.0);
    for_each_surface_node(space, tags, [&](std::size_t g, const Vec3&, const Vec3&, double w) { s[g] += w; });
    return s;
}

/// Impedance damping diagonal B_i = (rho0 c0^2 / Z) * surface mass of i over Gamma_Z.
inline std::vector<double> assemble_damping(const SpectralSpace& space, const std::set<std::string>& tags, double Z,
                                            double rho0, double c0) {
    detail::require(Z > 0.0, ErrorCode::invalid_argument, "impedance Z must be > 0");
    detail::require(rho0 > 0.0 && c0 > 0.0, ErrorCode::invalid_argument, "rho0 and c0 must be > 0");
    auto b = surface_mass(space, tags);
    const double coef = rho0 * c0 * c0 / Z;
    for (double& v : b) v *= coef;
    return b;
}

/// M, K, B and the physical constants needed by the time integrator.
class AssembledOperators {
public:
    AssembledOperators(const SpectralSpace& space, double c0, double rho0)
        : geo_(std::make_shared<const GeometricFactors>(space)), stiffness_(space, geo_),
          mass_(assemble_mass(space, *geo_)), damping_(space.num_dofs(), 0.0), c0_(c0), rho0_(rho0) {
        detail::require(c0 > 0.0, ErrorCode::invalid_argument, "c0 must be > 0");
        detail::require(rho0 > 0.0, ErrorCode::invalid_argument, "rho0 must be > 0");
    }

    /// Accumulates an impedance boundary group into B.
    void add_impedance(const std::set<std::string>& tags, double Z) {
        const auto b = assemble_damping(stiffness_.space(), tags, Z, rho0_, c0_);
        for (std::size_t i = 0; i < b.size(); ++i) damping_[i] += b[i];
    }

    std::size_t size() const { return mass_.size(); }
    std::span<const double> mass() const { return mass_; }
    std::span<const double> damping() const { return damping_; }
    bool has_damping() const {
        return std::any_of(damping_.begin(), damping_.end(), [](double v) { return v != 0.0; });
    }
    double c0() const { return c0_; }
    double rho0() const { return rho0_; }
    const SpectralSpace& space() const { return stiffness_.space(); }
    const StiffnessOperator& stiffness() const { return stiffness_; }
    std::shared_ptr<const GeometricFactors> geometry() const { return geo_; }
    void apply_stiffness(std::span<const double> u, std::span<double> out) const { stiffness_.apply(u, out); }

private:
    std::shared_ptr<const GeometricFactors> geo_;
    StiffnessOperator stiffness_;
    std::vector<double> mass_;
    std::vector<double> damping_;
    double c0_, rho0_;
};

using SpaceTimeFunction = std::function<double(const Vec3&, double)>;
/// Boundary datum g(x, n, t) with n the outward unit normal.
using BoundaryFunction = std::function<double(const Vec3&, const Vec3&, double)>;

/// (f, phi_i)^NI = M_i f(x_i, t), accumulated into `out`.
inline void add_volume_load(const SpectralSpace& space, std::span<const double> mass, const SpaceTimeFunction& f,
                            double t, std::span<double> out) {
    for (std::size_t i = 0; i < space.num_dofs(); ++i) out[i] += mass[i] * f(space.nodes()[i], t);
}

inline std::vector<double> volume_load(const SpectralSpace& space, std::span<const double> mass,
                                       const SpaceTimeFunction& f, double t) {
    std::vector<double> out(space.num_dofs(), 0.0);
    add_volume_load(space, mass, f, t, out);
    return out;
}

/// c0^2 * integral over tagged faces of g_N phi_i, by surface GLL collocation.
inline void add_neumann_load(const SpectralSpace& space, const std::set<std::string>& tags, const BoundaryFunction& g,
                             double t, double c0, std::span<double> out) {
    const double c2 = c0 * c0;
    for_each_surface_node(space, tags, [&](std::size_t i, const Vec3& x, const Vec3& n, double w) {
        out[i] += c2 * w * g(x, n, t);
    });
}

inline std::vector<double> neumann_load(const SpectralSpace& space, const std::set<std::string>& tags,
                                        const BoundaryFunction& g, double t, double c0) {
    std::vector<double> out(space.num_dofs(), 0.0);
    add_neumann_load(space, tags, g, t, c0, out);
    return out;
}

/// Dirac source a(t) delta(x - x_S), discretized consistently through the
/// basis values at x_S: load_i = phi_i(x_S) a(t).
class PointSource {
public:
    PointSource(const SpectralSpace& space, const Vec3& position, std::function<double(double)> amplitude)
        : weights_(basis_at(space, position)), amplitude_(std::move(amplitude)), position_(position) {}

    void add_load(double t, std::span<double> out) const {
        const double a = amplitude_(t);
        for (const auto& [dof, phi] : weights_) out[dof] += phi * a;
    }

    const std::vector<std::pair<std::size_t, double>>& weights() const { return weights_; }
    const Vec3& position() const { return position_; }

private:
    std::vector<std::pair<std::size_t, double>> weights_;
    std::function<double(double)> amplitude_;
    Vec3 position_;
};

inline std::vector<double> point_source_load(const SpectralSpace& space, const Vec3& x_s, double amplitude) {
    std::vector<double> out(space.num_dofs(), 0.0);
    PointSource(space, x_s, [amplitude](double) { return amplitude; }).add_load(0.0, out);
    return out;
}

} // namespace aerosem
