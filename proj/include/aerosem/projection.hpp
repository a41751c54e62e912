#pragma once

/// @file projection.hpp
/// @brief L2 projection of piecewise-constant FV fields onto the spectral
/// space: M^AA q_A = M^AF q_F.
///
/// M^AA is the consistent (non-collocated) mass matrix, integrated with
/// (r+1)^3 Gauss-Legendre points. M^AF_{i,l} = integral over cell l of phi_i,
/// approximated by quadrature on a fan of tetrahedra (cell center, face
/// centroid, face edge). Samples outside the acoustic mesh contribute zero.
/// Tetrahedra that straddle affine elements are clipped against each element
/// and integrated exactly; other straddling tetrahedra are sampled.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aerosem/assembly.hpp"
#include "aerosem/error.hpp"
#include "aerosem/fvsource.hpp"
#include "aerosem/linalg.hpp"
#include "aerosem/quadrature.hpp"
#include "aerosem/space.hpp"

namespace aerosem {

inline linalg::CsrMatrix assemble_consistent_mass(const SpectralSpace& space) {
    const int n = space.nodes_per_axis();
    const int npe = space.nodes_per_element();
    const auto g = quad::gauss_legendre(n);
    std::vector<std::vector<double>> lag(n, std::vector<double>(n));
    for (int q = 0; q < n; ++q) gll::lagrange_all(space.rule(), g.nodes[q], lag[q]);

    std::vector<linalg::Triplet> trip;
    trip.reserve(space.num_elements() * npe * npe);
    std::vector<double> phi(static_cast<std::size_t>(npe) * npe * npe);  // [quad point][basis]
    for (int qc = 0; qc < n; ++qc)
        for (int qb = 0; qb < n; ++qb)
            for (int qa = 0; qa < n; ++qa) {
                const int q = qa + n * qb + n * n * qc;
                for (int l = 0; l < npe; ++l)
                    phi[q * npe + l] = lag[qa][l % n] * lag[qb][(l / n) % n] * lag[qc][l / (n * n)];
            }
    std::vector<double> wq(npe), me(static_cast<std::size_t>(npe) * npe);
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const auto corners = space.mesh().corners(e);
        for (int q = 0; q < npe; ++q) {
            const int qa = q % n, qb = (q / n) % n, qc = q / (n * n);
            wq[q] = g.weights[qa] * g.weights[qb] * g.weights[qc] *
                    std::abs(det(detail::trilinear_jacobian(corners, {g.nodes[qa], g.nodes[qb], g.nodes[qc]})));
        }
        std::fill(me.begin(), me.end(), 0.0);
        for (int q = 0; q < npe; ++q) {
            const double* p = &phi[q * npe];
            for (int i = 0; i < npe; ++i) {
                const double wi = wq[q] * p[i];
                for (int j = i; j < npe; ++j) me[i * npe + j] += wi * p[j];
            }
        }
        const auto dofs = space.element_dofs(e);
        for (int i = 0; i < npe; ++i)
            for (int j = i; j < npe; ++j) {
                trip.push_back({dofs[i], dofs[j], me[i * npe + j]});
                if (j != i) trip.push_back({dofs[j], dofs[i], me[i * npe + j]});
            }
    }
    return linalg::CsrMatrix(space.num_dofs(), space.num_dofs(), std::move(trip));
}

struct CouplingOptions {
    /// 1: centroid, 2: 4-point rule, >= 3: collapsed Gauss rule of that order.
    int tet_order = 2;
    /// Cells lying inside a single acoustic element use a rule exact for the
    /// basis polynomials of an affine element.
    bool exact_inside = true;
    /// Straddling tetrahedra are clipped against affine elements.
    bool clip_affine = true;
    /// Recorded for provenance; the quadrature itself is deterministic.
    std::uint64_t seed = 0;
};

struct CouplingMatrix {
    linalg::CsrMatrix matrix;
    std::vector<double> column_sums;  ///< sampled |cell inside Omega_A|
    CouplingOptions options;
    std::size_t total_samples = 0;
    std::size_t cells_outside = 0;    ///< zero columns
    std::size_t cells_partial = 0;    ///< some samples outside the acoustic mesh
    std::size_t cells_exact = 0;      ///< integrated with the exact in-element rule
    std::size_t cells_clipped = 0;    ///< at least one tetrahedron clipped against elements
    std::size_t cells_centroid = 0;   ///< no face geometry, single sample
    double max_volume_deviation = 0.0;  ///< max |colsum - volume| / volume over fully covered cells
};

namespace detail {

struct SubTet {
    Vec3 a, b, c, d;
    double volume;
};

inline std::vector<SubTet> cell_tets(const fv::FvMesh& mesh, std::size_t cell) {
    std::vector<SubTet> tets;
    const Vec3 xc = mesh.cells()[cell].center;
    for (auto fi : mesh.cell_faces(cell)) {
        const auto& f = mesh.faces()[fi];
        const auto& pts = mesh.points();
        Vec3 fc{};
        for (auto v : f.vertices) fc += pts[v];
        fc = (1.0 / static_cast<double>(f.vertices.size())) * fc;
        for (std::size_t k = 0; k < f.vertices.size(); ++k) {
            const Vec3& p = pts[f.vertices[k]];
            const Vec3& q = pts[f.vertices[(k + 1) % f.vertices.size()]];
            const double v = std::abs(quad::tet_volume(xc, fc, p, q));
            if (v > 0.0) tets.push_back({xc, fc, p, q, v});
        }
    }
    return tets;
}

/// Convex polyhedron as a list of planar polygons.
using Polyhedron = std::vector<std::vector<Vec3>>;

inline Polyhedron tet_polyhedron(const SubTet& t) {
    return {{t.a, t.b, t.c}, {t.a, t.b, t.d}, {t.a, t.c, t.d}, {t.b, t.c, t.d}};
}

/// Keeps the part with dot(n, x) <= d.
inline Polyhedron clip(const Polyhedron& poly, const Vec3& n, double d, double eps) {
    bool any_out = false, any_in = false;
    for (const auto& f : poly)
        for (const auto& p : f) {
            const double s = dot(n, p) - d;
            any_out = any_out || s > eps;
            any_in = any_in || s < -eps;
        }
    if (!any_out) return poly;
    if (!any_in) return {};
    Polyhedron out;
    std::vector<Vec3> cap;
    for (const auto& f : poly) {
        std::vector<Vec3> kept;
        const std::size_t m = f.size();
        for (std::size_t k = 0; k < m; ++k) {
            const Vec3& p = f[k];
            const Vec3& q = f[(k + 1) % m];
            double sp = dot(n, p) - d, sq = dot(n, q) - d;
            if (std::abs(sp) <= eps) sp = 0.0;
            if (std::abs(sq) <= eps) sq = 0.0;
            if (sp <= 0.0) kept.push_back(p);
            if (sp == 0.0) cap.push_back(p);
            if ((sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0)) {
                const Vec3 x = p + (sp / (sp - sq)) * (q - p);
                kept.push_back(x);
                cap.push_back(x);
            }
        }
        if (kept.size() >= 3) out.push_back(std::move(kept));
    }
    std::vector<Vec3> uniq;
    for (const auto& p : cap)
        if (std::none_of(uniq.begin(), uniq.end(), [&](const Vec3& q) { return distance(p, q) <= 10.0 * eps; }))
            uniq.push_back(p);
    if (uniq.size() >= 3) {
        Vec3 c{};
        for (const auto& p : uniq) c += p;
        c = (1.0 / static_cast<double>(uniq.size())) * c;
        Vec3 u = uniq[0] - c;
        u = (1.0 / norm(u)) * u;
        const Vec3 v = cross(n, u);
        std::sort(uniq.begin(), uniq.end(), [&](const Vec3& a, const Vec3& b) {
            return std::atan2(dot(a - c, v), dot(a - c, u)) < std::atan2(dot(b - c, v), dot(b - c, u));
        });
        out.push_back(std::move(uniq));
    }
    return out;
}

inline std::vector<SubTet> tetrahedralize(const Polyhedron& poly) {
    std::vector<SubTet> tets;
    Vec3 c{};
    std::size_t count = 0;
    for (const auto& f : poly)
        for (const auto& p : f) {
            c += p;
            ++count;
        }
    if (count == 0) return tets;
    c = (1.0 / static_cast<double>(count)) * c;
    for (const auto& f : poly)
        for (std::size_t k = 1; k + 1 < f.size(); ++k) {
            const double v = std::abs(quad::tet_volume(c, f[0], f[k], f[k + 1]));
            if (v > 0.0) tets.push_back({c, f[0], f[k], f[k + 1], v});
        }
    return tets;
}

/// Outward face planes (n, d) of an affine element: inside is dot(n, x) <= d.
inline std::array<std::pair<Vec3, double>, 6> element_planes(const std::array<Vec3, 8>& c) {
    Vec3 centre{};
    for (const auto& p : c) centre += p;
    centre = 0.125 * centre;
    std::array<std::pair<Vec3, double>, 6> planes{};
    for (int f = 0; f < 6; ++f) {
        const auto& fc = face_corners[f];
        Vec3 n = cross(c[fc[1]] - c[fc[0]], c[fc[2]] - c[fc[0]]);
        n = (1.0 / norm(n)) * n;
        if (dot(n, centre - c[fc[0]]) > 0.0) n = -1.0 * n;
        planes[f] = {n, dot(n, c[fc[0]])};
    }
    return planes;
}

/// Element containing every vertex of the cell, if any.
inline std::optional<std::size_t> containing_element(const SpectralSpace& space, const fv::FvMesh& mesh,
                                                     std::size_t cell) {
    const auto p = locate_point(space.mesh(), mesh.cells()[cell].center);
    if (!p) return std::nullopt;
    const auto corners = space.mesh().corners(p->element);
    for (auto fi : mesh.cell_faces(cell))
        for (auto v : mesh.faces()[fi].vertices) {
            const auto xi = invert_trilinear(corners, mesh.points()[v], space.mesh().h());
            if (!xi || outside_distance(*xi) > 1e-10) return std::nullopt;
        }
    return p->element;
}

} // namespace detail

inline CouplingMatrix assemble_MAF(const SpectralSpace& space, const fv::FvMesh& mesh, const CouplingOptions& opt = {}) {
    const int n = space.nodes_per_axis();
    const int npe = space.nodes_per_element();
    const auto base_rule = quad::tet_rule(opt.tet_order);
    const auto exact_rule = quad::tet_rule(std::max(opt.tet_order, quad::tet_order_for_degree(3 * space.degree())));
    const auto& amesh = space.mesh();
    std::vector<char> affine(amesh.num_elements());
    for (std::size_t e = 0; e < affine.size(); ++e) affine[e] = amesh.is_affine(e) ? 1 : 0;

    CouplingMatrix out;
    out.options = opt;
    out.column_sums.assign(mesh.num_cells(), 0.0);
    std::vector<linalg::Triplet> trip;
    std::vector<double> lx(n), ly(n), lz(n);
    std::map<std::size_t, std::vector<double>> local;  // element -> accumulated integrals

    auto add_sample = [&](std::size_t e, const Vec3& xi, double w) {
        gll::lagrange_all(space.rule(), xi[0], lx);
        gll::lagrange_all(space.rule(), xi[1], ly);
        gll::lagrange_all(space.rule(), xi[2], lz);
        auto& acc = local[e];
        if (acc.empty()) acc.assign(npe, 0.0);
        for (int c = 0; c < n; ++c)
            for (int b = 0; b < n; ++b) {
                const double wbc = w * ly[b] * lz[c];
                for (int a = 0; a < n; ++a) acc[a + n * b + n * n * c] += wbc * lx[a];
            }
    };

    for (std::size_t cell = 0; cell < mesh.num_cells(); ++cell) {
        local.clear();
        double inside = 0.0, total = 0.0;
        if (!mesh.has_geometry()) {
            ++out.cells_centroid;
            const double w = mesh.cells()[cell].volume;
            total = w;
            ++out.total_samples;
            if (const auto p = locate_point(space.mesh(), mesh.cells()[cell].center)) {
                add_sample(p->element, p->xi, w);
                inside = w;
            }
        } else {
            const auto tets = detail::cell_tets(mesh, cell);
            const auto home = opt.exact_inside ? detail::containing_element(space, mesh, cell) : std::nullopt;
            if (home) {
                ++out.cells_exact;
                const auto corners = amesh.corners(*home);
                for (const auto& t : tets)
                    for (std::size_t s = 0; s < exact_rule.points.size(); ++s) {
                        const Vec3& l = exact_rule.points[s];
                        const Vec3 x = (1.0 - l[0] - l[1] - l[2]) * t.a + l[0] * t.b + l[1] * t.c + l[2] * t.d;
                        const double w = exact_rule.weights[s] * t.volume;
                        total += w;
                        ++out.total_samples;
                        auto xi = detail::invert_trilinear(corners, x, amesh.h());
                        if (!xi) continue;
                        for (double& v : *xi) v = std::clamp(v, -1.0, 1.0);
                        add_sample(*home, *xi, w);
                        inside += w;
                    }
            } else {
                bool clipped = false;
                for (const auto& t : tets) {
                    total += t.volume;
                    Vec3 lo = t.a, hi = t.a;
                    for (const Vec3* p : {&t.b, &t.c, &t.d})
                        for (int a = 0; a < 3; ++a) {
                            lo[a] = std::min(lo[a], (*p)[a]);
                            hi[a] = std::max(hi[a], (*p)[a]);
                        }
                    const auto cand = amesh.candidates(lo, hi);
                    const bool can_clip =
                        opt.clip_affine && std::all_of(cand.begin(), cand.end(), [&](auto e) { return affine[e] != 0; });
                    if (can_clip) {
                        clipped = true;
                        const double eps = 1e-12 * amesh.h();
                        for (auto e : cand) {
                            const auto corners = amesh.corners(e);
                            auto poly = detail::tet_polyhedron(t);
                            for (const auto& [nrm, d] : detail::element_planes(corners)) {
                                poly = detail::clip(poly, nrm, d, eps);
                                if (poly.empty()) break;
                            }
                            for (const auto& piece : detail::tetrahedralize(poly))
                                for (std::size_t s = 0; s < exact_rule.points.size(); ++s) {
                                    const Vec3& l = exact_rule.points[s];
                                    const Vec3 x = (1.0 - l[0] - l[1] - l[2]) * piece.a + l[0] * piece.b +
                                                   l[1] * piece.c + l[2] * piece.d;
                                    const double w = exact_rule.weights[s] * piece.volume;
                                    ++out.total_samples;
                                    auto xi = detail::invert_trilinear(corners, x, amesh.h());
                                    if (!xi) continue;
                                    for (double& v : *xi) v = std::clamp(v, -1.0, 1.0);
                                    add_sample(e, *xi, w);
                                    inside += w;
                                }
                        }
                        continue;
                    }
                    for (std::size_t s = 0; s < base_rule.points.size(); ++s) {
                        const Vec3& l = base_rule.points[s];
                        const Vec3 x = (1.0 - l[0] - l[1] - l[2]) * t.a + l[0] * t.b + l[1] * t.c + l[2] * t.d;
                        const double w = base_rule.weights[s] * t.volume;
                        ++out.total_samples;
                        if (const auto p = locate_point(amesh, x)) {
                            add_sample(p->element, p->xi, w);
                            inside += w;
                        }
                    }
                }
                if (clipped) ++out.cells_clipped;
            }
        }
        if (inside == 0.0)
            ++out.cells_outside;
        else if (inside < total * (1.0 - 1e-12))
            ++out.cells_partial;
        for (const auto& [e, acc] : local) {
            const auto dofs = space.element_dofs(e);
            for (int l = 0; l < npe; ++l)
                if (acc[l] != 0.0) trip.push_back({dofs[l], cell, acc[l]});
        }
    }
    out.matrix = linalg::CsrMatrix(space.num_dofs(), mesh.num_cells(), std::move(trip));
    out.column_sums = out.matrix.column_sums();
    // fully covered cells: compare the sampled volume with the stated volume
    for (std::size_t cell = 0; cell < mesh.num_cells(); ++cell) {
        const double v = mesh.cells()[cell].volume;
        if (out.column_sums[cell] == 0.0) continue;
        out.max_volume_deviation = std::max(out.max_volume_deviation, std::abs(out.column_sums[cell] - v) / v);
    }
    return out;
}

struct ProjectionResult {
    std::vector<double> values;  ///< q_A
    linalg::CgResult cg;
    double donor_total = 0.0;     ///< sum_i (M^AF q_F)_i
    double acoustic_total = 0.0;  ///< sum_i (M^AA q_A)_i
};

/// Holds M^AA and M^AF for repeated projections between a fixed pair of meshes.
class Projector {
public:
    Projector(const SpectralSpace& space, const fv::FvMesh& mesh, const CouplingOptions& opt = {}, double cg_tol = 1e-12,
              int cg_max_iter = 5000)
        : space_(&space), maa_(assemble_consistent_mass(space)), maf_(assemble_MAF(space, mesh, opt)), cg_tol_(cg_tol),
          cg_max_iter_(cg_max_iter) {
        detail::require(cg_tol > 0.0 && cg_max_iter > 0, ErrorCode::invalid_argument, "invalid CG settings");
        diag_ = maa_.diagonal();
        // DOFs no cell touches still need a positive preconditioner entry
        for (double& d : diag_) detail::require(d > 0.0, ErrorCode::invalid_argument, "consistent mass has a zero diagonal");
    }

    const linalg::CsrMatrix& consistent_mass() const { return maa_; }
    const CouplingMatrix& coupling() const { return maf_; }
    const SpectralSpace& space() const { return *space_; }

    ProjectionResult project(std::span<const double> q_f) const {
        detail::require(q_f.size() == maf_.matrix.cols(), ErrorCode::invalid_argument,
                        "donor field length does not match the FV cell count");
        ProjectionResult r;
        std::vector<double> b(maa_.rows());
        maf_.matrix.multiply(q_f, b);
        r.values.assign(b.size(), 0.0);
        r.cg = linalg::pcg([&](std::span<const double> x, std::span<double> y) { maa_.multiply(x, y); }, diag_, b,
                           r.values, cg_tol_, cg_max_iter_);
        if (!r.cg.converged)
            throw Error(ErrorCode::solver_failure, "projection: CG did not converge in " +
                                                       std::to_string(r.cg.iterations) + " iterations (relative residual " +
                                                       std::to_string(r.cg.relative_residual) + ")");
        std::vector<double> mq(b.size());
        maa_.multiply(r.values, mq);
        r.donor_total = linalg::sum(b);
        r.acoustic_total = linalg::sum(mq);
        return r;
    }

private:
    const SpectralSpace* space_;
    linalg::CsrMatrix maa_;
    CouplingMatrix maf_;
    std::vector<double> diag_;
    double cg_tol_;
    int cg_max_iter_;
};

/// Aeroacoustic load f = -sum_l C^l q_l, the discrete form of
/// -(div T, grad w). Empty spans stand for zero components.
inline void aeroacoustic_load(const ConvectiveOperators& conv, std::span<const double> qx, std::span<const double> qy,
                              std::span<const double> qz, std::span<double> out) {
    conv.apply_sum(qx, qy, qz, out);
    for (double& v : out) v = -v;
}

inline std::vector<double> aeroacoustic_load(const ConvectiveOperators& conv, std::span<const double> qx,
                                             std::span<const double> qy, std::span<const double> qz) {
    std::vector<double> out(conv.size());
    aeroacoustic_load(conv, qx, qy, qz, out);
    return out;
}

} // namespace aerosem
