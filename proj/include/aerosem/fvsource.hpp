#pragma once

/// @file fvsource.hpp
/// @brief Finite-volume donor data and the Gauss evaluation of the Lighthill
/// source div(rho0 u (x) u).
///
/// Face normals point from the owner cell to the neighbor. Boundary faces
/// have neighbor = -1. Points and per-face vertex lists are optional; they
/// are only needed for sub-simplex sampling in projection.hpp.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aerosem/error.hpp"
#include "aerosem/geometry.hpp"
#include "aerosem/mesh.hpp"

namespace aerosem::fv {

struct Cell {
    Vec3 center{};
    double volume = 0.0;
};

struct Face {
    std::size_t owner = 0;
    long neighbor = -1;
    double area = 0.0;
    Vec3 normal{};
    Vec3 midpoint{};
    std::vector<std::size_t> vertices;  ///< ordered around the face, may be empty
    std::string tag;                    ///< boundary group, empty for interior faces

    bool is_boundary() const { return neighbor < 0; }
};

class FvMesh {
public:
    FvMesh() = default;

    FvMesh(std::vector<Cell> cells, std::vector<Face> faces, std::vector<Vec3> points = {})
        : cells_(std::move(cells)), faces_(std::move(faces)), points_(std::move(points)) {
        validate();
    }

    std::size_t num_cells() const { return cells_.size(); }
    std::size_t num_faces() const { return faces_.size(); }
    const std::vector<Cell>& cells() const { return cells_; }
    const std::vector<Face>& faces() const { return faces_; }
    const std::vector<Vec3>& points() const { return points_; }
    const std::vector<std::size_t>& cell_faces(std::size_t c) const { return cell_faces_[c]; }

    /// True when every face carries a vertex polygon.
    bool has_geometry() const { return has_geometry_; }

    double total_volume() const {
        double v = 0.0;
        for (const auto& c : cells_) v += c.volume;
        return v;
    }

private:
    void validate() {
        const auto nc = cells_.size();
        detail::require(nc > 0, ErrorCode::invalid_argument, "FV mesh has no cells");
        for (std::size_t c = 0; c < nc; ++c)
            detail::require(cells_[c].volume > 0.0 && std::isfinite(cells_[c].volume) && is_finite(cells_[c].center),
                            ErrorCode::invalid_argument, "cell " + std::to_string(c) + ": volume must be positive and finite");
        cell_faces_.assign(nc, {});
        has_geometry_ = !points_.empty();
        std::vector<Vec3> closure(nc, Vec3{});
        std::vector<double> area_sum(nc, 0.0);
        for (std::size_t i = 0; i < faces_.size(); ++i) {
            const auto& f = faces_[i];
            const std::string name = "face " + std::to_string(i);
            detail::require(f.owner < nc, ErrorCode::invalid_argument, name + ": owner index out of range");
            detail::require(f.neighbor < static_cast<long>(nc) && f.neighbor != static_cast<long>(f.owner),
                            ErrorCode::invalid_argument, name + ": invalid neighbor index");
            detail::require(f.area > 0.0 && std::isfinite(f.area), ErrorCode::invalid_argument, name + ": area must be > 0");
            detail::require(std::abs(norm(f.normal) - 1.0) <= 1e-12, ErrorCode::invalid_argument,
                            name + ": normal is not a unit vector");
            detail::require(dot(f.normal, f.midpoint - cells_[f.owner].center) > 0.0, ErrorCode::invalid_argument,
                            name + ": normal points into its owner cell " + std::to_string(f.owner) + " (flipped?)");
            if (!f.is_boundary())
                detail::require(dot(f.normal, cells_[f.neighbor].center - f.midpoint) > 0.0, ErrorCode::invalid_argument,
                                name + ": normal does not point towards neighbor cell " + std::to_string(f.neighbor));
            if (f.vertices.size() < 3) has_geometry_ = false;
            for (auto v : f.vertices)
                detail::require(v < points_.size(), ErrorCode::invalid_argument, name + ": vertex index out of range");

            cell_faces_[f.owner].push_back(i);
            closure[f.owner] += f.area * f.normal;
            area_sum[f.owner] += f.area;
            if (!f.is_boundary()) {
                cell_faces_[f.neighbor].push_back(i);
                closure[f.neighbor] += (-f.area) * f.normal;
                area_sum[f.neighbor] += f.area;
            }
        }
        for (std::size_t c = 0; c < nc; ++c)
            detail::require(norm(closure[c]) <= 1e-8 * area_sum[c] && area_sum[c] > 0.0, ErrorCode::invalid_argument,
                            "cell " + std::to_string(c) + ": faces do not form a closed surface (residual " +
                                std::to_string(norm(closure[c])) + ")");
    }

    std::vector<Cell> cells_;
    std::vector<Face> faces_;
    std::vector<Vec3> points_;
    std::vector<std::vector<std::size_t>> cell_faces_;
    bool has_geometry_ = false;
};

/// Piecewise-constant cell field with 1 or 3 components (cell-major).
struct Field {
    std::string name;
    double time = 0.0;
    int components = 1;
    std::vector<double> values;

    std::size_t num_cells() const { return values.size() / static_cast<std::size_t>(components); }
    Vec3 vec(std::size_t c) const { return {values[3 * c], values[3 * c + 1], values[3 * c + 2]}; }
    double at(std::size_t c, int comp) const { return values[c * components + comp]; }
    std::vector<double> component(int comp) const {
        std::vector<double> out(num_cells());
        for (std::size_t c = 0; c < out.size(); ++c) out[c] = at(c, comp);
        return out;
    }
};

inline void validate_field(const FvMesh& mesh, const Field& f) {
    detail::require(f.components == 1 || f.components == 3, ErrorCode::invalid_argument,
                    "field '" + f.name + "': components must be 1 or 3");
    detail::require(f.values.size() == mesh.num_cells() * static_cast<std::size_t>(f.components),
                    ErrorCode::invalid_argument, "field '" + f.name + "': length does not match the cell count");
    for (std::size_t i = 0; i < f.values.size(); ++i)
        detail::require(std::isfinite(f.values[i]), ErrorCode::non_finite,
                        "field '" + f.name + "': non-finite value in cell " + std::to_string(i / f.components));
}

inline Field sample_vector(const FvMesh& mesh, const std::function<Vec3(const Vec3&)>& u, std::string name,
                           double time = 0.0) {
    Field f{std::move(name), time, 3, std::vector<double>(3 * mesh.num_cells())};
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const Vec3 v = u(mesh.cells()[c].center);
        for (int k = 0; k < 3; ++k) f.values[3 * c + k] = v[k];
    }
    return f;
}

inline Field sample_scalar(const FvMesh& mesh, const std::function<double(const Vec3&)>& g, std::string name,
                           double time = 0.0) {
    Field f{std::move(name), time, 1, std::vector<double>(mesh.num_cells())};
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) f.values[c] = g(mesh.cells()[c].center);
    return f;
}

enum class BoundaryRule { zero_gradient, prescribed, none };

/// How face velocities are obtained on boundary faces. `prescribed` calls
/// `value(face index, face)`.
struct BoundaryTreatment {
    BoundaryRule rule = BoundaryRule::zero_gradient;
    std::function<Vec3(std::size_t, const Face&)> value;
};

/// Owner weight of the linear face interpolation; distances are measured
/// along the face normal.
inline double owner_weight(const FvMesh& mesh, const Face& f) {
    const double d_o = std::abs(dot(f.normal, f.midpoint - mesh.cells()[f.owner].center));
    const double d_n = std::abs(dot(f.normal, mesh.cells()[f.neighbor].center - f.midpoint));
    return d_n / (d_o + d_n);
}

inline Vec3 face_velocity(const FvMesh& mesh, const Field& u, std::size_t i, const BoundaryTreatment& bt) {
    const auto& f = mesh.faces()[i];
    if (!f.is_boundary()) {
        const double w = owner_weight(mesh, f);
        return w * u.vec(f.owner) + (1.0 - w) * u.vec(static_cast<std::size_t>(f.neighbor));
    }
    switch (bt.rule) {
    case BoundaryRule::zero_gradient:
        return u.vec(f.owner);
    case BoundaryRule::prescribed:
        detail::require(static_cast<bool>(bt.value), ErrorCode::invalid_argument, "prescribed boundary rule without values");
        return bt.value(i, f);
    case BoundaryRule::none:
        break;
    }
    throw Error(ErrorCode::invalid_argument,
                "face " + std::to_string(i) + " has no neighbor and no boundary rule is configured");
}

/// Per-cell div(rho0 u (x) u) = (1/|K|) sum_F rho0 u_F (u_F . n_F) |F|.
inline Field lighthill_divergence(const FvMesh& mesh, const Field& u, double rho0, const BoundaryTreatment& bt = {}) {
    validate_field(mesh, u);
    detail::require(u.components == 3, ErrorCode::invalid_argument, "velocity field must have 3 components");
    detail::require(rho0 > 0.0, ErrorCode::invalid_argument, "rho0 must be > 0");
    std::vector<Vec3> acc(mesh.num_cells(), Vec3{});
    for (std::size_t i = 0; i < mesh.num_faces(); ++i) {
        const auto& f = mesh.faces()[i];
        const Vec3 uf = face_velocity(mesh, u, i, bt);
        const Vec3 flux = (rho0 * dot(uf, f.normal) * f.area) * uf;
        acc[f.owner] += flux;
        if (!f.is_boundary()) acc[f.neighbor] += -1.0 * flux;
    }
    Field out{"lighthill_source", u.time, 3, std::vector<double>(3 * mesh.num_cells())};
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        for (int k = 0; k < 3; ++k) out.values[3 * c + k] = acc[c][k] / mesh.cells()[c].volume;
    return out;
}

/// Sum over boundary faces of rho0 u_F (u_F . n_F) |F|.
inline Vec3 boundary_flux(const FvMesh& mesh, const Field& u, double rho0, const BoundaryTreatment& bt = {}) {
    Vec3 s{};
    for (std::size_t i = 0; i < mesh.num_faces(); ++i) {
        const auto& f = mesh.faces()[i];
        if (!f.is_boundary()) continue;
        const Vec3 uf = face_velocity(mesh, u, i, bt);
        s += (rho0 * dot(uf, f.normal) * f.area) * uf;
    }
    return s;
}

/// Volume integral sum_c |K_c| q_c per component.
inline std::vector<double> integrate(const FvMesh& mesh, const Field& q) {
    std::vector<double> s(q.components, 0.0);
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        for (int k = 0; k < q.components; ++k) s[k] += mesh.cells()[c].volume * q.at(c, k);
    return s;
}

/// Column structure of an extruded mesh and the per-column averages.
struct SpanwiseAverage {
    int axis = 2;
    std::vector<std::vector<std::size_t>> columns;  ///< cells of each column
    std::vector<std::size_t> cell_column;
    std::vector<Vec3> column_centers;               ///< volume-weighted
    Field averaged;                                 ///< one entry per column
};

inline SpanwiseAverage spanwise_average(const FvMesh& mesh, const Field& q, int axis, int bins = 0) {
    validate_field(mesh, q);
    detail::require(axis >= 0 && axis < 3, ErrorCode::invalid_argument, "spanwise axis must be 0, 1 or 2");
    const int a1 = axis == 0 ? 1 : 0, a2 = axis == 2 ? 1 : 2;
    Vec3 lo = mesh.cells()[0].center, hi = lo;
    for (const auto& c : mesh.cells())
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], c.center[k]);
            hi[k] = std::max(hi[k], c.center[k]);
        }
    const double ext = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2], 1e-300});
    const double tol = 1e-8 * ext;
    auto key = [&](double v) { return static_cast<long long>(std::llround(v / tol / 100.0)); };

    SpanwiseAverage out;
    out.axis = axis;
    out.cell_column.resize(mesh.num_cells());
    std::map<std::pair<long long, long long>, std::size_t> index;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const auto& x = mesh.cells()[c].center;
        const auto k = std::make_pair(key(x[a1]), key(x[a2]));
        auto [it, fresh] = index.try_emplace(k, out.columns.size());
        if (fresh) out.columns.emplace_back();
        out.columns[it->second].push_back(c);
        out.cell_column[c] = it->second;
    }

    // every column must hold the same stack of spanwise positions
    auto positions = [&](const std::vector<std::size_t>& col) {
        std::vector<double> p;
        for (auto c : col) p.push_back(mesh.cells()[c].center[axis]);
        std::sort(p.begin(), p.end());
        return p;
    };
    const auto ref = positions(out.columns.front());
    if (bins > 0)
        detail::require(static_cast<int>(ref.size()) == bins, ErrorCode::invalid_argument,
                        "mesh is not extruded: expected " + std::to_string(bins) + " cells per spanwise column, found " +
                            std::to_string(ref.size()));
    for (std::size_t j = 0; j < out.columns.size(); ++j) {
        const auto p = positions(out.columns[j]);
        bool same = p.size() == ref.size();
        for (std::size_t i = 0; same && i < p.size(); ++i) same = std::abs(p[i] - ref[i]) <= 1e-6 * ext;
        detail::require(same, ErrorCode::invalid_argument,
                        "mesh is not extruded along axis " + std::to_string(axis) + ": column " + std::to_string(j) +
                            " differs from column 0");
    }

    out.averaged = Field{q.name, q.time, q.components, std::vector<double>(out.columns.size() * q.components, 0.0)};
    out.column_centers.assign(out.columns.size(), Vec3{});
    for (std::size_t j = 0; j < out.columns.size(); ++j) {
        double vol = 0.0;
        Vec3 xc{};
        for (auto c : out.columns[j]) {
            const double v = mesh.cells()[c].volume;
            vol += v;
            xc += v * mesh.cells()[c].center;
            for (int k = 0; k < q.components; ++k) out.averaged.values[j * q.components + k] += v * q.at(c, k);
        }
        for (int k = 0; k < q.components; ++k) out.averaged.values[j * q.components + k] /= vol;
        out.column_centers[j] = (1.0 / vol) * xc;
    }
    return out;
}

/// Expands column averages back onto every cell of the source mesh.
inline Field broadcast(const SpanwiseAverage& avg) {
    const int nc = avg.averaged.components;
    Field f{avg.averaged.name, avg.averaged.time, nc, std::vector<double>(avg.cell_column.size() * nc)};
    for (std::size_t c = 0; c < avg.cell_column.size(); ++c)
        for (int k = 0; k < nc; ++k) f.values[c * nc + k] = avg.averaged.values[avg.cell_column[c] * nc + k];
    return f;
}

/// Cartesian FV box with points, face polygons and box-face tags.
inline FvMesh generate_box_fv(const Vec3& lo, const Vec3& hi, const std::array<int, 3>& divisions,
                              const BoxTags& tags = default_box_tags()) {
    for (int a = 0; a < 3; ++a) {
        detail::require(divisions[a] >= 1, ErrorCode::invalid_argument, "box divisions must be >= 1");
        detail::require(hi[a] > lo[a], ErrorCode::invalid_argument, "box extents must be positive");
    }
    const auto [nx, ny, nz] = divisions;
    const std::array<int, 3> n = {nx, ny, nz};
    auto coord = [&](int a, int idx) { return idx == n[a] ? hi[a] : lo[a] + (hi[a] - lo[a]) * idx / n[a]; };
    auto pid = [&](int i, int j, int k) { return static_cast<std::size_t>((k * (ny + 1) + j) * (nx + 1) + i); };
    auto cid = [&](int i, int j, int k) { return static_cast<long>((k * ny + j) * nx + i); };

    std::vector<Vec3> points;
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i) points.push_back({coord(0, i), coord(1, j), coord(2, k)});

    std::vector<Cell> cells;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const Vec3 a = {coord(0, i), coord(1, j), coord(2, k)};
                const Vec3 b = {coord(0, i + 1), coord(1, j + 1), coord(2, k + 1)};
                cells.push_back({0.5 * (a + b), (b[0] - a[0]) * (b[1] - a[1]) * (b[2] - a[2])});
            }

    std::vector<Face> faces;
    // faces normal to `axis` at grid plane `p`; (i, j, k) are the lower corner indices
    for (int axis = 0; axis < 3; ++axis) {
        const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
        std::array<int, 3> idx{};
        for (idx[2] = 0; idx[2] < (axis == 2 ? nz + 1 : nz); ++idx[2])
            for (idx[1] = 0; idx[1] < (axis == 1 ? ny + 1 : ny); ++idx[1])
                for (idx[0] = 0; idx[0] < (axis == 0 ? nx + 1 : nx); ++idx[0]) {
                    const int p = idx[axis];
                    auto corner = [&](int d1, int d2) {
                        std::array<int, 3> q = idx;
                        q[t1] += d1;
                        q[t2] += d2;
                        return pid(q[0], q[1], q[2]);
                    };
                    Face f;
                    Vec3 nrm{};
                    nrm[axis] = 1.0;
                    auto lower = idx, upper = idx;
                    lower[axis] = p - 1;
                    const bool has_lower = p > 0, has_upper = p < n[axis];
                    if (has_lower) {
                        f.owner = static_cast<std::size_t>(cid(lower[0], lower[1], lower[2]));
                        f.neighbor = has_upper ? cid(upper[0], upper[1], upper[2]) : -1;
                        if (!has_upper) f.tag = tags[2 * axis + 1];
                        f.normal = nrm;
                        // counter-clockwise seen from +axis
                        f.vertices = {corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)};
                    } else {
                        f.owner = static_cast<std::size_t>(cid(upper[0], upper[1], upper[2]));
                        f.neighbor = -1;
                        f.tag = tags[2 * axis];
                        f.normal = -1.0 * nrm;
                        f.vertices = {corner(0, 0), corner(0, 1), corner(1, 1), corner(1, 0)};
                    }
                    Vec3 mid{};
                    for (auto v : f.vertices) mid += 0.25 * points[v];
                    f.midpoint = mid;
                    const Vec3 e1 = points[corner(1, 0)] - points[corner(0, 0)];
                    const Vec3 e2 = points[corner(0, 1)] - points[corner(0, 0)];
                    f.area = norm(cross(e1, e2));
                    faces.push_back(std::move(f));
                }
    }
    return FvMesh(std::move(cells), std::move(faces), std::move(points));
}

// ---------------------------------------------------------------------------
// File format (JSON, version "1"):
//   {
//     "format": "aerosem-fv", "version": "1",
//     "points": [[x, y, z], ...],                                   (optional)
//     "cells":  [{"center": [x, y, z], "volume": v}, ...],
//     "faces":  [{"owner": c, "neighbor": c | -1, "area": a, "normal": [..],
//                 "midpoint": [..], "vertices": [..], "tag": "..."}, ...],
//     "fields": [{"name": "U", "time": t, "values": [[ux, uy, uz], ...] | [q, ...]}, ...]
//   }
// "vertices" and "tag" are optional per face. Meshless files carry only
// "fields" and are read against an existing mesh.
// ---------------------------------------------------------------------------

struct FvData {
    std::optional<FvMesh> mesh;
    std::vector<Field> fields;
};

inline nlohmann::json field_to_json(const Field& f) {
    nlohmann::json vals = nlohmann::json::array();
    for (std::size_t c = 0; c < f.num_cells(); ++c) {
        if (f.components == 1)
            vals.push_back(f.values[c]);
        else
            vals.push_back({f.values[3 * c], f.values[3 * c + 1], f.values[3 * c + 2]});
    }
    return {{"name", f.name}, {"time", f.time}, {"values", vals}};
}

inline nlohmann::json fv_to_json(const FvMesh* mesh, const std::vector<Field>& fields) {
    nlohmann::json j;
    j["format"] = "aerosem-fv";
    j["version"] = "1";
    if (mesh) {
        if (!mesh->points().empty()) {
            auto& p = j["points"] = nlohmann::json::array();
            for (const auto& x : mesh->points()) p.push_back({x[0], x[1], x[2]});
        }
        auto& cells = j["cells"] = nlohmann::json::array();
        for (const auto& c : mesh->cells()) cells.push_back({{"center", c.center}, {"volume", c.volume}});
        auto& faces = j["faces"] = nlohmann::json::array();
        for (const auto& f : mesh->faces()) {
            nlohmann::json jf = {{"owner", f.owner},   {"neighbor", f.neighbor}, {"area", f.area},
                                 {"normal", f.normal}, {"midpoint", f.midpoint}};
            if (!f.vertices.empty()) jf["vertices"] = f.vertices;
            if (!f.tag.empty()) jf["tag"] = f.tag;
            faces.push_back(std::move(jf));
        }
    }
    auto& fl = j["fields"] = nlohmann::json::array();
    for (const auto& f : fields) fl.push_back(field_to_json(f));
    return j;
}

namespace io_detail {

template <class Fn>
auto record(const std::string& where, Fn&& fn) {
    try {
        return fn();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, "FV file, " + where + ": " + e.what());
    } catch (const Error& e) {
        throw Error(e.code() == ErrorCode::invalid_argument ? ErrorCode::schema : e.code(),
                    "FV file, " + where + ": " + e.what());
    }
}

inline Vec3 vec3_at(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    aerosem::detail::require(v.is_array() && v.size() == 3, ErrorCode::schema, std::string("'") + key + "' must be [x, y, z]");
    return v.get<Vec3>();
}

} // namespace io_detail

inline Field field_from_json(const nlohmann::json& jf, std::size_t num_cells) {
    Field f;
    f.name = jf.at("name").get<std::string>();
    f.time = jf.value("time", 0.0);
    const auto& vals = jf.at("values");
    aerosem::detail::require(vals.is_array() && vals.size() == num_cells, ErrorCode::schema,
                             "field '" + f.name + "' has " + std::to_string(vals.size()) + " values for " +
                                 std::to_string(num_cells) + " cells");
    f.components = (!vals.empty() && vals[0].is_array()) ? 3 : 1;
    f.values.reserve(num_cells * f.components);
    for (std::size_t c = 0; c < vals.size(); ++c) {
        if (f.components == 3) {
            aerosem::detail::require(vals[c].is_array() && vals[c].size() == 3, ErrorCode::schema,
                                     "field '" + f.name + "' value " + std::to_string(c) + " must be [x, y, z]");
            for (int k = 0; k < 3; ++k) f.values.push_back(vals[c][k].get<double>());
        } else {
            f.values.push_back(vals[c].get<double>());
        }
    }
    return f;
}

/// Parses an FV document; `mesh_hint` supplies the mesh for field-only files.
inline FvData fv_from_json(const nlohmann::json& j, const FvMesh* mesh_hint = nullptr) {
    FvData out;
    io_detail::record("header", [&] {
        aerosem::detail::require(j.value("format", "") == "aerosem-fv", ErrorCode::schema, "'format' must be \"aerosem-fv\"");
        aerosem::detail::require(j.value("version", "") == "1", ErrorCode::schema, "unsupported version (expected \"1\")");
        return 0;
    });
    if (j.contains("cells")) {
        std::vector<Vec3> points;
        if (j.contains("points"))
            for (std::size_t i = 0; i < j["points"].size(); ++i)
                points.push_back(io_detail::record("points[" + std::to_string(i) + "]", [&] { return j["points"][i].get<Vec3>(); }));
        std::vector<Cell> cells;
        for (std::size_t i = 0; i < j.at("cells").size(); ++i)
            cells.push_back(io_detail::record("cells[" + std::to_string(i) + "]", [&] {
                const auto& c = j["cells"][i];
                return Cell{io_detail::vec3_at(c, "center"), c.at("volume").get<double>()};
            }));
        std::vector<Face> faces;
        io_detail::record("faces", [&] {
            aerosem::detail::require(j.contains("faces"), ErrorCode::schema, "missing 'faces'");
            return 0;
        });
        for (std::size_t i = 0; i < j["faces"].size(); ++i)
            faces.push_back(io_detail::record("faces[" + std::to_string(i) + "]", [&] {
                const auto& jf = j["faces"][i];
                Face f;
                f.owner = jf.at("owner").get<std::size_t>();
                f.neighbor = jf.at("neighbor").get<long>();
                f.area = jf.at("area").get<double>();
                f.normal = io_detail::vec3_at(jf, "normal");
                f.midpoint = io_detail::vec3_at(jf, "midpoint");
                if (jf.contains("vertices")) f.vertices = jf["vertices"].get<std::vector<std::size_t>>();
                f.tag = jf.value("tag", "");
                return f;
            }));
        out.mesh.emplace(io_detail::record("mesh", [&] { return FvMesh(std::move(cells), std::move(faces), std::move(points)); }));
    }
    const FvMesh* mesh = out.mesh ? &*out.mesh : mesh_hint;
    if (j.contains("fields")) {
        aerosem::detail::require(mesh != nullptr, ErrorCode::schema, "FV file has fields but no mesh");
        std::map<std::string, double> last_time;
        for (std::size_t i = 0; i < j["fields"].size(); ++i) {
            auto f = io_detail::record("fields[" + std::to_string(i) + "]", [&] {
                auto f = field_from_json(j["fields"][i], mesh->num_cells());
                validate_field(*mesh, f);
                return f;
            });
            auto it = last_time.find(f.name);
            aerosem::detail::require(it == last_time.end() || f.time > it->second, ErrorCode::schema,
                                     "FV file, fields[" + std::to_string(i) + "]: time stamps of '" + f.name +
                                         "' are not strictly increasing");
            last_time[f.name] = f.time;
            out.fields.push_back(std::move(f));
        }
    }
    return out;
}

inline void write_fv(const std::string& path, const FvMesh* mesh, const std::vector<Field>& fields) {
    std::ofstream out(path);
    aerosem::detail::require(static_cast<bool>(out), ErrorCode::io, "cannot open " + path + " for writing");
    out << fv_to_json(mesh, fields).dump(1) << '\n';
}

inline FvData load_fv(const std::string& path, const FvMesh* mesh_hint = nullptr) {
    std::ifstream in(path);
    aerosem::detail::require(static_cast<bool>(in), ErrorCode::io, "cannot open FV file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, path + ": " + e.what());
    }
    try {
        return fv_from_json(j, mesh_hint);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

/// All fields with the given name, in file order.
inline std::vector<Field> select(const std::vector<Field>& fields, const std::string& name) {
    std::vector<Field> out;
    for (const auto& f : fields)
        if (f.name == name) out.push_back(f);
    return out;
}

} // namespace aerosem::fv
