#pragma once

/// @file mesh_io.hpp
/// @brief JSON mesh file (schema version "1").
///
///     {
///       "version": "1",
///       "vertices": [[x, y, z], ...],
///       "elements": [[v0, ..., v7], ...],          // corner order as in mesh.hpp
///       "boundary": [{"element": e, "face": f, "tag": "wall"}, ...]
///     }

#include <fstream>
#include <string>

#include <json.hpp>

#include "aerosem/error.hpp"
#include "aerosem/mesh.hpp"

namespace aerosem {

inline nlohmann::json mesh_to_json(const HexMesh& mesh) {
    nlohmann::json j;
    j["version"] = "1";
    auto& v = j["vertices"] = nlohmann::json::array();
    for (const auto& p : mesh.vertices()) v.push_back({p[0], p[1], p[2]});
    auto& el = j["elements"] = nlohmann::json::array();
    for (const auto& e : mesh.elements()) el.push_back(e);
    auto& b = j["boundary"] = nlohmann::json::array();
    for (const auto& f : mesh.boundary()) b.push_back({{"element", f.element}, {"face", f.local_face}, {"tag", f.tag}});
    return j;
}

inline HexMesh mesh_from_json(const nlohmann::json& j) {
    try {
        detail::require(j.contains("version") && j.at("version") == "1", ErrorCode::schema,
                        "mesh file: missing or unsupported version (expected \"1\")");
        std::vector<Vec3> verts;
        for (const auto& p : j.at("vertices")) verts.push_back(p.get<Vec3>());
        std::vector<std::array<std::size_t, 8>> elems;
        for (const auto& e : j.at("elements")) elems.push_back(e.get<std::array<std::size_t, 8>>());
        std::vector<BoundaryFace> bnd;
        for (const auto& f : j.at("boundary"))
            bnd.push_back({f.at("element").get<std::size_t>(), f.at("face").get<int>(), f.at("tag").get<std::string>()});
        return HexMesh(std::move(verts), std::move(elems), std::move(bnd));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, std::string("mesh file: ") + e.what());
    }
}

inline void write_mesh(const std::string& path, const HexMesh& mesh) {
    std::ofstream out(path);
    detail::require(static_cast<bool>(out), ErrorCode::io, "cannot open " + path + " for writing");
    out << mesh_to_json(mesh).dump(1) << '\n';
}

inline HexMesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorCode::io, "cannot open mesh file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::schema, path + ": " + e.what());
    }
    return mesh_from_json(j);
}

} // namespace aerosem
