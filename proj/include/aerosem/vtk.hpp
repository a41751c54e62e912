#pragma once

/// @file vtk.hpp
/// @brief Legacy ASCII VTK unstructured-grid export. Each spectral element is
/// written as r^3 linear hexahedra (cell type 12) through its GLL nodes.

#include <fstream>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aerosem/error.hpp"
#include "aerosem/space.hpp"

namespace aerosem {

using NamedField = std::pair<std::string, std::span<const double>>;

inline void write_vtk(std::ostream& out, const SpectralSpace& space, const std::vector<NamedField>& fields,
                      const std::string& title = "aerosem") {
    const int n = space.nodes_per_axis();
    const int r = space.degree();
    const auto& nodes = space.nodes();
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << std::setprecision(12);
    out << "POINTS " << nodes.size() << " double\n";
    for (const auto& p : nodes) out << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';

    const std::size_t ncells = space.num_elements() * static_cast<std::size_t>(r * r * r);
    out << "CELLS " << ncells << ' ' << ncells * 9 << '\n';
    constexpr int off[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const auto dofs = space.element_dofs(e);
        for (int c = 0; c < r; ++c)
            for (int b = 0; b < r; ++b)
                for (int a = 0; a < r; ++a) {
                    out << 8;
                    for (const auto& o : off) out << ' ' << dofs[(a + o[0]) + n * (b + o[1]) + n * n * (c + o[2])];
                    out << '\n';
                }
    }
    out << "CELL_TYPES " << ncells << '\n';
    for (std::size_t i = 0; i < ncells; ++i) out << "12\n";
    if (!fields.empty()) {
        out << "POINT_DATA " << nodes.size() << '\n';
        for (const auto& [name, vals] : fields) {
            detail::require(vals.size() == nodes.size(), ErrorCode::invalid_argument, "VTK field size mismatch");
            out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : vals) out << v << '\n';
        }
    }
}

inline void write_vtk(const std::string& path, const SpectralSpace& space, const std::vector<NamedField>& fields) {
    std::ofstream out(path);
    detail::require(static_cast<bool>(out), ErrorCode::io, "cannot open " + path + " for writing");
    write_vtk(out, space, fields);
}

} // namespace aerosem
