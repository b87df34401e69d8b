#pragma once

// Output formats: legacy ASCII VTK (unstructured grid of triangles) for
// fields and a fixed-header CSV for per-step diagnostics. Floats are
// written with 17 significant digits so values round-trip exactly.

#include "dmk/diagnostics.hpp"
#include "dmk/errors.hpp"
#include "dmk/mesh.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dmk {

inline constexpr std::string_view csv_header =
    "step,time,dt,var,lyapunov,energy,mass_term,mu_integral,err,cg_iters,mu_min,mu_max,support_fraction";

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

enum class VtkAttachment { cell, point };

/// One named scalar array attached to cells or points of the mesh.
struct VtkScalar {
    std::string name;
    VtkAttachment where;
    std::span<const double> values;
};

inline void write_vtk(const std::filesystem::path& path, const Triangulation& mesh, std::span<const VtkScalar> arrays,
                      std::string_view title = "dmk field") {
    for (const auto& a : arrays) {
        const Index expected = a.where == VtkAttachment::cell ? mesh.num_triangles() : mesh.num_nodes();
        if (a.values.size() != expected) {
            throw IoError("VTK array '" + a.name + "' has " + std::to_string(a.values.size()) + " values, expected " +
                          std::to_string(expected));
        }
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");

    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.num_nodes() << " double\n";
    for (const auto& p : mesh.nodes()) out << format_double(p.x) << ' ' << format_double(p.y) << " 0\n";
    out << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
    for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out << "CELL_TYPES " << mesh.num_triangles() << '\n';
    for (Index t = 0; t < mesh.num_triangles(); ++t) out << "5\n";

    for (auto where : {VtkAttachment::cell, VtkAttachment::point}) {
        bool header = false;
        for (const auto& a : arrays) {
            if (a.where != where) continue;
            if (!header) {
                out << (where == VtkAttachment::cell ? "CELL_DATA " : "POINT_DATA ") << a.values.size() << '\n';
                header = true;
            }
            out << "SCALARS " << a.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : a.values) out << format_double(v) << '\n';
        }
    }
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_vtk_cell_field(const std::filesystem::path& path, const Triangulation& mesh, std::string name,
                                 std::span<const double> values) {
    const VtkScalar a{std::move(name), VtkAttachment::cell, values};
    write_vtk(path, mesh, std::span<const VtkScalar>(&a, 1));
}

inline void write_vtk_point_field(const std::filesystem::path& path, const Triangulation& mesh, std::string name,
                                  std::span<const double> values) {
    const VtkScalar a{std::move(name), VtkAttachment::point, values};
    write_vtk(path, mesh, std::span<const VtkScalar>(&a, 1));
}

/// Reads back a named scalar array from a file written by write_vtk.
/// Only the subset of the legacy format produced above is understood.
inline std::vector<double> read_vtk_scalars(const std::filesystem::path& path, std::string_view name) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    std::size_t lineno = 0, count = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "CELL_DATA" || key == "POINT_DATA") {
            ls >> count;
        } else if (key == "SCALARS") {
            std::string n;
            ls >> n;
            if (n != name) continue;
            std::getline(in, line);
            ++lineno;
            if (line.rfind("LOOKUP_TABLE", 0) != 0) throw ParseError("expected LOOKUP_TABLE", lineno);
            std::vector<double> v;
            v.reserve(count);
            while (v.size() < count && std::getline(in, line)) {
                ++lineno;
                try {
                    v.push_back(std::stod(line));
                } catch (const std::exception&) {
                    throw ParseError("bad scalar value '" + line + "'", lineno);
                }
            }
            if (v.size() != count) throw ParseError("truncated scalar array '" + std::string(name) + "'", lineno);
            return v;
        }
    }
    throw ParseError("no scalar array named '" + std::string(name) + "'", 0);
}

inline std::string csv_row(const DiagnosticsRecord& r) {
    std::string s = std::to_string(r.step);
    for (double v : {r.time, r.dt, r.var, r.lyapunov, r.energy, r.mass_term, r.mu_integral, r.err}) {
        s += ',';
        s += format_double(v);
    }
    s += ',' + std::to_string(r.cg_iterations);
    for (double v : {r.mu_min, r.mu_max, r.support_fraction}) {
        s += ',';
        s += format_double(v);
    }
    return s;
}

inline void write_csv(const std::filesystem::path& path, std::span<const DiagnosticsRecord> records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << csv_header << '\n';
    for (const auto& r : records) out << csv_row(r) << '\n';
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

} // namespace dmk
