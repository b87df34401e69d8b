#pragma once

// Reader and writer for the Triangle `.node` / `.ele` plain-text formats
// (2D only). The index base (0 or 1) is taken from the first data row of
// the `.node` file and applied to both files.

#include "dmk/errors.hpp"
#include "dmk/mesh.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace dmk {

namespace detail {

struct TextLine {
    std::size_t number = 0;
    std::vector<std::string> tokens;
};

/// Non-empty, comment-stripped lines split on whitespace.
inline std::vector<TextLine> tokenize_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<TextLine> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        TextLine tl{n, {}};
        for (std::string tok; ss >> tok;) tl.tokens.push_back(tok);
        if (!tl.tokens.empty()) out.push_back(std::move(tl));
    }
    return out;
}

inline long long parse_int(const std::string& s, const std::string& path, std::size_t line) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &pos);
    } catch (const std::exception&) {
        throw ParseError(path + ": expected integer, got '" + s + "'", line);
    }
    if (pos != s.size()) throw ParseError(path + ": expected integer, got '" + s + "'", line);
    return v;
}

inline double parse_real(const std::string& s, const std::string& path, std::size_t line) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ParseError(path + ": expected number, got '" + s + "'", line);
    }
    if (pos != s.size()) throw ParseError(path + ": expected number, got '" + s + "'", line);
    return v;
}

} // namespace detail

inline Triangulation read_triangle_format(const std::string& node_path, const std::string& ele_path) {
    using detail::parse_int;
    using detail::parse_real;

    const auto node_lines = detail::tokenize_file(node_path);
    if (node_lines.empty()) throw ParseError(node_path + ": empty file", 0);
    const auto& nh = node_lines.front();
    if (nh.tokens.size() < 2) throw ParseError(node_path + ": malformed header", nh.number);
    const long long n_nodes = parse_int(nh.tokens[0], node_path, nh.number);
    const long long dim = parse_int(nh.tokens[1], node_path, nh.number);
    if (n_nodes < 0) throw ParseError(node_path + ": negative node count", nh.number);
    if (dim != 2) throw ParseError(node_path + ": only 2D meshes are supported", nh.number);
    const long long n_attr = nh.tokens.size() > 2 ? parse_int(nh.tokens[2], node_path, nh.number) : 0;
    const long long n_mark = nh.tokens.size() > 3 ? parse_int(nh.tokens[3], node_path, nh.number) : 0;
    if (static_cast<long long>(node_lines.size()) - 1 < n_nodes) {
        throw ParseError(node_path + ": expected " + std::to_string(n_nodes) + " node rows, found " +
                             std::to_string(node_lines.size() - 1),
                         node_lines.back().number);
    }

    long long base = 0;
    std::vector<Point> nodes(static_cast<std::size_t>(n_nodes));
    for (long long i = 0; i < n_nodes; ++i) {
        const auto& row = node_lines[static_cast<std::size_t>(i) + 1];
        if (static_cast<long long>(row.tokens.size()) < 3 + n_attr + n_mark) {
            throw ParseError(node_path + ": too few columns", row.number);
        }
        const long long idx = parse_int(row.tokens[0], node_path, row.number);
        if (i == 0) {
            if (idx != 0 && idx != 1) throw ParseError(node_path + ": first index must be 0 or 1", row.number);
            base = idx;
        }
        if (idx - base != i) throw ParseError(node_path + ": node index out of sequence", row.number);
        nodes[static_cast<std::size_t>(i)] = {parse_real(row.tokens[1], node_path, row.number),
                                              parse_real(row.tokens[2], node_path, row.number)};
    }

    const auto ele_lines = detail::tokenize_file(ele_path);
    if (ele_lines.empty()) throw ParseError(ele_path + ": empty file", 0);
    const auto& eh = ele_lines.front();
    if (eh.tokens.size() < 2) throw ParseError(ele_path + ": malformed header", eh.number);
    const long long n_tris = parse_int(eh.tokens[0], ele_path, eh.number);
    const long long per = parse_int(eh.tokens[1], ele_path, eh.number);
    if (n_tris < 0) throw ParseError(ele_path + ": negative triangle count", eh.number);
    if (per != 3) throw ParseError(ele_path + ": only 3-node triangles are supported", eh.number);
    if (static_cast<long long>(ele_lines.size()) - 1 < n_tris) {
        throw ParseError(ele_path + ": expected " + std::to_string(n_tris) + " triangle rows, found " +
                             std::to_string(ele_lines.size() - 1),
                         ele_lines.back().number);
    }
    std::vector<Tri> tris(static_cast<std::size_t>(n_tris));
    for (long long t = 0; t < n_tris; ++t) {
        const auto& row = ele_lines[static_cast<std::size_t>(t) + 1];
        if (row.tokens.size() < 4) throw ParseError(ele_path + ": too few columns", row.number);
        for (std::size_t k = 0; k < 3; ++k) {
            const long long v = parse_int(row.tokens[k + 1], ele_path, row.number) - base;
            if (v < 0 || v >= n_nodes) {
                throw ParseError(ele_path + ": node index " + row.tokens[k + 1] + " out of range", row.number);
            }
            tris[static_cast<std::size_t>(t)][k] = static_cast<Index>(v);
        }
    }
    try {
        return Triangulation::build(std::move(nodes), std::move(tris));
    } catch (const GeometryError& e) {
        throw ParseError(ele_path + ": " + e.what(), 0);
    }
}

/// Writes 0-based files with full round-trip precision.
inline void write_triangle_format(const Triangulation& mesh, const std::string& node_path,
                                  const std::string& ele_path) {
    std::ofstream node(node_path);
    if (!node) throw IoError("cannot write " + node_path);
    node << mesh.num_nodes() << " 2 0 0\n" << std::setprecision(17);
    for (Index i = 0; i < mesh.num_nodes(); ++i) {
        node << i << ' ' << mesh.nodes()[i].x << ' ' << mesh.nodes()[i].y << '\n';
    }
    std::ofstream ele(ele_path);
    if (!ele) throw IoError("cannot write " + ele_path);
    ele << mesh.num_triangles() << " 3 0\n";
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles()[t];
        ele << t << ' ' << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
    }
    if (!node || !ele) throw IoError("write failed for " + node_path);
}

} // namespace dmk
