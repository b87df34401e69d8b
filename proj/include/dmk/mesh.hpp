#pragma once

// Two-dimensional triangulations, uniform red refinement and the
// structured generators used by the scenarios.

#include "dmk/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace dmk {

using Index = std::size_t;

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Point&, const Point&) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }

using Tri = std::array<Index, 3>;
using Edge = std::array<Index, 2>;

/// Twice the signed area of (a, b, c); positive for counterclockwise order.
inline double signed_area2(Point a, Point b, Point c) { return cross(b - a, c - a); }

/// Canonical (min, max) key of an undirected edge.
inline Edge edge_key(Index a, Index b) { return a < b ? Edge{a, b} : Edge{b, a}; }

/// Sorted, deduplicated list of all edges of a triangle list.
inline std::vector<Edge> collect_edges(const std::vector<Tri>& tris) {
    std::vector<Edge> edges;
    edges.reserve(3 * tris.size());
    for (const auto& t : tris) {
        edges.push_back(edge_key(t[0], t[1]));
        edges.push_back(edge_key(t[1], t[2]));
        edges.push_back(edge_key(t[2], t[0]));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

/// Position of `key` in a sorted edge list. The key must be present.
inline Index edge_index(const std::vector<Edge>& sorted_edges, Edge key) {
    auto it = std::lower_bound(sorted_edges.begin(), sorted_edges.end(), key);
    return static_cast<Index>(it - sorted_edges.begin());
}

/// Immutable triangle mesh. Construct through `Triangulation::build`, which
/// orients every triangle counterclockwise and derives the boundary edges.
class Triangulation {
public:
    Triangulation() = default;

    /// Validates indices, rejects degenerate triangles, flips clockwise ones
    /// and checks that every edge is shared by at most two triangles.
    static Triangulation build(std::vector<Point> nodes, std::vector<Tri> tris) {
        Triangulation m;
        m.nodes_ = std::move(nodes);
        m.tris_ = std::move(tris);
        const Index nn = m.nodes_.size();
        for (Index t = 0; t < m.tris_.size(); ++t) {
            auto& tri = m.tris_[t];
            for (Index v : tri) {
                if (v >= nn) {
                    throw GeometryError("triangle " + std::to_string(t) + " references node " +
                                        std::to_string(v) + " of " + std::to_string(nn));
                }
            }
            const double a2 = signed_area2(m.nodes_[tri[0]], m.nodes_[tri[1]], m.nodes_[tri[2]]);
            const double scale = std::max({norm(m.nodes_[tri[1]] - m.nodes_[tri[0]]),
                                           norm(m.nodes_[tri[2]] - m.nodes_[tri[0]]), 1e-300});
            if (!(std::abs(a2) > 1e-14 * scale * scale)) {
                throw GeometryError("degenerate triangle " + std::to_string(t));
            }
            if (a2 < 0.0) std::swap(tri[1], tri[2]);
        }

        std::vector<Edge> all;
        all.reserve(3 * m.tris_.size());
        for (const auto& t : m.tris_) {
            all.push_back(edge_key(t[0], t[1]));
            all.push_back(edge_key(t[1], t[2]));
            all.push_back(edge_key(t[2], t[0]));
        }
        std::sort(all.begin(), all.end());
        for (Index i = 0; i < all.size();) {
            Index j = i;
            while (j < all.size() && all[j] == all[i]) ++j;
            const Index count = j - i;
            if (count > 2) {
                throw GeometryError("edge (" + std::to_string(all[i][0]) + "," +
                                    std::to_string(all[i][1]) + ") shared by more than 2 triangles");
            }
            if (count == 1) m.boundary_.push_back(all[i]);
            m.num_edges_++;
            i = j;
        }
        return m;
    }

    [[nodiscard]] const std::vector<Point>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::vector<Tri>& triangles() const noexcept { return tris_; }
    [[nodiscard]] const std::vector<Edge>& boundary_edges() const noexcept { return boundary_; }
    [[nodiscard]] Index num_nodes() const noexcept { return nodes_.size(); }
    [[nodiscard]] Index num_triangles() const noexcept { return tris_.size(); }
    [[nodiscard]] Index num_edges() const noexcept { return num_edges_; }

    [[nodiscard]] Point vertex(Index t, int k) const { return nodes_[tris_[t][static_cast<Index>(k)]]; }

    [[nodiscard]] Point centroid(Index t) const {
        const Point s = vertex(t, 0) + vertex(t, 1) + vertex(t, 2);
        return (1.0 / 3.0) * s;
    }

    [[nodiscard]] double area(Index t) const {
        return 0.5 * std::abs(signed_area2(vertex(t, 0), vertex(t, 1), vertex(t, 2)));
    }

    [[nodiscard]] double diameter(Index t) const {
        return std::max({norm(vertex(t, 1) - vertex(t, 0)), norm(vertex(t, 2) - vertex(t, 1)),
                         norm(vertex(t, 0) - vertex(t, 2))});
    }

    /// Mesh size h: the largest triangle diameter.
    [[nodiscard]] double mesh_size() const {
        double h = 0.0;
        for (Index t = 0; t < tris_.size(); ++t) h = std::max(h, diameter(t));
        return h;
    }

    [[nodiscard]] double total_area() const {
        double a = 0.0;
        for (Index t = 0; t < tris_.size(); ++t) a += area(t);
        return a;
    }

    [[nodiscard]] std::vector<double> areas() const {
        std::vector<double> a(tris_.size());
        for (Index t = 0; t < tris_.size(); ++t) a[t] = area(t);
        return a;
    }

    /// Barycentric containment test with a relative tolerance.
    [[nodiscard]] bool contains(Index t, Point p, double tol = 1e-12) const {
        const Point a = vertex(t, 0), b = vertex(t, 1), c = vertex(t, 2);
        const double d = signed_area2(a, b, c);
        const double l0 = signed_area2(p, b, c) / d;
        const double l1 = signed_area2(a, p, c) / d;
        const double l2 = 1.0 - l0 - l1;
        return l0 >= -tol && l1 >= -tol && l2 >= -tol;
    }

private:
    std::vector<Point> nodes_;
    std::vector<Tri> tris_;
    std::vector<Edge> boundary_;
    Index num_edges_ = 0;
};

/// Area and constant P1 basis gradients of one triangle.
struct ElementGeometry {
    double area = 0.0;
    std::array<Point, 3> basis_gradients{};
};

inline ElementGeometry element_geometry(const Triangulation& mesh, Index t) {
    if (t >= mesh.num_triangles()) {
        throw GeometryError("triangle index " + std::to_string(t) + " out of range");
    }
    const Point p0 = mesh.vertex(t, 0), p1 = mesh.vertex(t, 1), p2 = mesh.vertex(t, 2);
    const double det = signed_area2(p0, p1, p2);
    ElementGeometry g;
    g.area = 0.5 * std::abs(det);
    g.basis_gradients[0] = {(p1.y - p2.y) / det, (p2.x - p1.x) / det};
    g.basis_gradients[1] = {(p2.y - p0.y) / det, (p0.x - p2.x) / det};
    g.basis_gradients[2] = {(p0.y - p1.y) / det, (p1.x - p0.x) / det};
    return g;
}

/// A coarse mesh together with its uniform red refinement. Fine triangle
/// `4*t + i` is the i-th child of coarse triangle `t`; the fourth child
/// (i = 3) is the interior one.
struct RefinedPair {
    Triangulation coarse;
    Triangulation fine;
    std::vector<Index> parent_of;
    std::vector<Index> coarse_node_embed;

    [[nodiscard]] Index child(Index coarse_tri, int i) const { return 4 * coarse_tri + static_cast<Index>(i); }
};

/// Red refinement: every triangle is split into four through its edge
/// midpoints. Fine nodes are the coarse nodes followed by one midpoint per
/// coarse edge in sorted (min, max) edge-key order.
inline RefinedPair refine_uniform(const Triangulation& mesh) {
    const auto& nodes = mesh.nodes();
    const auto& tris = mesh.triangles();
    for (Index t = 0; t < tris.size(); ++t) {
        if (!(mesh.area(t) > 0.0)) throw GeometryError("degenerate triangle " + std::to_string(t));
    }
    const std::vector<Edge> edges = collect_edges(tris);
    const Index nc = nodes.size();

    std::vector<Point> fine_nodes(nodes);
    fine_nodes.reserve(nc + edges.size());
    for (const auto& e : edges) fine_nodes.push_back(0.5 * (nodes[e[0]] + nodes[e[1]]));

    auto mid = [&](Index a, Index b) { return nc + edge_index(edges, edge_key(a, b)); };

    std::vector<Tri> fine_tris;
    fine_tris.reserve(4 * tris.size());
    std::vector<Index> parent;
    parent.reserve(4 * tris.size());
    for (Index t = 0; t < tris.size(); ++t) {
        const auto [a, b, c] = tris[t];
        const Index ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
        fine_tris.push_back({a, ab, ca});
        fine_tris.push_back({ab, b, bc});
        fine_tris.push_back({ca, bc, c});
        fine_tris.push_back({ab, bc, ca});
        for (int i = 0; i < 4; ++i) parent.push_back(t);
    }

    RefinedPair pair;
    pair.coarse = mesh;
    pair.fine = Triangulation::build(std::move(fine_nodes), std::move(fine_tris));
    pair.parent_of = std::move(parent);
    pair.coarse_node_embed.resize(nc);
    for (Index i = 0; i < nc; ++i) pair.coarse_node_embed[i] = i;
    return pair;
}

/// Structured mesh of [0,1]^2 with n x n cells, each split along one
/// diagonal. The diagonal direction alternates like a checkerboard so the
/// mesh is mirror-symmetric about x = 1/2 and y = 1/2 for even n.
inline Triangulation gen_unit_square(Index n) {
    if (n < 1) throw GeometryError("gen_unit_square: n must be >= 1");
    std::vector<Point> nodes;
    nodes.reserve((n + 1) * (n + 1));
    const double dn = static_cast<double>(n);
    for (Index j = 0; j <= n; ++j) {
        for (Index i = 0; i <= n; ++i) {
            nodes.push_back({static_cast<double>(i) / dn, static_cast<double>(j) / dn});
        }
    }
    auto id = [n](Index i, Index j) { return j * (n + 1) + i; };
    std::vector<Tri> tris;
    tris.reserve(2 * n * n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            const Index a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if ((i + j) % 2 == 0) {
                tris.push_back({a, b, c});
                tris.push_back({a, c, d});
            } else {
                tris.push_back({a, b, d});
                tris.push_back({b, c, d});
            }
        }
    }
    return Triangulation::build(std::move(nodes), std::move(tris));
}

/// Number of nodes placed on ring k (1-based) of the polar disk mesh.
inline Index polar_ring_size(Index k, Index n_r, Index n_t) {
    const auto m = static_cast<Index>(std::lround(static_cast<double>(n_t * k) / static_cast<double>(n_r)));
    return std::max<Index>(m, 6);
}

/// Polar mesh of the unit disk. Ring k sits at radius k/n_r and carries
/// about n_t*k/n_r nodes (at least 6), so elements stay close to isotropic;
/// the outer ring has exactly n_t nodes. Consecutive rings are stitched by
/// angular merging and the first ring is fanned to the center node.
inline Triangulation gen_disk_polar(Index n_r, Index n_t) {
    if (n_r == 0 || n_r % 3 != 0) throw ConfigError("gen_disk_polar: rings must be a positive multiple of 3");
    if (n_t < 8) throw ConfigError("gen_disk_polar: sectors must be >= 8");

    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::vector<Point> nodes{{0.0, 0.0}};
    std::vector<Index> first(n_r + 1, 0);
    std::vector<Index> count(n_r + 1, 0);
    std::vector<double> phase(n_r + 1, 0.0);
    for (Index k = 1; k <= n_r; ++k) {
        const Index m = k == n_r ? n_t : polar_ring_size(k, n_r, n_t);
        first[k] = nodes.size();
        count[k] = m;
        phase[k] = (k % 2 == 1) ? 0.0 : 0.5 * two_pi / static_cast<double>(m);
        const double r = static_cast<double>(k) / static_cast<double>(n_r);
        for (Index j = 0; j < m; ++j) {
            const double th = phase[k] + two_pi * static_cast<double>(j) / static_cast<double>(m);
            nodes.push_back({r * std::cos(th), r * std::sin(th)});
        }
    }

    std::vector<Tri> tris;
    auto push_ccw = [&](Index a, Index b, Index c) {
        if (signed_area2(nodes[a], nodes[b], nodes[c]) < 0.0) std::swap(b, c);
        tris.push_back({a, b, c});
    };

    for (Index j = 0; j < count[1]; ++j) {
        push_ccw(0, first[1] + j, first[1] + (j + 1) % count[1]);
    }

    for (Index k = 1; k < n_r; ++k) {
        const Index ma = count[k], mb = count[k + 1];
        auto ang_a = [&](Index i) { return phase[k] + two_pi * static_cast<double>(i) / static_cast<double>(ma); };
        auto ang_b = [&](Index j) { return phase[k + 1] + two_pi * static_cast<double>(j) / static_cast<double>(mb); };
        auto node_a = [&](Index i) { return first[k] + i % ma; };
        auto node_b = [&](Index j) { return first[k + 1] + j % mb; };

        // Outer starting node: the last one not ahead of inner node 0.
        Index j = 0;
        double shift = 0.0;
        if (ang_b(0) > ang_a(0)) shift = -two_pi;
        while (ang_b(j + 1) + shift <= ang_a(0)) ++j;
        const Index j_end = j + mb;
        Index i = 0;
        while (i < ma || j < j_end) {
            const bool advance_inner =
                j == j_end || (i < ma && ang_a(i + 1) <= ang_b(j + 1) + shift);
            if (advance_inner) {
                push_ccw(node_a(i), node_b(j), node_a(i + 1));
                ++i;
            } else {
                push_ccw(node_a(i), node_b(j), node_b(j + 1));
                ++j;
            }
        }
    }
    return Triangulation::build(std::move(nodes), std::move(tris));
}

} // namespace dmk
