#pragma once

// Source/sink descriptions and the mass-balanced P1 load vector.

#include "dmk/errors.hpp"
#include "dmk/mesh.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace dmk {

struct Box {
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    double value = 0;

    [[nodiscard]] bool contains(Point p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    [[nodiscard]] double area() const { return (x1 - x0) * (y1 - y0); }
};

struct Boxes {
    std::vector<Box> boxes;
};

/// F(r) = c1 on r < 1/3, 0 on [1/3, 2/3], c2 on r > 2/3.
struct RadialPiecewise {
    double c1 = 1.0;
    double c2 = -0.2;

    [[nodiscard]] double operator()(double r) const {
        if (r < 1.0 / 3.0) return c1;
        if (r > 2.0 / 3.0) return c2;
        return 0.0;
    }
};

struct Dirac {
    Point at;
    double weight = 0;
};

struct DiracSet {
    std::vector<Dirac> points;
};

using ForcingSpec = std::variant<Boxes, RadialPiecewise, DiracSet>;

struct RhsVector {
    std::vector<double> values;
    double positive_total = 0;
    double negative_total = 0;
    /// Factor applied to the negative entries by the balance correction.
    double balance_scale = 1;
};

namespace detail {

/// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0, carry = 0;
    void add(double v) {
        const double t = sum + v;
        carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    [[nodiscard]] double value() const { return sum + carry; }
};

} // namespace detail

/// Index of the fine node nearest to `p`; throws when `p` is outside the mesh.
inline Index snap_to_node(const Triangulation& mesh, Point p) {
    bool inside = false;
    for (Index t = 0; t < mesh.num_triangles() && !inside; ++t) inside = mesh.contains(t, p, 1e-9);
    if (!inside) {
        throw DomainError("Dirac point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                          ") lies outside the domain");
    }
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < mesh.num_nodes(); ++i) {
        const double d = norm(mesh.nodes()[i] - p);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

/// Assembles b on the fine mesh and rescales its negative part so that the
/// entries sum to zero.
inline RhsVector assemble_rhs(const ForcingSpec& spec, const RefinedPair& pair, int subdivisions = 1) {
    const Triangulation& fine = pair.fine;
    RhsVector rhs;
    rhs.values.assign(fine.num_nodes(), 0.0);

    // Centroid rule on a regular split of each fine triangle into
    // subdivisions^2 pieces; subdivisions = 1 is the plain centroid rule.
    const int k = std::max(subdivisions, 1);
    std::vector<std::array<double, 2>> pts;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; i + j < k; ++j) {
            pts.push_back({(i + 1.0 / 3.0) / k, (j + 1.0 / 3.0) / k});
            if (i + j + 1 < k) pts.push_back({(i + 2.0 / 3.0) / k, (j + 2.0 / 3.0) / k});
        }
    }
    auto integrate = [&](auto&& f) {
        for (Index t = 0; t < fine.num_triangles(); ++t) {
            const Point a = fine.vertex(t, 0), e1 = fine.vertex(t, 1) - a, e2 = fine.vertex(t, 2) - a;
            const double w = fine.area(t) / static_cast<double>(pts.size());
            std::array<double, 3> load{0.0, 0.0, 0.0};
            for (const auto& [s, r] : pts) {
                const double fv = f(a + s * e1 + r * e2);
                if (fv == 0.0) continue;
                load[0] += w * fv * (1.0 - s - r);
                load[1] += w * fv * s;
                load[2] += w * fv * r;
            }
            for (std::size_t v = 0; v < 3; ++v) rhs.values[fine.triangles()[t][v]] += load[v];
        }
    };

    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, Boxes>) {
                integrate([&](Point p) {
                    double v = 0;
                    for (const auto& b : s.boxes) {
                        if (b.contains(p)) v += b.value;
                    }
                    return v;
                });
            } else if constexpr (std::is_same_v<S, RadialPiecewise>) {
                integrate([&](Point p) { return s(norm(p)); });
            } else {
                for (const auto& d : s.points) rhs.values[snap_to_node(fine, d.at)] += d.weight;
            }
        },
        spec);

    detail::CompensatedSum pos, neg;
    for (double v : rhs.values) (v > 0 ? pos : neg).add(v);
    double p = pos.value();
    const double n = neg.value();
    if (!(p > 0.0) || !(n < 0.0)) {
        throw BalanceError("forcing must have both a positive and a negative part");
    }
    const double s = p / -n;
    Index most_negative = 0;
    for (Index i = 0; i < rhs.values.size(); ++i) {
        if (rhs.values[i] < 0) {
            rhs.values[i] *= s;
            if (rhs.values[i] < rhs.values[most_negative]) most_negative = i;
        }
    }
    // Remove the rounding residue of the rescaling.
    detail::CompensatedSum total;
    for (double v : rhs.values) total.add(v);
    rhs.values[most_negative] -= total.value();

    rhs.positive_total = p;
    rhs.negative_total = -p;
    rhs.balance_scale = s;
    return rhs;
}

/// TC1: equal-value source and sink rectangles.
inline ForcingSpec make_tc1_boxes(double value = 1.0) {
    return Boxes{{{1.0 / 8, 3.0 / 8, 1.0 / 4, 3.0 / 4, value}, {5.0 / 8, 7.0 / 8, 1.0 / 4, 3.0 / 4, -value}}};
}

/// TC2: `count` unit sources uniform on [0.1, 0.9]^2, one balancing sink at
/// (0.05, 0.05).
inline ForcingSpec make_tc2_sources(std::uint64_t seed, int count = 50) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.1, 0.9);
    DiracSet set;
    for (int i = 0; i < count; ++i) {
        const double x = uni(rng);
        const double y = uni(rng);
        set.points.push_back({{x, y}, 1.0});
    }
    set.points.push_back({{0.05, 0.05}, -static_cast<double>(count)});
    return set;
}

/// TC3: one unit source at (0.5, 0.1), two half sinks at (0.4, 0.9), (0.6, 0.9).
inline ForcingSpec make_tc3_diracs() {
    return DiracSet{{{{0.5, 0.1}, 1.0}, {{0.4, 0.9}, -0.5}, {{0.6, 0.9}, -0.5}}};
}

} // namespace dmk
