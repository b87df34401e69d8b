#pragma once

// Scalar metrics of a (mu, u) state: the Lyapunov functional and its
// pieces, its time derivative along the flow, errors against the exact
// radial solution, steady-state residuals, support statistics and the
// branch-point quantities used for the Y-shaped test case.

#include "dmk/assembly.hpp"
#include "dmk/errors.hpp"
#include "dmk/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dmk {

struct DiagnosticsRecord {
    std::size_t step = 0;
    double time = 0;
    double dt = 0;
    double var = std::numeric_limits<double>::quiet_NaN();
    double lyapunov = 0;
    double energy = 0;
    double mass_term = 0;
    double mu_integral = 0;
    double err = std::numeric_limits<double>::quiet_NaN();
    std::size_t cg_iterations = 0;
    double mu_min = 0;
    double mu_max = 0;
    double support_fraction = 0;
};

struct LyapunovValue {
    double value = 0;
    double energy = 0;
    double mass_term = 0;
};

/// M_beta = 1/2 int mu^e / e with e = (2 - beta)/beta, or 1/2 int ln(mu) at beta = 2.
inline double mass_term(std::span<const double> mu, double beta, std::span<const double> areas) {
    double m = 0.0;
    const bool log_branch = beta == 2.0;
    const double e = (2.0 - beta) / beta;
    for (Index t = 0; t < mu.size(); ++t) {
        if (!(mu[t] > 0.0)) throw DomainError("mass term requires positive conductivity");
        m += areas[t] * (log_branch ? std::log(mu[t]) : std::pow(mu[t], e) / e);
    }
    return 0.5 * m;
}

inline LyapunovValue lyapunov_from_norms(const StiffnessAssembler& as, std::span<const double> mu,
                                         std::span<const double> g, double beta) {
    LyapunovValue l;
    l.energy = as.dirichlet_energy_from_norms(mu, g);
    l.mass_term = mass_term(mu, beta, as.coarse_areas());
    l.value = l.energy + l.mass_term;
    return l;
}

inline LyapunovValue lyapunov(const StiffnessAssembler& as, std::span<const double> mu, std::span<const double> u,
                              double beta) {
    return lyapunov_from_norms(as, mu, as.gradient_norms(u), beta);
}

/// Right-hand side of the Lie derivative of L_beta along the flow:
/// -1/2 sum |T| mu^b (g^b - mu^(1-b)) (g^2 - mu^(2(1-b)/b)). Never positive.
inline double lie_derivative_rhs(std::span<const double> mu, std::span<const double> g, double beta,
                                 std::span<const double> areas) {
    double s = 0.0;
    for (Index t = 0; t < mu.size(); ++t) {
        if (!(mu[t] > 0.0)) throw DomainError("Lie derivative requires positive conductivity");
        const double a = std::pow(mu[t], beta) * std::pow(g[t], beta) - mu[t];
        const double b = g[t] * g[t] - std::pow(mu[t], 2.0 * (1.0 - beta) / beta);
        s += areas[t] * a * b;
    }
    return -0.5 * s;
}

inline double lie_derivative_rhs(const StiffnessAssembler& as, std::span<const double> mu, std::span<const double> u,
                                 double beta) {
    return lie_derivative_rhs(mu, as.gradient_norms(u), beta, as.coarse_areas());
}

/// int mu over the coarse mesh.
inline double integral_p0(std::span<const double> f, std::span<const double> areas) {
    double s = 0.0;
    for (Index t = 0; t < f.size(); ++t) s += f[t] * areas[t];
    return s;
}

inline double l2_norm_p0(std::span<const double> f, std::span<const double> areas) {
    double s = 0.0;
    for (Index t = 0; t < f.size(); ++t) s += f[t] * f[t] * areas[t];
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Exact radial solution for F = c1 on (0,1/3), 0 on [1/3,2/3], c2 on (2/3,1).

/// Z(r) = -(1/r) int_0^r t F(t) dt.
inline double exact_Z(double r, double c1, double c2) {
    if (!(r > 0.0)) throw DomainError("exact_Z requires r > 0");
    if (r <= 1.0 / 3.0) return -c1 * r / 2.0;
    if (r <= 2.0 / 3.0) return -c1 / (18.0 * r);
    return -(c1 / 18.0 + c2 * (r * r - 4.0 / 9.0) / 2.0) / r;
}

inline double exact_mu(double r, double beta, double c1, double c2) {
    return std::pow(std::abs(exact_Z(r, c1, c2)), beta);
}

struct ExactRadial {
    double c1 = 1.0;
    double c2 = -0.2;
    double beta = 0.5;

    static ExactRadial balanced(double c1, double beta) {
        if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("exact radial solution needs 0 < beta <= 1");
        return {c1, -c1 / 5.0, beta};
    }

    /// p = (2 - beta)/(1 - beta); infinite at beta = 1.
    [[nodiscard]] double p() const {
        return beta == 1.0 ? std::numeric_limits<double>::infinity() : (2.0 - beta) / (1.0 - beta);
    }
    [[nodiscard]] double mu(double r) const { return exact_mu(r, beta, c1, c2); }
    [[nodiscard]] double Z(double r) const { return exact_Z(r, c1, c2); }
};

namespace detail {

inline double simpson(double fa, double fm, double fb, double a, double b) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                               double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(fa, flm, fm, a, m);
    const double right = simpson(fm, frm, fb, m, b);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0) throw DomainError("adaptive Simpson quadrature did not converge");
    // Halving the tolerance forever asks for more than double precision can
    // deliver on deep subintervals.
    const double sub = std::max(0.5 * tol, 1e-16);
    return adaptive_simpson(f, a, m, fa, flm, fm, left, sub, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, sub, depth - 1);
}

} // namespace detail

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance `tol`.
inline double integrate_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-10) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return detail::adaptive_simpson(f, a, b, fa, fm, fb, detail::simpson(fa, fm, fb, a, b), tol, 50);
}

/// U(r) = -int_r^1 sign(Z)|Z|^(1/(p-1)) dt, with 1/(p-1) = 1 - beta.
/// Defined for 0 <= beta < 1 (beta = 0 is the linear Poisson case).
inline double exact_potential(double r, double beta, double c1, double c2) {
    if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("exact_potential requires 0 <= beta < 1");
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("exact_potential requires r in (0, 1]");
    const double e = 1.0 - beta;
    auto integrand = [&](double t) {
        const double z = exact_Z(t, c1, c2);
        return z == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(z), e), z);
    };
    // Split at the kinks of F so each piece is smooth. On the outer piece
    // |Z|^e has an infinite slope at r = 1 when Z(1) = 0; t = 1 - s^2
    // tames it.
    double total = 0.0;
    double lo = r;
    for (double brk : {1.0 / 3.0, 2.0 / 3.0}) {
        if (brk <= lo) continue;
        total += integrate_simpson(integrand, lo, brk, 1e-11);
        lo = brk;
    }
    if (lo < 1.0) {
        total += integrate_simpson([&](double s) { return 2.0 * s * integrand(1.0 - s * s); }, 0.0,
                                   std::sqrt(1.0 - lo), 1e-11);
    }
    return -total;
}

/// Relative L2 error of a P0 conductivity against the exact density sampled
/// at coarse centroids.
inline double err_metric(std::span<const double> mu, const ExactRadial& exact, const Triangulation& coarse) {
    double num = 0.0, den = 0.0;
    for (Index t = 0; t < mu.size(); ++t) {
        const double a = coarse.area(t);
        const double ref = exact.mu(norm(coarse.centroid(t)));
        num += a * (mu[t] - ref) * (mu[t] - ref);
        den += a * ref * ref;
    }
    return std::sqrt(num / den);
}

/// Reference optimal value int |Z|^(2-beta)/(2-beta) by centroid quadrature.
inline double optimal_lyapunov_value(const ExactRadial& exact, const Triangulation& coarse) {
    const double q = 2.0 - exact.beta;
    double s = 0.0;
    for (Index t = 0; t < coarse.num_triangles(); ++t) {
        s += coarse.area(t) * std::pow(std::abs(exact.Z(norm(coarse.centroid(t)))), q) / q;
    }
    return s;
}

/// max over supported triangles of |mu - g^(b/(1-b))| / max(mu, g^(b/(1-b))).
inline double steady_residual(std::span<const double> mu, std::span<const double> g, double beta,
                              double support_threshold) {
    if (beta == 1.0) throw DomainError("steady residual is undefined for beta = 1");
    const double e = beta / (1.0 - beta);
    double worst = 0.0;
    bool any = false;
    for (Index t = 0; t < mu.size(); ++t) {
        if (!(mu[t] > support_threshold)) continue;
        any = true;
        const double target = std::pow(g[t], e);
        worst = std::max(worst, std::abs(mu[t] - target) / std::max(mu[t], target));
    }
    if (!any) throw DomainError("steady residual: empty support");
    return worst;
}

inline double steady_residual(const StiffnessAssembler& as, std::span<const double> mu, std::span<const double> u,
                              double beta, double support_threshold) {
    return steady_residual(mu, as.gradient_norms(u), beta, support_threshold);
}

struct SupportStats {
    double area_fraction = 0;
    Index triangle_count = 0;
};

inline SupportStats support_stats(std::span<const double> mu, const Triangulation& coarse, double threshold = 1e-10) {
    SupportStats s;
    double in = 0.0, total = 0.0;
    for (Index t = 0; t < mu.size(); ++t) {
        const double a = coarse.area(t);
        total += a;
        if (mu[t] > threshold) {
            in += a;
            ++s.triangle_count;
        }
    }
    s.area_fraction = total > 0 ? in / total : 0.0;
    return s;
}

namespace detail {

/// Connected components of a triangle subset under shared-vertex adjacency.
inline std::vector<std::vector<Index>> vertex_components(const Triangulation& mesh, const std::vector<Index>& subset) {
    std::vector<Index> parent(subset.size());
    std::iota(parent.begin(), parent.end(), Index{0});
    std::function<Index(Index)> find = [&](Index i) { return parent[i] == i ? i : parent[i] = find(parent[i]); };
    std::vector<Index> owner(mesh.num_nodes(), static_cast<Index>(-1));
    for (Index k = 0; k < subset.size(); ++k) {
        for (Index v : mesh.triangles()[subset[k]]) {
            if (owner[v] == static_cast<Index>(-1)) {
                owner[v] = k;
            } else {
                parent[find(k)] = find(owner[v]);
            }
        }
    }
    std::vector<std::vector<Index>> groups;
    std::vector<Index> slot(subset.size(), static_cast<Index>(-1));
    for (Index k = 0; k < subset.size(); ++k) {
        const Index r = find(k);
        if (slot[r] == static_cast<Index>(-1)) {
            slot[r] = groups.size();
            groups.emplace_back();
        }
        groups[slot[r]].push_back(subset[k]);
    }
    return groups;
}

} // namespace detail

/// Connected components (shared-vertex adjacency) of {mu > threshold}.
inline std::vector<std::vector<Index>> support_components(std::span<const double> mu, const Triangulation& coarse,
                                                          double threshold = 1e-10) {
    std::vector<Index> subset;
    for (Index t = 0; t < mu.size(); ++t) {
        if (mu[t] > threshold) subset.push_back(t);
    }
    return detail::vertex_components(coarse, subset);
}

// ---------------------------------------------------------------------------
// Y-shaped reference graph: source (0.5, 0.1), sinks (0.4, 0.9) and
// (0.6, 0.9) carrying half the mass each, branch point (0.5, c).

inline double gilbert_cost(double c, double q) {
    return std::pow(1.0, q) * (c - 0.1) + 2.0 * std::pow(0.5, q) * std::hypot(0.1, 0.9 - c);
}

/// Branch height c(q) minimizing the Gilbert cost, by golden-section search.
inline double gilbert_branch_point(double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("gilbert_branch_point requires q in [0, 1]");
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.1, b = 0.9;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = gilbert_cost(x1, q), f2 = gilbert_cost(x2, q);
    while (b - a > 1e-9) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = gilbert_cost(x1, q);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = gilbert_cost(x2, q);
        }
    }
    const double c = 0.5 * (a + b);
    // Endpoint minima are returned exactly.
    if (gilbert_cost(0.1, q) <= gilbert_cost(c, q)) return 0.1;
    if (gilbert_cost(0.9, q) <= gilbert_cost(c, q)) return 0.9;
    return c;
}

inline double distance_to_segment(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = dot(ab, ab);
    const double s = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    return norm(p - (a + s * ab));
}

/// Distance from p to the Y graph with branch point (0.5, c).
inline double distance_to_y_graph(Point p, double c) {
    const Point src{0.5, 0.1}, br{0.5, c}, s1{0.4, 0.9}, s2{0.6, 0.9};
    return std::min({distance_to_segment(p, src, br), distance_to_segment(p, br, s1), distance_to_segment(p, br, s2)});
}

struct BranchPointOptions {
    double threshold = 1e-10;
    /// Strip height and minimum lateral separation, in units of h.
    double strip_height = 2.0;
    double separation = 4.0;
    /// Clusters carrying less than this share of the strip's heaviest
    /// cluster (by integral of mu) are ignored: decaying remnants of
    /// abandoned paths sit above the threshold long after they stopped
    /// carrying flux.
    double min_mass_fraction = 1e-3;
    double y_start = 0.15;
    double y_stop = 0.88;
};

/// Sweeps horizontal strips upward and returns the center of the first
/// strip whose support splits into two or more clusters laterally apart by
/// more than `separation * h`; nullopt when no split occurs below `y_stop`.
inline std::optional<Point> extract_branch_point(std::span<const double> mu, const Triangulation& coarse,
                                                 const BranchPointOptions& opt = {}) {
    const double h = coarse.mesh_size();
    const double height = opt.strip_height * h;
    const double step = 0.25 * h;
    std::vector<Point> centroid(coarse.num_triangles());
    for (Index t = 0; t < coarse.num_triangles(); ++t) centroid[t] = coarse.centroid(t);

    struct Cluster {
        double area = 0, ax = 0, mass = 0;
    };
    for (double y0 = opt.y_start; y0 + 0.5 * height <= opt.y_stop; y0 += step) {
        std::vector<Index> strip;
        for (Index t = 0; t < mu.size(); ++t) {
            if (mu[t] > opt.threshold && centroid[t].y >= y0 && centroid[t].y < y0 + height) strip.push_back(t);
        }
        if (strip.size() < 2) continue;
        const auto groups = detail::vertex_components(coarse, strip);
        if (groups.size() < 2) continue;
        std::vector<Cluster> cl;
        double heaviest = 0.0;
        for (const auto& g : groups) {
            Cluster c;
            for (Index t : g) {
                const double at = coarse.area(t);
                c.area += at;
                c.ax += at * centroid[t].x;
                c.mass += at * mu[t];
            }
            heaviest = std::max(heaviest, c.mass);
            cl.push_back(c);
        }
        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, xsum = 0.0, wsum = 0.0;
        std::size_t kept = 0;
        for (const auto& c : cl) {
            if (c.mass < opt.min_mass_fraction * heaviest) continue;
            ++kept;
            xmin = std::min(xmin, c.ax / c.area);
            xmax = std::max(xmax, c.ax / c.area);
            xsum += c.ax;
            wsum += c.area;
        }
        if (kept >= 2 && xmax - xmin > opt.separation * h) return Point{xsum / wsum, y0 + 0.5 * height};
    }
    return std::nullopt;
}

} // namespace dmk
