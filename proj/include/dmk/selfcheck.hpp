#pragma once

// Fast invariant battery behind `dmk check`. Each check is small enough to
// finish in well under a second; the long convergence studies live in the
// acceptance binary.

#include "dmk/assembly.hpp"
#include "dmk/diagnostics.hpp"
#include "dmk/dynamics.hpp"
#include "dmk/forcing.hpp"
#include "dmk/io.hpp"
#include "dmk/mesh.hpp"
#include "dmk/solver.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace dmk {

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string detail;
};

namespace detail {

/// Dense Gaussian elimination with partial pivoting for the Neumann system,
/// made regular by replacing the last equation with sum(x) = 0.
inline std::vector<double> dense_neumann_solve(const SparseSymMatrix& a, std::span<const double> b) {
    const Index n = a.dimension();
    std::vector<double> m(n * (n + 1), 0.0);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) m[i * (n + 1) + j] = a(i, j);
        m[i * (n + 1) + n] = b[i];
    }
    for (Index j = 0; j <= n; ++j) m[(n - 1) * (n + 1) + j] = j < n ? 1.0 : 0.0;
    for (Index k = 0; k < n; ++k) {
        Index piv = k;
        for (Index i = k + 1; i < n; ++i) {
            if (std::abs(m[i * (n + 1) + k]) > std::abs(m[piv * (n + 1) + k])) piv = i;
        }
        if (m[piv * (n + 1) + k] == 0.0) throw DomainError("singular dense system");
        if (piv != k) {
            for (Index j = 0; j <= n; ++j) std::swap(m[k * (n + 1) + j], m[piv * (n + 1) + j]);
        }
        for (Index i = k + 1; i < n; ++i) {
            const double f = m[i * (n + 1) + k] / m[k * (n + 1) + k];
            if (f == 0.0) continue;
            for (Index j = k; j <= n; ++j) m[i * (n + 1) + j] -= f * m[k * (n + 1) + j];
        }
    }
    std::vector<double> x(n);
    for (Index i = n; i-- > 0;) {
        double s = m[i * (n + 1) + n];
        for (Index j = i + 1; j < n; ++j) s -= m[i * (n + 1) + j] * x[j];
        x[i] = s / m[i * (n + 1) + i];
    }
    return x;
}

inline std::string fmt(double v) {
    std::ostringstream o;
    o.precision(3);
    o << std::scientific << v;
    return o.str();
}

} // namespace detail

inline std::vector<CheckResult> run_self_checks() {
    std::vector<CheckResult> out;
    auto check = [&](std::string name, const std::function<CheckResult()>& f) {
        try {
            auto r = f();
            r.name = std::move(name);
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            out.push_back({std::move(name), false, std::string("threw: ") + e.what()});
        }
    };

    const auto disk = refine_uniform(gen_disk_polar(6, 24));
    const auto square = refine_uniform(gen_unit_square(8));

    check("refinement conserves area and Euler characteristic", [&]() -> CheckResult {
        double worst = 0.0;
        for (Index c = 0; c < disk.coarse.num_triangles(); ++c) {
            double s = 0.0;
            for (int i = 0; i < 4; ++i) s += disk.fine.area(disk.child(c, i));
            worst = std::max(worst, std::abs(s - disk.coarse.area(c)) / disk.coarse.area(c));
        }
        auto chi = [](const Triangulation& m) {
            return static_cast<long long>(m.num_nodes()) - static_cast<long long>(m.num_edges()) +
                   static_cast<long long>(m.num_triangles());
        };
        const bool ok = worst < 1e-12 && chi(disk.coarse) == chi(disk.fine) &&
                        disk.fine.num_nodes() == disk.coarse.num_nodes() + disk.coarse.num_edges();
        return {"", ok, "max relative area defect " + detail::fmt(worst)};
    });

    check("P1 basis gradients sum to zero", [&]() -> CheckResult {
        double worst = 0.0;
        for (Index t = 0; t < disk.fine.num_triangles(); ++t) {
            const auto g = element_geometry(disk.fine, t);
            const Point s = g.basis_gradients[0] + g.basis_gradients[1] + g.basis_gradients[2];
            const double scale = std::max({norm(g.basis_gradients[0]), norm(g.basis_gradients[1]), norm(g.basis_gradients[2])});
            worst = std::max(worst, norm(s) / scale);
        }
        return {"", worst < 1e-13, "max |sum| / max |gradient| = " + detail::fmt(worst)};
    });

    check("stiffness: symmetric, zero row sums, energy identity", [&]() -> CheckResult {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> uni(0.01, 5.0);
        FieldP0 mu(disk.coarse.num_triangles());
        for (double& m : mu) m = uni(rng);
        StiffnessAssembler as(disk);
        const auto a = as.assemble(mu);
        std::vector<double> u(disk.fine.num_nodes());
        for (double& v : u) v = uni(rng);
        const double e1 = 0.5 * a.quadratic_form(u), e2 = as.dirichlet_energy(mu, u);
        const double rel = std::abs(e1 - e2) / std::abs(e1);
        const double rows = a.max_relative_row_sum();
        return {"", a.is_symmetric() && rows < 1e-12 && rel < 1e-12,
                "row sums " + detail::fmt(rows) + ", energy mismatch " + detail::fmt(rel)};
    });

    check("PCG matches dense elimination (unit square n=8)", [&]() -> CheckResult {
        const auto a = assemble_stiffness(square, FieldP0(square.coarse.num_triangles(), 1.0));
        const auto b = assemble_rhs(make_tc1_boxes(), square);
        PcgOptions opt;
        opt.tol = 1e-13;
        const auto x = pcg_solve(a, b.values, {}, opt).x;
        auto y = detail::dense_neumann_solve(a, b.values);
        linalg::remove_mean(y);
        double diff = 0.0;
        for (Index i = 0; i < x.size(); ++i) diff = std::max(diff, std::abs(x[i] - y[i]));
        return {"", diff < 1e-10, "max nodal difference " + detail::fmt(diff)};
    });

    check("load vectors are orthogonal to constants", [&]() -> CheckResult {
        double worst = 0.0;
        auto probe = [&](const ForcingSpec& f, const RefinedPair& p) {
            const auto b = assemble_rhs(f, p);
            double s = 0.0, sa = 0.0;
            for (double v : b.values) {
                s += v;
                sa += std::abs(v);
            }
            worst = std::max(worst, std::abs(s) / sa);
        };
        probe(make_tc1_boxes(), square);
        probe(make_tc2_sources(1), square);
        probe(make_tc3_diracs(), square);
        probe(RadialPiecewise{}, disk);
        return {"", worst <= 1e-14, "max |sum b| / sum |b| = " + detail::fmt(worst)};
    });

    check("Gilbert branch point endpoints", [&]() -> CheckResult {
        const double c0 = gilbert_branch_point(0.0), c1 = gilbert_branch_point(1.0);
        const bool ok = std::abs(c0 - (0.9 - 0.1 / std::sqrt(3.0))) < 1e-6 && std::abs(c1 - 0.1) < 1e-6;
        return {"", ok, "c(0) = " + std::to_string(c0) + ", c(1) = " + std::to_string(c1)};
    });

    check("exact radial solution boundary values", [&]() -> CheckResult {
        const double z1 = exact_Z(1.0, 1.0, -0.2), u1 = exact_potential(1.0, 0.5, 1.0, -0.2);
        const double z3 = exact_Z(1.0 / 3.0, 1.0, -0.2);
        const bool ok = std::abs(z1) < 1e-15 && u1 == 0.0 && std::abs(z3 + 1.0 / 6.0) < 1e-15;
        return {"", ok, "Z(1) = " + detail::fmt(z1) + ", U(1) = " + detail::fmt(u1)};
    });

    check("Lie derivative is nonpositive", [&]() -> CheckResult {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> uni(0.0, 3.0);
        double worst = -std::numeric_limits<double>::infinity();
        for (double beta : {0.3, 1.0, 1.7, 2.0, 3.0}) {
            for (int k = 0; k < 20; ++k) {
                std::vector<double> mu(32), g(32), area(32, 1.0 / 32);
                for (auto& m : mu) m = 1e-3 + uni(rng);
                for (auto& v : g) v = uni(rng);
                worst = std::max(worst, lie_derivative_rhs(mu, g, beta, area));
            }
        }
        return {"", worst <= 0.0, "largest value " + detail::fmt(worst)};
    });

    check("Lyapunov identity and monotone decrease (beta 0.5, 150 steps)", [&]() -> CheckResult {
        SimConfig cfg;
        cfg.beta = 0.5;
        cfg.max_steps = 150;
        cfg.initial = ic::RadialDip{};
        Simulator sim(disk, assemble_rhs(RadialPiecewise{}, disk), cfg);
        const auto run = run_to_steady(sim, sim.initial_state());
        double ident = 0.0, rise = -1.0;
        for (std::size_t k = 0; k < run.records.size(); ++k) {
            const auto& r = run.records[k];
            ident = std::max(ident, std::abs(r.lyapunov - r.energy - r.mass_term) / std::abs(r.lyapunov));
            if (k > 0) {
                const double prev = run.records[k - 1].lyapunov;
                rise = std::max(rise, (r.lyapunov - prev) / std::abs(prev));
            }
        }
        return {"", ident <= 1e-12 && rise <= 1e-10,
                "identity " + detail::fmt(ident) + ", largest relative increase " + detail::fmt(rise)};
    });

    check("VTK cell data round trip", [&]() -> CheckResult {
        const auto dir = std::filesystem::temp_directory_path() / "dmk_selfcheck";
        std::filesystem::create_directories(dir);
        std::vector<double> v(disk.coarse.num_triangles());
        for (Index i = 0; i < v.size(); ++i) v[i] = std::sqrt(2.0) * static_cast<double>(i + 1) / 3.0;
        write_vtk_cell_field(dir / "mu.vtk", disk.coarse, "mu", v);
        const auto back = read_vtk_scalars(dir / "mu.vtk", "mu");
        std::filesystem::remove_all(dir);
        return {"", back == v, std::to_string(back.size()) + " values"};
    });

    return out;
}

} // namespace dmk
