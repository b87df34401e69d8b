#pragma once

// Scenario orchestration: mesh and forcing construction from a config, the
// per-level run loop over nested refinements, and all file output.

#include "dmk/config.hpp"
#include "dmk/diagnostics.hpp"
#include "dmk/dynamics.hpp"
#include "dmk/forcing.hpp"
#include "dmk/io.hpp"
#include "dmk/mesh.hpp"
#include "dmk/mesh_io.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace dmk {

inline Triangulation build_coarse_mesh(const ScenarioConfig& c) {
    switch (c.mesh.source) {
    case MeshSource::disk_polar: return gen_disk_polar(c.mesh.rings, c.mesh.sectors);
    case MeshSource::unit_square: return gen_unit_square(c.mesh.n);
    case MeshSource::file: return read_triangle_format(c.mesh.node_file, c.mesh.ele_file);
    }
    throw ConfigError("unknown mesh source");
}

inline ForcingSpec build_forcing(const ScenarioConfig& c) {
    switch (c.scenario) {
    case Scenario::radial: return RadialPiecewise{c.forcing.c1, c.forcing.c2.value_or(-c.forcing.c1 / 5.0)};
    case Scenario::tc1: return make_tc1_boxes(c.forcing.value);
    case Scenario::tc2: return make_tc2_sources(c.forcing.seed, c.forcing.count);
    case Scenario::tc3: return make_tc3_diracs();
    case Scenario::custom:
        if (!c.forcing.boxes.empty()) return Boxes{c.forcing.boxes};
        return DiracSet{c.forcing.diracs};
    }
    throw ConfigError("unknown scenario");
}

/// Exact radial solution for the scenario, when one is known.
inline std::optional<ExactRadial> scenario_exact(const ScenarioConfig& c) {
    if (c.scenario != Scenario::radial || !(c.sim.beta > 0.0 && c.sim.beta <= 1.0)) return std::nullopt;
    const double c2 = c.forcing.c2.value_or(-c.forcing.c1 / 5.0);
    // The closed form assumes the balanced annulus value.
    if (std::abs(c2 + c.forcing.c1 / 5.0) > 1e-14 * std::abs(c.forcing.c1)) return std::nullopt;
    return ExactRadial::balanced(c.forcing.c1, c.sim.beta);
}

struct LevelResult {
    std::size_t level = 0;
    double h = 0;
    Index coarse_triangles = 0;
    Index fine_nodes = 0;
    bool ok = false;
    std::string error;
    bool converged = false;
    std::size_t steps = 0;
    double time = 0;
    double var = std::numeric_limits<double>::quiet_NaN();
    double lyapunov = std::numeric_limits<double>::quiet_NaN();
    double energy = std::numeric_limits<double>::quiet_NaN();
    double mass_term = std::numeric_limits<double>::quiet_NaN();
    double err = std::numeric_limits<double>::quiet_NaN();
    double optimal_lyapunov = std::numeric_limits<double>::quiet_NaN();
    double steady_residual = std::numeric_limits<double>::quiet_NaN();
    double support_fraction = std::numeric_limits<double>::quiet_NaN();
    std::size_t support_components = 0;
    std::optional<Point> branch_point;
    /// Largest distance of supported triangles from the y_tube reference graph.
    double tube_distance = std::numeric_limits<double>::quiet_NaN();
    /// tc1: some support component touches both rectangles.
    std::optional<bool> boxes_linked;
    double wall_seconds = 0;
};

struct ScenarioResult {
    ScenarioConfig config;
    std::vector<LevelResult> levels;
    /// Least-squares slope of log err against log h over successful levels.
    double rate = std::numeric_limits<double>::quiet_NaN();
};

/// Slope of the least-squares line through (log x, log y).
inline double least_squares_rate(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// Does one support component contain centroids inside both boxes?
inline bool support_links_boxes(std::span<const double> mu, const Triangulation& coarse, const Box& a, const Box& b,
                                double threshold = 1e-10) {
    for (const auto& comp : support_components(mu, coarse, threshold)) {
        bool in_a = false, in_b = false;
        for (Index t : comp) {
            const Point c = coarse.centroid(t);
            in_a = in_a || a.contains(c);
            in_b = in_b || b.contains(c);
        }
        if (in_a && in_b) return true;
    }
    return false;
}

/// Largest distance from a supported centroid to the Y graph with branch c.
inline double support_distance_to_y_graph(std::span<const double> mu, const Triangulation& coarse, double c,
                                          double threshold) {
    double worst = 0.0;
    for (Index t = 0; t < mu.size(); ++t) {
        if (mu[t] > threshold) worst = std::max(worst, distance_to_y_graph(coarse.centroid(t), c));
    }
    return worst;
}

struct LevelRun {
    LevelResult summary;
    RunResult run;
};

/// Runs one refinement level. Library errors are caught and recorded in the
/// summary; the partial trajectory is kept.
inline LevelRun run_level(const ScenarioConfig& c, const RefinedPair& pair, std::size_t level,
                          const std::function<void(const SimState&)>& on_step = {}) {
    LevelRun out;
    auto& s = out.summary;
    s.level = level;
    s.h = pair.coarse.mesh_size();
    s.coarse_triangles = pair.coarse.num_triangles();
    s.fine_nodes = pair.fine.num_nodes();
    const auto start = std::chrono::steady_clock::now();

    SimConfig sim_cfg = c.sim;
    sim_cfg.exact = scenario_exact(c);
    std::optional<SimState> last;
    try {
        const int quadrature = c.scenario == Scenario::radial || c.scenario == Scenario::custom ? c.forcing.quadrature : 1;
        Simulator sim(pair, assemble_rhs(build_forcing(c), pair, quadrature), sim_cfg);
        out.run = run_to_steady(sim, sim.initial_state(), [&](const SimState& st) {
            if (!last) last.emplace();
            *last = st;
            if (on_step) on_step(st);
        });
        const auto& st = out.run.state;
        const auto& rec = out.run.records.back();
        s.ok = true;
        s.converged = st.converged;
        s.steps = st.step;
        s.time = st.time;
        s.var = st.last_var;
        s.lyapunov = rec.lyapunov;
        s.energy = rec.energy;
        s.mass_term = rec.mass_term;
        s.err = rec.err;
        s.support_fraction = support_stats(st.mu, pair.coarse, c.support_threshold).area_fraction;
        s.support_components = support_components(st.mu, pair.coarse, c.support_threshold).size();
        if (sim_cfg.exact) s.optimal_lyapunov = optimal_lyapunov_value(*sim_cfg.exact, pair.coarse);
        if (c.sim.beta != 1.0) {
            try {
                s.steady_residual = steady_residual(sim.assembler(), st.mu, st.u, c.sim.beta, c.support_threshold);
            } catch (const DomainError&) {
            }
        }
        if (c.scenario == Scenario::tc3) {
            s.branch_point = extract_branch_point(st.mu, pair.coarse, c.branch);
            if (const auto* y = std::get_if<ic::YTube>(&c.sim.initial)) {
                s.tube_distance =
                    support_distance_to_y_graph(st.mu, pair.coarse, gilbert_branch_point(y->q), c.branch.threshold);
            }
        }
        if (c.scenario == Scenario::tc1) {
            const auto forcing = build_forcing(c);
            const auto& boxes = std::get<Boxes>(forcing).boxes;
            s.boxes_linked = support_links_boxes(st.mu, pair.coarse, boxes[0], boxes[1], c.support_threshold);
        }
    } catch (const Error& e) {
        s.ok = false;
        s.error = e.what();
        if (last) {
            s.steps = last->step;
            s.time = last->time;
        }
    }
    s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

namespace detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace detail

inline void write_summary(std::ostream& o, const ScenarioResult& r) {
    const auto& c = r.config;
    o << "scenario " << to_string(c.scenario) << "  beta " << detail::num(c.sim.beta) << "  ic "
      << ic_name(c.sim.initial) << '\n';
    if (c.scenario == Scenario::tc2) o << "tc2 seed " << c.forcing.seed << '\n';
    if (c.scenario == Scenario::tc3) {
        o << "branch extractor: threshold " << detail::num(c.branch.threshold) << ", strip height "
          << detail::num(c.branch.strip_height) << " h, separation " << detail::num(c.branch.separation)
          << " h, min cluster mass fraction " << detail::num(c.branch.min_mass_fraction) << '\n';
    }
    o << '\n';
    o << std::left << std::setw(6) << "level" << std::setw(10) << "h" << std::setw(9) << "tris" << std::setw(6)
      << "ok" << std::setw(6) << "conv" << std::setw(8) << "steps" << std::setw(18) << "lyapunov" << std::setw(14)
      << "err" << std::setw(12) << "support" << std::setw(10) << "branch_y" << std::setw(10) << "wall_s" << '\n';
    for (const auto& l : r.levels) {
        o << std::left << std::setw(6) << l.level << std::setw(10) << detail::num(l.h).substr(0, 8) << std::setw(9)
          << l.coarse_triangles << std::setw(6) << (l.ok ? "yes" : "no") << std::setw(6)
          << (l.converged ? "yes" : "no") << std::setw(8) << l.steps << std::setw(18) << detail::num(l.lyapunov)
          << std::setw(14) << detail::num(l.err) << std::setw(12) << detail::num(l.support_fraction)
          << std::setw(10) << (l.branch_point ? detail::num(l.branch_point->y) : std::string("none"))
          << std::setw(10) << detail::num(l.wall_seconds) << '\n';
    }
    o << "\nrate " << detail::num(r.rate) << '\n';
    for (const auto& l : r.levels) {
        o << "\n[level " << l.level << "]\n";
        if (!l.ok) o << "error = " << l.error << '\n';
        o << "converged = " << (l.converged ? "true" : "false") << "\nsteps = " << l.steps
          << "\ntime = " << detail::num(l.time) << "\nvar = " << detail::num(l.var)
          << "\nlyapunov = " << format_double(l.lyapunov) << "\nenergy = " << format_double(l.energy)
          << "\nmass_term = " << format_double(l.mass_term) << "\nerr = " << detail::num(l.err)
          << "\noptimal_lyapunov = " << detail::num(l.optimal_lyapunov)
          << "\nsteady_residual = " << detail::num(l.steady_residual)
          << "\nsupport_fraction = " << detail::num(l.support_fraction)
          << "\nsupport_components = " << l.support_components << '\n';
        if (l.branch_point) o << "branch_point = " << detail::num(l.branch_point->x) << ' ' << detail::num(l.branch_point->y) << '\n';
        if (!std::isnan(l.tube_distance)) o << "tube_distance_over_h = " << detail::num(l.tube_distance / l.h) << '\n';
        if (l.boxes_linked) o << "boxes_linked = " << (*l.boxes_linked ? "true" : "false") << '\n';
        o << "wall_seconds = " << detail::num(l.wall_seconds) << '\n';
    }
    o << "\n# resolved configuration\n" << format_config(c);
}

struct RunOptions {
    bool write_files = true;
    /// Progress messages; may be null.
    std::ostream* log = nullptr;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + p.string() + "' failed");
}

/// Runs every refinement level of a scenario. Levels are nested: level k+1
/// uses the fine mesh of level k as its coarse mesh.
inline ScenarioResult run_scenario(const ScenarioConfig& c, const RunOptions& opt = {}) {
    namespace fs = std::filesystem;
    ScenarioResult result;
    result.config = c;
    const fs::path root = c.output;
    if (opt.write_files) {
        fs::create_directories(root);
        write_text(root / "config.ini", format_config(c));
    }

    Triangulation mesh = build_coarse_mesh(c);
    std::vector<double> hs, errs;
    for (std::size_t level = 0; level < c.levels; ++level) {
        RefinedPair pair = refine_uniform(mesh);
        if (opt.log) {
            *opt.log << "[" << to_string(c.scenario) << " beta " << detail::num(c.sim.beta) << "] level " << level
                     << ": " << pair.coarse.num_triangles() << " coarse triangles, " << pair.fine.num_nodes()
                     << " fine nodes" << std::endl;
        }
        LevelRun lr = run_level(c, pair, level);
        if (opt.log) {
            *opt.log << "  " << (lr.summary.ok ? "done" : "FAILED: " + lr.summary.error) << " steps "
                     << lr.summary.steps << " converged " << (lr.summary.converged ? "yes" : "no") << " L "
                     << detail::num(lr.summary.lyapunov) << " err " << detail::num(lr.summary.err) << " ("
                     << detail::num(lr.summary.wall_seconds) << " s)" << std::endl;
        }
        if (opt.write_files) {
            const fs::path dir = root / ("level_" + std::to_string(level));
            fs::create_directories(dir);
            write_text(dir / "config.ini", format_config(c));
            write_csv(dir / "diagnostics.csv", lr.run.records);
            write_triangle_format(pair.coarse, (dir / "coarse.node").string(), (dir / "coarse.ele").string());
            write_triangle_format(pair.fine, (dir / "fine.node").string(), (dir / "fine.ele").string());
            if (lr.summary.ok) {
                write_vtk_cell_field(dir / "mu_final.vtk", pair.coarse, "mu", lr.run.state.mu);
                write_vtk_point_field(dir / "u_final.vtk", pair.fine, "u", lr.run.state.u);
            }
        }
        if (lr.summary.ok && !std::isnan(lr.summary.err) && lr.summary.err > 0) {
            hs.push_back(lr.summary.h);
            errs.push_back(lr.summary.err);
        }
        result.levels.push_back(std::move(lr.summary));
        mesh = std::move(pair.fine);
    }
    result.rate = least_squares_rate(hs, errs);
    if (opt.write_files) {
        std::ostringstream s;
        write_summary(s, result);
        write_text(root / "summary.txt", s.str());
    }
    return result;
}

} // namespace dmk
