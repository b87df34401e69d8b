#pragma once

// Forward-Euler time stepping of the conductivity ODE coupled to the
// elliptic solve, with an adaptive step bounded by the relative change of
// mu, optional clamping at a floor, and a relative-variation stopping test.

#include "dmk/assembly.hpp"
#include "dmk/diagnostics.hpp"
#include "dmk/errors.hpp"
#include "dmk/forcing.hpp"
#include "dmk/mesh.hpp"
#include "dmk/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dmk {

// ---------------------------------------------------------------------------
// Initial conditions

namespace ic {

struct Uniform {
    double value = 1.0;
};

/// 0.01 + 0.99 * min(1, 2 |x - (0.5, 0.5)|): minimum 0.01 at the center.
struct RadialDip {};

/// 0.505 + 0.495 * sign(sin(2 pi n x) sin(2 pi n y)).
struct Checkerboard {
    int n = 4;
};

/// 1 within distance rho of the Y graph with branch point c(q), lo elsewhere.
struct YTube {
    double q = 0.0;
    double rho = 0.02;
    double lo = 1e-3;
};

} // namespace ic

using InitialCondition = std::variant<ic::Uniform, ic::RadialDip, ic::Checkerboard, ic::YTube>;

inline std::string_view ic_name(const InitialCondition& c) {
    return std::visit(
        [](const auto& v) -> std::string_view {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, ic::Uniform>) return "uniform1";
            if constexpr (std::is_same_v<V, ic::RadialDip>) return "radial_dip";
            if constexpr (std::is_same_v<V, ic::Checkerboard>) return "checkerboard";
            return "y_tube";
        },
        c);
}

/// Pointwise value of an initial condition.
inline std::function<double(Point)> ic_function(const InitialCondition& c) {
    return std::visit(
        [](const auto& v) -> std::function<double(Point)> {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, ic::Uniform>) {
                return [val = v.value](Point) { return val; };
            } else if constexpr (std::is_same_v<V, ic::RadialDip>) {
                return [](Point p) { return 0.01 + 0.99 * std::min(1.0, 2.0 * norm(p - Point{0.5, 0.5})); };
            } else if constexpr (std::is_same_v<V, ic::Checkerboard>) {
                return [n = v.n](Point p) {
                    const double w = 2.0 * std::numbers::pi * n;
                    const double s = std::sin(w * p.x) * std::sin(w * p.y);
                    return 0.505 + 0.495 * static_cast<double>((s > 0) - (s < 0));
                };
            } else {
                const double c = gilbert_branch_point(v.q);
                return [c, rho = v.rho, lo = v.lo](Point p) { return distance_to_y_graph(p, c) <= rho ? 1.0 : lo; };
            }
        },
        c);
}

/// L2 projection onto P0: the triangle average, computed with 64 sub-triangle
/// centroids per element (exact for constants, resolves thin tubes).
inline FieldP0 project_initial_condition(const InitialCondition& c, const Triangulation& coarse) {
    const auto f = ic_function(c);
    if (std::holds_alternative<ic::Uniform>(c)) return FieldP0(coarse.num_triangles(), std::get<ic::Uniform>(c).value);
    constexpr int levels = 8;
    FieldP0 mu(coarse.num_triangles());
    for (Index t = 0; t < coarse.num_triangles(); ++t) {
        const Point a = coarse.vertex(t, 0), e1 = coarse.vertex(t, 1) - a, e2 = coarse.vertex(t, 2) - a;
        double sum = 0.0;
        int count = 0;
        for (int i = 0; i < levels; ++i) {
            for (int j = 0; i + j < levels; ++j) {
                // Upward and downward sub-triangles of the regular split.
                const double s0 = (i + 1.0 / 3.0) / levels, t0 = (j + 1.0 / 3.0) / levels;
                sum += f(a + s0 * e1 + t0 * e2);
                ++count;
                if (i + j + 1 < levels) {
                    const double s1 = (i + 2.0 / 3.0) / levels, t1 = (j + 2.0 / 3.0) / levels;
                    sum += f(a + s1 * e1 + t1 * e2);
                    ++count;
                }
            }
        }
        mu[t] = sum / count;
    }
    return mu;
}

// ---------------------------------------------------------------------------

struct SolverSettings {
    Preconditioner preconditioner = Preconditioner::ic0;
    double tol = 1e-11;
    /// 0 selects 10 * (number of fine nodes).
    std::size_t max_iter = 0;
};

struct SimConfig {
    double beta = 1.0;
    double dt_initial = 0.01;
    double dt_max = 1.0;
    /// Maximum relative change of mu per step.
    double growth_cap = 0.2;
    double tau_t = 5e-7;
    std::size_t max_steps = 20000;
    double mu_floor = 1e-10;
    bool clamp = true;
    /// Use dt_initial for every step, ignoring the adaptive rule.
    bool fixed_dt = false;
    SolverSettings solver;
    InitialCondition initial = ic::Uniform{};
    /// Record every `stride` steps (the last step is always recorded).
    std::size_t stride = 1;
    /// Exact solution used for the err column, when known.
    std::optional<ExactRadial> exact;

    void validate() const {
        if (!(beta > 0.0)) throw ConfigError("dynamics.beta must be > 0");
        if (!(tau_t > 0.0)) throw ConfigError("dynamics.tau_t must be > 0");
        if (!(mu_floor >= 0.0)) throw ConfigError("dynamics.mu_floor must be >= 0");
        if (!(growth_cap > 0.0 && growth_cap <= 1.0)) throw ConfigError("dynamics.growth_cap must be in (0, 1]");
        if (!(dt_initial > 0.0)) throw ConfigError("dynamics.dt_initial must be > 0");
        if (!(dt_max >= dt_initial)) throw ConfigError("dynamics.dt_max must be >= dt_initial");
        if (stride == 0) throw ConfigError("output.stride must be >= 1");
    }
};

struct SimState {
    std::size_t step = 0;
    double time = 0.0;
    FieldP0 mu;
    FieldP1 u;
    /// Step used to reach the current mu; 0 before the first update.
    double dt = 0.0;
    double last_var = std::numeric_limits<double>::quiet_NaN();
    SolveReport last_solve;
    bool converged = false;
};

/// Relative L2 time variation ||mu_new - mu_old|| / (dt ||mu_old||), P0 norms.
inline double var_metric(std::span<const double> mu_new, std::span<const double> mu_old, double dt,
                         std::span<const double> areas) {
    if (!(dt > 0.0)) throw DomainError("var_metric requires dt > 0");
    double num = 0.0, den = 0.0;
    for (Index t = 0; t < mu_new.size(); ++t) {
        const double d = mu_new[t] - mu_old[t];
        num += areas[t] * d * d;
        den += areas[t] * mu_old[t] * mu_old[t];
    }
    if (!(den > 0.0)) throw DomainError("var_metric: zero norm of the previous conductivity");
    return std::sqrt(num) / (dt * std::sqrt(den));
}

inline double var_metric(std::span<const double> mu_new, std::span<const double> mu_old, double dt,
                         const Triangulation& coarse) {
    return var_metric(mu_new, mu_old, dt, coarse.areas());
}

/// Increment of the conductivity ODE: (mu g)^beta - mu.
inline std::vector<double> conductivity_rate(std::span<const double> mu, std::span<const double> g, double beta) {
    std::vector<double> d(mu.size());
    for (Index t = 0; t < mu.size(); ++t) d[t] = std::pow(mu[t] * g[t], beta) - mu[t];
    return d;
}

/// Owns the operators of one refined pair and advances a SimState.
class Simulator {
public:
    Simulator(const RefinedPair& pair, RhsVector rhs, SimConfig cfg)
        : assembler_(pair), rhs_(std::move(rhs)), cfg_(std::move(cfg)) {
        cfg_.validate();
        if (rhs_.values.size() != pair.fine.num_nodes()) throw ConfigError("load vector size mismatch");
        matrix_ = assembler_.assemble(FieldP0(pair.coarse.num_triangles(), 1.0));
    }

    [[nodiscard]] const StiffnessAssembler& assembler() const noexcept { return assembler_; }
    [[nodiscard]] const SimConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const RhsVector& rhs() const noexcept { return rhs_; }
    [[nodiscard]] const RefinedPair& pair() const noexcept { return assembler_.pair(); }

    [[nodiscard]] SimState initial_state() const {
        SimState s;
        s.mu = project_initial_condition(cfg_.initial, pair().coarse);
        s.u.assign(pair().fine.num_nodes(), 0.0);
        for (double m : s.mu) {
            if (!(m > 0.0)) throw ConfigError("initial condition must be strictly positive");
        }
        return s;
    }

    /// Solves A[mu] u = b for the current mu, warm-started from state.u.
    void solve_potential(SimState& s) {
        assembler_.assemble_into(s.mu, matrix_);
        PcgOptions opt;
        opt.tol = cfg_.solver.tol;
        opt.max_iter = cfg_.solver.max_iter;
        opt.preconditioner = cfg_.solver.preconditioner;
        auto res = pcg_solve(matrix_, rhs_.values, s.u, opt);
        s.u = std::move(res.x);
        s.last_solve = res.report;
    }

    /// Time step for the given increment under the adaptive rule.
    [[nodiscard]] double choose_dt(std::span<const double> mu, std::span<const double> rate, double dt_prev) const {
        if (cfg_.fixed_dt) return cfg_.dt_initial;
        double worst = 0.0;
        for (Index t = 0; t < mu.size(); ++t) worst = std::max(worst, std::abs(rate[t]) / mu[t]);
        double dt = dt_prev > 0.0 ? std::min(cfg_.dt_max, 1.2 * dt_prev) : cfg_.dt_initial;
        if (worst > 0.0) dt = std::min(dt, cfg_.growth_cap / worst);
        return dt;
    }

    /// Euler update of mu using the potential already stored in `s`.
    void advance(SimState& s) const {
        const auto g = assembler_.gradient_norms(s.u);
        const auto rate = conductivity_rate(s.mu, g, cfg_.beta);
        const double dt = choose_dt(s.mu, rate, s.dt);
        FieldP0 next(s.mu.size());
        for (Index t = 0; t < next.size(); ++t) {
            next[t] = s.mu[t] + dt * rate[t];
            if (cfg_.clamp) next[t] = std::max(next[t], cfg_.mu_floor);
            if (!(next[t] > 0.0)) {
                throw PositivityError("conductivity became nonpositive on coarse triangle " + std::to_string(t));
            }
        }
        s.last_var = var_metric(next, s.mu, dt, assembler_.coarse_areas());
        s.mu = std::move(next);
        s.dt = dt;
        s.time += dt;
        ++s.step;
    }

    /// One full step: solve for the current mu, then update mu.
    SimState step(SimState s) {
        solve_potential(s);
        advance(s);
        return s;
    }

    /// Metrics of a state whose potential matches its conductivity.
    [[nodiscard]] DiagnosticsRecord record(const SimState& s) const {
        const auto& areas = assembler_.coarse_areas();
        const auto g = assembler_.gradient_norms(s.u);
        const auto l = lyapunov_from_norms(assembler_, s.mu, g, cfg_.beta);
        DiagnosticsRecord r;
        r.step = s.step;
        r.time = s.time;
        r.dt = s.dt;
        r.var = s.last_var;
        r.lyapunov = l.value;
        r.energy = l.energy;
        r.mass_term = l.mass_term;
        r.mu_integral = integral_p0(s.mu, areas);
        if (cfg_.exact) r.err = err_metric(s.mu, *cfg_.exact, pair().coarse);
        r.cg_iterations = s.last_solve.iterations;
        const auto [lo, hi] = std::minmax_element(s.mu.begin(), s.mu.end());
        r.mu_min = *lo;
        r.mu_max = *hi;
        r.support_fraction = support_stats(s.mu, pair().coarse, std::max(cfg_.mu_floor, 1e-10)).area_fraction;
        return r;
    }

private:
    StiffnessAssembler assembler_;
    RhsVector rhs_;
    SimConfig cfg_;
    SparseSymMatrix matrix_;
};

struct RunResult {
    SimState state;
    std::vector<DiagnosticsRecord> records;
};

/// Steps until var <= tau_t or max_steps. The returned state always holds a
/// potential consistent with its conductivity; `converged` is false when the
/// step budget ran out.
inline RunResult run_to_steady(Simulator& sim, SimState state,
                               const std::function<void(const SimState&)>& on_step = {}) {
    const auto& cfg = sim.config();
    RunResult out;
    sim.solve_potential(state);
    out.records.push_back(sim.record(state));
    if (on_step) on_step(state);
    while (state.step < cfg.max_steps) {
        sim.advance(state);
        sim.solve_potential(state);
        state.converged = state.last_var <= cfg.tau_t;
        if (on_step) on_step(state);
        if (state.converged || state.step % cfg.stride == 0 || state.step == cfg.max_steps) {
            out.records.push_back(sim.record(state));
        }
        if (state.converged) break;
    }
    out.state = std::move(state);
    return out;
}

inline RunResult run_to_steady(const SimConfig& cfg, const RefinedPair& pair, const RhsVector& b) {
    Simulator sim(pair, b, cfg);
    return run_to_steady(sim, sim.initial_state());
}

} // namespace dmk
