#include "dmk/assembly.hpp"
#include "dmk/forcing.hpp"
#include "dmk/solver.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dmk;

namespace {

/// Neumann Laplacian of a path with n nodes (tridiagonal, singular).
SparseSymMatrix path_laplacian(Index n) {
    std::vector<double> d(n * n, 0.0);
    for (Index i = 0; i + 1 < n; ++i) {
        d[i * n + i] += 1.0;
        d[(i + 1) * n + i + 1] += 1.0;
        d[i * n + i + 1] = d[(i + 1) * n + i] = -1.0;
    }
    return SparseSymMatrix::from_dense(n, d);
}

std::vector<double> mean_free(std::vector<double> v) {
    linalg::remove_mean(v);
    return v;
}

double max_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (Index i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

struct SquareProblem {
    RefinedPair pair = refine_uniform(gen_unit_square(8));
    SparseSymMatrix a;
    std::vector<double> b;
    SquareProblem() {
        a = assemble_stiffness(pair, oracle::random_vector(pair.coarse.num_triangles(), 4, 0.1, 3.0));
        b = assemble_rhs(make_tc1_boxes(), pair).values;
    }
};

} // namespace

TEST(Pcg, ScaledIdentityConvergesInOneIteration) {
    std::vector<double> d(36, 0.0);
    for (Index i = 0; i < 6; ++i) d[i * 6 + i] = 2.0;
    const auto a = SparseSymMatrix::from_dense(6, d);
    const auto b = mean_free({1, -2, 3, 0.5, -1, 4});
    for (auto pc : {Preconditioner::jacobi, Preconditioner::ic0, Preconditioner::none}) {
        PcgOptions opt;
        opt.preconditioner = pc;
        const auto res = pcg_solve(a, b, {}, opt);
        EXPECT_EQ(res.report.iterations, 1u) << to_string(pc);
        EXPECT_EQ(res.report.preconditioner, pc);
        for (Index i = 0; i < 6; ++i) EXPECT_NEAR(res.x[i], 0.5 * b[i], 1e-15);
    }
}

TEST(Pcg, ZeroRightHandSideGivesZero) {
    const SquareProblem p;
    const auto res = pcg_solve(p.a, std::vector<double>(p.b.size(), 0.0), oracle::random_vector(p.b.size(), 1));
    EXPECT_EQ(res.report.iterations, 0u);
    for (double v : res.x) EXPECT_EQ(v, 0.0);
}

TEST(Pcg, MatchesDenseOracle) {
    const SquareProblem p;
    const auto want = oracle::neumann_solve(oracle::to_dense(p.a), p.b);
    for (auto pc : {Preconditioner::ic0, Preconditioner::jacobi, Preconditioner::none}) {
        PcgOptions opt;
        opt.tol = 1e-13;
        opt.preconditioner = pc;
        const auto res = pcg_solve(p.a, p.b, {}, opt);
        EXPECT_EQ(res.report.preconditioner, pc);
        EXPECT_LT(max_diff(res.x, want), 1e-10) << to_string(pc);
        EXPECT_NEAR(linalg::mean(res.x), 0.0, 1e-14);
    }
}

TEST(Pcg, ResidualMeetsTolerance) {
    const SquareProblem p;
    const auto res = pcg_solve(p.a, p.b, {});
    std::vector<double> ax(p.b.size());
    p.a.multiply(res.x, ax);
    for (Index i = 0; i < ax.size(); ++i) ax[i] -= p.b[i];
    EXPECT_LE(linalg::norm2(ax), 1e-11 * linalg::norm2(p.b));
    EXPECT_LE(res.report.final_relative_residual, 1e-11);
}

TEST(Pcg, Ic0IsNearlyExactOnTridiagonal) {
    const auto a = path_laplacian(40);
    const auto b = mean_free(oracle::random_vector(40, 8));
    const auto res = pcg_solve(a, b, {});
    EXPECT_EQ(res.report.preconditioner, Preconditioner::ic0);
    EXPECT_LE(res.report.iterations, 2u);
    EXPECT_LT(max_diff(res.x, oracle::neumann_solve(oracle::to_dense(a), b)), 1e-10);
}

TEST(Pcg, Ic0BeatsJacobi) {
    const SquareProblem p;
    PcgOptions jac;
    jac.preconditioner = Preconditioner::jacobi;
    EXPECT_LT(pcg_solve(p.a, p.b, {}).report.iterations, pcg_solve(p.a, p.b, {}, jac).report.iterations);
}

TEST(Pcg, ZeroDiagonalFallsBackThenReportsBreakdown) {
    std::vector<double> d{0, 1, 1, 1, 2, 0, 1, 0, 2};
    const auto a = SparseSymMatrix::from_dense(3, d);
    EXPECT_THROW(Ic0Factor{a}, FactorizationError);
    try {
        (void)pcg_solve(a, mean_free({1, 0, -1}), {});
        FAIL() << "expected BreakdownError";
    } catch (const BreakdownError& e) {
        EXPECT_EQ(e.report().preconditioner, Preconditioner::jacobi);
    }
}

TEST(Pcg, IndefiniteOperatorBreaksDown) {
    std::vector<double> d{-1, 0, 0, 0, -1, 0, 0, 0, -1};
    PcgOptions opt;
    opt.preconditioner = Preconditioner::none;
    EXPECT_THROW((void)pcg_solve(SparseSymMatrix::from_dense(3, d), mean_free({1, 0, -1}), {}, opt), BreakdownError);
}

TEST(Pcg, SolutionIsGaugeInvariant) {
    const SquareProblem p;
    const auto x = pcg_solve(p.a, p.b, {}).x;
    auto shifted = x;
    for (double& v : shifted) v += 5.0;
    const auto res = pcg_solve(p.a, p.b, shifted);
    EXPECT_EQ(res.report.iterations, 0u);
    EXPECT_LT(max_diff(res.x, x), 1e-14);
}

TEST(Pcg, WarmStartSavesIterations) {
    const SquareProblem p;
    const auto cold = pcg_solve(p.a, p.b, {});
    auto guess = cold.x;
    const auto noise = oracle::random_vector(guess.size(), 3, -1e-6, 1e-6);
    for (Index i = 0; i < guess.size(); ++i) guess[i] += noise[i];
    const auto warm = pcg_solve(p.a, p.b, guess);
    EXPECT_LT(warm.report.iterations, cold.report.iterations);
    EXPECT_LT(max_diff(warm.x, cold.x), 1e-9);
}

TEST(Pcg, EnergyNormErrorIsMonotone) {
    const SquareProblem p;
    const auto exact = oracle::neumann_solve(oracle::to_dense(p.a), p.b);
    std::vector<double> errs;
    const std::function<void(std::size_t, std::span<const double>)> obs = [&](std::size_t, std::span<const double> x) {
        std::vector<double> e(x.begin(), x.end());
        linalg::remove_mean(e);
        for (Index i = 0; i < e.size(); ++i) e[i] -= exact[i];
        errs.push_back(p.a.quadratic_form(e));
    };
    for (auto pc : {Preconditioner::ic0, Preconditioner::jacobi}) {
        errs.clear();
        PcgOptions opt;
        opt.preconditioner = pc;
        opt.observer = &obs;
        (void)pcg_solve(p.a, p.b, {}, opt);
        ASSERT_GT(errs.size(), 3u);
        for (std::size_t k = 1; k < errs.size(); ++k) {
            EXPECT_LE(errs[k], errs[k - 1] * (1 + 1e-8) + 1e-24) << "iteration " << k;
        }
    }
}

TEST(Pcg, IterationBudgetExhaustionThrows) {
    const SquareProblem p;
    PcgOptions opt;
    opt.max_iter = 3;
    opt.preconditioner = Preconditioner::none;
    try {
        (void)pcg_solve(p.a, p.b, {}, opt);
        FAIL() << "expected NonConvergenceError";
    } catch (const NonConvergenceError& e) {
        EXPECT_EQ(e.report().iterations, 3u);
        EXPECT_GT(e.report().final_relative_residual, 1e-11);
    }
}

TEST(Preconditioner, NamesRoundTrip) {
    for (auto pc : {Preconditioner::ic0, Preconditioner::jacobi, Preconditioner::none}) {
        EXPECT_EQ(parse_preconditioner(to_string(pc)), pc);
    }
    EXPECT_THROW(parse_preconditioner("amg"), ConfigError);
}
