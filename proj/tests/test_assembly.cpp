#include "dmk/assembly.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dmk;

namespace {

std::vector<double> random_mu(Index n, std::uint64_t seed) { return oracle::random_vector(n, seed, 0.05, 4.0); }

std::vector<double> interpolate(const Triangulation& m, double (*f)(Point)) {
    std::vector<double> u(m.num_nodes());
    for (Index i = 0; i < m.num_nodes(); ++i) u[i] = f(m.nodes()[i]);
    return u;
}

} // namespace

TEST(Stiffness, ReferenceTriangleEntries) {
    const auto pair = refine_uniform(Triangulation::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}));
    const auto d = oracle::to_dense(assemble_stiffness(pair, std::vector<double>{1.0}));
    const auto k = oracle::cotangent_laplacian(pair.fine);
    for (Index i = 0; i < d.n; ++i) {
        for (Index j = 0; j < d.n; ++j) EXPECT_NEAR(d(i, j), k(i, j), 1e-15);
    }
    // Right-angle corner: diagonal 1, the two legs -1/2 each.
    const auto single = Triangulation::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
    const auto g = element_geometry(single, 0);
    EXPECT_DOUBLE_EQ(g.area * dot(g.basis_gradients[0], g.basis_gradients[0]), 1.0);
    EXPECT_DOUBLE_EQ(g.area * dot(g.basis_gradients[0], g.basis_gradients[1]), -0.5);
    EXPECT_DOUBLE_EQ(g.area * dot(g.basis_gradients[1], g.basis_gradients[2]), 0.0);
}

TEST(Stiffness, UnitConductivityMatchesCotangentOracle) {
    for (const auto& coarse : {gen_unit_square(5), gen_disk_polar(6, 24)}) {
        const auto pair = refine_uniform(coarse);
        const auto a = oracle::to_dense(assemble_stiffness(pair, std::vector<double>(coarse.num_triangles(), 1.0)));
        const auto k = oracle::cotangent_laplacian(pair.fine);
        double scale = 0.0, diff = 0.0;
        for (Index i = 0; i < a.a.size(); ++i) {
            scale = std::max(scale, std::abs(k.a[i]));
            diff = std::max(diff, std::abs(a.a[i] - k.a[i]));
        }
        EXPECT_LE(diff, 1e-13 * scale);
    }
}

TEST(Stiffness, SymmetricWithZeroRowSums) {
    const auto pair = refine_uniform(gen_disk_polar(9, 36));
    const auto a = assemble_stiffness(pair, random_mu(pair.coarse.num_triangles(), 3));
    EXPECT_TRUE(a.is_symmetric());
    EXPECT_LT(a.max_relative_row_sum(), 1e-12);
    std::vector<double> ones(a.dimension(), 1.0), out(a.dimension());
    a.multiply(ones, out);
    double worst = 0.0;
    for (double v : out) worst = std::max(worst, std::abs(v));
    const auto diag = a.diagonal();
    EXPECT_LT(worst, 1e-12 * *std::max_element(diag.begin(), diag.end()));
}

TEST(Stiffness, LinearInConductivity) {
    const auto pair = refine_uniform(gen_unit_square(4));
    const Index nc = pair.coarse.num_triangles();
    const auto m1 = random_mu(nc, 1), m2 = random_mu(nc, 2);
    std::vector<double> mix(nc);
    for (Index t = 0; t < nc; ++t) mix[t] = 2.0 * m1[t] + 0.5 * m2[t];
    const auto a1 = assemble_stiffness(pair, m1), a2 = assemble_stiffness(pair, m2), am = assemble_stiffness(pair, mix);
    for (Index k = 0; k < am.nonzeros(); ++k) {
        EXPECT_NEAR(am.values()[k], 2.0 * a1.values()[k] + 0.5 * a2.values()[k], 1e-12 * (1 + std::abs(am.values()[k])));
    }
}

TEST(Stiffness, PositiveSemidefinite) {
    const auto pair = refine_uniform(gen_disk_polar(6, 24));
    const auto a = assemble_stiffness(pair, random_mu(pair.coarse.num_triangles(), 5));
    for (std::uint64_t s = 0; s < 25; ++s) EXPECT_GE(a.quadratic_form(oracle::random_vector(a.dimension(), s)), 0.0);
}

TEST(Stiffness, QuadraticFormOfCoordinateIsConductivityIntegral) {
    // u = x has unit gradient, so u^T A u = int mu.
    const auto pair = refine_uniform(gen_unit_square(6));
    const auto mu = random_mu(pair.coarse.num_triangles(), 9);
    const auto a = assemble_stiffness(pair, mu);
    const auto u = interpolate(pair.fine, [](Point p) { return p.x; });
    double want = 0.0;
    for (Index t = 0; t < mu.size(); ++t) want += mu[t] * pair.coarse.area(t);
    EXPECT_NEAR(a.quadratic_form(u), want, 1e-12 * want);
    EXPECT_NEAR(assemble_stiffness(pair, std::vector<double>(mu.size(), 1.0)).quadratic_form(u), 1.0, 1e-13);
}

TEST(Stiffness, RejectsBadConductivity) {
    const auto pair = refine_uniform(gen_unit_square(2));
    EXPECT_THROW(assemble_stiffness(pair, std::vector<double>(3, 1.0)), AssemblyError);
    std::vector<double> mu(pair.coarse.num_triangles(), 1.0);
    mu[2] = 0.0;
    EXPECT_THROW(assemble_stiffness(pair, mu), AssemblyError);
    mu[2] = std::nan("");
    EXPECT_THROW(assemble_stiffness(pair, mu), AssemblyError);
}

TEST(GradientNorms, LinearFieldHasExactNorm) {
    const auto pair = refine_uniform(gen_disk_polar(6, 24));
    for (const double g : gradient_norms(pair, interpolate(pair.fine, [](Point p) { return p.x; }))) {
        EXPECT_NEAR(g, 1.0, 1e-12);
    }
    for (const double g : gradient_norms(pair, interpolate(pair.fine, [](Point p) { return 3.0 * p.x - 4.0 * p.y + 7.0; }))) {
        EXPECT_NEAR(g, 5.0, 1e-12);
    }
}

TEST(GradientNorms, ConstantFieldIsZero) {
    const auto pair = refine_uniform(gen_unit_square(3));
    for (const double g : gradient_norms(pair, std::vector<double>(pair.fine.num_nodes(), 2.5))) EXPECT_NEAR(g, 0.0, 1e-13);
}

TEST(GradientNorms, RootMeanSquareOverChildren) {
    // u = 1 at the midpoint of edge (0,1) only: children 0 and 1 carry the
    // gradient, the others see a piece of it too.
    const auto pair = refine_uniform(Triangulation::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}));
    std::vector<double> u(pair.fine.num_nodes(), 0.0);
    u[3] = 1.0;
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Index t = pair.child(0, i);
        const auto geo = element_geometry(pair.fine, t);
        Point gr{0, 0};
        for (std::size_t k = 0; k < 3; ++k) gr = gr + u[pair.fine.triangles()[t][k]] * geo.basis_gradients[k];
        acc += geo.area * dot(gr, gr);
    }
    EXPECT_NEAR(gradient_norms(pair, u)[0], std::sqrt(acc / 0.5), 1e-14);
}

TEST(Energy, MatchesHalfQuadraticForm) {
    const auto pair = refine_uniform(gen_disk_polar(6, 30));
    const StiffnessAssembler as(pair);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto mu = random_mu(pair.coarse.num_triangles(), 100 + s);
        const auto u = oracle::random_vector(pair.fine.num_nodes(), 200 + s);
        const double e = as.dirichlet_energy(mu, u);
        EXPECT_NEAR(e, 0.5 * as.assemble(mu).quadratic_form(u), 1e-12 * e);
        EXPECT_GE(e, 0.0);
    }
}

TEST(Energy, ScalesQuadraticallyAndIgnoresConstants) {
    const auto pair = refine_uniform(gen_unit_square(4));
    const auto mu = random_mu(pair.coarse.num_triangles(), 1);
    auto u = oracle::random_vector(pair.fine.num_nodes(), 2);
    const double e = dirichlet_energy(pair, mu, u);
    auto v = u;
    for (double& x : v) x = 3.0 * x + 11.0;
    EXPECT_NEAR(dirichlet_energy(pair, mu, v), 9.0 * e, 1e-11 * e);
}

TEST(Assembler, ReassemblyIntoExistingMatrixMatches) {
    const auto pair = refine_uniform(gen_unit_square(3));
    const StiffnessAssembler as(pair);
    const auto m1 = random_mu(pair.coarse.num_triangles(), 1), m2 = random_mu(pair.coarse.num_triangles(), 2);
    auto a = as.assemble(m1);
    as.assemble_into(m2, a);
    const auto b = as.assemble(m2);
    for (Index k = 0; k < a.nonzeros(); ++k) EXPECT_EQ(a.values()[k], b.values()[k]);
}
