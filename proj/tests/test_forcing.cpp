#include "dmk/forcing.hpp"
#include "dmk/mesh.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace dmk;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }
double abs_sum(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += std::abs(x);
    return s;
}

} // namespace

TEST(Rhs, Tc3HasThreeEntriesWithExactWeights) {
    // Fine grid spacing 0.1 puts every Dirac point on a node.
    const auto pair = refine_uniform(gen_unit_square(5));
    const auto b = assemble_rhs(make_tc3_diracs(), pair);
    std::vector<Index> nz;
    for (Index i = 0; i < b.values.size(); ++i) {
        if (b.values[i] != 0.0) nz.push_back(i);
    }
    ASSERT_EQ(nz.size(), 3u);
    auto at = [&](Point p) { return b.values[snap_to_node(pair.fine, p)]; };
    EXPECT_EQ(at({0.5, 0.1}), 1.0);
    EXPECT_EQ(at({0.4, 0.9}), -0.5);
    EXPECT_EQ(at({0.6, 0.9}), -0.5);
    EXPECT_EQ(b.balance_scale, 1.0);
    EXPECT_EQ(sum(b.values), 0.0);
}

TEST(Rhs, Tc1SymmetricBoxesNeedNoRescaling) {
    const auto pair = refine_uniform(gen_unit_square(8));
    const auto b = assemble_rhs(make_tc1_boxes(), pair);
    EXPECT_NEAR(b.balance_scale, 1.0, 1e-12);
    // Each box carries its area times the value.
    EXPECT_NEAR(b.positive_total, 0.125, 1e-12);
    EXPECT_LE(std::abs(sum(b.values)), 1e-14 * abs_sum(b.values));
}

TEST(Rhs, Tc1ScalesLinearlyWithValue) {
    const auto pair = refine_uniform(gen_unit_square(4));
    const auto b1 = assemble_rhs(make_tc1_boxes(1.0), pair);
    const auto b3 = assemble_rhs(make_tc1_boxes(3.0), pair);
    for (Index i = 0; i < b1.values.size(); ++i) EXPECT_NEAR(b3.values[i], 3.0 * b1.values[i], 1e-15);
}

TEST(Rhs, RadialBalancedSinkNeedsLittleCorrection) {
    const auto coarse = refine_uniform(gen_disk_polar(6, 48));
    const auto fine = refine_uniform(coarse.fine);
    const auto b1 = assemble_rhs(RadialPiecewise{1.0, -0.2}, coarse, 8);
    const auto b2 = assemble_rhs(RadialPiecewise{1.0, -0.2}, fine, 8);
    EXPECT_LT(std::abs(b1.balance_scale - 1.0), 0.05);
    EXPECT_LT(std::abs(b2.balance_scale - 1.0), 0.05);
    // Source integral: c1 times the inscribed polygon of the r = 1/3 ring.
    EXPECT_NEAR(b2.positive_total, std::numbers::pi / 9.0, 0.01);
    EXPECT_LE(std::abs(sum(b2.values)), 1e-14 * abs_sum(b2.values));
}

TEST(Rhs, QuadratureIsExactForConstantsOnWholeTriangles) {
    const auto pair = refine_uniform(gen_unit_square(4));
    const ForcingSpec spec = Boxes{{{0.0, 0.25, 0.0, 1.0, 4.0}, {0.75, 1.0, 0.0, 1.0, -4.0}}};
    for (int k : {1, 2, 5}) {
        const auto b = assemble_rhs(spec, pair, k);
        EXPECT_NEAR(b.positive_total, 1.0, 1e-13) << "subdivisions " << k;
    }
}

TEST(Rhs, UnbalancedForcingIsRescaled) {
    const auto pair = refine_uniform(gen_unit_square(4));
    const ForcingSpec spec = Boxes{{{0.0, 0.25, 0.0, 0.5, 1.0}, {0.5, 1.0, 0.0, 1.0, -1.0}}};
    const auto b = assemble_rhs(spec, pair);
    EXPECT_NEAR(b.balance_scale, 0.125 / 0.5, 1e-12);
    EXPECT_LE(std::abs(sum(b.values)), 1e-14 * abs_sum(b.values));
}

TEST(Rhs, OneSignedForcingThrows) {
    const auto pair = refine_uniform(gen_unit_square(2));
    EXPECT_THROW(assemble_rhs(Boxes{{{0.0, 1.0, 0.0, 1.0, 1.0}}}, pair), BalanceError);
    EXPECT_THROW(assemble_rhs(DiracSet{{{{0.5, 0.5}, -1.0}}}, pair), BalanceError);
}

TEST(Rhs, DiracOutsideDomainThrows) {
    const auto pair = refine_uniform(gen_unit_square(2));
    EXPECT_THROW(assemble_rhs(DiracSet{{{{0.5, 0.5}, 1.0}, {{1.5, 0.5}, -1.0}}}, pair), DomainError);
}

TEST(Snap, NodesSnapToThemselvesAndSnappingIsIdempotent) {
    const auto m = refine_uniform(gen_disk_polar(3, 12)).fine;
    for (Index i = 0; i < m.num_nodes(); ++i) EXPECT_EQ(snap_to_node(m, m.nodes()[i]), i);
    for (Point p : {Point{0.13, -0.41}, Point{-0.7, 0.2}, Point{0.0, 0.05}}) {
        const Index k = snap_to_node(m, p);
        EXPECT_EQ(snap_to_node(m, m.nodes()[k]), k);
        for (const auto& q : m.nodes()) EXPECT_GE(norm(q - p), norm(m.nodes()[k] - p));
    }
}

TEST(Tc2, DeterministicPerSeedAndInBounds) {
    const auto a = std::get<DiracSet>(make_tc2_sources(42));
    const auto b = std::get<DiracSet>(make_tc2_sources(42));
    const auto c = std::get<DiracSet>(make_tc2_sources(43));
    ASSERT_EQ(a.points.size(), 51u);
    bool differs = false;
    for (std::size_t i = 0; i + 1 < a.points.size(); ++i) {
        EXPECT_EQ(a.points[i].at.x, b.points[i].at.x);
        EXPECT_EQ(a.points[i].at.y, b.points[i].at.y);
        EXPECT_EQ(a.points[i].weight, 1.0);
        for (double v : {a.points[i].at.x, a.points[i].at.y}) {
            EXPECT_GE(v, 0.1);
            EXPECT_LE(v, 0.9);
        }
        differs = differs || a.points[i].at.x != c.points[i].at.x;
    }
    EXPECT_TRUE(differs);
    EXPECT_EQ(a.points.back().at.x, 0.05);
    EXPECT_EQ(a.points.back().weight, -50.0);
}

TEST(Tc2, LoadVectorBalanced) {
    const auto pair = refine_uniform(gen_unit_square(10));
    const auto b = assemble_rhs(make_tc2_sources(20240601), pair);
    EXPECT_EQ(b.balance_scale, 1.0);
    EXPECT_NEAR(b.positive_total, 50.0, 1e-12);
    EXPECT_EQ(sum(b.values), 0.0);
}
