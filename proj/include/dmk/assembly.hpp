#pragma once

// Conductivity-weighted P1 stiffness on the fine mesh with P0 weights on
// the coarse mesh, and the coarse gradient-norm operator that goes with it.

#include "dmk/errors.hpp"
#include "dmk/mesh.hpp"
#include "dmk/sparse.hpp"

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace dmk {

/// Conductivity: one value per coarse triangle.
using FieldP0 = std::vector<double>;
/// Potential: one value per fine node.
using FieldP1 = std::vector<double>;

/// Precomputed geometry of a refined pair. The sparsity pattern and the
/// unit-conductivity element matrices are built once; `assemble` only
/// refreshes values.
class StiffnessAssembler {
public:
    explicit StiffnessAssembler(const RefinedPair& pair) : pair_(&pair) {
        const Triangulation& fine = pair.fine;
        pattern_ = SparseSymMatrix::from_mesh_pattern(fine);
        const Index nt = fine.num_triangles();
        geometry_.reserve(nt);
        local_.resize(nt);
        slots_.resize(nt);
        for (Index t = 0; t < nt; ++t) {
            geometry_.push_back(element_geometry(fine, t));
            const auto& g = geometry_.back();
            const auto& tri = fine.triangles()[t];
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    const auto k = static_cast<std::size_t>(3 * a + b);
                    local_[t][k] = g.area * dot(g.basis_gradients[static_cast<std::size_t>(a)],
                                                g.basis_gradients[static_cast<std::size_t>(b)]);
                    slots_[t][k] = pattern_.position(tri[static_cast<std::size_t>(a)], tri[static_cast<std::size_t>(b)]);
                }
            }
        }
        coarse_area_ = pair.coarse.areas();
    }

    [[nodiscard]] const RefinedPair& pair() const noexcept { return *pair_; }
    [[nodiscard]] const std::vector<double>& coarse_areas() const noexcept { return coarse_area_; }
    [[nodiscard]] const ElementGeometry& fine_geometry(Index t) const { return geometry_[t]; }

    /// A[mu] = sum_t mu[parent(t)] * area(t) * grad(phi_i) . grad(phi_j).
    [[nodiscard]] SparseSymMatrix assemble(std::span<const double> mu) const {
        SparseSymMatrix a = pattern_;
        assemble_into(mu, a);
        return a;
    }

    void assemble_into(std::span<const double> mu, SparseSymMatrix& a) const {
        const Index nc = pair_->coarse.num_triangles();
        if (mu.size() != nc) {
            throw AssemblyError("conductivity has " + std::to_string(mu.size()) + " entries, expected " +
                                std::to_string(nc));
        }
        for (Index c = 0; c < nc; ++c) {
            if (!(mu[c] > 0.0)) throw AssemblyError("nonpositive conductivity on coarse triangle " + std::to_string(c));
        }
        auto vals = a.values();
        std::fill(vals.begin(), vals.end(), 0.0);
        for (Index t = 0; t < local_.size(); ++t) {
            const double w = mu[pair_->parent_of[t]];
            for (std::size_t k = 0; k < 9; ++k) vals[slots_[t][k]] += w * local_[t][k];
        }
    }

    /// Per coarse triangle: area-weighted RMS of the fine P1 gradient.
    [[nodiscard]] std::vector<double> gradient_norms(std::span<const double> u) const {
        const Index nc = pair_->coarse.num_triangles();
        std::vector<double> g(nc, 0.0);
        const auto& tris = pair_->fine.triangles();
        for (Index c = 0; c < nc; ++c) {
            double acc = 0.0;
            for (int i = 0; i < 4; ++i) {
                const Index t = pair_->child(c, i);
                const auto& geo = geometry_[t];
                Point grad{0.0, 0.0};
                for (std::size_t k = 0; k < 3; ++k) grad = grad + u[tris[t][k]] * geo.basis_gradients[k];
                acc += geo.area * dot(grad, grad);
            }
            g[c] = std::sqrt(acc / coarse_area_[c]);
        }
        return g;
    }

    /// 1/2 sum_T mu_T g_T^2 |T|, equal to 1/2 u^T A[mu] u.
    [[nodiscard]] double dirichlet_energy(std::span<const double> mu, std::span<const double> u) const {
        return dirichlet_energy_from_norms(mu, gradient_norms(u));
    }

    [[nodiscard]] double dirichlet_energy_from_norms(std::span<const double> mu, std::span<const double> g) const {
        double e = 0.0;
        for (Index c = 0; c < mu.size(); ++c) e += mu[c] * g[c] * g[c] * coarse_area_[c];
        return 0.5 * e;
    }

private:
    const RefinedPair* pair_;
    SparseSymMatrix pattern_;
    std::vector<ElementGeometry> geometry_;
    std::vector<std::array<double, 9>> local_;
    std::vector<std::array<Index, 9>> slots_;
    std::vector<double> coarse_area_;
};

inline SparseSymMatrix assemble_stiffness(const RefinedPair& pair, std::span<const double> mu) {
    return StiffnessAssembler(pair).assemble(mu);
}

inline std::vector<double> gradient_norms(const RefinedPair& pair, std::span<const double> u) {
    return StiffnessAssembler(pair).gradient_norms(u);
}

inline double dirichlet_energy(const RefinedPair& pair, std::span<const double> mu, std::span<const double> u) {
    return StiffnessAssembler(pair).dirichlet_energy(mu, u);
}

} // namespace dmk
