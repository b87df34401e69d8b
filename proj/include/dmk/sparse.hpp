#pragma once

#include "dmk/errors.hpp"
#include "dmk/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace dmk {

/// Symmetric matrix in full (both triangles) CSR storage with sorted columns.
class SparseSymMatrix {
public:
    SparseSymMatrix() = default;

    /// Pattern from node adjacency of a triangulation, diagonal included.
    static SparseSymMatrix from_mesh_pattern(const Triangulation& mesh) {
        const Index n = mesh.num_nodes();
        std::vector<std::vector<Index>> adj(n);
        for (Index i = 0; i < n; ++i) adj[i].push_back(i);
        for (const auto& e : collect_edges(mesh.triangles())) {
            adj[e[0]].push_back(e[1]);
            adj[e[1]].push_back(e[0]);
        }
        SparseSymMatrix m;
        m.n_ = n;
        m.row_ptr_.assign(n + 1, 0);
        for (Index i = 0; i < n; ++i) {
            std::sort(adj[i].begin(), adj[i].end());
            m.row_ptr_[i + 1] = m.row_ptr_[i] + adj[i].size();
        }
        m.cols_.reserve(m.row_ptr_[n]);
        for (const auto& row : adj) m.cols_.insert(m.cols_.end(), row.begin(), row.end());
        m.values_.assign(m.cols_.size(), 0.0);
        return m;
    }

    /// Builds a matrix from dense row-major data, keeping the nonzeros.
    static SparseSymMatrix from_dense(Index n, std::span<const double> dense) {
        SparseSymMatrix m;
        m.n_ = n;
        m.row_ptr_.assign(n + 1, 0);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (dense[i * n + j] != 0.0 || i == j) {
                    m.cols_.push_back(j);
                    m.values_.push_back(dense[i * n + j]);
                }
            }
            m.row_ptr_[i + 1] = m.cols_.size();
        }
        return m;
    }

    [[nodiscard]] Index dimension() const noexcept { return n_; }
    [[nodiscard]] Index nonzeros() const noexcept { return cols_.size(); }
    [[nodiscard]] std::span<const Index> row_ptr() const noexcept { return row_ptr_; }
    [[nodiscard]] std::span<const Index> cols() const noexcept { return cols_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }

    /// Storage position of entry (i, j); -1 cast to Index when absent.
    [[nodiscard]] Index position(Index i, Index j) const {
        const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        auto it = std::lower_bound(first, last, j);
        if (it == last || *it != j) return static_cast<Index>(-1);
        return static_cast<Index>(it - cols_.begin());
    }

    [[nodiscard]] double operator()(Index i, Index j) const {
        const Index p = position(i, j);
        return p == static_cast<Index>(-1) ? 0.0 : values_[p];
    }

    void multiply(std::span<const double> x, std::span<double> y) const {
        for (Index i = 0; i < n_; ++i) {
            double s = 0.0;
            for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[cols_[k]];
            y[i] = s;
        }
    }

    [[nodiscard]] std::vector<double> diagonal() const {
        std::vector<double> d(n_, 0.0);
        for (Index i = 0; i < n_; ++i) d[i] = (*this)(i, i);
        return d;
    }

    [[nodiscard]] double quadratic_form(std::span<const double> x) const {
        double s = 0.0;
        for (Index i = 0; i < n_; ++i) {
            double r = 0.0;
            for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) r += values_[k] * x[cols_[k]];
            s += x[i] * r;
        }
        return s;
    }

    /// Largest |row sum| / max |entry in row| over all rows.
    [[nodiscard]] double max_relative_row_sum() const {
        double worst = 0.0;
        for (Index i = 0; i < n_; ++i) {
            double s = 0.0, big = 0.0;
            for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                s += values_[k];
                big = std::max(big, std::abs(values_[k]));
            }
            if (big > 0.0) worst = std::max(worst, std::abs(s) / big);
        }
        return worst;
    }

    [[nodiscard]] bool is_symmetric(double rel_tol = 0.0) const {
        for (Index i = 0; i < n_; ++i) {
            for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                const double a = values_[k], b = (*this)(cols_[k], i);
                if (std::abs(a - b) > rel_tol * std::max(std::abs(a), std::abs(b))) return false;
            }
        }
        return true;
    }

private:
    Index n_ = 0;
    std::vector<Index> row_ptr_;
    std::vector<Index> cols_;
    std::vector<double> values_;
};

} // namespace dmk
