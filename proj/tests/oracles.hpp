#pragma once

// Independent reference computations used by the tests. Deliberately coded
// differently from the library so that agreement means something.

#include "dmk/mesh.hpp"
#include "dmk/sparse.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

using dmk::Index;

/// Dense row-major matrix.
struct Dense {
    Index n = 0;
    std::vector<double> a;
    double& operator()(Index i, Index j) { return a[i * n + j]; }
    double operator()(Index i, Index j) const { return a[i * n + j]; }
};

inline Dense to_dense(const dmk::SparseSymMatrix& m) {
    Dense d{m.dimension(), std::vector<double>(m.dimension() * m.dimension(), 0.0)};
    const auto rp = m.row_ptr();
    const auto cols = m.cols();
    const auto vals = m.values();
    for (Index i = 0; i < d.n; ++i) {
        for (Index k = rp[i]; k < rp[i + 1]; ++k) d(i, cols[k]) = vals[k];
    }
    return d;
}

/// P1 Laplacian by the cotangent formula: K_ij = -(cot a + cot b)/2 over the
/// angles opposite edge ij, diagonal from the zero row sum.
inline Dense cotangent_laplacian(const dmk::Triangulation& mesh) {
    Dense k{mesh.num_nodes(), std::vector<double>(mesh.num_nodes() * mesh.num_nodes(), 0.0)};
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles()[t];
        for (int o = 0; o < 3; ++o) {
            const Index p = tri[static_cast<Index>(o)];
            const Index i = tri[static_cast<Index>((o + 1) % 3)];
            const Index j = tri[static_cast<Index>((o + 2) % 3)];
            const dmk::Point u = mesh.nodes()[i] - mesh.nodes()[p];
            const dmk::Point v = mesh.nodes()[j] - mesh.nodes()[p];
            const double cot = dmk::dot(u, v) / std::abs(dmk::cross(u, v));
            k(i, j) -= 0.5 * cot;
            k(j, i) -= 0.5 * cot;
            k(i, i) += 0.5 * cot;
            k(j, j) += 0.5 * cot;
        }
    }
    return k;
}

/// Solves the singular Neumann system by pinning node 0 to zero, eliminating
/// it, running Gauss-Jordan without pivoting shortcuts, then shifting the
/// result to zero mean.
inline std::vector<double> neumann_solve(const Dense& a, const std::vector<double>& b) {
    const Index n = a.n - 1;
    std::vector<double> m(n * (n + 1));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) m[i * (n + 1) + j] = a(i + 1, j + 1);
        m[i * (n + 1) + n] = b[i + 1];
    }
    for (Index c = 0; c < n; ++c) {
        Index piv = c;
        for (Index r = c + 1; r < n; ++r) {
            if (std::abs(m[r * (n + 1) + c]) > std::abs(m[piv * (n + 1) + c])) piv = r;
        }
        if (m[piv * (n + 1) + c] == 0.0) throw std::runtime_error("oracle: singular system");
        for (Index j = 0; j <= n; ++j) std::swap(m[c * (n + 1) + j], m[piv * (n + 1) + j]);
        const double d = m[c * (n + 1) + c];
        for (Index j = 0; j <= n; ++j) m[c * (n + 1) + j] /= d;
        for (Index r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = m[r * (n + 1) + c];
            if (f == 0.0) continue;
            for (Index j = 0; j <= n; ++j) m[r * (n + 1) + j] -= f * m[c * (n + 1) + j];
        }
    }
    std::vector<double> x(a.n, 0.0);
    for (Index i = 0; i < n; ++i) x[i + 1] = m[i * (n + 1) + n];
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double& v : x) v -= mean;
    return x;
}

inline std::vector<double> random_vector(Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = uni(rng);
    return v;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("dmk_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace oracle
