#pragma once

// Preconditioned conjugate gradients for the singular-but-consistent
// pure-Neumann systems A[mu] u = b. Iterates are kept in the mean-zero
// complement of the constant null space.

#include "dmk/errors.hpp"
#include "dmk/sparse.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dmk {

enum class Preconditioner { none, jacobi, ic0 };

inline std::string_view to_string(Preconditioner p) {
    switch (p) {
    case Preconditioner::none: return "none";
    case Preconditioner::jacobi: return "jacobi";
    case Preconditioner::ic0: return "ic0";
    }
    return "?";
}

inline Preconditioner parse_preconditioner(std::string_view s) {
    if (s == "none") return Preconditioner::none;
    if (s == "jacobi") return Preconditioner::jacobi;
    if (s == "ic0") return Preconditioner::ic0;
    throw ConfigError("unknown preconditioner '" + std::string(s) + "'");
}

struct SolveReport {
    std::size_t iterations = 0;
    double final_relative_residual = 0.0;
    Preconditioner preconditioner = Preconditioner::none;
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, SolveReport report) : Error(what), report_(report) {}
    [[nodiscard]] const SolveReport& report() const noexcept { return report_; }

private:
    SolveReport report_;
};

class NonConvergenceError : public SolverError {
public:
    using SolverError::SolverError;
};

/// Nonpositive curvature p^T A p: the operator lost positivity upstream.
class BreakdownError : public SolverError {
public:
    using SolverError::SolverError;
};

namespace linalg {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double mean(std::span<const double> a) {
    if (a.empty()) return 0.0;
    return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

inline void remove_mean(std::span<double> a) {
    const double m = mean(a);
    for (double& v : a) v -= m;
}

} // namespace linalg

/// Zero fill-in incomplete Cholesky factor L (A ~ L L^T) stored as the
/// lower triangle of A's pattern, diagonal last in each row.
class Ic0Factor {
public:
    explicit Ic0Factor(const SparseSymMatrix& a) {
        n_ = a.dimension();
        const auto rp = a.row_ptr();
        const auto cols = a.cols();
        const auto vals = a.values();
        ptr_.assign(n_ + 1, 0);
        for (Index i = 0; i < n_; ++i) {
            for (Index k = rp[i]; k < rp[i + 1] && cols[k] <= i; ++k) {
                cols_.push_back(cols[k]);
                vals_.push_back(vals[k]);
            }
            if (cols_.empty() || cols_.back() != i) {
                throw FactorizationError("IC(0): missing diagonal in row " + std::to_string(i));
            }
            ptr_[i + 1] = cols_.size();
        }

        for (Index i = 0; i < n_; ++i) {
            const Index begin = ptr_[i], diag = ptr_[i + 1] - 1;
            for (Index kk = begin; kk < diag; ++kk) {
                const Index k = cols_[kk];
                // Sparse dot of rows i and k over columns < k.
                double s = vals_[kk];
                Index p = begin, q = ptr_[k];
                const Index q_end = ptr_[k + 1] - 1;
                while (p < kk && q < q_end) {
                    if (cols_[p] == cols_[q]) {
                        s -= vals_[p] * vals_[q];
                        ++p;
                        ++q;
                    } else if (cols_[p] < cols_[q]) {
                        ++p;
                    } else {
                        ++q;
                    }
                }
                vals_[kk] = s / vals_[q_end];
            }
            double d = vals_[diag];
            const double orig = d;
            for (Index kk = begin; kk < diag; ++kk) d -= vals_[kk] * vals_[kk];
            // The constant null space leaves the last pivot at rounding level;
            // that direction is projected out by the solver anyway.
            if (i + 1 == n_ && d <= 1e-10 * orig && orig > 0.0) d = orig;
            if (!(d > 0.0)) {
                throw FactorizationError("IC(0): nonpositive pivot " + std::to_string(d) + " in row " +
                                         std::to_string(i));
            }
            vals_[diag] = std::sqrt(d);
        }
    }

    /// z = (L L^T)^{-1} r
    void apply(std::span<const double> r, std::span<double> z) const {
        std::copy(r.begin(), r.end(), z.begin());
        for (Index i = 0; i < n_; ++i) {
            double s = z[i];
            const Index diag = ptr_[i + 1] - 1;
            for (Index k = ptr_[i]; k < diag; ++k) s -= vals_[k] * z[cols_[k]];
            z[i] = s / vals_[diag];
        }
        for (Index i = n_; i-- > 0;) {
            const Index diag = ptr_[i + 1] - 1;
            z[i] /= vals_[diag];
            const double zi = z[i];
            for (Index k = ptr_[i]; k < diag; ++k) z[cols_[k]] -= vals_[k] * zi;
        }
    }

private:
    Index n_ = 0;
    std::vector<Index> ptr_;
    std::vector<Index> cols_;
    std::vector<double> vals_;
};

inline Ic0Factor ic0_factorize(const SparseSymMatrix& a) { return Ic0Factor(a); }

struct SolveResult {
    std::vector<double> x;
    SolveReport report;
};

struct PcgOptions {
    double tol = 1e-11;
    /// 0 selects 10 * dimension.
    std::size_t max_iter = 0;
    Preconditioner preconditioner = Preconditioner::ic0;
    /// Optional per-iteration hook receiving (iteration, x); used by tests.
    const std::function<void(std::size_t, std::span<const double>)>* observer = nullptr;
};

/// Solves A x = b for b orthogonal to constants. Returns the mean-zero
/// solution with ||A x - b|| <= tol ||b||. IC(0) falls back to Jacobi when
/// the factorization does not exist; the report names the one used.
inline SolveResult pcg_solve(const SparseSymMatrix& a, std::span<const double> b, std::span<const double> x0,
                             const PcgOptions& opt = {}) {
    const Index n = a.dimension();
    SolveResult out;
    out.report.preconditioner = opt.preconditioner;
    out.x.assign(n, 0.0);
    if (!x0.empty()) std::copy(x0.begin(), x0.end(), out.x.begin());
    linalg::remove_mean(out.x);

    const double bnorm = linalg::norm2(b);
    if (bnorm == 0.0) {
        std::fill(out.x.begin(), out.x.end(), 0.0);
        return out;
    }

    std::optional<Ic0Factor> ic;
    std::vector<double> inv_diag;
    if (opt.preconditioner == Preconditioner::ic0) {
        try {
            ic.emplace(a);
        } catch (const FactorizationError&) {
            out.report.preconditioner = Preconditioner::jacobi;
        }
    }
    if (out.report.preconditioner == Preconditioner::jacobi) {
        inv_diag = a.diagonal();
        for (double& d : inv_diag) {
            if (!(d > 0.0)) throw BreakdownError("nonpositive diagonal entry", out.report);
            d = 1.0 / d;
        }
    }
    auto precondition = [&](std::span<const double> r, std::span<double> z) {
        switch (out.report.preconditioner) {
        case Preconditioner::ic0: ic->apply(r, z); break;
        case Preconditioner::jacobi:
            for (Index i = 0; i < n; ++i) z[i] = r[i] * inv_diag[i];
            break;
        case Preconditioner::none: std::copy(r.begin(), r.end(), z.begin()); break;
        }
        linalg::remove_mean(z);
    };

    const std::size_t max_iter = opt.max_iter ? opt.max_iter : 10 * n;
    std::vector<double> r(n), z(n), p(n), q(n);
    auto true_residual = [&]() {
        a.multiply(out.x, q);
        for (Index i = 0; i < n; ++i) r[i] = b[i] - q[i];
        linalg::remove_mean(r);
        return linalg::norm2(r) / bnorm;
    };

    double rel = true_residual();
    std::size_t it = 0;
    // Restart from the true residual if the recursive one drifted.
    for (int restart = 0; restart < 5 && rel > opt.tol; ++restart) {
        precondition(r, z);
        std::copy(z.begin(), z.end(), p.begin());
        double rz = linalg::dot(r, z);
        while (it < max_iter) {
            a.multiply(p, q);
            const double pq = linalg::dot(p, q);
            if (!(pq > 0.0)) {
                out.report.iterations = it;
                out.report.final_relative_residual = rel;
                throw BreakdownError("PCG breakdown: nonpositive curvature " + std::to_string(pq), out.report);
            }
            const double alpha = rz / pq;
            for (Index i = 0; i < n; ++i) {
                out.x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            linalg::remove_mean(r);
            ++it;
            if (opt.observer) (*opt.observer)(it, out.x);
            rel = linalg::norm2(r) / bnorm;
            if (rel <= opt.tol) break;
            precondition(r, z);
            const double rz_new = linalg::dot(r, z);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (Index i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        }
        rel = true_residual();
        if (it >= max_iter) break;
    }

    linalg::remove_mean(out.x);
    out.report.iterations = it;
    out.report.final_relative_residual = rel;
    if (rel > opt.tol) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3e", rel);
        throw NonConvergenceError("PCG did not converge: relative residual " + std::string(buf) + " after " +
                                      std::to_string(it) + " iterations",
                                  out.report);
    }
    return out;
}

} // namespace dmk
