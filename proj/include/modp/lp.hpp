// Dense two-phase simplex method for small bounded linear programs.
#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace modp::lp {

enum class Status { optimal, infeasible, unbounded };

/**
 * min c.x  subject to  A_eq x = b_eq,  A_ub x <= b_ub,  lo <= x <= hi.
 * All bounds must be finite.
 */
struct Problem {
    std::vector<double> c, lo, hi;
    std::vector<std::vector<double>> A_eq, A_ub;
    std::vector<double> b_eq, b_ub;
};

struct Solution {
    Status status = Status::infeasible;
    std::vector<double> x;
    double objective = 0;
};

namespace detail {

class Tableau {
public:
    Tableau(std::vector<std::vector<double>> A, std::vector<double> b, std::vector<int> basis)
        : A_(std::move(A)), b_(std::move(b)), basis_(std::move(basis)) {}

    /// Minimizes cost over the current basis; Bland's rule prevents cycling.
    Status optimize(const std::vector<double>& cost, const std::vector<char>& allowed) {
        const std::size_t m = A_.size(), n = cost.size();
        for (int iter = 0; iter < 50000; ++iter) {
            // reduced costs
            std::vector<double> y(m);
            for (std::size_t i = 0; i < m; ++i) y[i] = cost[basis_[i]];
            int enter = -1;
            for (std::size_t j = 0; j < n; ++j) {
                if (!allowed[j]) continue;
                double r = cost[j];
                for (std::size_t i = 0; i < m; ++i) r -= y[i] * A_[i][j];
                if (r < -eps) {
                    enter = static_cast<int>(j);
                    break;
                }
            }
            if (enter < 0) return Status::optimal;
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                if (A_[i][enter] > eps) {
                    double ratio = b_[i] / A_[i][enter];
                    if (ratio < best - eps || (ratio < best + eps && leave >= 0 && basis_[i] < basis_[leave])) {
                        best = ratio;
                        leave = static_cast<int>(i);
                    }
                }
            }
            if (leave < 0) return Status::unbounded;
            pivot(static_cast<std::size_t>(leave), static_cast<std::size_t>(enter));
        }
        return Status::unbounded;
    }

    void pivot(std::size_t r, std::size_t c) {
        double piv = A_[r][c];
        for (auto& v : A_[r]) v /= piv;
        b_[r] /= piv;
        for (std::size_t i = 0; i < A_.size(); ++i) {
            if (i == r) continue;
            double f = A_[i][c];
            if (f == 0) continue;
            for (std::size_t j = 0; j < A_[i].size(); ++j) A_[i][j] -= f * A_[r][j];
            b_[i] -= f * b_[r];
        }
        basis_[r] = static_cast<int>(c);
    }

    std::vector<std::vector<double>>& A() { return A_; }
    std::vector<double>& b() { return b_; }
    std::vector<int>& basis() { return basis_; }

    static constexpr double eps = 1e-10;

private:
    std::vector<std::vector<double>> A_;
    std::vector<double> b_;
    std::vector<int> basis_;
};

}  // namespace detail

inline Solution solve(const Problem& P) {
    const std::size_t nv = P.c.size();
    const std::size_t ne = P.A_eq.size(), nu = P.A_ub.size();
    // columns: y (nv), inequality slacks (nu), bound slacks (nv), artificials (m)
    const std::size_t m = ne + nu + nv;
    const std::size_t ncol = nv + nu + nv + m;
    std::vector<std::vector<double>> A(m, std::vector<double>(ncol, 0.0));
    std::vector<double> b(m, 0.0);
    std::size_t r = 0;
    for (std::size_t i = 0; i < ne; ++i, ++r) {
        double rhs = P.b_eq[i];
        for (std::size_t j = 0; j < nv; ++j) {
            A[r][j] = P.A_eq[i][j];
            rhs -= P.A_eq[i][j] * P.lo[j];
        }
        b[r] = rhs;
    }
    for (std::size_t i = 0; i < nu; ++i, ++r) {
        double rhs = P.b_ub[i];
        for (std::size_t j = 0; j < nv; ++j) {
            A[r][j] = P.A_ub[i][j];
            rhs -= P.A_ub[i][j] * P.lo[j];
        }
        A[r][nv + i] = 1.0;
        b[r] = rhs;
    }
    for (std::size_t j = 0; j < nv; ++j, ++r) {
        A[r][j] = 1.0;
        A[r][nv + nu + j] = 1.0;
        b[r] = P.hi[j] - P.lo[j];
        if (b[r] < -1e-12) return {};
    }
    std::vector<int> basis(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (b[i] < 0) {
            for (auto& v : A[i]) v = -v;
            b[i] = -b[i];
        }
        A[i][nv + nu + nv + i] = 1.0;
        basis[i] = static_cast<int>(nv + nu + nv + i);
    }
    detail::Tableau T(std::move(A), std::move(b), std::move(basis));
    std::vector<double> c1(ncol, 0.0);
    for (std::size_t i = 0; i < m; ++i) c1[nv + nu + nv + i] = 1.0;
    std::vector<char> all(ncol, 1);
    T.optimize(c1, all);
    double infeas = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (T.basis()[i] >= static_cast<int>(nv + nu + nv)) infeas += T.b()[i];
    if (infeas > 1e-8) return {};
    // drive remaining artificial variables out of the basis where possible
    for (std::size_t i = 0; i < m; ++i) {
        if (T.basis()[i] < static_cast<int>(nv + nu + nv)) continue;
        for (std::size_t j = 0; j < nv + nu + nv; ++j)
            if (std::abs(T.A()[i][j]) > 1e-9) {
                T.pivot(i, j);
                break;
            }
    }
    std::vector<double> c2(ncol, 0.0);
    for (std::size_t j = 0; j < nv; ++j) c2[j] = P.c[j];
    std::vector<char> allowed(ncol, 1);
    for (std::size_t i = 0; i < m; ++i) allowed[nv + nu + nv + i] = 0;
    Solution s;
    s.status = T.optimize(c2, allowed);
    if (s.status != Status::optimal) return s;
    s.x.assign(nv, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (T.basis()[i] < static_cast<int>(nv)) s.x[T.basis()[i]] = T.b()[i];
    s.objective = 0;
    for (std::size_t j = 0; j < nv; ++j) {
        s.x[j] += P.lo[j];
        s.objective += P.c[j] * s.x[j];
    }
    return s;
}

}  // namespace modp::lp
