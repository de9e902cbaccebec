#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "cgpr/errors.hpp"

namespace cgpr {

// Strictly convex inequality-constrained QP
//
//   minimize   1/2 x^T G x + g^T x
//   subject to A x + b >= 0        (one constraint per row of A)
//
// solved with the Goldfarb-Idnani dual active-set method: start from the
// unconstrained minimizer and add the most violated constraint each outer
// iteration, dropping constraints whose dual multiplier would turn negative.
// Every iterate is dual feasible, so the first primal-feasible iterate is
// optimal.

struct QpOptions {
    double feas_tol = 1e-12;  // s_i >= -feas_tol * (1 + |b_i|) counts as satisfied
    int max_iter = 0;         // 0 -> 10 * (n + m)
};

struct QpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd multipliers; // one per constraint, zero when inactive
    std::vector<int> active;
    double objective = 0.0;
    int iterations = 0;
};

namespace detail {

struct Givens {
    double c = 1.0, s = 0.0;

    // Rotation mapping (a, b) -> (h, 0); returns h.
    static Givens make(double a, double b, double& h) {
        h = std::hypot(a, b);
        if (h == 0.0) return {};
        return {a / h, b / h};
    }
};

class GoldfarbIdnani {
public:
    GoldfarbIdnani(const Eigen::MatrixXd& G, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                   const Eigen::VectorXd& b, const QpOptions& opt)
        : A_(A), b_(b), opt_(opt), n_(G.rows()), m_(A.rows()) {
        Eigen::LLT<Eigen::MatrixXd> llt(G);
        if (llt.info() != Eigen::Success)
            throw ConditioningError("QP Hessian is not positive definite (rank deficient design?)");
        for (Eigen::Index i = 0; i < n_; ++i)
            if (!(llt.matrixLLT()(i, i) > 1e-14 * std::sqrt(std::abs(G(i, i)) + 1e-300)))
                throw ConditioningError("QP Hessian is numerically singular");
        // J = L^{-T}, so that J J^T = G^{-1}
        J_ = llt.matrixU().solve(Eigen::MatrixXd::Identity(n_, n_));
        R_ = Eigen::MatrixXd::Zero(n_, n_);
        x_ = llt.solve(-g);
        G_ = G;
        g_ = g;
    }

    QpResult run() {
        const int max_iter = opt_.max_iter > 0 ? opt_.max_iter : 10 * static_cast<int>(n_ + m_) + 100;
        std::vector<char> is_active(static_cast<std::size_t>(m_), 0);
        int iter = 0;
        while (true) {
            if (++iter > max_iter) throw ConvergenceError("QP active-set iteration limit reached");
            // Step 1: pick the most violated inactive constraint.
            Eigen::Index p = -1;
            double worst = 0.0;
            for (Eigen::Index i = 0; i < m_; ++i) {
                if (is_active[static_cast<std::size_t>(i)]) continue;
                const double s = A_.row(i).dot(x_) + b_[i];
                const double tol = opt_.feas_tol * (1.0 + std::abs(b_[i]));
                if (s < -tol && s < worst) {
                    worst = s;
                    p = i;
                }
            }
            if (p < 0) break;

            const Eigen::VectorXd np = A_.row(p).transpose();
            double u_new = 0.0;
            // Step 2: move along the primal/dual directions until p is satisfied.
            while (true) {
                if (++iter > max_iter) throw ConvergenceError("QP active-set iteration limit reached");
                const Eigen::VectorXd d = J_.transpose() * np;
                const Eigen::VectorXd z = J_.rightCols(n_ - q_) * d.tail(n_ - q_);
                Eigen::VectorXd r;
                if (q_ > 0)
                    r = R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
                else
                    r.resize(0);

                double t1 = inf();
                Eigen::Index l = -1;
                for (Eigen::Index j = 0; j < q_; ++j) {
                    if (r[j] > 0.0) {
                        const double ratio = u_[j] / r[j];
                        if (ratio < t1) {
                            t1 = ratio;
                            l = j;
                        }
                    }
                }
                double t2 = inf();
                const double zn = z.dot(np);
                if (z.norm() > 1e-14 * (1.0 + x_.norm()) && zn > 0.0) {
                    const double s = np.dot(x_) + b_[p];
                    t2 = -s / zn;
                }
                if (t1 == inf() && t2 == inf()) {
                    infeasible_ = p;
                    throw InfeasibleError("QP constraints are infeasible (constraint " + std::to_string(p) + ")",
                                          A_.row(p).dot(x_) + b_[p]);
                }
                if (t2 == inf()) {
                    // dual-only step, then drop the blocking constraint
                    for (Eigen::Index j = 0; j < q_; ++j) u_[j] -= t1 * r[j];
                    u_new += t1;
                    is_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(l)])] = 0;
                    drop(l);
                    continue;
                }
                const double t = std::min(t1, t2);
                x_ += t * z;
                for (Eigen::Index j = 0; j < q_; ++j) u_[j] -= t * r[j];
                u_new += t;
                if (t2 <= t1) {
                    add(p, np, u_new);
                    is_active[static_cast<std::size_t>(p)] = 1;
                    break;
                }
                is_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(l)])] = 0;
                drop(l);
            }
        }
        QpResult res;
        res.x = x_;
        res.multipliers = Eigen::VectorXd::Zero(m_);
        for (Eigen::Index j = 0; j < q_; ++j) res.multipliers[active_[static_cast<std::size_t>(j)]] = u_[j];
        res.active = active_;
        res.objective = 0.5 * x_.dot(G_ * x_) + g_.dot(x_);
        res.iterations = iter;
        return res;
    }

private:
    static double inf() { return std::numeric_limits<double>::infinity(); }

    void add(Eigen::Index p, const Eigen::VectorXd& np, double u) {
        Eigen::VectorXd d = J_.transpose() * np;
        for (Eigen::Index j = n_ - 1; j > q_; --j) {
            double h = 0.0;
            auto rot = Givens::make(d[j - 1], d[j], h);
            d[j - 1] = h;
            d[j] = 0.0;
            rotate_columns(j - 1, j, rot);
        }
        R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
        active_.push_back(static_cast<int>(p));
        u_.conservativeResize(q_ + 1);
        u_[q_] = u;
        ++q_;
    }

    void drop(Eigen::Index l) {
        // remove column l of R and restore upper-triangular form
        for (Eigen::Index c = l; c < q_ - 1; ++c) R_.col(c) = R_.col(c + 1);
        R_.col(q_ - 1).setZero();
        for (Eigen::Index j = l; j < q_ - 1; ++j) {
            double h = 0.0;
            auto rot = Givens::make(R_(j, j), R_(j + 1, j), h);
            for (Eigen::Index c = j; c < q_ - 1; ++c) {
                const double a = R_(j, c), b = R_(j + 1, c);
                R_(j, c) = rot.c * a + rot.s * b;
                R_(j + 1, c) = -rot.s * a + rot.c * b;
            }
            R_(j + 1, j) = 0.0;
            rotate_columns(j, j + 1, rot);
        }
        active_.erase(active_.begin() + l);
        for (Eigen::Index j = l; j < q_ - 1; ++j) u_[j] = u_[j + 1];
        --q_;
        u_.conservativeResize(q_);
    }

    void rotate_columns(Eigen::Index i, Eigen::Index j, const Givens& rot) {
        for (Eigen::Index k = 0; k < n_; ++k) {
            const double a = J_(k, i), b = J_(k, j);
            J_(k, i) = rot.c * a + rot.s * b;
            J_(k, j) = -rot.s * a + rot.c * b;
        }
    }

    const Eigen::MatrixXd& A_;
    const Eigen::VectorXd& b_;
    QpOptions opt_;
    Eigen::Index n_, m_;
    Eigen::MatrixXd G_;
    Eigen::VectorXd g_;
    Eigen::MatrixXd J_, R_;
    Eigen::VectorXd x_;
    Eigen::VectorXd u_;
    std::vector<int> active_;
    Eigen::Index q_ = 0;
    Eigen::Index infeasible_ = -1;
};

} // namespace detail

inline QpResult solve_qp(const Eigen::MatrixXd& G, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                         const Eigen::VectorXd& b, const QpOptions& opt = {}) {
    if (G.rows() != G.cols() || g.size() != G.rows() || (A.rows() > 0 && A.cols() != G.rows()) ||
        b.size() != A.rows())
        throw DomainError("solve_qp: inconsistent dimensions");
    detail::GoldfarbIdnani solver(G, g, A, b, opt);
    return solver.run();
}

/// Re-solves the equality-constrained QP on a given active set (KKT system)
/// to polish an active-set solution. Returns false when the polished point
/// loses feasibility or a multiplier turns negative; `res` is left untouched
/// in that case.
inline bool polish_on_active_set(const Eigen::MatrixXd& G, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                                 const Eigen::VectorXd& b, QpResult& res, double feas_tol) {
    const Eigen::Index n = G.rows();
    const auto q = static_cast<Eigen::Index>(res.active.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + q, n + q);
    Eigen::VectorXd rhs(n + q);
    K.topLeftCorner(n, n) = G;
    rhs.head(n) = -g;
    for (Eigen::Index j = 0; j < q; ++j) {
        const auto row = A.row(res.active[static_cast<std::size_t>(j)]);
        K.block(0, n + j, n, 1) = -row.transpose();
        K.block(n + j, 0, 1, n) = -row;
        rhs[n + j] = b[res.active[static_cast<std::size_t>(j)]];
    }
    Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    if (!sol.allFinite()) return false;
    Eigen::VectorXd x = sol.head(n);
    for (Eigen::Index j = 0; j < q; ++j)
        if (sol[n + j] < 0.0) return false;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        if (A.row(i).dot(x) + b[i] < -feas_tol * (1.0 + std::abs(b[i]))) return false;
    res.x = x;
    res.multipliers.setZero();
    for (Eigen::Index j = 0; j < q; ++j) res.multipliers[res.active[static_cast<std::size_t>(j)]] = sol[n + j];
    res.objective = 0.5 * x.dot(G * x) + g.dot(x);
    return true;
}

} // namespace cgpr
