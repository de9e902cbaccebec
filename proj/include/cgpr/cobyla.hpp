#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "cgpr/errors.hpp"
#include "cgpr/qp.hpp"

namespace cgpr {

// Derivative-free constrained minimizer in the spirit of Powell's COBYLA:
//
//   minimize f(x)  subject to  c_i(x) >= 0,  lower <= x <= upper
//
// Objective and constraints are modelled by linear interpolation on a simplex
// of n+1 points. Each iteration minimizes the linear model inside a trust
// region of radius rho subject to the linearized
// constraints (an elastic slack keeps the subproblem feasible), and trial
// points are judged on the merit f + mu * max(0, -min_i c_i). rho shrinks
// when the models stop predicting progress.

struct CobylaOptions {
    double rho_begin = 0.5;
    double rho_end = 1e-4;
    int max_evals = 500;
    double feas_tol = 0.0;      // c_i >= -feas_tol counts as feasible
    Eigen::VectorXd lower;      // optional box; empty -> unbounded
    Eigen::VectorXd upper;
};

struct CobylaResult {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd c;
    double violation = 0.0;     // max(0, -min_i c_i)
    int evals = 0;
    bool feasible = false;
};

/// Callback: returns f(x) and writes the constraint values into `c`
/// (already sized to the constraint count).
using CobylaFunction = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& c)>;

namespace detail {

class Cobyla {
public:
    Cobyla(CobylaFunction fn, Eigen::Index m, CobylaOptions opt) : fn_(std::move(fn)), m_(m), opt_(std::move(opt)) {}

    CobylaResult run(const Eigen::VectorXd& x0) {
        n_ = x0.size();
        if (opt_.lower.size() == 0) opt_.lower = Eigen::VectorXd::Constant(n_, -std::numeric_limits<double>::infinity());
        if (opt_.upper.size() == 0) opt_.upper = Eigen::VectorXd::Constant(n_, std::numeric_limits<double>::infinity());
        double rho = opt_.rho_begin;
        rebuild(evaluate(x0), rho);

        while (evals_ < opt_.max_evals) {
            const std::size_t b = best_vertex();
            Eigen::MatrixXd D(n_, n_);
            Eigen::VectorXd df(n_);
            Eigen::MatrixXd dc(n_, m_);
            std::size_t row = 0;
            std::vector<std::size_t> idx;
            double max_dist = 0.0;
            for (std::size_t k = 0; k < simplex_.size(); ++k) {
                if (k == b) continue;
                D.row(static_cast<Eigen::Index>(row)) = (simplex_[k].x - simplex_[b].x).transpose();
                df[static_cast<Eigen::Index>(row)] = simplex_[k].f - simplex_[b].f;
                dc.row(static_cast<Eigen::Index>(row)) = (simplex_[k].c - simplex_[b].c).transpose();
                max_dist = std::max(max_dist, (simplex_[k].x - simplex_[b].x).lpNorm<Eigen::Infinity>());
                idx.push_back(k);
                ++row;
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(D);
            const double rcond = lu.rcond();
            if (!lu.isInvertible() || rcond < 1e-6 || max_dist > 2.5 * rho) {
                rebuild(simplex_[b], rho);
                continue;
            }
            const Eigen::VectorXd gf = lu.solve(df);
            const Eigen::MatrixXd gc = lu.solve(dc); // n x m, column i = grad c_i

            const Vertex& vb = simplex_[b];
            Eigen::VectorXd d;
            double pred_v = 0.0;
            solve_subproblem(vb, gf, gc, rho, d, pred_v);

            if (d.norm() < 0.25 * rho) {
                if (!shrink(rho)) break;
                continue;
            }
            const double pred_df = gf.dot(d);
            if (pred_v < vb.v && pred_df > 0.0) mu_ = std::max(mu_, 2.0 * pred_df / (vb.v - pred_v));
            const double phi_b = vb.f + mu_ * vb.v;
            const double pred = phi_b - (vb.f + pred_df + mu_ * pred_v);

            Vertex vn = evaluate(vb.x + d);
            if (evals_ >= opt_.max_evals) break;
            const double phi_n = vn.f + mu_ * vn.v;
            const double ratio = pred > 0.0 ? (phi_b - phi_n) / pred : -1.0;

            // replace the vertex whose removal keeps the simplex volume largest
            const Eigen::VectorXd w = lu.solve(Eigen::MatrixXd::Identity(n_, n_)).transpose() * d;
            Eigen::Index jmax = 0;
            w.cwiseAbs().maxCoeff(&jmax);
            if (std::abs(w[jmax]) > 0.1) simplex_[idx[static_cast<std::size_t>(jmax)]] = vn;

            if (ratio < 0.1 && !(phi_n < phi_b)) {
                if (!shrink(rho)) break;
            }
        }
        return result();
    }

private:
    struct Vertex {
        Eigen::VectorXd x;
        double f = 0.0;
        Eigen::VectorXd c;
        double v = 0.0;
    };

    Vertex evaluate(Eigen::VectorXd x) {
        x = x.cwiseMax(opt_.lower).cwiseMin(opt_.upper);
        Vertex vx;
        vx.x = x;
        vx.c = Eigen::VectorXd::Zero(m_);
        vx.f = fn_(x, vx.c);
        if (!std::isfinite(vx.f)) vx.f = std::numeric_limits<double>::max() / 4;
        for (Eigen::Index i = 0; i < m_; ++i)
            if (!std::isfinite(vx.c[i])) vx.c[i] = -std::numeric_limits<double>::max() / 4;
        vx.v = m_ > 0 ? std::max(0.0, -vx.c.minCoeff()) : 0.0;
        ++evals_;
        record(vx);
        return vx;
    }

    void record(const Vertex& vx) {
        const bool feas = vx.v <= opt_.feas_tol;
        if (feas && (!have_feasible_ || vx.f < best_feasible_.f)) {
            best_feasible_ = vx;
            have_feasible_ = true;
        }
        if (!have_any_ || vx.v < least_violation_.v ||
            (vx.v == least_violation_.v && vx.f < least_violation_.f)) {
            least_violation_ = vx;
            have_any_ = true;
        }
    }

    void rebuild(Vertex center, double rho) {
        simplex_.clear();
        simplex_.push_back(center);
        for (Eigen::Index i = 0; i < n_ && evals_ < opt_.max_evals; ++i) {
            Eigen::VectorXd x = center.x;
            double step = rho;
            if (x[i] + step > opt_.upper[i]) step = -rho;
            x[i] += step;
            simplex_.push_back(evaluate(x));
        }
    }

    bool shrink(double& rho) {
        rho *= 0.5;
        if (rho < opt_.rho_end) return false;
        rebuild(simplex_[best_vertex()], rho);
        return evals_ < opt_.max_evals;
    }

    std::size_t best_vertex() const {
        std::size_t b = 0;
        for (std::size_t k = 1; k < simplex_.size(); ++k) {
            const double pk = simplex_[k].f + mu_ * simplex_[k].v;
            const double pb = simplex_[b].f + mu_ * simplex_[b].v;
            if (pk < pb || (pk == pb && simplex_[k].v < simplex_[b].v)) b = k;
        }
        return b;
    }

    // min gf^T d + big*t  s.t.  c_b + gc^T d + t >= 0, t >= 0, |d|_inf <= rho, box
    void solve_subproblem(const Vertex& vb, const Eigen::VectorXd& gf, const Eigen::MatrixXd& gc, double rho,
                          Eigen::VectorXd& d, double& pred_v) {
        const Eigen::Index nv = n_ + 1;
        const double gnorm = gf.norm();
        const double big = 1e3 * std::max(1.0, gnorm) * std::max(1.0, 1.0 / rho);
        Eigen::VectorXd g(nv);
        g.head(n_) = gf;
        g[n_] = big;

        const Eigen::Index rows = m_ + 1 + 2 * n_;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, nv);
        Eigen::VectorXd bb(rows);
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < m_; ++i, ++r) {
            const double scale = std::max(1.0, gc.col(i).norm());
            A.block(r, 0, 1, n_) = gc.col(i).transpose() / scale;
            A(r, n_) = 1.0 / scale;
            bb[r] = vb.c[i] / scale;
        }
        A(r, n_) = 1.0;
        bb[r++] = 0.0;
        for (Eigen::Index j = 0; j < n_; ++j) {
            const double hi = std::min(rho, opt_.upper[j] - vb.x[j]);
            const double lo = std::max(-rho, opt_.lower[j] - vb.x[j]);
            A(r, j) = -1.0;
            bb[r++] = std::max(hi, 0.0);
            A(r, j) = 1.0;
            bb[r++] = -std::min(lo, 0.0);
        }
        // With weight eps the free step is -g/eps; eps = |g|/rho gives a
        // Euclidean step of length rho. Active constraints shorten it, so the
        // weight is lowered until the step fills the region or stops growing.
        double eps = std::max(gnorm / rho, 1e-10);
        Eigen::VectorXd sol = Eigen::VectorXd::Zero(nv);
        for (int pass = 0; pass < 6; ++pass) {
            Eigen::MatrixXd G = Eigen::MatrixXd::Identity(nv, nv) * eps;
            Eigen::VectorXd trial;
            try {
                trial = solve_qp(G, g, A, bb).x;
            } catch (const NumericalError&) {
                break;
            }
            const double len = trial.head(n_).norm();
            const bool grew = len > 1.01 * sol.head(n_).norm();
            if (pass == 0 || grew) sol = trial;
            if (!grew || len >= 0.9 * rho || len <= 1e-3 * rho) break;
            eps *= std::max(len / rho, 1e-2);
        }
        d = sol.head(n_);
        pred_v = 0.0;
        for (Eigen::Index i = 0; i < m_; ++i) pred_v = std::max(pred_v, -(vb.c[i] + gc.col(i).dot(d)));
    }

    CobylaResult result() const {
        const Vertex& v = have_feasible_ ? best_feasible_ : least_violation_;
        CobylaResult res;
        res.x = v.x;
        res.f = v.f;
        res.c = v.c;
        res.violation = v.v;
        res.evals = evals_;
        res.feasible = have_feasible_;
        return res;
    }

    CobylaFunction fn_;
    Eigen::Index m_;
    CobylaOptions opt_;
    Eigen::Index n_ = 0;
    std::vector<Vertex> simplex_;
    double mu_ = 0.0;
    int evals_ = 0;
    Vertex best_feasible_, least_violation_;
    bool have_feasible_ = false, have_any_ = false;
};

} // namespace detail

inline CobylaResult cobyla_minimize(CobylaFunction fn, Eigen::Index n_constraints, const Eigen::VectorXd& x0,
                                    const CobylaOptions& opt = {}) {
    if (x0.size() == 0) throw DomainError("cobyla_minimize: empty start point");
    detail::Cobyla solver(std::move(fn), n_constraints, opt);
    return solver.run(x0);
}

} // namespace cgpr
