#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "cgpr/dataset.hpp"
#include "cgpr/errors.hpp"
#include "cgpr/qp.hpp"

namespace cgpr {

/// Exponents (a, b, c) of x1^a x2^b x3^c with a + b + c <= d in graded
/// lexicographic order: constant first, then by total degree, and inside a
/// degree by descending power of x1, then of x2.
inline std::vector<std::array<int, 3>> monomial_exponents(int d) {
    if (d < 0) throw DomainError("polynomial degree must be >= 0");
    std::vector<std::array<int, 3>> out;
    for (int deg = 0; deg <= d; ++deg)
        for (int a = deg; a >= 0; --a)
            for (int b = deg - a; b >= 0; --b) out.push_back({a, b, deg - a - b});
    return out;
}

/// C(d+3, 3)
inline std::size_t basis_size(int d) {
    const auto n = static_cast<std::size_t>(d);
    return (n + 3) * (n + 2) * (n + 1) / 6;
}

namespace detail {

inline double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

} // namespace detail

inline Eigen::VectorXd poly_basis(const Point& x, int d) {
    const auto exps = monomial_exponents(d);
    Eigen::VectorXd h(static_cast<Eigen::Index>(exps.size()));
    for (std::size_t i = 0; i < exps.size(); ++i)
        h[static_cast<Eigen::Index>(i)] =
            detail::ipow(x[0], exps[i][0]) * detail::ipow(x[1], exps[i][1]) * detail::ipow(x[2], exps[i][2]);
    return h;
}

/// dh/dx_j, same ordering as poly_basis; j is a 0-based Feature index.
inline Eigen::VectorXd poly_basis_grad(const Point& x, int d, int j) {
    if (j < 0 || j > 2) throw DomainError("coordinate index must be 0, 1 or 2");
    const auto exps = monomial_exponents(d);
    Eigen::VectorXd g(static_cast<Eigen::Index>(exps.size()));
    for (std::size_t i = 0; i < exps.size(); ++i) {
        const auto& e = exps[i];
        if (e[j] == 0) {
            g[static_cast<Eigen::Index>(i)] = 0.0;
            continue;
        }
        double v = e[j];
        for (int k = 0; k < 3; ++k) v *= detail::ipow(x[k], k == j ? e[k] - 1 : e[k]);
        g[static_cast<Eigen::Index>(i)] = v;
    }
    return g;
}

/// mu(x) = h(x)^T beta over normalized inputs, fitted by constrained ridge
/// least squares.
struct PolyMean {
    int degree = 0;
    Eigen::VectorXd beta;
    double lambda_reg = 0.0;
    double eps_s_max = 0.0; // normalized units

    bool fitted() const { return beta.size() == static_cast<Eigen::Index>(basis_size(degree)); }

    void validate() const {
        if (degree < 0 || !fitted() || !(lambda_reg >= 0.0) || !std::isfinite(eps_s_max) || !beta.allFinite())
            throw DataError("invalid polynomial mean: degree/beta/lambda_reg/eps_s_max inconsistent");
    }

    static PolyMean constant(double c, int degree = 0) {
        PolyMean m;
        m.degree = degree;
        m.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_size(degree)));
        m.beta[0] = c;
        return m;
    }
};

inline double mean_value(const PolyMean& pm, const Point& x) { return poly_basis(x, pm.degree).dot(pm.beta); }
inline double mean_dp(const PolyMean& pm, const Point& x) {
    return poly_basis_grad(x, pm.degree, kPressure).dot(pm.beta);
}
inline double mean_ds(const PolyMean& pm, const Point& x) {
    return poly_basis_grad(x, pm.degree, kEpsS).dot(pm.beta);
}

struct PeakStrain {
    double eps_s_max = 0.0;     // raw units
    bool unsmoothed = false;    // some group was too short for the smoothing window
    std::vector<double> per_group;
};

/// Centered moving average; windows are truncated at the ends.
inline std::vector<double> moving_average(const std::vector<double>& v, int window) {
    const int half = window / 2;
    const int n = static_cast<int>(v.size());
    std::vector<double> out(v.size());
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
        double s = 0.0;
        for (int k = lo; k <= hi; ++k) s += v[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(i)] = s / (hi - lo + 1);
    }
    return out;
}

/// Deviatoric strain at the peak of Gamma: per confinement group the argmax
/// of the 5-point moving average of Gamma (ordered by eps_s; ties go to the
/// smallest eps_s), then the median over groups.
inline PeakStrain estimate_eps_s_max(const Dataset& train, int window = 5) {
    PeakStrain out;
    for (auto& [level, group] : train.groups()) {
        if (group.size() < 3) continue;
        auto g = group;
        std::stable_sort(g.begin(), g.end(),
                         [](const FeatureSample& a, const FeatureSample& b) { return a.eps_s < b.eps_s; });
        std::vector<double> gamma;
        for (const auto& s : g) gamma.push_back(s.gamma);
        if (static_cast<int>(g.size()) >= window)
            gamma = moving_average(gamma, window);
        else
            out.unsmoothed = true;
        std::size_t best = 0;
        for (std::size_t i = 1; i < gamma.size(); ++i)
            if (gamma[i] > gamma[best]) best = i;
        out.per_group.push_back(g[best].eps_s);
    }
    if (out.per_group.empty())
        throw DataError("estimate_eps_s_max needs at least one confinement group with >= 3 samples");
    auto v = out.per_group;
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    out.eps_s_max = k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
    return out;
}

struct MeanConstraints {
    bool pressure_hardening = true;      // C1: dmu/dp >= 0
    bool deviatoric_monotone = true;     // C2: dmu/deps_s >= 0 before the peak, <= 0 after
    double c1_margin = 0.0;              // C1 tightened to dmu/dp >= c1_margin (normalized units)
};

struct MeanFitReport {
    int active_constraints = 0;
    double min_slack = 0.0;   // min over all constraint rows (raw scale) at the solution
    bool polished = false;
};

struct ConstraintRows {
    Eigen::MatrixXd A;
    Eigen::VectorXd lower;
    std::vector<int> virtual_index;
};

/// One row per (virtual point, enabled constraint); A beta >= lower is the
/// feasible set. Rows are unscaled derivative basis vectors.
inline ConstraintRows mean_constraint_rows(int d, const std::vector<Point>& virtual_points, double eps_s_max,
                                           const MeanConstraints& which) {
    const int per = (which.pressure_hardening ? 1 : 0) + (which.deviatoric_monotone ? 1 : 0);
    ConstraintRows out;
    out.A.resize(static_cast<Eigen::Index>(virtual_points.size()) * per,
                 static_cast<Eigen::Index>(basis_size(d)));
    out.lower = Eigen::VectorXd::Zero(out.A.rows());
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < virtual_points.size(); ++i) {
        const Point& v = virtual_points[i];
        if (which.pressure_hardening) {
            out.lower[r] = which.c1_margin;
            out.A.row(r++) = poly_basis_grad(v, d, kPressure).transpose();
            out.virtual_index.push_back(static_cast<int>(i));
        }
        if (which.deviatoric_monotone) {
            const double sign = v[kEpsS] <= eps_s_max ? 1.0 : -1.0;
            out.A.row(r++) = sign * poly_basis_grad(v, d, kEpsS).transpose();
            out.virtual_index.push_back(static_cast<int>(i));
        }
    }
    return out;
}

/// Ridge least squares ||H beta - y||^2 + lambda ||beta||^2 subject to the
/// enabled derivative constraints at every virtual point. Works on the
/// normalized inputs and targets of `train`; `eps_s_max` is in normalized
/// units.
inline PolyMean fit_constrained_mean(const Dataset& train, int d, double lambda_reg,
                                     const std::vector<Point>& virtual_points, double eps_s_max,
                                     const MeanConstraints& which = {}, MeanFitReport* report = nullptr) {
    if (d < 0) throw ConfigError("polynomial degree must be >= 0");
    if (!(lambda_reg >= 0.0)) throw ConfigError("lambda_reg must be >= 0");
    if (!(which.c1_margin >= 0.0)) throw ConfigError("c1_margin must be >= 0");
    if (train.empty()) throw EmptyInputError("fit_constrained_mean: empty training set");
    const bool constrained = which.pressure_hardening || which.deviatoric_monotone;
    if (constrained && virtual_points.empty()) throw ConfigError("constrained mean fit needs virtual points");

    const Eigen::MatrixXd X = train.normalized_inputs();
    const Eigen::VectorXd y = train.normalized_gamma();
    const auto nb = static_cast<Eigen::Index>(basis_size(d));
    Eigen::MatrixXd H(X.rows(), nb);
    for (Eigen::Index i = 0; i < X.rows(); ++i) H.row(i) = poly_basis(X.row(i).transpose(), d).transpose();

    Eigen::MatrixXd G = H.transpose() * H;
    G.diagonal().array() += lambda_reg;
    const Eigen::VectorXd g = -(H.transpose() * y);

    ConstraintRows rows;
    if (constrained) rows = mean_constraint_rows(d, virtual_points, eps_s_max, which);
    else {
        rows.A.resize(0, nb);
        rows.lower.resize(0);
    }

    // Unit-norm rows for the solver. Zero rows (e.g. d = 0) carry no
    // information unless they demand a positive slope, which no beta meets.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < rows.A.rows(); ++r)
        if (rows.A.row(r).norm() > 0.0) keep.push_back(r);
        else if (rows.lower[r] > 0.0) throw InfeasibleError("constrained mean: c1_margin > 0 cannot hold for degree 0", -rows.lower[r]);
    Eigen::MatrixXd As(static_cast<Eigen::Index>(keep.size()), nb);
    Eigen::VectorXd bs(As.rows());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const double nr = rows.A.row(keep[k]).norm();
        As.row(static_cast<Eigen::Index>(k)) = rows.A.row(keep[k]) / nr;
        bs[static_cast<Eigen::Index>(k)] = -rows.lower[keep[k]] / nr;
    }

    QpResult qp;
    try {
        qp = solve_qp(G, g, As, bs);
    } catch (const InfeasibleError& e) {
        // locate the most violated virtual point at the last iterate for the report
        std::ostringstream msg;
        msg << "constrained mean infeasible: " << e.what();
        throw InfeasibleError(msg.str(), e.worst_margin());
    }
    bool polished = false;
    if (!qp.active.empty()) polished = polish_on_active_set(G, g, As, bs, qp, 1e-12);

    PolyMean pm;
    pm.degree = d;
    pm.beta = qp.x;
    pm.lambda_reg = lambda_reg;
    pm.eps_s_max = eps_s_max;

    double min_slack = std::numeric_limits<double>::infinity();
    Eigen::Index worst = -1;
    for (Eigen::Index r = 0; r < rows.A.rows(); ++r) {
        const double s = rows.A.row(r).dot(pm.beta) - rows.lower[r];
        if (s < min_slack) {
            min_slack = s;
            worst = r;
        }
    }
    if (rows.A.rows() == 0) min_slack = 0.0;
    if (min_slack < -1e-8) {
        const Point& v = virtual_points[static_cast<std::size_t>(rows.virtual_index[static_cast<std::size_t>(worst)])];
        std::ostringstream msg;
        msg << "constrained mean violates a derivative constraint by " << -min_slack << " at virtual point ("
            << v[0] << ", " << v[1] << ", " << v[2] << ")";
        throw InfeasibleError(msg.str(), min_slack);
    }
    if (report) {
        report->active_constraints = static_cast<int>(qp.active.size());
        report->min_slack = min_slack;
        report->polished = polished;
    }
    return pm;
}

} // namespace cgpr
