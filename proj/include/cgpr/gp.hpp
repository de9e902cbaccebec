#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "cgpr/cobyla.hpp"
#include "cgpr/dataset.hpp"
#include "cgpr/errors.hpp"
#include "cgpr/kernel.hpp"
#include "cgpr/normal.hpp"
#include "cgpr/polymean.hpp"

namespace cgpr {

/// Polynomial mean, or the zero mean when empty. Mean values are in
/// normalized output units.
using MeanFunction = std::optional<PolyMean>;

inline double eval_mean(const MeanFunction& m, const Point& z) { return m ? mean_value(*m, z) : 0.0; }
inline double eval_mean_dp(const MeanFunction& m, const Point& z) { return m ? mean_dp(*m, z) : 0.0; }

inline Eigen::VectorXd eval_mean(const MeanFunction& m, const Eigen::MatrixXd& Z) {
    Eigen::VectorXd out(Z.rows());
    for (Eigen::Index i = 0; i < Z.rows(); ++i) out[i] = eval_mean(m, Point(Z.row(i).transpose()));
    return out;
}

inline JitterPolicy value_jitter(const Hyperparameters& th) {
    return {th.sigma_f * th.sigma_f, false};
}

inline JitterPolicy deriv_jitter(const Hyperparameters& th) {
    return {kernel_diagonal(th, KernelKind::deriv_pp), false};
}

/// Negative log marginal likelihood of targets y under mean `mean` and
/// kernel `th`: 1/2 r^T (K + sn^2 I)^{-1} r + 1/2 log|K + sn^2 I| + n/2 log 2 pi.
inline double nlml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const MeanFunction& mean,
                   const Hyperparameters& th) {
    th.validate();
    if (X.rows() < 1 || X.rows() != y.size()) throw DomainError("nlml: need n >= 1 inputs matching targets");
    const Eigen::VectorXd r = y - eval_mean(mean, X);
    Eigen::MatrixXd K = kernel_matrix(X, th, KernelKind::value);
    K.diagonal().array() += th.sigma_n * th.sigma_n;
    const auto f = factorize_spd(K, value_jitter(th));
    const Eigen::VectorXd v = f.half_solve(r);
    const double n = static_cast<double>(X.rows());
    return 0.5 * v.squaredNorm() + 0.5 * f.log_det() + 0.5 * n * std::log(2.0 * std::numbers::pi);
}

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
};

struct DerivStats {
    double mu_dp = 0.0;
    double sigma_dp = 0.0;
};

/// Trained surrogate. Inputs and targets are stored in normalized units;
/// `predict` converts at the boundary.
class GpModel {
public:
    GpModel() = default;

    GpModel(Eigen::MatrixXd train_X, Eigen::VectorXd train_gamma, Hyperparameters th, MeanFunction mean,
            Normalization normalization)
        : X_(std::move(train_X)), gamma_(std::move(train_gamma)), th_(th), mean_(std::move(mean)),
          norm_(normalization) {
        rebuild();
    }

    void set_hyperparameters(const Hyperparameters& th) {
        th_ = th;
        rebuild();
    }

    const Eigen::MatrixXd& train_X() const { return X_; }
    /// Normalized Gamma targets.
    const Eigen::VectorXd& train_gamma() const { return gamma_; }
    /// Residual targets y - mu(X) the GP is conditioned on.
    const Eigen::VectorXd& train_y() const { return resid_; }
    const Hyperparameters& hyperparameters() const { return th_; }
    const MeanFunction& mean() const { return mean_; }
    const Normalization& normalization() const { return norm_; }
    const Eigen::VectorXd& alpha() const { return alpha_; }
    const SpdFactor& value_factor() const { return chol_; }
    const SpdFactor& deriv_factor() const { return dchol_; }
    Eigen::Index size() const { return X_.rows(); }

    bool constrained = false;
    double eta = 0.025;
    std::vector<Point> virtual_points; // normalized
    std::vector<double> train_levels;

    /// Posterior in normalized units (mean includes mu(z)).
    Prediction predict_normalized(const Point& z) const {
        Eigen::MatrixXd Z(1, 3);
        Z.row(0) = z.transpose();
        const Eigen::VectorXd k = cross_kernel(X_, Z, th_, KernelKind::value).col(0);
        Prediction p;
        p.mean = eval_mean(mean_, z) + k.dot(alpha_);
        const double var = kernel_diagonal(th_, KernelKind::value) - chol_.half_solve(k).squaredNorm();
        p.variance = std::max(0.0, var);
        const double sd = std::sqrt(p.variance);
        p.ci95_low = p.mean - 1.96 * sd;
        p.ci95_high = p.mean + 1.96 * sd;
        return p;
    }

    /// Posterior at a raw input (eps_v, eps_s, p), in MPa / MPa^2.
    Prediction predict(const Point& x_raw) const {
        const auto pn = predict_normalized(norm_.to_normalized(x_raw));
        const auto& o = norm_.output;
        Prediction p;
        p.mean = o.inverse(pn.mean);
        p.variance = pn.variance * o.scale * o.scale;
        const double sd = std::sqrt(p.variance);
        p.ci95_low = p.mean - 1.96 * sd;
        p.ci95_high = p.mean + 1.96 * sd;
        return p;
    }

    /// Mean and standard deviation of dGamma/dp at a normalized point.
    DerivStats deriv_dp_stats(const Point& z) const {
        Eigen::MatrixXd Z(1, 3);
        Z.row(0) = z.transpose();
        return deriv_dp_stats_batch(Z).front();
    }

    std::vector<DerivStats> deriv_dp_stats_batch(const Eigen::MatrixXd& Z) const {
        const Eigen::MatrixXd Kx = cross_kernel(X_, Z, th_, KernelKind::deriv_pp);
        const Eigen::MatrixXd W = dchol_.half_solve(Kx);
        const double prior = kernel_diagonal(th_, KernelKind::deriv_pp);
        std::vector<DerivStats> out(static_cast<std::size_t>(Z.rows()));
        for (Eigen::Index j = 0; j < Z.rows(); ++j) {
            const double var = prior - W.col(j).squaredNorm();
            out[static_cast<std::size_t>(j)] = {eval_mean_dp(mean_, Z.row(j).transpose()), std::sqrt(std::max(0.0, var))};
        }
        return out;
    }

    double nlml() const {
        const double n = static_cast<double>(X_.rows());
        return 0.5 * chol_.half_solve(resid_).squaredNorm() + 0.5 * chol_.log_det() +
               0.5 * n * std::log(2.0 * std::numbers::pi);
    }

private:
    void rebuild() {
        th_.validate();
        if (X_.rows() < 1 || X_.cols() != 3 || gamma_.size() != X_.rows())
            throw DomainError("GpModel: training inputs must be n x 3 with n matching targets");
        resid_ = gamma_ - eval_mean(mean_, X_);
        Eigen::MatrixXd K = kernel_matrix(X_, th_, KernelKind::value);
        K.diagonal().array() += th_.sigma_n * th_.sigma_n;
        chol_ = factorize_spd(K, value_jitter(th_));
        alpha_ = chol_.solve(resid_);
        dchol_ = factorize_spd(kernel_matrix(X_, th_, KernelKind::deriv_pp), deriv_jitter(th_));
    }

    Eigen::MatrixXd X_;
    Eigen::VectorXd gamma_;
    Eigen::VectorXd resid_;
    Hyperparameters th_;
    MeanFunction mean_;
    Normalization norm_;
    SpdFactor chol_, dchol_;
    Eigen::VectorXd alpha_;
};

/// z_{1-eta}: one-sided quantile bounding P[dGamma/dp < 0] by eta.
inline double chance_quantile(double eta) {
    if (!(eta > 0.0 && eta < 0.5)) throw ConfigError("eta must lie in (0, 0.5)");
    return inv_norm_cdf(1.0 - eta);
}

inline double chance_constraint_margin(const DerivStats& s, double eta) {
    return s.mu_dp - chance_quantile(eta) * s.sigma_dp;
}

/// mu_dp(v) - z_{1-eta} sigma_dp(v); nonnegative iff P[dGamma/dp < 0 at v] <= eta.
inline double chance_constraint_margin(const GpModel& m, const Point& v) {
    return chance_constraint_margin(m.deriv_dp_stats(v), m.eta);
}

struct TrainOptions {
    int max_evals = 300;        // per start
    int starts = 5;             // th0 plus (starts - 1) seeded draws
    unsigned seed = 20240601u;
    double log_lower = std::log(1e-3);
    double log_upper = std::log(1e3);
    double rho_begin = 0.5;
    double rho_end = 1e-3;
    double margin_tol = 1e-6;
};

struct TrainReport {
    double nlml_initial = 0.0;
    double nlml_final = 0.0;
    double worst_margin = 0.0;  // over virtual points, at the returned theta
    int evaluations = 0;
    int feasible_starts = 0;
};

namespace detail {

struct HyperObjective {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& r;
    Eigen::MatrixXd V;              // virtual points, m x 3
    Eigen::VectorXd mu_dp;          // polynomial mean slope at each virtual point
    double z = 0.0;

    double operator()(const Eigen::VectorXd& logth, Eigen::VectorXd& c) const {
        const auto th = Hyperparameters::from_log(logth);
        double f;
        try {
            Eigen::MatrixXd K = kernel_matrix(X, th, KernelKind::value);
            K.diagonal().array() += th.sigma_n * th.sigma_n;
            const auto fac = factorize_spd(K, value_jitter(th));
            f = 0.5 * fac.half_solve(r).squaredNorm() + 0.5 * fac.log_det() +
                0.5 * static_cast<double>(X.rows()) * std::log(2.0 * std::numbers::pi);
        } catch (const NumericalError&) {
            f = std::numeric_limits<double>::infinity();
        }
        if (V.rows() > 0) {
            try {
                const auto dfac = factorize_spd(kernel_matrix(X, th, KernelKind::deriv_pp), deriv_jitter(th));
                const Eigen::MatrixXd W = dfac.half_solve(cross_kernel(X, V, th, KernelKind::deriv_pp));
                const double prior = kernel_diagonal(th, KernelKind::deriv_pp);
                for (Eigen::Index j = 0; j < V.rows(); ++j)
                    c[j] = mu_dp[j] - z * std::sqrt(std::max(0.0, prior - W.col(j).squaredNorm()));
            } catch (const NumericalError&) {
                c.setConstant(-std::numeric_limits<double>::infinity());
            }
        }
        return f;
    }
};

} // namespace detail

/// Fits theta by minimizing the NLML of the residuals y - mu(X) with a
/// derivative-free trust-region method in log-parameter space. In
/// constrained mode every virtual point must satisfy the chance constraint
/// margin >= -margin_tol at the returned theta.
inline GpModel train(const Dataset& train_set, const MeanFunction& mean, const Hyperparameters& th0,
                     bool constrained, double eta, const std::vector<Point>& virtual_points,
                     const TrainOptions& opt = {}, TrainReport* report = nullptr) {
    th0.validate();
    if (train_set.empty()) throw EmptyInputError("train: empty training set");
    if (constrained) {
        if (virtual_points.empty()) throw ConfigError("constrained training needs virtual points");
        chance_quantile(eta);
    }
    const Eigen::MatrixXd X = train_set.normalized_inputs();
    const Eigen::VectorXd y = train_set.normalized_gamma();
    const Eigen::VectorXd r = y - eval_mean(mean, X);

    detail::HyperObjective obj{X, r, Eigen::MatrixXd(0, 3), Eigen::VectorXd(0), 0.0};
    if (constrained) {
        obj.V.resize(static_cast<Eigen::Index>(virtual_points.size()), 3);
        obj.mu_dp.resize(obj.V.rows());
        for (std::size_t i = 0; i < virtual_points.size(); ++i) {
            obj.V.row(static_cast<Eigen::Index>(i)) = virtual_points[i].transpose();
            obj.mu_dp[static_cast<Eigen::Index>(i)] = eval_mean_dp(mean, virtual_points[i]);
        }
        obj.z = chance_quantile(eta);
    }

    CobylaOptions co;
    co.rho_begin = opt.rho_begin;
    co.rho_end = opt.rho_end;
    co.max_evals = opt.max_evals;
    co.feas_tol = opt.margin_tol;
    co.lower = Eigen::VectorXd::Constant(5, opt.log_lower);
    co.upper = Eigen::VectorXd::Constant(5, opt.log_upper);

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(th0.to_log().cwiseMax(co.lower).cwiseMin(co.upper));
    std::mt19937 rng(opt.seed);
    std::uniform_real_distribution<double> ell(std::log(0.1), std::log(10.0));
    std::uniform_real_distribution<double> sf(std::log(0.1), std::log(3.0));
    std::uniform_real_distribution<double> sn(std::log(1e-3), std::log(0.3));
    for (int s = 1; s < opt.starts; ++s) {
        Eigen::VectorXd v(5);
        v << ell(rng), ell(rng), ell(rng), sf(rng), sn(rng);
        starts.push_back(v);
    }

    TrainReport rep;
    {
        Eigen::VectorXd c0(obj.V.rows());
        rep.nlml_initial = obj(starts.front(), c0);
    }
    const Eigen::Index m = obj.V.rows();
    std::optional<CobylaResult> best;
    CobylaResult least;
    bool have_least = false;
    for (const auto& x0 : starts) {
        auto res = cobyla_minimize(std::cref(obj), m, x0, co);
        rep.evaluations += res.evals;
        if (res.feasible && std::isfinite(res.f)) {
            ++rep.feasible_starts;
            if (!best || res.f < best->f) best = res;
        } else if (!have_least || res.violation < least.violation) {
            least = res;
            have_least = true;
        }
    }
    if (!best) {
        std::ostringstream msg;
        msg << "hyperparameter training found no feasible point; worst chance-constraint margin "
            << -least.violation;
        throw InfeasibleError(msg.str(), -least.violation);
    }

    GpModel model(X, y, Hyperparameters::from_log(best->x), mean, train_set.normalization);
    model.constrained = constrained;
    model.eta = eta;
    model.virtual_points = constrained ? virtual_points : std::vector<Point>{};
    model.train_levels = train_set.levels();

    rep.nlml_final = model.nlml();
    rep.worst_margin = m > 0 ? best->c.minCoeff() : 0.0;
    if (report) *report = rep;
    return model;
}

} // namespace cgpr
