#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cgpr/dataset.hpp"
#include "cgpr/errors.hpp"
#include "cgpr/gp.hpp"

namespace cgpr {

struct AxisSpec {
    double min = 0.0;
    double max = 0.0;
    int count = 2;
};

inline std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        v[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    return v;
}

/// Tensor grid of virtual derivative points in normalized input space,
/// row-major with eps_v outermost and p innermost.
struct VirtualGrid {
    std::vector<Point> points;
    std::array<AxisSpec, 3> spec{};
};

inline VirtualGrid make_virtual_grid(const std::array<AxisSpec, 3>& spec) {
    for (const auto& a : spec)
        if (a.count < 2) throw ConfigError("virtual grid needs at least 2 points per axis");
    VirtualGrid g;
    g.spec = spec;
    const auto ev = linspace(spec[0].min, spec[0].max, spec[0].count);
    const auto es = linspace(spec[1].min, spec[1].max, spec[1].count);
    const auto pp = linspace(spec[2].min, spec[2].max, spec[2].count);
    g.points.reserve(ev.size() * es.size() * pp.size());
    for (double a : ev)
        for (double b : es)
            for (double c : pp) g.points.emplace_back(a, b, c);
    return g;
}

/// Grid spanning the normalized training bounding box, widened by
/// margin * range on both ends of every axis.
inline VirtualGrid make_virtual_grid(const Dataset& train, std::array<int, 3> counts, double margin) {
    if (!(margin >= 0.0 && margin <= 0.5)) throw ConfigError("virtual grid margin must lie in [0, 0.5]");
    if (train.empty()) throw EmptyInputError("make_virtual_grid: empty training set");
    static const char* names[] = {"eps_v", "eps_s", "p"};
    const Eigen::MatrixXd Z = train.normalized_inputs();
    std::array<AxisSpec, 3> spec{};
    for (int j = 0; j < 3; ++j) {
        const double lo = Z.col(j).minCoeff(), hi = Z.col(j).maxCoeff();
        if (!(hi > lo)) throw DataError(std::string("degenerate feature range for ") + names[j]);
        const double pad = margin * (hi - lo);
        spec[static_cast<std::size_t>(j)] = {lo - pad, hi + pad, counts[static_cast<std::size_t>(j)]};
    }
    return make_virtual_grid(spec);
}

/// Per-cell constraint satisfaction over an eps_s x eps_v slice. Matrices are
/// indexed (eps_v index, eps_s index). Axes and pressures are raw units.
struct ViolationMap {
    std::vector<double> eps_v_axis;
    std::vector<double> eps_s_axis;
    std::vector<double> p_samples;
    double eta = 0.025;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mean_ok;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> conf95_ok;
    Eigen::MatrixXd min_mu_dp;   // normalized units, worst over p
    Eigen::MatrixXd min_margin;  // normalized units, worst over p
    std::string p_policy;

    double satisfied_fraction(bool confidence_level) const {
        const auto& m = confidence_level ? conf95_ok : mean_ok;
        if (m.size() == 0) return 0.0;
        return static_cast<double>(m.count()) / static_cast<double>(m.size());
    }
};

/// For each (eps_s, eps_v) cell: mean_ok iff min_p mu_dp >= 0, conf95_ok iff
/// min_p (mu_dp - z_{1-eta} sigma_dp) >= 0, both taken over `p_samples`.
inline ViolationMap violation_map(const GpModel& m, const std::vector<double>& eps_s_axis,
                                  const std::vector<double>& eps_v_axis, const std::vector<double>& p_samples,
                                  double eta) {
    if (eps_s_axis.empty() || eps_v_axis.empty() || p_samples.empty())
        throw ConfigError("violation_map: axes and pressure samples must be nonempty");
    const double z = chance_quantile(eta);
    const auto& norm = m.normalization();
    ViolationMap vm;
    vm.eps_v_axis = eps_v_axis;
    vm.eps_s_axis = eps_s_axis;
    vm.p_samples = p_samples;
    vm.eta = eta;
    const auto nv = static_cast<Eigen::Index>(eps_v_axis.size());
    const auto ns = static_cast<Eigen::Index>(eps_s_axis.size());
    vm.mean_ok.resize(nv, ns);
    vm.conf95_ok.resize(nv, ns);
    vm.min_mu_dp.resize(nv, ns);
    vm.min_margin.resize(nv, ns);
    {
        std::ostringstream pol;
        pol << "worst-case over " << p_samples.size() << " pressures in [" << p_samples.front() << ", "
            << p_samples.back() << "] MPa";
        vm.p_policy = pol.str();
    }
    const auto np = static_cast<Eigen::Index>(p_samples.size());
    Eigen::MatrixXd Z(ns * np, 3);
    for (Eigen::Index i = 0; i < nv; ++i) {
        Eigen::Index r = 0;
        for (Eigen::Index j = 0; j < ns; ++j)
            for (Eigen::Index k = 0; k < np; ++k)
                Z.row(r++) = norm.to_normalized(Point(eps_v_axis[static_cast<std::size_t>(i)],
                                                      eps_s_axis[static_cast<std::size_t>(j)],
                                                      p_samples[static_cast<std::size_t>(k)]))
                                 .transpose();
        const auto stats = m.deriv_dp_stats_batch(Z);
        r = 0;
        for (Eigen::Index j = 0; j < ns; ++j) {
            double mu_min = std::numeric_limits<double>::infinity();
            double margin_min = std::numeric_limits<double>::infinity();
            for (Eigen::Index k = 0; k < np; ++k, ++r) {
                const auto& s = stats[static_cast<std::size_t>(r)];
                mu_min = std::min(mu_min, s.mu_dp);
                margin_min = std::min(margin_min, s.mu_dp - z * s.sigma_dp);
            }
            vm.min_mu_dp(i, j) = mu_min;
            vm.min_margin(i, j) = margin_min;
            vm.mean_ok(i, j) = mu_min >= 0.0;
            vm.conf95_ok(i, j) = margin_min >= 0.0;
        }
    }
    return vm;
}

/// Default slice: `n` points per strain axis over the training range and
/// `n_p` evenly spaced pressures over the training pressure range.
inline ViolationMap default_violation_map(const GpModel& m, const Dataset& train, int n = 25, int n_p = 9,
                                          double eta = 0.025) {
    const Eigen::MatrixXd R = train.raw_inputs();
    const auto ev = linspace(R.col(kEpsV).minCoeff(), R.col(kEpsV).maxCoeff(), n);
    const auto es = linspace(R.col(kEpsS).minCoeff(), R.col(kEpsS).maxCoeff(), n);
    const auto pp = linspace(R.col(kPressure).minCoeff(), R.col(kPressure).maxCoeff(), n_p);
    return violation_map(m, es, ev, pp, eta);
}

inline void write_violation_csv(const ViolationMap& vm, std::ostream& os) {
    os << "# p_policy: " << vm.p_policy << ", eta: " << vm.eta << "\n";
    os << "eps_s,eps_v,mean_ok,conf95_ok\n";
    std::ostringstream line;
    line.precision(10);
    for (std::size_t i = 0; i < vm.eps_v_axis.size(); ++i)
        for (std::size_t j = 0; j < vm.eps_s_axis.size(); ++j) {
            line.str({});
            line << vm.eps_s_axis[j] << ',' << vm.eps_v_axis[i] << ','
                 << (vm.mean_ok(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ? 1 : 0) << ','
                 << (vm.conf95_ok(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ? 1 : 0) << '\n';
            os << line.str();
        }
}

/// Heat map over eps_s (x) and eps_v (y). Blue cells satisfy the constraint,
/// red cells violate it, and cells with |mu_dp| < white_band are white.
/// `confidence_level` selects the 95% map instead of the mean map.
inline void write_violation_svg(const ViolationMap& vm, bool confidence_level, std::ostream& os,
                                double white_band = 1e-3) {
    const int cell = 16, pad = 60;
    const int nx = static_cast<int>(vm.eps_s_axis.size()), ny = static_cast<int>(vm.eps_v_axis.size());
    const int w = nx * cell + 2 * pad, h = ny * cell + 2 * pad;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<title>" << (confidence_level ? "95% level" : "mean level") << " dGamma/dp >= 0; "
       << vm.p_policy << "</title>\n";
    for (int i = 0; i < ny; ++i)
        for (int j = 0; j < nx; ++j) {
            const double mu = vm.min_mu_dp(i, j);
            const bool ok = confidence_level ? vm.conf95_ok(i, j) : vm.mean_ok(i, j);
            const char* color = std::abs(mu) < white_band ? "#ffffff" : (ok ? "#2b6cb0" : "#c53030");
            // eps_v grows upward
            os << "<rect x=\"" << pad + j * cell << "\" y=\"" << pad + (ny - 1 - i) * cell << "\" width=\""
               << cell << "\" height=\"" << cell << "\" fill=\"" << color << "\"/>\n";
        }
    os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << nx * cell << "\" height=\"" << ny * cell
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 20 << "\" text-anchor=\"middle\" font-size=\"14\">eps_s ["
       << vm.eps_s_axis.front() << ", " << vm.eps_s_axis.back() << "]</text>\n";
    os << "<text x=\"20\" y=\"" << h / 2 << "\" font-size=\"14\" transform=\"rotate(-90 20 " << h / 2
       << ")\" text-anchor=\"middle\">eps_v [" << vm.eps_v_axis.front() << ", " << vm.eps_v_axis.back()
       << "]</text>\n";
    os << "</svg>\n";
}

struct ThermoState {
    Point x;            // raw (eps_v, eps_s, p), p compression-positive
    double sqrt3J2 = 0; // MPa
};

struct ThermoResult {
    double margin = 0.0;
    bool ok = true;
};

/// dGamma/dp of the model mean in physical units (MPa/MPa) at a raw point.
inline double physical_mean_dp(const GpModel& m, const Point& x_raw) {
    const auto& n = m.normalization();
    const double slope = eval_mean_dp(m.mean(), n.to_normalized(x_raw));
    return slope * n.output.scale / n.input[kPressure].scale;
}

/// Plastic dissipation margin sqrt(3 J2) - varpi * dGamma/dp * p per state.
inline std::vector<ThermoResult> dissipation_check(const GpModel& m, const std::vector<ThermoState>& states,
                                                   double varpi) {
    if (!(varpi >= 0.0)) throw ConfigError("varpi must be >= 0");
    std::vector<ThermoResult> out;
    out.reserve(states.size());
    for (const auto& s : states) {
        const double gp = physical_mean_dp(m, s.x);
        const double margin = s.sqrt3J2 - varpi * gp * s.x[kPressure];
        out.push_back({margin, margin >= 0.0});
    }
    return out;
}

} // namespace cgpr
