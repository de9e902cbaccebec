#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cgpr/errors.hpp"

namespace cgpr {

namespace detail {

inline void check_pair(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref, const char* what) {
    if (pred.size() != ref.size() || ref.size() < 2)
        throw DomainError(std::string(what) + ": need equal-length vectors with at least 2 entries");
}

} // namespace detail

/// RMSE normalized by the range of the reference.
inline double nrmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
    detail::check_pair(pred, ref, "nrmse");
    const double range = ref.maxCoeff() - ref.minCoeff();
    if (!(range > 0.0)) throw DomainError("nrmse: constant reference, normalization undefined");
    const double rmse = std::sqrt((pred - ref).squaredNorm() / static_cast<double>(ref.size()));
    return rmse / range;
}

/// Coefficient of determination; not floored at zero.
inline double r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
    detail::check_pair(pred, ref, "r2");
    const double ss_tot = (ref.array() - ref.mean()).square().sum();
    if (!(ss_tot > 0.0)) throw DomainError("r2: constant reference");
    return 1.0 - (ref - pred).squaredNorm() / ss_tot;
}

enum class Tier : int { excellent = 0, good = 1, acceptable = 2, poor = 3 };

inline std::string to_string(Tier t) {
    switch (t) {
    case Tier::excellent: return "excellent";
    case Tier::good: return "good";
    case Tier::acceptable: return "acceptable";
    case Tier::poor: return "poor";
    }
    return "poor";
}

inline const char* tier_color(Tier t) {
    switch (t) {
    case Tier::excellent: return "green";
    case Tier::good: return "yellow";
    case Tier::acceptable: return "orange";
    case Tier::poor: return "red";
    }
    return "red";
}

/// Band of each metric separately; the worse band wins.
///   nrmse: <2% | [2%,5%] | (5%,12%] | >12%
///   r2:    >0.98 | [0.85,0.98] | [0.7,0.85) | <0.7
inline Tier tier(double nrmse_value, double r2_value) {
    Tier by_e;
    if (nrmse_value < 0.02) by_e = Tier::excellent;
    else if (nrmse_value <= 0.05) by_e = Tier::good;
    else if (nrmse_value <= 0.12) by_e = Tier::acceptable;
    else by_e = Tier::poor;
    Tier by_r;
    if (r2_value > 0.98) by_r = Tier::excellent;
    else if (r2_value >= 0.85) by_r = Tier::good;
    else if (r2_value >= 0.7) by_r = Tier::acceptable;
    else by_r = Tier::poor;
    if (std::isnan(nrmse_value) || std::isnan(r2_value)) return Tier::poor;
    return static_cast<Tier>(std::max(static_cast<int>(by_e), static_cast<int>(by_r)));
}

struct LevelScore {
    double confinement = 0.0;
    double nrmse = 0.0;
    double r2 = 0.0;
    Tier tier = Tier::poor;
};

struct EvalReport {
    std::vector<LevelScore> per_level;
    double mean_nrmse = 0.0;
    double mean_r2 = 0.0;

    void add(double confinement, const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
        LevelScore s;
        s.confinement = confinement;
        s.nrmse = nrmse(pred, ref);
        s.r2 = r2(pred, ref);
        s.tier = tier(s.nrmse, s.r2);
        per_level.push_back(s);
        finalize();
    }

    void finalize() {
        mean_nrmse = mean_r2 = 0.0;
        if (per_level.empty()) return;
        for (const auto& s : per_level) {
            mean_nrmse += s.nrmse;
            mean_r2 += s.r2;
        }
        mean_nrmse /= static_cast<double>(per_level.size());
        mean_r2 /= static_cast<double>(per_level.size());
    }
};

inline void write_report_csv(const EvalReport& rep, std::ostream& os) {
    os << "confinement,nrmse,r2,tier\n";
    char buf[160];
    for (const auto& s : rep.per_level) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%s\n", s.confinement, s.nrmse, s.r2,
                      to_string(s.tier).c_str());
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "mean,%.10g,%.10g,\n", rep.mean_nrmse, rep.mean_r2);
    os << buf;
}

/// One row per confinement: P_c, NRMSE in percent, R^2 and a color tag.
inline void write_report_table(const EvalReport& rep, std::ostream& os, const std::string& title = "") {
    char buf[160];
    if (!title.empty()) os << title << '\n';
    std::snprintf(buf, sizeof buf, "%8s %10s %10s  %s\n", "Pc[MPa]", "NRMSE[%]", "R2", "tier");
    os << buf;
    for (const auto& s : rep.per_level) {
        std::snprintf(buf, sizeof buf, "%8g %10.2f %10.4f  [%s] %s\n", s.confinement, 100.0 * s.nrmse, s.r2,
                      tier_color(s.tier), to_string(s.tier).c_str());
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "%8s %10.2f %10.4f\n", "mean", 100.0 * rep.mean_nrmse, rep.mean_r2);
    os << buf;
}

} // namespace cgpr
