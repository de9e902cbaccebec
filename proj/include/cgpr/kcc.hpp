#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cgpr/dataset.hpp"
#include "cgpr/errors.hpp"

namespace cgpr {

// Single-element KCC concrete model for axisymmetric triaxial compression.
// Scalars are compression-positive: p = (sig_a + 2 sig_r)/3, q = sig_a - sig_r,
// and q = sqrt(3 J2) on these paths. Theta(J3) = 1 and r_f = 1 throughout.

enum class Surface : int { yield = 0, max = 1, residual = 2 };

struct KccParams {
    // a[i] = {a0, a1, a2} for i in {yield, max, residual}
    std::array<std::array<double, 3>, 3> a{{{6.0, 0.75, 0.004}, {12.0, 0.45, 0.002}, {0.0, 0.45, 0.005}}};
    double b1 = 0.5;
    double b2 = 1.0;
    double f_t = 3.5;
    double lambda_m = 3e-4;
    std::vector<std::pair<double, double>> eta_table{{0.0, 0.0}, {3e-4, 1.0}, {3e-3, 0.05}};
    double varpi = 0.5;
    double E = 30000.0;
    double nu = 0.2;
    double r_f = 1.0;

    double bulk() const { return E / (3.0 * (1.0 - 2.0 * nu)); }
    double shear() const { return E / (2.0 * (1.0 + nu)); }

    static std::vector<std::pair<double, double>> default_table(double lambda_m) {
        return {{0.0, 0.0}, {lambda_m, 1.0}, {10.0 * lambda_m, 0.05}};
    }

    void validate() const {
        static const char* names[] = {"yield", "max", "residual"};
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                if (!std::isfinite(a[i][k])) throw ConfigError(std::string("a.") + names[i] + " must be finite");
        for (int i = 0; i < 3; ++i)
            if (!(a[i][1] > 0.0)) throw ConfigError(std::string("a.") + names[i] + "[1] must be > 0");
        if (!(E > 0.0)) throw ConfigError("E must be > 0");
        if (!(nu > 0.0 && nu < 0.5)) throw ConfigError("nu must lie in (0, 0.5)");
        if (!(f_t > 0.0)) throw ConfigError("f_t must be > 0");
        if (!(b1 >= 0.0) || !(b2 >= 0.0)) throw ConfigError("b1 and b2 must be >= 0");
        if (r_f != 1.0) throw ConfigError("r_f must be 1");
        if (!(varpi >= 0.0)) throw ConfigError("varpi must be >= 0");
        if (!(lambda_m > 0.0)) throw ConfigError("lambda_m must be > 0");
        if (eta_table.size() < 2) throw ConfigError("eta_table needs at least 2 knots");
        if (eta_table.front().first != 0.0 || eta_table.front().second != 0.0)
            throw ConfigError("eta_table must start at (0, 0)");
        for (std::size_t k = 0; k < eta_table.size(); ++k) {
            const auto [l, e] = eta_table[k];
            if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("eta_table[" + std::to_string(k) + "] eta outside [0, 1]");
            if (k > 0 && !(l > eta_table[k - 1].first))
                throw ConfigError("eta_table[" + std::to_string(k) + "] lambda not strictly increasing");
        }
        bool has_peak = false;
        for (const auto& [l, e] : eta_table)
            if (l == lambda_m && e == 1.0) has_peak = true;
        if (!has_peak) throw ConfigError("eta_table must contain the knot (lambda_m, 1)");
    }
};

/// sigma_i(p) = a0 + p / (a1 + a2 p)
inline double strength_surface(Surface i, double p, const KccParams& k) {
    const auto& c = k.a[static_cast<std::size_t>(i)];
    const double den = c[1] + c[2] * p;
    if (!(den > 0.0)) throw DomainError("strength surface pole: a1 + a2 p <= 0 at p = " + std::to_string(p));
    return c[0] + p / den;
}

inline double strength_surface_dp(Surface i, double p, const KccParams& k) {
    const auto& c = k.a[static_cast<std::size_t>(i)];
    const double den = c[1] + c[2] * p;
    if (!(den > 0.0)) throw DomainError("strength surface pole: a1 + a2 p <= 0 at p = " + std::to_string(p));
    return c[1] / (den * den);
}

/// Piecewise-linear in the table, clamped at both ends.
inline double eta_of_lambda(double lambda, const std::vector<std::pair<double, double>>& table) {
    if (table.empty()) return 0.0;
    if (lambda <= table.front().first) return table.front().second;
    for (std::size_t k = 1; k < table.size(); ++k) {
        if (lambda <= table[k].first) {
            const auto [l0, e0] = table[k - 1];
            const auto [l1, e1] = table[k];
            return e0 + (e1 - e0) * (lambda - l0) / (l1 - l0);
        }
    }
    return table.back().second;
}

inline double gamma_kcc(double p, double lambda, const KccParams& k) {
    const double eta = eta_of_lambda(lambda, k.eta_table);
    const double sm = strength_surface(Surface::max, p, k);
    const Surface other = lambda <= k.lambda_m ? Surface::yield : Surface::residual;
    const double so = strength_surface(other, p, k);
    return eta * (sm - so) + so;
}

/// dGamma/dp at fixed lambda.
inline double gamma_kcc_dp(double p, double lambda, const KccParams& k) {
    const double eta = eta_of_lambda(lambda, k.eta_table);
    const double dm = strength_surface_dp(Surface::max, p, k);
    const Surface other = lambda <= k.lambda_m ? Surface::yield : Surface::residual;
    const double dother = strength_surface_dp(other, p, k);
    return eta * (dm - dother) + dother;
}

/// h(p) = [1 + p/(r_f f_t)]^{-b} / r_f, with b = b1 for p >= 0 and b2 otherwise.
inline double damage_rate_coeff(double p, const KccParams& k) {
    const double base = 1.0 + p / (k.r_f * k.f_t);
    if (!(base > 0.0)) throw DomainError("damage rate: 1 + p/(r_f f_t) <= 0 at p = " + std::to_string(p));
    return std::pow(base, -(p >= 0.0 ? k.b1 : k.b2)) / k.r_f;
}

struct PathState {
    double eps_a = 0.0, eps_r = 0.0;
    double sig_a = 0.0, sig_r = 0.0;
    double lambda = 0.0;
    double epsp_a = 0.0, epsp_r = 0.0;

    double p() const { return (sig_a + 2.0 * sig_r) / 3.0; }
    double q() const { return sig_a - sig_r; }
};

struct StepInfo {
    bool plastic = false;
    double dmu = 0.0;           // plastic multiplier increment
    double gamma = 0.0;         // Gamma(p, lambda) at the end of the step
    double gamma_dp = 0.0;      // dGamma/dp used in the flow direction
    double dissipation = 0.0;   // sigma : d eps^p = (q - varpi Gamma_p p) dmu
};

struct Simulation {
    std::vector<PathState> states;  // states[0] is the hydrostatic start
    std::vector<StepInfo> steps;    // steps[k] leads to states[k + 1]
    std::vector<TriaxialRecord> records(double confinement) const {
        std::vector<TriaxialRecord> out;
        out.reserve(states.size());
        for (const auto& s : states) out.push_back({s.eps_a, s.eps_r, s.sig_a, s.sig_r, confinement});
        return out;
    }
};

namespace detail {

class TriaxialIntegrator {
public:
    explicit TriaxialIntegrator(const KccParams& k) : k_(k), K_(k.bulk()), G_(k.shear()) {}

    /// Advances `s` by an axial strain increment at constant radial stress,
    /// bisecting the increment when the return mapping does not converge.
    void advance(PathState& s, double deps_a, StepInfo& info) { advance_rec(s, deps_a, 0, info); }

private:
    static constexpr int kMaxDepth = 30;
    static constexpr int kMaxIter = 50;

    void advance_rec(PathState& s, double deps_a, int depth, StepInfo& info) {
        PathState next;
        StepInfo sub;
        if (try_step(s, deps_a, next, sub)) {
            accumulate(info, sub);
            s = next;
            return;
        }
        if (depth >= kMaxDepth) {
            std::ostringstream msg;
            msg.precision(12);
            msg << "return mapping failed below minimum step: eps_a=" << s.eps_a << " eps_r=" << s.eps_r
                << " sig_a=" << s.sig_a << " sig_r=" << s.sig_r << " lambda=" << s.lambda
                << " deps_a=" << deps_a;
            throw ConvergenceError(msg.str());
        }
        advance_rec(s, 0.5 * deps_a, depth + 1, info);
        advance_rec(s, 0.5 * deps_a, depth + 1, info);
    }

    static void accumulate(StepInfo& into, const StepInfo& sub) {
        into.plastic = into.plastic || sub.plastic;
        into.dmu += sub.dmu;
        into.dissipation += sub.dissipation;
        into.gamma = sub.gamma;
        if (sub.plastic) into.gamma_dp = sub.gamma_dp;
    }

    // Trial response to (deps_a, dmu) with flow slope gp held fixed.
    struct Trial {
        double deps_r, q, p, lambda;
        double depsp_a, depsp_r;
    };

    Trial response(const PathState& s, double deps_a, double dmu, double gp) const {
        const double w = k_.varpi * gp;
        Trial t;
        t.deps_r = ((2.0 * G_ / 3.0 - K_) * deps_a - (G_ + K_ * w) * dmu) / (2.0 * K_ + 2.0 * G_ / 3.0);
        t.q = s.q() + 2.0 * G_ * (deps_a - t.deps_r - 1.5 * dmu);
        t.p = s.sig_r + t.q / 3.0;
        t.depsp_a = dmu - w * dmu / 3.0;
        t.depsp_r = -0.5 * dmu - w * dmu / 3.0;
        const double ebar = std::sqrt(2.0 / 3.0 * (t.depsp_a * t.depsp_a + 2.0 * t.depsp_r * t.depsp_r));
        t.lambda = s.lambda + damage_rate_coeff(t.p, k_) * ebar;
        return t;
    }

    bool try_step(const PathState& s, double deps_a, PathState& out, StepInfo& info) const {
        const Trial el = response(s, deps_a, 0.0, 0.0);
        const double g_el = gamma_kcc(el.p, s.lambda, k_);
        if (el.q <= g_el) {
            out = s;
            commit(out, deps_a, el);
            info = {};
            info.gamma = g_el;
            return true;
        }
        const double gp = gamma_kcc_dp(el.p, s.lambda, k_);
        auto resid = [&](double dmu, Trial& t) {
            t = response(s, deps_a, dmu, gp);
            return t.q - gamma_kcc(t.p, t.lambda, k_);
        };
        // bracket: R(0) > 0, grow hi until R(hi) < 0
        Trial t;
        double lo = 0.0, hi = std::max((el.q - g_el) / (3.0 * G_), 1e-16);
        double r_hi = resid(hi, t);
        for (int k = 0; r_hi > 0.0; ++k) {
            if (k > 60) return false;
            lo = hi;
            hi *= 2.0;
            r_hi = resid(hi, t);
        }
        double x = hi;
        double r = r_hi;
        for (int it = 0; it < kMaxIter; ++it) {
            const double gam = t.q - r;
            if (std::abs(r) <= 1e-8 * std::abs(gam)) {
                out = s;
                commit(out, deps_a, t);
                info.plastic = true;
                info.dmu = x;
                info.gamma = gam;
                info.gamma_dp = gp;
                info.dissipation = (t.q - k_.varpi * gp * t.p) * x;
                return true;
            }
            if (r > 0.0) lo = x;
            else hi = x;
            const double h = std::max(1e-8 * x, 1e-18);
            Trial tp;
            const double slope = (resid(x + h, tp) - r) / h;
            double xn = slope != 0.0 ? x - r / slope : 0.5 * (lo + hi);
            if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
            x = xn;
            r = resid(x, t);
        }
        return false;
    }

    void commit(PathState& s, double deps_a, const Trial& t) const {
        s.eps_a += deps_a;
        s.eps_r += t.deps_r;
        s.epsp_a += t.depsp_a;
        s.epsp_r += t.depsp_r;
        s.sig_a = s.sig_r + t.q;
        s.lambda = std::max(s.lambda, t.lambda);
    }

    const KccParams& k_;
    double K_, G_;
};

} // namespace detail

/// Hydrostatic state at confinement Pc (elastic).
inline PathState hydrostatic_state(double Pc, const KccParams& k) {
    PathState s;
    s.sig_a = s.sig_r = Pc;
    s.eps_a = s.eps_r = Pc / (3.0 * k.bulk());
    return s;
}

/// Drives the axial strain through the given increments at constant radial
/// stress Pc, starting from the hydrostatic state.
inline Simulation simulate_axial_path(double Pc, const std::vector<double>& deps_a, const KccParams& k) {
    k.validate();
    if (!(Pc >= 0.0)) throw ConfigError("confinement must be >= 0");
    Simulation sim;
    sim.states.push_back(hydrostatic_state(Pc, k));
    detail::TriaxialIntegrator integ(k);
    PathState s = sim.states.back();
    for (double d : deps_a) {
        StepInfo info;
        integ.advance(s, d, info);
        sim.states.push_back(s);
        sim.steps.push_back(info);
    }
    return sim;
}

/// Shear phase of a triaxial test: axial strain grows by eps_a_max beyond
/// the hydrostatic state in n_steps equal increments. Returns n_steps + 1
/// states, the first being hydrostatic.
inline Simulation simulate_triaxial_path(double Pc, double eps_a_max, int n_steps, const KccParams& k) {
    if (n_steps < 10) throw ConfigError("n_steps must be >= 10");
    if (!(eps_a_max > 0.0)) throw ConfigError("eps_a_max must be > 0");
    return simulate_axial_path(Pc, std::vector<double>(static_cast<std::size_t>(n_steps), eps_a_max / n_steps), k);
}

inline std::vector<TriaxialRecord> simulate_triaxial(double Pc, double eps_a_max, int n_steps, const KccParams& k) {
    return simulate_triaxial_path(Pc, eps_a_max, n_steps, k).records(Pc);
}

} // namespace cgpr
