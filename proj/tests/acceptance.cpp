// Acceptance run: one PASS/FAIL line per criterion. Details and every
// intermediate artifact land under --work.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgpr/cgpr.hpp"

using namespace cgpr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

Outcome kernel_fd() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> u(-2.0, 2.0), le(std::log(0.2), std::log(5.0)), ls(std::log(0.3),
                                                                                              std::log(3.0));
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        Hyperparameters th;
        th.ell = {std::exp(le(rng)), std::exp(le(rng)), std::exp(le(rng))};
        th.sigma_f = std::exp(ls(rng));
        th.sigma_n = 0.1;
        const Point x(u(rng), u(rng), u(rng)), y(u(rng), u(rng), u(rng));
        // mixed central difference in x_p and x'_p, one Richardson step
        auto k = [&](double a, double b) {
            Point xa = x, yb = y;
            xa[2] += a;
            yb[2] += b;
            return k_se(xa, yb, th);
        };
        auto mixed = [&](double h) { return (k(h, h) - k(h, -h) - k(-h, h) + k(-h, -h)) / (4.0 * h * h); };
        const double h = 1e-2 * th.ell[2];
        const double fd = (4.0 * mixed(0.5 * h) - mixed(h)) / 3.0;
        const double an = dkernel_pp(x, y, th);
        // K' crosses zero at |dp| = ell_p; relative error is taken against
        // max(|K'|, 1e-3 sigma_f^2 / ell_p^2) so the zero crossing stays finite
        const double scale = std::max(std::abs(an), 1e-3 * kernel_diagonal(th, KernelKind::deriv_pp));
        worst = std::max(worst, std::abs(fd - an) / scale);
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 5.0, fmt("worst rel err %.2e over 1000 triples, %.3f s", worst, secs)};
}

// ---------------------------------------------------------------- 2

Eigen::MatrixXd dense_K(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Hyperparameters& th, bool deriv) {
    Eigen::MatrixXd K(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j) {
            double s = 0.0;
            for (int c = 0; c < 3; ++c) s += std::pow((A(i, c) - B(j, c)) / th.ell[c], 2);
            const double k = th.sigma_f * th.sigma_f * std::exp(-0.5 * s);
            const double l2 = th.ell[2] * th.ell[2], d = A(i, 2) - B(j, 2);
            K(i, j) = deriv ? k * (1.0 / l2 - d * d / (l2 * l2)) : k;
        }
    return K;
}

Outcome gp_exact() {
    std::mt19937_64 rng(1002);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> nd;

    // interpolation with sigma_n = 1e-8
    double worst_mean = 0.0, worst_var = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        Dataset ds;
        for (int i = 0; i < 30; ++i) {
            const double a = u(rng), b = u(rng), c = u(rng);
            ds.samples.push_back({a, b, c, 2.0 + std::sin(2.0 * b) + c, 1.0, Source::experimental});
        }
        Hyperparameters th;
        th.ell = {0.6, 0.6, 0.6};
        th.sigma_f = 1.3;
        th.sigma_n = 1e-8;
        const GpModel m(ds.normalized_inputs(), ds.normalized_gamma(), th, std::nullopt, Normalization{});
        for (const auto& s : ds.samples) {
            const auto p = m.predict_normalized(s.input());
            worst_mean = std::max(worst_mean, std::abs(p.mean - s.gamma) / std::abs(s.gamma));
            worst_var = std::max(worst_var, p.variance / (th.sigma_f * th.sigma_f));
        }
    }

    // dense oracle on n <= 5
    double worst_oracle = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 1 + static_cast<int>(rng() % 5);
        Eigen::MatrixXd X(n, 3);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < 3; ++c) X(i, c) = u(rng);
            y[i] = nd(rng);
        }
        Hyperparameters th;
        th.ell = {std::exp(0.5 * nd(rng)), std::exp(0.5 * nd(rng)), std::exp(0.5 * nd(rng))};
        th.sigma_f = std::exp(0.3 * nd(rng));
        th.sigma_n = 0.05 + 0.2 * std::abs(nd(rng));
        PolyMean pm;
        pm.degree = 2;
        pm.beta.resize(static_cast<Eigen::Index>(basis_size(2)));
        for (Eigen::Index i = 0; i < pm.beta.size(); ++i) pm.beta[i] = 0.3 * nd(rng);
        const GpModel m(X, y, th, pm, Normalization{});

        Eigen::VectorXd mu(n);
        for (int i = 0; i < n; ++i) mu[i] = poly_basis(X.row(i).transpose(), 2).dot(pm.beta);
        Eigen::MatrixXd K = dense_K(X, X, th, false);
        K.diagonal().array() += th.sigma_n * th.sigma_n + m.value_factor().jitter();
        Eigen::MatrixXd Kd = dense_K(X, X, th, true);
        Kd.diagonal().array() += m.deriv_factor().jitter();
        const Eigen::MatrixXd Ki = K.fullPivLu().inverse();
        const Eigen::MatrixXd Kdi = Kd.fullPivLu().inverse();
        const Eigen::VectorXd r = y - mu;
        const double nl = 0.5 * r.dot(Ki * r) + 0.5 * std::log(K.determinant()) +
                          0.5 * n * std::log(2.0 * 3.14159265358979323846);
        worst_oracle = std::max(worst_oracle, std::abs(nl - m.nlml()));
        Eigen::MatrixXd Z(1, 3);
        Z << u(rng), u(rng), u(rng);
        const Eigen::VectorXd ks = dense_K(X, Z, th, false).col(0);
        const Eigen::VectorXd kd = dense_K(X, Z, th, true).col(0);
        const double mz = poly_basis(Z.row(0).transpose(), 2).dot(pm.beta);
        const auto p = m.predict_normalized(Z.row(0).transpose());
        worst_oracle = std::max(worst_oracle, std::abs(p.mean - (mz + ks.dot(Ki * r))));
        worst_oracle = std::max(worst_oracle, std::abs(p.variance - (th.sigma_f * th.sigma_f - ks.dot(Ki * ks))));
        const auto ds = m.deriv_dp_stats(Z.row(0).transpose());
        const double prior = th.sigma_f * th.sigma_f / (th.ell[2] * th.ell[2]);
        const double sd = std::sqrt(std::max(0.0, prior - kd.dot(Kdi * kd)));
        worst_oracle = std::max(worst_oracle, std::abs(ds.sigma_dp - sd));
        worst_oracle = std::max(worst_oracle, std::abs(ds.mu_dp - mean_dp(pm, Z.row(0).transpose())));
    }
    const bool ok = worst_mean <= 1e-6 && worst_var <= 1e-8 && worst_oracle <= 1e-9;
    std::ostringstream d;
    d.precision(3);
    d << "interp rel err " << worst_mean << ", var/sf^2 " << worst_var << ", dense oracle " << worst_oracle;
    return {ok, d.str()};
}

// ---------------------------------------------------------------- 3

double phi_series(double zd) {
    const long double z = zd;
    long double term = z, sum = z;
    for (int n = 1; n < 400; ++n) {
        term *= -z * z / (2.0L * n);
        const long double add = term / (2 * n + 1);
        sum += add;
        if (std::fabs(add) < 1e-22L * std::fabs(sum)) break;
    }
    return static_cast<double>(0.5L + sum / std::sqrt(2.0L * 3.14159265358979323846264338327950288L));
}

Outcome quantile() {
    const double q = inv_norm_cdf(0.975);
    std::mt19937_64 rng(1003);
    std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const double p = u(rng);
        worst = std::max(worst, std::abs(phi_series(inv_norm_cdf(p)) - p));
    }
    return {std::abs(q - 1.95996) <= 1e-5 && worst <= 1e-9,
            fmt("z(0.975) = %.8f, round trip %.2e", q, worst)};
}

// ---------------------------------------------------------------- 4

Dataset cloud(std::mt19937_64& rng, int n, const std::function<double(const Point&)>& f) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset ds;
    for (int i = 0; i < n; ++i) {
        const Point x(u(rng), u(rng), u(rng));
        ds.samples.push_back({x[0], x[1], x[2], f(x), 1.0, Source::experimental});
    }
    ds.refit_normalization();
    return ds;
}

Outcome constrained_mean() {
    std::mt19937_64 rng(1004);
    // monotone in p and eps_s: the constraints are slack and the fit is plain ridge
    const auto mono = cloud(rng, 80, [](const Point& x) { return 2.0 + 0.5 * x[0] + x[1] + 3.0 * x[2]; });
    const auto Vm = make_virtual_grid(mono, {5, 5, 5}, 0.0).points;
    double ridge_err = 0.0;
    for (int d : {1, 2, 3}) {
        const double lam = 1e-6;
        const auto pm = fit_constrained_mean(mono, d, lam, Vm, 1e9);
        const Eigen::MatrixXd Z = mono.normalized_inputs();
        Eigen::MatrixXd H(Z.rows(), static_cast<Eigen::Index>(basis_size(d)));
        for (Eigen::Index i = 0; i < Z.rows(); ++i) H.row(i) = poly_basis(Z.row(i).transpose(), d).transpose();
        const Eigen::MatrixXd A = H.transpose() * H + lam * Eigen::MatrixXd::Identity(H.cols(), H.cols());
        const Eigen::VectorXd beta = A.fullPivLu().solve(H.transpose() * mono.normalized_gamma());
        ridge_err = std::max(ridge_err, (pm.beta - beta).lpNorm<Eigen::Infinity>());
    }

    const auto anti = cloud(rng, 150, [](const Point& x) {
        return std::sin(2.0 * x[1]) - x[2] * x[2] * x[2] + 0.2 * x[2];
    });
    const auto Va = make_virtual_grid(anti, {6, 6, 6}, 0.0).points;
    MeanFitReport rep;
    const double es_max = 0.3;
    const auto pm = fit_constrained_mean(anti, 3, 1e-6, Va, es_max, {}, &rep);
    double worst = 1e300;
    for (const auto& v : Va) {
        worst = std::min(worst, mean_dp(pm, v));
        worst = std::min(worst, v[kEpsS] <= es_max ? mean_ds(pm, v) : -mean_ds(pm, v));
    }
    const bool ok = ridge_err <= 1e-8 && worst >= -1e-8 && rep.active_constraints >= 1;
    std::ostringstream d;
    d.precision(3);
    d << "ridge diff " << ridge_err << "; anti-monotone worst slack " << worst << ", active "
      << rep.active_constraints;
    return {ok, d.str()};
}

// ---------------------------------------------------------------- 5-8: synthetic experiment

const std::vector<double> kTrain{7, 14, 20, 34};
const std::vector<double> kSim4{10, 17, 27, 36};
const std::vector<double> kSim8{5, 10, 17, 23, 27, 29, 31, 36};

std::vector<double> held_out() {
    std::set<double> used(kTrain.begin(), kTrain.end());
    used.insert(kSim8.begin(), kSim8.end());
    std::vector<double> out;
    for (int p = 5; p <= 39; ++p)
        if (!used.count(p)) out.push_back(p);
    return out;
}

struct Run {
    std::unique_ptr<GpModel> model;
    TrainSummary summary;
    EvalReport report;
    double map95 = 0.0;
    double seconds = 0.0;
    std::string error;
};

class Experiment {
public:
    explicit Experiment(fs::path work) : work_(std::move(work)), data_(work_ / "data") {}

    const fs::path& data() {
        if (!synthesized_) {
            const auto t0 = std::chrono::steady_clock::now();
            SynthConfig c;
            for (int p = 5; p <= 39; ++p) c.levels.push_back(p);
            c.eps_a_max = 0.01;
            c.steps = 50;
            c.out = data_.string();
            std::ofstream log(work_ / "synth.log");
            cmd_synth(c, log);
            synth_seconds_ = seconds_since(t0);
            synthesized_ = true;
        }
        return data_;
    }

    double synth_seconds() const { return synth_seconds_; }

    Run& get(const std::string& name) {
        auto it = runs_.find(name);
        if (it != runs_.end()) return it->second;
        Run& r = runs_[name];
        TrainConfig c;
        c.data = data().string();
        c.train_levels = kTrain;
        c.model = (work_ / (name + ".cgpr")).string();
        if (name == "u4+4sim") c.sim_levels = kSim4;
        if (name == "u4+8sim") c.sim_levels = kSim8;
        if (name == "c4" || name == "c4-noC2") c.mode = "constrained";
        if (name == "c4-noC2") c.c2 = false;
        std::ofstream log(work_ / (name + ".log"));
        const auto t0 = std::chrono::steady_clock::now();
        try {
            r.model = std::make_unique<GpModel>(cmd_train(c, log, &r.summary));
            r.seconds = seconds_since(t0);
            EvalConfig e;
            e.model = c.model;
            e.data = c.data;
            e.levels = held_out();
            e.out = (work_ / ("eval_" + name)).string();
            r.report = cmd_evaluate(e, log);
            MapConfig mc;
            mc.model = c.model;
            mc.out = (work_ / ("map_" + name)).string();
            r.map95 = cmd_map(mc, log).satisfied_fraction(true);
        } catch (const Error& ex) {
            r.error = ex.what();
            log << "error: " << ex.what() << '\n';
        }
        return r;
    }

private:
    fs::path work_;
    fs::path data_;
    bool synthesized_ = false;
    double synth_seconds_ = 0.0;
    std::map<std::string, Run> runs_;
};

Outcome chance_feasibility(Experiment& ex) {
    auto& c = ex.get("c4");
    if (!c.model) return {false, "constrained training failed: " + c.error};
    int ok = 0;
    for (const auto& v : c.model->virtual_points)
        if (chance_constraint_margin(*c.model, v) >= -1e-6) ++ok;
    const auto n = static_cast<int>(c.model->virtual_points.size());
    const auto samples = c.model->size();
    const bool pass = n > 0 && ok == n && c.map95 >= 0.95 && c.seconds < 600.0 && samples <= 400;
    std::ostringstream d;
    d << ok << "/" << n << " virtual points feasible, map 95% fraction " << fmt("%.4f", c.map95) << ", n=" << samples
      << ", train " << fmt("%.2f s", c.seconds);
    return {pass, d.str()};
}

Outcome table_trend(Experiment& ex) {
    const auto t0 = std::chrono::steady_clock::now();
    auto& u4 = ex.get("u4");
    auto& s4 = ex.get("u4+4sim");
    auto& s8 = ex.get("u4+8sim");
    auto& c4 = ex.get("c4");
    for (const Run* r : {&u4, &s4, &s8, &c4})
        if (!r->model) return {false, "training failed: " + r->error};
    const double a = u4.report.mean_nrmse, b = s4.report.mean_nrmse, c = s8.report.mean_nrmse,
                 d = c4.report.mean_nrmse;
    const double total = ex.synth_seconds() + u4.seconds + s4.seconds + s8.seconds + c4.seconds + seconds_since(t0);
    const bool worst = a >= b && a >= c && a >= d;
    const bool trend = b < a && c < b;
    const bool constrained = d <= 0.85 * a;
    std::ostringstream s;
    s.precision(3);
    s << "mean NRMSE over " << u4.report.per_level.size() << " held-out levels: u4 " << 100 * a << "%, +4sim "
      << 100 * b << "%, +8sim " << 100 * c << "%, c4 " << 100 * d << "% (c4/u4 " << d / a << "); "
      << fmt("%.1f s", total);
    return {worst && trend && constrained && total < 1200.0, s.str()};
}

Outcome map_contrast(Experiment& ex) {
    auto& u4 = ex.get("u4");
    auto& c4 = ex.get("c4");
    if (!u4.model || !c4.model) return {false, "training failed"};
    return {u4.map95 <= 0.5 && c4.map95 >= 0.95,
            fmt("95%%-level satisfied fraction u4 %.4f, c4 %.4f", u4.map95, c4.map95)};
}

// Largest rise over the running minimum past max(eps_s_max, own peak strain),
// as a fraction of the curve's peak. Measuring from the curve's own peak keeps
// ordinary hardening of high-confinement curves, which peak after the global
// eps_s_max, from counting as rehardening.
double post_peak_rise(const std::vector<double>& es, const std::vector<double>& v, double eps_s_max_raw) {
    std::size_t ip = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[ip]) ip = i;
    const double start = std::max(eps_s_max_raw, es[ip]);
    double low = 1e300, rise = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (es[i] <= start) continue;
        low = std::min(low, v[i]);
        rise = std::max(rise, v[i] - low);
    }
    return v[ip] > 0.0 ? rise / v[ip] : 0.0;
}

struct RiseScan {
    double model = 0.0, model_level = 0.0;
    double reference = 0.0;
};

RiseScan scan_rise(const GpModel& m, const Dataset& test, std::ostream& csv, const std::string& tag) {
    const double es_raw = m.normalization().input[kEpsS].inverse(m.mean()->eps_s_max);
    RiseScan r;
    for (const auto& [level, group] : test.groups()) {
        auto g = group;
        std::stable_sort(g.begin(), g.end(), [](const auto& a, const auto& b) { return a.eps_s < b.eps_s; });
        std::vector<double> es, mu, ref;
        for (const auto& s : g) {
            es.push_back(s.eps_s);
            mu.push_back(m.predict(s.input()).mean);
            ref.push_back(s.gamma);
        }
        const double rm = post_peak_rise(es, mu, es_raw), rr = post_peak_rise(es, ref, es_raw);
        csv << tag << ',' << level << ',' << rm << ',' << rr << '\n';
        if (rm > r.model) {
            r.model = rm;
            r.model_level = level;
        }
        r.reference = std::max(r.reference, rr);
    }
    return r;
}

Outcome rehardening_check(Experiment& ex, const fs::path& work) {
    auto& off = ex.get("c4-noC2");
    auto& on = ex.get("c4");
    if (!off.model || !on.model) return {false, "training failed: " + off.error + on.error};

    const auto ds = detail::load_directory(ex.data());
    const auto split = split_by_confinement(ds, held_out());
    std::ofstream csv(work / "rehardening.csv");
    csv << "model,confinement,rise_over_peak,reference_rise_over_peak\n";
    const auto r_off = scan_rise(*off.model, split.train, csv, "c4-noC2");
    const auto r_on = scan_rise(*on.model, split.train, csv, "c4");
    // the reference curves must not reharden, or the measure means nothing
    const bool part1 = r_off.model > 0.01 && r_off.reference < 1e-3;

    // C2 on: polynomial mean slope along eps_s past eps_s_max
    const auto& mn = *on.model;
    double max_slope = -1e300;
    int beyond = 0;
    for (const auto& v : mn.virtual_points)
        if (v[kEpsS] > mn.mean()->eps_s_max) {
            ++beyond;
            max_slope = std::max(max_slope, mean_ds(*mn.mean(), v));
        }
    const bool part2 = beyond > 0 && max_slope <= 1e-8;
    std::ostringstream d;
    d.precision(3);
    d << "C2 off: post-peak rise " << 100 * r_off.model << "% of peak (Pc " << r_off.model_level
      << ", needs > 1%; KCC reference " << 100 * r_off.reference << "%); C2 on: max dmu/deps_s " << max_slope
      << " over " << beyond << " points past eps_s_max, posterior rise " << 100 * r_on.model << "% (Pc "
      << r_on.model_level << ")";
    return {part1 && part2, d.str()};
}

// ---------------------------------------------------------------- 9

Outcome kcc_physics() {
    KccParams k;
    bool lam_ok = true, yield_ok = true, diss_ok = true;
    double worst_yield = -1e300, worst_diss = 1e300;
    double peak[2] = {0, 0};
    int idx = 0;
    for (double pc : {7.0, 34.0}) {
        const auto sim = simulate_triaxial_path(pc, 0.01, 100, k);
        for (std::size_t i = 0; i < sim.states.size(); ++i) {
            const auto& s = sim.states[i];
            if (i > 0 && s.lambda < sim.states[i - 1].lambda) lam_ok = false;
            const double g = gamma_kcc(s.p(), s.lambda, k);
            worst_yield = std::max(worst_yield, s.q() / g - 1.0);
            if (s.q() > g * (1.0 + 1e-6)) yield_ok = false;
            peak[idx] = std::max(peak[idx], s.q());
        }
        for (std::size_t i = 0; i < sim.steps.size(); ++i) {
            const auto& st = sim.steps[i];
            if (!st.plastic) continue;
            const auto& s = sim.states[i + 1];
            const double margin = s.q() - k.varpi * st.gamma_dp * s.p();
            worst_diss = std::min({worst_diss, margin, st.dissipation});
            if (margin < -1e-10 || st.dissipation < -1e-10) diss_ok = false;
        }
        ++idx;
    }
    const bool ok = lam_ok && yield_ok && diss_ok && peak[1] > peak[0];
    std::ostringstream d;
    d.precision(4);
    d << "lambda monotone " << (lam_ok ? "yes" : "no") << ", max q/Gamma-1 " << worst_yield
      << ", min dissipation margin " << worst_diss << ", peak Pc7 " << peak[0] << " < Pc34 " << peak[1] << " MPa";
    return {ok, d.str()};
}

// ---------------------------------------------------------------- 10

Outcome tiers() {
    const Tier a = tier(0.015, 0.99), b = tier(0.1116, 0.6047), c = tier(0.0342, 0.9629);
    return {a == Tier::excellent && b == Tier::poor && c == Tier::good,
            "(1.5%, 0.99) " + to_string(a) + ", (11.16%, 0.6047) " + to_string(b) + ", (3.42%, 0.9629) " +
                to_string(c)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-10"};
    std::string work = "acceptance_work";
    std::vector<int> known_red;
    app.add_option("--work", work, "Directory for data, models and logs");
    app.add_option("--known-red", known_red, "Criteria whose FAIL does not set the exit code")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);

    Experiment ex(work);
    const std::vector<std::function<Outcome()>> criteria{
        kernel_fd,
        gp_exact,
        quantile,
        constrained_mean,
        [&] { return chance_feasibility(ex); },
        [&] { return table_trend(ex); },
        [&] { return map_contrast(ex); },
        [&] { return rehardening_check(ex, work); },
        kcc_physics,
        tiers,
    };
    int failed = 0, unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const bool red_ok = std::find(known_red.begin(), known_red.end(), id) != known_red.end();
        if (!o.pass) {
            ++failed;
            if (!red_ok) ++unexpected;
        }
        std::printf("criterion %2d %s [%7.2f s] %s%s\n", id, o.pass ? "PASS" : "FAIL", seconds_since(t0),
                    o.detail.c_str(), !o.pass && red_ok ? " (known red)" : "");
        std::fflush(stdout);
    }
    std::printf("acceptance: %d/%zu PASS\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return unexpected == 0 ? 0 : 1;
}
