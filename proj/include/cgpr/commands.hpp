#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgpr/constraints.hpp"
#include "cgpr/dataset.hpp"
#include "cgpr/errors.hpp"
#include "cgpr/gp.hpp"
#include "cgpr/io.hpp"
#include "cgpr/kcc.hpp"
#include "cgpr/metrics.hpp"
#include "cgpr/polymean.hpp"

namespace cgpr {

namespace fs = std::filesystem;

// Subcommand settings. Every cmd_* validates its config before doing work
// and throws the Error family that maps onto the process exit code.

struct SynthConfig {
    std::string params;                 // KCC params JSON; empty -> built-in defaults
    std::vector<double> levels;         // confinement pressures, MPa
    double eps_a_max = 0.01;            // axial strain beyond the hydrostatic state
    int steps = 50;
    std::string out = "data";
    bool states = true;                 // also write on-yield states for check-thermo
};

struct TrainConfig {
    std::string data = "data";          // directory written by synth
    std::vector<double> train_levels;   // experimental levels
    std::vector<double> sim_levels;     // levels added as simulated samples
    std::string mode = "unconstrained"; // unconstrained | constrained
    std::string mean = "zero";          // unconstrained mean: zero | poly
    int degree = 3;
    double lambda_reg = 1e-6;
    double eta = 0.025;
    std::vector<int> grid{8, 8, 8};
    double grid_margin = 0.0;
    bool c1_mean = true;                // C1 on the polynomial mean (constrained mode)
    double c1_margin = 0.05;            // mean slope floor dmu/dp >= c1_margin, normalized units
    bool c2 = true;                     // C2 on the polynomial mean (constrained mode)
    int max_evals = 300;
    int starts = 5;
    unsigned seed = 20240601u;
    std::vector<double> th0{1.0, 1.0, 1.0, 1.0, 0.1}; // ell1 ell2 ell3 sigma_f sigma_n
    std::string model = "model.cgpr";
};

struct PredictConfig {
    std::string model = "model.cgpr";
    std::string input;                  // CSV with eps_v, eps_s, p
    std::string out = "predictions.csv";
};

struct EvalConfig {
    std::string model = "model.cgpr";
    std::string data = "data";
    std::vector<double> levels;         // empty -> every level not used in training
    std::string out = "eval";
};

struct MapConfig {
    std::string model = "model.cgpr";
    int n_s = 25;
    int n_v = 25;
    int n_p = 9;
    double eta = 0.025;
    std::string out = "map";
};

struct ThermoConfig {
    std::string model = "model.cgpr";
    std::string states;                 // CSV with eps_v, eps_s, p, sqrt3J2
    double varpi = 0.5;
    std::string out = "thermo.csv";
};

namespace detail {

inline std::string level_tag(double pc) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", pc);
    return buf;
}

inline fs::path triaxial_file(const fs::path& dir, double pc) { return dir / ("triaxial_Pc" + level_tag(pc) + ".csv"); }
inline fs::path states_file(const fs::path& dir, double pc) { return dir / ("states_Pc" + level_tag(pc) + ".csv"); }

inline void ensure_dir(const fs::path& p) {
    std::error_code ec;
    if (!p.empty()) fs::create_directories(p, ec);
    if (ec) throw ConfigError("cannot create directory " + p.string() + ": " + ec.message());
}

inline void ensure_parent(const fs::path& file) { ensure_dir(file.parent_path()); }

inline std::ofstream open_out(const fs::path& p) {
    ensure_parent(p);
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + p.string());
    return out;
}

inline std::string fmt(double v, int prec = 10) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Every triaxial_Pc*.csv in `dir`, as features, with levels in
/// `simulated` tagged as simulated samples.
inline Dataset load_directory(const fs::path& dir, const std::set<double>& simulated = {}) {
    if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("triaxial_Pc", 0) == 0 && e.path().extension() == ".csv")
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw EmptyInputError("no triaxial_Pc*.csv files in " + dir.string());
    std::vector<Dataset> parts;
    for (const auto& f : files) {
        const auto recs = parse_triaxial_csv(f);
        std::vector<TriaxialRecord> exp, sim;
        for (const auto& r : recs) (simulated.count(r.confinement) ? sim : exp).push_back(r);
        if (!exp.empty()) parts.push_back(derive_features(exp, Source::experimental));
        if (!sim.empty()) parts.push_back(derive_features(sim, Source::simulated));
    }
    auto ds = merge(parts);
    std::stable_sort(ds.samples.begin(), ds.samples.end(), [](const FeatureSample& a, const FeatureSample& b) {
        return a.confinement < b.confinement;
    });
    return ds;
}

inline std::vector<double> levels_union(std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

} // namespace detail

// ---------------------------------------------------------------- synth

inline void validate(const SynthConfig& c) {
    if (c.levels.empty()) throw ConfigError("synth: levels must be nonempty");
    for (double l : c.levels)
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("synth: confinement level " + detail::fmt(l) + " must be >= 0");
    if (!(c.eps_a_max > 0.0)) throw ConfigError("synth: eps_a_max must be > 0");
    if (c.steps < 10) throw ConfigError("synth: steps must be >= 10");
}

inline void cmd_synth(const SynthConfig& c, std::ostream& log = std::cout) {
    validate(c);
    const KccParams k = c.params.empty() ? KccParams{} : load_kcc_params(c.params);
    k.validate();
    const fs::path out(c.out);
    detail::ensure_dir(out);
    nlohmann::json manifest;
    manifest["params"] = kcc_params_to_json(k);
    manifest["params_file"] = c.params;
    manifest["eps_a_max"] = c.eps_a_max;
    manifest["steps"] = c.steps;
    manifest["files"] = nlohmann::json::array();
    for (double pc : c.levels) {
        const auto sim = simulate_triaxial_path(pc, c.eps_a_max, c.steps, k);
        {
            auto f = detail::open_out(detail::triaxial_file(out, pc));
            f << "eps_a,eps_r,sig_a,sig_r,confinement\n";
            f.precision(17);
            for (const auto& r : sim.records(pc))
                f << r.eps_a << ',' << r.eps_r << ',' << r.sig_a << ',' << r.sig_r << ',' << r.confinement << '\n';
        }
        manifest["files"].push_back(detail::triaxial_file(out, pc).filename().string());
        if (c.states) {
            auto f = detail::open_out(detail::states_file(out, pc));
            f << "eps_v,eps_s,p,sqrt3J2\n";
            f.precision(17);
            for (std::size_t i = 0; i < sim.steps.size(); ++i) {
                if (!sim.steps[i].plastic) continue;
                const auto& s = sim.states[i + 1];
                f << s.eps_a + 2.0 * s.eps_r << ',' << s.eps_a - s.eps_r << ',' << s.p() << ',' << s.q() << '\n';
            }
        }
    }
    auto mf = detail::open_out(out / "manifest.json");
    mf << manifest.dump(2) << '\n';
    log << "synth: wrote " << c.levels.size() << " confinement levels to " << out.string() << '\n';
}

// ---------------------------------------------------------------- train

inline void validate(const TrainConfig& c) {
    if (c.train_levels.empty()) throw ConfigError("train: train_levels must be nonempty");
    if (c.mode != "constrained" && c.mode != "unconstrained")
        throw ConfigError("train: mode must be 'constrained' or 'unconstrained'");
    if (c.mean != "zero" && c.mean != "poly") throw ConfigError("train: mean must be 'zero' or 'poly'");
    if (c.degree < 0 || c.degree > 8) throw ConfigError("train: degree must lie in [0, 8]");
    if (!(c.lambda_reg >= 0.0)) throw ConfigError("train: lambda_reg must be >= 0");
    if (c.mode == "constrained" && !(c.eta > 0.0 && c.eta < 0.5)) throw ConfigError("train: eta must lie in (0, 0.5)");
    if (c.grid.size() != 3 || *std::min_element(c.grid.begin(), c.grid.end()) < 2)
        throw ConfigError("train: grid needs three counts, each >= 2");
    if (!(c.grid_margin >= 0.0 && c.grid_margin <= 0.5)) throw ConfigError("train: grid_margin must lie in [0, 0.5]");
    if (!(c.c1_margin >= 0.0)) throw ConfigError("train: c1_margin must be >= 0");
    if (c.max_evals < 10) throw ConfigError("train: max_evals must be >= 10");
    if (c.starts < 1) throw ConfigError("train: starts must be >= 1");
    if (c.th0.size() != 5) throw ConfigError("train: th0 needs 5 values (ell1 ell2 ell3 sigma_f sigma_n)");
    for (double v : c.th0)
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("train: th0 entries must be positive");
    for (double l : c.sim_levels)
        if (std::find(c.train_levels.begin(), c.train_levels.end(), l) != c.train_levels.end())
            throw ConfigError("train: level " + detail::fmt(l) + " is both experimental and simulated");
}

struct TrainSummary {
    TrainReport report;
    MeanFitReport mean_report;
    double eps_s_max_raw = 0.0;
    int virtual_points = 0;
    int feasible_points = 0;
    double seconds = 0.0;
};

/// Builds the mean function for `c` on an already split training set.
inline MeanFunction build_mean(const TrainConfig& c, const Dataset& train, const VirtualGrid& grid,
                               TrainSummary& sum, std::ostream& log) {
    const bool constrained = c.mode == "constrained";
    if (!constrained && c.mean == "zero") return std::nullopt;
    const auto peak = estimate_eps_s_max(train);
    sum.eps_s_max_raw = peak.eps_s_max;
    if (peak.unsmoothed) log << "train: warning: some confinement groups too short for smoothing\n";
    const double es_max = train.normalization.input[kEpsS].forward(peak.eps_s_max);
    MeanConstraints which{false, false};
    if (constrained) which = {c.c1_mean, c.c2, c.c1_mean ? c.c1_margin : 0.0};
    return fit_constrained_mean(train, c.degree, c.lambda_reg, grid.points, es_max, which, &sum.mean_report);
}

inline GpModel cmd_train(const TrainConfig& c, std::ostream& log = std::cout, TrainSummary* out_summary = nullptr) {
    validate(c);
    const auto t0 = std::chrono::steady_clock::now();
    const std::set<double> sim(c.sim_levels.begin(), c.sim_levels.end());
    const auto ds = detail::load_directory(c.data, sim);
    const auto split = split_by_confinement(ds, detail::levels_union(c.train_levels, c.sim_levels));
    const Dataset& train_set = split.train;

    TrainSummary sum;
    const auto grid = make_virtual_grid(train_set, {c.grid[0], c.grid[1], c.grid[2]}, c.grid_margin);
    const bool constrained = c.mode == "constrained";
    const MeanFunction mean = build_mean(c, train_set, grid, sum, log);

    TrainOptions opt;
    opt.max_evals = c.max_evals;
    opt.starts = c.starts;
    opt.seed = c.seed;
    Hyperparameters th0;
    th0.ell = {c.th0[0], c.th0[1], c.th0[2]};
    th0.sigma_f = c.th0[3];
    th0.sigma_n = c.th0[4];

    GpModel model;
    try {
        model = train(train_set, mean, th0, constrained, c.eta, grid.points, opt, &sum.report);
    } catch (const InfeasibleError& e) {
        log << "train: infeasible: " << e.what() << '\n';
        throw;
    }
    sum.virtual_points = constrained ? static_cast<int>(grid.points.size()) : 0;
    if (constrained)
        for (const auto& v : grid.points)
            if (chance_constraint_margin(model, v) >= -opt.margin_tol) ++sum.feasible_points;
    save_model(model, fs::path(c.model));
    sum.seconds = detail::seconds_since(t0);

    const auto& th = model.hyperparameters();
    log << "train: mode=" << c.mode << " samples=" << train_set.size() << " levels=" << train_set.levels().size()
        << " mean=" << (mean ? "poly(d=" + std::to_string(mean->degree) + ")" : std::string("zero")) << '\n';
    log << "train: theta ell=(" << th.ell[0] << ", " << th.ell[1] << ", " << th.ell[2] << ") sigma_f=" << th.sigma_f
        << " sigma_n=" << th.sigma_n << '\n';
    log << "train: nlml initial=" << sum.report.nlml_initial << " final=" << sum.report.nlml_final
        << " evaluations=" << sum.report.evaluations << " feasible_starts=" << sum.report.feasible_starts << '\n';
    if (constrained)
        log << "train: virtual points feasible " << sum.feasible_points << "/" << sum.virtual_points
            << " worst margin=" << sum.report.worst_margin << " eps_s_max=" << sum.eps_s_max_raw
            << " active mean constraints=" << sum.mean_report.active_constraints << '\n';
    log << "train: wall time " << detail::fmt(sum.seconds, 4) << " s, model written to " << c.model << '\n';
    if (out_summary) *out_summary = sum;
    return model;
}

// ---------------------------------------------------------------- predict

inline void cmd_predict(const PredictConfig& c, std::ostream& log = std::cout) {
    if (c.input.empty()) throw ConfigError("predict: input is required");
    const auto model = load_model(fs::path(c.model));
    auto t = detail::read_csv_table(c.input);
    const std::array<std::string, 3> names{"eps_v", "eps_s", "p"};
    std::array<std::size_t, 3> idx{};
    for (std::size_t k = 0; k < 3; ++k) idx[k] = detail::column_index(t, names[k], c.input);
    if (t.rows.empty()) throw EmptyInputError("no data rows in " + c.input);
    auto f = detail::open_out(c.out);
    f << "eps_v,eps_s,p,mean,variance,lo,hi\n";
    f.precision(12);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const Point x(detail::cell_double(t, r, idx[0], names[0]), detail::cell_double(t, r, idx[1], names[1]),
                      detail::cell_double(t, r, idx[2], names[2]));
        const auto p = model.predict(x);
        f << x[0] << ',' << x[1] << ',' << x[2] << ',' << p.mean << ',' << p.variance << ',' << p.ci95_low << ','
          << p.ci95_high << '\n';
    }
    log << "predict: " << t.rows.size() << " points written to " << c.out << '\n';
}

// ---------------------------------------------------------------- evaluate

/// Scores `model` on every level of `test` and writes one curve CSV per
/// level (eps_s, mean, lo, hi, ref) under `curve_dir` when it is nonempty.
inline EvalReport evaluate_levels(const GpModel& model, const Dataset& test, const fs::path& curve_dir = {}) {
    EvalReport rep;
    for (const auto& [level, group] : test.groups()) {
        auto g = group;
        std::stable_sort(g.begin(), g.end(),
                         [](const FeatureSample& a, const FeatureSample& b) { return a.eps_s < b.eps_s; });
        Eigen::VectorXd pred(static_cast<Eigen::Index>(g.size())), ref(pred.size());
        std::ostringstream curve;
        curve.precision(10);
        curve << "eps_s,mean,lo,hi,ref\n";
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto p = model.predict(g[i].input());
            pred[static_cast<Eigen::Index>(i)] = p.mean;
            ref[static_cast<Eigen::Index>(i)] = g[i].gamma;
            curve << g[i].eps_s << ',' << p.mean << ',' << p.ci95_low << ',' << p.ci95_high << ',' << g[i].gamma << '\n';
        }
        rep.add(level, pred, ref);
        if (!curve_dir.empty()) {
            auto f = detail::open_out(curve_dir / ("curve_Pc" + detail::level_tag(level) + ".csv"));
            f << curve.str();
        }
    }
    return rep;
}

inline EvalReport cmd_evaluate(const EvalConfig& c, std::ostream& log = std::cout) {
    const auto model = load_model(fs::path(c.model));
    const auto ds = detail::load_directory(c.data);
    std::vector<double> levels = c.levels;
    if (levels.empty()) {
        for (double l : ds.levels())
            if (std::find(model.train_levels.begin(), model.train_levels.end(), l) == model.train_levels.end())
                levels.push_back(l);
        if (levels.empty()) throw DataError("evaluate: no held-out levels in " + c.data);
    }
    const auto split = split_by_confinement(ds, levels);
    const fs::path out(c.out);
    detail::ensure_dir(out);
    const auto rep = evaluate_levels(model, split.train, out / "curves");
    {
        auto f = detail::open_out(out / "report.csv");
        write_report_csv(rep, f);
    }
    std::ostringstream table;
    write_report_table(rep, table, std::string("model ") + c.model + (model.constrained ? " (constrained)" : " (unconstrained)"));
    {
        auto f = detail::open_out(out / "report.txt");
        f << table.str();
    }
    log << table.str();
    return rep;
}

// ---------------------------------------------------------------- map

/// Axes of the default map: the raw training range of each feature.
inline ViolationMap model_violation_map(const GpModel& m, int n_s, int n_v, int n_p, double eta) {
    const auto& n = m.normalization();
    Eigen::Vector3d lo, hi;
    for (int j = 0; j < 3; ++j) {
        lo[j] = n.input[static_cast<std::size_t>(j)].inverse(m.train_X().col(j).minCoeff());
        hi[j] = n.input[static_cast<std::size_t>(j)].inverse(m.train_X().col(j).maxCoeff());
    }
    return violation_map(m, linspace(lo[kEpsS], hi[kEpsS], n_s), linspace(lo[kEpsV], hi[kEpsV], n_v),
                         linspace(lo[kPressure], hi[kPressure], n_p), eta);
}

inline ViolationMap cmd_map(const MapConfig& c, std::ostream& log = std::cout) {
    if (c.n_s < 1 || c.n_v < 1 || c.n_p < 1) throw ConfigError("map: grid counts must be >= 1");
    chance_quantile(c.eta);
    const auto model = load_model(fs::path(c.model));
    const auto vm = model_violation_map(model, c.n_s, c.n_v, c.n_p, c.eta);
    const fs::path out(c.out);
    detail::ensure_dir(out);
    {
        auto f = detail::open_out(out / "map.csv");
        write_violation_csv(vm, f);
    }
    {
        auto f = detail::open_out(out / "map_mean.svg");
        write_violation_svg(vm, false, f);
    }
    {
        auto f = detail::open_out(out / "map_conf95.svg");
        write_violation_svg(vm, true, f);
    }
    log << "map: " << vm.eps_v_axis.size() << "x" << vm.eps_s_axis.size() << " cells, " << vm.p_policy << '\n';
    log << "map: satisfied fraction mean-level=" << detail::fmt(vm.satisfied_fraction(false), 4)
        << " 95%-level=" << detail::fmt(vm.satisfied_fraction(true), 4) << '\n';
    return vm;
}

// ---------------------------------------------------------------- check-thermo

inline std::vector<ThermoState> read_states_csv(const fs::path& path) {
    auto t = detail::read_csv_table(path);
    const std::array<std::string, 4> names{"eps_v", "eps_s", "p", "sqrt3J2"};
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) idx[k] = detail::column_index(t, names[k], path.string());
    if (t.rows.empty()) throw EmptyInputError("no states in " + path.string());
    std::vector<ThermoState> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        ThermoState s;
        for (int k = 0; k < 3; ++k) s.x[k] = detail::cell_double(t, r, idx[static_cast<std::size_t>(k)], names[static_cast<std::size_t>(k)]);
        s.sqrt3J2 = detail::cell_double(t, r, idx[3], names[3]);
        out.push_back(s);
    }
    return out;
}

struct ThermoSummary {
    std::size_t pass = 0, fail = 0;
    double worst_margin = 0.0;
};

inline ThermoSummary cmd_check_thermo(const ThermoConfig& c, std::ostream& log = std::cout) {
    if (c.states.empty()) throw ConfigError("check-thermo: states is required");
    if (!(c.varpi >= 0.0)) throw ConfigError("check-thermo: varpi must be >= 0");
    const auto model = load_model(fs::path(c.model));
    const auto states = read_states_csv(c.states);
    const auto res = dissipation_check(model, states, c.varpi);
    ThermoSummary sum;
    sum.worst_margin = std::numeric_limits<double>::infinity();
    auto f = detail::open_out(c.out);
    f << "eps_v,eps_s,p,sqrt3J2,margin,ok\n";
    f.precision(12);
    for (std::size_t i = 0; i < res.size(); ++i) {
        const auto& s = states[i];
        f << s.x[0] << ',' << s.x[1] << ',' << s.x[2] << ',' << s.sqrt3J2 << ',' << res[i].margin << ','
          << (res[i].ok ? 1 : 0) << '\n';
        (res[i].ok ? sum.pass : sum.fail)++;
        sum.worst_margin = std::min(sum.worst_margin, res[i].margin);
    }
    log << "check-thermo: " << sum.pass << " pass, " << sum.fail << " fail, worst margin " << sum.worst_margin
        << " MPa (varpi=" << c.varpi << ")\n";
    return sum;
}

} // namespace cgpr
