// cgpr: synthesize triaxial data, train constrained/unconstrained GP failure
// surfaces, and evaluate them. Run `cgpr <command> --help` for options and
// `cgpr --dump-defaults` for a config template of every command, read back
// with `cgpr --config file.ini <command>`.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cgpr/commands.hpp"

namespace {

enum Exit : int { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

void add_dump(CLI::App* sub, bool& flag) {
    sub->add_flag("--dump-defaults", flag, "Print this command's settings as a config file and exit")->configurable(false);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained Gaussian-process failure surfaces for concrete"};
    app.allow_config_extras(false);
    app.require_subcommand(0, 1);
    app.option_defaults()->always_capture_default();
    bool dump_all = false;
    app.add_flag("--dump-defaults", dump_all, "Print default settings of every command and exit")->configurable(false);
    // CLI11 reads config files only at the top level; [train], [map], ... sections
    // address the subcommands
    app.set_config("--config", "", "Read settings from an INI file with one section per command");

    cgpr::SynthConfig synth;
    synth.levels.clear();
    for (int p = 5; p <= 39; ++p) synth.levels.push_back(p);
    cgpr::TrainConfig train;
    train.train_levels = {7, 14, 20, 34};
    cgpr::PredictConfig predict;
    cgpr::EvalConfig evaluate;
    cgpr::MapConfig map;
    cgpr::ThermoConfig thermo;
    bool d_synth = false, d_train = false, d_predict = false, d_eval = false, d_map = false, d_thermo = false;

    auto* s = app.add_subcommand("synth", "Simulate triaxial compression tests with the KCC model");
    add_dump(s, d_synth);
    s->add_option("--params", synth.params, "KCC parameter JSON (empty: built-in synthetic defaults)");
    s->add_option("--levels", synth.levels, "Confinement pressures in MPa")->delimiter(',');
    s->add_option("--eps-a-max", synth.eps_a_max, "Axial strain applied after the hydrostatic phase");
    s->add_option("--steps", synth.steps, "Strain increments per test");
    s->add_option("--out", synth.out, "Output directory");
    s->add_option("--states", synth.states, "Also write on-yield states for check-thermo");

    auto* t = app.add_subcommand("train", "Train a GP failure surface");
    add_dump(t, d_train);
    t->add_option("--data", train.data, "Directory with triaxial_Pc*.csv files");
    t->add_option("--train-levels", train.train_levels, "Experimental training levels (MPa)")->delimiter(',');
    t->add_option("--sim-levels", train.sim_levels, "Additional simulated training levels (MPa)")->delimiter(',')
        ->expected(0, CLI::detail::expected_max_vector_size);
    t->add_option("--mode", train.mode, "unconstrained | constrained");
    t->add_option("--mean", train.mean, "Mean of the unconstrained model: zero | poly");
    t->add_option("--degree", train.degree, "Polynomial mean degree");
    t->add_option("--lambda-reg", train.lambda_reg, "Ridge coefficient of the mean fit");
    t->add_option("--eta", train.eta, "Allowed violation probability of dGamma/dp >= 0");
    t->add_option("--grid", train.grid, "Virtual grid counts (eps_v, eps_s, p)")->delimiter(',')->expected(3);
    t->add_option("--grid-margin", train.grid_margin, "Virtual grid padding as a fraction of each range");
    t->add_option("--c1-mean", train.c1_mean, "Enforce dGamma/dp >= 0 on the polynomial mean");
    t->add_option("--c1-margin", train.c1_margin, "Lower bound on the mean's dGamma/dp (normalized units)");
    t->add_option("--c2", train.c2, "Enforce deviatoric monotonicity on the polynomial mean");
    t->add_option("--max-evals", train.max_evals, "Optimizer evaluations per start");
    t->add_option("--starts", train.starts, "Optimizer starts");
    t->add_option("--seed", train.seed, "Seed of the random starts");
    t->add_option("--th0", train.th0, "Initial ell1, ell2, ell3, sigma_f, sigma_n")->delimiter(',')->expected(5);
    t->add_option("--model", train.model, "Output model file");

    auto* p = app.add_subcommand("predict", "Posterior mean and 95% band at given inputs");
    add_dump(p, d_predict);
    p->add_option("--model", predict.model, "Model file");
    p->add_option("--input", predict.input, "CSV with eps_v, eps_s, p");
    p->add_option("--out", predict.out, "Output CSV");

    auto* e = app.add_subcommand("evaluate", "NRMSE, R^2 and tiers per held-out level");
    add_dump(e, d_eval);
    e->add_option("--model", evaluate.model, "Model file");
    e->add_option("--data", evaluate.data, "Directory with triaxial_Pc*.csv files");
    e->add_option("--levels", evaluate.levels, "Levels to score (empty: all not used in training)")->delimiter(',')
        ->expected(0, CLI::detail::expected_max_vector_size);
    e->add_option("--out", evaluate.out, "Output directory");

    auto* m = app.add_subcommand("map", "dGamma/dp violation maps over eps_s x eps_v");
    add_dump(m, d_map);
    m->add_option("--model", map.model, "Model file");
    m->add_option("--n-s", map.n_s, "Cells along eps_s");
    m->add_option("--n-v", map.n_v, "Cells along eps_v");
    m->add_option("--n-p", map.n_p, "Pressures sampled per cell");
    m->add_option("--eta", map.eta, "Violation probability of the 95% map");
    m->add_option("--out", map.out, "Output directory");

    auto* h = app.add_subcommand("check-thermo", "Plastic dissipation check on stress states");
    add_dump(h, d_thermo);
    h->add_option("--model", thermo.model, "Model file");
    h->add_option("--states", thermo.states, "CSV with eps_v, eps_s, p, sqrt3J2");
    h->add_option("--varpi", thermo.varpi, "Flow non-associativity");
    h->add_option("--out", thermo.out, "Output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kConfig;
    }

    auto dump = [](const CLI::App* sub) {
        std::cout << "[" << sub->get_name() << "]\n" << sub->config_to_str(true, true) << '\n';
    };
    if (dump_all) {
        for (const auto* sub : app.get_subcommands({})) dump(sub);
        return kOk;
    }
    const std::pair<CLI::App*, bool> dumps[] = {{s, d_synth}, {t, d_train},  {p, d_predict},
                                                {e, d_eval},  {m, d_map},    {h, d_thermo}};
    for (const auto& [sub, flag] : dumps)
        if (flag) {
            dump(sub);
            return kOk;
        }

    try {
        if (*s) cgpr::cmd_synth(synth);
        else if (*t) cgpr::cmd_train(train);
        else if (*p) cgpr::cmd_predict(predict);
        else if (*e) cgpr::cmd_evaluate(evaluate);
        else if (*m) cgpr::cmd_map(map);
        else if (*h) cgpr::cmd_check_thermo(thermo);
        else {
            std::cout << app.help();
            return kConfig;
        }
    } catch (const cgpr::ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << '\n';
        return kConfig;
    } catch (const cgpr::DataError& ex) {
        std::cerr << "data error: " << ex.what() << '\n';
        return kData;
    } catch (const cgpr::NumericalError& ex) {
        std::cerr << "numerical error: " << ex.what() << '\n';
        return kNumerical;
    }
    return kOk;
}
