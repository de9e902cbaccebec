// In-memory use of the library: simulate four triaxial tests, train a
// constrained surrogate and query it. The CLI in tools/ does the same with files.

#include <algorithm>
#include <iostream>

#include "cgpr/cgpr.hpp"

using namespace cgpr;

int run() {
    const KccParams kcc;
    std::vector<Dataset> parts;
    for (double pc : {7.0, 14.0, 20.0, 34.0}) parts.push_back(derive_features(simulate_triaxial(pc, 0.01, 50, kcc)));
    const Dataset train_set = merge(parts);

    const auto grid = make_virtual_grid(train_set, {8, 8, 8}, 0.0);
    const double es_max = train_set.normalization.input[kEpsS].forward(estimate_eps_s_max(train_set).eps_s_max);
    // a zero slope floor leaves no room for posterior spread; 0.05 is the CLI default
    const PolyMean mean = fit_constrained_mean(train_set, 3, 1e-6, grid.points, es_max, {true, true, 0.05});

    TrainReport report;
    const GpModel model = train(train_set, mean, Hyperparameters{}, true, 0.025, grid.points, {}, &report);
    std::cout << "nlml " << report.nlml_final << ", worst margin " << report.worst_margin << '\n';

    // a held-out level, 20 steps into the axial path
    const auto rec = simulate_triaxial(24.0, 0.01, 50, kcc)[20];
    const auto s = to_feature(rec, Source::experimental);
    const auto pred = model.predict(s.input());
    std::cout << "Pc 24: Gamma " << s.gamma << " MPa, predicted " << pred.mean << " [" << pred.ci95_low << ", "
              << pred.ci95_high << "]\n";

    double worst = 1e300;
    for (const auto& v : grid.points) worst = std::min(worst, chance_constraint_margin(model, v));
    std::cout << "min chance margin over " << grid.points.size() << " virtual points: " << worst << '\n';
    return 0;
}

int main() {
    try {
        run();
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}
