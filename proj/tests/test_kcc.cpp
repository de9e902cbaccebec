#include <cmath>

#include <gtest/gtest.h>

#include "cgpr/kcc.hpp"

using namespace cgpr;

namespace {

std::size_t peak_index(const Simulation& sim) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < sim.states.size(); ++i)
        if (sim.states[i].q() > sim.states[best].q()) best = i;
    return best;
}

} // namespace

TEST(Surface, AtZeroPressureIsA0) {
    KccParams k;
    EXPECT_EQ(strength_surface(Surface::yield, 0.0, k), 6.0);
    EXPECT_EQ(strength_surface(Surface::max, 0.0, k), 12.0);
    EXPECT_EQ(strength_surface(Surface::residual, 0.0, k), 0.0);
}

TEST(Surface, LinearWhenA2IsZero) {
    KccParams k;
    k.a[1] = {2.0, 0.5, 0.0};
    EXPECT_DOUBLE_EQ(strength_surface(Surface::max, 10.0, k), 22.0);
    EXPECT_DOUBLE_EQ(strength_surface_dp(Surface::max, 10.0, k), 2.0);
}

TEST(Surface, ApproachesA0PlusInverseA2) {
    KccParams k;
    EXPECT_NEAR(strength_surface(Surface::yield, 1e6, k), 6.0 + 1.0 / 0.004, 0.1);
    EXPECT_LT(strength_surface(Surface::yield, 1e6, k), 6.0 + 1.0 / 0.004);
}

TEST(Surface, SlopeMatchesFiniteDifference) {
    KccParams k;
    for (auto s : {Surface::yield, Surface::max, Surface::residual})
        for (double p : {1.0, 5.0, 40.0, 300.0}) {
            const double h = 1e-5 * p;
            const double fd = (strength_surface(s, p + h, k) - strength_surface(s, p - h, k)) / (2.0 * h);
            EXPECT_NEAR(strength_surface_dp(s, p, k), fd, 1e-5 * std::abs(fd) + 1e-9);
        }
}

TEST(Surface, PoleIsADomainError) {
    KccParams k;
    k.a[0] = {6.0, 0.75, -0.01};
    EXPECT_THROW(strength_surface(Surface::yield, 100.0, k), DomainError);
    EXPECT_THROW(strength_surface_dp(Surface::yield, 75.0, k), DomainError);
}

TEST(EtaTable, KnotsMidpointsAndClamp) {
    const auto t = KccParams::default_table(3e-4);
    EXPECT_EQ(eta_of_lambda(0.0, t), 0.0);
    EXPECT_EQ(eta_of_lambda(3e-4, t), 1.0);
    EXPECT_EQ(eta_of_lambda(3e-3, t), 0.05);
    EXPECT_NEAR(eta_of_lambda(1.5e-4, t), 0.5, 1e-12);
    EXPECT_NEAR(eta_of_lambda(1.65e-3, t), 0.525, 1e-12);
    EXPECT_EQ(eta_of_lambda(1.0, t), 0.05);
    EXPECT_EQ(eta_of_lambda(-1.0, t), 0.0);
}

TEST(Gamma, InterpolatesBetweenSurfaces) {
    KccParams k;
    const double p = 25.0;
    const double y = strength_surface(Surface::yield, p, k);
    const double m = strength_surface(Surface::max, p, k);
    const double r = strength_surface(Surface::residual, p, k);
    EXPECT_DOUBLE_EQ(gamma_kcc(p, 0.0, k), y);
    EXPECT_DOUBLE_EQ(gamma_kcc(p, k.lambda_m, k), m);
    EXPECT_NEAR(gamma_kcc(p, 1.5e-4, k), 0.5 * (m + y), 1e-12);
    EXPECT_NEAR(gamma_kcc(p, 1.0, k), 0.05 * (m - r) + r, 1e-12);
}

TEST(Gamma, FullySoftenedIsResidualWhenTableEndsAtZero) {
    KccParams k;
    k.eta_table = {{0.0, 0.0}, {k.lambda_m, 1.0}, {10.0 * k.lambda_m, 0.0}};
    EXPECT_DOUBLE_EQ(gamma_kcc(30.0, 1.0, k), strength_surface(Surface::residual, 30.0, k));
}

TEST(Gamma, SlopeMatchesFiniteDifference) {
    KccParams k;
    for (double lam : {0.0, 1e-4, 3e-4, 1e-3, 5e-2})
        for (double p : {3.0, 20.0, 60.0}) {
            const double h = 1e-5 * p;
            const double fd = (gamma_kcc(p + h, lam, k) - gamma_kcc(p - h, lam, k)) / (2.0 * h);
            EXPECT_NEAR(gamma_kcc_dp(p, lam, k), fd, 1e-6 * std::abs(fd));
        }
}

TEST(DamageRate, Examples) {
    KccParams k;
    EXPECT_EQ(damage_rate_coeff(0.0, k), 1.0);
    k.b1 = 0.0;
    EXPECT_EQ(damage_rate_coeff(50.0, k), 1.0);
    k.b1 = 1.0;
    EXPECT_DOUBLE_EQ(damage_rate_coeff(k.f_t, k), 0.5);
    k.b1 = 0.5;
    EXPECT_DOUBLE_EQ(damage_rate_coeff(3.0 * k.f_t, k), 0.5);
    // tension branch uses b2
    EXPECT_DOUBLE_EQ(damage_rate_coeff(-0.5 * k.f_t, k), 2.0);
    EXPECT_THROW(damage_rate_coeff(-k.f_t, k), DomainError);
}

TEST(Params, Validation) {
    KccParams k;
    EXPECT_NO_THROW(k.validate());
    auto bad = k;
    bad.nu = 0.5;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = k;
    bad.eta_table = {{0.0, 0.0}, {1e-3, 0.05}};
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = k;
    bad.eta_table = {{0.0, 0.0}, {3e-4, 1.0}, {3e-4, 0.5}};
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = k;
    bad.eta_table = {{0.0, 0.1}, {3e-4, 1.0}};
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = k;
    bad.r_f = 2.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = k;
    bad.a[2][1] = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Path, HydrostaticStart) {
    KccParams k;
    const auto s = hydrostatic_state(20.0, k);
    EXPECT_EQ(s.sig_a, 20.0);
    EXPECT_EQ(s.sig_r, 20.0);
    EXPECT_NEAR(s.eps_a + 2.0 * s.eps_r, 20.0 / k.bulk(), 1e-15);
    EXPECT_EQ(s.q(), 0.0);
}

TEST(Path, ElasticStepMatchesHookeAtConstantRadialStress) {
    KccParams k;
    const double d = 1e-5;
    const auto sim = simulate_axial_path(10.0, {d}, k);
    ASSERT_FALSE(sim.steps[0].plastic);
    const auto& a = sim.states[0];
    const auto& b = sim.states[1];
    EXPECT_NEAR(b.sig_a - a.sig_a, k.E * d, 1e-9);
    EXPECT_NEAR(b.eps_r - a.eps_r, -k.nu * d, 1e-15);
    EXPECT_EQ(b.sig_r, a.sig_r);
    EXPECT_EQ(b.lambda, 0.0);
}

TEST(Path, ElasticUnloadReturnsToStart) {
    KccParams k;
    const auto sim = simulate_axial_path(10.0, {1e-5, 2e-5, -2e-5, -1e-5}, k);
    const auto& a = sim.states.front();
    const auto& b = sim.states.back();
    EXPECT_NEAR(b.sig_a, a.sig_a, 1e-10);
    EXPECT_NEAR(b.eps_a, a.eps_a, 1e-15);
    EXPECT_NEAR(b.eps_r, a.eps_r, 1e-15);
}

TEST(Path, PlasticStatesLieOnTheCurrentSurface) {
    KccParams k;
    for (double pc : {5.0, 20.0, 39.0}) {
        const auto sim = simulate_triaxial_path(pc, 0.01, 100, k);
        int plastic = 0;
        for (std::size_t i = 0; i < sim.steps.size(); ++i) {
            const auto& s = sim.states[i + 1];
            const double g = gamma_kcc(s.p(), s.lambda, k);
            if (sim.steps[i].plastic) {
                ++plastic;
                EXPECT_NEAR(s.q(), g, 1e-6 * g) << "Pc " << pc << " step " << i;
            } else {
                EXPECT_LE(s.q(), g * (1.0 + 1e-12));
            }
        }
        EXPECT_GT(plastic, 0);
    }
}

TEST(Path, DamageNeverDecreasesAndDissipationIsNonnegative) {
    KccParams k;
    for (double pc : {5.0, 14.0, 34.0}) {
        const auto sim = simulate_triaxial_path(pc, 0.01, 60, k);
        for (std::size_t i = 1; i < sim.states.size(); ++i)
            EXPECT_GE(sim.states[i].lambda, sim.states[i - 1].lambda);
        for (const auto& st : sim.steps) EXPECT_GE(st.dissipation, -1e-10);
    }
}

TEST(Path, RadialStressIsHeldAtConfinement) {
    KccParams k;
    const auto sim = simulate_triaxial_path(27.0, 0.01, 50, k);
    for (const auto& s : sim.states) EXPECT_EQ(s.sig_r, 27.0);
    EXPECT_EQ(sim.states.size(), 51u);
    EXPECT_NEAR(sim.states.back().eps_a - sim.states.front().eps_a, 0.01, 1e-15);
}

TEST(Path, MonotoneBeforePeakAndSoftensAfter) {
    KccParams k;
    const auto sim = simulate_triaxial_path(7.0, 0.01, 100, k);
    const auto pk = peak_index(sim);
    ASSERT_GT(pk, 0u);
    ASSERT_LT(pk, sim.states.size() - 1);
    for (std::size_t i = 1; i <= pk; ++i) EXPECT_GE(sim.states[i].q(), sim.states[i - 1].q());
    EXPECT_LT(sim.states.back().q(), sim.states[pk].q());
}

TEST(Path, PeakGrowsWithConfinement) {
    KccParams k;
    const auto lo = simulate_triaxial_path(7.0, 0.01, 100, k);
    const auto hi = simulate_triaxial_path(34.0, 0.01, 100, k);
    EXPECT_GT(hi.states[peak_index(hi)].q(), lo.states[peak_index(lo)].q());
}

TEST(Path, RecordsCarryConfinement) {
    KccParams k;
    const auto recs = simulate_triaxial(10.0, 0.005, 10, k);
    ASSERT_EQ(recs.size(), 11u);
    for (const auto& r : recs) EXPECT_EQ(r.confinement, 10.0);
    EXPECT_EQ(recs[0].sig_a, 10.0);
}

TEST(Path, RejectsBadArguments) {
    KccParams k;
    EXPECT_THROW(simulate_triaxial_path(-1.0, 0.01, 50, k), ConfigError);
    EXPECT_THROW(simulate_triaxial_path(10.0, 0.01, 9, k), ConfigError);
    EXPECT_THROW(simulate_triaxial_path(10.0, 0.0, 50, k), ConfigError);
}
