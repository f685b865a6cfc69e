#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "support.hpp"

using namespace milstein;
using testing_support::table_for;

TEST(AuxiliaryNoise, Layout) {
    const auto aux = sample_aux(make_grid(1, 8), 2, 3, 0);
    EXPECT_EQ(aux.b.size(), 9u * 8u);
    EXPECT_EQ(aux.wbar.size(), 9u * 2u);
    EXPECT_EQ(aux.b_at(0, 1, 1, 0), 0.0);
    // independent of the driver stream
    const auto w = sample_brownian(make_grid(1, 8), 2, StreamKey{3, 0, stream::kLimitDriver});
    EXPECT_NE(aux.b_at(8, 0, 0, 0), w[16]);
}

TEST(AuxiliaryNoise, VCrossCorrelation) {
    // V^{1 1 1} = sqrt2 B + sqrt3/2 W + Wbar/2 has unit-rate bracket 3 and bracket 3/2 with W.
    const auto table = limit_table(make_model("gbm"), 64);
    std::vector<double> vv(4000), vw(4000);
    for (std::size_t i = 0; i < vv.size(); ++i) {
        const auto b = make_bundle(table, 4, i, stream::kLimitDriver);
        const auto aux = sample_aux(b.grid, 1, 4, i);
        const double v1 = v_at(aux, b, 64, 0, 0, 0);
        vv[i] = v1 * v1;
        vw[i] = v1 * b.w_at(64, 0);
    }
    const auto mv = estimate_moments(vv), mw = estimate_moments(vw);
    EXPECT_NEAR(mv.mean, 3.0, 3.0 * mv.mean_se);
    EXPECT_NEAR(mw.mean, std::sqrt(3.0) / 2.0, 3.0 * mw.mean_se);
}

TEST(SimulateMn, RejectsMismatchedNoise) {
    const auto b = make_bundle(table_for(drivers::brownian(1), 1, 16), 1, 0);
    EXPECT_THROW(simulate_mn(b, sample_aux(make_grid(1, 8), 1, 1, 0)), InvalidArgument);
    EXPECT_THROW(simulate_mn(b, sample_aux(make_grid(1, 16), 2, 1, 0)), InvalidArgument);
}

TEST(LimitSim, BrownianFingerprints) {
    LimitSimConfig cfg;
    cfg.model = "gbm";
    cfg.draws = 2000;
    cfg.fine_count = 1024;
    cfg.seed = 3;
    const auto rep = run_limit_sim(cfg);
    ASSERT_EQ(rep.summary.size(), 5u);
    EXPECT_DOUBLE_EQ(rep.summary[0].target, 1.0 / 6.0);
    EXPECT_DOUBLE_EQ(rep.summary[1].target, 1.0);
    EXPECT_DOUBLE_EQ(rep.summary[2].target, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(rep.summary[3].target, 0.5);
    EXPECT_DOUBLE_EQ(rep.summary[4].target, 0.0);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
}

TEST(LimitSim, ItoEmbeddingFingerprints) {
    LimitSimConfig cfg;
    cfg.model = "gbm-drift";
    cfg.draws = 2000;
    cfg.fine_count = 1024;
    cfg.seed = 4;
    for (const auto& c : run_limit_sim(cfg).checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
}

TEST(DriftCorrect, ItoEmbeddingHalfTime) {
    const auto p = make_model("gbm-drift");
    const auto r = limit_draw(p, limit_table(p, 256), 1, 0);
    const auto idx = FunctionalSet::index(2, 1, 0, 0);
    // N-bar^{t,W,W} = t/2 with no noise part
    for (int k = 0; k <= 256; k += 32) EXPECT_NEAR(r.mn.n.at(k, idx), k / 512.0, 1e-14);
}

TEST(SimulateU, LinearInMN) {
    const auto p = make_model("linear2d");
    const auto r = limit_draw(p, limit_table(p, 256), 2, 5);
    auto m2 = r.mn.m, n2 = r.mn.n;
    for (auto& v : m2.values) v *= 2.0;
    for (auto& v : n2.values) v *= 2.0;
    const auto u2 = simulate_u(p, r.bundle, r.x_ref, m2, n2);
    for (std::size_t i = 0; i < u2.values.size(); ++i)
        EXPECT_NEAR(u2.values[i], 2.0 * r.u.values[i], 1e-13 * (1.0 + std::abs(r.u.values[i])));
}

TEST(SimulateU, ExplicitItoFormAgrees) {
    for (const char* name : {"ito-trig", "gbm-drift", "ou"}) {
        const auto p = make_model(name);
        const auto table = limit_table(p, 512);
        for (std::uint64_t draw = 0; draw < 5; ++draw) {
            const auto r = limit_draw(p, table, 6, draw);
            const auto aux = sample_aux(r.bundle.grid, 1, 6, draw);
            const auto u = ito_limit_sde(p, r.bundle, r.x_ref, aux);
            for (int k = 0; k <= 512; ++k) EXPECT_NEAR(u.at(k), r.u.at(k), 1e-12) << name;
        }
    }
}

TEST(SimulateU, FiniteVariationFunctionalsGiveOdeLimit) {
    const auto p = make_model("det-exp");
    const auto b = make_bundle(table_for(p.driver, 1, 4096), 0, 0);
    auto m = StatSeries::zeros(StatKind::M, 4096, {1, 1, 1});
    auto n = StatSeries::zeros(StatKind::N, 4096, {1, 1, 1});
    for (int k = 0; k <= 4096; ++k) {
        m.values[k] = b.grid.time(k) / 6.0;
        n.values[k] = b.grid.time(k) / 3.0;
    }
    const auto u = simulate_u(p, b, p.closed_form(b), m, n);
    EXPECT_NEAR(u.final_value(), fv_limit_ode(p).final_u(), 1e-3);
}

TEST(SimulateU, VanishingNoiseDegenerates) {
    auto p = make_model("det-exp");
    p.closed_form = nullptr;
    p.fv_density = nullptr;
    p.driver = {1, 1, [](double) { return std::vector<double>{1e-3}; },
                [](double) { return std::vector<double>{1.0}; }, "small noise"};
    const auto table = limit_table(p, 4096);
    for (std::uint64_t draw = 0; draw < 10; ++draw)
        EXPECT_LT(std::abs(limit_draw(p, table, 7, draw).u.final_value()), 1e-2);
}

TEST(FvLimitOde, DetExp) {
    const auto r = fv_limit_ode(make_model("det-exp"));
    EXPECT_NEAR(r.final_u(), -std::numbers::e / 6.0, 1e-9);
    EXPECT_NEAR(r.final_x(), std::numbers::e, 1e-9);
    EXPECT_LT(r.error_estimate, 1e-10);
}

TEST(FvLimitOde, RampMatchesScheme) {
    const auto p = make_model("fv-ramp");
    const double ode = fv_limit_ode(p).final_u();
    const auto b = make_bundle(table_for(p.driver, 512, 8), 0, 0);
    const double u = 512.0 * 512.0 * (milstein::milstein(p, b, 512).final_value() - reference(p, b).final_value());
    EXPECT_NEAR(u, ode, 0.01 * std::abs(ode));
}

TEST(FvLimitOde, NeedsDensity) {
    EXPECT_THROW(fv_limit_ode(make_model("gbm")), InvalidArgument);
}
