#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "support.hpp"

using namespace milstein;

namespace {

RateConfig small_rate(const std::string& model, SchemeId scheme, int paths) {
    RateConfig cfg;
    cfg.model = model;
    cfg.scheme = scheme;
    cfg.n_list = {8, 16, 32, 64};
    cfg.paths = paths;
    cfg.fine_factor = 16;
    cfg.seed = 1;
    return cfg;
}

} // namespace

TEST(Rate, DeterministicSlopes) {
    const auto mil = run_rate_experiment(small_rate("det-exp", SchemeId::milstein, 1));
    EXPECT_GE(mil.fit->slope, -2.05);
    EXPECT_LE(mil.fit->slope, -1.95);
    EXPECT_TRUE(mil.pass());
    const auto eul = run_rate_experiment(small_rate("det-exp", SchemeId::euler, 1));
    EXPECT_GE(eul.fit->slope, -1.15);
    EXPECT_LE(eul.fit->slope, -0.85);
}

TEST(Rate, ReportShape) {
    const auto rep = run_rate_experiment(small_rate("gbm", SchemeId::milstein, 200));
    EXPECT_EQ(rep.fine_count, 1024);
    EXPECT_EQ(rep.used_paths, 200);
    EXPECT_EQ(rep.excluded_paths, 0);
    ASSERT_EQ(rep.points.size(), 4u);
    for (std::size_t i = 1; i < rep.points.size(); ++i) EXPECT_LT(rep.points[i].rms, rep.points[i - 1].rms);
    for (const auto& p : rep.points) EXPECT_GE(p.sup_rms, p.rms);
    EXPECT_EQ(rep.checks.size(), 1u);
}

TEST(Rate, FineCountOverride) {
    auto cfg = small_rate("gbm", SchemeId::euler, 50);
    cfg.fine_count = 256;
    EXPECT_EQ(run_rate_experiment(cfg).fine_count, 256);
    cfg.fine_count = 96;
    EXPECT_THROW(run_rate_experiment(cfg), InvalidArgument);
}

TEST(Rate, Milstein54NeedsItoModel) {
    EXPECT_THROW(run_rate_experiment(small_rate("gbm", SchemeId::milstein_ito54, 10)), InvalidArgument);
    EXPECT_NO_THROW(run_rate_experiment(small_rate("gbm-drift", SchemeId::milstein_ito54, 10)));
}

TEST(Rate, ThreadsDoNotChangeReport) {
    auto a = small_rate("linear2d", SchemeId::milstein, 300);
    auto b = a;
    b.threads = 4;
    EXPECT_EQ(report_json(run_rate_experiment(a)).dump(), report_json(run_rate_experiment(b)).dump());
}

TEST(ErrorLaw, FiniteVariationAgainstOde) {
    ErrorLawConfig cfg;
    cfg.model = "det-exp";
    cfg.n = 256;
    cfg.fine_factor = 4;
    const auto rep = run_error_law(cfg);
    EXPECT_EQ(rep.normalization, "n^2");
    ASSERT_EQ(rep.components.size(), 1u);
    EXPECT_NEAR(rep.components[0].limit.mean, -std::numbers::e / 6.0, 1e-9);
    EXPECT_TRUE(rep.pass());
}

TEST(ErrorLaw, RejectsEulerAndSmallSamples) {
    ErrorLawConfig cfg;
    cfg.model = "gbm";
    cfg.scheme = SchemeId::euler;
    EXPECT_THROW(run_error_law(cfg), InvalidArgument);
    cfg.scheme = SchemeId::milstein;
    cfg.paths = 500;
    EXPECT_THROW(run_error_law(cfg), InvalidArgument);
}

TEST(ErrorLaw, ThreadsDoNotChangeReport) {
    ErrorLawConfig cfg;
    cfg.model = "gbm";
    cfg.n = 16;
    cfg.paths = 1000;
    cfg.fine_factor = 4;
    cfg.limit_fine_count = 64;
    cfg.seed = 9;
    auto other = cfg;
    other.threads = 3;
    EXPECT_EQ(report_json(run_error_law(cfg)).dump(), report_json(run_error_law(other)).dump());
}

TEST(ErrorLaw, GbmVarianceLargeSample) {
    // Var(n U^n_1) -> e/6; with one fine cell per step the bridge rule is exact.
    const auto p = make_model("gbm");
    const int n = 128;
    const auto table = std::make_shared<const DriverTable>(p.driver, make_grid(n, 1));
    std::vector<double> u(200000);
    parallel_for(u.size(), 1, [&](std::size_t i) {
        const auto b = make_bundle(table, 1, i);
        u[i] = n * (milstein::milstein(p, b, n).final_value() - p.closed_form(b).back());
    });
    const double v = estimate_moments(u).variance;
    EXPECT_NEAR(v, std::numbers::e / 6.0, 0.1 * std::numbers::e / 6.0);
}

TEST(LimitSim, ThreadsDoNotChangeReport) {
    LimitSimConfig cfg;
    cfg.model = "ito-trig";
    cfg.draws = 100;
    cfg.fine_count = 128;
    cfg.seed = 2;
    auto other = cfg;
    other.threads = 2;
    EXPECT_EQ(report_json(run_limit_sim(cfg)).dump(), report_json(run_limit_sim(other)).dump());
}

TEST(Checks, BandAndAll) {
    EXPECT_TRUE(band_check("x", 1.0, 0.0, 1.0).pass);
    EXPECT_FALSE(band_check("x", 1.1, 0.0, 1.0).pass);
    EXPECT_FALSE(all_pass({band_check("a", 0, 0, 1), band_check("b", 2, 0, 1)}));
}

TEST(Summarize, SmallSamples) {
    const auto s = summarize(std::vector<double>{1.0, 3.0});
    EXPECT_EQ(s.count, 2u);
    EXPECT_DOUBLE_EQ(s.mean, 2.0);
    EXPECT_DOUBLE_EQ(s.variance, 2.0);
    EXPECT_EQ(summarize(std::vector<double>{}).count, 0u);
}
