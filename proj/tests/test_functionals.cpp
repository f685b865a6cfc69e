#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace milstein;
using testing_support::table_for;

namespace {

DriverSpec constant_drift(std::vector<double> y) {
    const int d = static_cast<int>(y.size());
    return {d, 1, [d](double) { return std::vector<double>(static_cast<std::size_t>(d), 0.0); },
            [y](double) { return y; }, "const"};
}

DriverSpec frozen() {
    return {1, 1, [](double) { return std::vector<double>{0.0}; }, {}, "frozen"};
}

std::span<const double> y_path(const PathBundle& b) { return {b.y.data(), b.y.size()}; }

} // namespace

TEST(ZFunctional, TimeDriver) {
    for (int n : {1, 4, 64}) {
        const auto b = make_bundle(table_for(drivers::time(), n, 8), 0, 0);
        EXPECT_NEAR(n * z_functional(b, n).final_value(), 0.5, 1e-12) << n;
    }
}

TEST(Functionals, ConstantDriverIsZero) {
    const auto b = make_bundle(table_for(frozen(), 1, 16), 3, 0);
    const auto fs = compute_functionals(b, 1);
    for (const auto* s : {&fs.z, &fs.m, &fs.n, &fs.cdy})
        for (double v : s->values) EXPECT_EQ(v, 0.0);
}

TEST(Functionals, StartAtZero) {
    const auto b = make_bundle(table_for(drivers::brownian(2), 4, 4), 1, 0);
    const auto fs = compute_functionals(b, 4);
    for (const auto* s : {&fs.z, &fs.m, &fs.n, &fs.cdy})
        for (double v : s->row(0)) EXPECT_EQ(v, 0.0);
}

TEST(Functionals, TimeDriverExactness) {
    for (int n : {4, 64, 512}) {
        const auto b = make_bundle(table_for(drivers::time(), n, 8), 0, 0);
        const auto fs = compute_functionals(b, n);
        const double n2 = static_cast<double>(n) * n;
        EXPECT_NEAR(n2 * fs.n.final_value(), 1.0 / 3.0, 1e-12) << n;
        EXPECT_NEAR(n2 * fs.m.final_value(), 1.0 / 6.0, 1e-12) << n;
        EXPECT_NEAR(n2 * m_functional(b, n, FineRule::bridge).final_value(), 1.0 / 6.0, 1e-12);
    }
}

TEST(Functionals, ConstantDensityMatchesOracle) {
    const std::vector<double> y = {1.0, 2.0, -1.0};
    const auto spec = constant_drift(y);
    const auto b = make_bundle(table_for(spec, 16, 4), 0, 0);
    const auto fs = compute_functionals(b, 16);
    for (int p = 0; p < 3; ++p)
        for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c) {
                const auto lim = fv_limit_oracle(spec.drift, a, c, p);
                const int idx = FunctionalSet::index(3, p, a, c);
                EXPECT_NEAR(256.0 * fs.n.final_value(idx), lim.n, 1e-10);
                EXPECT_NEAR(256.0 * fs.m.final_value(idx), lim.m, 1e-10);
            }
}

TEST(Functionals, PolynomialDensityConvergesAtFirstOrder) {
    const DriverSpec spec{1, 1, [](double) { return std::vector<double>{0.0}; },
                          [](double s) { return std::vector<double>{1.0 + s}; }, "linear density"};
    const auto lim = fv_limit_oracle(spec.drift, 0, 0, 0);
    EXPECT_NEAR(lim.n, 1.25, 1e-12);
    double prev = INFINITY;
    for (int n : {16, 32, 64, 128}) {
        const auto b = make_bundle(table_for(spec, n, 8), 0, 0);
        const auto fs = compute_functionals(b, n);
        const double err = std::abs(static_cast<double>(n) * n * fs.n.final_value() - lim.n);
        EXPECT_LT(err, 4.0 / n);
        EXPECT_LT(err, 0.6 * prev);
        prev = err;
    }
}

TEST(NyCubesum, Examples) {
    const auto b = make_bundle(table_for(drivers::time(), 8, 4), 0, 0);
    EXPECT_NEAR(ny_cubesum(y_path(b), b.grid, 8, 32) / 3.0, 1.0 / (3.0 * 64), 1e-15);
    const std::vector<double> jump = {0.0, 2.0};
    EXPECT_NEAR(ny_cubesum(jump, make_grid(1, 1), 1, 1) / 3.0, 8.0 / 3.0, 1e-15);
    // partial last cell: t = 5/8 on a grid of 2 cells covers [0,1/2] and (1/2,5/8]
    EXPECT_NEAR(ny_cubesum(y_path(b), b.grid, 2, 20), 0.125 + std::pow(0.125, 3), 1e-15);
    EXPECT_THROW(ny_cubesum(jump, make_grid(1, 1), 1, 2), InvalidArgument);
}

TEST(NyCubesum, BrownianIdentityBridgeRule) {
    const auto table = table_for(drivers::brownian(1), 16, 32);
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto b = make_bundle(table, 4, i);
        const double n = n_functional(b, 16).final_value();
        const double ob = offset_bracket_integral(b, 16, FineRule::bridge);
        EXPECT_NEAR(ny_cubesum(y_path(b), b.grid, 16, b.grid.fine_count), 3.0 * (n + ob), 1e-12);
    }
}

TEST(NyCubesum, BrownianIdentityItoRuleHalves) {
    std::vector<double> rms;
    for (int ff : {8, 16, 32, 64}) {
        const auto table = table_for(drivers::brownian(1), 16, ff);
        double sq = 0.0;
        for (std::uint64_t i = 0; i < 200; ++i) {
            const auto b = make_bundle(table, 4, i);
            const double n = n_functional(b, 16, FineRule::ito).final_value();
            const double ob = offset_bracket_integral(b, 16, FineRule::ito);
            const double r = ny_cubesum(y_path(b), b.grid, 16, b.grid.fine_count) - 3.0 * (n + ob);
            sq += r * r;
        }
        rms.push_back(std::sqrt(sq / 200));
    }
    for (std::size_t i = 1; i < rms.size(); ++i) {
        EXPECT_GT(rms[i - 1] / rms[i], 1.5);
        EXPECT_LT(rms[i - 1] / rms[i], 2.7);
    }
}

TEST(NFunctional, Symmetric) {
    const auto b = make_bundle(table_for(drivers::brownian(3), 8, 8), 7, 0);
    for (auto rule : {FineRule::bridge, FineRule::ito}) {
        const auto n = n_functional(b, 8, rule);
        for (int k = 0; k <= n.steps; ++k)
            for (int p = 0; p < 3; ++p)
                for (int a = 0; a < 3; ++a)
                    for (int c = 0; c < a; ++c)
                        EXPECT_NEAR(n.at(k, FunctionalSet::index(3, p, a, c)),
                                    n.at(k, FunctionalSet::index(3, p, c, a)), 1e-14);
    }
}

TEST(Functionals, NEqualsMPlusMTransposePlusBracketIntegral) {
    for (const auto& spec : {drivers::brownian(2), drivers::ito_embedding(), drivers::ramp_volatility()}) {
        const int d = spec.dim_d;
        const auto b = make_bundle(table_for(spec, 8, 16), 12, 0);
        for (auto rule : {FineRule::bridge, FineRule::ito}) {
            const auto fs = compute_functionals(b, 8, rule);
            for (int k = 0; k <= fs.n.steps; k += 7)
                for (int p = 0; p < d; ++p)
                    for (int a = 0; a < d; ++a)
                        for (int c = 0; c < d; ++c) {
                            const auto i = FunctionalSet::index;
                            const double rhs = fs.m.at(k, i(d, p, a, c)) + fs.m.at(k, i(d, p, c, a)) +
                                               fs.cdy.at(k, i(d, p, a, c));
                            EXPECT_NEAR(fs.n.at(k, i(d, p, a, c)), rhs, 1e-12) << spec.label;
                        }
        }
    }
}

TEST(EmpiricalQv, BrownianBracket) {
    const auto table = table_for(drivers::brownian(1), 64, 64);
    std::vector<double> qv(10000);
    for (std::size_t i = 0; i < qv.size(); ++i) {
        const auto w = path_series(make_bundle(table, 8, i), 0, true);
        qv[i] = qv_final(w, 0, w, 0);
    }
    const auto m = estimate_moments(qv);
    EXPECT_NEAR(m.mean, 1.0, 3.0 * m.mean_se);
}

TEST(EmpiricalQv, SmoothPathVanishes) {
    const auto b = make_bundle(table_for(drivers::time(), 8, 8), 0, 0);
    const auto y = path_series(b, 0);
    const auto qv = empirical_qv(y, 0, y, 0);
    EXPECT_NEAR(qv.final_value(), 1.0 / 64, 1e-15);
    EXPECT_EQ(qv.final_value(), qv_final(y, 0, y, 0));
    const auto other = path_series(make_bundle(table_for(drivers::time(), 4, 4), 0, 0), 0);
    EXPECT_THROW(empirical_qv(y, 0, other, 0), InvalidArgument);
}

TEST(ZFunctional, BrownianMeanVanishes) {
    const auto table = table_for(drivers::brownian(1), 32, 16);
    std::vector<double> z(2000);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = 32.0 * z_functional(make_bundle(table, 9, i), 32).final_value();
    const auto m = estimate_moments(z);
    EXPECT_LT(std::abs(m.mean), 3.0 * m.mean_se);
}

TEST(QuarticOffsetStatistic, VarianceDecaysLikeOneOverN) {
    const Grid grid = make_grid(1, 4096);
    std::vector<double> logn, logv;
    for (int n : {16, 64, 256}) {
        const int stride = 4096 / n;
        std::vector<double> s(2000);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto w = sample_brownian(grid, 1, StreamKey{31, i, 0});
            double acc = 0.0;
            for (int j = 0; j < 4096; ++j) {
                const double lo = w[j] - w[j / stride * stride];
                const double hi = w[j + 1] - w[j / stride * stride];
                acc += 0.5 * (lo * lo * lo * lo + hi * hi * hi * hi) / 4096.0;
            }
            s[i] = static_cast<double>(n) * n * acc;
        }
        logn.push_back(n);
        logv.push_back(estimate_moments(s).variance);
    }
    const auto fit = fit_rate(logn, logv);
    EXPECT_GT(fit.slope, -1.3);
    EXPECT_LT(fit.slope, -0.7);
}
