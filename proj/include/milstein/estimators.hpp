#pragma once

// Sample statistics used by the experiments: moments with standard errors,
// the two-sample Kolmogorov-Smirnov distance and log-log rate fits.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "milstein/grid.hpp"
#include "milstein/parallel.hpp"

namespace milstein {

struct Moments {
    std::size_t count = 0;
    double mean = 0.0;
    double mean_se = 0.0;
    double variance = 0.0; // unbiased
    double variance_se = 0.0;
};

inline constexpr std::size_t kMinMomentSamples = 30;

/// Mean and unbiased variance with standard errors; the variance SE uses the
/// fourth central moment, Var(s^2) ~ (m4 - (n-3)/(n-1) s^4) / n.
inline Moments estimate_moments(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < kMinMomentSamples) {
        throw InvalidArgument("estimate_moments: need at least " + std::to_string(kMinMomentSamples) +
                              " samples, got " + std::to_string(n));
    }
    for (double v : x)
        if (!std::isfinite(v)) throw InvalidArgument("estimate_moments: non-finite sample");
    const double dn = static_cast<double>(n);
    const double mean = pairwise_sum(x) / dn;
    std::vector<double> d2(n), d4(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        d2[i] = d * d;
        d4[i] = d2[i] * d2[i];
    }
    const double m2 = pairwise_sum(d2) / dn;
    const double m4 = pairwise_sum(d4) / dn;
    Moments m;
    m.count = n;
    m.mean = mean;
    m.variance = m2 * dn / (dn - 1.0);
    m.mean_se = std::sqrt(m.variance / dn);
    const double var_of_var = (m4 - (dn - 3.0) / (dn - 1.0) * m.variance * m.variance) / dn;
    m.variance_se = std::sqrt(std::max(0.0, var_of_var));
    return m;
}

/// Mean of x_i * y_i with its standard error.
inline Moments estimate_product_mean(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("estimate_product_mean: size mismatch");
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = x[i] * y[i];
    return estimate_moments(p);
}

struct KsResult {
    double statistic = 0.0;
    double threshold = 0.0; // asymptotic critical value at `alpha`
    double alpha = 0.05;
    std::size_t size_a = 0;
    std::size_t size_b = 0;
    double mean_delta = 0.0;
    double variance_delta = 0.0;
};

inline constexpr std::size_t kMinKsSamples = 1000;

/// Asymptotic two-sample KS critical value c(alpha) sqrt((n + m) / (n m)).
inline double ks_critical_value(std::size_t n, std::size_t m, double alpha = 0.05) {
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return c * std::sqrt((dn + dm) / (dn * dm));
}

/// sup_x |F_a(x) - F_b(x)| over the empirical CDFs.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InvalidArgument("ks_statistic: empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

inline KsResult compare_distributions(std::span<const double> a, std::span<const double> b,
                                      double alpha = 0.05) {
    if (a.size() < kMinKsSamples || b.size() < kMinKsSamples) {
        throw InvalidArgument("compare_distributions: need at least " + std::to_string(kMinKsSamples) +
                              " samples per side");
    }
    KsResult r;
    r.statistic = ks_statistic(a, b);
    r.alpha = alpha;
    r.threshold = ks_critical_value(a.size(), b.size(), alpha);
    r.size_a = a.size();
    r.size_b = b.size();
    const auto ma = estimate_moments(a), mb = estimate_moments(b);
    r.mean_delta = ma.mean - mb.mean;
    r.variance_delta = ma.variance - mb.variance;
    return r;
}

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<double> residuals;
};

/// Least-squares fit of log(error) against log(n).
inline RateFit fit_rate(std::span<const double> ns, std::span<const double> errors) {
    if (ns.size() != errors.size()) throw InvalidArgument("fit_rate: size mismatch");
    if (ns.size() < 3) throw InvalidArgument("fit_rate: need at least 3 values of n");
    const auto [lo, hi] = std::minmax_element(ns.begin(), ns.end());
    if (*hi < 8.0 * *lo) throw InvalidArgument("fit_rate: n values must span at least a factor 8");
    const std::size_t k = ns.size();
    std::vector<double> lx(k), ly(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (!(ns[i] > 0.0) || !(errors[i] > 0.0)) throw InvalidArgument("fit_rate: non-positive input");
        lx[i] = std::log(ns[i]);
        ly[i] = std::log(errors[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        fit.residuals.push_back(r);
        sse += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return fit;
}

/// |estimate| <= 3 se + bias_budget.
inline bool null_limit_check(double estimate, double se, double bias_budget) {
    if (!(se > 0.0)) throw InvalidArgument("null_limit_check: standard error must be positive");
    return std::abs(estimate) <= 3.0 * se + bias_budget;
}

} // namespace milstein
