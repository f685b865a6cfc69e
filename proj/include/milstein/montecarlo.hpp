#pragma once

// Batch experiments: strong-error rate fits over coupled paths, error-law
// comparisons against the simulated limit, and limit-draw fingerprints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "milstein/estimators.hpp"
#include "milstein/limits.hpp"
#include "milstein/model.hpp"
#include "milstein/parallel.hpp"
#include "milstein/schemes.hpp"

namespace milstein {

struct Check {
    std::string name;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool pass = false;
};

inline Check band_check(std::string name, double value, double lo, double hi) {
    return {std::move(name), value, lo, hi, value >= lo && value <= hi};
}

inline bool all_pass(const std::vector<Check>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

/// Mean and standard error that tolerate tiny (deterministic) samples.
struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double mean_se = 0.0;
    double variance = 0.0;
    double variance_se = 0.0;
};

inline Summary summarize(std::span<const double> x) {
    Summary s;
    s.count = x.size();
    if (x.empty()) return s;
    if (x.size() >= kMinMomentSamples) {
        const auto m = estimate_moments(x);
        return {m.count, m.mean, m.mean_se, m.variance, m.variance_se};
    }
    s.mean = pairwise_sum(x) / static_cast<double>(x.size());
    if (x.size() > 1) {
        std::vector<double> d2(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) d2[i] = (x[i] - s.mean) * (x[i] - s.mean);
        s.variance = pairwise_sum(d2) / static_cast<double>(x.size() - 1);
        s.mean_se = std::sqrt(s.variance / static_cast<double>(x.size()));
    }
    return s;
}

struct RateConfig {
    std::string model;
    SchemeId scheme = SchemeId::milstein;
    std::vector<int> n_list;
    int paths = 1000;
    int fine_factor = 64;
    int fine_count = 0; // overrides max(n_list) * fine_factor when positive
    std::uint64_t seed = 0;
    int threads = 1;
    FineRule rule = FineRule::bridge;
};

struct RatePoint {
    int n = 0;
    double rms = 0.0; // sqrt E|U^n_1|^2
    double rms_se = 0.0;
    double mean = 0.0; // first component of U^n_1
    double mean_se = 0.0;
    double variance = 0.0;
    double variance_se = 0.0;
    double sup_rms = 0.0; // sqrt E max_k |U^n_{k/n}|^2
};

struct RateReport {
    RateConfig config;
    int fine_count = 0;
    std::vector<RatePoint> points;
    std::optional<RateFit> fit;
    int used_paths = 0;
    int excluded_paths = 0;
    std::vector<Check> checks;

    bool pass() const { return all_pass(checks); }
};

/// Expected slope band of the strong error at t = 1.
inline std::pair<double, double> expected_slope(const SdeProblem& problem, SchemeId scheme) {
    const bool fv = static_cast<bool>(problem.fv_density);
    const bool first_order = scheme == SchemeId::euler;
    if (fv) return first_order ? std::pair{-1.15, -0.85} : std::pair{-2.05, -1.95};
    return first_order ? std::pair{-0.65, -0.35} : std::pair{-1.15, -0.85};
}

inline void check_scheme_for(const SdeProblem& problem, SchemeId scheme) {
    if (scheme == SchemeId::reference) throw InvalidArgument("the reference is not a scheme under test");
    if (scheme == SchemeId::milstein_ito54 && !problem.ito) {
        throw InvalidArgument("scheme milstein54 needs an Ito model, '" + problem.name + "' is not one");
    }
}

/// Strong errors of `scheme` for every n on the same bundles; the fine grid is
/// max(n_list) * fine_factor and every n must divide it.
inline RateReport run_rate_experiment(const RateConfig& cfg) {
    const auto problem = make_model(cfg.model);
    check_scheme_for(problem, cfg.scheme);
    if (cfg.n_list.size() < 3) throw InvalidArgument("rate experiments need at least 3 values of n");
    if (cfg.paths < 1) throw InvalidArgument("paths must be positive");
    const int n_max = *std::max_element(cfg.n_list.begin(), cfg.n_list.end());
    if (cfg.fine_count > 0 && cfg.fine_count % n_max != 0) {
        throw InvalidArgument("n = " + std::to_string(n_max) + " does not divide the fine grid of " +
                              std::to_string(cfg.fine_count) + " cells");
    }
    const Grid grid = make_grid(n_max, cfg.fine_count > 0 ? cfg.fine_count / n_max : cfg.fine_factor);
    for (int n : cfg.n_list)
        if (n < 1 || !grid.supports(n)) {
            throw InvalidArgument("n = " + std::to_string(n) + " does not divide the fine grid of " +
                                  std::to_string(grid.fine_count) + " cells");
        }
    const auto table = std::make_shared<const DriverTable>(problem.driver, grid);
    const std::size_t paths = static_cast<std::size_t>(cfg.paths), levels = cfg.n_list.size();
    const int q = problem.dim_q();
    // per path and level: |U_1|^2, U^0_1, max_k |U_k|^2
    std::vector<double> sq(paths * levels), first(paths * levels), sup(paths * levels);
    std::vector<char> bad(paths, 0);
    parallel_for(paths, cfg.threads, [&](std::size_t i) {
        const auto bundle = make_bundle(table, cfg.seed, i);
        const auto ref = reference(problem, bundle, cfg.rule);
        if (ref.diverged) {
            bad[i] = 1;
            return;
        }
        for (std::size_t l = 0; l < levels; ++l) {
            const int n = cfg.n_list[l];
            const auto out = run_scheme(cfg.scheme, problem, bundle, n, cfg.rule);
            if (out.diverged) {
                bad[i] = 1;
                return;
            }
            const auto u = error_process(out, ref, 1.0);
            double s = 0.0, mx = 0.0;
            for (int k = 0; k <= n; ++k) {
                double r = 0.0;
                for (int c = 0; c < q; ++c) r += u.at(k, c) * u.at(k, c);
                mx = std::max(mx, r);
                if (k == n) s = r;
            }
            sq[i * levels + l] = s;
            first[i * levels + l] = u.at(n, 0);
            sup[i * levels + l] = mx;
        }
    });
    RateReport rep;
    rep.config = cfg;
    rep.fine_count = grid.fine_count;
    for (char b : bad) (b ? rep.excluded_paths : rep.used_paths) += 1;
    if (rep.used_paths == 0) throw std::runtime_error("all paths diverged");
    std::vector<double> ns, errs;
    for (std::size_t l = 0; l < levels; ++l) {
        std::vector<double> a, b, c;
        for (std::size_t i = 0; i < paths; ++i) {
            if (bad[i]) continue;
            a.push_back(sq[i * levels + l]);
            b.push_back(first[i * levels + l]);
            c.push_back(sup[i * levels + l]);
        }
        const auto ms = summarize(a), mf = summarize(b), mu = summarize(c);
        RatePoint p;
        p.n = cfg.n_list[l];
        p.rms = std::sqrt(ms.mean);
        p.rms_se = p.rms > 0.0 ? ms.mean_se / (2.0 * p.rms) : 0.0;
        p.mean = mf.mean;
        p.mean_se = mf.mean_se;
        p.variance = mf.variance;
        p.variance_se = mf.variance_se;
        p.sup_rms = std::sqrt(mu.mean);
        rep.points.push_back(p);
        ns.push_back(p.n);
        errs.push_back(p.rms);
    }
    rep.fit = fit_rate(ns, errs);
    const auto [lo, hi] = expected_slope(problem, cfg.scheme);
    rep.checks.push_back(band_check("slope", rep.fit->slope, lo, hi));
    return rep;
}

struct ErrorLawConfig {
    std::string model;
    SchemeId scheme = SchemeId::milstein;
    int n = 128;
    int paths = 10000;
    int fine_factor = 64;
    int limit_fine_count = kDefaultLimitFineCount;
    std::uint64_t seed = 0;
    int threads = 1;
    FineRule rule = FineRule::bridge;
    double ks_threshold = 0.05;
    double variance_rel_tol = 0.10;
};

struct ErrorLawComponent {
    int component = 0;
    Summary scheme;      // alpha_n U^n_1
    Summary limit;       // U_1
    std::optional<KsResult> ks;
};

struct ErrorLawReport {
    ErrorLawConfig config;
    std::string normalization; // "n" or "n^2"
    std::vector<ErrorLawComponent> components;
    std::optional<double> limit_variance;
    int excluded_paths = 0;
    std::vector<Check> checks;
    std::vector<double> scheme_samples; // paths x q, excluded paths dropped
    std::vector<double> limit_samples;  // draws x q

    bool pass() const { return all_pass(checks); }
};

/// Law of alpha_n U^n_1 against the limit: for Brownian-driven problems alpha_n = n
/// and the limit is simulated with the same number of independent draws; for
/// finite-variation drivers alpha_n = n^2 and the limit is the ODE value.
inline ErrorLawReport run_error_law(const ErrorLawConfig& cfg) {
    const auto problem = make_model(cfg.model);
    check_scheme_for(problem, cfg.scheme);
    if (cfg.scheme == SchemeId::euler) throw InvalidArgument("error-law compares Milstein errors only");
    const bool fv = static_cast<bool>(problem.fv_density);
    const int q = problem.dim_q();
    const Grid grid = make_grid(cfg.n, cfg.fine_factor);
    const auto table = std::make_shared<const DriverTable>(problem.driver, grid);
    const double alpha = fv ? static_cast<double>(cfg.n) * cfg.n : cfg.n;
    const auto paths = static_cast<std::size_t>(fv ? 1 : cfg.paths);
    if (!fv && cfg.paths < static_cast<int>(kMinKsSamples)) {
        throw InvalidArgument("error-law needs at least " + std::to_string(kMinKsSamples) + " paths");
    }
    std::vector<double> xs(paths * static_cast<std::size_t>(q));
    std::vector<char> bad(paths, 0);
    parallel_for(paths, cfg.threads, [&](std::size_t i) {
        const auto bundle = make_bundle(table, cfg.seed, i);
        const auto ref = reference(problem, bundle, cfg.rule);
        const auto out = run_scheme(cfg.scheme, problem, bundle, cfg.n, cfg.rule);
        if (ref.diverged || out.diverged) {
            bad[i] = 1;
            return;
        }
        const auto u = error_process(out, ref, alpha);
        for (int c = 0; c < q; ++c) xs[i * static_cast<std::size_t>(q) + static_cast<std::size_t>(c)] = u.final_value(c);
    });
    ErrorLawReport rep;
    rep.config = cfg;
    rep.normalization = fv ? "n^2" : "n";
    rep.limit_variance = problem.limit_variance;
    for (std::size_t i = 0; i < paths; ++i) {
        if (bad[i]) {
            ++rep.excluded_paths;
            continue;
        }
        for (int c = 0; c < q; ++c) rep.scheme_samples.push_back(xs[i * static_cast<std::size_t>(q) + static_cast<std::size_t>(c)]);
    }
    if (rep.scheme_samples.empty()) throw std::runtime_error("all paths diverged");

    if (fv) {
        const auto ode = fv_limit_ode(problem);
        for (int c = 0; c < q; ++c) {
            ErrorLawComponent comp;
            comp.component = c;
            comp.scheme.count = 1;
            comp.scheme.mean = rep.scheme_samples[static_cast<std::size_t>(c)];
            comp.limit.count = 1;
            comp.limit.mean = ode.final_u(c);
            rep.limit_samples.push_back(comp.limit.mean);
            const double tol = 0.01 * std::abs(comp.limit.mean) + 1e-12;
            rep.checks.push_back(band_check("component " + std::to_string(c) + " vs ODE limit",
                                            comp.scheme.mean, comp.limit.mean - tol, comp.limit.mean + tol));
            rep.components.push_back(comp);
        }
        return rep;
    }

    const auto draws = static_cast<std::size_t>(cfg.paths);
    const auto ltable = limit_table(problem, cfg.limit_fine_count);
    rep.limit_samples.assign(draws * static_cast<std::size_t>(q), 0.0);
    parallel_for(draws, cfg.threads, [&](std::size_t i) {
        const auto r = limit_draw(problem, ltable, cfg.seed, i);
        for (int c = 0; c < q; ++c)
            rep.limit_samples[i * static_cast<std::size_t>(q) + static_cast<std::size_t>(c)] = r.u.final_value(c);
    });
    const std::size_t kept = rep.scheme_samples.size() / static_cast<std::size_t>(q);
    for (int c = 0; c < q; ++c) {
        std::vector<double> a(kept), b(draws);
        for (std::size_t i = 0; i < kept; ++i) a[i] = rep.scheme_samples[i * static_cast<std::size_t>(q) + static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < draws; ++i) b[i] = rep.limit_samples[i * static_cast<std::size_t>(q) + static_cast<std::size_t>(c)];
        ErrorLawComponent comp;
        comp.component = c;
        comp.scheme = summarize(a);
        comp.limit = summarize(b);
        comp.ks = compare_distributions(a, b);
        const std::string tag = "component " + std::to_string(c);
        rep.checks.push_back(band_check(tag + " KS distance", comp.ks->statistic, 0.0, cfg.ks_threshold));
        const double band = 3.0 * std::hypot(comp.scheme.variance_se, comp.limit.variance_se);
        rep.checks.push_back(band_check(tag + " variance vs limit draws", comp.scheme.variance,
                                        comp.limit.variance - band, comp.limit.variance + band));
        if (c == 0 && rep.limit_variance) {
            const double v = *rep.limit_variance;
            rep.checks.push_back(band_check(tag + " variance vs closed form", comp.scheme.variance,
                                            v * (1.0 - cfg.variance_rel_tol), v * (1.0 + cfg.variance_rel_tol)));
        }
        rep.components.push_back(comp);
    }
    return rep;
}

struct LimitSimConfig {
    std::string model;
    int draws = 10000;
    int fine_count = kDefaultLimitFineCount;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct Fingerprint {
    std::string name;
    Summary value;
    double target = 0.0;
};

struct LimitSimReport {
    LimitSimConfig config;
    int dim_q = 1;
    std::vector<double> u_final;      // draws x q
    std::vector<double> fingerprints; // draws x 5: [M,M] [N,N] [N,M] [N,Y] [M,Y] of entry (0,0,0)
    std::vector<Fingerprint> summary;
    std::optional<double> limit_variance;
    Summary u_summary;
    std::vector<Check> checks;

    bool pass() const { return all_pass(checks); }
};

inline const std::vector<std::string>& fingerprint_names() {
    static const std::vector<std::string> names = {"[M,M]", "[N,N]", "[N,M]", "[N,Y]", "[M,Y]"};
    return names;
}

/// Draws of the limit error and the brackets of the (0,0,0) entries of M and N
/// with the first driver coordinate. Targets are the left-point sums of
/// c^3/6, c^3, c^3/3, c^2/2 and 0 with c = c^{00}.
inline LimitSimReport run_limit_sim(const LimitSimConfig& cfg) {
    const auto problem = make_model(cfg.model);
    if (cfg.draws < static_cast<int>(kMinMomentSamples)) {
        throw InvalidArgument("limit-sim needs at least " + std::to_string(kMinMomentSamples) + " draws");
    }
    const auto table = limit_table(problem, cfg.fine_count);
    const int q = problem.dim_q();
    const auto draws = static_cast<std::size_t>(cfg.draws);
    LimitSimReport rep;
    rep.config = cfg;
    rep.dim_q = q;
    rep.limit_variance = problem.limit_variance;
    rep.u_final.assign(draws * static_cast<std::size_t>(q), 0.0);
    rep.fingerprints.assign(draws * 5, 0.0);
    parallel_for(draws, cfg.threads, [&](std::size_t i) {
        const auto r = limit_draw(problem, table, cfg.seed, i);
        for (int c = 0; c < q; ++c) rep.u_final[i * static_cast<std::size_t>(q) + static_cast<std::size_t>(c)] = r.u.final_value(c);
        const auto y = path_series(r.bundle, 0);
        const auto& m = r.mn.m;
        const auto& n = r.mn.n;
        const double v[5] = {qv_final(m, 0, m, 0), qv_final(n, 0, n, 0), qv_final(n, 0, m, 0), qv_final(n, 0, y, 0),
                             qv_final(m, 0, y, 0)};
        std::copy(std::begin(v), std::end(v), rep.fingerprints.begin() + static_cast<std::ptrdiff_t>(i * 5));
    });
    double c2 = 0.0, c3 = 0.0;
    const double h = table->grid().fine_step();
    for (int k = 0; k < table->grid().fine_count; ++k) {
        const double c = table->c(k, 0, 0);
        c2 += c * c * h;
        c3 += c * c * c * h;
    }
    const double targets[5] = {c3 / 6.0, c3, c3 / 3.0, 0.5 * c2, 0.0};
    for (int f = 0; f < 5; ++f) {
        std::vector<double> col(draws);
        for (std::size_t i = 0; i < draws; ++i) col[i] = rep.fingerprints[i * 5 + static_cast<std::size_t>(f)];
        Fingerprint fp{fingerprint_names()[static_cast<std::size_t>(f)], summarize(col), targets[f]};
        const double tol = 3.0 * fp.value.mean_se + 1e-12;
        rep.checks.push_back(band_check(fp.name, fp.value.mean, fp.target - tol, fp.target + tol));
        rep.summary.push_back(fp);
    }
    std::vector<double> u0(draws);
    for (std::size_t i = 0; i < draws; ++i) u0[i] = rep.u_final[i * static_cast<std::size_t>(q)];
    rep.u_summary = summarize(u0);
    if (rep.limit_variance) {
        const double tol = 3.0 * rep.u_summary.variance_se;
        rep.checks.push_back(band_check("Var(U_1)", rep.u_summary.variance, *rep.limit_variance - tol,
                                        *rep.limit_variance + tol));
    }
    return rep;
}

// JSON serialization. Doubles are written by nlohmann's shortest round-trip
// formatting, so equal reports serialize to equal bytes.

inline void to_json(nlohmann::ordered_json& j, const Check& c) {
    j = {{"name", c.name}, {"value", c.value}, {"lo", c.lo}, {"hi", c.hi}, {"pass", c.pass}};
}

inline void to_json(nlohmann::ordered_json& j, const Summary& s) {
    j = {{"count", s.count}, {"mean", s.mean}, {"mean_se", s.mean_se}, {"variance", s.variance},
         {"variance_se", s.variance_se}};
}

inline nlohmann::ordered_json report_json(const RateReport& r) {
    nlohmann::ordered_json j;
    j["model"] = r.config.model;
    j["scheme"] = to_string(r.config.scheme);
    j["n_list"] = r.config.n_list;
    j["paths"] = r.config.paths;
    j["fine_factor"] = r.config.fine_factor;
    j["fine_count"] = r.fine_count;
    j["seed"] = r.config.seed;
    j["rule"] = to_string(r.config.rule);
    auto& pts = j["per_n"] = nlohmann::ordered_json::array();
    for (const auto& p : r.points) {
        pts.push_back({{"n", p.n}, {"rms_error", p.rms}, {"rms_error_se", p.rms_se}, {"mean", p.mean},
                       {"mean_se", p.mean_se}, {"variance", p.variance}, {"variance_se", p.variance_se},
                       {"sup_rms_error", p.sup_rms}});
    }
    if (r.fit) {
        j["rate_fit"] = {{"slope", r.fit->slope}, {"intercept", r.fit->intercept},
                         {"r_squared", r.fit->r_squared}, {"residuals", r.fit->residuals}};
    }
    j["used_paths"] = r.used_paths;
    j["excluded_paths"] = r.excluded_paths;
    j["checks"] = r.checks;
    j["pass"] = r.pass();
    return j;
}

inline nlohmann::ordered_json report_json(const ErrorLawReport& r) {
    nlohmann::ordered_json j;
    j["model"] = r.config.model;
    j["scheme"] = to_string(r.config.scheme);
    j["n"] = r.config.n;
    j["paths"] = r.config.paths;
    j["fine_factor"] = r.config.fine_factor;
    j["limit_fine_count"] = r.config.limit_fine_count;
    j["seed"] = r.config.seed;
    j["rule"] = to_string(r.config.rule);
    j["normalization"] = r.normalization;
    if (r.limit_variance) j["limit_variance"] = *r.limit_variance;
    auto& comps = j["components"] = nlohmann::ordered_json::array();
    for (const auto& c : r.components) {
        nlohmann::ordered_json cj = {{"component", c.component}, {"scheme", c.scheme}, {"limit", c.limit}};
        if (c.ks) {
            cj["distribution_distance"] = {{"statistic", c.ks->statistic},
                                           {"threshold_95", c.ks->threshold},
                                           {"size_a", c.ks->size_a},
                                           {"size_b", c.ks->size_b},
                                           {"mean_delta", c.ks->mean_delta},
                                           {"variance_delta", c.ks->variance_delta}};
        }
        comps.push_back(cj);
    }
    j["excluded_paths"] = r.excluded_paths;
    j["checks"] = r.checks;
    j["pass"] = r.pass();
    return j;
}

inline nlohmann::ordered_json report_json(const LimitSimReport& r) {
    nlohmann::ordered_json j;
    j["model"] = r.config.model;
    j["draws"] = r.config.draws;
    j["fine_count"] = r.config.fine_count;
    j["seed"] = r.config.seed;
    j["u_1"] = r.u_summary;
    if (r.limit_variance) j["limit_variance"] = *r.limit_variance;
    auto& fps = j["fingerprints"] = nlohmann::ordered_json::array();
    for (const auto& f : r.summary) fps.push_back({{"name", f.name}, {"target", f.target}, {"estimate", f.value}});
    j["checks"] = r.checks;
    j["pass"] = r.pass();
    return j;
}

} // namespace milstein
