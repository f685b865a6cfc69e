#pragma once

// Executes a validated ExperimentConfig: writes a JSON report and a data file
// (CSV or JSON) stamped with the config hash, prints a table, and maps the
// outcome to an exit code.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "milstein/cli/config.hpp"
#include "milstein/lemmas.hpp"
#include "milstein/montecarlo.hpp"
#include "milstein/schemes.hpp"

namespace milstein::cli {

enum ExitCode : int { kPass = 0, kChecksFailed = 1, kUsageError = 2, kRuntimeFailure = 3 };

inline constexpr int kCsvVersion = 1;

struct RunResult {
    bool pass = true;
    nlohmann::ordered_json report;
    // Tabular data: header plus rows of already formatted cells.
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::string table; // human-readable summary
};

namespace detail {

inline std::string num(double v) {
    // Shortest round-trip text, identical to the JSON writer.
    return nlohmann::json(v).dump();
}

inline std::string fixed(double v, int prec = 6) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

inline std::string checks_table(const std::vector<Check>& checks) {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << "  " << std::left << std::setw(36) << c.name << std::right << std::setw(14) << fixed(c.value)
           << "  in [" << fixed(c.lo) << ", " << fixed(c.hi) << "]  " << (c.pass ? "PASS" : "FAIL") << "\n";
    }
    return os.str();
}

inline RunResult run_simulate(const ExperimentConfig& c) {
    const auto problem = make_model(c.model);
    const auto scheme = parse_scheme(c.scheme);
    check_scheme_for(problem, scheme);
    const auto rule = parse_fine_rule(c.rule);
    const auto table = std::make_shared<const DriverTable>(problem.driver, make_grid(c.n, c.fine_factor));
    const auto paths = static_cast<std::size_t>(c.paths);
    std::vector<SchemeOutput> outs(paths);
    parallel_for(paths, c.threads, [&](std::size_t i) {
        const auto b = make_bundle(table, *c.seed, i);
        outs[i] = run_scheme(scheme, problem, b, c.n, rule);
    });
    RunResult r;
    const int q = problem.dim_q();
    r.columns = {"path_index", "t"};
    for (int i = 0; i < q; ++i) r.columns.push_back("x_" + std::to_string(i + 1));
    int diverged = 0;
    std::vector<double> finals;
    for (std::size_t p = 0; p < paths; ++p) {
        const auto& o = outs[p];
        if (o.diverged) ++diverged;
        else finals.push_back(o.final_value());
        for (int k = 0; k < o.points(); ++k) {
            std::vector<std::string> row = {std::to_string(p), num(static_cast<double>(k) / c.n)};
            for (int i = 0; i < q; ++i) row.push_back(num(o.at(k, i)));
            r.rows.push_back(std::move(row));
        }
    }
    r.report["paths"] = c.paths;
    r.report["diverged_paths"] = diverged;
    std::ostringstream os;
    os << "simulate " << c.model << " / " << c.scheme << ", n = " << c.n << ", " << c.paths << " paths\n";
    if (!finals.empty()) {
        const auto s = summarize(finals);
        r.report["x1_first_component"] = s;
        os << "  X_1 (first component): mean " << fixed(s.mean) << " +- " << fixed(s.mean_se) << ", variance "
           << fixed(s.variance) << "\n";
    }
    os << "  diverged paths: " << diverged << "\n";
    r.table = os.str();
    return r;
}

inline RunResult run_rate(const ExperimentConfig& c) {
    RateConfig rc;
    rc.model = c.model;
    rc.scheme = parse_scheme(c.scheme);
    rc.n_list = c.n_list;
    rc.paths = c.paths;
    rc.fine_factor = c.fine_factor;
    rc.fine_count = c.fine_count;
    rc.seed = *c.seed;
    rc.threads = c.threads;
    rc.rule = parse_fine_rule(c.rule);
    const auto rep = run_rate_experiment(rc);
    RunResult r;
    r.pass = rep.pass();
    r.report = report_json(rep);
    r.columns = {"n", "rms_error", "rms_error_se", "mean", "mean_se", "variance", "variance_se", "sup_rms_error"};
    std::ostringstream os;
    os << "rate " << c.model << " / " << c.scheme << ", " << rep.used_paths << " paths (" << rep.excluded_paths
       << " excluded)\n";
    os << "  " << std::setw(6) << "n" << std::setw(16) << "rms error" << std::setw(14) << "se" << std::setw(16)
       << "sup rms" << "\n";
    for (const auto& p : rep.points) {
        r.rows.push_back({std::to_string(p.n), num(p.rms), num(p.rms_se), num(p.mean), num(p.mean_se),
                          num(p.variance), num(p.variance_se), num(p.sup_rms)});
        os << "  " << std::setw(6) << p.n << std::setw(16) << fixed(p.rms) << std::setw(14) << fixed(p.rms_se, 3)
           << std::setw(16) << fixed(p.sup_rms) << "\n";
    }
    os << "  slope " << fixed(rep.fit->slope) << ", r^2 " << fixed(rep.fit->r_squared) << "\n";
    os << checks_table(rep.checks);
    r.table = os.str();
    return r;
}

inline RunResult run_error_law(const ExperimentConfig& c) {
    ErrorLawConfig ec;
    ec.model = c.model;
    ec.scheme = parse_scheme(c.scheme);
    ec.n = c.n;
    ec.paths = c.paths;
    ec.fine_factor = c.fine_factor;
    ec.limit_fine_count = c.limit_fine_count();
    ec.seed = *c.seed;
    ec.threads = c.threads;
    ec.rule = parse_fine_rule(c.rule);
    const auto rep = milstein::run_error_law(ec);
    RunResult r;
    r.pass = rep.pass();
    r.report = report_json(rep);
    const int q = static_cast<int>(rep.components.size());
    r.columns = {"index", "source"};
    for (int i = 0; i < q; ++i) r.columns.push_back("u_" + std::to_string(i + 1));
    auto emit = [&](const std::vector<double>& xs, const char* source) {
        const std::size_t count = xs.size() / static_cast<std::size_t>(q);
        for (std::size_t k = 0; k < count; ++k) {
            std::vector<std::string> row = {std::to_string(k), source};
            for (int i = 0; i < q; ++i) row.push_back(num(xs[k * static_cast<std::size_t>(q) + static_cast<std::size_t>(i)]));
            r.rows.push_back(std::move(row));
        }
    };
    emit(rep.scheme_samples, "scheme");
    emit(rep.limit_samples, "limit");
    std::ostringstream os;
    os << "error-law " << c.model << " / " << c.scheme << ", n = " << c.n << ", normalization " << rep.normalization
       << "\n";
    for (const auto& comp : rep.components) {
        os << "  component " << comp.component << ": scheme mean " << fixed(comp.scheme.mean) << " var "
           << fixed(comp.scheme.variance) << " | limit mean " << fixed(comp.limit.mean) << " var "
           << fixed(comp.limit.variance) << "\n";
    }
    os << checks_table(rep.checks);
    r.table = os.str();
    return r;
}

inline RunResult run_lemma_check(const ExperimentConfig& c) {
    LemmaConfig lc;
    lc.coarse_n = c.n;
    lc.fine_factor = c.fine_factor;
    lc.paths = c.paths;
    lc.seed = *c.seed;
    lc.threads = c.threads;
    const auto rows = lemma_oracles(c.lemma_case, lc);
    RunResult r;
    r.columns = {"case", "label", "n", "estimate", "target", "se", "budget", "pass"};
    auto& arr = r.report["rows"] = nlohmann::ordered_json::array();
    std::ostringstream os;
    os << "  " << std::left << std::setw(8) << "case" << std::setw(36) << "statistic" << std::right << std::setw(6)
       << "n" << std::setw(14) << "estimate" << std::setw(12) << "target" << std::setw(12) << "se" << "  pass\n";
    for (const auto& row : rows) {
        r.pass = r.pass && row.pass;
        r.rows.push_back({row.case_id, row.label, std::to_string(row.coarse_n), num(row.estimate), num(row.target),
                          num(row.se), num(row.budget), row.pass ? "1" : "0"});
        arr.push_back({{"case", row.case_id},
                       {"label", row.label},
                       {"n", row.coarse_n},
                       {"estimate", row.estimate},
                       {"target", row.target},
                       {"se", row.se},
                       {"budget", row.budget},
                       {"null", row.null_case},
                       {"pass", row.pass}});
        os << "  " << std::left << std::setw(8) << row.case_id << std::setw(36) << row.label << std::right
           << std::setw(6) << row.coarse_n << std::setw(14) << fixed(row.estimate) << std::setw(12)
           << fixed(row.target) << std::setw(12) << fixed(row.se, 3) << "  " << (row.pass ? "PASS" : "FAIL")
           << "\n";
    }
    r.report["pass"] = r.pass;
    r.table = os.str();
    return r;
}

inline RunResult run_limit_sim(const ExperimentConfig& c) {
    LimitSimConfig lc;
    lc.model = c.model;
    lc.draws = c.draws;
    lc.fine_count = c.limit_fine_count();
    lc.seed = *c.seed;
    lc.threads = c.threads;
    const auto rep = milstein::run_limit_sim(lc);
    RunResult r;
    r.pass = rep.pass();
    r.report = report_json(rep);
    r.columns = {"draw"};
    for (int i = 0; i < rep.dim_q; ++i) r.columns.push_back("u_" + std::to_string(i + 1));
    for (const char* f : {"qv_mm", "qv_nn", "qv_nm", "qv_ny", "qv_my"}) r.columns.push_back(f);
    for (int k = 0; k < c.draws; ++k) {
        std::vector<std::string> row = {std::to_string(k)};
        for (int i = 0; i < rep.dim_q; ++i) row.push_back(num(rep.u_final[static_cast<std::size_t>(k * rep.dim_q + i)]));
        for (int f = 0; f < 5; ++f) row.push_back(num(rep.fingerprints[static_cast<std::size_t>(k * 5 + f)]));
        r.rows.push_back(std::move(row));
    }
    std::ostringstream os;
    os << "limit-sim " << c.model << ", " << c.draws << " draws on " << lc.fine_count << " cells\n";
    os << "  U_1: mean " << fixed(rep.u_summary.mean) << ", variance " << fixed(rep.u_summary.variance) << " +- "
       << fixed(rep.u_summary.variance_se, 3) << "\n";
    os << checks_table(rep.checks);
    r.table = os.str();
    return r;
}

inline std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

inline void write_csv(std::ostream& out, const RunResult& r, const std::string& hash) {
    out << "# csv_version=" << kCsvVersion << " config_hash=" << hash << "\n";
    for (std::size_t i = 0; i < r.columns.size(); ++i) out << (i ? "," : "") << r.columns[i];
    out << "\n";
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
        out << "\n";
    }
}

inline void write_data_json(std::ostream& out, const RunResult& r, const std::string& hash) {
    nlohmann::ordered_json j;
    j["config_hash"] = hash;
    j["columns"] = r.columns;
    j["rows"] = r.rows;
    out << j.dump() << "\n";
}

} // namespace detail

/// Output directory: the configured one, else $MILSTEIN_OUT_DIR, else ".".
inline std::filesystem::path output_dir(const ExperimentConfig& c) {
    if (!c.out.empty()) return c.out;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return ".";
}

inline RunResult execute(const ExperimentConfig& c) {
    if (!c.seed) throw ConfigError({"missing seed (an explicit seed is required)"});
    if (c.verb == "simulate") return detail::run_simulate(c);
    if (c.verb == "rate") return detail::run_rate(c);
    if (c.verb == "error-law") return detail::run_error_law(c);
    if (c.verb == "lemma-check") return detail::run_lemma_check(c);
    if (c.verb == "limit-sim") return detail::run_limit_sim(c);
    throw ConfigError({"unknown verb '" + c.verb + "'"});
}

struct Artifacts {
    std::filesystem::path report;
    std::filesystem::path data;
};

inline Artifacts artifact_paths(const ExperimentConfig& c) {
    const auto dir = output_dir(c);
    const std::string stem = c.verb + "_" + config_hash(c);
    return {dir / (stem + ".report.json"), dir / (stem + (c.format == "json" ? ".data.json" : ".csv"))};
}

/// Full report (config echo, hash, results) as serialized to disk.
inline nlohmann::ordered_json full_report(const ExperimentConfig& c, const RunResult& r) {
    nlohmann::ordered_json j;
    j["verb"] = c.verb;
    j["config_hash"] = config_hash(c);
    j["config"] = canonical_text(c);
    j["result"] = r.report;
    j["pass"] = r.pass;
    return j;
}

/// Runs the experiment and writes its artifacts. Files are written under
/// temporary names and renamed at the end; nothing is left behind on failure.
/// Returns the exit code; errors are reported on `err`.
inline int run(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
    Artifacts art;
    std::vector<std::filesystem::path> temps;
    auto cleanup = [&] {
        std::error_code ec;
        for (const auto& t : temps) std::filesystem::remove(t, ec);
    };
    try {
        const auto result = execute(c);
        art = artifact_paths(c);
        std::filesystem::create_directories(art.report.parent_path());
        const auto hash = config_hash(c);
        const auto tmp_report = art.report.string() + ".tmp";
        const auto tmp_data = art.data.string() + ".tmp";
        temps = {tmp_report, tmp_data};
        {
            std::ofstream f(tmp_report, std::ios::binary);
            f << full_report(c, result).dump(2) << "\n";
            if (!f) throw std::runtime_error("cannot write " + tmp_report);
        }
        {
            std::ofstream f(tmp_data, std::ios::binary);
            if (c.format == "json") detail::write_data_json(f, result, hash);
            else detail::write_csv(f, result, hash);
            if (!f) throw std::runtime_error("cannot write " + tmp_data);
        }
        std::filesystem::rename(tmp_report, art.report);
        std::filesystem::rename(tmp_data, art.data);
        temps.clear();
        out << "config_hash " << hash << "\n" << result.table;
        out << "report: " << art.report.string() << "\ndata:   " << art.data.string() << "\n";
        out << (result.pass ? "PASS" : "FAIL") << "\n";
        return result.pass ? kPass : kChecksFailed;
    } catch (const ConfigError& e) {
        cleanup();
        for (const auto& m : e.errors()) err << "error: " << m << "\n";
        return kUsageError;
    } catch (const InvalidArgument& e) {
        cleanup();
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        cleanup();
        err << "runtime failure: " << e.what() << "\n";
        return kRuntimeFailure;
    }
}

} // namespace milstein::cli
