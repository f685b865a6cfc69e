#pragma once

// Experiment configuration: a flat key = value file merged with command-line
// overrides, validated in one pass so every problem is reported together.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "milstein/grid.hpp"
#include "milstein/iterated.hpp"
#include "milstein/lemmas.hpp"
#include "milstein/limits.hpp"
#include "milstein/model.hpp"
#include "milstein/schemes.hpp"

namespace milstein::cli {

inline constexpr const char* kOutDirEnv = "MILSTEIN_OUT_DIR";

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
    const std::vector<std::string>& errors() const noexcept { return errors_; }

  private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s;
        for (const auto& x : e) s += (s.empty() ? "" : "; ") + x;
        return s;
    }
    std::vector<std::string> errors_;
};

using KeyValues = std::map<std::string, std::string>;

inline const std::vector<std::string>& verbs() {
    static const std::vector<std::string> v = {"simulate", "rate", "error-law", "lemma-check", "limit-sim"};
    return v;
}

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> k = {"verb",        "model",      "scheme",  "case",    "n",
                                               "n_list",      "paths",      "draws",   "fine_factor",
                                               "fine_count",  "seed",       "threads", "out",     "format",
                                               "rule"};
    return k;
}

/// Keys that take part in the results (and hence the hash) for each verb.
inline const std::vector<std::string>& verb_keys(const std::string& verb) {
    static const std::map<std::string, std::vector<std::string>> keys = {
        {"simulate", {"verb", "model", "scheme", "n", "fine_factor", "paths", "seed", "rule", "format"}},
        {"rate", {"verb", "model", "scheme", "n_list", "fine_factor", "fine_count", "paths", "seed", "rule", "format"}},
        {"error-law", {"verb", "model", "scheme", "n", "fine_factor", "fine_count", "paths", "seed", "rule", "format"}},
        {"lemma-check", {"verb", "case", "n", "fine_factor", "paths", "seed", "format"}},
        {"limit-sim", {"verb", "model", "draws", "fine_count", "seed", "format"}},
    };
    static const std::vector<std::string> none;
    const auto it = keys.find(verb);
    return it == keys.end() ? none : it->second;
}

struct ExperimentConfig {
    std::string verb;
    std::string model;
    std::string scheme = "milstein";
    std::string lemma_case;
    int n = 64;
    std::vector<int> n_list = {16, 32, 64, 128};
    int paths = 10000;
    int draws = 10000;
    int fine_factor = 64;
    int fine_count = 0; // rate: fine grid (0 = max n * fine_factor); error-law, limit-sim: limit grid
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string out;
    std::string format = "csv";
    std::string rule = "bridge";

    int limit_fine_count() const { return fine_count > 0 ? fine_count : kDefaultLimitFineCount; }
};

inline std::string normalize_key(std::string k) {
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Parses `key = value` lines; '#' starts a comment. Throws ConfigError listing
/// every malformed line and unknown key.
inline KeyValues parse_config_text(const std::string& text) {
    KeyValues kv;
    std::vector<std::string> errors;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const auto key = normalize_key(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));
        if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
            errors.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
            continue;
        }
        if (kv.count(key)) errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = value;
    }
    if (!errors.empty()) throw ConfigError(errors);
    return kv;
}

inline KeyValues read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// File values first, then overrides.
inline KeyValues merge(KeyValues base, const KeyValues& overrides) {
    for (const auto& [k, v] : overrides) base[normalize_key(k)] = v;
    return base;
}

namespace detail {

template <class T>
std::optional<T> parse_number(const std::string& s) {
    T v{};
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) return std::nullopt;
    return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    return out;
}

} // namespace detail

/// Builds and validates a config. Throws ConfigError with all problems found.
inline ExperimentConfig parse_config(const KeyValues& raw) {
    KeyValues kv;
    for (const auto& [k, v] : raw) kv[normalize_key(k)] = v;
    ExperimentConfig c;
    std::vector<std::string> errors;
    for (const auto& [k, v] : kv)
        if (std::find(known_keys().begin(), known_keys().end(), k) == known_keys().end())
            errors.push_back("unknown key '" + k + "'");

    auto get = [&](const char* key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    auto positive = [&](const char* key, int& field) {
        if (const auto v = get(key)) {
            const auto x = detail::parse_number<int>(*v);
            if (!x || *x < 1) errors.push_back(std::string(key) + " must be a positive integer, got '" + *v + "'");
            else field = *x;
        }
    };

    if (const auto v = get("verb")) c.verb = *v;
    if (c.verb.empty()) errors.push_back("missing verb");
    else if (std::find(verbs().begin(), verbs().end(), c.verb) == verbs().end())
        errors.push_back("unknown verb '" + c.verb + "'");

    if (const auto v = get("model")) c.model = *v;
    if (const auto v = get("scheme")) c.scheme = *v;
    if (const auto v = get("case")) c.lemma_case = *v;
    if (const auto v = get("out")) c.out = *v;
    if (const auto v = get("format")) c.format = *v;
    if (const auto v = get("rule")) c.rule = *v;
    positive("n", c.n);
    positive("paths", c.paths);
    positive("draws", c.draws);
    positive("fine_factor", c.fine_factor);
    positive("fine_count", c.fine_count);
    positive("threads", c.threads);
    if (const auto v = get("n_list")) {
        c.n_list.clear();
        bool ok = !v->empty();
        for (const auto& part : detail::split(*v, ',')) {
            const auto x = detail::parse_number<int>(part);
            if (!x || *x < 1) ok = false;
            else c.n_list.push_back(*x);
        }
        if (!ok) errors.push_back("n_list must be a comma-separated list of positive integers, got '" + *v + "'");
    }
    if (const auto v = get("seed")) {
        const auto x = detail::parse_number<std::uint64_t>(*v);
        if (!x) errors.push_back("seed must be a non-negative integer, got '" + *v + "'");
        else c.seed = *x;
    } else {
        errors.push_back("missing seed (an explicit seed is required)");
    }

    const bool needs_model = c.verb == "simulate" || c.verb == "rate" || c.verb == "error-law" || c.verb == "limit-sim";
    std::optional<SdeProblem> problem;
    if (needs_model) {
        if (c.model.empty()) errors.push_back("missing model");
        else if (!builtin_models().count(c.model)) errors.push_back("unknown model '" + c.model + "'");
        else problem = make_model(c.model);
    }
    const bool needs_scheme = c.verb == "simulate" || c.verb == "rate" || c.verb == "error-law";
    if (needs_scheme) {
        if (c.scheme != "euler" && c.scheme != "milstein" && c.scheme != "milstein54") {
            errors.push_back("unknown scheme '" + c.scheme + "' (euler, milstein, milstein54)");
        } else if (c.scheme == "milstein54" && problem && !problem->ito) {
            errors.push_back("scheme milstein54 needs an Ito model; '" + c.model + "' is not one");
        } else if (c.verb == "error-law" && c.scheme == "euler") {
            errors.push_back("error-law compares Milstein errors; use scheme milstein or milstein54");
        }
    }
    if (c.rule != "bridge" && c.rule != "ito") errors.push_back("unknown rule '" + c.rule + "' (bridge, ito)");
    if (c.format != "csv" && c.format != "json") errors.push_back("unknown format '" + c.format + "' (csv, json)");
    if (c.verb == "lemma-check") {
        const auto& ids = lemma_cases();
        if (c.lemma_case.empty()) errors.push_back("missing case");
        else if (std::find(ids.begin(), ids.end(), c.lemma_case) == ids.end())
            errors.push_back("unknown case '" + c.lemma_case + "'");
        if (c.paths < static_cast<int>(kMinMomentSamples))
            errors.push_back("lemma-check needs at least " + std::to_string(kMinMomentSamples) + " paths");
    }
    if (c.verb == "rate" && !c.n_list.empty()) {
        if (c.n_list.size() < 3) errors.push_back("n_list needs at least 3 values");
        const auto [lo, hi] = std::minmax_element(c.n_list.begin(), c.n_list.end());
        if (*hi < 8 * *lo) errors.push_back("n_list must span at least a factor 8");
        const long long fine = c.fine_count > 0 ? c.fine_count : static_cast<long long>(*hi) * c.fine_factor;
        for (int n : c.n_list)
            if (fine % n != 0)
                errors.push_back("n = " + std::to_string(n) + " does not divide the fine grid of " +
                                 std::to_string(fine) + " cells");
        if (fine > kMaxFineCount) errors.push_back("fine grid too large");
    }
    if (c.verb == "error-law") {
        if (problem && !problem->fv_density && c.paths < static_cast<int>(kMinKsSamples))
            errors.push_back("error-law needs at least " + std::to_string(kMinKsSamples) + " paths");
    }
    if (c.verb == "limit-sim" && c.draws < static_cast<int>(kMinMomentSamples))
        errors.push_back("limit-sim needs at least " + std::to_string(kMinMomentSamples) + " draws");
    if (!errors.empty()) throw ConfigError(errors);
    return c;
}

inline std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (int x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
    return s;
}

/// Value of one key as written in canonical config text.
inline std::string config_value(const ExperimentConfig& c, const std::string& key) {
    if (key == "verb") return c.verb;
    if (key == "model") return c.model;
    if (key == "scheme") return c.scheme;
    if (key == "case") return c.lemma_case;
    if (key == "n") return std::to_string(c.n);
    if (key == "n_list") return join_ints(c.n_list);
    if (key == "paths") return std::to_string(c.paths);
    if (key == "draws") return std::to_string(c.draws);
    if (key == "fine_factor") return std::to_string(c.fine_factor);
    if (key == "fine_count") return std::to_string(c.fine_count);
    if (key == "seed") return c.seed ? std::to_string(*c.seed) : "";
    if (key == "threads") return std::to_string(c.threads);
    if (key == "out") return c.out;
    if (key == "format") return c.format;
    if (key == "rule") return c.rule;
    throw InvalidArgument("unknown key '" + key + "'");
}

/// The result-determining keys of the verb, one `key = value` per line in a
/// fixed order. Threads and the output location are not part of it.
inline std::string canonical_text(const ExperimentConfig& c) {
    std::string s;
    for (const auto& k : verb_keys(c.verb)) {
        if (k == "fine_count" && c.fine_count == 0) continue;
        s += k + " = " + config_value(c, k) + "\n";
    }
    return s;
}

/// Full config file text, including threads and out when set.
inline std::string to_config_text(const ExperimentConfig& c) {
    std::string s = canonical_text(c);
    if (c.threads != 1) s += "threads = " + std::to_string(c.threads) + "\n";
    if (!c.out.empty()) s += "out = " + c.out + "\n";
    return s;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_text(c))));
    return buf;
}

} // namespace milstein::cli
