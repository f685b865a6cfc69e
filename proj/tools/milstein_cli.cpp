#include <algorithm>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "milstein/cli/config.hpp"
#include "milstein/cli/run.hpp"

namespace mc = milstein::cli;

int main(int argc, char** argv) {
    CLI::App app{"Milstein scheme experiments: simulate, rate, error-law, lemma-check, limit-sim"};
    std::string verb, config_file;
    app.add_option("verb", verb, "simulate | rate | error-law | lemma-check | limit-sim")->required();
    app.add_option("--config", config_file, "key = value config file; flags override its values");

    struct Flag {
        const char* key;
        const char* help;
    };
    // Only flags given on the command line override the config file.
    const std::map<std::string, Flag> flags = {
        {"--model", {"model", "model name (gbm, gbm-drift, det-exp, fv-ramp, ou, ito-trig, linear2d)"}},
        {"--scheme", {"scheme", "euler | milstein | milstein54 (default milstein)"}},
        {"--case", {"case", "lemma case: 7.2a..7.2d, 7.3a..7.3e, 7.4a, 7.4b, 7.6, 7.7-80, null"}},
        {"--n", {"n", "number of coarse steps (default 64)"}},
        {"--n-list", {"n_list", "comma-separated coarse step counts for rate (default 16,32,64,128)"}},
        {"--paths", {"paths", "number of paths (default 10000)"}},
        {"--draws", {"draws", "number of limit draws (default 10000)"}},
        {"--fine-factor", {"fine_factor", "fine cells per coarse cell (default 64)"}},
        {"--fine-count", {"fine_count", "fine grid size: rate grid or limit grid (default 4096 for limits)"}},
        {"--seed", {"seed", "master seed (required)"}},
        {"--threads", {"threads", "worker threads; results do not depend on it (default 1)"}},
        {"--out", {"out", "output directory"}},
        {"--format", {"format", "data file format: csv | json (default csv)"}},
        {"--rule", {"rule", "fine-cell rule for iterated integrals: bridge | ito (default bridge)"}},
    };
    std::map<std::string, std::string> values;
    for (const auto& [flag, f] : flags) app.add_option(flag, values[f.key], f.help);
    app.footer("Output directory defaults to $" + std::string(mc::kOutDirEnv) + " or the current directory.\n"
               "Exit codes: 0 pass, 1 checks failed, 2 usage or config error, 3 runtime failure.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return mc::kUsageError;
    }

    try {
        mc::KeyValues overrides;
        for (const auto& [flag, f] : flags)
            if (app.count(flag) > 0) overrides[f.key] = values[f.key];
        overrides["verb"] = verb;
        mc::KeyValues base;
        if (!config_file.empty()) base = mc::read_config_file(config_file);
        const auto config = mc::parse_config(mc::merge(base, overrides));
        return mc::run(config, std::cout, std::cerr);
    } catch (const mc::ConfigError& e) {
        for (const auto& m : e.errors()) std::cerr << "error: " << m << "\n";
        if (std::find(mc::verbs().begin(), mc::verbs().end(), verb) == mc::verbs().end()) std::cerr << app.help();
        return mc::kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return mc::kRuntimeFailure;
    }
}
