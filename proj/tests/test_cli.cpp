#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "milstein/cli/config.hpp"
#include "milstein/cli/run.hpp"

namespace fs = std::filesystem;
namespace mc = milstein::cli;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("milstein_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

mc::ExperimentConfig lemma_config(const fs::path& out) {
    return mc::parse_config({{"verb", "lemma-check"}, {"case", "7.3b"}, {"n", "8"}, {"fine_factor", "8"},
                             {"paths", "200"}, {"seed", "4"}, {"out", out.string()}});
}

int run_quiet(const mc::ExperimentConfig& c) {
    std::ostringstream out, err;
    return mc::run(c, out, err);
}

std::vector<std::string> errors_of(const mc::KeyValues& kv) {
    try {
        mc::parse_config(kv);
    } catch (const mc::ConfigError& e) {
        return e.errors();
    }
    return {};
}

bool mentions(const std::vector<std::string>& errors, const std::string& what) {
    for (const auto& e : errors)
        if (e.find(what) != std::string::npos) return true;
    return false;
}

} // namespace

TEST(ConfigText, ParsesCommentsAndDashes) {
    const auto kv = mc::parse_config_text("# experiment\nverb = rate\n  fine-factor=32  # per cell\n\nseed = 7\n");
    EXPECT_EQ(kv.at("verb"), "rate");
    EXPECT_EQ(kv.at("fine_factor"), "32");
    EXPECT_EQ(kv.at("seed"), "7");
}

TEST(ConfigText, ReportsEveryBadLine) {
    try {
        mc::parse_config_text("verb rate\ncolour = red\nseed = 1\nseed = 2\n");
        FAIL();
    } catch (const mc::ConfigError& e) {
        ASSERT_EQ(e.errors().size(), 3u);
        EXPECT_TRUE(mentions(e.errors(), "line 1"));
        EXPECT_TRUE(mentions(e.errors(), "unknown key 'colour'"));
        EXPECT_TRUE(mentions(e.errors(), "duplicate key 'seed'"));
    }
}

TEST(Config, FlagsOverrideFile) {
    const auto file = mc::parse_config_text("verb = simulate\nmodel = gbm\nn = 16\nseed = 3\n");
    const auto c = mc::parse_config(mc::merge(file, {{"n", "32"}, {"fine-factor", "2"}}));
    EXPECT_EQ(c.n, 32);
    EXPECT_EQ(c.fine_factor, 2);
    EXPECT_EQ(c.model, "gbm");
    EXPECT_EQ(*c.seed, 3u);
}

TEST(Config, SeedIsRequired) {
    EXPECT_TRUE(mentions(errors_of({{"verb", "simulate"}, {"model", "gbm"}}), "missing seed"));
}

TEST(Config, CollectsAllErrors) {
    const auto e = errors_of({{"verb", "rate"}, {"model", "gbm"}, {"n_list", "12,16,32"}, {"seed", "x"},
                              {"threads", "0"}});
    EXPECT_TRUE(mentions(e, "seed must be"));
    EXPECT_TRUE(mentions(e, "threads must be"));
    EXPECT_TRUE(mentions(e, "factor 8"));
    EXPECT_TRUE(mentions(e, "n = 12 does not divide"));
}

TEST(Config, TwelveDoesNotDivide4096) {
    const auto e = errors_of({{"verb", "rate"}, {"model", "gbm"}, {"n_list", "4,12,64"}, {"fine_count", "4096"},
                              {"seed", "1"}});
    ASSERT_EQ(e.size(), 1u);
    EXPECT_EQ(e[0], "n = 12 does not divide the fine grid of 4096 cells");
}

TEST(Config, ModelAndSchemeValidation) {
    EXPECT_TRUE(mentions(errors_of({{"verb", "simulate"}, {"model", "heston"}, {"seed", "1"}}), "unknown model"));
    EXPECT_TRUE(mentions(errors_of({{"verb", "simulate"}, {"model", "gbm"}, {"scheme", "milstein54"}, {"seed", "1"}}),
                         "needs an Ito model"));
    EXPECT_TRUE(mentions(errors_of({{"verb", "error-law"}, {"model", "gbm"}, {"scheme", "euler"}, {"seed", "1"}}),
                         "error-law compares"));
    EXPECT_TRUE(mentions(errors_of({{"verb", "lemma-check"}, {"case", "9.9"}, {"seed", "1"}}), "unknown case"));
    EXPECT_TRUE(mentions(errors_of({{"verb", "fly"}, {"seed", "1"}}), "unknown verb"));
    EXPECT_TRUE(mentions(errors_of({{"verb", "simulate"}, {"model", "gbm"}, {"seed", "1"}, {"format", "xml"}}),
                         "unknown format"));
}

TEST(ConfigHash, RoundTripAndScope) {
    const auto a = mc::parse_config({{"verb", "rate"}, {"model", "gbm"}, {"seed", "5"}, {"threads", "4"}});
    const auto text = mc::to_config_text(a);
    const auto b = mc::parse_config(mc::parse_config_text(text));
    EXPECT_EQ(mc::config_hash(a), mc::config_hash(b));
    EXPECT_EQ(mc::config_hash(a).size(), 16u);
    auto c = a;
    c.threads = 1;
    c.out = "/elsewhere";
    EXPECT_EQ(mc::config_hash(a), mc::config_hash(c));
    c.seed = 6;
    EXPECT_NE(mc::config_hash(a), mc::config_hash(c));
}

TEST(ConfigHash, Fnv1aVectors) {
    EXPECT_EQ(mc::fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(mc::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(mc::fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Run, WritesStampedArtifacts) {
    const auto dir = scratch_dir("artifacts");
    const auto c = lemma_config(dir);
    EXPECT_EQ(run_quiet(c), mc::kPass);
    const auto art = mc::artifact_paths(c);
    const auto hash = mc::config_hash(c);
    EXPECT_EQ(art.report.filename().string(), "lemma-check_" + hash + ".report.json");
    const auto report = nlohmann::json::parse(slurp(art.report));
    EXPECT_EQ(report["config_hash"], hash);
    EXPECT_EQ(report["pass"], true);
    const auto csv = slurp(art.data);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "# csv_version=1 config_hash=" + hash);
    EXPECT_NE(csv.find("case,label,n,estimate,target,se,budget,pass"), std::string::npos);
    for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST(Run, JsonDataFormat) {
    const auto dir = scratch_dir("json");
    auto kv = mc::KeyValues{{"verb", "simulate"}, {"model", "linear2d"}, {"n", "4"}, {"fine_factor", "2"},
                            {"paths", "3"}, {"seed", "1"}, {"format", "json"}, {"out", dir.string()}};
    const auto c = mc::parse_config(kv);
    EXPECT_EQ(run_quiet(c), mc::kPass);
    const auto data = nlohmann::json::parse(slurp(mc::artifact_paths(c).data));
    EXPECT_EQ(data["config_hash"], mc::config_hash(c));
}

TEST(Run, ChecksFailedExitCode) {
    // with one sub-cell the ito rule drops the iterated integral, so Milstein is first order
    const auto dir = scratch_dir("fail");
    const auto c = mc::parse_config({{"verb", "rate"}, {"model", "det-exp"}, {"rule", "ito"}, {"n_list", "2,4,16"},
                                     {"fine_factor", "1"}, {"paths", "1"}, {"seed", "2"}, {"out", dir.string()}});
    EXPECT_EQ(run_quiet(c), mc::kChecksFailed);
}

TEST(Run, RuntimeFailureLeavesNothing) {
    const auto dir = scratch_dir("runtime");
    const auto blocker = dir / "file";
    std::ofstream(blocker) << "x";
    auto c = lemma_config(blocker / "sub");
    EXPECT_EQ(run_quiet(c), mc::kRuntimeFailure);
    EXPECT_TRUE(fs::is_regular_file(blocker));
}

TEST(Run, UsageErrorWithoutSeed) {
    auto c = lemma_config(scratch_dir("noseed"));
    c.seed.reset();
    EXPECT_EQ(run_quiet(c), mc::kUsageError);
}

TEST(Run, OutputDirectoryFromEnvironment) {
    const auto dir = scratch_dir("env");
    auto c = lemma_config(dir);
    c.out.clear();
    ::setenv(mc::kOutDirEnv, dir.string().c_str(), 1);
    EXPECT_EQ(mc::output_dir(c), dir);
    EXPECT_EQ(run_quiet(c), mc::kPass);
    EXPECT_TRUE(fs::exists(dir / ("lemma-check_" + mc::config_hash(c) + ".report.json")));
    ::unsetenv(mc::kOutDirEnv);
    EXPECT_EQ(mc::output_dir(c), fs::path("."));
}

TEST(Run, ThreadsGiveIdenticalBytes) {
    for (const auto& verb : {"lemma-check", "rate", "limit-sim"}) {
        const auto d1 = scratch_dir(std::string("t1_") + verb), d2 = scratch_dir(std::string("t3_") + verb);
        mc::KeyValues kv{{"verb", verb}, {"seed", "11"}, {"model", "ito-trig"}, {"case", "7.6"}, {"n", "8"},
                         {"fine_factor", "8"}, {"n_list", "4,8,32"}, {"paths", "120"}, {"draws", "60"},
                         {"fine_count", "256"}};
        kv["out"] = d1.string();
        auto a = mc::parse_config(kv);
        kv["out"] = d2.string();
        kv["threads"] = "3";
        auto b = mc::parse_config(kv);
        run_quiet(a);
        run_quiet(b);
        const auto pa = mc::artifact_paths(a), pb = mc::artifact_paths(b);
        EXPECT_EQ(pa.report.filename(), pb.report.filename());
        EXPECT_EQ(slurp(pa.report), slurp(pb.report)) << verb;
        EXPECT_EQ(slurp(pa.data), slurp(pb.data)) << verb;
        EXPECT_FALSE(slurp(pa.report).empty());
    }
}

TEST(Binary, ExitCodes) {
    const std::string exe = MILSTEIN_CLI_PATH;
    const auto dir = scratch_dir("binary");
    auto status = [&](const std::string& args) {
        const int s = std::system((exe + " " + args + " >/dev/null 2>&1").c_str());
        return WEXITSTATUS(s);
    };
    EXPECT_EQ(status("fly --seed 1"), 2);
    EXPECT_EQ(status("simulate --model gbm"), 2);
    EXPECT_EQ(status("simulate --model gbm --seed 1 --bogus 3"), 2);
    EXPECT_EQ(status("lemma-check --case 7.3a --n 8 --fine-factor 8 --paths 100 --seed 1 --out " + dir.string()), 0);
    const auto cfg = dir / "exp.cfg";
    std::ofstream(cfg) << "verb = lemma-check\ncase = 7.3b\nn = 4\nfine_factor = 4\npaths = 50\nseed = 1\nout = " +
                              dir.string() + "\n";
    EXPECT_EQ(status("lemma-check --config " + cfg.string() + " --paths 60"), 0);
    EXPECT_EQ(status("lemma-check --config " + (dir / "missing.cfg").string()), 2);
}
