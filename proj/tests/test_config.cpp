#include "hdsac/config.hpp"
#include "hdsac/errors.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <set>

using namespace hdsac;
namespace fs = std::filesystem;

namespace {

bool is_bool(const std::string& s) { return s == "true" || s == "false"; }

bool is_integer(const std::string& s) {
    return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

/// A different but valid text value for `key`, chosen from its current form.
std::string random_value(const std::string& key, const std::string& current, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> small(1, 400);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (key == "run.algorithm") return std::vector<std::string>{"hdsac", "sac", "pvp"}[rng() % 3];
    if (key == "run.supervisor") {
        switch (rng() % 4) {
            case 0: return "scripted";
            case 1: return "none";
            case 2: return "replay:/tmp/s" + std::to_string(small(rng)) + "/session.txt";
            default: return "remote:" + std::to_string(1024 + small(rng));
        }
    }
    if (key == "trainer.hidden") {
        std::string s = std::to_string(small(rng));
        for (int i = 0, n = static_cast<int>(rng() % 3); i < n; ++i) s += "," + std::to_string(small(rng));
        return s;
    }
    if (key == "run.output_dir" || key == "bridge.address") return "dir_" + std::to_string(rng());
    if (key == "bridge.port") return std::to_string(1 + rng() % 65535);
    if (is_bool(current)) return rng() % 2 ? "true" : "false";
    if (is_integer(current)) return std::to_string(small(rng));
    // Doubles: arbitrary bit patterns within a sane range, so shortest
    // round-trip formatting is exercised.
    const double sign = current.front() == '-' ? -1.0 : 1.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", sign * std::ldexp(1.0 + unit(rng), static_cast<int>(rng() % 20) - 10));
    return buf;
}

}  // namespace

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(config::RunConfig{}.validate()); }

TEST(Config, EveryKeyIsReadableAndUnique) {
    const auto keys = config::keys();
    EXPECT_EQ(std::set<std::string>(keys.begin(), keys.end()).size(), keys.size());
    const config::RunConfig cfg;
    for (const auto& k : keys) EXPECT_NO_THROW(config::get(cfg, k)) << k;
}

TEST(Config, SerializeRoundTripOfDefaults) {
    const config::RunConfig cfg;
    EXPECT_EQ(config::parse(config::serialize(cfg)), cfg);
}

TEST(Config, SerializeRoundTripOfRandomConfigs) {
    std::mt19937_64 rng(11);
    const auto keys = config::keys();
    for (int trial = 0; trial < 200; ++trial) {
        config::RunConfig cfg;
        for (const auto& k : keys) {
            if (rng() % 2) config::set(cfg, k, random_value(k, config::get(cfg, k), rng));
        }
        const std::string text = config::serialize(cfg);
        const auto back = config::parse(text);
        ASSERT_EQ(back, cfg) << text;
        EXPECT_EQ(config::serialize(back), text);
    }
}

TEST(Config, DoublesKeepEveryBit) {
    config::RunConfig cfg;
    cfg.train.algo.gamma = 0.1 + 0.2;  // not representable in short decimal
    cfg.train.algo.critic_lr = 3e-4;
    EXPECT_EQ(config::get(cfg, "algo.critic_lr"), "3e-04");
    EXPECT_EQ(config::parse(config::serialize(cfg)).train.algo.gamma, 0.1 + 0.2);
}

TEST(Config, MissingKeysKeepDefaults) {
    const auto cfg = config::parse("[run]\nseed = 7\n");
    config::RunConfig expected;
    expected.train.seed = 7;
    EXPECT_EQ(cfg, expected);
}

TEST(Config, CommentsAndWhitespace) {
    const auto cfg = config::parse("# top\n\n  [algo]  \n; other comment\n  gamma   =  0.95  \n");
    EXPECT_EQ(cfg.train.algo.gamma, 0.95);
}

namespace {

std::string error_of(const std::string& text) {
    try {
        config::parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, UnknownKeyIsRejectedWithLine) {
    const auto msg = error_of("[algo]\ngamma = 0.9\ngamam = 0.9\n");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("algo.gamam"), std::string::npos) << msg;
}

TEST(Config, UnknownSectionIsRejected) {
    const auto msg = error_of("[run]\nseed = 1\n[algorithm]\n");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[algorithm]"), std::string::npos) << msg;
}

TEST(Config, DuplicateKeyIsRejected) {
    const auto msg = error_of("[run]\nseed = 1\n\nseed = 2\n");
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
}

TEST(Config, SyntaxErrors) {
    EXPECT_NE(error_of("seed = 1\n").find("outside of a section"), std::string::npos);
    EXPECT_NE(error_of("[run\n").find("unterminated"), std::string::npos);
    EXPECT_NE(error_of("[run]\nseed\n").find("key = value"), std::string::npos);
}

TEST(Config, BadValuesNameTheKey) {
    for (const std::string text : {"[run]\nseed = -1\n", "[run]\nseed = 1.5\n", "[algo]\ngamma = fast\n",
                                   "[run]\nrecord_session = yes\n", "[run]\nalgorithm = ppo\n",
                                   "[trainer]\nhidden = 64,,64\n", "[bridge]\nport = 70000\n"}) {
        const auto msg = error_of(text);
        EXPECT_NE(msg.find("line 2"), std::string::npos) << text << " -> " << msg;
    }
    EXPECT_NE(error_of("[algo]\ngamma = fast\n").find("algo.gamma"), std::string::npos);
}

TEST(Config, SupervisorSpecs) {
    EXPECT_EQ(config::parse_supervisor("scripted").kind, config::SupervisorSpec::Kind::scripted);
    const auto r = config::parse_supervisor("replay:/a/b.txt");
    EXPECT_EQ(r.kind, config::SupervisorSpec::Kind::replay);
    EXPECT_EQ(r.path, "/a/b.txt");
    const auto m = config::parse_supervisor("remote:9000");
    EXPECT_EQ(m.kind, config::SupervisorSpec::Kind::remote);
    EXPECT_EQ(m.port, 9000);
    EXPECT_EQ(config::parse_supervisor("none").kind, config::SupervisorSpec::Kind::none);
    for (const std::string bad : {"", "human", "replay:", "remote:", "remote:x", "remote:99999"})
        EXPECT_THROW(config::parse_supervisor(bad), ConfigError) << bad;
}

TEST(Config, OverridesApplyInOrder) {
    // File value, then --set, then a dedicated flag: the last write wins.
    auto cfg = config::parse("[run]\nseed = 3\n");
    config::set(cfg, "run.seed", "5");
    config::set(cfg, "run.seed", "7");
    EXPECT_EQ(cfg.train.seed, 7u);
    EXPECT_THROW(config::set(cfg, "run.sed", "7"), ConfigError);
}

TEST(Config, ValidationNamesTheField) {
    config::RunConfig cfg;
    cfg.train.algo.gamma = 1.5;
    try {
        cfg.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos) << e.what();
    }
}

TEST(Config, LoadReportsPathAndMissingFile) {
    const fs::path dir = fs::temp_directory_path() / "hdsac_test_config";
    fs::create_directories(dir);
    EXPECT_THROW(config::load(dir / "absent.ini"), IoError);
    {
        std::ofstream(dir / "bad.ini") << "[run]\nbogus = 1\n";
    }
    try {
        config::load(dir / "bad.ini");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.ini"), std::string::npos);
    }
    config::RunConfig cfg;
    cfg.train.seed = 99;
    config::save(cfg, dir / "good.ini");
    EXPECT_EQ(config::load(dir / "good.ini"), cfg);
    fs::remove_all(dir);
}

TEST(Config, RunDirectoryDefaultsUnderOutputRoot) {
    config::RunConfig cfg;
    cfg.train.seed = 4;
    cfg.train.algorithm = agents::Algorithm::pvp;
    ::setenv(config::kOutputRootEnv, "/tmp/hdsac_root", 1);
    EXPECT_EQ(config::run_directory(cfg), fs::path("/tmp/hdsac_root/pvp_seed4"));
    ::unsetenv(config::kOutputRootEnv);
    EXPECT_EQ(config::run_directory(cfg), fs::path("runs/pvp_seed4"));
    cfg.output_dir = "elsewhere";
    EXPECT_EQ(config::run_directory(cfg), fs::path("elsewhere"));
}
