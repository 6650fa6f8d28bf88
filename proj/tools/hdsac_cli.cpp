// Command-line front end. Uses only the C interface of libhdsac.

#include <hdsac/hdsac.h>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

struct Failure {
    hdsac_status status;
    std::string message;
};

void check(hdsac_status s) {
    if (s != HDSAC_OK) throw Failure{s, hdsac_last_error()};
}

struct ConfigDeleter {
    void operator()(hdsac_config* c) const { hdsac_config_free(c); }
};
using ConfigPtr = std::unique_ptr<hdsac_config, ConfigDeleter>;

ConfigPtr wrap(hdsac_config* c) { return ConfigPtr(c); }

/// Reads a string through the query-then-fill buffer convention.
template <typename Fn>
std::string fetch(Fn&& fn) {
    size_t needed = 0;
    check(fn(nullptr, 0, &needed));
    std::string s(needed, '\0');
    check(fn(s.data(), s.size(), &needed));
    s.resize(needed - 1);
    return s;
}

void print_line(const char* line, void*) {
    std::fputs(line, stdout);
    std::fputc('\n', stdout);
    std::fflush(stdout);
}

void apply_sets(hdsac_config* cfg, const std::vector<std::string>& sets) {
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Failure{HDSAC_ERR_CONFIG, "--set expects KEY=VALUE, got '" + kv + "'"};
        check(hdsac_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
    size_t count = 0;
    check(hdsac_parse_seeds(text.c_str(), nullptr, 0, &count));
    std::vector<uint64_t> seeds(count);
    check(hdsac_parse_seeds(text.c_str(), seeds.data(), seeds.size(), &count));
    return seeds;
}

struct TrainArgs {
    std::string config;
    std::vector<std::string> sets;
    std::string seed, algo, supervisor, out;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    hdsac_config* raw = nullptr;
    check(hdsac_config_load(a.config.c_str(), &raw));
    auto cfg = wrap(raw);
    apply_sets(cfg.get(), a.sets);
    if (!a.seed.empty()) check(hdsac_config_set(cfg.get(), "run.seed", a.seed.c_str()));
    if (!a.algo.empty()) check(hdsac_config_set(cfg.get(), "run.algorithm", a.algo.c_str()));
    if (!a.supervisor.empty()) check(hdsac_config_set(cfg.get(), "run.supervisor", a.supervisor.c_str()));
    if (!a.out.empty()) check(hdsac_config_set(cfg.get(), "run.output_dir", a.out.c_str()));
    check(hdsac_config_validate(cfg.get()));

    const std::string dir = fetch([&](char* b, size_t n, size_t* k) { return hdsac_config_run_dir(cfg.get(), b, n, k); });
    std::cerr << "run directory: " << dir << "\n";
    hdsac_summary summary{};
    check(hdsac_train(cfg.get(), a.quiet ? nullptr : print_line, nullptr, &summary));
    std::cout << fetch(hdsac_summary_header) << "\n"
              << fetch([&](char* b, size_t n, size_t* k) { return hdsac_summary_row(&summary, b, n, k); }) << "\n";
    return 0;
}

int run_eval(const std::string& ckpt, const std::string& seeds_text, const std::string& config_path) {
    const bool expert = ckpt == "expert";
    hdsac_config* raw = nullptr;
    if (!config_path.empty())
        check(hdsac_config_load(config_path.c_str(), &raw));
    else if (!expert)
        check(hdsac_checkpoint_config(ckpt.c_str(), &raw));
    else
        check(hdsac_config_new(&raw));
    auto cfg = wrap(raw);
    const auto seeds = parse_seeds(seeds_text);
    check(hdsac_evaluate(cfg.get(), expert ? nullptr : ckpt.c_str(), seeds.data(), seeds.size(), print_line, nullptr,
                         nullptr));
    return 0;
}

int run_replay(const std::string& session, const std::string& config_path, const std::string& out) {
    hdsac_config* raw = nullptr;
    check(hdsac_replay_config(session.c_str(), config_path.empty() ? nullptr : config_path.c_str(), &raw));
    auto cfg = wrap(raw);
    if (!out.empty()) check(hdsac_config_set(cfg.get(), "run.output_dir", out.c_str()));
    const std::string dir = fetch([&](char* b, size_t n, size_t* k) { return hdsac_config_run_dir(cfg.get(), b, n, k); });
    std::cerr << "replaying into " << dir << "\n";
    hdsac_summary summary{};
    check(hdsac_train(cfg.get(), nullptr, nullptr, &summary));
    std::cout << fetch(hdsac_summary_header) << "\n"
              << fetch([&](char* b, size_t n, size_t* k) { return hdsac_summary_row(&summary, b, n, k); }) << "\n";
    return 0;
}

int run_plot(const std::vector<std::string>& metrics, const std::vector<std::string>& labels, const std::string& out) {
    if (!labels.empty() && labels.size() != metrics.size())
        throw Failure{HDSAC_ERR_CONFIG, "give one --label per --metrics file"};
    std::vector<const char*> paths, names;
    for (const auto& m : metrics) paths.push_back(m.c_str());
    for (const auto& l : labels) names.push_back(l.c_str());
    check(hdsac_plot(paths.data(), labels.empty() ? nullptr : names.data(), paths.size(), out.c_str(), print_line,
                     nullptr));
    return 0;
}

int run_config_dump(const std::string& config_path, const std::vector<std::string>& sets) {
    hdsac_config* raw = nullptr;
    if (config_path.empty())
        check(hdsac_config_new(&raw));
    else
        check(hdsac_config_load(config_path.c_str(), &raw));
    auto cfg = wrap(raw);
    apply_sets(cfg.get(), sets);
    std::cout << fetch([&](char* b, size_t n, size_t* k) { return hdsac_config_serialize(cfg.get(), b, n, k); });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"H-DSAC reward-free intervention learning"};
    app.set_version_flag("--version", std::string(hdsac_version()));
    app.require_subcommand(1);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train an agent into a run directory");
    train_cmd->add_option("--config", train.config, "Configuration file")->required();
    train_cmd->add_option("--set", train.sets, "Override one key, e.g. --set algo.gamma=0.98 (repeatable)");
    train_cmd->add_option("--seed", train.seed, "Run seed");
    train_cmd->add_option("--algo", train.algo, "hdsac, sac or pvp");
    train_cmd->add_option("--supervisor", train.supervisor, "scripted, replay:PATH, remote:PORT or none");
    train_cmd->add_option("--out", train.out, "Run directory");
    train_cmd->add_flag("--quiet", train.quiet, "Do not echo metrics records");

    std::string ckpt, seeds = "100000-100019", eval_config;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or the scripted expert");
    eval_cmd->add_option("--ckpt", ckpt, "Checkpoint directory, or 'expert'")->required();
    eval_cmd->add_option("--seeds", seeds, "Seed list such as 1,2,5-9")->capture_default_str();
    eval_cmd->add_option("--config", eval_config, "Configuration (default: the checkpoint's config.ini)");

    std::string session, replay_config, replay_out;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run a recorded supervision session");
    replay_cmd->add_option("--session", session, "session.txt of a recorded run")->required();
    replay_cmd->add_option("--config", replay_config, "Configuration (default: config.ini next to the session)");
    replay_cmd->add_option("--out", replay_out, "Run directory (default: <session dir>/replay)");

    std::vector<std::string> metrics, labels;
    std::string plot_out = "plots";
    auto* plot_cmd = app.add_subcommand("plot", "Learning curves from metrics.jsonl files");
    plot_cmd->add_option("--metrics", metrics, "metrics.jsonl (repeatable)")->required();
    plot_cmd->add_option("--label", labels, "Legend label per metrics file (repeatable)");
    plot_cmd->add_option("--out", plot_out, "Output directory")->capture_default_str();

    std::string dump_config;
    std::vector<std::string> dump_sets;
    auto* config_cmd = app.add_subcommand("config", "Print a complete configuration");
    config_cmd->add_flag("--dump", "Print every key with its value (the default action)");
    config_cmd->add_option("--config", dump_config, "Start from this file instead of the defaults");
    config_cmd->add_option("--set", dump_sets, "Override one key (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*train_cmd) return run_train(train);
        if (*eval_cmd) return run_eval(ckpt, seeds, eval_config);
        if (*replay_cmd) return run_replay(session, replay_config, replay_out);
        if (*plot_cmd) return run_plot(metrics, labels, plot_out);
        if (*config_cmd) return run_config_dump(dump_config, dump_sets);
    } catch (const Failure& f) {
        std::cerr << "hdsac: " << hdsac_status_name(f.status) << ": " << f.message << "\n";
        switch (f.status) {
            case HDSAC_ERR_CONFIG:
            case HDSAC_ERR_INVALID_ARGUMENT: return kExitUsage;
            case HDSAC_ERR_DIVERGENCE: return kExitDiverged;
            default: return kExitFailure;
        }
    }
    return kExitFailure;
}
