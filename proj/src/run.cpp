#include "hdsac/run.hpp"

#include "hdsac/bridge.hpp"
#include "hdsac/errors.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <streambuf>
#include <thread>

#ifndef HDSAC_VERSION
#define HDSAC_VERSION "0.0.0"
#endif

namespace hdsac::run {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// Writes whole lines to a file and hands each one to a sink.
class LineTee : public std::streambuf {
public:
    LineTee(std::ostream& file, LineSink sink) : file_(file), sink_(std::move(sink)) {}

protected:
    int overflow(int c) override {
        if (c == traits_type::eof()) return traits_type::not_eof(c);
        line_.push_back(static_cast<char>(c));
        if (c == '\n') {
            file_ << line_;
            if (sink_) sink_(line_.substr(0, line_.size() - 1));
            line_.clear();
        }
        return c;
    }

    int sync() override {
        file_.flush();
        return file_ ? 0 : -1;
    }

private:
    std::ostream& file_;
    LineSink sink_;
    std::string line_;
};

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
}

std::string manifest_json(const config::RunConfig& cfg) {
    json j;
    j["hdsac_version"] = version();
    j["metrics_schema"] = trainer::kMetricsSchemaVersion;
    j["checkpoint_schema"] = agents::kAgentSchemaVersion;
    j["session_schema"] = supervisor::kSessionSchemaVersion;
    j["wire_version"] = bridge::kWireVersion;
    j["algorithm"] = agents::to_string(cfg.train.algorithm);
    j["seed"] = cfg.train.seed;
    j["supervisor"] = config::to_string(cfg.supervisor);
    return j.dump(2) + "\n";
}

std::string bridge_address(const config::RunConfig& cfg) {
    const char* env = std::getenv(config::kBridgeAddressEnv);
    return env && *env ? std::string(env) : cfg.bridge.address;
}

}  // namespace

const char* version() { return HDSAC_VERSION; }

TrainReport train(const config::RunConfig& cfg, const LineSink& on_metrics) {
    cfg.validate();
    const fs::path dir = config::run_directory(cfg);
    std::error_code ec;
    fs::create_directories(dir / "checkpoints", ec);
    if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());

    const std::string snapshot = config::serialize(cfg);
    write_file(dir / "config.ini", snapshot);
    write_file(dir / "manifest.json", manifest_json(cfg));

    std::unique_ptr<supervisor::Supervisor> sup;
    std::shared_ptr<supervisor::HumanMailbox> mailbox = std::make_shared<supervisor::HumanMailbox>();
    std::optional<std::uint16_t> bridge_port;
    bool pace = cfg.bridge.realtime;
    switch (cfg.supervisor.kind) {
        case config::SupervisorSpec::Kind::scripted:
            sup = std::make_unique<supervisor::ScriptedSupervisor>(cfg.expert, cfg.train.sim);
            break;
        case config::SupervisorSpec::Kind::replay:
            sup = supervisor::ReplaySupervisor::open(cfg.supervisor.path);
            break;
        case config::SupervisorSpec::Kind::remote:
            sup = std::make_unique<supervisor::RemoteSupervisor>(mailbox, cfg.train.sim.dt);
            bridge_port = cfg.supervisor.port;
            pace = true;
            break;
        case config::SupervisorSpec::Kind::none:
            sup = std::make_unique<supervisor::NoSupervisor>();
            break;
    }
    if (!bridge_port && cfg.bridge.enabled) bridge_port = cfg.bridge.port;
    if (cfg.record_session && cfg.supervisor.kind != config::SupervisorSpec::Kind::replay) {
        sup = std::make_unique<supervisor::RecordingSupervisor>(std::move(sup), dir / "session.txt");
    }

    std::unique_ptr<bridge::Server> server;
    if (bridge_port) {
        bridge::ServerConfig sc;
        sc.address = bridge_address(cfg);
        sc.port = *bridge_port;
        server = std::make_unique<bridge::Server>(sc, mailbox);
        server->start();
    }

    std::ofstream metrics_file(dir / "metrics.jsonl");
    if (!metrics_file) throw IoError("cannot write " + (dir / "metrics.jsonl").string());
    LineTee tee(metrics_file, on_metrics);
    std::ostream metrics(&tee);

    trainer::TrainOutputs out;
    out.metrics = &metrics;
    out.checkpoint_dir = dir / "checkpoints";
    out.config_snapshot = snapshot;
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(cfg.train.sim.dt));
    auto next_tick = std::chrono::steady_clock::now();
    if (server || pace) {
        out.on_step = [&](const trainer::StepView& v) {
            if (server) server->publish(bridge::make_frame(v, cfg.train.sim));
            if (pace) {
                next_tick += period;
                std::this_thread::sleep_until(next_tick);
            }
        };
    }

    auto result = trainer::train(cfg.train, *sup, out);
    if (server) server->stop();
    sup.reset();  // closes the session recording

    write_file(dir / "summary.tsv", trainer::summary_header() + "\n" + trainer::summary_row(result.log.summary) + "\n");
    return {result.log.summary, dir};
}

config::RunConfig replay_config(const fs::path& session, const std::optional<fs::path>& config_path) {
    const fs::path cfg_path = config_path ? *config_path : session.parent_path() / "config.ini";
    if (!fs::exists(cfg_path))
        throw IoError("no configuration for session " + session.string() + " (looked for " + cfg_path.string() + ")");
    config::RunConfig cfg = config::load(cfg_path);
    cfg.supervisor.kind = config::SupervisorSpec::Kind::replay;
    cfg.supervisor.path = session.string();
    cfg.record_session = false;
    cfg.bridge.enabled = false;
    cfg.bridge.realtime = false;
    if (!config_path) cfg.output_dir = (session.parent_path() / "replay").string();
    return cfg;
}

config::RunConfig checkpoint_config(const fs::path& checkpoint) {
    const fs::path p = checkpoint / "config.ini";
    return fs::exists(p) ? config::load(p) : config::RunConfig{};
}

trainer::EvalResult evaluate(const config::RunConfig& cfg, const std::optional<fs::path>& checkpoint,
                             const std::vector<std::uint64_t>& seeds) {
    cfg.validate();
    if (seeds.empty()) throw ConfigError("evaluation needs at least one seed");
    if (!checkpoint) return trainer::evaluate(trainer::expert_policy(cfg.expert, cfg.train.sim), seeds, cfg.train.sim);
    const auto agent = agents::load_agent(*checkpoint, cfg.train.algo, cfg.train.sac_q_alarm);
    return trainer::evaluate(trainer::agent_policy(*agent), seeds, cfg.train.sim);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string part;
    const auto number = [&](const std::string& s) {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("bad seed '" + s + "' in list '" + text + "'");
        return static_cast<std::uint64_t>(std::stoull(s));
    };
    while (std::getline(ss, part, ',')) {
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            seeds.push_back(number(part));
            continue;
        }
        const auto lo = number(part.substr(0, dash)), hi = number(part.substr(dash + 1));
        if (hi < lo) throw ConfigError("empty seed range '" + part + "'");
        if (hi - lo >= 1000000) throw ConfigError("seed range '" + part + "' is too long");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    if (seeds.empty()) throw ConfigError("seed list is empty");
    return seeds;
}

std::string episode_json(const trainer::EpisodeResult& e) {
    json j;
    j["type"] = "episode";
    j["seed"] = e.seed;
    j["return"] = e.episode_return;
    j["cost"] = e.cost;
    j["steps"] = e.steps;
    j["termination"] = sim::to_string(e.termination);
    j["success"] = e.success();
    return j.dump();
}

std::string eval_summary_json(const trainer::EvalResult& r) {
    json j;
    j["type"] = "eval_summary";
    j["episodes"] = r.episodes.size();
    j["return_mean"] = r.return_mean;
    j["return_std"] = r.return_std;
    j["episodic_safety_cost"] = r.safety_cost;
    j["success_rate"] = r.success_rate;
    return j.dump();
}

}  // namespace hdsac::run
