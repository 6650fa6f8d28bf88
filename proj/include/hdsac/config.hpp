#pragma once

// Run configuration: a sectioned key=value text file covering every knob of
// a run. Every field has a default and unknown keys are rejected.
//
//   # comment
//   [run]
//   algorithm = hdsac
//   seed = 7
//   [algo]
//   gamma = 0.99

#include "hdsac/supervisor.hpp"
#include "hdsac/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hdsac::config {

struct SupervisorSpec {
    enum class Kind : std::uint8_t { scripted, replay, remote, none };
    Kind kind = Kind::scripted;
    std::string path;        // replay
    std::uint16_t port = 0;  // remote

    friend bool operator==(const SupervisorSpec&, const SupervisorSpec&) = default;
};

/// "scripted", "replay:PATH", "remote:PORT" or "none" (no supervisor, for the
/// reward-driven SAC baseline); throws ConfigError.
SupervisorSpec parse_supervisor(const std::string& text);
std::string to_string(const SupervisorSpec& s);

struct BridgeConfig {
    /// Serve frames to consoles during scripted or replayed runs as well.
    bool enabled = false;
    std::string address = "127.0.0.1";
    std::uint16_t port = 8765;
    /// Sleep so each step takes at least sim.dt of wall time. Remote runs
    /// always pace.
    bool realtime = false;

    friend bool operator==(const BridgeConfig&, const BridgeConfig&) = default;
};

struct RunConfig {
    trainer::TrainConfig train;
    supervisor::ExpertConfig expert;
    SupervisorSpec supervisor;
    BridgeConfig bridge;
    /// Empty: <output root>/<algorithm>_seed<seed>.
    std::string output_dir;
    /// Also record the supervisor's decisions to session.txt in the run directory.
    bool record_session = true;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;

    /// Throws ConfigError naming the first bad field.
    void validate() const;
};

/// All keys as "section.key", in file order.
std::vector<std::string> keys();

/// Sets one field from its text form; throws ConfigError on an unknown key
/// or a value that does not parse.
void set(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get(const RunConfig& cfg, const std::string& key);

/// Throws ConfigError with the line number on syntax errors, unknown
/// sections or keys, and duplicates. Missing keys keep their defaults.
RunConfig parse(const std::string& text);
RunConfig load(const std::filesystem::path& path);

/// Every field, exactly; parse(serialize(c)) == c.
std::string serialize(const RunConfig& cfg);
void save(const RunConfig& cfg, const std::filesystem::path& path);

/// Environment variable naming the default output root ("runs" when unset).
inline constexpr const char* kOutputRootEnv = "HDSAC_OUTPUT_ROOT";
/// Environment variable overriding the bridge bind address.
inline constexpr const char* kBridgeAddressEnv = "HDSAC_BRIDGE_ADDRESS";

std::filesystem::path output_root();
std::filesystem::path run_directory(const RunConfig& cfg);

}  // namespace hdsac::config
