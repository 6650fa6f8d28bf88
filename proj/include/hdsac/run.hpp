#pragma once

// Run directories and the commands behind the CLI. A run directory holds
//
//   config.ini       effective configuration
//   manifest.json    code and schema versions, seed, supervisor source
//   metrics.jsonl    window / eval / summary records
//   session.txt      supervisor decisions (unless replaying)
//   summary.tsv      the summary row with its header
//   checkpoints/     step_XXXXXXXX/, final/, diverged/ (each with config.ini)

#include "hdsac/config.hpp"
#include "hdsac/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hdsac::run {

const char* version();

struct TrainReport {
    trainer::Summary summary;
    std::filesystem::path run_dir;
};

/// Receives each metrics record as it is written.
using LineSink = std::function<void(const std::string&)>;

/// Validates, creates the run directory and trains. Remote runs serve the
/// bridge on the supervisor port and pace steps to sim.dt of wall time.
/// Throws TrainingDivergence whose message names the snapshot directory.
TrainReport train(const config::RunConfig& cfg, const LineSink& on_metrics = {});

/// Configuration to re-run a recorded session: config.ini next to the
/// session file (or `config_path`), supervisor replay:<session>, output in
/// <session dir>/replay unless the configuration names one.
config::RunConfig replay_config(const std::filesystem::path& session,
                                const std::optional<std::filesystem::path>& config_path = std::nullopt);

/// The config.ini saved with a checkpoint, defaults when there is none.
config::RunConfig checkpoint_config(const std::filesystem::path& checkpoint);

/// Evaluates a checkpoint, or the scripted expert when `checkpoint` is empty.
trainer::EvalResult evaluate(const config::RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                             const std::vector<std::uint64_t>& seeds);

/// "3", "1,2,9", "100000-100019" and mixtures; throws ConfigError when the
/// list is empty or malformed.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

std::string episode_json(const trainer::EpisodeResult& e);
std::string eval_summary_json(const trainer::EvalResult& r);

}  // namespace hdsac::run
