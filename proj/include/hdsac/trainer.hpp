#pragma once

// The human-in-the-loop training loop: the novice acts, the supervisor may
// take over, the executed transition goes to the novice or the human buffer,
// and the agent learns from both. Also the evaluation protocol and the
// metrics records the plot command reads.

#include "hdsac/agents.hpp"
#include "hdsac/sim.hpp"
#include "hdsac/supervisor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace hdsac::trainer {

struct Transition {
    std::vector<float> obs;
    Action novice_action;
    std::optional<Action> human_action;
    Action behavior_action;
    bool intervened = false;
    std::vector<float> next_obs;
    /// True termination only; a timeout still bootstraps.
    bool done = false;
    double reward = 0.0;
    double cost = 0.0;

    /// Throws ContractViolation unless behavior_action == (intervened ? human : novice).
    void validate() const;
};

/// Fixed-capacity ring of transitions stored column-wise for batch gathers.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int obs_dim);

    void push(const Transition& t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    /// Total pushes, including evicted entries.
    std::uint64_t inserted() const { return inserted_; }
    int obs_dim() const { return obs_dim_; }

    /// i-th stored transition, oldest first.
    Transition at(std::size_t i) const;

    /// n distinct positions (0 = oldest), uniform without replacement.
    std::vector<std::size_t> sample_positions(std::size_t n, std::mt19937_64& rng) const;

    void gather_obs(const std::vector<std::size_t>& positions, nn::Matrix<float>& out, Eigen::Index col0) const;
    void gather_next_obs(const std::vector<std::size_t>& positions, nn::Matrix<float>& out, Eigen::Index col0) const;
    void gather_behavior(const std::vector<std::size_t>& positions, nn::Matrix<float>& out, Eigen::Index col0) const;
    void gather_human(const std::vector<std::size_t>& positions, nn::Matrix<float>& out, Eigen::Index col0) const;
    void gather_novice(const std::vector<std::size_t>& positions, nn::Matrix<float>& out, Eigen::Index col0) const;
    void gather_scalars(const std::vector<std::size_t>& positions, nn::RowVector<float>& not_done,
                        nn::RowVector<float>& reward, Eigen::Index col0) const;

private:
    std::size_t slot(std::size_t position) const;

    std::size_t capacity_;
    int obs_dim_;
    std::size_t size_ = 0;
    std::size_t head_ = 0;  // next write slot
    std::uint64_t inserted_ = 0;
    nn::Matrix<float> obs_;
    nn::Matrix<float> next_obs_;
    nn::Matrix<float> novice_;
    nn::Matrix<float> human_;
    nn::Matrix<float> behavior_;
    std::vector<std::uint8_t> intervened_;
    std::vector<std::uint8_t> done_;
    std::vector<double> reward_;
    std::vector<double> cost_;
};

/// Intervened transitions go to the human buffer, all others to the novice buffer.
void route_transition(const Transition& t, ReplayBuffer& novice, ReplayBuffer& human);

struct SampledBatches {
    algo::HumanBatch<float> human;
    agents::TdSamples td;
    std::size_t td_from_human = 0;
};

/// Human batch: up to `batch_size` samples of the human buffer. Union batch:
/// `human_fraction` of the batch from each buffer when both are non-empty,
/// topped up from the other buffer when one runs short. nullopt when both
/// buffers are empty.
std::optional<SampledBatches> sample_batches(const ReplayBuffer& novice, const ReplayBuffer& human, int batch_size,
                                             double human_fraction, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Evaluation

using Policy = std::function<Action(const sim::WorldState&, const sim::Observation&)>;

struct EpisodeResult {
    std::uint64_t seed = 0;
    double episode_return = 0.0;
    double cost = 0.0;
    int steps = 0;
    sim::Termination termination = sim::Termination::none;
    bool success() const { return termination == sim::Termination::destination; }
};

struct EvalResult {
    double return_mean = 0.0;
    double return_std = 0.0;  // population standard deviation
    double safety_cost = 0.0;  // mean collisions per episode
    double success_rate = 0.0;
    std::vector<EpisodeResult> episodes;
};

/// One episode per seed; throws ContractViolation on an empty seed list.
EvalResult evaluate(const Policy& policy, const std::vector<std::uint64_t>& seeds, const sim::SimConfig& cfg);

/// Deterministic tanh(mean) policy of an agent.
Policy agent_policy(const agents::Agent& agent);
Policy expert_policy(const supervisor::ExpertConfig& expert, const sim::SimConfig& cfg);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    agents::Algorithm algorithm = agents::Algorithm::hdsac;
    algo::AlgoConfig algo;
    sim::SimConfig sim;
    std::vector<int> hidden{256, 256};
    double sac_q_alarm = 1e3;

    std::uint64_t seed = 0;
    std::int64_t total_steps = 50000;
    std::int64_t warmup_steps = 1000;
    int update_interval = 1;
    int window = 1000;
    std::int64_t eval_interval = 5000;
    /// 0 keeps only the initial and final checkpoints.
    std::int64_t checkpoint_interval = 0;

    /// Training episodes cycle through train_scenarios seeds starting at
    /// train_seed_base; evaluation uses eval_episodes seeds starting at
    /// eval_seed_base. The two ranges must not overlap.
    std::uint64_t train_seed_base = 0;
    int train_scenarios = 20;
    std::uint64_t eval_seed_base = 100000;
    int eval_episodes = 20;

    std::size_t novice_capacity = 100000;
    std::size_t human_capacity = 50000;
    double human_fraction = 0.5;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

    /// Throws ConfigError naming the first bad field.
    void validate() const;

    std::vector<std::uint64_t> eval_seeds() const;
};

struct WindowRecord {
    std::int64_t index = 0;
    std::int64_t step_end = 0;
    int steps = 0;
    double takeover_rate = 0.0;
    double cost = 0.0;             // collisions within the window
    double cumulative_cost = 0.0;  // training safety cost so far
    std::int64_t human_steps = 0;
    std::int64_t total_steps = 0;
    std::optional<double> q_human;   // mean Q over recent human-buffer (s, a_h)
    std::optional<double> q_novice;  // ... and the paired (s, a_n)
    int episodes = 0;
    int successes = 0;
    int updates = 0;
    double pv_loss = 0.0;
    double td_loss = 0.0;
    double policy_loss = 0.0;
    double alpha = 0.0;
};

struct EvalRecord {
    std::int64_t step = 0;
    EvalResult result;
};

struct Summary {
    agents::Algorithm algorithm = agents::Algorithm::hdsac;
    std::int64_t human_data = 0;
    std::int64_t total_data = 0;
    double training_safety_cost = 0.0;
    std::optional<EvalResult> eval;
};

struct MetricsLog {
    std::vector<WindowRecord> windows;
    std::vector<EvalRecord> evals;
    Summary summary;
};

/// What the loop exposes after every environment step (for the bridge).
struct StepView {
    std::int64_t step = 0;  // steps completed so far
    std::int64_t episode = 0;
    const sim::WorldState* world = nullptr;
    bool intervened = false;
    double window_takeover_rate = 0.0;
    std::optional<double> q_human;
    std::optional<double> q_novice;
    std::int64_t human_steps = 0;
    double cumulative_cost = 0.0;
    int episode_successes = 0;
    int episodes_finished = 0;
};

struct TrainOutputs {
    /// Receives one JSON record per line: window, eval and summary records.
    std::ostream* metrics = nullptr;
    /// Checkpoints are written below this directory when set.
    std::optional<std::filesystem::path> checkpoint_dir;
    /// Written as config.ini into every checkpoint directory when non-empty.
    std::string config_snapshot;
    std::function<void(const StepView&)> on_step;
};

struct TrainResult {
    MetricsLog log;
    std::unique_ptr<agents::Agent> agent;
};

/// Runs cfg.total_steps environment steps. On divergence the agent is saved
/// to <checkpoint_dir>/diverged (when a directory is set) and the
/// TrainingDivergence is rethrown with that path appended.
TrainResult train(const TrainConfig& cfg, supervisor::Supervisor& supervisor, const TrainOutputs& outputs = {});

// ---------------------------------------------------------------------------
// Metrics records

inline constexpr int kMetricsSchemaVersion = 1;

std::string window_record_json(const WindowRecord& w);
std::string eval_record_json(const EvalRecord& e);
std::string summary_record_json(const Summary& s);

/// One Table-1-style row: human data, total data, training safety cost,
/// episodic return, episodic safety cost, success rate.
std::string summary_row(const Summary& s);
std::string summary_header();

}  // namespace hdsac::trainer
