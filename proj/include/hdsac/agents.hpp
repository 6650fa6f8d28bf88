#pragma once

// Learners behind one interface so the trainer can run H-DSAC and its two
// baselines through the same loop:
//   hdsac  distributional critic, Dirac proxy labels, reward-free TD
//   sac    twin scalar critics trained on the environment reward
//   pvp    one scalar critic, squared-error proxy labels, reward-free TD

#include "hdsac/action.hpp"
#include "hdsac/algo.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string_view>
#include <vector>

namespace hdsac::agents {

using algo::AlgoConfig;
using algo::HumanBatch;
using algo::LossAndGrads;
using algo::NetworkShape;
using nn::Matrix;
using nn::Mlp;
using nn::RowVector;
using nn::Vector;

enum class Algorithm : std::uint8_t { hdsac = 0, sac, pvp };

const char* to_string(Algorithm a);
/// Throws ConfigError for an unknown tag.
Algorithm parse_algorithm(std::string_view tag);

/// Samples from the union buffer. `reward` is read by SAC only.
struct TdSamples {
    Matrix<float> obs;
    Matrix<float> action;
    Matrix<float> next_obs;
    RowVector<float> not_done;
    RowVector<float> reward;

    Eigen::Index size() const { return obs.cols(); }
};

struct UpdateStats {
    double pv_loss = 0.0;
    double td_loss = 0.0;
    double policy_loss = 0.0;
    double alpha = 0.0;
    double max_abs_q = 0.0;
};

// ---------------------------------------------------------------------------
// Scalar-critic pieces shared by the baselines. Critics map [obs; act] to one
// output.

template <typename T>
RowVector<T> scalar_q(const Mlp<T>& theta, const Matrix<T>& obs, const Matrix<T>& act);

/// mean_b 0.5 * (Q(s_b, a_b) - y_b)^2
template <typename T>
LossAndGrads<T> squared_error_grads(const Mlp<T>& theta, const Matrix<T>& obs, const Matrix<T>& act,
                                    const RowVector<T>& target);

/// mean_b [0.5 * (Q(s_b, a_h) - 1)^2 + 0.5 * (Q(s_b, a_n) + 1)^2]; zero for an empty batch.
template <typename T>
LossAndGrads<T> proxy_label_grads(const Mlp<T>& theta, const HumanBatch<T>& batch);

/// Elementwise minimum over the critics, with dQ/da taken from the minimizer.
template <typename T>
algo::ActionValueFn<T> min_action_value(std::vector<const Mlp<T>*> critics);

/// y = r + gamma * not_done * (min_i Q_i(s', a') - alpha * log pi(a'|s')),
/// a' drawn from `actor` with the given noise. An empty `reward` means zero.
template <typename T>
RowVector<T> scalar_td_target(const std::vector<const Mlp<T>*>& critics, const Mlp<T>& actor,
                              const Matrix<T>& next_obs, const RowVector<T>& not_done, const RowVector<T>& reward,
                              double gamma, double alpha, const Matrix<T>& noise);

// ---------------------------------------------------------------------------

class Agent {
public:
    virtual ~Agent() = default;

    virtual Algorithm algorithm() const = 0;
    /// One gradient step of every network plus the temperature and targets.
    /// Throws TrainingDivergence on non-finite losses or |Q| above the alarm.
    virtual UpdateStats update(const HumanBatch<float>& human, const TdSamples& td, std::mt19937_64& rng) = 0;
    /// Point value of (s, a): the mean of the return distribution for H-DSAC.
    virtual double q_value(const Vector<float>& obs, const Action& action) const = 0;
    virtual const Mlp<float>& actor() const = 0;
    virtual double alpha() const = 0;

    virtual void save(const std::filesystem::path& dir) const = 0;
    /// Replaces the networks and temperature with a checkpoint's. Throws
    /// FormatError on a tag, version or shape mismatch.
    virtual void load(const std::filesystem::path& dir) = 0;

    /// Sample from the squashed Gaussian policy.
    Action act(const Vector<float>& obs, std::mt19937_64& rng) const;
    /// tanh(mean), used for evaluation.
    Action act_deterministic(const Vector<float>& obs) const;
};

/// `sac_q_alarm` replaces AlgoConfig::q_alarm for SAC, whose values are sums
/// of environment rewards rather than proxy labels.
std::unique_ptr<Agent> make_agent(Algorithm algorithm, const NetworkShape& shape, const AlgoConfig& cfg,
                                  std::uint64_t seed, double sac_q_alarm = 1e3);

/// Reads the algorithm tag and network shapes of a checkpoint directory.
std::unique_ptr<Agent> load_agent(const std::filesystem::path& dir, const AlgoConfig& cfg, double sac_q_alarm = 1e3);

inline constexpr int kAgentSchemaVersion = 1;

}  // namespace hdsac::agents
