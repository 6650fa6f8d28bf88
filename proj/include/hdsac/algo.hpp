#pragma once

// Distributional proxy-value critic, reward-free TD learning and
// entropy-regularized policy improvement.
//
// The critic maps [observation; action] to two outputs: the mean Q of the
// soft return and a raw value that becomes its standard deviation through
//     sigma = min(sigma_min + softplus(raw), sigma_max).
// The actor maps an observation to [mean; log_std] of a tanh-squashed
// diagonal Gaussian.

#include "hdsac/action.hpp"
#include "hdsac/nn.hpp"

#include <functional>
#include <optional>
#include <random>

namespace hdsac::algo {

using nn::Matrix;
using nn::Mlp;
using nn::RowVector;
using nn::Vector;

struct ReturnDistribution {
    double q_mean = 0.0;
    double sigma = 1.0;
};

enum class ProxyLabel : int { human = 1, novice = -1 };

constexpr double proxy_value(ProxyLabel label) { return static_cast<double>(static_cast<int>(label)); }

struct AlgoConfig {
    double gamma = 0.99;
    /// Scales the sigma-gradient (variance convergence rate).
    double eta = 1.0;
    double alpha = 0.01;  // initial temperature
    double alpha_min = 1e-6;
    double target_entropy = -2.0;
    double tau = 0.005;
    /// Target return samples are clipped to q_mean +- clip_c * sigma.
    double clip_c = 3.0;
    int batch_size = 256;
    double critic_lr = 3e-4;
    double actor_lr = 3e-4;
    double alpha_lr = 3e-4;
    double sigma_min = 0.1;
    double sigma_max = 7.38905609893065;  // e^2
    /// Divergence alarm on |Q| over a training batch.
    double q_alarm = 50.0;

    friend bool operator==(const AlgoConfig&, const AlgoConfig&) = default;

    /// Throws ConfigError naming the first bad field.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Critic

template <typename T>
struct CriticBatch {
    RowVector<T> q;
    RowVector<T> sigma;
    RowVector<T> dsigma_draw;  // derivative of sigma w.r.t. the raw network output
    nn::ForwardCache<T> cache;
};

/// Stacks [obs; act] column-wise and evaluates the critic on the batch.
template <typename T>
CriticBatch<T> critic_forward(const Mlp<T>& theta, const Matrix<T>& obs, const Matrix<T>& act, const AlgoConfig& cfg,
                              bool keep_cache);

template <typename T>
ReturnDistribution critic_eval(const Mlp<T>& theta, const Vector<T>& obs, const Vector<T>& act,
                               const AlgoConfig& cfg);

/// Per-sample terms of the Gaussian NLL of a point target y under N(q, sigma^2).
/// dq = -(y - q) / sigma^2 and dsigma = -((y - q)^2 - sigma^2) / sigma^3 * eta.
/// With eta = 1 these are the exact partials of `loss`.
template <typename T>
struct NllTerms {
    T loss;
    T dq;
    T dsigma;
};

template <typename T>
NllTerms<T> gaussian_nll_terms(T y, T q, T sigma, T eta);

template <typename T>
struct LossAndGrads {
    double loss = 0.0;
    Mlp<T> grads;
};

/// Samples from the human buffer: every one was an intervention step, so the
/// intervention indicator of the proxy loss is 1 by construction.
template <typename T>
struct HumanBatch {
    Matrix<T> obs;
    Matrix<T> human_action;
    Matrix<T> novice_action;

    Eigen::Index size() const { return obs.cols(); }
};

/// Proxy-value loss: NLL of label +1 at the human action plus NLL of label -1
/// at the novice action, averaged over the batch. Empty batch -> zero loss and
/// zero gradients.
template <typename T>
LossAndGrads<T> pv_grads(const Mlp<T>& theta, const HumanBatch<T>& batch, const AlgoConfig& cfg);

/// Noise for one batch of target computations.
template <typename T>
struct TargetNoise {
    Matrix<T> action;  // action_dim x B, standard normal
    RowVector<T> value;  // 1 x B, standard normal
};

/// y = gamma * not_done * (clip(Z(s', a')) - alpha * log pi(a'|s')) with a'
/// drawn from the target actor and Z from the target critic's Gaussian.
template <typename T>
RowVector<T> td_target(const Mlp<T>& theta_bar, const Mlp<T>& phi_bar, const Matrix<T>& next_obs,
                       const RowVector<T>& not_done, const AlgoConfig& cfg, double alpha,
                       const TargetNoise<T>& noise);

/// Union-buffer samples with precomputed targets.
template <typename T>
struct TdBatch {
    Matrix<T> obs;
    Matrix<T> action;
    RowVector<T> target;

    Eigen::Index size() const { return obs.cols(); }
};

/// Mean NLL of the (stop-gradient) targets under the online critic.
template <typename T>
LossAndGrads<T> td_grads(const Mlp<T>& theta, const TdBatch<T>& batch, const AlgoConfig& cfg);

struct CriticUpdateStats {
    double pv_loss = 0.0;
    double td_loss = 0.0;
    double max_abs_q = 0.0;
};

/// One Adam step on the sum of the proxy-value and TD gradients.
template <typename T>
CriticUpdateStats critic_update(Mlp<T>& theta, nn::OptimizerState<T>& optimizer, const HumanBatch<T>& human,
                                const TdBatch<T>& td, const AlgoConfig& cfg);

// ---------------------------------------------------------------------------
// Actor

template <typename T>
struct PolicyBatch {
    nn::SquashedBatch<T> sample;
    nn::ForwardCache<T> cache;
};

template <typename T>
PolicyBatch<T> policy_forward(const Mlp<T>& phi, const Matrix<T>& obs, const Matrix<T>& noise, bool keep_cache);

/// Deterministic action tanh(mean) for a single observation.
template <typename T>
Vector<T> policy_mode(const Mlp<T>& phi, const Vector<T>& obs);

/// Q(s, a) and dQ/da for a batch. The policy pass treats this as frozen.
template <typename T>
using ActionValueFn = std::function<void(const Matrix<T>& obs, const Matrix<T>& act, RowVector<T>& q,
                                         Matrix<T>& dq_dact)>;

/// Mean Q of the distributional critic as an ActionValueFn.
template <typename T>
ActionValueFn<T> critic_action_value(const Mlp<T>& theta, const AlgoConfig& cfg);

template <typename T>
struct PolicyLoss {
    double loss = 0.0;  // mean(alpha * log pi - Q)
    double mean_log_prob = 0.0;
    Mlp<T> grads;
};

/// Gradient of mean(alpha * log pi(a|s) - Q(s, a)) with a reparameterised
/// through the squashed Gaussian at the given noise.
template <typename T>
PolicyLoss<T> policy_grads(const Mlp<T>& phi, const ActionValueFn<T>& q_fn, const Matrix<T>& obs,
                           const Matrix<T>& noise, double alpha);

/// alpha' = max(alpha - lr * (E[-log pi] - target_entropy), alpha_min)
double temperature_update(double alpha, double mean_neg_log_prob, const AlgoConfig& cfg);

// ---------------------------------------------------------------------------

/// Returns a_h when intervened, otherwise a_n. Throws ContractViolation when
/// intervened without a human action.
Action mix_action(const Action& novice, const std::optional<Action>& human, bool intervened);

template <typename T>
void soft_update_targets(const Mlp<T>& theta, Mlp<T>& theta_bar, const Mlp<T>& phi, Mlp<T>& phi_bar, double tau);

// ---------------------------------------------------------------------------
// Complete learner state

struct NetworkShape {
    int obs_dim = 0;
    int action_dim = Action::kDim;
    std::vector<int> hidden{256, 256};
};

/// Online and target networks, optimizers and temperature of one learner.
class HdsacLearner {
public:
    HdsacLearner(const NetworkShape& shape, const AlgoConfig& cfg, std::uint64_t seed);

    struct Stats {
        double pv_loss = 0.0;
        double td_loss = 0.0;
        double policy_loss = 0.0;
        double alpha = 0.0;
        double max_abs_q = 0.0;
    };

    /// critic step (PV + TD), policy step, temperature step, target soft update.
    /// `next_obs`/`not_done` belong to the TD samples.
    Stats update(const HumanBatch<float>& human, const Matrix<float>& td_obs, const Matrix<float>& td_action,
                 const Matrix<float>& td_next_obs, const RowVector<float>& td_not_done, std::mt19937_64& rng);

    const AlgoConfig& config() const { return cfg_; }
    double alpha() const { return alpha_; }
    void set_alpha(double a) { alpha_ = a; }

    Mlp<float>& critic() { return critic_; }
    Mlp<float>& critic_target() { return critic_target_; }
    Mlp<float>& actor() { return actor_; }
    Mlp<float>& actor_target() { return actor_target_; }
    const Mlp<float>& critic() const { return critic_; }
    const Mlp<float>& actor() const { return actor_; }
    const Mlp<float>& critic_target() const { return critic_target_; }
    const Mlp<float>& actor_target() const { return actor_target_; }

private:
    AlgoConfig cfg_;
    double alpha_;
    Mlp<float> critic_;
    Mlp<float> critic_target_;
    Mlp<float> actor_;
    Mlp<float> actor_target_;
    nn::OptimizerState<float> critic_opt_;
    nn::OptimizerState<float> actor_opt_;
};

/// Fills a d x n matrix with standard normals in column-major order.
template <typename T>
Matrix<T> standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace hdsac::algo
