#include "hdsac/algo.hpp"

#include "hdsac/errors.hpp"

#include <cmath>
#include <string>

namespace hdsac::algo {

namespace {

template <typename T>
T softplus(T x) {
    // log(1 + e^x) without overflow
    return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
Matrix<T> stack_rows(const Matrix<T>& top, const Matrix<T>& bottom) {
    if (top.cols() != bottom.cols()) throw ContractViolation("observation and action batch sizes differ");
    Matrix<T> out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw TrainingDivergence(std::string("non-finite ") + what);
}

}  // namespace

void AlgoConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    };
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    positive(eta, "eta");
    positive(alpha, "alpha");
    positive(alpha_min, "alpha_min");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    positive(clip_c, "clip_c");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    positive(critic_lr, "critic_lr");
    positive(actor_lr, "actor_lr");
    positive(alpha_lr, "alpha_lr");
    positive(sigma_min, "sigma_min");
    if (!(sigma_max > sigma_min)) throw ConfigError("sigma_max must exceed sigma_min");
    positive(q_alarm, "q_alarm");
    if (!std::isfinite(target_entropy)) throw ConfigError("target_entropy must be finite");
}

// ---------------------------------------------------------------------------

template <typename T>
CriticBatch<T> critic_forward(const Mlp<T>& theta, const Matrix<T>& obs, const Matrix<T>& act, const AlgoConfig& cfg,
                              bool keep_cache) {
    if (theta.output_dim() != 2) throw ContractViolation("critic must have 2 outputs (mean, sigma)");
    CriticBatch<T> out;
    const Matrix<T> y = nn::forward<T>(theta, stack_rows(obs, act), keep_cache ? &out.cache : nullptr);
    const auto n = y.cols();
    out.q = y.row(0);
    out.sigma.resize(n);
    out.dsigma_draw.resize(n);
    const T lo = static_cast<T>(cfg.sigma_min);
    const T hi = static_cast<T>(cfg.sigma_max);
    for (Eigen::Index b = 0; b < n; ++b) {
        const T raw = y(1, b);
        const T s = lo + softplus(raw);
        if (s >= hi) {
            out.sigma(b) = hi;
            out.dsigma_draw(b) = T(0);
        } else {
            out.sigma(b) = s;
            out.dsigma_draw(b) = sigmoid(raw);
        }
    }
    return out;
}

template <typename T>
ReturnDistribution critic_eval(const Mlp<T>& theta, const Vector<T>& obs, const Vector<T>& act,
                               const AlgoConfig& cfg) {
    auto b = critic_forward<T>(theta, Matrix<T>(obs), Matrix<T>(act), cfg, false);
    return {static_cast<double>(b.q(0)), static_cast<double>(b.sigma(0))};
}

template <typename T>
NllTerms<T> gaussian_nll_terms(T y, T q, T sigma, T eta) {
    const T diff = y - q;
    const T var = sigma * sigma;
    return {diff * diff / (T(2) * var) + std::log(sigma), -diff / var,
            -(diff * diff - var) / (var * sigma) * eta};
}

namespace {

/// Accumulates dL/d(critic output) for one sample from NLL terms, scaled by w.
template <typename T>
void put_output_grad(Matrix<T>& grad, Eigen::Index col, const NllTerms<T>& t, T dsigma_draw, T w) {
    grad(0, col) = w * t.dq;
    grad(1, col) = w * t.dsigma * dsigma_draw;
}

}  // namespace

template <typename T>
LossAndGrads<T> pv_grads(const Mlp<T>& theta, const HumanBatch<T>& batch, const AlgoConfig& cfg) {
    LossAndGrads<T> out;
    out.grads = theta.zeros_like();
    const auto n = batch.size();
    if (n == 0) return out;
    if (batch.human_action.cols() != n || batch.novice_action.cols() != n) {
        throw ContractViolation("pv_grads: every sample needs both a human and a novice action");
    }
    // Columns [0, n) carry the human actions, [n, 2n) the novice actions.
    Matrix<T> obs2(batch.obs.rows(), 2 * n);
    obs2.leftCols(n) = batch.obs;
    obs2.rightCols(n) = batch.obs;
    Matrix<T> act2(batch.human_action.rows(), 2 * n);
    act2.leftCols(n) = batch.human_action;
    act2.rightCols(n) = batch.novice_action;

    auto c = critic_forward<T>(theta, obs2, act2, cfg, true);
    const T eta = static_cast<T>(cfg.eta);
    const T w = T(1) / static_cast<T>(n);
    Matrix<T> grad(2, 2 * n);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < 2 * n; ++b) {
        const T label = static_cast<T>(proxy_value(b < n ? ProxyLabel::human : ProxyLabel::novice));
        const auto t = gaussian_nll_terms<T>(label, c.q(b), c.sigma(b), eta);
        loss += static_cast<double>(t.loss);
        put_output_grad(grad, b, t, c.dsigma_draw(b), w);
    }
    nn::backward<T>(theta, c.cache, grad, &out.grads);
    out.loss = loss / static_cast<double>(n);
    return out;
}

template <typename T>
RowVector<T> td_target(const Mlp<T>& theta_bar, const Mlp<T>& phi_bar, const Matrix<T>& next_obs,
                       const RowVector<T>& not_done, const AlgoConfig& cfg, double alpha,
                       const TargetNoise<T>& noise) {
    const auto n = next_obs.cols();
    if (not_done.size() != n || noise.value.size() != n || noise.action.cols() != n) {
        throw ContractViolation("td_target: batch sizes of next_obs, not_done and noise differ");
    }
    RowVector<T> y(n);
    if (n == 0) return y;
    const auto pol = policy_forward<T>(phi_bar, next_obs, noise.action, false);
    const auto z = critic_forward<T>(theta_bar, next_obs, pol.sample.action, cfg, false);
    const T gamma = static_cast<T>(cfg.gamma);
    const T clip = static_cast<T>(cfg.clip_c);
    const T a = static_cast<T>(alpha);
    for (Eigen::Index b = 0; b < n; ++b) {
        const T spread = clip * z.sigma(b);
        const T sample = std::clamp(z.q(b) + z.sigma(b) * noise.value(b), z.q(b) - spread, z.q(b) + spread);
        y(b) = gamma * not_done(b) * (sample - a * pol.sample.log_prob(b));
    }
    return y;
}

template <typename T>
LossAndGrads<T> td_grads(const Mlp<T>& theta, const TdBatch<T>& batch, const AlgoConfig& cfg) {
    LossAndGrads<T> out;
    out.grads = theta.zeros_like();
    const auto n = batch.size();
    if (n == 0) return out;
    if (batch.target.size() != n || batch.action.cols() != n) {
        throw ContractViolation("td_grads: need exactly one target per sample");
    }
    auto c = critic_forward<T>(theta, batch.obs, batch.action, cfg, true);
    const T eta = static_cast<T>(cfg.eta);
    const T w = T(1) / static_cast<T>(n);
    Matrix<T> grad(2, n);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
        const auto t = gaussian_nll_terms<T>(batch.target(b), c.q(b), c.sigma(b), eta);
        loss += static_cast<double>(t.loss);
        put_output_grad(grad, b, t, c.dsigma_draw(b), w);
    }
    nn::backward<T>(theta, c.cache, grad, &out.grads);
    out.loss = loss / static_cast<double>(n);
    return out;
}

template <typename T>
CriticUpdateStats critic_update(Mlp<T>& theta, nn::OptimizerState<T>& optimizer, const HumanBatch<T>& human,
                                const TdBatch<T>& td, const AlgoConfig& cfg) {
    auto pv = pv_grads<T>(theta, human, cfg);
    auto tdg = td_grads<T>(theta, td, cfg);
    require_finite(pv.loss, "proxy-value loss");
    require_finite(tdg.loss, "TD loss");
    nn::add_in_place(pv.grads, tdg.grads);
    nn::adam_step(theta, pv.grads, optimizer);

    CriticUpdateStats stats{pv.loss, tdg.loss, 0.0};
    if (td.size() > 0) {
        // post-step check on the TD batch for the divergence alarm
        const auto c = critic_forward<T>(theta, td.obs, td.action, cfg, false);
        stats.max_abs_q = static_cast<double>(c.q.cwiseAbs().maxCoeff());
    }
    return stats;
}

// ---------------------------------------------------------------------------

template <typename T>
PolicyBatch<T> policy_forward(const Mlp<T>& phi, const Matrix<T>& obs, const Matrix<T>& noise, bool keep_cache) {
    const auto d = phi.output_dim() / 2;
    if (phi.output_dim() != 2 * d || d == 0) throw ContractViolation("actor must output [mean; log_std]");
    if (noise.rows() != d || noise.cols() != obs.cols()) {
        throw ContractViolation("policy_forward: noise must be action_dim x batch");
    }
    PolicyBatch<T> out;
    const Matrix<T> y = nn::forward<T>(phi, obs, keep_cache ? &out.cache : nullptr);
    out.sample = nn::squash_forward<T>(y.topRows(d), y.bottomRows(d), noise);
    return out;
}

template <typename T>
Vector<T> policy_mode(const Mlp<T>& phi, const Vector<T>& obs) {
    const auto d = phi.output_dim() / 2;
    const Matrix<T> y = nn::forward<T>(phi, Matrix<T>(obs), nullptr);
    return y.col(0).head(d).array().tanh().matrix();
}

template <typename T>
ActionValueFn<T> critic_action_value(const Mlp<T>& theta, const AlgoConfig& cfg) {
    return [&theta, cfg](const Matrix<T>& obs, const Matrix<T>& act, RowVector<T>& q, Matrix<T>& dq_dact) {
        auto c = critic_forward<T>(theta, obs, act, cfg, true);
        q = c.q;
        Matrix<T> seed = Matrix<T>::Zero(2, obs.cols());
        seed.row(0).setOnes();
        const Matrix<T> dx = nn::backward<T>(theta, c.cache, seed, nullptr);
        dq_dact = dx.bottomRows(act.rows());
    };
}

template <typename T>
PolicyLoss<T> policy_grads(const Mlp<T>& phi, const ActionValueFn<T>& q_fn, const Matrix<T>& obs,
                           const Matrix<T>& noise, double alpha) {
    PolicyLoss<T> out;
    out.grads = phi.zeros_like();
    const auto n = obs.cols();
    if (n == 0) return out;
    auto pol = policy_forward<T>(phi, obs, noise, true);
    RowVector<T> q;
    Matrix<T> dq;
    q_fn(obs, pol.sample.action, q, dq);
    if (q.size() != n || dq.rows() != pol.sample.action.rows() || dq.cols() != n) {
        throw ContractViolation("policy_grads: action-value function returned wrong shapes");
    }
    const T w = T(1) / static_cast<T>(n);
    const T a = static_cast<T>(alpha);
    // L = mean(alpha * log_prob - q)
    const Matrix<T> action_grad = -w * dq;
    const RowVector<T> log_prob_grad = RowVector<T>::Constant(n, w * a);
    Matrix<T> mean_grad;
    Matrix<T> log_std_grad;
    nn::squash_backward<T>(pol.sample, action_grad, log_prob_grad, mean_grad, log_std_grad);
    Matrix<T> out_grad(2 * mean_grad.rows(), n);
    out_grad.topRows(mean_grad.rows()) = mean_grad;
    out_grad.bottomRows(mean_grad.rows()) = log_std_grad;
    nn::backward<T>(phi, pol.cache, out_grad, &out.grads);

    double loss = 0.0;
    double lp = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
        loss += alpha * static_cast<double>(pol.sample.log_prob(b)) - static_cast<double>(q(b));
        lp += static_cast<double>(pol.sample.log_prob(b));
    }
    out.loss = loss / static_cast<double>(n);
    out.mean_log_prob = lp / static_cast<double>(n);
    return out;
}

double temperature_update(double alpha, double mean_neg_log_prob, const AlgoConfig& cfg) {
    if (!(alpha > 0.0)) throw ContractViolation("temperature must be positive");
    return std::max(alpha - cfg.alpha_lr * (mean_neg_log_prob - cfg.target_entropy), cfg.alpha_min);
}

Action mix_action(const Action& novice, const std::optional<Action>& human, bool intervened) {
    if (!intervened) return novice;
    if (!human) throw ContractViolation("mix_action: intervention flagged without a human action");
    return *human;
}

template <typename T>
void soft_update_targets(const Mlp<T>& theta, Mlp<T>& theta_bar, const Mlp<T>& phi, Mlp<T>& phi_bar, double tau) {
    nn::lerp_in_place(theta_bar, theta, tau);
    nn::lerp_in_place(phi_bar, phi, tau);
}

template <typename T>
Matrix<T> standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix<T> m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = static_cast<T>(dist(rng));
    }
    return m;
}

// ---------------------------------------------------------------------------

HdsacLearner::HdsacLearner(const NetworkShape& shape, const AlgoConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), alpha_(cfg.alpha) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    critic_ = nn::make_mlp<float>({shape.obs_dim + shape.action_dim, shape.hidden, 2}, rng);
    actor_ = nn::make_mlp<float>({shape.obs_dim, shape.hidden, 2 * shape.action_dim}, rng);
    critic_target_ = critic_;
    actor_target_ = actor_;
    critic_opt_ = nn::make_optimizer(critic_, {cfg_.critic_lr});
    actor_opt_ = nn::make_optimizer(actor_, {cfg_.actor_lr});
}

HdsacLearner::Stats HdsacLearner::update(const HumanBatch<float>& human, const Matrix<float>& td_obs,
                                         const Matrix<float>& td_action, const Matrix<float>& td_next_obs,
                                         const RowVector<float>& td_not_done, std::mt19937_64& rng) {
    const auto n = td_obs.cols();
    const auto d = actor_.output_dim() / 2;
    TargetNoise<float> noise{standard_normal<float>(d, n, rng), standard_normal<float>(1, n, rng)};
    TdBatch<float> td{td_obs, td_action, td_target<float>(critic_target_, actor_target_, td_next_obs, td_not_done,
                                                          cfg_, alpha_, noise)};
    const auto cs = critic_update<float>(critic_, critic_opt_, human, td, cfg_);
    if (cs.max_abs_q > cfg_.q_alarm) {
        throw TrainingDivergence("|Q| reached " + std::to_string(cs.max_abs_q) + " (alarm bound " +
                                 std::to_string(cfg_.q_alarm) + ")");
    }

    Stats stats;
    stats.pv_loss = cs.pv_loss;
    stats.td_loss = cs.td_loss;
    stats.max_abs_q = cs.max_abs_q;

    // Policy states come from the union batch; the human batch states are a subset of B.
    const auto q_fn = critic_action_value<float>(critic_, cfg_);
    const Matrix<float> pnoise = standard_normal<float>(d, n, rng);
    auto pg = policy_grads<float>(actor_, q_fn, td_obs, pnoise, alpha_);
    require_finite(pg.loss, "policy loss");
    nn::adam_step(actor_, pg.grads, actor_opt_);
    stats.policy_loss = pg.loss;

    alpha_ = temperature_update(alpha_, -pg.mean_log_prob, cfg_);
    stats.alpha = alpha_;

    soft_update_targets<float>(critic_, critic_target_, actor_, actor_target_, cfg_.tau);
    return stats;
}

#define HDSAC_ALGO_INSTANTIATE(T)                                                                              \
    template CriticBatch<T> critic_forward<T>(const Mlp<T>&, const Matrix<T>&, const Matrix<T>&,               \
                                              const AlgoConfig&, bool);                                        \
    template ReturnDistribution critic_eval<T>(const Mlp<T>&, const Vector<T>&, const Vector<T>&,              \
                                               const AlgoConfig&);                                             \
    template NllTerms<T> gaussian_nll_terms<T>(T, T, T, T);                                                    \
    template LossAndGrads<T> pv_grads<T>(const Mlp<T>&, const HumanBatch<T>&, const AlgoConfig&);              \
    template RowVector<T> td_target<T>(const Mlp<T>&, const Mlp<T>&, const Matrix<T>&, const RowVector<T>&,    \
                                       const AlgoConfig&, double, const TargetNoise<T>&);                      \
    template LossAndGrads<T> td_grads<T>(const Mlp<T>&, const TdBatch<T>&, const AlgoConfig&);                 \
    template CriticUpdateStats critic_update<T>(Mlp<T>&, nn::OptimizerState<T>&, const HumanBatch<T>&,         \
                                                const TdBatch<T>&, const AlgoConfig&);                         \
    template PolicyBatch<T> policy_forward<T>(const Mlp<T>&, const Matrix<T>&, const Matrix<T>&, bool);        \
    template Vector<T> policy_mode<T>(const Mlp<T>&, const Vector<T>&);                                        \
    template ActionValueFn<T> critic_action_value<T>(const Mlp<T>&, const AlgoConfig&);                        \
    template PolicyLoss<T> policy_grads<T>(const Mlp<T>&, const ActionValueFn<T>&, const Matrix<T>&,           \
                                           const Matrix<T>&, double);                                          \
    template void soft_update_targets<T>(const Mlp<T>&, Mlp<T>&, const Mlp<T>&, Mlp<T>&, double);              \
    template Matrix<T> standard_normal<T>(Eigen::Index, Eigen::Index, std::mt19937_64&);

HDSAC_ALGO_INSTANTIATE(float)
HDSAC_ALGO_INSTANTIATE(double)

#undef HDSAC_ALGO_INSTANTIATE

}  // namespace hdsac::algo
