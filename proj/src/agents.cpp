#include "hdsac/agents.hpp"

#include "hdsac/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace hdsac::agents {

namespace fs = std::filesystem;

const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::hdsac: return "hdsac";
        case Algorithm::sac: return "sac";
        case Algorithm::pvp: return "pvp";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view tag) {
    if (tag == "hdsac") return Algorithm::hdsac;
    if (tag == "sac") return Algorithm::sac;
    if (tag == "pvp") return Algorithm::pvp;
    throw ConfigError("unknown algorithm '" + std::string(tag) + "' (expected hdsac, sac or pvp)");
}

namespace {

template <typename T>
Matrix<T> stack_rows(const Matrix<T>& top, const Matrix<T>& bottom) {
    if (top.cols() != bottom.cols()) throw ContractViolation("observation and action batch sizes differ");
    Matrix<T> out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

template <typename T>
void require_scalar_critic(const Mlp<T>& theta) {
    if (theta.output_dim() != 1) throw ContractViolation("scalar critic must have one output");
}

template <typename T>
LossAndGrads<T> squared_error_impl(const Mlp<T>& theta, const Matrix<T>& obs, const Matrix<T>& act,
                                   const RowVector<T>& target, double* max_abs_q) {
    require_scalar_critic(theta);
    const auto n = obs.cols();
    if (target.size() != n) throw ContractViolation("squared_error_grads: target size differs from batch");
    LossAndGrads<T> out;
    out.grads = theta.zeros_like();
    if (n == 0) return out;
    nn::ForwardCache<T> cache;
    const Matrix<T> q = nn::forward<T>(theta, stack_rows<T>(obs, act), &cache);
    const T w = T(1) / static_cast<T>(n);
    Matrix<T> seed(1, n);
    double loss = 0.0;
    double peak = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
        const T diff = q(0, b) - target(b);
        seed(0, b) = w * diff;
        loss += 0.5 * static_cast<double>(diff) * static_cast<double>(diff);
        peak = std::max(peak, std::abs(static_cast<double>(q(0, b))));
    }
    nn::backward<T>(theta, cache, seed, &out.grads);
    out.loss = loss / static_cast<double>(n);
    if (max_abs_q) *max_abs_q = std::max(*max_abs_q, peak);
    return out;
}

template <typename T>
LossAndGrads<T> proxy_label_impl(const Mlp<T>& theta, const HumanBatch<T>& batch, double* max_abs_q) {
    const auto n = batch.size();
    if (n == 0) {
        require_scalar_critic(theta);
        return {0.0, theta.zeros_like()};
    }
    Matrix<T> obs(batch.obs.rows(), 2 * n);
    obs << batch.obs, batch.obs;
    Matrix<T> act(batch.human_action.rows(), 2 * n);
    act << batch.human_action, batch.novice_action;
    RowVector<T> target(2 * n);
    target.head(n).setConstant(T(algo::proxy_value(algo::ProxyLabel::human)));
    target.tail(n).setConstant(T(algo::proxy_value(algo::ProxyLabel::novice)));
    // The impl averages over 2n samples; the loss is a per-pair sum.
    auto out = squared_error_impl<T>(theta, obs, act, target, max_abs_q);
    out.loss *= 2.0;
    nn::scale_in_place(out.grads, T(2));
    return out;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw TrainingDivergence(std::string("non-finite ") + what);
}

void check_alarm(double max_abs_q, double bound) {
    if (max_abs_q > bound) {
        throw TrainingDivergence("|Q| reached " + std::to_string(max_abs_q) + " (alarm bound " +
                                 std::to_string(bound) + ")");
    }
}

Vector<float> action_vector(const Action& a) {
    Vector<float> v(Action::kDim);
    v << static_cast<float>(a.steer), static_cast<float>(a.accel);
    return v;
}

// -- checkpoint files --------------------------------------------------------

constexpr const char* kMetaFile = "agent.txt";

void write_meta(const fs::path& dir, Algorithm algorithm, double alpha) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
    std::ofstream out(dir / kMetaFile);
    if (!out) throw IoError("cannot write " + (dir / kMetaFile).string());
    out << "hdsac-agent " << kAgentSchemaVersion << "\n";
    out << "algorithm " << to_string(algorithm) << "\n";
    out << std::setprecision(17) << "alpha " << alpha << "\n";
    if (!out) throw IoError("write failed for " + (dir / kMetaFile).string());
}

struct Meta {
    Algorithm algorithm = Algorithm::hdsac;
    double alpha = 0.0;
};

Meta read_meta(const fs::path& dir) {
    const fs::path path = dir / kMetaFile;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic, key, tag;
    int version = 0;
    Meta m;
    if (!(in >> magic >> version) || magic != "hdsac-agent") throw FormatError(path.string() + ": not an agent checkpoint");
    if (version != kAgentSchemaVersion) {
        throw FormatError(path.string() + ": checkpoint schema version " + std::to_string(version) + ", expected " +
                          std::to_string(kAgentSchemaVersion));
    }
    if (!(in >> key >> tag) || key != "algorithm") throw FormatError(path.string() + ": missing algorithm");
    try {
        m.algorithm = parse_algorithm(tag);
    } catch (const ConfigError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (!(in >> key >> m.alpha) || key != "alpha" || !(m.alpha > 0.0)) {
        throw FormatError(path.string() + ": missing or invalid alpha");
    }
    return m;
}

void save_net(const fs::path& dir, const char* name, const Mlp<float>& net) {
    nn::save_params(dir / (std::string(name) + ".bin"), net);
}

void load_net(const fs::path& dir, const char* name, Mlp<float>& net) {
    Mlp<float> loaded = nn::load_params<float>(dir / (std::string(name) + ".bin"));
    try {
        nn::require_same_shape(net, loaded, name);
    } catch (const ContractViolation& e) {
        throw FormatError(std::string("checkpoint network shape mismatch: ") + e.what());
    }
    net = std::move(loaded);
}

Mlp<float> make_scalar_critic(const NetworkShape& shape, std::mt19937_64& rng) {
    return nn::make_mlp<float>({shape.obs_dim + shape.action_dim, shape.hidden, 1}, rng);
}

Mlp<float> make_actor(const NetworkShape& shape, std::mt19937_64& rng) {
    return nn::make_mlp<float>({shape.obs_dim, shape.hidden, 2 * shape.action_dim}, rng);
}

// ---------------------------------------------------------------------------

class HdsacAgent final : public Agent {
public:
    HdsacAgent(const NetworkShape& shape, const AlgoConfig& cfg, std::uint64_t seed) : learner_(shape, cfg, seed) {}

    Algorithm algorithm() const override { return Algorithm::hdsac; }

    UpdateStats update(const HumanBatch<float>& human, const TdSamples& td, std::mt19937_64& rng) override {
        // td.reward is deliberately not passed on: the learner has no reward input.
        const auto s = learner_.update(human, td.obs, td.action, td.next_obs, td.not_done, rng);
        return {s.pv_loss, s.td_loss, s.policy_loss, s.alpha, s.max_abs_q};
    }

    double q_value(const Vector<float>& obs, const Action& action) const override {
        return algo::critic_eval<float>(learner_.critic(), obs, action_vector(action), learner_.config()).q_mean;
    }

    const Mlp<float>& actor() const override { return learner_.actor(); }
    double alpha() const override { return learner_.alpha(); }

    void save(const fs::path& dir) const override {
        write_meta(dir, algorithm(), learner_.alpha());
        const auto& l = learner_;
        save_net(dir, "critic", l.critic());
        save_net(dir, "critic_target", l.critic_target());
        save_net(dir, "actor", l.actor());
        save_net(dir, "actor_target", l.actor_target());
    }

    void load(const fs::path& dir) override {
        const Meta m = read_meta(dir);
        if (m.algorithm != algorithm()) throw FormatError("checkpoint holds a " + std::string(to_string(m.algorithm)) + " agent");
        load_net(dir, "critic", learner_.critic());
        load_net(dir, "critic_target", learner_.critic_target());
        load_net(dir, "actor", learner_.actor());
        load_net(dir, "actor_target", learner_.actor_target());
        learner_.set_alpha(m.alpha);
    }

private:
    algo::HdsacLearner learner_;
};

class SacAgent final : public Agent {
public:
    SacAgent(const NetworkShape& shape, const AlgoConfig& cfg, std::uint64_t seed, double q_alarm)
        : cfg_(cfg), alpha_(cfg.alpha), q_alarm_(q_alarm) {
        cfg_.validate();
        if (!(q_alarm_ > 0.0)) throw ConfigError("sac_q_alarm must be positive");
        std::mt19937_64 rng(seed);
        q1_ = make_scalar_critic(shape, rng);
        q2_ = make_scalar_critic(shape, rng);
        actor_ = make_actor(shape, rng);
        q1_target_ = q1_;
        q2_target_ = q2_;
        q1_opt_ = nn::make_optimizer(q1_, {cfg_.critic_lr});
        q2_opt_ = nn::make_optimizer(q2_, {cfg_.critic_lr});
        actor_opt_ = nn::make_optimizer(actor_, {cfg_.actor_lr});
    }

    Algorithm algorithm() const override { return Algorithm::sac; }

    UpdateStats update(const HumanBatch<float>&, const TdSamples& td, std::mt19937_64& rng) override {
        const auto n = td.size();
        const auto d = actor_.output_dim() / 2;
        UpdateStats stats;
        const Matrix<float> noise = algo::standard_normal<float>(d, n, rng);
        const RowVector<float> y = scalar_td_target<float>({&q1_target_, &q2_target_}, actor_, td.next_obs,
                                                           td.not_done, td.reward, cfg_.gamma, alpha_, noise);
        auto g1 = squared_error_impl<float>(q1_, td.obs, td.action, y, &stats.max_abs_q);
        auto g2 = squared_error_impl<float>(q2_, td.obs, td.action, y, &stats.max_abs_q);
        stats.td_loss = g1.loss + g2.loss;
        require_finite(stats.td_loss, "critic loss");
        check_alarm(stats.max_abs_q, q_alarm_);
        nn::adam_step(q1_, g1.grads, q1_opt_);
        nn::adam_step(q2_, g2.grads, q2_opt_);

        const auto q_fn = min_action_value<float>({&q1_, &q2_});
        const Matrix<float> pnoise = algo::standard_normal<float>(d, n, rng);
        auto pg = algo::policy_grads<float>(actor_, q_fn, td.obs, pnoise, alpha_);
        require_finite(pg.loss, "policy loss");
        nn::adam_step(actor_, pg.grads, actor_opt_);
        stats.policy_loss = pg.loss;

        alpha_ = algo::temperature_update(alpha_, -pg.mean_log_prob, cfg_);
        stats.alpha = alpha_;
        nn::lerp_in_place(q1_target_, q1_, cfg_.tau);
        nn::lerp_in_place(q2_target_, q2_, cfg_.tau);
        return stats;
    }

    double q_value(const Vector<float>& obs, const Action& action) const override {
        const Vector<float> a = action_vector(action);
        return std::min(scalar_q<float>(q1_, obs, a)(0), scalar_q<float>(q2_, obs, a)(0));
    }

    const Mlp<float>& actor() const override { return actor_; }
    double alpha() const override { return alpha_; }

    void save(const fs::path& dir) const override {
        write_meta(dir, algorithm(), alpha_);
        save_net(dir, "critic1", q1_);
        save_net(dir, "critic1_target", q1_target_);
        save_net(dir, "critic2", q2_);
        save_net(dir, "critic2_target", q2_target_);
        save_net(dir, "actor", actor_);
    }

    void load(const fs::path& dir) override {
        const Meta m = read_meta(dir);
        if (m.algorithm != algorithm()) throw FormatError("checkpoint holds a " + std::string(to_string(m.algorithm)) + " agent");
        load_net(dir, "critic1", q1_);
        load_net(dir, "critic1_target", q1_target_);
        load_net(dir, "critic2", q2_);
        load_net(dir, "critic2_target", q2_target_);
        load_net(dir, "actor", actor_);
        alpha_ = m.alpha;
    }

private:
    AlgoConfig cfg_;
    double alpha_;
    double q_alarm_;
    Mlp<float> q1_, q2_, q1_target_, q2_target_, actor_;
    nn::OptimizerState<float> q1_opt_, q2_opt_, actor_opt_;
};

class PvpAgent final : public Agent {
public:
    PvpAgent(const NetworkShape& shape, const AlgoConfig& cfg, std::uint64_t seed) : cfg_(cfg), alpha_(cfg.alpha) {
        cfg_.validate();
        std::mt19937_64 rng(seed);
        critic_ = make_scalar_critic(shape, rng);
        actor_ = make_actor(shape, rng);
        critic_target_ = critic_;
        actor_target_ = actor_;
        critic_opt_ = nn::make_optimizer(critic_, {cfg_.critic_lr});
        actor_opt_ = nn::make_optimizer(actor_, {cfg_.actor_lr});
    }

    Algorithm algorithm() const override { return Algorithm::pvp; }

    UpdateStats update(const HumanBatch<float>& human, const TdSamples& td, std::mt19937_64& rng) override {
        const auto n = td.size();
        const auto d = actor_.output_dim() / 2;
        UpdateStats stats;
        const Matrix<float> noise = algo::standard_normal<float>(d, n, rng);
        const RowVector<float> y = scalar_td_target<float>({&critic_target_}, actor_target_, td.next_obs, td.not_done,
                                                           RowVector<float>(), cfg_.gamma, alpha_, noise);
        auto labels = proxy_label_impl<float>(critic_, human, &stats.max_abs_q);
        auto tdg = squared_error_impl<float>(critic_, td.obs, td.action, y, &stats.max_abs_q);
        stats.pv_loss = labels.loss;
        stats.td_loss = tdg.loss;
        require_finite(labels.loss + tdg.loss, "critic loss");
        check_alarm(stats.max_abs_q, cfg_.q_alarm);
        nn::add_in_place(labels.grads, tdg.grads);
        nn::adam_step(critic_, labels.grads, critic_opt_);

        const auto q_fn = min_action_value<float>({&critic_});
        const Matrix<float> pnoise = algo::standard_normal<float>(d, n, rng);
        auto pg = algo::policy_grads<float>(actor_, q_fn, td.obs, pnoise, alpha_);
        require_finite(pg.loss, "policy loss");
        nn::adam_step(actor_, pg.grads, actor_opt_);
        stats.policy_loss = pg.loss;

        alpha_ = algo::temperature_update(alpha_, -pg.mean_log_prob, cfg_);
        stats.alpha = alpha_;
        algo::soft_update_targets<float>(critic_, critic_target_, actor_, actor_target_, cfg_.tau);
        return stats;
    }

    double q_value(const Vector<float>& obs, const Action& action) const override {
        return scalar_q<float>(critic_, obs, action_vector(action))(0);
    }

    const Mlp<float>& actor() const override { return actor_; }
    double alpha() const override { return alpha_; }

    void save(const fs::path& dir) const override {
        write_meta(dir, algorithm(), alpha_);
        save_net(dir, "critic", critic_);
        save_net(dir, "critic_target", critic_target_);
        save_net(dir, "actor", actor_);
        save_net(dir, "actor_target", actor_target_);
    }

    void load(const fs::path& dir) override {
        const Meta m = read_meta(dir);
        if (m.algorithm != algorithm()) throw FormatError("checkpoint holds a " + std::string(to_string(m.algorithm)) + " agent");
        load_net(dir, "critic", critic_);
        load_net(dir, "critic_target", critic_target_);
        load_net(dir, "actor", actor_);
        load_net(dir, "actor_target", actor_target_);
        alpha_ = m.alpha;
    }

private:
    AlgoConfig cfg_;
    double alpha_;
    Mlp<float> critic_, critic_target_, actor_, actor_target_;
    nn::OptimizerState<float> critic_opt_, actor_opt_;
};

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
RowVector<T> scalar_q(const Mlp<T>& theta, const Matrix<T>& obs, const Matrix<T>& act) {
    require_scalar_critic(theta);
    return nn::forward<T>(theta, stack_rows<T>(obs, act)).row(0);
}

template <typename T>
LossAndGrads<T> squared_error_grads(const Mlp<T>& theta, const Matrix<T>& obs, const Matrix<T>& act,
                                    const RowVector<T>& target) {
    return squared_error_impl<T>(theta, obs, act, target, nullptr);
}

template <typename T>
LossAndGrads<T> proxy_label_grads(const Mlp<T>& theta, const HumanBatch<T>& batch) {
    return proxy_label_impl<T>(theta, batch, nullptr);
}

template <typename T>
algo::ActionValueFn<T> min_action_value(std::vector<const Mlp<T>*> critics) {
    if (critics.empty()) throw ContractViolation("min_action_value needs at least one critic");
    for (const auto* c : critics) require_scalar_critic(*c);
    return [critics](const Matrix<T>& obs, const Matrix<T>& act, RowVector<T>& q, Matrix<T>& dq_dact) {
        const auto n = obs.cols();
        const Matrix<T> input = stack_rows<T>(obs, act);
        std::vector<nn::ForwardCache<T>> caches(critics.size());
        std::vector<RowVector<T>> values(critics.size());
        for (std::size_t i = 0; i < critics.size(); ++i) {
            values[i] = nn::forward<T>(*critics[i], input, &caches[i]).row(0);
        }
        std::vector<std::size_t> argmin(static_cast<std::size_t>(n), 0);
        q = values[0];
        for (std::size_t i = 1; i < critics.size(); ++i) {
            for (Eigen::Index b = 0; b < n; ++b) {
                if (values[i](b) < q(b)) {
                    q(b) = values[i](b);
                    argmin[static_cast<std::size_t>(b)] = i;
                }
            }
        }
        dq_dact = Matrix<T>::Zero(act.rows(), n);
        for (std::size_t i = 0; i < critics.size(); ++i) {
            Matrix<T> seed = Matrix<T>::Zero(1, n);
            bool any = false;
            for (Eigen::Index b = 0; b < n; ++b) {
                if (argmin[static_cast<std::size_t>(b)] == i) {
                    seed(0, b) = T(1);
                    any = true;
                }
            }
            if (!any) continue;
            const Matrix<T> dx = nn::backward<T>(*critics[i], caches[i], seed, nullptr);
            dq_dact += dx.bottomRows(act.rows());
        }
    };
}

template <typename T>
RowVector<T> scalar_td_target(const std::vector<const Mlp<T>*>& critics, const Mlp<T>& actor,
                              const Matrix<T>& next_obs, const RowVector<T>& not_done, const RowVector<T>& reward,
                              double gamma, double alpha, const Matrix<T>& noise) {
    const auto n = next_obs.cols();
    if (not_done.size() != n) throw ContractViolation("scalar_td_target: not_done size differs from batch");
    if (reward.size() != 0 && reward.size() != n) throw ContractViolation("scalar_td_target: reward size differs");
    if (critics.empty()) throw ContractViolation("scalar_td_target needs at least one critic");
    const auto pol = algo::policy_forward<T>(actor, next_obs, noise, false);
    RowVector<T> qmin;
    for (std::size_t i = 0; i < critics.size(); ++i) {
        const RowVector<T> qi = scalar_q<T>(*critics[i], next_obs, pol.sample.action);
        qmin = i == 0 ? qi : qmin.cwiseMin(qi).eval();
    }
    RowVector<T> y(n);
    for (Eigen::Index b = 0; b < n; ++b) {
        const double soft = static_cast<double>(qmin(b)) - alpha * static_cast<double>(pol.sample.log_prob(b));
        const double r = reward.size() == 0 ? 0.0 : static_cast<double>(reward(b));
        y(b) = static_cast<T>(r + gamma * static_cast<double>(not_done(b)) * soft);
    }
    return y;
}

// ---------------------------------------------------------------------------

Action Agent::act(const Vector<float>& obs, std::mt19937_64& rng) const {
    const auto& phi = actor();
    const auto d = phi.output_dim() / 2;
    const Matrix<float> noise = algo::standard_normal<float>(d, 1, rng);
    const auto pol = algo::policy_forward<float>(phi, obs, noise, false);
    return Action{static_cast<double>(pol.sample.action(0, 0)), static_cast<double>(pol.sample.action(1, 0))}
        .clamped();
}

Action Agent::act_deterministic(const Vector<float>& obs) const {
    const Vector<float> a = algo::policy_mode<float>(actor(), obs);
    return Action{static_cast<double>(a(0)), static_cast<double>(a(1))}.clamped();
}

std::unique_ptr<Agent> make_agent(Algorithm algorithm, const NetworkShape& shape, const AlgoConfig& cfg,
                                  std::uint64_t seed, double sac_q_alarm) {
    if (shape.obs_dim <= 0) throw ConfigError("observation dimension must be positive");
    if (shape.action_dim != Action::kDim) throw ConfigError("agents act in the 2-D steer/accel box");
    switch (algorithm) {
        case Algorithm::hdsac: return std::make_unique<HdsacAgent>(shape, cfg, seed);
        case Algorithm::sac: return std::make_unique<SacAgent>(shape, cfg, seed, sac_q_alarm);
        case Algorithm::pvp: return std::make_unique<PvpAgent>(shape, cfg, seed);
    }
    throw ContractViolation("unknown algorithm");
}

std::unique_ptr<Agent> load_agent(const fs::path& dir, const AlgoConfig& cfg, double sac_q_alarm) {
    const Meta m = read_meta(dir);
    const Mlp<float> actor = nn::load_params<float>(dir / "actor.bin");
    NetworkShape shape;
    shape.obs_dim = static_cast<int>(actor.input_dim());
    shape.action_dim = static_cast<int>(actor.output_dim() / 2);
    shape.hidden.clear();
    for (std::size_t i = 0; i + 1 < actor.layers.size(); ++i) {
        shape.hidden.push_back(static_cast<int>(actor.layers[i].weight.rows()));
    }
    auto agent = make_agent(m.algorithm, shape, cfg, 0, sac_q_alarm);
    agent->load(dir);
    return agent;
}

#define HDSAC_AGENTS_INSTANTIATE(T)                                                                             \
    template RowVector<T> scalar_q<T>(const Mlp<T>&, const Matrix<T>&, const Matrix<T>&);                       \
    template LossAndGrads<T> squared_error_grads<T>(const Mlp<T>&, const Matrix<T>&, const Matrix<T>&,          \
                                                    const RowVector<T>&);                                       \
    template LossAndGrads<T> proxy_label_grads<T>(const Mlp<T>&, const HumanBatch<T>&);                         \
    template algo::ActionValueFn<T> min_action_value<T>(std::vector<const Mlp<T>*>);                            \
    template RowVector<T> scalar_td_target<T>(const std::vector<const Mlp<T>*>&, const Mlp<T>&, const Matrix<T>&, \
                                              const RowVector<T>&, const RowVector<T>&, double, double,          \
                                              const Matrix<T>&);

HDSAC_AGENTS_INSTANTIATE(float)
HDSAC_AGENTS_INSTANTIATE(double)

#undef HDSAC_AGENTS_INSTANTIATE

}  // namespace hdsac::agents
