#include "hdsac/trainer.hpp"

#include "hdsac/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace hdsac::trainer {

namespace fs = std::filesystem;
using nn::Matrix;
using nn::RowVector;
using json = nlohmann::ordered_json;

namespace {

void put_action(Matrix<float>& m, Eigen::Index col, const Action& a) {
    m(0, col) = static_cast<float>(a.steer);
    m(1, col) = static_cast<float>(a.accel);
}

Action get_action(const Matrix<float>& m, Eigen::Index col) { return Action{m(0, col), m(1, col)}; }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Independent stream per purpose so that, e.g., evaluation never shifts the
/// acting noise.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x5151));
}

nn::Vector<float> to_vector(const std::vector<float>& v) {
    return Eigen::Map<const nn::Vector<float>>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void Transition::validate() const {
    if (intervened && !human_action) throw ContractViolation("intervened transition without a human action");
    const Action expected = intervened ? *human_action : novice_action;
    if (!(behavior_action == expected)) {
        throw ContractViolation("behavior action must equal the human action iff intervened, else the novice action");
    }
    if (obs.size() != next_obs.size()) throw ContractViolation("obs and next_obs lengths differ");
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim)
    : capacity_(capacity),
      obs_dim_(obs_dim),
      obs_(obs_dim, static_cast<Eigen::Index>(capacity)),
      next_obs_(obs_dim, static_cast<Eigen::Index>(capacity)),
      novice_(Action::kDim, static_cast<Eigen::Index>(capacity)),
      human_(Action::kDim, static_cast<Eigen::Index>(capacity)),
      behavior_(Action::kDim, static_cast<Eigen::Index>(capacity)),
      intervened_(capacity),
      done_(capacity),
      reward_(capacity),
      cost_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
    if (obs_dim <= 0) throw ConfigError("replay buffer observation dimension must be positive");
}

void ReplayBuffer::push(const Transition& t) {
    t.validate();
    if (static_cast<int>(t.obs.size()) != obs_dim_) throw ContractViolation("transition observation size mismatch");
    const auto c = static_cast<Eigen::Index>(head_);
    obs_.col(c) = to_vector(t.obs);
    next_obs_.col(c) = to_vector(t.next_obs);
    put_action(novice_, c, t.novice_action);
    put_action(human_, c, t.human_action.value_or(Action{}));
    put_action(behavior_, c, t.behavior_action);
    intervened_[head_] = t.intervened ? 1 : 0;
    done_[head_] = t.done ? 1 : 0;
    reward_[head_] = t.reward;
    cost_[head_] = t.cost;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
    ++inserted_;
}

std::size_t ReplayBuffer::slot(std::size_t position) const {
    if (position >= size_) throw ContractViolation("replay buffer position out of range");
    return (head_ + capacity_ - size_ + position) % capacity_;
}

Transition ReplayBuffer::at(std::size_t i) const {
    const auto s = slot(i);
    const auto c = static_cast<Eigen::Index>(s);
    Transition t;
    t.obs.assign(obs_.col(c).data(), obs_.col(c).data() + obs_dim_);
    t.next_obs.assign(next_obs_.col(c).data(), next_obs_.col(c).data() + obs_dim_);
    t.novice_action = get_action(novice_, c);
    t.intervened = intervened_[s] != 0;
    if (t.intervened) t.human_action = get_action(human_, c);
    t.behavior_action = get_action(behavior_, c);
    t.done = done_[s] != 0;
    t.reward = reward_[s];
    t.cost = cost_[s];
    return t;
}

std::vector<std::size_t> ReplayBuffer::sample_positions(std::size_t n, std::mt19937_64& rng) const {
    if (n > size_) throw ContractViolation("cannot sample more positions than stored transitions");
    // Floyd's algorithm: n draws, no rejection loop.
    std::vector<std::size_t> out;
    out.reserve(n);
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(n * 2);
    for (std::size_t j = size_ - n; j < size_; ++j) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
        const std::size_t pick = chosen.count(t) ? j : t;
        chosen.insert(pick);
        out.push_back(pick);
    }
    return out;
}

void ReplayBuffer::gather_obs(const std::vector<std::size_t>& p, Matrix<float>& out, Eigen::Index col0) const {
    for (std::size_t i = 0; i < p.size(); ++i) out.col(col0 + static_cast<Eigen::Index>(i)) = obs_.col(static_cast<Eigen::Index>(slot(p[i])));
}

void ReplayBuffer::gather_next_obs(const std::vector<std::size_t>& p, Matrix<float>& out, Eigen::Index col0) const {
    for (std::size_t i = 0; i < p.size(); ++i) out.col(col0 + static_cast<Eigen::Index>(i)) = next_obs_.col(static_cast<Eigen::Index>(slot(p[i])));
}

void ReplayBuffer::gather_behavior(const std::vector<std::size_t>& p, Matrix<float>& out, Eigen::Index col0) const {
    for (std::size_t i = 0; i < p.size(); ++i) out.col(col0 + static_cast<Eigen::Index>(i)) = behavior_.col(static_cast<Eigen::Index>(slot(p[i])));
}

void ReplayBuffer::gather_human(const std::vector<std::size_t>& p, Matrix<float>& out, Eigen::Index col0) const {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto s = slot(p[i]);
        if (!intervened_[s]) throw ContractViolation("gather_human on a transition without a human action");
        out.col(col0 + static_cast<Eigen::Index>(i)) = human_.col(static_cast<Eigen::Index>(s));
    }
}

void ReplayBuffer::gather_novice(const std::vector<std::size_t>& p, Matrix<float>& out, Eigen::Index col0) const {
    for (std::size_t i = 0; i < p.size(); ++i) out.col(col0 + static_cast<Eigen::Index>(i)) = novice_.col(static_cast<Eigen::Index>(slot(p[i])));
}

void ReplayBuffer::gather_scalars(const std::vector<std::size_t>& p, RowVector<float>& not_done,
                                  RowVector<float>& reward, Eigen::Index col0) const {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto s = slot(p[i]);
        not_done(col0 + static_cast<Eigen::Index>(i)) = done_[s] ? 0.0f : 1.0f;
        reward(col0 + static_cast<Eigen::Index>(i)) = static_cast<float>(reward_[s]);
    }
}

void route_transition(const Transition& t, ReplayBuffer& novice, ReplayBuffer& human) {
    (t.intervened ? human : novice).push(t);
}

std::optional<SampledBatches> sample_batches(const ReplayBuffer& novice, const ReplayBuffer& human, int batch_size,
                                             double human_fraction, std::mt19937_64& rng) {
    if (batch_size <= 0) throw ContractViolation("batch size must be positive");
    if (!(human_fraction >= 0.0 && human_fraction <= 1.0)) throw ContractViolation("human fraction must lie in [0, 1]");
    if (novice.size() == 0 && human.size() == 0) return std::nullopt;
    if (novice.obs_dim() != human.obs_dim()) throw ContractViolation("buffers disagree on observation size");
    const auto batch = static_cast<std::size_t>(batch_size);
    const int d = novice.obs_dim();

    SampledBatches out;
    const std::size_t nh = std::min(batch, human.size());
    const auto hp = human.sample_positions(nh, rng);
    out.human.obs.resize(d, static_cast<Eigen::Index>(nh));
    out.human.human_action.resize(Action::kDim, static_cast<Eigen::Index>(nh));
    out.human.novice_action.resize(Action::kDim, static_cast<Eigen::Index>(nh));
    human.gather_obs(hp, out.human.obs, 0);
    human.gather_human(hp, out.human.human_action, 0);
    human.gather_novice(hp, out.human.novice_action, 0);

    const auto want_h = static_cast<std::size_t>(std::llround(human_fraction * static_cast<double>(batch)));
    std::size_t uh = std::min(want_h, human.size());
    const std::size_t un = std::min(batch - uh, novice.size());
    uh = std::min(batch - un, human.size());
    const auto hpos = human.sample_positions(uh, rng);
    const auto npos = novice.sample_positions(un, rng);
    const auto total = static_cast<Eigen::Index>(uh + un);
    auto& td = out.td;
    td.obs.resize(d, total);
    td.next_obs.resize(d, total);
    td.action.resize(Action::kDim, total);
    td.not_done.resize(total);
    td.reward.resize(total);
    const auto h_cols = static_cast<Eigen::Index>(uh);
    human.gather_obs(hpos, td.obs, 0);
    human.gather_next_obs(hpos, td.next_obs, 0);
    human.gather_behavior(hpos, td.action, 0);
    human.gather_scalars(hpos, td.not_done, td.reward, 0);
    novice.gather_obs(npos, td.obs, h_cols);
    novice.gather_next_obs(npos, td.next_obs, h_cols);
    novice.gather_behavior(npos, td.action, h_cols);
    novice.gather_scalars(npos, td.not_done, td.reward, h_cols);
    out.td_from_human = uh;
    return out;
}

// ---------------------------------------------------------------------------

EvalResult evaluate(const Policy& policy, const std::vector<std::uint64_t>& seeds, const sim::SimConfig& cfg) {
    if (seeds.empty()) throw ContractViolation("evaluation needs at least one scenario seed");
    EvalResult r;
    for (const auto seed : seeds) {
        auto rs = sim::reset(seed, cfg);
        sim::WorldState world = std::move(rs.state);
        sim::Observation obs = std::move(rs.observation);
        EpisodeResult ep;
        ep.seed = seed;
        while (world.terminated == sim::Termination::none) {
            const auto res = sim::step(world, policy(world, obs), cfg);
            ep.episode_return += res.reward;
            ep.cost += res.cost;
            ++ep.steps;
            obs = res.observation;
        }
        ep.termination = world.terminated;
        r.episodes.push_back(ep);
    }
    const double n = static_cast<double>(r.episodes.size());
    for (const auto& ep : r.episodes) {
        r.return_mean += ep.episode_return;
        r.safety_cost += ep.cost;
        r.success_rate += ep.success() ? 1.0 : 0.0;
    }
    r.return_mean /= n;
    r.safety_cost /= n;
    r.success_rate /= n;
    double var = 0.0;
    for (const auto& ep : r.episodes) var += (ep.episode_return - r.return_mean) * (ep.episode_return - r.return_mean);
    r.return_std = std::sqrt(var / n);
    return r;
}

Policy agent_policy(const agents::Agent& agent) {
    return [&agent](const sim::WorldState&, const sim::Observation& obs) {
        return agent.act_deterministic(to_vector(obs.flatten()));
    };
}

Policy expert_policy(const supervisor::ExpertConfig& expert, const sim::SimConfig& cfg) {
    return [expert, cfg](const sim::WorldState& world, const sim::Observation&) {
        return supervisor::expert_action(world, expert, cfg);
    };
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    algo.validate();
    sim.validate();
    if (hidden.empty()) throw ConfigError("hidden must list at least one layer width");
    for (int h : hidden) {
        if (h <= 0) throw ConfigError("hidden layer widths must be positive");
    }
    if (!(sac_q_alarm > 0.0)) throw ConfigError("sac_q_alarm must be positive");
    if (total_steps < 0) throw ConfigError("total_steps must be non-negative");
    if (warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
    if (update_interval <= 0) throw ConfigError("update_interval must be positive");
    if (window <= 0) throw ConfigError("window must be positive");
    if (eval_interval < 0) throw ConfigError("eval_interval must be non-negative");
    if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be non-negative");
    if (train_scenarios <= 0) throw ConfigError("train_scenarios must be positive");
    if (eval_episodes <= 0) throw ConfigError("eval_episodes must be positive");
    const std::uint64_t train_end = train_seed_base + static_cast<std::uint64_t>(train_scenarios);
    const std::uint64_t eval_end = eval_seed_base + static_cast<std::uint64_t>(eval_episodes);
    if (train_seed_base < eval_end && eval_seed_base < train_end) {
        throw ConfigError("training and evaluation scenario seed ranges overlap");
    }
    if (novice_capacity == 0) throw ConfigError("novice_capacity must be positive");
    if (human_capacity == 0) throw ConfigError("human_capacity must be positive");
    if (!(human_fraction >= 0.0 && human_fraction <= 1.0)) throw ConfigError("human_fraction must lie in [0, 1]");
}

std::vector<std::uint64_t> TrainConfig::eval_seeds() const {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < eval_episodes; ++i) seeds.push_back(eval_seed_base + static_cast<std::uint64_t>(i));
    return seeds;
}

namespace {

struct ProxyMeans {
    std::optional<double> human;
    std::optional<double> novice;
};

/// Mean Q over the most recent human-buffer entries, at a_h and at a_n.
ProxyMeans proxy_means(const agents::Agent& agent, const ReplayBuffer& human_buffer, std::size_t max_samples) {
    ProxyMeans out;
    const std::size_t n = std::min(max_samples, human_buffer.size());
    if (n == 0) return out;
    double qh = 0.0;
    double qn = 0.0;
    for (std::size_t i = human_buffer.size() - n; i < human_buffer.size(); ++i) {
        const Transition t = human_buffer.at(i);
        const auto obs = to_vector(t.obs);
        qh += agent.q_value(obs, *t.human_action);
        qn += agent.q_value(obs, t.novice_action);
    }
    out.human = qh / static_cast<double>(n);
    out.novice = qn / static_cast<double>(n);
    return out;
}

std::string step_dir_name(std::int64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%08lld", static_cast<long long>(step));
    return buf;
}

class WindowAccumulator {
public:
    void add_step(bool intervened, double cost) {
        ++steps_;
        interventions_ += intervened ? 1 : 0;
        cost_ += cost;
    }
    void add_update(const agents::UpdateStats& s) {
        ++updates_;
        pv_ += s.pv_loss;
        td_ += s.td_loss;
        pol_ += s.policy_loss;
        alpha_ = s.alpha;
    }
    void add_episode(bool success) {
        ++episodes_;
        successes_ += success ? 1 : 0;
    }
    double takeover_rate() const { return steps_ ? static_cast<double>(interventions_) / steps_ : 0.0; }
    int steps() const { return steps_; }

    WindowRecord close(std::int64_t index, std::int64_t step_end) {
        WindowRecord w;
        w.index = index;
        w.step_end = step_end;
        w.steps = steps_;
        w.takeover_rate = takeover_rate();
        w.cost = cost_;
        w.episodes = episodes_;
        w.successes = successes_;
        w.updates = updates_;
        if (updates_ > 0) {
            w.pv_loss = pv_ / updates_;
            w.td_loss = td_ / updates_;
            w.policy_loss = pol_ / updates_;
        }
        w.alpha = alpha_;
        *this = WindowAccumulator{};
        return w;
    }

    void set_alpha(double a) { alpha_ = a; }

private:
    int steps_ = 0;
    int interventions_ = 0;
    double cost_ = 0.0;
    int episodes_ = 0;
    int successes_ = 0;
    int updates_ = 0;
    double pv_ = 0.0;
    double td_ = 0.0;
    double pol_ = 0.0;
    double alpha_ = 0.0;
};

constexpr std::size_t kProxySamples = 256;

}  // namespace

TrainResult train(const TrainConfig& cfg, supervisor::Supervisor& sup, const TrainOutputs& outputs) {
    cfg.validate();
    const int obs_dim = cfg.sim.observation_dim();
    agents::NetworkShape shape{obs_dim, Action::kDim, cfg.hidden};

    TrainResult result;
    result.agent = agents::make_agent(cfg.algorithm, shape, cfg.algo, derive_seed(cfg.seed, 1), cfg.sac_q_alarm);
    auto& agent = *result.agent;
    auto& log = result.log;
    log.summary.algorithm = cfg.algorithm;

    std::mt19937_64 act_rng(derive_seed(cfg.seed, 2));
    std::mt19937_64 update_rng(derive_seed(cfg.seed, 3));

    ReplayBuffer novice_buffer(cfg.novice_capacity, obs_dim);
    ReplayBuffer human_buffer(cfg.human_capacity, obs_dim);

    auto emit = [&](const std::string& line) {
        if (outputs.metrics) {
            *outputs.metrics << line << '\n';
            outputs.metrics->flush();
        }
    };
    auto save_to = [&](const fs::path& dir) {
        agent.save(dir);
        if (outputs.config_snapshot.empty()) return;
        std::ofstream out(dir / "config.ini");
        out << outputs.config_snapshot;
        if (!out) throw IoError("cannot write " + (dir / "config.ini").string());
    };
    auto checkpoint = [&](const std::string& name) {
        if (outputs.checkpoint_dir) save_to(*outputs.checkpoint_dir / name);
    };
    const auto eval_seeds = cfg.eval_seeds();
    auto run_eval = [&](std::int64_t step) {
        EvalRecord rec{step, evaluate(agent_policy(agent), eval_seeds, cfg.sim)};
        emit(eval_record_json(rec));
        log.evals.push_back(std::move(rec));
    };

    checkpoint(step_dir_name(0));

    std::int64_t episode = 0;
    auto scenario_seed = [&](std::int64_t ep) {
        return cfg.train_seed_base + static_cast<std::uint64_t>(ep % cfg.train_scenarios);
    };
    auto rs = sim::reset(scenario_seed(episode), cfg.sim);
    sim::WorldState world = std::move(rs.state);
    std::vector<float> obs = rs.observation.flatten();
    sup.begin_episode();

    WindowAccumulator acc;
    acc.set_alpha(agent.alpha());
    std::int64_t human_steps = 0;
    double cumulative_cost = 0.0;
    int total_episodes = 0;
    int total_successes = 0;
    ProxyMeans proxy;

    try {
        for (std::int64_t t = 0; t < cfg.total_steps; ++t) {
            const Action a_n = agent.act(to_vector(obs), act_rng);
            const auto decision = sup.decide(world, a_n, t);
            const Action a_b = algo::mix_action(a_n, decision.human_action, decision.intervened);
            const auto res = sim::step(world, a_b, cfg.sim);

            Transition tr;
            tr.obs = std::move(obs);
            tr.novice_action = a_n;
            if (decision.intervened) tr.human_action = decision.human_action;
            tr.behavior_action = a_b;
            tr.intervened = decision.intervened;
            tr.next_obs = res.observation.flatten();
            tr.done = res.terminated != sim::Termination::none && res.terminated != sim::Termination::timeout;
            tr.reward = res.reward;
            tr.cost = res.cost;
            route_transition(tr, novice_buffer, human_buffer);
            obs = std::move(tr.next_obs);

            human_steps += decision.intervened ? 1 : 0;
            cumulative_cost += res.cost;
            acc.add_step(decision.intervened, res.cost);

            if (res.terminated != sim::Termination::none) {
                const bool success = res.terminated == sim::Termination::destination;
                acc.add_episode(success);
                ++total_episodes;
                total_successes += success ? 1 : 0;
                ++episode;
                auto next = sim::reset(scenario_seed(episode), cfg.sim);
                world = std::move(next.state);
                obs = next.observation.flatten();
                sup.begin_episode();
            }

            const std::int64_t done_steps = t + 1;
            if (done_steps > cfg.warmup_steps && done_steps % cfg.update_interval == 0) {
                auto batches = sample_batches(novice_buffer, human_buffer, cfg.algo.batch_size, cfg.human_fraction,
                                              update_rng);
                if (batches) acc.add_update(agent.update(batches->human, batches->td, update_rng));
            }

            if (outputs.on_step) {
                StepView v;
                v.step = done_steps;
                v.episode = episode;
                v.world = &world;
                v.intervened = decision.intervened;
                v.window_takeover_rate = acc.takeover_rate();
                v.q_human = proxy.human;
                v.q_novice = proxy.novice;
                v.human_steps = human_steps;
                v.cumulative_cost = cumulative_cost;
                v.episode_successes = total_successes;
                v.episodes_finished = total_episodes;
                outputs.on_step(v);
            }

            const bool last = done_steps == cfg.total_steps;
            if (done_steps % cfg.window == 0 || last) {
                proxy = proxy_means(agent, human_buffer, kProxySamples);
                WindowRecord w = acc.close(static_cast<std::int64_t>(log.windows.size()), done_steps);
                w.cumulative_cost = cumulative_cost;
                w.human_steps = human_steps;
                w.total_steps = done_steps;
                w.q_human = proxy.human;
                w.q_novice = proxy.novice;
                if (w.updates == 0) w.alpha = agent.alpha();
                emit(window_record_json(w));
                log.windows.push_back(w);
                acc.set_alpha(agent.alpha());
            }
            if (cfg.eval_interval > 0 && done_steps % cfg.eval_interval == 0) run_eval(done_steps);
            if (cfg.checkpoint_interval > 0 && done_steps % cfg.checkpoint_interval == 0 && !last) {
                checkpoint(step_dir_name(done_steps));
            }
        }
    } catch (const TrainingDivergence& e) {
        std::string where;
        if (outputs.checkpoint_dir) {
            const fs::path dir = *outputs.checkpoint_dir / "diverged";
            try {
                save_to(dir);
                where = " (snapshot in " + dir.string() + ")";
            } catch (const std::exception& save_error) {
                where = std::string(" (snapshot failed: ") + save_error.what() + ")";
            }
        }
        throw TrainingDivergence(std::string(e.what()) + where);
    }

    if (cfg.total_steps > 0 && (cfg.eval_interval == 0 || cfg.total_steps % cfg.eval_interval != 0)) {
        run_eval(cfg.total_steps);
    }
    if (cfg.total_steps > 0) checkpoint("final");

    log.summary.human_data = human_steps;
    log.summary.total_data = cfg.total_steps;
    log.summary.training_safety_cost = cumulative_cost;
    if (!log.evals.empty()) log.summary.eval = log.evals.back().result;
    emit(summary_record_json(log.summary));
    return result;
}

// ---------------------------------------------------------------------------

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string window_record_json(const WindowRecord& w) {
    json j;
    j["type"] = "window";
    j["version"] = kMetricsSchemaVersion;
    j["index"] = w.index;
    j["step_end"] = w.step_end;
    j["steps"] = w.steps;
    j["takeover_rate"] = w.takeover_rate;
    j["cost"] = w.cost;
    j["cumulative_cost"] = w.cumulative_cost;
    j["human_steps"] = w.human_steps;
    j["total_steps"] = w.total_steps;
    j["q_human"] = optional_number(w.q_human);
    j["q_novice"] = optional_number(w.q_novice);
    j["episodes"] = w.episodes;
    j["successes"] = w.successes;
    j["updates"] = w.updates;
    j["pv_loss"] = w.pv_loss;
    j["td_loss"] = w.td_loss;
    j["policy_loss"] = w.policy_loss;
    j["alpha"] = w.alpha;
    return j.dump();
}

std::string eval_record_json(const EvalRecord& e) {
    json j;
    j["type"] = "eval";
    j["version"] = kMetricsSchemaVersion;
    j["step"] = e.step;
    j["return_mean"] = e.result.return_mean;
    j["return_std"] = e.result.return_std;
    j["safety_cost"] = e.result.safety_cost;
    j["success_rate"] = e.result.success_rate;
    json eps = json::array();
    for (const auto& ep : e.result.episodes) {
        eps.push_back({{"seed", ep.seed},
                       {"return", ep.episode_return},
                       {"cost", ep.cost},
                       {"steps", ep.steps},
                       {"termination", sim::to_string(ep.termination)}});
    }
    j["episodes"] = std::move(eps);
    return j.dump();
}

std::string summary_record_json(const Summary& s) {
    json j;
    j["type"] = "summary";
    j["version"] = kMetricsSchemaVersion;
    j["algorithm"] = agents::to_string(s.algorithm);
    j["human_data"] = s.human_data;
    j["total_data"] = s.total_data;
    j["training_safety_cost"] = s.training_safety_cost;
    if (s.eval) {
        j["return_mean"] = s.eval->return_mean;
        j["return_std"] = s.eval->return_std;
        j["episodic_safety_cost"] = s.eval->safety_cost;
        j["success_rate"] = s.eval->success_rate;
    } else {
        j["return_mean"] = nullptr;
        j["return_std"] = nullptr;
        j["episodic_safety_cost"] = nullptr;
        j["success_rate"] = nullptr;
    }
    return j.dump();
}

std::string summary_header() {
    return "method\thuman_data\ttotal_data\tsafety_cost\tepisodic_return\tepisodic_safety_cost\tsuccess_rate";
}

std::string summary_row(const Summary& s) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << agents::to_string(s.algorithm) << '\t';
    if (s.algorithm == agents::Algorithm::sac) {
        out << '-';
    } else {
        out << s.human_data;
    }
    out << '\t' << s.total_data << '\t' << s.training_safety_cost << '\t';
    if (s.eval) {
        out << s.eval->return_mean << " +- " << s.eval->return_std << '\t' << s.eval->safety_cost << '\t'
            << s.eval->success_rate;
    } else {
        out << "-\t-\t-";
    }
    return out.str();
}

}  // namespace hdsac::trainer
