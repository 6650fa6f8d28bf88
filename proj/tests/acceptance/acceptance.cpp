// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes.
//
//   acceptance [--only NAME]... [--work DIR] [--list]
//
// The learning criteria train three 50k-step runs (H-DSAC and PVP with the
// scripted expert, SAC without a supervisor) under --work.

#include "hdsac/agents.hpp"
#include "hdsac/algo.hpp"
#include "hdsac/plot.hpp"
#include "hdsac/run.hpp"
#include "hdsac/sim.hpp"
#include "hdsac/supervisor.hpp"

#include "../gradcheck.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace hdsac;
namespace fs = std::filesystem;
using nn::Matrix;
using nn::Mlp;
using nn::RowVector;
using nn::Vector;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// gradient oracle

constexpr int kObs = 4;
constexpr int kAct = 2;

Outcome gradient_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    algo::AlgoConfig cfg;  // eta = 1: every gradient is the exact gradient of its reported loss
    double worst[4] = {0, 0, 0, 0};
    std::string where[4];
    const char* names[4] = {"proxy loss", "single labels", "td", "policy"};
    auto record = [&](int k, const testing_util::GradReport& r, int net) {
        if (r.max_rel_error > worst[k]) {
            worst[k] = r.max_rel_error;
            where[k] = "net " + std::to_string(net) + " " + r.worst;
        }
    };
    for (int net = 0; net < 20; ++net) {
        nn::MlpSpec critic_spec{kObs + kAct, {10, 8}, 2};
        critic_spec.final_layer_scale = 1.0;
        const auto theta = nn::make_mlp<double>(critic_spec, rng);
        nn::MlpSpec actor_spec{kObs, {10, 8}, 2 * kAct};
        actor_spec.final_layer_scale = 0.5;
        const auto phi = nn::make_mlp<double>(actor_spec, rng);
        const int n = 6;
        const Matrix<double> obs = testing_util::uniform_matrix(kObs, n, rng);
        const Matrix<double> a_h = testing_util::uniform_matrix(kAct, n, rng, -0.9, 0.9);
        const Matrix<double> a_n = testing_util::uniform_matrix(kAct, n, rng, -0.9, 0.9);

        // Independent scalar form of the proxy loss: label +1 at the
        // supervisor's action, label -1 at the novice's, averaged per sample.
        const auto nll = [&](const Mlp<double>& p, const Matrix<double>& act, const RowVector<double>& y) {
            double total = 0.0;
            for (int b = 0; b < n; ++b) {
                const auto z = algo::critic_eval<double>(p, obs.col(b), act.col(b), cfg);
                total += (y(b) - z.q_mean) * (y(b) - z.q_mean) / (2.0 * z.sigma * z.sigma) + std::log(z.sigma);
            }
            return total / n;
        };
        const RowVector<double> plus = RowVector<double>::Ones(n);
        const RowVector<double> minus = -plus;
        const auto pv = algo::pv_grads(theta, algo::HumanBatch<double>{obs, a_h, a_n}, cfg);
        record(0,
               testing_util::check_param_grads(theta, pv.grads,
                                               [&](const Mlp<double>& p) { return nll(p, a_h, plus) + nll(p, a_n, minus); }),
               net);
        // Each Dirac label on its own, as a point target of the same NLL.
        const auto pos = algo::td_grads(theta, algo::TdBatch<double>{obs, a_h, plus}, cfg);
        const auto neg = algo::td_grads(theta, algo::TdBatch<double>{obs, a_n, minus}, cfg);
        record(1,
               testing_util::check_param_grads(theta, pos.grads, [&](const Mlp<double>& p) { return nll(p, a_h, plus); }),
               net);
        record(1,
               testing_util::check_param_grads(theta, neg.grads, [&](const Mlp<double>& p) { return nll(p, a_n, minus); }),
               net);

        const RowVector<double> y = testing_util::uniform_matrix(1, n, rng, -2.0, 2.0);
        const algo::TdBatch<double> td{obs, a_h, y};
        const auto tdg = algo::td_grads(theta, td, cfg);
        record(2,
               testing_util::check_param_grads(theta, tdg.grads, [&](const Mlp<double>& p) { return nll(p, a_h, y); }),
               net);

        const Matrix<double> noise = testing_util::uniform_matrix(kAct, n, rng, -2.0, 2.0);
        const auto q_fn = algo::critic_action_value(theta, cfg);
        const double alpha = 0.2;
        const auto pg = algo::policy_grads<double>(phi, q_fn, obs, noise, alpha);
        record(3,
               testing_util::check_param_grads(
                   phi, pg.grads, [&](const Mlp<double>& p) { return algo::policy_grads<double>(p, q_fn, obs, noise, alpha).loss; }),
               net);
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = secs < 30.0;
    std::string d;
    for (int k = 0; k < 4; ++k) {
        o.pass = o.pass && worst[k] < 1e-4;
        d += fmt("%s max rel err %.2e; ", names[k], worst[k]);
    }
    d += fmt("20 nets in %.1f s (limits 1e-4, 30 s)", secs);
    for (int k = 0; k < 4; ++k)
        if (worst[k] >= 1e-4) d += "; worst " + std::string(names[k]) + ": " + where[k];
    o.detail = d;
    return o;
}

// ---------------------------------------------------------------------------
// Dirac labels

Outcome dirac_labels() {
    const auto t0 = Clock::now();
    const sim::SimConfig sim_cfg;
    const int obs_dim = sim_cfg.observation_dim();
    algo::AlgoConfig cfg;
    std::mt19937_64 rng(7);
    // Same architecture, precision and optimizer as the training critic.
    auto theta = nn::make_mlp<float>({obs_dim + kAct, trainer::TrainConfig{}.hidden, 2}, rng);
    auto opt = nn::make_optimizer(theta, {cfg.critic_lr});
    algo::HumanBatch<float> pair{testing_util::uniform_matrix(obs_dim, 1, rng, 0.0, 1.0).cast<float>(),
                                 Matrix<float>(kAct, 1), Matrix<float>(kAct, 1)};
    pair.human_action << 0.1f, 0.4f;
    pair.novice_action << -0.6f, 0.9f;
    for (int i = 0; i < 2000; ++i) nn::adam_step(theta, algo::pv_grads(theta, pair, cfg).grads, opt);
    const Vector<float> s = pair.obs.col(0);
    const double qh = algo::critic_eval<float>(theta, s, pair.human_action.col(0), cfg).q_mean;
    const double qn = algo::critic_eval<float>(theta, s, pair.novice_action.col(0), cfg).q_mean;
    const double secs = seconds_since(t0);
    return {qh > 0.9 && qn < -0.9 && secs < 10.0,
            fmt("Q(s,a_h) = %.4f (> 0.9), Q(s,a_n) = %.4f (< -0.9) after 2000 steps in %.2f s (< 10 s)", qh, qn, secs)};
}

// ---------------------------------------------------------------------------
// reward-free chain

/// Actor whose squashed action is tanh(m) in every state, with negligible spread.
Mlp<double> constant_actor(int obs_dim, double m) {
    Mlp<double> net;
    Vector<double> b(2 * kAct);
    b << m, m, -20.0, -20.0;
    net.layers.push_back({Matrix<double>::Zero(2 * kAct, obs_dim), b, nn::Activation::identity});
    return net;
}

Outcome reward_free_chain() {
    const auto t0 = Clock::now();
    // s0 -> s1 -> s2; the only label is at s2 (supervisor action +1, novice
    // action -1). No environment reward anywhere.
    const double gamma = 0.9;
    const int d = 3;
    algo::AlgoConfig cfg;
    cfg.gamma = gamma;
    cfg.alpha = 0.0;
    cfg.critic_lr = 1e-3;
    std::mt19937_64 rng(3);
    nn::MlpSpec spec{d + kAct, {64, 64}, 2};
    auto theta = nn::make_mlp<double>(spec, rng);
    auto theta_bar = theta;
    const auto phi_bar = constant_actor(d, 0.0);
    auto opt = nn::make_optimizer(theta, {cfg.critic_lr});
    const Matrix<double> eye = Matrix<double>::Identity(d, d);
    const algo::HumanBatch<double> labels{eye.col(2), Matrix<double>::Zero(kAct, 1),
                                          Matrix<double>::Constant(kAct, 1, 0.8)};
    // Each transition repeated so every step averages many target draws.
    const int copies = 32;
    Matrix<double> obs(d, 2 * copies), next(d, 2 * copies);
    for (int c = 0; c < copies; ++c) {
        obs.col(2 * c) = eye.col(0);
        obs.col(2 * c + 1) = eye.col(1);
        next.col(2 * c) = eye.col(1);
        next.col(2 * c + 1) = eye.col(2);
    }
    const Matrix<double> act = Matrix<double>::Zero(kAct, 2 * copies);
    const RowVector<double> not_done = RowVector<double>::Ones(2 * copies);
    const int steps = 6000;
    double q0_tail = 0.0;
    int tail = 0;
    for (int i = 0; i < steps; ++i) {
        const algo::TargetNoise<double> noise{algo::standard_normal<double>(kAct, 2 * copies, rng),
                                              algo::standard_normal<double>(1, 2 * copies, rng)};
        const auto y = algo::td_target(theta_bar, phi_bar, next, not_done, cfg, 0.0, noise);
        algo::critic_update(theta, opt, labels, algo::TdBatch<double>{obs, act, y}, cfg);
        nn::lerp_in_place(theta_bar, theta, 0.05);
        if (i >= steps - 500) {
            q0_tail += algo::critic_eval<double>(theta, Vector<double>(eye.col(0)), Vector<double>::Zero(kAct), cfg).q_mean;
            ++tail;
        }
    }
    const double q0 = algo::critic_eval<double>(theta, Vector<double>(eye.col(0)), Vector<double>::Zero(kAct), cfg).q_mean;
    // Value-iteration oracle on the chain: V(s2) = 1, V(s_k) = gamma V(s_k+1).
    double v[3] = {0.0, 0.0, 1.0};
    for (int sweep = 0; sweep < 10; ++sweep)
        for (int k = 0; k < 2; ++k) v[k] = gamma * v[k + 1];
    const double secs = seconds_since(t0);
    return {std::abs(q0 - v[0]) <= 1e-2 && secs < 30.0,
            fmt("Q(s0) = %.4f vs value iteration %.4f (tol 1e-2; mean over last 500 steps %.4f) in %.1f s (< 30 s)", q0,
                v[0], q0_tail / tail, secs)};
}

// ---------------------------------------------------------------------------
// reward isolation

Outcome reward_isolation() {
    std::mt19937_64 rng(31);
    const int obs_dim = sim::SimConfig{}.observation_dim();
    const int n = 64;
    const algo::HumanBatch<float> human{testing_util::uniform_matrix(obs_dim, 32, rng).cast<float>(),
                                        testing_util::uniform_matrix(kAct, 32, rng, -0.9, 0.9).cast<float>(),
                                        testing_util::uniform_matrix(kAct, 32, rng, -0.9, 0.9).cast<float>()};
    agents::TdSamples td;
    td.obs = testing_util::uniform_matrix(obs_dim, n, rng).cast<float>();
    td.action = testing_util::uniform_matrix(kAct, n, rng, -0.9, 0.9).cast<float>();
    td.next_obs = testing_util::uniform_matrix(obs_dim, n, rng).cast<float>();
    td.not_done = RowVector<float>::Ones(n);
    td.reward = testing_util::uniform_matrix(1, n, rng, -5.0, 5.0).cast<float>();
    auto zeroed = td;
    zeroed.reward.setZero();

    const agents::NetworkShape shape{obs_dim, kAct, {64, 64}};
    auto a = agents::make_agent(agents::Algorithm::hdsac, shape, {}, 5);
    auto b = agents::make_agent(agents::Algorithm::hdsac, shape, {}, 5);
    std::mt19937_64 ra(99), rb(99);
    const int updates = 20;
    for (int i = 0; i < updates; ++i) {
        a->update(human, td, ra);
        b->update(human, zeroed, rb);
    }
    const fs::path root = fs::temp_directory_path() / "hdsac_acceptance_isolation";
    fs::remove_all(root);
    a->save(root / "a");
    b->save(root / "b");
    int files = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(root / "a")) {
        ++files;
        if (slurp(entry.path()) != slurp(root / "b" / entry.path().filename())) ++differing;
    }
    fs::remove_all(root);

    // Control: SAC must see the same reward change, or the check proves nothing.
    auto c = agents::make_agent(agents::Algorithm::sac, shape, {}, 5);
    auto e = agents::make_agent(agents::Algorithm::sac, shape, {}, 5);
    std::mt19937_64 rc(99), re(99);
    c->update(human, td, rc);
    e->update(human, zeroed, re);
    const Vector<float> probe = td.obs.col(0);
    const bool control_differs = c->q_value(probe, {0.0, 0.0}) != e->q_value(probe, {0.0, 0.0});
    return {differing == 0 && files > 0 && control_differs,
            fmt("%d updates: %d of %d parameter files differ (need 0); SAC control %s", updates, differing, files,
                control_differs ? "reacts to rewards" : "DID NOT react to rewards")};
}

// ---------------------------------------------------------------------------
// simulator oracles

/// Closed-form first intersection of a ray with a set of circles.
double ray_circles(double ox, double oy, double theta, const std::vector<sim::Obstacle>& obs, double max_range) {
    const double ux = std::cos(theta), uy = std::sin(theta);
    double best = max_range;
    for (const auto& c : obs) {
        const double cx = c.x - ox, cy = c.y - oy;
        const double along = cx * ux + cy * uy;
        const double perp2 = cx * cx + cy * cy - along * along;
        const double r2 = c.radius * c.radius;
        if (perp2 > r2) continue;
        const double half = std::sqrt(r2 - perp2);
        double t = along - half;
        if (t < 0.0) t = along + half >= 0.0 ? 0.0 : -1.0;  // origin inside the circle reads 0
        if (t >= 0.0) best = std::min(best, t);
    }
    return best;
}

Outcome simulator_oracles() {
    const sim::SimConfig cfg;
    std::mt19937_64 rng(17);

    // Lidar against the closed form.
    double lidar_err = 0.0;
    std::uniform_real_distribution<double> pos(-18.0, 18.0), rad(0.3, 2.0), ang(-std::numbers::pi, std::numbers::pi);
    int rays = 0;
    for (int scene = 0; scene < 200; ++scene) {
        sim::WorldState w;
        w.ego.x = pos(rng);
        w.ego.y = pos(rng);
        w.ego.heading = ang(rng);
        for (int k = 0; k < 6; ++k) {
            sim::Obstacle o{w.ego.x + pos(rng), w.ego.y + pos(rng), rad(rng), 0, 0};
            if (std::hypot(o.x - w.ego.x, o.y - w.ego.y) > o.radius + 1e-3) w.obstacles.push_back(o);
        }
        const auto v = sim::cast_lidar(w, cfg.n_rays, cfg.max_range);
        for (int i = 0; i < cfg.n_rays; ++i) {
            const double theta = w.ego.heading + 2.0 * std::numbers::pi * i / cfg.n_rays;
            const double want = ray_circles(w.ego.x, w.ego.y, theta, w.obstacles, cfg.max_range);
            lidar_err = std::max(lidar_err, std::abs(v[static_cast<std::size_t>(i)] * cfg.max_range - want));
            ++rays;
        }
    }

    // Turning radius of the kinematic bicycle at constant speed and steer.
    double radius_err = 0.0;
    for (double steer : {0.1, 0.3, 0.6, 1.0, -0.5}) {
        for (double speed : {2.0, 5.0}) {
            sim::WorldState w;
            w.ego.speed = speed;
            const double delta = steer * cfg.max_steer;
            const double expected = cfg.wheelbase / std::tan(std::abs(delta));
            std::vector<sim::Vec2> pts;
            for (int i = 0; i < 60; ++i) {
                pts.push_back({w.ego.x, w.ego.y});
                w = sim::kinematic_step(w, {steer, 0.0}, cfg.dt, cfg);
            }
            // Circumradius of three samples spread along the arc.
            const auto a = pts[0], b = pts[10], c = pts[20];
            const double ab = std::hypot(a.x - b.x, a.y - b.y), bc = std::hypot(b.x - c.x, b.y - c.y),
                         ca = std::hypot(c.x - a.x, c.y - a.y);
            const double area2 = std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
            radius_err = std::max(radius_err, std::abs(ab * bc * ca / (2.0 * area2) / expected - 1.0));
        }
    }

    // Episode cost against an independent count of contact onsets.
    sim::SimConfig heavy = cfg;
    heavy.collision_limit = 1000;
    int mismatches = 0, total_events = 0, episodes = 0;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        auto w = sim::reset(seed, heavy).state;
        double cost = 0.0;
        int events = 0;
        std::vector<bool> touching(w.obstacles.size(), false);
        while (w.terminated == sim::Termination::none) {
            cost += sim::step(w, {0.2 * u(rng), 0.5 + 0.5 * u(rng)}, heavy).cost;
            for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
                const auto& o = w.obstacles[i];
                const bool now = std::hypot(o.x - w.ego.x, o.y - w.ego.y) < o.radius + heavy.ego_radius;
                if (now && !touching[i]) ++events;
                touching[i] = now;
            }
        }
        if (cost != events || w.collisions != events) ++mismatches;
        total_events += events;
        ++episodes;
    }

    Outcome o;
    o.pass = lidar_err <= 1e-9 && radius_err <= 0.01 && mismatches == 0 && total_events > 0;
    o.detail = fmt("lidar max |error| %.2e m over %d rays (<= 1e-9); turning radius max rel error %.2e (<= 1e-2); "
                   "cost vs collision count: %d of %d episodes differ (%d collisions seen)",
                   lidar_err, rays, radius_err, mismatches, episodes, total_events);
    return o;
}

// ---------------------------------------------------------------------------
// determinism

Outcome determinism(const fs::path& work) {
    auto cfg = config::RunConfig{};
    cfg.train.total_steps = 3000;
    cfg.train.eval_interval = 3000;
    cfg.train.eval_episodes = 5;
    cfg.train.seed = 11;
    cfg.output_dir = (work / "determinism_a").string();
    run::train(cfg);
    cfg.output_dir = (work / "determinism_b").string();
    run::train(cfg);
    const std::string a = slurp(work / "determinism_a" / "metrics.jsonl");
    const std::string b = slurp(work / "determinism_b" / "metrics.jsonl");
    return {!a.empty() && a == b,
            fmt("two scripted 3000-step runs: metrics logs of %zu and %zu bytes are %s", a.size(), b.size(),
                a == b ? "byte-identical" : "DIFFERENT")};
}

// ---------------------------------------------------------------------------
// learning runs

struct LearningRun {
    trainer::MetricsLog log;
    double seconds = 0.0;
};

LearningRun train_50k(const fs::path& work, agents::Algorithm algorithm) {
    config::RunConfig cfg;
    cfg.train.algorithm = algorithm;
    cfg.train.total_steps = 50000;
    cfg.train.seed = 1;
    cfg.supervisor.kind =
        algorithm == agents::Algorithm::sac ? config::SupervisorSpec::Kind::none : config::SupervisorSpec::Kind::scripted;
    cfg.output_dir = (work / agents::to_string(algorithm)).string();
    std::cout << "  training " << agents::to_string(algorithm) << " for 50000 steps into " << cfg.output_dir << "\n"
              << std::flush;
    const auto t0 = Clock::now();
    run::train(cfg);
    return {plot::load_metrics(fs::path(cfg.output_dir) / "metrics.jsonl"), seconds_since(t0)};
}

double final_success(const trainer::MetricsLog& log) {
    return log.summary.eval ? log.summary.eval->success_rate : 0.0;
}

double final_return(const trainer::MetricsLog& log) { return log.summary.eval ? log.summary.eval->return_mean : 0.0; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<std::string> only;
    std::string work_arg;
    bool list = false;
    app.add_option("--only", only, "Run only these criteria (repeatable)");
    app.add_option("--work", work_arg, "Directory for training runs (default: a fresh temporary directory)");
    app.add_flag("--list", list, "List criterion names");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::string> names = {"gradient_oracle", "dirac_labels", "reward_free_chain", "reward_isolation",
                                            "end_to_end",      "hdsac_vs_pvp", "determinism",       "simulator_oracles"};
    if (list) {
        for (const auto& n : names) std::cout << n << "\n";
        return 0;
    }
    const std::set<std::string> selected(only.begin(), only.end());
    for (const auto& s : selected)
        if (std::find(names.begin(), names.end(), s) == names.end()) {
            std::cerr << "unknown criterion " << s << "\n";
            return 2;
        }
    auto wanted = [&](const std::string& n) { return selected.empty() || selected.count(n) > 0; };

    const fs::path work = work_arg.empty() ? fs::temp_directory_path() / "hdsac_acceptance" : fs::path(work_arg);
    if (work_arg.empty()) fs::remove_all(work);
    fs::create_directories(work);

    int failures = 0, ran = 0;
    auto report = [&](const std::string& name, const std::function<Outcome()>& fn) {
        if (!wanted(name)) return;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        ++ran;
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << "\n" << std::flush;
    };

    report("gradient_oracle", gradient_oracle);
    report("dirac_labels", dirac_labels);
    report("reward_free_chain", reward_free_chain);
    report("reward_isolation", reward_isolation);

    std::map<agents::Algorithm, LearningRun> runs;
    auto learning = [&](agents::Algorithm a) -> const LearningRun& {
        auto it = runs.find(a);
        if (it == runs.end()) it = runs.emplace(a, train_50k(work, a)).first;
        return it->second;
    };

    report("end_to_end", [&] {
        const auto& h = learning(agents::Algorithm::hdsac);
        const auto& s = learning(agents::Algorithm::sac);
        const double success = final_success(h.log);
        const double first = h.log.windows.empty() ? 0.0 : h.log.windows.front().takeover_rate;
        const double last = h.log.windows.empty() ? 0.0 : h.log.windows.back().takeover_rate;
        const double hc = h.log.summary.training_safety_cost, sc = s.log.summary.training_safety_cost;
        const bool a = success >= 0.7;
        const bool b = !h.log.windows.empty() && last < 0.2 * first;
        const bool c = hc <= sc / 5.0;
        const bool t = h.seconds < 1800.0;
        return Outcome{a && b && c && t,
                       fmt("(a) eval success %.2f (>= 0.7) %s; (b) takeover first window %.3f, final %.3f (< %.3f) %s; "
                           "(c) training collisions H-DSAC %.0f vs SAC %.0f (<= %.1f) %s; runtime %.0f s (< 1800) %s",
                           success, a ? "ok" : "MISS", first, last, 0.2 * first, b ? "ok" : "MISS", hc, sc, sc / 5.0,
                           c ? "ok" : "MISS", h.seconds, t ? "ok" : "MISS")};
    });

    report("hdsac_vs_pvp", [&] {
        const auto& h = learning(agents::Algorithm::hdsac);
        const auto& p = learning(agents::Algorithm::pvp);
        const double hr = final_return(h.log), pr = final_return(p.log);
        // "within 5%" of the PVP return, measured on its magnitude so the
        // bound stays below PVP for negative returns as well.
        const double bound = pr - 0.05 * std::abs(pr);
        return Outcome{hr >= bound, fmt("eval return H-DSAC %.2f vs PVP %.2f (need >= %.2f), same seed and 50000 steps",
                                        hr, pr, bound)};
    });

    report("determinism", [&] { return determinism(work); });
    report("simulator_oracles", simulator_oracles);

    std::cout << (ran - failures) << " of " << ran << " criteria passed\n";
    return failures == 0 ? 0 : 1;
}
