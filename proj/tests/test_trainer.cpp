#include "hdsac/errors.hpp"
#include "hdsac/trainer.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <sstream>

using namespace hdsac;
using trainer::ReplayBuffer;
using trainer::Transition;

namespace fs = std::filesystem;

namespace {

constexpr int kDim = 4;

/// Transition whose observation encodes `id` so samples can be traced back.
Transition make_transition(int id, bool intervened) {
    Transition t;
    t.obs.assign(kDim, static_cast<float>(id));
    t.next_obs.assign(kDim, static_cast<float>(id) + 0.5f);
    t.novice_action = {0.25, -0.5};
    if (intervened) t.human_action = Action{-0.75, 0.5};
    t.intervened = intervened;
    t.behavior_action = intervened ? *t.human_action : t.novice_action;
    t.done = id % 7 == 0;
    t.reward = id * 0.5;
    t.cost = id % 3 == 0 ? 1.0 : 0.0;
    return t;
}

/// Small, fast configuration for loop-level tests.
trainer::TrainConfig tiny_config() {
    trainer::TrainConfig c;
    c.hidden = {16, 16};
    c.algo.batch_size = 16;
    c.total_steps = 400;
    c.warmup_steps = 100;
    c.window = 100;
    c.eval_interval = 200;
    c.eval_episodes = 2;
    c.train_scenarios = 3;
    c.novice_capacity = 1000;
    c.human_capacity = 1000;
    c.seed = 3;
    return c;
}

std::string run_metrics(const trainer::TrainConfig& cfg, trainer::MetricsLog* log = nullptr) {
    supervisor::ScriptedSupervisor sup({}, cfg.sim);
    std::ostringstream out;
    trainer::TrainOutputs o;
    o.metrics = &out;
    auto r = trainer::train(cfg, sup, o);
    if (log) *log = r.log;
    return out.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("hdsac_test_trainer_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

// -- transitions and buffers ---------------------------------------------------

TEST(Transition, BehaviorActionMustMatchIntervention) {
    EXPECT_NO_THROW(make_transition(1, true).validate());
    EXPECT_NO_THROW(make_transition(1, false).validate());
    auto t = make_transition(1, true);
    t.behavior_action = t.novice_action;
    EXPECT_THROW(t.validate(), ContractViolation);
    auto u = make_transition(1, true);
    u.human_action.reset();
    EXPECT_THROW(u.validate(), ContractViolation);
}

TEST(Routing, InterventionDecidesBuffer) {
    ReplayBuffer novice(10, kDim), human(10, kDim);
    trainer::route_transition(make_transition(1, true), novice, human);
    EXPECT_EQ(human.size(), 1u);
    EXPECT_EQ(novice.size(), 0u);
    trainer::route_transition(make_transition(2, false), novice, human);
    EXPECT_EQ(human.size(), 1u);
    EXPECT_EQ(novice.size(), 1u);
}

TEST(ReplayBuffer, RingEvictsOldestAndCountsAllInsertions) {
    ReplayBuffer b(3, kDim);
    for (int i = 1; i <= 5; ++i) b.push(make_transition(i, false));
    EXPECT_EQ(b.size(), 3u);
    EXPECT_EQ(b.inserted(), 5u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(b.at(i).obs[0], static_cast<float>(i + 3));
    EXPECT_THROW(b.at(3), ContractViolation);
}

TEST(ReplayBuffer, StoredTransitionRoundTrips) {
    ReplayBuffer b(4, kDim);
    const auto t = make_transition(14, true);
    b.push(t);
    const auto s = b.at(0);
    EXPECT_EQ(s.obs, t.obs);
    EXPECT_EQ(s.next_obs, t.next_obs);
    EXPECT_EQ(s.novice_action, t.novice_action);
    EXPECT_EQ(s.human_action, t.human_action);
    EXPECT_EQ(s.behavior_action, t.behavior_action);
    EXPECT_EQ(s.done, t.done);
    EXPECT_EQ(s.reward, t.reward);
    EXPECT_EQ(s.cost, t.cost);
    EXPECT_THROW(b.push(Transition{std::vector<float>(kDim + 1), {}, {}, {}, false, std::vector<float>(kDim + 1)}),
                 ContractViolation);
}

TEST(ReplayBuffer, SamplesAreDistinctAndUniform) {
    ReplayBuffer b(20, kDim);
    for (int i = 0; i < 20; ++i) b.push(make_transition(i, false));
    std::mt19937_64 rng(1);
    std::map<std::size_t, int> counts;
    const int draws = 4000;
    for (int k = 0; k < draws; ++k) {
        const auto pos = b.sample_positions(5, rng);
        ASSERT_EQ(pos.size(), 5u);
        EXPECT_EQ(std::set<std::size_t>(pos.begin(), pos.end()).size(), 5u);
        for (auto p : pos) {
            ASSERT_LT(p, 20u);
            ++counts[p];
        }
    }
    // Each position is drawn with probability 5/20 per call.
    const double expected = draws * 5.0 / 20.0;
    double chi2 = 0.0;
    for (std::size_t p = 0; p < 20; ++p) chi2 += (counts[p] - expected) * (counts[p] - expected) / expected;
    EXPECT_LT(chi2, 43.8);  // 99.9th percentile of chi-square with 19 dof
    EXPECT_EQ(b.sample_positions(20, rng).size(), 20u);
    EXPECT_THROW(b.sample_positions(21, rng), ContractViolation);
}

// -- batch sampling ------------------------------------------------------------

TEST(SampleBatches, BothEmptyIsNoop) {
    ReplayBuffer n(10, kDim), h(10, kDim);
    std::mt19937_64 rng(1);
    EXPECT_FALSE(trainer::sample_batches(n, h, 8, 0.5, rng).has_value());
}

TEST(SampleBatches, HumanEmptyGivesAllNovice) {
    ReplayBuffer n(100, kDim), h(100, kDim);
    for (int i = 0; i < 50; ++i) n.push(make_transition(i, false));
    std::mt19937_64 rng(2);
    const auto b = trainer::sample_batches(n, h, 16, 0.5, rng);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->human.size(), 0);
    EXPECT_EQ(b->td.size(), 16);
    EXPECT_EQ(b->td_from_human, 0u);
}

TEST(SampleBatches, NoviceEmptyGivesAllHuman) {
    ReplayBuffer n(100, kDim), h(100, kDim);
    for (int i = 0; i < 50; ++i) h.push(make_transition(i, true));
    std::mt19937_64 rng(3);
    const auto b = trainer::sample_batches(n, h, 16, 0.5, rng);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->human.size(), 16);
    EXPECT_EQ(b->td.size(), 16);
    EXPECT_EQ(b->td_from_human, 16u);
}

TEST(SampleBatches, ExactHalfSplitWhenBothLarge) {
    ReplayBuffer n(100, kDim), h(100, kDim);
    for (int i = 0; i < 40; ++i) n.push(make_transition(i, false));
    for (int i = 100; i < 140; ++i) h.push(make_transition(i, true));
    std::mt19937_64 rng(4);
    const auto b = trainer::sample_batches(n, h, 32, 0.5, rng);
    ASSERT_TRUE(b);
    int from_human = 0;
    for (int c = 0; c < b->td.size(); ++c) from_human += b->td.obs(0, c) >= 100.0f ? 1 : 0;
    EXPECT_EQ(from_human, 16);
    EXPECT_EQ(b->td_from_human, 16u);
}

TEST(SampleBatches, ShortHumanBufferIsToppedUpFromNovice) {
    ReplayBuffer n(100, kDim), h(100, kDim);
    for (int i = 0; i < 60; ++i) n.push(make_transition(i, false));
    for (int i = 100; i < 103; ++i) h.push(make_transition(i, true));
    std::mt19937_64 rng(5);
    const auto b = trainer::sample_batches(n, h, 32, 0.5, rng);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->td.size(), 32);
    EXPECT_EQ(b->td_from_human, 3u);
    EXPECT_EQ(b->human.size(), 3);
}

TEST(SampleBatches, ColumnsCarryTheSampledTransitions) {
    ReplayBuffer n(100, kDim), h(100, kDim);
    for (int i = 1; i <= 30; ++i) n.push(make_transition(i, false));
    for (int i = 101; i <= 130; ++i) h.push(make_transition(i, true));
    std::mt19937_64 rng(6);
    const auto b = trainer::sample_batches(n, h, 20, 0.5, rng);
    ASSERT_TRUE(b);
    for (int c = 0; c < b->td.size(); ++c) {
        const int id = static_cast<int>(b->td.obs(0, c));
        const auto ref = make_transition(id, id > 100);
        EXPECT_EQ(b->td.next_obs(0, c), ref.next_obs[0]);
        EXPECT_EQ(b->td.action(0, c), static_cast<float>(ref.behavior_action.steer));
        EXPECT_EQ(b->td.not_done(c), ref.done ? 0.0f : 1.0f);
        EXPECT_EQ(b->td.reward(c), static_cast<float>(ref.reward));
    }
    for (int c = 0; c < b->human.size(); ++c) {
        EXPECT_GT(b->human.obs(0, c), 100.0f);
        EXPECT_EQ(b->human.human_action(0, c), -0.75f);
        EXPECT_EQ(b->human.novice_action(0, c), 0.25f);
    }
}

// -- evaluation ----------------------------------------------------------------

TEST(Evaluate, EmptySeedListIsRejected) {
    EXPECT_THROW(trainer::evaluate(trainer::expert_policy({}, {}), {}, {}), ContractViolation);
}

TEST(Evaluate, ExpertOnHeldOutSeedsIsSafeAndSucceeds) {
    trainer::TrainConfig cfg;
    const auto r = trainer::evaluate(trainer::expert_policy({}, cfg.sim), cfg.eval_seeds(), cfg.sim);
    EXPECT_GE(r.success_rate, 0.95);
    EXPECT_EQ(r.safety_cost, 0.0);
    ASSERT_EQ(r.episodes.size(), 20u);
}

TEST(Evaluate, FreshPolicyDoesNotSucceed) {
    trainer::TrainConfig cfg;
    auto agent = agents::make_agent(agents::Algorithm::hdsac, {cfg.sim.observation_dim(), 2, {32, 32}}, {}, 1);
    const auto r = trainer::evaluate(trainer::agent_policy(*agent), {100000, 100001, 100002}, cfg.sim);
    EXPECT_EQ(r.success_rate, 0.0);
}

TEST(Evaluate, SuccessIffDestinationAndStatsMatchEpisodes) {
    trainer::TrainConfig cfg;
    // Full throttle, no steering: some seeds leave the road, some may not.
    const trainer::Policy straight = [](const sim::WorldState&, const sim::Observation&) { return Action{0.0, 1.0}; };
    const auto r = trainer::evaluate(straight, {1, 2, 3, 4}, cfg.sim);
    double ret = 0.0, cost = 0.0, succ = 0.0;
    for (const auto& ep : r.episodes) {
        EXPECT_EQ(ep.success(), ep.termination == sim::Termination::destination);
        ret += ep.episode_return;
        cost += ep.cost;
        succ += ep.success() ? 1.0 : 0.0;
    }
    EXPECT_NEAR(r.return_mean, ret / 4.0, 1e-12);
    EXPECT_NEAR(r.safety_cost, cost / 4.0, 1e-12);
    EXPECT_NEAR(r.success_rate, succ / 4.0, 1e-12);
    double var = 0.0;
    for (const auto& ep : r.episodes) var += (ep.episode_return - r.return_mean) * (ep.episode_return - r.return_mean);
    EXPECT_NEAR(r.return_std, std::sqrt(var / 4.0), 1e-9);
}

// -- configuration -------------------------------------------------------------

TEST(TrainConfig, RejectsOverlappingSeedRanges) {
    trainer::TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.eval_seed_base = 10;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.window = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.human_fraction = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
}

// -- training loop -------------------------------------------------------------

TEST(Train, ZeroStepsWritesOnlyInitialCheckpoint) {
    auto cfg = tiny_config();
    cfg.total_steps = 0;
    supervisor::ScriptedSupervisor sup({}, cfg.sim);
    const fs::path dir = scratch_dir("zero");
    std::ostringstream out;
    trainer::TrainOutputs o;
    o.metrics = &out;
    o.checkpoint_dir = dir;
    const auto r = trainer::train(cfg, sup, o);
    EXPECT_TRUE(r.log.windows.empty());
    EXPECT_TRUE(r.log.evals.empty());
    EXPECT_EQ(r.log.summary.total_data, 0);
    std::vector<std::string> entries;
    for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path().filename().string());
    ASSERT_EQ(entries.size(), 1u);
    EXPECT_EQ(entries[0], "step_00000000");
    fs::remove_all(dir);
}

TEST(Train, CountersAreConsistent) {
    const auto cfg = tiny_config();
    trainer::MetricsLog log;
    run_metrics(cfg, &log);
    ASSERT_EQ(log.windows.size(), 4u);
    std::int64_t interventions = 0;
    double cost = 0.0;
    for (const auto& w : log.windows) {
        EXPECT_GE(w.takeover_rate, 0.0);
        EXPECT_LE(w.takeover_rate, 1.0);
        interventions += static_cast<std::int64_t>(std::llround(w.takeover_rate * w.steps));
        cost += w.cost;
        EXPECT_EQ(w.cumulative_cost, cost);
    }
    EXPECT_EQ(log.windows.back().human_steps, interventions);
    EXPECT_EQ(log.summary.human_data, interventions);
    EXPECT_EQ(log.summary.total_data, cfg.total_steps);
    EXPECT_EQ(log.summary.training_safety_cost, cost);
    EXPECT_EQ(log.windows[0].updates, 0);  // warmup
    EXPECT_EQ(log.windows[1].updates, 100);
    ASSERT_EQ(log.evals.size(), 2u);
    EXPECT_EQ(log.evals[0].step, 200);
    EXPECT_GT(log.windows[0].takeover_rate, 0.5);  // an untrained novice is overridden most of the time
}

TEST(Train, EveryStepLandsInExactlyOneBuffer) {
    auto cfg = tiny_config();
    cfg.total_steps = 250;
    supervisor::ScriptedSupervisor sup({}, cfg.sim);
    std::int64_t seen = 0, intervened = 0, last = 0;
    trainer::TrainOutputs o;
    o.on_step = [&](const trainer::StepView& v) {
        EXPECT_EQ(v.step, last + 1);
        last = v.step;
        ++seen;
        intervened += v.intervened ? 1 : 0;
        EXPECT_EQ(v.human_steps, intervened);
        ASSERT_NE(v.world, nullptr);
    };
    const auto r = trainer::train(cfg, sup, o);
    EXPECT_EQ(seen, 250);
    EXPECT_EQ(r.log.summary.human_data, intervened);
}

TEST(Train, SameSeedGivesIdenticalMetrics) {
    const auto cfg = tiny_config();
    EXPECT_EQ(run_metrics(cfg), run_metrics(cfg));
    auto other = cfg;
    other.seed = cfg.seed + 1;
    EXPECT_NE(run_metrics(cfg), run_metrics(other));
}

TEST(Train, MetricsRecordsAreJsonLines) {
    const auto text = run_metrics(tiny_config());
    std::istringstream in(text);
    std::string line;
    std::map<std::string, int> kinds;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        ++kinds[j.at("type").get<std::string>()];
        EXPECT_EQ(j.at("version").get<int>(), trainer::kMetricsSchemaVersion);
    }
    EXPECT_EQ(kinds["window"], 4);
    EXPECT_EQ(kinds["eval"], 2);
    EXPECT_EQ(kinds["summary"], 1);
}

TEST(Train, DivergenceLeavesSnapshot) {
    auto cfg = tiny_config();
    cfg.algo.q_alarm = 1e-9;
    supervisor::ScriptedSupervisor sup({}, cfg.sim);
    const fs::path dir = scratch_dir("diverged");
    trainer::TrainOutputs o;
    o.checkpoint_dir = dir;
    try {
        trainer::train(cfg, sup, o);
        FAIL() << "expected divergence";
    } catch (const TrainingDivergence& e) {
        EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
    }
    EXPECT_TRUE(fs::exists(dir / "diverged" / "agent.txt"));
    fs::remove_all(dir);
}

TEST(Train, SacWithoutSupervisorNeverIntervenes) {
    auto cfg = tiny_config();
    cfg.algorithm = agents::Algorithm::sac;
    supervisor::NoSupervisor none;
    const auto r = trainer::train(cfg, none);
    EXPECT_EQ(r.log.summary.human_data, 0);
    for (const auto& w : r.log.windows) EXPECT_EQ(w.takeover_rate, 0.0);
}

TEST(Summary, RowHasTableColumns) {
    trainer::Summary s;
    s.human_data = 12;
    s.total_data = 100;
    s.training_safety_cost = 3;
    trainer::EvalResult e;
    e.return_mean = 10;
    e.return_std = 1;
    e.safety_cost = 0.5;
    e.success_rate = 0.75;
    s.eval = e;
    const auto row = trainer::summary_row(s);
    EXPECT_EQ(std::count(row.begin(), row.end(), '\t'), 6);
    const auto header = trainer::summary_header();
    EXPECT_EQ(std::count(header.begin(), header.end(), '\t'), 6);
    EXPECT_NE(row.find("0.75"), std::string::npos);
}
