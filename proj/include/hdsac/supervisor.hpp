#pragma once

// Sources of the human policy and intervention decision: a scripted expert
// with a takeover rule, a recorded-session replayer, and a remote human fed
// through a mailbox.

#include "hdsac/action.hpp"
#include "hdsac/sim.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace hdsac::supervisor {

enum class Source : std::uint8_t { none = 0, scripted, replay, remote };

const char* to_string(Source s);

struct InterventionDecision {
    bool intervened = false;
    std::optional<Action> human_action;
    Source source = Source::none;
};

struct ExpertConfig {
    double lookahead = 2.5;          // meters, plus lookahead_per_speed * v
    double lookahead_per_speed = 0.3;
    double cruise_speed = 6.0;       // m/s
    double speed_gain = 0.25;        // normalized accel per m/s of speed error
    double ttc_margin = 0.8;         // seconds; hard brake below this
    double avoid_clearance = 0.8;    // meters of extra lateral room when passing
    double avoid_range = 20.0;       // meters ahead considered for avoidance; keep <= sim.max_range
    double avoid_speed_factor = 0.7; // cruise speed scale while offset from center
    double deviation_threshold = 0.4;
    int horizon = 15;
    int disengage_patience = 5;

    friend bool operator==(const ExpertConfig&, const ExpertConfig&) = default;

    /// Throws ConfigError.
    void validate() const;
};

/// Pure-pursuit steering toward a point ahead on the route, offset laterally
/// to pass blocking obstacles; P speed control with a time-to-contact brake.
Action expert_action(const sim::WorldState& world, const ExpertConfig& cfg, const sim::SimConfig& sim_cfg);

/// Drives a copy of `world` with `policy` for up to `horizon` steps and
/// returns the first step (1-based) at which the ego overlaps an obstacle or
/// leaves the road, if any.
std::optional<int> first_failure(const sim::WorldState& world, const std::function<Action(const sim::WorldState&)>& policy,
                                 int horizon, const sim::SimConfig& sim_cfg);

class Supervisor {
public:
    virtual ~Supervisor() = default;
    virtual Source source() const = 0;
    virtual void begin_episode() {}
    /// Called exactly once per environment step with the novice's action.
    virtual InterventionDecision decide(const sim::WorldState& world, const Action& novice_action, std::int64_t step) = 0;
};

/// Never intervenes (reward-driven baselines trained without an expert).
class NoSupervisor final : public Supervisor {
public:
    Source source() const override { return Source::none; }
    InterventionDecision decide(const sim::WorldState&, const Action&, std::int64_t) override { return {}; }
};

/// Stateful takeover rule around the scripted expert:
/// (a) the novice action deviates from the expert by more than the threshold
///     in the infinity norm, or
/// (b) holding the novice action for `horizon` steps hits an obstacle or
///     leaves the road, and holding the expert's action does not fail as
///     early. Identical actions therefore never trigger.
/// Once engaged it stays engaged for `disengage_patience` steps.
class ScriptedSupervisor final : public Supervisor {
public:
    ScriptedSupervisor(ExpertConfig cfg, sim::SimConfig sim_cfg);
    Source source() const override { return Source::scripted; }
    void begin_episode() override { remaining_ = 0; }
    InterventionDecision decide(const sim::WorldState& world, const Action& novice_action, std::int64_t step) override;

    int remaining_engagement() const { return remaining_; }

private:
    ExpertConfig cfg_;
    sim::SimConfig sim_cfg_;
    int remaining_ = 0;
};

// ---------------------------------------------------------------------------
// Session recordings: "hdsac-session <version>" header then one record per
// line: step intervened steer_h accel_h steer_n accel_n, closed by an "end"
// line. Steps without a record are not intervened; a recording that stops
// without "end" is truncated.

inline constexpr int kSessionSchemaVersion = 1;

struct SessionRecord {
    std::int64_t step = 0;
    bool intervened = false;
    Action human_action;
    Action novice_action;
};

class SessionRecorder {
public:
    explicit SessionRecorder(std::ostream& out);
    void record(std::int64_t step, const InterventionDecision& d, const Action& novice_action);
    /// Writes the closing marker; further records are a contract violation.
    void finish();

private:
    std::ostream* out_;
    bool finished_ = false;
};

/// Replays decisions by step index. Reads the stream lazily, so a truncated
/// or malformed record raises FormatError naming the step being replayed.
class ReplaySupervisor final : public Supervisor {
public:
    explicit ReplaySupervisor(std::unique_ptr<std::istream> in);
    static std::unique_ptr<ReplaySupervisor> open(const std::filesystem::path& path);

    Source source() const override { return Source::replay; }
    InterventionDecision decide(const sim::WorldState& world, const Action& novice_action, std::int64_t step) override;

private:
    bool read_until(std::int64_t step);

    std::unique_ptr<std::istream> in_;
    std::map<std::int64_t, SessionRecord> pending_;
    std::int64_t last_read_ = -1;
    bool eof_ = false;
    bool closed_ = false;
};

/// Wraps another supervisor and appends every decision to a session file.
class RecordingSupervisor final : public Supervisor {
public:
    RecordingSupervisor(std::unique_ptr<Supervisor> inner, const std::filesystem::path& path);
    ~RecordingSupervisor() override;
    Source source() const override { return inner_->source(); }
    void begin_episode() override { inner_->begin_episode(); }
    InterventionDecision decide(const sim::WorldState& world, const Action& novice_action, std::int64_t step) override;

private:
    std::unique_ptr<Supervisor> inner_;
    std::ofstream file_;
    SessionRecorder recorder_;
};

// ---------------------------------------------------------------------------
// Remote human: the bridge posts the latest command, the trainer reads it once
// per step. Commands older than the staleness limit count as disengaged.

struct HumanCommand {
    bool engaged = false;
    Action action;
    std::chrono::steady_clock::time_point stamp;
};

class HumanMailbox {
public:
    void post(const HumanCommand& cmd);
    std::optional<HumanCommand> latest() const;
    void clear();

private:
    mutable std::mutex mu_;
    std::optional<HumanCommand> latest_;
};

class RemoteSupervisor final : public Supervisor {
public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;

    RemoteSupervisor(std::shared_ptr<HumanMailbox> mailbox, double control_period_s, Clock clock = {});
    Source source() const override { return Source::remote; }
    InterventionDecision decide(const sim::WorldState& world, const Action& novice_action, std::int64_t step) override;

    std::chrono::nanoseconds staleness_limit() const { return staleness_; }

private:
    std::shared_ptr<HumanMailbox> mailbox_;
    std::chrono::nanoseconds staleness_;
    Clock clock_;
};

}  // namespace hdsac::supervisor
