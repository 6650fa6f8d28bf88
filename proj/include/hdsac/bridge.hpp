#pragma once

// Network boundary for live supervision. The trainer publishes frames, a
// WebSocket server streams them to console clients, and commands from the
// single control client land in the remote supervisor's mailbox.
//
// docs/wire_protocol.md describes the message schema.

#include "hdsac/action.hpp"
#include "hdsac/sim.hpp"
#include "hdsac/supervisor.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace hdsac::trainer {
struct StepView;
}

namespace hdsac::bridge {

inline constexpr int kWireVersion = 1;
/// Road centerline points sent per frame (those nearest the ego).
inline constexpr std::size_t kMaxRoadPoints = 64;

struct FrameMessage {
    std::int64_t step = 0;
    std::int64_t episode = 0;
    sim::EgoState ego;
    std::vector<sim::Obstacle> obstacles;
    std::vector<sim::Checkpoint> checkpoints;  // upcoming, nearest first
    std::vector<sim::Vec2> road;               // centerline around the ego
    double lane_half_width = 0.0;
    bool takeover = false;
    double takeover_rate = 0.0;  // current window
    std::optional<double> q_human;
    std::optional<double> q_novice;
    std::int64_t human_steps = 0;
    double safety_cost = 0.0;  // training collisions so far
    int episodes = 0;
    int successes = 0;

    friend bool operator==(const FrameMessage&, const FrameMessage&) = default;
};

enum class CommandKind : std::uint8_t { engage, disengage, action };

const char* to_string(CommandKind k);

struct CommandMessage {
    CommandKind kind = CommandKind::engage;
    std::optional<Action> action;  // present iff kind == action
    double client_time_ms = 0.0;

    friend bool operator==(const CommandMessage&, const CommandMessage&) = default;
};

/// Builds a frame from the trainer's per-step view. Obstacles are capped at
/// sim.max_obstacles and checkpoints at sim.nav_checkpoints.
FrameMessage make_frame(const trainer::StepView& view, const sim::SimConfig& sim);

/// Single-line JSON in canonical field order. Throws ContractViolation on a
/// non-finite number.
std::string encode_frame(const FrameMessage& f);
std::string encode_command(const CommandMessage& c);
/// Throw FormatError on malformed input or a wrong "type".
FrameMessage decode_frame(const std::string& text);
CommandMessage decode_command(const std::string& text);

// Handshake: the client opens with hello, the server answers welcome (with
// the granted role) or refused and closes.

enum class Role : std::uint8_t { control, view };

const char* to_string(Role r);

struct Hello {
    int version = 0;
    Role role = Role::control;
};

std::string encode_hello(const Hello& h);
Hello decode_hello(const std::string& text);
std::string encode_welcome(Role granted);
std::string encode_refused(const std::string& reason);
/// Server reply to an applied command: the resulting engaged state.
std::string encode_ack(CommandKind kind, bool engaged, std::uint64_t ignored_actions);

/// Engage/disengage state machine of the control client in front of the
/// mailbox. Not thread-safe; the server calls it from its I/O thread.
class CommandApplier {
public:
    explicit CommandApplier(std::shared_ptr<supervisor::HumanMailbox> mailbox);

    /// engage arms the session; action posts an engaged command stamped `now`;
    /// disengage posts a disengaged command. An action while disengaged is
    /// ignored and counted.
    void apply(const CommandMessage& msg, std::chrono::steady_clock::time_point now);
    /// Control client went away.
    void release();

    bool engaged() const { return engaged_; }
    std::uint64_t ignored_actions() const { return ignored_; }

private:
    std::shared_ptr<supervisor::HumanMailbox> mailbox_;
    bool engaged_ = false;
    std::uint64_t ignored_ = 0;
};

/// Bounded single-producer single-consumer queue that evicts the oldest
/// entry when full, so the producer never waits for the consumer.
class DropOldestQueue {
public:
    explicit DropOldestQueue(std::size_t depth = 2);

    void push(std::string item);
    std::optional<std::string> pop();
    /// Waits up to `timeout` for an item.
    std::optional<std::string> pop_wait(std::chrono::milliseconds timeout);
    std::size_t size() const;
    std::uint64_t dropped() const;

private:
    std::size_t depth_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::string> items_;
    std::uint64_t dropped_ = 0;
};

struct ServerConfig {
    std::string address = "127.0.0.1";
    /// 0 picks a free port; Server::port() reports it.
    std::uint16_t port = 8765;
    std::size_t queue_depth = 2;
};

struct ServerStats {
    int clients = 0;
    bool controller_connected = false;
    std::uint64_t frames_published = 0;
    std::uint64_t frames_dropped = 0;
    std::uint64_t ignored_actions = 0;
    std::uint64_t refused = 0;
};

/// WebSocket server on its own I/O thread. publish() is called from the
/// acting loop and never blocks on the network.
class Server {
public:
    Server(ServerConfig cfg, std::shared_ptr<supervisor::HumanMailbox> mailbox);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts the I/O thread. Throws IoError when the port is taken.
    void start();
    void stop();
    std::uint16_t port() const;

    /// Step indices must increase strictly (ContractViolation otherwise).
    void publish(const FrameMessage& frame);
    ServerStats stats() const;

    struct Impl;  // defined in the implementation file

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace hdsac::bridge
