#include "hdsac/bridge.hpp"

#include "hdsac/errors.hpp"
#include "hdsac/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace hdsac::bridge {

using json = nlohmann::ordered_json;

namespace {

double finite(double v, const char* field) {
    if (!std::isfinite(v)) throw ContractViolation(std::string("non-finite value in frame field ") + field);
    return v;
}

const json& field(const json& obj, const char* name) {
    if (!obj.is_object()) throw FormatError(std::string("expected an object holding '") + name + "'");
    const auto it = obj.find(name);
    if (it == obj.end()) throw FormatError(std::string("missing field '") + name + "'");
    return *it;
}

double get_number(const json& obj, const char* name) {
    const json& v = field(obj, name);
    if (!v.is_number()) throw FormatError(std::string("field '") + name + "' is not a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw FormatError(std::string("field '") + name + "' is not finite");
    return d;
}

std::int64_t get_integer(const json& obj, const char* name) {
    const json& v = field(obj, name);
    if (!v.is_number_integer()) throw FormatError(std::string("field '") + name + "' is not an integer");
    return v.get<std::int64_t>();
}

bool get_bool(const json& obj, const char* name) {
    const json& v = field(obj, name);
    if (!v.is_boolean()) throw FormatError(std::string("field '") + name + "' is not a boolean");
    return v.get<bool>();
}

std::string get_string(const json& obj, const char* name) {
    const json& v = field(obj, name);
    if (!v.is_string()) throw FormatError(std::string("field '") + name + "' is not a string");
    return v.get<std::string>();
}

const json& get_array(const json& obj, const char* name) {
    const json& v = field(obj, name);
    if (!v.is_array()) throw FormatError(std::string("field '") + name + "' is not an array");
    return v;
}

std::optional<double> get_optional_number(const json& obj, const char* name) {
    if (field(obj, name).is_null()) return std::nullopt;
    return get_number(obj, name);
}

json parse_typed(const std::string& text, const char* type) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed message: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("message is not a JSON object");
    const std::string t = get_string(j, "type");
    if (t != type) throw FormatError("expected a '" + std::string(type) + "' message, got '" + t + "'");
    return j;
}

json optional_number(const std::optional<double>& v, const char* name) {
    if (!v) return nullptr;
    return finite(*v, name);
}

CommandKind parse_kind(const std::string& s) {
    if (s == "engage") return CommandKind::engage;
    if (s == "disengage") return CommandKind::disengage;
    if (s == "action") return CommandKind::action;
    throw FormatError("unknown command kind '" + s + "'");
}

Role parse_role(const std::string& s) {
    if (s == "control") return Role::control;
    if (s == "view") return Role::view;
    throw FormatError("unknown role '" + s + "'");
}

}  // namespace

const char* to_string(CommandKind k) {
    switch (k) {
        case CommandKind::engage: return "engage";
        case CommandKind::disengage: return "disengage";
        case CommandKind::action: return "action";
    }
    return "?";
}

const char* to_string(Role r) { return r == Role::control ? "control" : "view"; }

FrameMessage make_frame(const trainer::StepView& view, const sim::SimConfig& sim) {
    if (!view.world) throw ContractViolation("make_frame needs a world state");
    const sim::WorldState& w = *view.world;
    FrameMessage f;
    f.step = view.step;
    f.episode = view.episode;
    f.ego = w.ego;
    const std::size_t n_obs = std::min(w.obstacles.size(), static_cast<std::size_t>(sim.max_obstacles));
    f.obstacles.assign(w.obstacles.begin(), w.obstacles.begin() + static_cast<std::ptrdiff_t>(n_obs));
    if (w.route) {
        const auto& cps = w.route->checkpoints;
        const std::size_t first = std::min(w.next_checkpoint, cps.size());
        const std::size_t last = std::min(cps.size(), first + static_cast<std::size_t>(sim.nav_checkpoints));
        f.checkpoints.assign(cps.begin() + static_cast<std::ptrdiff_t>(first), cps.begin() + static_cast<std::ptrdiff_t>(last));

        // A quarter of the road window behind the ego, the rest ahead.
        const auto& line = w.route->centerline;
        const std::size_t behind = kMaxRoadPoints / 4;
        const std::size_t begin = w.segment_hint > behind ? w.segment_hint - behind : 0;
        const std::size_t end = std::min(line.size(), begin + kMaxRoadPoints);
        f.road.assign(line.begin() + static_cast<std::ptrdiff_t>(begin), line.begin() + static_cast<std::ptrdiff_t>(end));
        f.lane_half_width = w.route->half_width;
    }
    f.takeover = view.intervened;
    f.takeover_rate = view.window_takeover_rate;
    f.q_human = view.q_human;
    f.q_novice = view.q_novice;
    f.human_steps = view.human_steps;
    f.safety_cost = view.cumulative_cost;
    f.episodes = view.episodes_finished;
    f.successes = view.episode_successes;
    return f;
}

std::string encode_frame(const FrameMessage& f) {
    json j;
    j["type"] = "frame";
    j["step"] = f.step;
    j["episode"] = f.episode;
    j["ego"] = {{"x", finite(f.ego.x, "ego.x")},
                {"y", finite(f.ego.y, "ego.y")},
                {"heading", finite(f.ego.heading, "ego.heading")},
                {"speed", finite(f.ego.speed, "ego.speed")}};
    json obstacles = json::array();
    for (const auto& o : f.obstacles) {
        obstacles.push_back({{"x", finite(o.x, "obstacle.x")},
                             {"y", finite(o.y, "obstacle.y")},
                             {"radius", finite(o.radius, "obstacle.radius")},
                             {"vx", finite(o.vx, "obstacle.vx")},
                             {"vy", finite(o.vy, "obstacle.vy")}});
    }
    j["obstacles"] = std::move(obstacles);
    json checkpoints = json::array();
    for (const auto& c : f.checkpoints) {
        checkpoints.push_back(
            {{"x", finite(c.x, "checkpoint.x")}, {"y", finite(c.y, "checkpoint.y")}, {"command", sim::to_string(c.command)}});
    }
    j["checkpoints"] = std::move(checkpoints);
    json road = json::array();
    for (const auto& p : f.road) road.push_back(json::array({finite(p.x, "road.x"), finite(p.y, "road.y")}));
    j["road"] = std::move(road);
    j["lane_half_width"] = finite(f.lane_half_width, "lane_half_width");
    j["takeover"] = f.takeover;
    j["takeover_rate"] = finite(f.takeover_rate, "takeover_rate");
    j["q_human"] = optional_number(f.q_human, "q_human");
    j["q_novice"] = optional_number(f.q_novice, "q_novice");
    j["human_steps"] = f.human_steps;
    j["safety_cost"] = finite(f.safety_cost, "safety_cost");
    j["episodes"] = f.episodes;
    j["successes"] = f.successes;
    return j.dump();
}

FrameMessage decode_frame(const std::string& text) {
    const json j = parse_typed(text, "frame");
    FrameMessage f;
    f.step = get_integer(j, "step");
    f.episode = get_integer(j, "episode");
    const json& ego = field(j, "ego");
    f.ego = {get_number(ego, "x"), get_number(ego, "y"), get_number(ego, "heading"), get_number(ego, "speed")};
    for (const auto& o : get_array(j, "obstacles")) {
        f.obstacles.push_back(
            {get_number(o, "x"), get_number(o, "y"), get_number(o, "radius"), get_number(o, "vx"), get_number(o, "vy")});
    }
    for (const auto& c : get_array(j, "checkpoints")) {
        const sim::Checkpoint cp{get_number(c, "x"), get_number(c, "y"), sim::parse_command(get_string(c, "command"))};
        f.checkpoints.push_back(cp);
    }
    for (const auto& p : get_array(j, "road")) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw FormatError("road points must be [x, y] pairs");
        const sim::Vec2 v{p[0].get<double>(), p[1].get<double>()};
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw FormatError("road point is not finite");
        f.road.push_back(v);
    }
    f.lane_half_width = get_number(j, "lane_half_width");
    f.takeover = get_bool(j, "takeover");
    f.takeover_rate = get_number(j, "takeover_rate");
    f.q_human = get_optional_number(j, "q_human");
    f.q_novice = get_optional_number(j, "q_novice");
    f.human_steps = get_integer(j, "human_steps");
    f.safety_cost = get_number(j, "safety_cost");
    f.episodes = static_cast<int>(get_integer(j, "episodes"));
    f.successes = static_cast<int>(get_integer(j, "successes"));
    return f;
}

std::string encode_command(const CommandMessage& c) {
    if (c.action.has_value() != (c.kind == CommandKind::action))
        throw ContractViolation("command action payload must be present iff kind is action");
    json j;
    j["type"] = "command";
    j["kind"] = to_string(c.kind);
    if (c.action) j["action"] = {{"steer", finite(c.action->steer, "steer")}, {"accel", finite(c.action->accel, "accel")}};
    j["client_time_ms"] = finite(c.client_time_ms, "client_time_ms");
    return j.dump();
}

CommandMessage decode_command(const std::string& text) {
    const json j = parse_typed(text, "command");
    CommandMessage c;
    c.kind = parse_kind(get_string(j, "kind"));
    const bool has_action = j.contains("action");
    if (has_action != (c.kind == CommandKind::action))
        throw FormatError("command 'action' payload must be present iff kind is action");
    if (has_action) {
        const json& a = j["action"];
        const Action act{get_number(a, "steer"), get_number(a, "accel")};
        if (std::abs(act.steer) > 1.0 || std::abs(act.accel) > 1.0)
            throw FormatError("command action outside [-1, 1]");
        c.action = act;
    }
    c.client_time_ms = get_number(j, "client_time_ms");
    return c;
}

std::string encode_hello(const Hello& h) {
    return json{{"type", "hello"}, {"version", h.version}, {"role", to_string(h.role)}}.dump();
}

Hello decode_hello(const std::string& text) {
    const json j = parse_typed(text, "hello");
    Hello h;
    h.version = static_cast<int>(get_integer(j, "version"));
    h.role = parse_role(get_string(j, "role"));
    return h;
}

std::string encode_welcome(Role granted) {
    return json{{"type", "welcome"}, {"version", kWireVersion}, {"role", to_string(granted)}}.dump();
}

std::string encode_refused(const std::string& reason) {
    return json{{"type", "refused"}, {"version", kWireVersion}, {"reason", reason}}.dump();
}

std::string encode_ack(CommandKind kind, bool engaged, std::uint64_t ignored_actions) {
    return json{{"type", "ack"}, {"kind", to_string(kind)}, {"engaged", engaged}, {"ignored_actions", ignored_actions}}.dump();
}

// ---------------------------------------------------------------------------

CommandApplier::CommandApplier(std::shared_ptr<supervisor::HumanMailbox> mailbox) : mailbox_(std::move(mailbox)) {
    if (!mailbox_) throw ContractViolation("CommandApplier needs a mailbox");
}

void CommandApplier::apply(const CommandMessage& msg, std::chrono::steady_clock::time_point now) {
    switch (msg.kind) {
        case CommandKind::engage:
            // Takeover starts with the first action; until then the mailbox
            // holds nothing actionable.
            engaged_ = true;
            break;
        case CommandKind::disengage:
            engaged_ = false;
            mailbox_->post({false, {}, now});
            break;
        case CommandKind::action:
            if (!engaged_ || !msg.action) {
                ++ignored_;
                break;
            }
            mailbox_->post({true, msg.action->clamped(), now});
            break;
    }
}

void CommandApplier::release() {
    if (engaged_) mailbox_->post({false, {}, std::chrono::steady_clock::now()});
    engaged_ = false;
}

// ---------------------------------------------------------------------------

DropOldestQueue::DropOldestQueue(std::size_t depth) : depth_(depth) {
    if (depth_ == 0) throw ContractViolation("queue depth must be positive");
}

void DropOldestQueue::push(std::string item) {
    {
        std::lock_guard lock(mu_);
        if (items_.size() == depth_) {
            items_.pop_front();
            ++dropped_;
        }
        items_.push_back(std::move(item));
    }
    cv_.notify_one();
}

std::optional<std::string> DropOldestQueue::pop() {
    std::lock_guard lock(mu_);
    if (items_.empty()) return std::nullopt;
    std::string s = std::move(items_.front());
    items_.pop_front();
    return s;
}

std::optional<std::string> DropOldestQueue::pop_wait(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout, [&] { return !items_.empty(); })) return std::nullopt;
    std::string s = std::move(items_.front());
    items_.pop_front();
    return s;
}

std::size_t DropOldestQueue::size() const {
    std::lock_guard lock(mu_);
    return items_.size();
}

std::uint64_t DropOldestQueue::dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
}

}  // namespace hdsac::bridge
