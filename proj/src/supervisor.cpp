#include "hdsac/supervisor.hpp"

#include "hdsac/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hdsac::supervisor {

const char* to_string(Source s) {
    switch (s) {
        case Source::none: return "none";
        case Source::scripted: return "scripted";
        case Source::replay: return "replay";
        case Source::remote: return "remote";
    }
    return "?";
}

void ExpertConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(lookahead > 0.0, "expert.lookahead must be positive");
    require(lookahead_per_speed >= 0.0, "expert.lookahead_per_speed must be >= 0");
    require(cruise_speed > 0.0, "expert.cruise_speed must be positive");
    require(speed_gain > 0.0, "expert.speed_gain must be positive");
    require(ttc_margin > 0.0, "expert.ttc_margin must be positive");
    require(avoid_clearance >= 0.0, "expert.avoid_clearance must be >= 0");
    require(avoid_range > 0.0, "expert.avoid_range must be positive");
    require(avoid_speed_factor > 0.0 && avoid_speed_factor <= 1.0, "expert.avoid_speed_factor must be in (0, 1]");
    require(deviation_threshold > 0.0, "expert.deviation_threshold must be positive");
    require(horizon >= 1, "expert.horizon must be >= 1");
    require(disengage_patience >= 1, "expert.disengage_patience must be >= 1");
}

namespace {

struct Avoidance {
    double offset = 0.0;       // lateral target at the lookahead point
    double speed_limit = 0.0;  // 0 when no obstacle is in the window
};

struct Blocker {
    double arc, lateral, need;
};

double margin(double line, const std::vector<Blocker>& group) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : group) m = std::min(m, std::abs(line - b.lateral) - b.need);
    return m;
}

// Lateral profile along the route. Obstacles in the window ahead are grouped
// when their passing zones overlap; each group gets a passing line that
// clears all its members, chosen jointly across groups to minimize lateral
// travel, and the profile blends linearly between the holds. Returns the
// profile `ahead` meters on plus a speed limit from its steepest transition.
Avoidance plan_avoidance(const sim::WorldState& w, double ahead, const ExpertConfig& cfg, const sim::SimConfig& sim_cfg) {
    const auto& route = *w.route;
    const double limit = route.half_width - 0.5;
    const double horizon_speed = std::max(w.ego.speed, 1.0);
    std::vector<Blocker> blockers;
    for (const auto& o : w.obstacles) {
        if (std::hypot(o.x - w.ego.x, o.y - w.ego.y) > cfg.avoid_range + 10.0) continue;
        auto proj = sim::project_onto_road(route, {o.x, o.y}, w.segment_hint);
        if (o.vx != 0.0 || o.vy != 0.0) {
            // where a moving obstacle will be when the ego draws level
            const double t = std::max(0.0, proj.arc - w.progress) / horizon_speed;
            proj = sim::project_onto_road(route, {o.x + o.vx * t, o.y + o.vy * t}, proj.segment);
        }
        const double ds = proj.arc - w.progress;
        const double need = o.radius + sim_cfg.ego_radius + cfg.avoid_clearance;
        if (ds < -need || ds > cfg.avoid_range || std::abs(proj.lateral) > route.half_width + need) continue;
        blockers.push_back({proj.arc, proj.lateral, need});
    }
    Avoidance out;
    if (blockers.empty()) return out;
    std::sort(blockers.begin(), blockers.end(), [](const Blocker& x, const Blocker& y) { return x.arc < y.arc; });

    std::vector<std::vector<Blocker>> groups;
    for (const auto& b : blockers) {
        if (!groups.empty()) {
            const auto& last = groups.back().back();
            if (b.arc - b.need <= last.arc + last.need) {
                groups.back().push_back(b);
                continue;
            }
        }
        groups.push_back({b});
    }

    struct Option {
        double line, start, end;
    };
    std::vector<std::vector<Option>> options(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& grp = groups[g];
        double start = std::numeric_limits<double>::infinity(), end = -start;
        std::vector<double> lines;
        for (const auto& b : grp) {
            start = std::min(start, b.arc - b.need);
            end = std::max(end, b.arc + b.need);
            lines.push_back(std::clamp(b.lateral - b.need, -limit, limit));
            lines.push_back(std::clamp(b.lateral + b.need, -limit, limit));
        }
        double best_margin = -std::numeric_limits<double>::infinity();
        for (double l : lines) best_margin = std::max(best_margin, margin(l, grp));
        for (double l : lines) {
            const double m = margin(l, grp);
            if (m >= -1e-9 || m == best_margin) options[g].push_back({l, start, end});
        }
    }

    // Exhaustive search over side choices; at most a handful of groups.
    const double lag = ahead;
    std::vector<std::size_t> pick(groups.size(), 0), best_pick;
    double best_cost = std::numeric_limits<double>::infinity();
    auto evaluate = [&] {
        double cost = 0.0, prev_line = w.lateral, prev_end = w.progress;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto& o = options[g][pick[g]];
            const double run = std::max(o.start - lag - prev_end, 0.5);
            const double d = o.line - prev_line;
            cost += std::abs(d) + d * d / run;
            prev_line = o.line;
            prev_end = o.end;
        }
        if (cost < best_cost) {
            best_cost = cost;
            best_pick = pick;
        }
    };
    std::function<void(std::size_t)> search = [&](std::size_t g) {
        if (g == groups.size()) return evaluate();
        for (std::size_t i = 0; i < options[g].size(); ++i) {
            pick[g] = i;
            search(g + 1);
        }
    };
    search(0);

    struct Knot {
        double s, lat;
    };
    // Pure pursuit lags its target by about the lookahead, so holds start that much earlier.
    std::vector<Knot> knots{{w.progress, w.lateral}};
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& o = options[g][best_pick[g]];
        const double from = std::max(o.start - lag, knots.back().s);
        knots.push_back({from, o.line});
        knots.push_back({std::max(o.end, from), o.line});
    }
    knots.push_back({knots.back().s + 10.0, 0.0});

    double steepest = 0.0;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        const double span = std::max(knots[i].s - knots[i - 1].s, 0.5);
        steepest = std::max(steepest, std::abs(knots[i].lat - knots[i - 1].lat) / span);
    }
    out.speed_limit = cfg.cruise_speed * std::clamp(cfg.avoid_speed_factor * 0.2 / std::max(steepest, 1e-9), 0.3, cfg.avoid_speed_factor);

    const double target_arc = w.progress + ahead;
    out.offset = 0.0;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (target_arc <= knots[i].s) {
            const double span = knots[i].s - knots[i - 1].s;
            const double t = span > 0.0 ? std::clamp((target_arc - knots[i - 1].s) / span, 0.0, 1.0) : 1.0;
            out.offset = knots[i - 1].lat + t * (knots[i].lat - knots[i - 1].lat);
            break;
        }
    }
    return out;
}

constexpr double kStandstillGap = 0.3;

bool must_brake(const sim::WorldState& w, const ExpertConfig& cfg, const sim::SimConfig& sim_cfg) {
    const double ch = std::cos(w.ego.heading), sh = std::sin(w.ego.heading);
    for (const auto& o : w.obstacles) {
        const double dx = o.x - w.ego.x, dy = o.y - w.ego.y;
        const double fx = ch * dx + sh * dy;
        const double fy = -sh * dx + ch * dy;
        const double reach = o.radius + sim_cfg.ego_radius;
        if (fx <= 0.0 || std::abs(fy) >= reach + 0.1) continue;
        const double gap = fx - reach;
        const double closing = w.ego.speed - (o.vx * ch + o.vy * sh);
        if (gap < kStandstillGap) return true;
        if (closing > 0.0 && (gap - kStandstillGap) / closing < cfg.ttc_margin) return true;
    }
    return false;
}

}  // namespace

Action expert_action(const sim::WorldState& w, const ExpertConfig& cfg, const sim::SimConfig& sim_cfg) {
    const auto& route = *w.route;
    const double ahead = cfg.lookahead + cfg.lookahead_per_speed * w.ego.speed;
    const auto avoid = plan_avoidance(w, ahead, cfg, sim_cfg);
    const sim::Vec2 target = sim::road_point(route, w.progress + ahead, avoid.offset);

    const double ch = std::cos(w.ego.heading), sh = std::sin(w.ego.heading);
    const double dx = target.x - w.ego.x, dy = target.y - w.ego.y;
    const double fx = ch * dx + sh * dy;
    const double fy = -sh * dx + ch * dy;
    const double curvature = 2.0 * fy / (fx * fx + fy * fy);
    const double delta = std::atan(curvature * sim_cfg.wheelbase);

    Action a;
    a.steer = std::clamp(delta / sim_cfg.max_steer, -1.0, 1.0);
    const double target_speed = avoid.speed_limit > 0.0 ? avoid.speed_limit : cfg.cruise_speed;
    a.accel = must_brake(w, cfg, sim_cfg) ? -1.0 : std::clamp(cfg.speed_gain * (target_speed - w.ego.speed), -1.0, 1.0);
    return a;
}

std::optional<int> first_failure(const sim::WorldState& world, const std::function<Action(const sim::WorldState&)>& policy,
                                 int horizon, const sim::SimConfig& sim_cfg) {
    sim::WorldState w = world;
    const auto n_checkpoints = w.route->checkpoints.size();
    for (int k = 1; k <= horizon; ++k) {
        w = sim::kinematic_step(w, policy(w), sim_cfg.dt, sim_cfg);
        sim::update_tracking(w, sim_cfg);
        if (sim::ego_overlaps_obstacle(w, sim_cfg) || sim::is_off_road(w.lateral, sim_cfg, w.route->half_width))
            return k;
        if (w.next_checkpoint >= n_checkpoints) break;
    }
    return std::nullopt;
}

ScriptedSupervisor::ScriptedSupervisor(ExpertConfig cfg, sim::SimConfig sim_cfg)
    : cfg_(cfg), sim_cfg_(std::move(sim_cfg)) {
    cfg_.validate();
    sim_cfg_.validate();
}

InterventionDecision ScriptedSupervisor::decide(const sim::WorldState& world, const Action& novice_action, std::int64_t) {
    const Action expert = expert_action(world, cfg_, sim_cfg_);
    const Action novice = novice_action.clamped();
    bool trigger = max_abs_difference(novice, expert) > cfg_.deviation_threshold;
    if (!trigger) {
        const auto novice_fail = first_failure(world, [&](const sim::WorldState&) { return novice; }, cfg_.horizon, sim_cfg_);
        if (novice_fail) {
            const auto expert_fail =
                first_failure(world, [&](const sim::WorldState&) { return expert; }, cfg_.horizon, sim_cfg_);
            trigger = !expert_fail || *expert_fail > *novice_fail;
        }
    }
    if (trigger) remaining_ = cfg_.disengage_patience;
    InterventionDecision d;
    d.source = Source::scripted;
    if (remaining_ > 0) {
        --remaining_;
        d.intervened = true;
        d.human_action = expert;
    }
    return d;
}

// ---------------------------------------------------------------------------

SessionRecorder::SessionRecorder(std::ostream& out) : out_(&out) {
    *out_ << "hdsac-session " << kSessionSchemaVersion << '\n';
    *out_ << "# step intervened steer_h accel_h steer_n accel_n\n";
}

void SessionRecorder::record(std::int64_t step, const InterventionDecision& d, const Action& novice_action) {
    if (finished_) throw ContractViolation("session recorder already finished");
    const Action h = d.intervened && d.human_action ? *d.human_action : Action{};
    *out_ << std::setprecision(17) << step << ' ' << (d.intervened ? 1 : 0) << ' ' << h.steer << ' ' << h.accel << ' '
          << novice_action.steer << ' ' << novice_action.accel << '\n';
}

void SessionRecorder::finish() {
    if (finished_) return;
    *out_ << "end\n";
    out_->flush();
    finished_ = true;
}

ReplaySupervisor::ReplaySupervisor(std::unique_ptr<std::istream> in) : in_(std::move(in)) {
    std::string line;
    if (!in_ || !std::getline(*in_, line)) throw FormatError("session: empty recording");
    std::istringstream header(line);
    std::string magic;
    int version = 0;
    if (!(header >> magic >> version) || magic != "hdsac-session")
        throw FormatError("session: missing 'hdsac-session' header");
    if (version != kSessionSchemaVersion)
        throw FormatError("session: unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kSessionSchemaVersion) + ")");
}

std::unique_ptr<ReplaySupervisor> ReplaySupervisor::open(const std::filesystem::path& path) {
    auto f = std::make_unique<std::ifstream>(path);
    if (!*f) throw IoError("cannot open session " + path.string());
    return std::make_unique<ReplaySupervisor>(std::move(f));
}

bool ReplaySupervisor::read_until(std::int64_t step) {
    std::string line;
    while (!eof_ && !closed_ && last_read_ < step) {
        if (!std::getline(*in_, line)) {
            eof_ = true;
            break;
        }
        if (line.empty() || line[0] == '#') continue;
        if (line == "end") {
            closed_ = true;
            break;
        }
        std::istringstream ls(line);
        SessionRecord r;
        int flag = -1;
        std::string extra;
        if (!(ls >> r.step >> flag >> r.human_action.steer >> r.human_action.accel >> r.novice_action.steer >>
              r.novice_action.accel) ||
            (flag != 0 && flag != 1) || (ls >> extra))
            throw FormatError("session: malformed record while replaying step " + std::to_string(step) + ": '" + line + "'");
        if (r.step <= last_read_)
            throw FormatError("session: record steps out of order at step " + std::to_string(r.step));
        r.intervened = flag == 1;
        last_read_ = r.step;
        pending_[r.step] = r;
    }
    return last_read_ >= step;
}

InterventionDecision ReplaySupervisor::decide(const sim::WorldState&, const Action&, std::int64_t step) {
    if (!read_until(step) && !closed_)
        throw FormatError("session: recording truncated before step " + std::to_string(step));
    // Records for earlier steps are no longer reachable.
    pending_.erase(pending_.begin(), pending_.lower_bound(step));
    InterventionDecision d;
    d.source = Source::replay;
    auto it = pending_.find(step);
    if (it != pending_.end() && it->second.intervened) {
        d.intervened = true;
        d.human_action = it->second.human_action;
    }
    return d;
}

RecordingSupervisor::RecordingSupervisor(std::unique_ptr<Supervisor> inner, const std::filesystem::path& path)
    : inner_(std::move(inner)), file_(path), recorder_(file_) {
    if (!file_) throw IoError("cannot open session " + path.string() + " for writing");
}

RecordingSupervisor::~RecordingSupervisor() { recorder_.finish(); }

InterventionDecision RecordingSupervisor::decide(const sim::WorldState& world, const Action& novice_action, std::int64_t step) {
    auto d = inner_->decide(world, novice_action, step);
    recorder_.record(step, d, novice_action);
    return d;
}

// ---------------------------------------------------------------------------

void HumanMailbox::post(const HumanCommand& cmd) {
    std::lock_guard lock(mu_);
    latest_ = cmd;
}

std::optional<HumanCommand> HumanMailbox::latest() const {
    std::lock_guard lock(mu_);
    return latest_;
}

void HumanMailbox::clear() {
    std::lock_guard lock(mu_);
    latest_.reset();
}

RemoteSupervisor::RemoteSupervisor(std::shared_ptr<HumanMailbox> mailbox, double control_period_s, Clock clock)
    : mailbox_(std::move(mailbox)),
      staleness_(std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(3.0 * control_period_s))),
      clock_(clock ? std::move(clock) : Clock([] { return std::chrono::steady_clock::now(); })) {
    if (!mailbox_) throw ContractViolation("RemoteSupervisor needs a mailbox");
}

InterventionDecision RemoteSupervisor::decide(const sim::WorldState&, const Action&, std::int64_t) {
    InterventionDecision d;
    d.source = Source::remote;
    const auto cmd = mailbox_->latest();
    if (!cmd || !cmd->engaged) return d;
    if (clock_() - cmd->stamp > staleness_) return d;
    if (!std::isfinite(cmd->action.steer) || !std::isfinite(cmd->action.accel)) return d;
    d.intervened = true;
    d.human_action = cmd->action.clamped();
    return d;
}

}  // namespace hdsac::supervisor
