#include "hdsac/sim.hpp"

#include "hdsac/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace hdsac::sim {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
Vec2 sub(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }

// Builds a centerline from straight and constant-radius blocks, sampled at
// roughly 1 m. Each point is tagged with the block's command.
struct CenterlineBuilder {
    std::vector<Vec2> points{{0.0, 0.0}};
    std::vector<Command> tags{Command::straight};
    double heading = 0.0;

    void straight(double length) {
        const int n = std::max(1, static_cast<int>(std::ceil(length)));
        const Vec2 start = points.back();
        for (int i = 1; i <= n; ++i) {
            const double s = length * i / n;
            points.push_back({start.x + s * std::cos(heading), start.y + s * std::sin(heading)});
            tags.push_back(Command::straight);
        }
    }

    void arc(double radius, double angle, bool left) {
        const double sign = left ? 1.0 : -1.0;
        const Vec2 start = points.back();
        const Vec2 center{start.x - sign * radius * std::sin(heading), start.y + sign * radius * std::cos(heading)};
        const double phi0 = heading - sign * kPi / 2.0;
        const int n = std::max(1, static_cast<int>(std::ceil(radius * angle)));
        for (int i = 1; i <= n; ++i) {
            const double phi = phi0 + sign * angle * i / n;
            points.push_back({center.x + radius * std::cos(phi), center.y + radius * std::sin(phi)});
            tags.push_back(left ? Command::left : Command::right);
        }
        heading += sign * angle;
    }
};

std::vector<double> cumulative_arc(const std::vector<Vec2>& pts) {
    std::vector<double> arc(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
    return arc;
}

struct PointOnLine {
    Vec2 point;
    Vec2 tangent;
};

PointOnLine interpolate(const std::vector<Vec2>& pts, const std::vector<double>& arc, double s) {
    s = std::clamp(s, 0.0, arc.back());
    auto it = std::upper_bound(arc.begin(), arc.end(), s);
    std::size_t i = it == arc.begin() ? 0 : static_cast<std::size_t>(it - arc.begin()) - 1;
    i = std::min(i, pts.size() - 2);
    const double len = arc[i + 1] - arc[i];
    const double t = len > 0.0 ? (s - arc[i]) / len : 0.0;
    const Vec2 d = sub(pts[i + 1], pts[i]);
    const double n = std::hypot(d.x, d.y);
    return {{pts[i].x + t * d.x, pts[i].y + t * d.y}, {d.x / n, d.y / n}};
}

RoadProjection project_segment_range(const Route& route, Vec2 p, std::size_t lo, std::size_t hi) {
    const auto& c = route.centerline;
    RoadProjection best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i < hi; ++i) {
        const Vec2 a = c[i];
        const Vec2 d = sub(c[i + 1], a);
        const double len2 = dot(d, d);
        const double t = len2 > 0.0 ? std::clamp(dot(sub(p, a), d) / len2, 0.0, 1.0) : 0.0;
        const Vec2 q{a.x + t * d.x, a.y + t * d.y};
        const Vec2 r = sub(p, q);
        const double d2 = dot(r, r);
        if (d2 < best_d2) {
            best_d2 = d2;
            const double len = std::sqrt(len2);
            best.segment = i;
            best.arc = route.arc[i] + t * len;
            best.heading = std::atan2(d.y, d.x);
            // Signed distance; the sign comes from the side of the segment line.
            const double side = len > 0.0 ? cross(d, sub(p, a)) / len : 0.0;
            best.lateral = side >= 0.0 ? std::sqrt(d2) : -std::sqrt(d2);
        }
    }
    return best;
}

bool ray_segment_hit(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b, double& t_out) {
    const Vec2 e = sub(b, a);
    const double denom = cross(dir, e);
    if (denom == 0.0) return false;
    const Vec2 w = sub(a, origin);
    const double t = cross(w, e) / denom;
    const double u = cross(w, dir) / denom;
    if (t < 0.0 || u < 0.0 || u > 1.0) return false;
    t_out = t;
    return true;
}

void track_route(WorldState& s) {
    const auto proj = project_onto_road(*s.route, {s.ego.x, s.ego.y}, s.segment_hint);
    s.segment_hint = proj.segment;
    s.progress = proj.arc;
    s.lateral = proj.lateral;
    s.heading_error = wrap_angle(s.ego.heading - proj.heading);
}

void clear_checkpoints(WorldState& s, double capture_radius) {
    const auto& r = *s.route;
    while (s.next_checkpoint < r.checkpoints.size()) {
        const auto& cp = r.checkpoints[s.next_checkpoint];
        const bool near = std::hypot(cp.x - s.ego.x, cp.y - s.ego.y) <= capture_radius;
        const bool passed = r.checkpoint_arc[s.next_checkpoint] <= s.progress;
        if (!near && !passed) break;
        ++s.next_checkpoint;
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

void validate_scenario(const Scenario& sc) {
    require(sc.road.size() >= 2, "scenario road needs at least 2 points");
    require(sc.lane_half_width > 0.0, "scenario lane_half_width must be positive");
    require(!sc.checkpoints.empty(), "scenario needs at least one checkpoint");
    for (std::size_t i = 1; i < sc.road.size(); ++i)
        require(!(sc.road[i] == sc.road[i - 1]), "scenario road has repeated points");
    for (const auto& o : sc.obstacles) require(o.radius > 0.0, "obstacle radius must be positive");
}

bool same_route(const Route& a, const Route& b) {
    return a.centerline == b.centerline && a.arc == b.arc && a.left_edge == b.left_edge && a.right_edge == b.right_edge &&
           a.half_width == b.half_width && a.checkpoints == b.checkpoints && a.checkpoint_arc == b.checkpoint_arc;
}

}  // namespace

const char* to_string(Command c) {
    switch (c) {
        case Command::straight: return "straight";
        case Command::left: return "left";
        case Command::right: return "right";
    }
    return "?";
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::none: return "none";
        case Termination::destination: return "destination";
        case Termination::off_road: return "off_road";
        case Termination::collision_limit: return "collision_limit";
        case Termination::timeout: return "timeout";
    }
    return "?";
}

Command parse_command(const std::string& s) {
    if (s == "straight") return Command::straight;
    if (s == "left") return Command::left;
    if (s == "right") return Command::right;
    throw FormatError("unknown command tag '" + s + "'");
}

void SimConfig::validate() const {
    require(n_rays >= 1, "sim.n_rays must be >= 1");
    require(max_range > 0.0, "sim.max_range must be positive");
    require(nav_checkpoints >= 1, "sim.nav_checkpoints must be >= 1");
    require(nav_scale > 0.0, "sim.nav_scale must be positive");
    require(dt > 0.0, "sim.dt must be positive");
    require(v_max > 0.0, "sim.v_max must be positive");
    require(wheelbase > 0.0, "sim.wheelbase must be positive");
    require(max_steer > 0.0 && max_steer < kPi / 2.0, "sim.max_steer must be in (0, pi/2)");
    require(max_accel > 0.0 && max_brake > 0.0, "sim.max_accel and sim.max_brake must be positive");
    require(ego_radius > 0.0, "sim.ego_radius must be positive");
    require(lane_half_width > 0.0, "sim.lane_half_width must be positive");
    require(checkpoint_spacing > 0.0, "sim.checkpoint_spacing must be positive");
    require(capture_radius > 0.0, "sim.capture_radius must be positive");
    require(collision_limit >= 1, "sim.collision_limit must be >= 1");
    require(max_steps >= 1, "sim.max_steps must be >= 1");
    require(min_blocks >= 1 && min_blocks <= max_blocks, "sim.min_blocks/max_blocks must satisfy 1 <= min <= max");
    require(min_obstacles >= 0 && min_obstacles <= max_obstacles,
            "sim.min_obstacles/max_obstacles must satisfy 0 <= min <= max");
    require(moving_obstacle_prob >= 0.0 && moving_obstacle_prob <= 1.0, "sim.moving_obstacle_prob must be in [0, 1]");
}

bool WorldState::same_as(const WorldState& o) const {
    if (!(ego == o.ego && obstacles == o.obstacles && next_checkpoint == o.next_checkpoint &&
          segment_hint == o.segment_hint && progress == o.progress && lateral == o.lateral &&
          heading_error == o.heading_error && in_contact == o.in_contact && collisions == o.collisions &&
          step == o.step && seed == o.seed && terminated == o.terminated))
        return false;
    if (route == o.route) return true;
    if (!route || !o.route) return false;
    return same_route(*route, *o.route);
}

std::vector<float> Observation::flatten() const {
    std::vector<float> out;
    out.reserve(3 + lidar.size() + nav.size() + 3);
    out.push_back(static_cast<float>(speed));
    out.push_back(static_cast<float>(lateral));
    out.push_back(static_cast<float>(heading_error));
    for (double v : lidar) out.push_back(static_cast<float>(v));
    for (double v : nav) out.push_back(static_cast<float>(v));
    for (double v : command) out.push_back(static_cast<float>(v));
    return out;
}

Scenario generate_scenario(std::uint64_t seed, const SimConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    CenterlineBuilder b;
    b.straight(25.0);  // clear run-up
    const int blocks = uniform_int(cfg.min_blocks, cfg.max_blocks);
    for (int i = 1; i < blocks; ++i) {
        const int kind = uniform_int(0, 2);
        if (kind == 0) {
            b.straight(uniform(15.0, 30.0));
            continue;
        }
        const double radius = uniform(15.0, 30.0);
        const double angle = uniform(kPi / 6.0, kPi / 2.0);
        bool left = kind == 1;
        // Keep the overall heading within +-90 degrees so the road never loops back on itself.
        if (std::abs(b.heading + (left ? angle : -angle)) > kPi / 2.0) left = !left;
        b.arc(radius, angle, left);
    }

    Scenario sc;
    sc.road = b.points;
    sc.lane_half_width = cfg.lane_half_width;
    const auto arc = cumulative_arc(sc.road);
    const double total = arc.back();
    auto tag_at = [&](double s) {
        auto it = std::lower_bound(arc.begin(), arc.end(), s);
        const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - arc.begin()), arc.size() - 1);
        return b.tags[i];
    };
    for (double s = cfg.checkpoint_spacing; s < total - 0.5 * cfg.checkpoint_spacing; s += cfg.checkpoint_spacing) {
        const auto p = interpolate(sc.road, arc, s);
        sc.checkpoints.push_back({p.point.x, p.point.y, tag_at(s)});
    }
    sc.checkpoints.push_back({sc.road.back().x, sc.road.back().y, tag_at(total)});

    const int n_obstacles = uniform_int(cfg.min_obstacles, cfg.max_obstacles);
    const double lo_s = 20.0;
    const double hi_s = total - 10.0;
    const double lateral_limit = std::max(0.0, cfg.lane_half_width - 1.5);
    const double min_gap = 2.0 * cfg.ego_radius + 0.8;
    std::vector<double> placed;
    for (int attempt = 0; attempt < 50 * std::max(1, n_obstacles) && static_cast<int>(placed.size()) < n_obstacles && hi_s > lo_s;
         ++attempt) {
        const double s = uniform(lo_s, hi_s);
        const double lateral = uniform(-lateral_limit, lateral_limit);
        const double radius = uniform(0.5, 1.0);
        const bool moving = uniform(0.0, 1.0) < cfg.moving_obstacle_prob;
        const double speed = uniform(0.5, 1.5);
        const double left_gap = cfg.lane_half_width - (lateral + radius);
        const double right_gap = (lateral - radius) + cfg.lane_half_width;
        if (std::max(left_gap, right_gap) < min_gap) continue;
        if (std::any_of(placed.begin(), placed.end(), [&](double q) { return std::abs(q - s) < 12.0; })) continue;
        const auto p = interpolate(sc.road, arc, s);
        const Vec2 normal{-p.tangent.y, p.tangent.x};
        Obstacle o;
        o.x = p.point.x + lateral * normal.x;
        o.y = p.point.y + lateral * normal.y;
        o.radius = radius;
        if (moving) {
            o.vx = speed * p.tangent.x;
            o.vy = speed * p.tangent.y;
        }
        sc.obstacles.push_back(o);
        placed.push_back(s);
    }
    return sc;
}

std::shared_ptr<const Route> make_route(const Scenario& sc) {
    validate_scenario(sc);
    auto r = std::make_shared<Route>();
    r->centerline = sc.road;
    r->arc = cumulative_arc(sc.road);
    r->half_width = sc.lane_half_width;
    const auto& c = r->centerline;
    const std::size_t n = c.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 d = sub(c[std::min(i + 1, n - 1)], c[i == 0 ? 0 : i - 1]);
        const double len = std::hypot(d.x, d.y);
        const Vec2 normal{-d.y / len, d.x / len};
        r->left_edge.push_back({c[i].x + r->half_width * normal.x, c[i].y + r->half_width * normal.y});
        r->right_edge.push_back({c[i].x - r->half_width * normal.x, c[i].y - r->half_width * normal.y});
    }
    r->checkpoints = sc.checkpoints;
    std::size_t from = 0;
    for (const auto& cp : sc.checkpoints) {
        const auto proj = project_segment_range(*r, {cp.x, cp.y}, from, n - 1);
        r->checkpoint_arc.push_back(proj.arc);
        from = proj.segment;
    }
    return r;
}

RoadProjection project_onto_road(const Route& route, Vec2 p, std::size_t hint) {
    constexpr std::size_t kWindow = 25;
    const std::size_t segments = route.centerline.size() - 1;
    hint = std::min(hint, segments - 1);
    const std::size_t lo = hint > kWindow ? hint - kWindow : 0;
    const std::size_t hi = std::min(segments, hint + kWindow + 1);
    return project_segment_range(route, p, lo, hi);
}

Vec2 road_point(const Route& route, double arc, double lateral) {
    const double over = arc - route.length();
    const auto p = interpolate(route.centerline, route.arc, arc);
    const Vec2 base = over > 0.0 ? Vec2{p.point.x + over * p.tangent.x, p.point.y + over * p.tangent.y} : p.point;
    return {base.x - lateral * p.tangent.y, base.y + lateral * p.tangent.x};
}

void update_tracking(WorldState& state, const SimConfig& cfg) {
    track_route(state);
    clear_checkpoints(state, cfg.capture_radius);
}

ResetResult reset(const Scenario& scenario, const SimConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ResetResult out;
    auto& s = out.state;
    s.route = make_route(scenario);
    s.seed = seed;
    const auto& c = s.route->centerline;
    s.ego = {c[0].x, c[0].y, std::atan2(c[1].y - c[0].y, c[1].x - c[0].x), 0.0};
    s.obstacles = scenario.obstacles;
    s.in_contact.assign(s.obstacles.size(), 0);
    track_route(s);
    clear_checkpoints(s, cfg.capture_radius);
    for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
        const auto& o = s.obstacles[i];
        s.in_contact[i] = std::hypot(o.x - s.ego.x, o.y - s.ego.y) < o.radius + cfg.ego_radius;
    }
    out.observation = observe(s, cfg);
    return out;
}

ResetResult reset(std::uint64_t scenario_seed, const SimConfig& cfg) {
    return reset(generate_scenario(scenario_seed, cfg), cfg, scenario_seed);
}

WorldState kinematic_step(const WorldState& state, const Action& action, double dt, const SimConfig& cfg) {
    if (!(dt > 0.0)) throw ContractViolation("kinematic_step: dt must be positive");
    const Action a = action.clamped();
    WorldState s = state;
    auto& e = s.ego;
    const double delta = a.steer * cfg.max_steer;
    const double accel = a.accel >= 0.0 ? a.accel * cfg.max_accel : a.accel * cfg.max_brake;
    const double v = e.speed;
    e.x += v * std::cos(e.heading) * dt;
    e.y += v * std::sin(e.heading) * dt;
    e.heading = wrap_angle(e.heading + v / cfg.wheelbase * std::tan(delta) * dt);
    e.speed = std::clamp(v + accel * dt, 0.0, cfg.v_max);
    for (auto& o : s.obstacles) {
        o.x += o.vx * dt;
        o.y += o.vy * dt;
    }
    return s;
}

std::vector<double> cast_lidar(const WorldState& state, int n_rays, double max_range, bool road_edges) {
    if (n_rays < 1) throw ContractViolation("cast_lidar: n_rays must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(n_rays), 1.0);
    const Vec2 origin{state.ego.x, state.ego.y};
    for (int i = 0; i < n_rays; ++i) {
        const double theta = state.ego.heading + 2.0 * kPi * i / n_rays;
        const Vec2 dir{std::cos(theta), std::sin(theta)};
        double best = max_range;
        for (const auto& o : state.obstacles) {
            const Vec2 p{o.x - origin.x, o.y - origin.y};
            const double c = dot(p, p) - o.radius * o.radius;
            if (c <= 0.0) {
                best = 0.0;
                break;
            }
            const double b = dot(dir, p);
            const double disc = b * b - c;
            if (disc < 0.0 || b < 0.0) continue;  // miss, or circle entirely behind the origin
            best = std::min(best, b - std::sqrt(disc));
        }
        if (road_edges && state.route && best > 0.0) {
            for (const auto* edge : {&state.route->left_edge, &state.route->right_edge}) {
                for (std::size_t k = 0; k + 1 < edge->size(); ++k) {
                    double t = 0.0;
                    if (ray_segment_hit(origin, dir, (*edge)[k], (*edge)[k + 1], t)) best = std::min(best, t);
                }
            }
        }
        out[static_cast<std::size_t>(i)] = std::clamp(best, 0.0, max_range) / max_range;
    }
    return out;
}

double compute_reward(const WorldState& prev, const WorldState& cur, const StepEvents& events, const SimConfig& cfg) {
    const double r_disp = cur.progress - prev.progress;
    const double r_speed = cur.ego.speed / cfg.v_max;
    const double r_collision = events.collisions > 0 ? -5.0 : 0.0;
    double r_term = 0.0;
    if (events.destination)
        r_term = 10.0;
    else if (events.off_road)
        r_term = -5.0;
    return cfg.c_disp * r_disp + cfg.c_speed * r_speed + cfg.c_collision * r_collision + r_term;
}

std::vector<double> nav_features(const WorldState& state, int k, double scale) {
    if (k < 1) throw ContractViolation("nav_features: k must be >= 1");
    const auto& cps = state.route->checkpoints;
    const double ch = std::cos(state.ego.heading);
    const double sh = std::sin(state.ego.heading);
    std::vector<double> out;
    out.reserve(2 * static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        const std::size_t idx = std::min(state.next_checkpoint + static_cast<std::size_t>(j), cps.size() - 1);
        const double dx = cps[idx].x - state.ego.x;
        const double dy = cps[idx].y - state.ego.y;
        out.push_back(scale * (ch * dx + sh * dy));
        out.push_back(scale * (-sh * dx + ch * dy));
    }
    return out;
}

Observation observe(const WorldState& s, const SimConfig& cfg) {
    Observation o;
    o.speed = s.ego.speed / cfg.v_max;
    o.lateral = s.lateral / s.route->half_width;
    o.heading_error = s.heading_error;
    o.lidar = cast_lidar(s, cfg.n_rays, cfg.max_range, cfg.lidar_road_edges);
    o.nav = nav_features(s, cfg.nav_checkpoints, cfg.nav_scale);
    const auto& cps = s.route->checkpoints;
    const auto cmd = cps[std::min(s.next_checkpoint, cps.size() - 1)].command;
    o.command[static_cast<std::size_t>(cmd)] = 1.0;
    return o;
}

bool ego_overlaps_obstacle(const WorldState& s, const SimConfig& cfg) {
    return std::any_of(s.obstacles.begin(), s.obstacles.end(), [&](const Obstacle& o) {
        return std::hypot(o.x - s.ego.x, o.y - s.ego.y) < o.radius + cfg.ego_radius;
    });
}

bool is_off_road(double lateral, const SimConfig& cfg, double half_width) {
    return std::abs(lateral) > half_width + cfg.ego_radius;
}

StepResult step(WorldState& state, const Action& action, const SimConfig& cfg) {
    if (state.terminated != Termination::none)
        throw ContractViolation(std::string("step: episode already terminated (") + to_string(state.terminated) + ")");
    if (!std::isfinite(action.steer) || !std::isfinite(action.accel))
        throw ContractViolation("step: action has a non-finite component");
    WorldState next = kinematic_step(state, action, cfg.dt, cfg);
    track_route(next);
    clear_checkpoints(next, cfg.capture_radius);

    StepEvents ev;
    for (std::size_t i = 0; i < next.obstacles.size(); ++i) {
        const auto& o = next.obstacles[i];
        const bool overlap = std::hypot(o.x - next.ego.x, o.y - next.ego.y) < o.radius + cfg.ego_radius;
        if (overlap && !next.in_contact[i]) ++ev.collisions;
        next.in_contact[i] = overlap;
    }
    next.collisions += ev.collisions;
    ev.destination = next.next_checkpoint >= next.route->checkpoints.size();
    ev.off_road = is_off_road(next.lateral, cfg, next.route->half_width);
    next.step += 1;

    if (ev.destination)
        next.terminated = Termination::destination;
    else if (ev.off_road)
        next.terminated = Termination::off_road;
    else if (next.collisions >= cfg.collision_limit)
        next.terminated = Termination::collision_limit;
    else if (next.step >= cfg.max_steps)
        next.terminated = Termination::timeout;

    StepResult r;
    r.reward = compute_reward(state, next, ev, cfg);
    r.cost = static_cast<double>(ev.collisions);
    r.terminated = next.terminated;
    r.events = ev;
    state = std::move(next);
    r.observation = observe(state, cfg);
    return r;
}

// ---------------------------------------------------------------------------

void write_scenario(std::ostream& out, const Scenario& sc) {
    out << "hdsac-scenario " << kScenarioSchemaVersion << '\n' << std::setprecision(17);
    out << "lane_half_width " << sc.lane_half_width << '\n';
    out << "road " << sc.road.size() << '\n';
    for (const auto& p : sc.road) out << p.x << ' ' << p.y << '\n';
    out << "checkpoints " << sc.checkpoints.size() << '\n';
    for (const auto& c : sc.checkpoints) out << c.x << ' ' << c.y << ' ' << to_string(c.command) << '\n';
    out << "obstacles " << sc.obstacles.size() << '\n';
    for (const auto& o : sc.obstacles) out << o.x << ' ' << o.y << ' ' << o.radius << ' ' << o.vx << ' ' << o.vy << '\n';
}

namespace {

void expect_keyword(std::istream& in, const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) throw FormatError("scenario: expected '" + word + "', got '" + got + "'");
}

std::size_t read_count(std::istream& in, const std::string& what) {
    long long n = -1;
    if (!(in >> n) || n < 0 || n > 10'000'000) throw FormatError("scenario: bad " + what + " count");
    return static_cast<std::size_t>(n);
}

template <typename... Ts>
void read_fields(std::istream& in, const char* what, Ts&... xs) {
    if (!(in >> ... >> xs)) throw FormatError(std::string("scenario: truncated ") + what + " table");
}

}  // namespace

Scenario read_scenario(std::istream& in) {
    expect_keyword(in, "hdsac-scenario");
    int version = 0;
    if (!(in >> version)) throw FormatError("scenario: missing version");
    if (version != kScenarioSchemaVersion)
        throw FormatError("scenario: unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kScenarioSchemaVersion) + ")");
    Scenario sc;
    expect_keyword(in, "lane_half_width");
    read_fields(in, "header", sc.lane_half_width);
    expect_keyword(in, "road");
    sc.road.resize(read_count(in, "road"));
    for (auto& p : sc.road) read_fields(in, "road", p.x, p.y);
    expect_keyword(in, "checkpoints");
    sc.checkpoints.resize(read_count(in, "checkpoint"));
    for (auto& c : sc.checkpoints) {
        std::string tag;
        read_fields(in, "checkpoint", c.x, c.y, tag);
        c.command = parse_command(tag);
    }
    expect_keyword(in, "obstacles");
    sc.obstacles.resize(read_count(in, "obstacle"));
    for (auto& o : sc.obstacles) read_fields(in, "obstacle", o.x, o.y, o.radius, o.vx, o.vy);
    try {
        validate_scenario(sc);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("scenario: ") + e.what());
    }
    return sc;
}

void save_scenario(const std::filesystem::path& path, const Scenario& sc) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    write_scenario(f, sc);
    if (!f) throw IoError("write failed: " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    return read_scenario(f);
}

void write_trajectory(std::ostream& out, const std::vector<TrajectoryRecord>& records) {
    out << "hdsac-trajectory " << kTrajectorySchemaVersion << '\n';
    out << "# step x y heading speed steer accel reward cost\n" << std::setprecision(17);
    for (const auto& r : records)
        out << r.step << ' ' << r.ego.x << ' ' << r.ego.y << ' ' << r.ego.heading << ' ' << r.ego.speed << ' '
            << r.action.steer << ' ' << r.action.accel << ' ' << r.reward << ' ' << r.cost << '\n';
}

std::vector<TrajectoryRecord> read_trajectory(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("trajectory: empty input");
    std::istringstream header(line);
    std::string magic;
    int version = 0;
    if (!(header >> magic >> version) || magic != "hdsac-trajectory")
        throw FormatError("trajectory: missing 'hdsac-trajectory' header");
    if (version != kTrajectorySchemaVersion)
        throw FormatError("trajectory: unsupported version " + std::to_string(version));
    std::vector<TrajectoryRecord> out;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        TrajectoryRecord r;
        if (!(ls >> r.step >> r.ego.x >> r.ego.y >> r.ego.heading >> r.ego.speed >> r.action.steer >> r.action.accel >>
              r.reward >> r.cost))
            throw FormatError("trajectory: malformed record '" + line + "'");
        out.push_back(r);
    }
    return out;
}

}  // namespace hdsac::sim
