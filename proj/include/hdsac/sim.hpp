#pragma once

// Top-down 2D driving micro-simulator: kinematic bicycle ego, disc obstacles,
// a procedurally generated road with checkpoints, and lidar-like ray sensing.
//
// Frames: world x/y in meters, heading in radians counter-clockwise from +x.
// Lateral offsets are positive to the left of the road centerline.

#include "hdsac/action.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace hdsac::sim {

enum class Command : std::uint8_t { straight = 0, left = 1, right = 2 };

enum class Termination : std::uint8_t { none = 0, destination, off_road, collision_limit, timeout };

const char* to_string(Command c);
const char* to_string(Termination t);
Command parse_command(const std::string& s);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Obstacle {
    double x = 0.0;
    double y = 0.0;
    double radius = 0.5;
    double vx = 0.0;
    double vy = 0.0;
    friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

struct Checkpoint {
    double x = 0.0;
    double y = 0.0;
    Command command = Command::straight;
    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Everything a scenario file stores.
struct Scenario {
    std::vector<Vec2> road;  // centerline polyline, >= 2 points
    double lane_half_width = 4.0;
    std::vector<Checkpoint> checkpoints;
    std::vector<Obstacle> obstacles;
    friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct SimConfig {
    int n_rays = 60;
    double max_range = 20.0;
    bool lidar_road_edges = false;
    int nav_checkpoints = 10;
    double nav_scale = 0.05;  // ego-frame checkpoint offsets are multiplied by this
    double dt = 0.1;
    double v_max = 8.0;
    double wheelbase = 1.0;
    double max_steer = 0.5;  // rad at steer = +-1
    double max_accel = 3.0;  // m/s^2 at accel = +1
    double max_brake = 6.0;  // m/s^2 at accel = -1
    double ego_radius = 0.9;
    double lane_half_width = 4.0;
    double checkpoint_spacing = 5.0;
    double capture_radius = 4.0;
    double c_disp = 1.0;
    double c_speed = 0.1;
    double c_collision = 1.0;
    int collision_limit = 5;
    int max_steps = 600;
    // procedural scenario generation
    int min_blocks = 4;
    int max_blocks = 6;
    int min_obstacles = 2;
    int max_obstacles = 5;
    double moving_obstacle_prob = 0.25;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;

    /// Throws ConfigError.
    void validate() const;
    int observation_dim() const { return 3 + n_rays + 2 * nav_checkpoints + 3; }
};

/// Immutable road + route shared by every copy of a world.
struct Route {
    std::vector<Vec2> centerline;
    std::vector<double> arc;  // cumulative arc length per centerline point
    std::vector<Vec2> left_edge;
    std::vector<Vec2> right_edge;
    double half_width = 4.0;
    std::vector<Checkpoint> checkpoints;
    std::vector<double> checkpoint_arc;

    double length() const { return arc.back(); }
};

struct RoadProjection {
    double arc = 0.0;      // distance along the centerline
    double lateral = 0.0;  // signed, left positive
    double heading = 0.0;  // centerline tangent direction
    std::size_t segment = 0;
};

/// Closest point on the centerline, searching segments near `hint`.
RoadProjection project_onto_road(const Route& route, Vec2 p, std::size_t hint);

/// Point at arc length `arc` shifted `lateral` meters to the left of the
/// centerline. Arc lengths past the end extend along the final tangent.
Vec2 road_point(const Route& route, double arc, double lateral);

struct EgoState {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
    double speed = 0.0;
    friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct WorldState {
    EgoState ego;
    std::vector<Obstacle> obstacles;
    std::shared_ptr<const Route> route;
    std::size_t next_checkpoint = 0;
    std::size_t segment_hint = 0;
    double progress = 0.0;  // arc length reached, d_t
    double lateral = 0.0;
    double heading_error = 0.0;
    std::vector<std::uint8_t> in_contact;  // per obstacle
    int collisions = 0;
    int step = 0;
    std::uint64_t seed = 0;
    Termination terminated = Termination::none;

    /// Field-wise equality (route compared by content).
    bool same_as(const WorldState& other) const;
};

struct Observation {
    double speed = 0.0;            // speed / v_max
    double lateral = 0.0;          // lateral offset / lane half-width
    double heading_error = 0.0;    // radians
    std::vector<double> lidar;     // n_rays, each in [0, 1]
    std::vector<double> nav;       // 2 * K ego-frame offsets (scaled)
    std::array<double, 3> command{};  // one-hot of the next checkpoint's command

    /// [speed, lateral, heading_error, lidar..., nav..., command...]
    std::vector<float> flatten() const;
};

struct StepEvents {
    int collisions = 0;  // onsets of contact this step
    bool off_road = false;
    bool destination = false;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;  // evaluation / reward-based baselines only
    double cost = 0.0;    // collision count this step
    Termination terminated = Termination::none;
    StepEvents events;
};

Scenario generate_scenario(std::uint64_t seed, const SimConfig& cfg);

/// Builds the route tables (arc lengths, edges, checkpoint arcs).
std::shared_ptr<const Route> make_route(const Scenario& scenario);

struct ResetResult {
    WorldState state;
    Observation observation;
};

ResetResult reset(std::uint64_t scenario_seed, const SimConfig& cfg);
ResetResult reset(const Scenario& scenario, const SimConfig& cfg, std::uint64_t seed = 0);

/// Kinematic bicycle update plus constant-velocity obstacle motion. Does not
/// touch collision, route or termination bookkeeping.
WorldState kinematic_step(const WorldState& state, const Action& action, double dt, const SimConfig& cfg);

/// Normalized distances along n_rays rays spread over 360 degrees starting at
/// the ego heading, counter-clockwise.
std::vector<double> cast_lidar(const WorldState& state, int n_rays, double max_range, bool road_edges = false);

double compute_reward(const WorldState& prev, const WorldState& cur, const StepEvents& events, const SimConfig& cfg);

/// Next k uncleared checkpoints in the ego frame (forward x, left y), scaled
/// by nav_scale, padded by repeating the destination.
std::vector<double> nav_features(const WorldState& state, int k, double scale);

Observation observe(const WorldState& state, const SimConfig& cfg);

/// Advances the world one control period. Throws ContractViolation when the
/// episode has already terminated.
StepResult step(WorldState& state, const Action& action, const SimConfig& cfg);

/// Recomputes progress, lateral offset, heading error and cleared
/// checkpoints from the ego pose.
void update_tracking(WorldState& state, const SimConfig& cfg);

/// True when the ego disc overlaps any obstacle.
bool ego_overlaps_obstacle(const WorldState& state, const SimConfig& cfg);
bool is_off_road(double lateral, const SimConfig& cfg, double half_width);

// ---------------------------------------------------------------------------
// Scenario files: "hdsac-scenario <version>" header then road / checkpoints /
// obstacles tables.

inline constexpr int kScenarioSchemaVersion = 1;

void write_scenario(std::ostream& out, const Scenario& scenario);
Scenario read_scenario(std::istream& in);
void save_scenario(const std::filesystem::path& path, const Scenario& scenario);
Scenario load_scenario(const std::filesystem::path& path);

/// Line-oriented trajectory records for plotting.
struct TrajectoryRecord {
    int step = 0;
    EgoState ego;
    Action action;
    double reward = 0.0;
    double cost = 0.0;
};

inline constexpr int kTrajectorySchemaVersion = 1;

void write_trajectory(std::ostream& out, const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> read_trajectory(std::istream& in);

}  // namespace hdsac::sim
