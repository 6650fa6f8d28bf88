#include "hdsac/config.hpp"

#include "hdsac/errors.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace hdsac::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
    T v{};
    const char* first = text.data();
    const char* last = first + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || text.empty())
        throw ConfigError("'" + key + "': cannot parse '" + text + "' as a number");
    return v;
}

template <typename T>
std::string format_number(T v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw ContractViolation("number formatting failed");
    return std::string(buf, ptr);
}

bool parse_bool(const std::string& text, const std::string& key) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ConfigError("'" + key + "': expected true or false, got '" + text + "'");
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

// `access` maps a RunConfig to the member; it is only ever handed mutable
// configs, the getter casts away const for reading.
template <typename T, typename Access>
Field make_field(std::string key, Access access) {
    Field f;
    f.key = key;
    f.get = [access](const RunConfig& c) -> std::string {
        const T& v = access(const_cast<RunConfig&>(c));
        if constexpr (std::is_same_v<T, bool>) {
            return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
            return v;
        } else {
            return format_number(v);
        }
    };
    f.set = [access, key](RunConfig& c, const std::string& text) {
        if constexpr (std::is_same_v<T, bool>) {
            access(c) = parse_bool(text, key);
        } else if constexpr (std::is_same_v<T, std::string>) {
            access(c) = text;
        } else {
            access(c) = parse_number<T>(text, key);
        }
    };
    return f;
}

#define HDSAC_FIELD(key, type, expr) make_field<type>(key, [](RunConfig& c) -> type& { return expr; })

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> t;
        // [run]
        t.push_back({"run.algorithm", [](const RunConfig& c) { return std::string(agents::to_string(c.train.algorithm)); },
                     [](RunConfig& c, const std::string& v) {
                         try {
                             c.train.algorithm = agents::parse_algorithm(v);
                         } catch (const std::exception&) {
                             throw ConfigError("'run.algorithm': expected hdsac, sac or pvp, got '" + v + "'");
                         }
                     }});
        t.push_back(HDSAC_FIELD("run.seed", std::uint64_t, c.train.seed));
        t.push_back(HDSAC_FIELD("run.total_steps", std::int64_t, c.train.total_steps));
        t.push_back({"run.supervisor", [](const RunConfig& c) { return to_string(c.supervisor); },
                     [](RunConfig& c, const std::string& v) { c.supervisor = parse_supervisor(v); }});
        t.push_back(HDSAC_FIELD("run.output_dir", std::string, c.output_dir));
        t.push_back(HDSAC_FIELD("run.record_session", bool, c.record_session));
        // [trainer]
        t.push_back(HDSAC_FIELD("trainer.warmup_steps", std::int64_t, c.train.warmup_steps));
        t.push_back(HDSAC_FIELD("trainer.update_interval", int, c.train.update_interval));
        t.push_back(HDSAC_FIELD("trainer.window", int, c.train.window));
        t.push_back(HDSAC_FIELD("trainer.eval_interval", std::int64_t, c.train.eval_interval));
        t.push_back(HDSAC_FIELD("trainer.eval_episodes", int, c.train.eval_episodes));
        t.push_back(HDSAC_FIELD("trainer.eval_seed_base", std::uint64_t, c.train.eval_seed_base));
        t.push_back(HDSAC_FIELD("trainer.train_seed_base", std::uint64_t, c.train.train_seed_base));
        t.push_back(HDSAC_FIELD("trainer.train_scenarios", int, c.train.train_scenarios));
        t.push_back(HDSAC_FIELD("trainer.checkpoint_interval", std::int64_t, c.train.checkpoint_interval));
        t.push_back(HDSAC_FIELD("trainer.novice_capacity", std::size_t, c.train.novice_capacity));
        t.push_back(HDSAC_FIELD("trainer.human_capacity", std::size_t, c.train.human_capacity));
        t.push_back(HDSAC_FIELD("trainer.human_fraction", double, c.train.human_fraction));
        t.push_back(HDSAC_FIELD("trainer.sac_q_alarm", double, c.train.sac_q_alarm));
        t.push_back({"trainer.hidden",
                     [](const RunConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.train.hidden.size(); ++i) {
                             if (i) s += ",";
                             s += std::to_string(c.train.hidden[i]);
                         }
                         return s;
                     },
                     [](RunConfig& c, const std::string& v) {
                         std::vector<int> widths;
                         std::stringstream ss(v);
                         std::string part;
                         while (std::getline(ss, part, ',')) widths.push_back(parse_number<int>(trim(part), "trainer.hidden"));
                         if (widths.empty()) throw ConfigError("'trainer.hidden': expected comma-separated widths");
                         c.train.hidden = widths;
                     }});
        // [algo]
        t.push_back(HDSAC_FIELD("algo.gamma", double, c.train.algo.gamma));
        t.push_back(HDSAC_FIELD("algo.eta", double, c.train.algo.eta));
        t.push_back(HDSAC_FIELD("algo.alpha", double, c.train.algo.alpha));
        t.push_back(HDSAC_FIELD("algo.alpha_min", double, c.train.algo.alpha_min));
        t.push_back(HDSAC_FIELD("algo.target_entropy", double, c.train.algo.target_entropy));
        t.push_back(HDSAC_FIELD("algo.tau", double, c.train.algo.tau));
        t.push_back(HDSAC_FIELD("algo.clip_c", double, c.train.algo.clip_c));
        t.push_back(HDSAC_FIELD("algo.batch_size", int, c.train.algo.batch_size));
        t.push_back(HDSAC_FIELD("algo.critic_lr", double, c.train.algo.critic_lr));
        t.push_back(HDSAC_FIELD("algo.actor_lr", double, c.train.algo.actor_lr));
        t.push_back(HDSAC_FIELD("algo.alpha_lr", double, c.train.algo.alpha_lr));
        t.push_back(HDSAC_FIELD("algo.sigma_min", double, c.train.algo.sigma_min));
        t.push_back(HDSAC_FIELD("algo.sigma_max", double, c.train.algo.sigma_max));
        t.push_back(HDSAC_FIELD("algo.q_alarm", double, c.train.algo.q_alarm));
        // [sim]
        t.push_back(HDSAC_FIELD("sim.n_rays", int, c.train.sim.n_rays));
        t.push_back(HDSAC_FIELD("sim.max_range", double, c.train.sim.max_range));
        t.push_back(HDSAC_FIELD("sim.lidar_road_edges", bool, c.train.sim.lidar_road_edges));
        t.push_back(HDSAC_FIELD("sim.nav_checkpoints", int, c.train.sim.nav_checkpoints));
        t.push_back(HDSAC_FIELD("sim.nav_scale", double, c.train.sim.nav_scale));
        t.push_back(HDSAC_FIELD("sim.dt", double, c.train.sim.dt));
        t.push_back(HDSAC_FIELD("sim.v_max", double, c.train.sim.v_max));
        t.push_back(HDSAC_FIELD("sim.wheelbase", double, c.train.sim.wheelbase));
        t.push_back(HDSAC_FIELD("sim.max_steer", double, c.train.sim.max_steer));
        t.push_back(HDSAC_FIELD("sim.max_accel", double, c.train.sim.max_accel));
        t.push_back(HDSAC_FIELD("sim.max_brake", double, c.train.sim.max_brake));
        t.push_back(HDSAC_FIELD("sim.ego_radius", double, c.train.sim.ego_radius));
        t.push_back(HDSAC_FIELD("sim.lane_half_width", double, c.train.sim.lane_half_width));
        t.push_back(HDSAC_FIELD("sim.checkpoint_spacing", double, c.train.sim.checkpoint_spacing));
        t.push_back(HDSAC_FIELD("sim.capture_radius", double, c.train.sim.capture_radius));
        t.push_back(HDSAC_FIELD("sim.c_disp", double, c.train.sim.c_disp));
        t.push_back(HDSAC_FIELD("sim.c_speed", double, c.train.sim.c_speed));
        t.push_back(HDSAC_FIELD("sim.c_collision", double, c.train.sim.c_collision));
        t.push_back(HDSAC_FIELD("sim.collision_limit", int, c.train.sim.collision_limit));
        t.push_back(HDSAC_FIELD("sim.max_steps", int, c.train.sim.max_steps));
        t.push_back(HDSAC_FIELD("sim.min_blocks", int, c.train.sim.min_blocks));
        t.push_back(HDSAC_FIELD("sim.max_blocks", int, c.train.sim.max_blocks));
        t.push_back(HDSAC_FIELD("sim.min_obstacles", int, c.train.sim.min_obstacles));
        t.push_back(HDSAC_FIELD("sim.max_obstacles", int, c.train.sim.max_obstacles));
        t.push_back(HDSAC_FIELD("sim.moving_obstacle_prob", double, c.train.sim.moving_obstacle_prob));
        // [expert]
        t.push_back(HDSAC_FIELD("expert.lookahead", double, c.expert.lookahead));
        t.push_back(HDSAC_FIELD("expert.lookahead_per_speed", double, c.expert.lookahead_per_speed));
        t.push_back(HDSAC_FIELD("expert.cruise_speed", double, c.expert.cruise_speed));
        t.push_back(HDSAC_FIELD("expert.speed_gain", double, c.expert.speed_gain));
        t.push_back(HDSAC_FIELD("expert.ttc_margin", double, c.expert.ttc_margin));
        t.push_back(HDSAC_FIELD("expert.avoid_clearance", double, c.expert.avoid_clearance));
        t.push_back(HDSAC_FIELD("expert.avoid_range", double, c.expert.avoid_range));
        t.push_back(HDSAC_FIELD("expert.avoid_speed_factor", double, c.expert.avoid_speed_factor));
        t.push_back(HDSAC_FIELD("expert.deviation_threshold", double, c.expert.deviation_threshold));
        t.push_back(HDSAC_FIELD("expert.horizon", int, c.expert.horizon));
        t.push_back(HDSAC_FIELD("expert.disengage_patience", int, c.expert.disengage_patience));
        // [bridge]
        t.push_back(HDSAC_FIELD("bridge.enabled", bool, c.bridge.enabled));
        t.push_back(HDSAC_FIELD("bridge.address", std::string, c.bridge.address));
        t.push_back(HDSAC_FIELD("bridge.port", std::uint16_t, c.bridge.port));
        t.push_back(HDSAC_FIELD("bridge.realtime", bool, c.bridge.realtime));
        return t;
    }();
    return table;
}

#undef HDSAC_FIELD

const Field& find_field(const std::string& key) {
    static const std::map<std::string, const Field*> index = [] {
        std::map<std::string, const Field*> m;
        for (const auto& f : fields()) m[f.key] = &f;
        return m;
    }();
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError("unknown config key '" + key + "'");
    return *it->second;
}

}  // namespace

SupervisorSpec parse_supervisor(const std::string& text) {
    SupervisorSpec s;
    if (text == "scripted") return s;
    if (text == "none") {
        s.kind = SupervisorSpec::Kind::none;
        return s;
    }
    if (text.rfind("replay:", 0) == 0) {
        s.kind = SupervisorSpec::Kind::replay;
        s.path = text.substr(7);
        if (s.path.empty()) throw ConfigError("supervisor replay: needs a session path");
        return s;
    }
    if (text.rfind("remote:", 0) == 0) {
        s.kind = SupervisorSpec::Kind::remote;
        s.port = parse_number<std::uint16_t>(text.substr(7), "run.supervisor");
        return s;
    }
    throw ConfigError("supervisor must be scripted, replay:PATH, remote:PORT or none, got '" + text + "'");
}

std::string to_string(const SupervisorSpec& s) {
    switch (s.kind) {
        case SupervisorSpec::Kind::scripted: return "scripted";
        case SupervisorSpec::Kind::replay: return "replay:" + s.path;
        case SupervisorSpec::Kind::remote: return "remote:" + std::to_string(s.port);
        case SupervisorSpec::Kind::none: return "none";
    }
    return "?";
}

void RunConfig::validate() const {
    train.validate();
    expert.validate();
    if (output_dir.find('\n') != std::string::npos) throw ConfigError("run.output_dir must be a single line");
    if (bridge.address.empty()) throw ConfigError("bridge.address must not be empty");
}

std::vector<std::string> keys() {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
}

void set(RunConfig& cfg, const std::string& key, const std::string& value) { find_field(key).set(cfg, value); }

std::string get(const RunConfig& cfg, const std::string& key) { return find_field(key).get(cfg); }

RunConfig parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::set<std::string> seen;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        const auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where() + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            const std::string prefix = section + ".";
            bool known = false;
            for (const auto& f : fields()) known = known || f.key.rfind(prefix, 0) == 0;
            if (!known) throw ConfigError(where() + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where() + "expected key = value");
        if (section.empty()) throw ConfigError(where() + "key outside of a section");
        const std::string key = section + "." + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw ConfigError(where() + "duplicate key '" + key + "'");
        try {
            set(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where() + e.what());
        }
    }
    return cfg;
}

RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string serialize(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const std::string s = f.key.substr(0, dot);
        if (s != section) {
            if (!section.empty()) out << '\n';
            out << '[' << s << "]\n";
            section = s;
        }
        out << f.key.substr(dot + 1) << " = " << f.get(cfg) << '\n';
    }
    return out.str();
}

void save(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file " + path.string());
    out << serialize(cfg);
    if (!out) throw IoError("failed writing config file " + path.string());
}

std::filesystem::path output_root() {
    const char* env = std::getenv(kOutputRootEnv);
    return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

std::filesystem::path run_directory(const RunConfig& cfg) {
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    return output_root() / (std::string(agents::to_string(cfg.train.algorithm)) + "_seed" + std::to_string(cfg.train.seed));
}

}  // namespace hdsac::config
