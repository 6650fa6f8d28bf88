#include "hdsac/hdsac.h"

#include "hdsac/config.hpp"
#include "hdsac/errors.hpp"
#include "hdsac/plot.hpp"
#include "hdsac/run.hpp"

#include <cstring>
#include <new>
#include <string>

struct hdsac_config {
    hdsac::config::RunConfig cfg;
};

struct hdsac_agent {
    std::unique_ptr<hdsac::agents::Agent> agent;
};

namespace {

using namespace hdsac;

thread_local std::string g_last_error;

hdsac_status fail(hdsac_status s, const std::string& message) {
    g_last_error = message;
    return s;
}

/// Runs `fn`, mapping the library's exception types onto status codes.
template <typename Fn>
hdsac_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const ConfigError& e) {
        return fail(HDSAC_ERR_CONFIG, e.what());
    } catch (const FormatError& e) {
        return fail(HDSAC_ERR_FORMAT, e.what());
    } catch (const IoError& e) {
        return fail(HDSAC_ERR_IO, e.what());
    } catch (const TrainingDivergence& e) {
        return fail(HDSAC_ERR_DIVERGENCE, e.what());
    } catch (const ContractViolation& e) {
        return fail(HDSAC_ERR_CONTRACT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(HDSAC_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(HDSAC_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(HDSAC_ERR_INTERNAL, "unknown error");
    }
}

hdsac_status null_argument(const char* name) {
    return fail(HDSAC_ERR_INVALID_ARGUMENT, std::string(name) + " must not be NULL");
}

hdsac_status copy_out(const std::string& s, char* buf, std::size_t cap, std::size_t* needed) {
    if (needed) *needed = s.size() + 1;
    if (!buf) {
        if (!needed) return null_argument("buf and needed");
        return HDSAC_OK;
    }
    if (cap < s.size() + 1) return fail(HDSAC_ERR_BUFFER_TOO_SMALL, "buffer holds " + std::to_string(cap) +
                                                                        " bytes, " + std::to_string(s.size() + 1) +
                                                                        " needed");
    std::memcpy(buf, s.c_str(), s.size() + 1);
    return HDSAC_OK;
}

hdsac_algorithm to_c(agents::Algorithm a) {
    switch (a) {
        case agents::Algorithm::hdsac: return HDSAC_ALGO_HDSAC;
        case agents::Algorithm::sac: return HDSAC_ALGO_SAC;
        case agents::Algorithm::pvp: return HDSAC_ALGO_PVP;
    }
    return HDSAC_ALGO_HDSAC;
}

agents::Algorithm from_c(hdsac_algorithm a) {
    switch (a) {
        case HDSAC_ALGO_HDSAC: return agents::Algorithm::hdsac;
        case HDSAC_ALGO_SAC: return agents::Algorithm::sac;
        case HDSAC_ALGO_PVP: return agents::Algorithm::pvp;
    }
    throw ContractViolation("unknown algorithm value " + std::to_string(static_cast<int>(a)));
}

trainer::Summary from_c(const hdsac_summary& s) {
    trainer::Summary out;
    out.algorithm = from_c(s.algorithm);
    out.human_data = s.human_data;
    out.total_data = s.total_data;
    out.training_safety_cost = s.training_safety_cost;
    if (s.has_eval) {
        trainer::EvalResult r;
        r.return_mean = s.return_mean;
        r.return_std = s.return_std;
        r.safety_cost = s.episodic_safety_cost;
        r.success_rate = s.success_rate;
        out.eval = r;
    }
    return out;
}

hdsac_status make_config(config::RunConfig cfg, hdsac_config** out) {
    *out = new hdsac_config{std::move(cfg)};
    return HDSAC_OK;
}

}  // namespace

extern "C" {

const char* hdsac_version(void) { return run::version(); }

const char* hdsac_last_error(void) { return g_last_error.c_str(); }

const char* hdsac_status_name(hdsac_status status) {
    switch (status) {
        case HDSAC_OK: return "ok";
        case HDSAC_ERR_INVALID_ARGUMENT: return "invalid argument";
        case HDSAC_ERR_CONFIG: return "configuration error";
        case HDSAC_ERR_FORMAT: return "format error";
        case HDSAC_ERR_IO: return "i/o error";
        case HDSAC_ERR_DIVERGENCE: return "training diverged";
        case HDSAC_ERR_CONTRACT: return "contract violation";
        case HDSAC_ERR_BUFFER_TOO_SMALL: return "buffer too small";
        case HDSAC_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

hdsac_status hdsac_config_new(hdsac_config** out) {
    if (!out) return null_argument("out");
    return guarded([&] { return make_config({}, out); });
}

hdsac_status hdsac_config_load(const char* path, hdsac_config** out) {
    if (!path) return null_argument("path");
    if (!out) return null_argument("out");
    return guarded([&] { return make_config(config::load(path), out); });
}

hdsac_status hdsac_config_parse(const char* text, hdsac_config** out) {
    if (!text) return null_argument("text");
    if (!out) return null_argument("out");
    return guarded([&] { return make_config(config::parse(text), out); });
}

hdsac_status hdsac_config_clone(const hdsac_config* cfg, hdsac_config** out) {
    if (!cfg) return null_argument("cfg");
    if (!out) return null_argument("out");
    return guarded([&] { return make_config(cfg->cfg, out); });
}

void hdsac_config_free(hdsac_config* cfg) { delete cfg; }

hdsac_status hdsac_config_set(hdsac_config* cfg, const char* key, const char* value) {
    if (!cfg) return null_argument("cfg");
    if (!key) return null_argument("key");
    if (!value) return null_argument("value");
    return guarded([&] {
        config::RunConfig updated = cfg->cfg;
        config::set(updated, key, value);
        cfg->cfg = std::move(updated);
        return HDSAC_OK;
    });
}

hdsac_status hdsac_config_get(const hdsac_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
    if (!cfg) return null_argument("cfg");
    if (!key) return null_argument("key");
    return guarded([&] { return copy_out(config::get(cfg->cfg, key), buf, cap, needed); });
}

hdsac_status hdsac_config_validate(const hdsac_config* cfg) {
    if (!cfg) return null_argument("cfg");
    return guarded([&] {
        cfg->cfg.validate();
        return HDSAC_OK;
    });
}

hdsac_status hdsac_config_serialize(const hdsac_config* cfg, char* buf, size_t cap, size_t* needed) {
    if (!cfg) return null_argument("cfg");
    return guarded([&] { return copy_out(config::serialize(cfg->cfg), buf, cap, needed); });
}

hdsac_status hdsac_config_save(const hdsac_config* cfg, const char* path) {
    if (!cfg) return null_argument("cfg");
    if (!path) return null_argument("path");
    return guarded([&] {
        config::save(cfg->cfg, path);
        return HDSAC_OK;
    });
}

size_t hdsac_config_key_count(void) { return config::keys().size(); }

const char* hdsac_config_key(size_t index) {
    static const std::vector<std::string> keys = config::keys();
    return index < keys.size() ? keys[index].c_str() : nullptr;
}

hdsac_status hdsac_config_run_dir(const hdsac_config* cfg, char* buf, size_t cap, size_t* needed) {
    if (!cfg) return null_argument("cfg");
    return guarded([&] { return copy_out(config::run_directory(cfg->cfg).string(), buf, cap, needed); });
}

hdsac_status hdsac_replay_config(const char* session_path, const char* config_path, hdsac_config** out) {
    if (!session_path) return null_argument("session_path");
    if (!out) return null_argument("out");
    return guarded([&] {
        std::optional<std::filesystem::path> cp;
        if (config_path) cp = config_path;
        return make_config(run::replay_config(session_path, cp), out);
    });
}

hdsac_status hdsac_checkpoint_config(const char* checkpoint_dir, hdsac_config** out) {
    if (!checkpoint_dir) return null_argument("checkpoint_dir");
    if (!out) return null_argument("out");
    return guarded([&] { return make_config(run::checkpoint_config(checkpoint_dir), out); });
}

hdsac_status hdsac_train(const hdsac_config* cfg, hdsac_line_fn on_metrics, void* user, hdsac_summary* out) {
    if (!cfg) return null_argument("cfg");
    return guarded([&] {
        run::LineSink sink;
        if (on_metrics) sink = [&](const std::string& line) { on_metrics(line.c_str(), user); };
        const auto report = run::train(cfg->cfg, sink);
        if (out) {
            hdsac_summary s{};
            s.algorithm = to_c(report.summary.algorithm);
            s.human_data = report.summary.human_data;
            s.total_data = report.summary.total_data;
            s.training_safety_cost = report.summary.training_safety_cost;
            if (report.summary.eval) {
                s.has_eval = 1;
                s.return_mean = report.summary.eval->return_mean;
                s.return_std = report.summary.eval->return_std;
                s.episodic_safety_cost = report.summary.eval->safety_cost;
                s.success_rate = report.summary.eval->success_rate;
            }
            *out = s;
        }
        return HDSAC_OK;
    });
}

hdsac_status hdsac_summary_header(char* buf, size_t cap, size_t* needed) {
    return guarded([&] { return copy_out(trainer::summary_header(), buf, cap, needed); });
}

hdsac_status hdsac_summary_row(const hdsac_summary* s, char* buf, size_t cap, size_t* needed) {
    if (!s) return null_argument("s");
    return guarded([&] { return copy_out(trainer::summary_row(from_c(*s)), buf, cap, needed); });
}

hdsac_status hdsac_evaluate(const hdsac_config* cfg, const char* checkpoint_dir, const uint64_t* seeds, size_t n_seeds,
                            hdsac_line_fn on_record, void* user, hdsac_eval_summary* out) {
    if (!cfg) return null_argument("cfg");
    if (!seeds && n_seeds > 0) return null_argument("seeds");
    if (n_seeds == 0) return fail(HDSAC_ERR_CONFIG, "evaluation needs at least one seed");
    return guarded([&] {
        std::optional<std::filesystem::path> ckpt;
        if (checkpoint_dir) ckpt = checkpoint_dir;
        const auto result = run::evaluate(cfg->cfg, ckpt, std::vector<std::uint64_t>(seeds, seeds + n_seeds));
        if (on_record) {
            for (const auto& e : result.episodes) on_record(run::episode_json(e).c_str(), user);
            on_record(run::eval_summary_json(result).c_str(), user);
        }
        if (out) *out = {result.episodes.size(), result.return_mean, result.return_std, result.safety_cost,
                         result.success_rate};
        return HDSAC_OK;
    });
}

hdsac_status hdsac_parse_seeds(const char* text, uint64_t* seeds, size_t cap, size_t* count) {
    if (!text) return null_argument("text");
    if (!count) return null_argument("count");
    return guarded([&] {
        const auto parsed = run::parse_seed_list(text);
        *count = parsed.size();
        if (!seeds) return HDSAC_OK;
        if (cap < parsed.size())
            return fail(HDSAC_ERR_BUFFER_TOO_SMALL, std::to_string(parsed.size()) + " seeds do not fit in " +
                                                        std::to_string(cap));
        std::copy(parsed.begin(), parsed.end(), seeds);
        return HDSAC_OK;
    });
}

hdsac_status hdsac_agent_load(const char* checkpoint_dir, const hdsac_config* cfg, hdsac_agent** out) {
    if (!checkpoint_dir) return null_argument("checkpoint_dir");
    if (!out) return null_argument("out");
    return guarded([&] {
        const config::RunConfig c = cfg ? cfg->cfg : run::checkpoint_config(checkpoint_dir);
        *out = new hdsac_agent{agents::load_agent(checkpoint_dir, c.train.algo, c.train.sac_q_alarm)};
        return HDSAC_OK;
    });
}

void hdsac_agent_free(hdsac_agent* agent) { delete agent; }

size_t hdsac_agent_obs_dim(const hdsac_agent* agent) {
    if (!agent) return 0;
    return static_cast<size_t>(agent->agent->actor().layers.front().weight.cols());
}

hdsac_status hdsac_agent_act(const hdsac_agent* agent, const float* obs, size_t n, double* steer, double* accel) {
    if (!agent) return null_argument("agent");
    if (!obs) return null_argument("obs");
    if (!steer || !accel) return null_argument("steer and accel");
    if (n != hdsac_agent_obs_dim(agent))
        return fail(HDSAC_ERR_INVALID_ARGUMENT, "observation has " + std::to_string(n) + " values, agent expects " +
                                                    std::to_string(hdsac_agent_obs_dim(agent)));
    return guarded([&] {
        nn::Vector<float> o = Eigen::Map<const nn::Vector<float>>(obs, static_cast<Eigen::Index>(n));
        const Action a = agent->agent->act_deterministic(o);
        *steer = a.steer;
        *accel = a.accel;
        return HDSAC_OK;
    });
}

hdsac_status hdsac_plot(const char* const* metrics_paths, const char* const* labels, size_t n_runs, const char* out_dir,
                        hdsac_line_fn on_file, void* user) {
    if (!metrics_paths && n_runs > 0) return null_argument("metrics_paths");
    if (!out_dir) return null_argument("out_dir");
    return guarded([&] {
        std::vector<plot::Run> runs;
        for (size_t i = 0; i < n_runs; ++i) {
            if (!metrics_paths[i]) return null_argument("metrics path");
            const std::filesystem::path p(metrics_paths[i]);
            std::string label = labels && labels[i] ? labels[i] : p.parent_path().filename().string();
            if (label.empty()) label = p.stem().string();
            runs.push_back({label, plot::load_metrics(p)});
        }
        for (const auto& path : plot::write_charts(plot::learning_curves(runs), out_dir)) {
            if (on_file) on_file(path.string().c_str(), user);
        }
        return HDSAC_OK;
    });
}

}  // extern "C"
