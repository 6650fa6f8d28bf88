#include "hdsac/plot.hpp"

#include "hdsac/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace hdsac::plot {

using json = nlohmann::json;

namespace {

std::string exact(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::optional<double> opt_number(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

/// Rounds a tick spacing to 1, 2 or 5 times a power of ten.
double nice_step(double span, int target_ticks) {
    const double raw = span / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

trainer::MetricsLog parse_metrics(std::istream& in, const std::string& source) {
    trainer::MetricsLog log;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            const int version = j.at("version").get<int>();
            if (version != trainer::kMetricsSchemaVersion)
                throw FormatError("metrics schema version " + std::to_string(version) + " not supported");
            const std::string type = j.at("type").get<std::string>();
            if (type == "window") {
                trainer::WindowRecord w;
                w.index = j.at("index").get<std::int64_t>();
                w.step_end = j.at("step_end").get<std::int64_t>();
                w.steps = j.at("steps").get<int>();
                w.takeover_rate = j.at("takeover_rate").get<double>();
                w.cost = j.at("cost").get<double>();
                w.cumulative_cost = j.at("cumulative_cost").get<double>();
                w.human_steps = j.at("human_steps").get<std::int64_t>();
                w.total_steps = j.at("total_steps").get<std::int64_t>();
                w.q_human = opt_number(j, "q_human");
                w.q_novice = opt_number(j, "q_novice");
                w.episodes = j.at("episodes").get<int>();
                w.successes = j.at("successes").get<int>();
                w.updates = j.at("updates").get<int>();
                w.pv_loss = j.at("pv_loss").get<double>();
                w.td_loss = j.at("td_loss").get<double>();
                w.policy_loss = j.at("policy_loss").get<double>();
                w.alpha = j.at("alpha").get<double>();
                log.windows.push_back(w);
            } else if (type == "eval") {
                trainer::EvalRecord e;
                e.step = j.at("step").get<std::int64_t>();
                e.result.return_mean = j.at("return_mean").get<double>();
                e.result.return_std = j.at("return_std").get<double>();
                e.result.safety_cost = j.at("safety_cost").get<double>();
                e.result.success_rate = j.at("success_rate").get<double>();
                for (const auto& ep : j.at("episodes")) {
                    trainer::EpisodeResult r;
                    r.seed = ep.at("seed").get<std::uint64_t>();
                    r.episode_return = ep.at("return").get<double>();
                    r.cost = ep.at("cost").get<double>();
                    r.steps = ep.at("steps").get<int>();
                    const std::string t = ep.at("termination").get<std::string>();
                    bool known = false;
                    for (auto term : {sim::Termination::none, sim::Termination::destination, sim::Termination::off_road,
                                      sim::Termination::collision_limit, sim::Termination::timeout}) {
                        if (t == sim::to_string(term)) {
                            r.termination = term;
                            known = true;
                        }
                    }
                    if (!known) throw FormatError("unknown termination '" + t + "'");
                    e.result.episodes.push_back(r);
                }
                log.evals.push_back(std::move(e));
            } else if (type == "summary") {
                trainer::Summary& s = log.summary;
                s.algorithm = agents::parse_algorithm(j.at("algorithm").get<std::string>());
                s.human_data = j.at("human_data").get<std::int64_t>();
                s.total_data = j.at("total_data").get<std::int64_t>();
                s.training_safety_cost = j.at("training_safety_cost").get<double>();
                if (!j.at("return_mean").is_null()) {
                    trainer::EvalResult r;
                    r.return_mean = j.at("return_mean").get<double>();
                    r.return_std = j.at("return_std").get<double>();
                    r.safety_cost = j.at("episodic_safety_cost").get<double>();
                    r.success_rate = j.at("success_rate").get<double>();
                    s.eval = r;
                }
            } else {
                throw FormatError("unknown record type '" + type + "'");
            }
        } catch (const std::exception& e) {
            throw FormatError(source + ":" + std::to_string(line_no) + ": malformed metrics record: " + e.what());
        }
    }
    return log;
}

trainer::MetricsLog load_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read metrics file " + path.string());
    return parse_metrics(in, path.string());
}

std::vector<Chart> learning_curves(const std::vector<Run>& runs) {
    Chart takeover{"takeover_rate", "Takeover rate per window", "step", "takeover rate", {}};
    Chart cost{"training_safety_cost", "Training safety cost", "step", "cumulative collisions", {}};
    Chart ret{"eval_return", "Evaluation return", "step", "episodic return (mean)", {}};
    for (const auto& run : runs) {
        Series t{run.label, {}, {}}, c{run.label, {}, {}}, r{run.label, {}, {}};
        for (const auto& w : run.log.windows) {
            t.x.push_back(static_cast<double>(w.step_end));
            t.y.push_back(w.takeover_rate);
            c.x.push_back(static_cast<double>(w.step_end));
            c.y.push_back(w.cumulative_cost);
        }
        for (const auto& e : run.log.evals) {
            r.x.push_back(static_cast<double>(e.step));
            r.y.push_back(e.result.return_mean);
        }
        takeover.series.push_back(std::move(t));
        cost.series.push_back(std::move(c));
        ret.series.push_back(std::move(r));
    }
    return {takeover, cost, ret};
}

std::string render_svg(const Chart& chart) {
    constexpr double W = 720, H = 440, left = 70, right = 170, top = 40, bottom = 55;
    const double pw = W - left - right, ph = H - top - bottom;

    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool any = false;
    for (const auto& s : chart.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!any) {
                x0 = x1 = s.x[i];
                y0 = y1 = s.y[i];
                any = true;
            }
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (any) {
        x0 = std::min(x0, 0.0);
        y0 = std::min(y0, 0.0);
        if (x1 <= x0) x1 = x0 + 1;
        if (y1 <= y0) y1 = y0 + 1;
    }
    const double xs = nice_step(x1 - x0, 6), ys = nice_step(y1 - y0, 5);
    x1 = std::ceil(x1 / xs) * xs;
    y1 = std::ceil(y1 / ys) * ys;
    x0 = std::floor(x0 / xs) * xs;
    y0 = std::floor(y0 / ys) * ys;
    const auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    const auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(chart.title)
      << "</text>\n";
    for (double t = x0; t <= x1 + xs * 1e-9; t += xs) {
        o << "<line x1=\"" << px(t) << "\" y1=\"" << top << "\" x2=\"" << px(t) << "\" y2=\"" << top + ph
          << "\" stroke=\"#e5e5e5\"/>\n";
        o << "<text x=\"" << px(t) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
    }
    for (double t = y0; t <= y1 + ys * 1e-9; t += ys) {
        o << "<line x1=\"" << left << "\" y1=\"" << py(t) << "\" x2=\"" << left + pw << "\" y2=\"" << py(t)
          << "\" stroke=\"#e5e5e5\"/>\n";
        o << "<text x=\"" << left - 6 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
    }
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape_xml(chart.x_label)
      << "</text>\n";
    o << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape_xml(chart.y_label) << "</text>\n";
    if (!any) {
        o << "<text x=\"" << left + pw / 2 << "\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" fill=\"#888\">no data</text>\n";
    }
    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        if (!s.x.empty()) {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << px(s.x[i]) << ',' << py(s.y[i]);
            o << "\"/>\n";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
        }
        const double ly = top + 14 + 18.0 * static_cast<double>(k);
        o << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 36 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << escape_xml(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string render_table(const Chart& chart) {
    std::map<double, std::vector<std::optional<double>>> rows;
    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            auto& row = rows[s.x[i]];
            row.resize(chart.series.size());
            row[k] = s.y[i];
        }
    }
    std::ostringstream o;
    o << chart.x_label;
    for (const auto& s : chart.series) o << '\t' << s.label;
    o << '\n';
    for (auto& [x, ys] : rows) {
        ys.resize(chart.series.size());
        o << exact(x);
        for (const auto& y : ys) o << '\t' << (y ? exact(*y) : "");
        o << '\n';
    }
    return o.str();
}

std::vector<std::filesystem::path> write_charts(const std::vector<Chart>& charts, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create plot directory " + out_dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    for (const auto& c : charts) {
        for (const auto& [ext, text] : {std::pair{".svg", render_svg(c)}, std::pair{".tsv", render_table(c)}}) {
            const auto path = out_dir / (c.name + ext);
            std::ofstream out(path);
            out << text;
            if (!out) throw IoError("cannot write " + path.string());
            written.push_back(path);
        }
    }
    return written;
}

}  // namespace hdsac::plot
