#include "hdsac/errors.hpp"
#include "hdsac/plot.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hdsac;
namespace fs = std::filesystem;

namespace {

std::string window_line(int index, double takeover, double cumulative_cost) {
    std::ostringstream o;
    o.precision(17);
    o << R"({"type":"window","version":1,"index":)" << index << R"(,"step_end":)" << (index + 1) * 100
      << R"(,"steps":100,"takeover_rate":)" << takeover << R"(,"cost":0.0,"cumulative_cost":)" << cumulative_cost
      << R"(,"human_steps":10,"total_steps":100,"q_human":0.5,"q_novice":null,"episodes":1,"successes":1,)"
      << R"("updates":0,"pv_loss":0.0,"td_loss":0.0,"policy_loss":0.0,"alpha":0.01})";
    return o.str();
}

const char* kEvalLine =
    R"({"type":"eval","version":1,"step":200,"return_mean":12.5,"return_std":1.0,"safety_cost":0.0,)"
    R"("success_rate":1.0,"episodes":[{"seed":5,"return":12.5,"cost":0.0,"steps":40,"termination":"destination"}]})";

trainer::MetricsLog parse(const std::string& text) {
    std::istringstream in(text);
    return plot::parse_metrics(in, "m.jsonl");
}

std::string parse_error(const std::string& text) {
    try {
        parse(text);
    } catch (const FormatError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(PlotParse, ReadsWindowsAndEvals) {
    const auto log = parse(window_line(0, 0.9, 1) + "\n" + window_line(1, 0.4, 2) + "\n" + kEvalLine + "\n");
    ASSERT_EQ(log.windows.size(), 2u);
    EXPECT_EQ(log.windows[1].takeover_rate, 0.4);
    EXPECT_FALSE(log.windows[0].q_novice.has_value());
    ASSERT_EQ(log.evals.size(), 1u);
    EXPECT_EQ(log.evals[0].result.return_mean, 12.5);
}

TEST(PlotParse, MalformedLineNamesSourceAndLine) {
    const auto msg = parse_error(window_line(0, 0.5, 0) + "\n\n{not json\n");
    EXPECT_NE(msg.find("m.jsonl:3"), std::string::npos) << msg;
}

TEST(PlotParse, RejectsMissingFieldsUnknownTypesAndVersions) {
    EXPECT_NE(parse_error(R"({"type":"window","version":1})").find(":1"), std::string::npos);
    EXPECT_NE(parse_error(R"({"type":"bogus","version":1})").find("bogus"), std::string::npos);
    EXPECT_NE(parse_error(R"({"type":"window","version":99})").find("version"), std::string::npos);
    std::string bad_term = kEvalLine;
    bad_term.replace(bad_term.find("destination"), 11, "teleported");
    EXPECT_NE(parse_error(window_line(0, 1, 0) + "\n" + bad_term).find(":2"), std::string::npos);
}

TEST(PlotCurves, ValuesAreCopiedExactly) {
    // Awkward binary fractions survive the whole path without smoothing.
    const double a = 0.1 + 0.2, b = 1.0 / 3.0;
    const auto log = parse(window_line(0, a, 0) + "\n" + window_line(1, b, 3) + "\n");
    const auto charts = plot::learning_curves({{"run", log}});
    ASSERT_EQ(charts.size(), 3u);
    EXPECT_EQ(charts[0].name, "takeover_rate");
    EXPECT_EQ(charts[0].series[0].y, (std::vector<double>{a, b}));
    EXPECT_EQ(charts[1].series[0].y, (std::vector<double>{0, 3}));

    const std::string table = plot::render_table(charts[0]);
    std::istringstream rows(table);
    std::string header, r0, r1;
    std::getline(rows, header);
    std::getline(rows, r0);
    std::getline(rows, r1);
    EXPECT_EQ(header, "step\trun");
    EXPECT_EQ(std::stod(r0.substr(r0.find('\t') + 1)), a);
    EXPECT_EQ(std::stod(r1.substr(r1.find('\t') + 1)), b);
}

TEST(PlotCurves, TwoRunsAreOverlaid) {
    const auto one = parse(window_line(0, 0.9, 0) + "\n" + window_line(1, 0.5, 0) + "\n");
    const auto two = parse(window_line(0, 0.8, 0) + "\n");
    const auto charts = plot::learning_curves({{"first", one}, {"second", two}});
    for (const auto& c : charts) ASSERT_EQ(c.series.size(), 2u);
    const std::string svg = plot::render_svg(charts[0]);
    EXPECT_NE(svg.find("first"), std::string::npos);
    EXPECT_NE(svg.find("second"), std::string::npos);
    size_t polylines = 0;
    for (size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
    EXPECT_EQ(polylines, 2u);
    // The shorter run leaves its cell empty on rows it has no point for.
    EXPECT_NE(plot::render_table(charts[0]).find("200\t0.5\t\n"), std::string::npos) << plot::render_table(charts[0]);
}

TEST(PlotCurves, EmptyLogGivesEmptyCharts) {
    const auto charts = plot::learning_curves({{"empty", parse("")}});
    const fs::path dir = fs::temp_directory_path() / "hdsac_test_plot_empty";
    fs::remove_all(dir);
    const auto files = plot::write_charts(charts, dir);
    EXPECT_EQ(files.size(), 6u);
    for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;
    std::ifstream svg(dir / "takeover_rate.svg");
    std::stringstream ss;
    ss << svg.rdbuf();
    EXPECT_NE(ss.str().find("no data"), std::string::npos);
    fs::remove_all(dir);
}

TEST(PlotCurves, LabelsAreEscaped) {
    plot::Chart c{"x", "a<b", "step", "y", {{"r&d", {1}, {2}}}};
    const std::string svg = plot::render_svg(c);
    EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
    EXPECT_NE(svg.find("r&amp;d"), std::string::npos);
}

TEST(PlotIo, MissingFileIsAnIoError) {
    EXPECT_THROW(plot::load_metrics("/nonexistent/metrics.jsonl"), IoError);
}
