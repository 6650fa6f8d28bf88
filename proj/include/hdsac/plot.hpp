#pragma once

// Reads metrics logs back and renders learning curves: takeover rate and
// cumulative training collisions per window, evaluation return per eval.
// Each curve is written as an SVG and a tab-separated table.

#include "hdsac/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hdsac::plot {

/// Parses a metrics log. Throws FormatError naming `source` and the line.
trainer::MetricsLog parse_metrics(std::istream& in, const std::string& source);
trainer::MetricsLog load_metrics(const std::filesystem::path& path);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Chart {
    std::string name;  // file stem
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

struct Run {
    std::string label;
    trainer::MetricsLog log;
};

/// takeover_rate, training_safety_cost and eval_return charts; values are
/// copied from the records without smoothing.
std::vector<Chart> learning_curves(const std::vector<Run>& runs);

std::string render_svg(const Chart& chart);
/// One row per x value with one column per series; missing points are empty.
std::string render_table(const Chart& chart);

/// Writes <name>.svg and <name>.tsv per chart and returns the written paths.
std::vector<std::filesystem::path> write_charts(const std::vector<Chart>& charts, const std::filesystem::path& out_dir);

}  // namespace hdsac::plot
