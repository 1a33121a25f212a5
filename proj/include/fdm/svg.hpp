#pragma once

// Minimal SVG emitters for scheme grids, task-sample grids, and histograms.

#include <cstdio>
#include <string>
#include <vector>

#include "fdm/schemes.hpp"
#include "fdm/taskdist.hpp"

namespace fdm {

namespace svg_detail {

constexpr int kCell = 10;
constexpr const char* kLatentColor = "#4878cf";    // blue: sampled this row
constexpr const char* kObservedColor = "#d65f5f";  // red: conditioned on
constexpr const char* kOtherColor = "#ffffff";     // white: not involved

inline void open(std::string& out, int width, int height) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\">\n",
                  width, height);
    out += buf;
}

inline void cell(std::string& out, int col, int row, const char* color) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\" "
                  "stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n",
                  col * kCell, row * kCell, kCell, kCell, color);
    out += buf;
}

}  // namespace svg_detail

// One row per stage, one column per frame: latent blue, observed red,
// everything else white.
inline std::string render_scheme_svg(const SamplingScheme& scheme) {
    using namespace svg_detail;
    std::string out;
    open(out, scheme.n_frames * kCell, int(scheme.stages.size()) * kCell);
    for (std::size_t s = 0; s < scheme.stages.size(); ++s) {
        std::vector<const char*> colors(std::size_t(scheme.n_frames), kOtherColor);
        for (int y : scheme.stages[s].observed) colors[std::size_t(y)] = kObservedColor;
        for (int x : scheme.stages[s].latents) colors[std::size_t(x)] = kLatentColor;
        for (int f = 0; f < scheme.n_frames; ++f) cell(out, f, int(s), colors[std::size_t(f)]);
    }
    out += "</svg>\n";
    return out;
}

// One row per task sample.
inline std::string render_tasks_svg(const std::vector<TaskSample>& tasks) {
    using namespace svg_detail;
    std::string out;
    int n = tasks.empty() ? 0 : tasks[0].n_frames;
    open(out, n * kCell, int(tasks.size()) * kCell);
    for (std::size_t r = 0; r < tasks.size(); ++r) {
        std::vector<const char*> colors(std::size_t(n), kOtherColor);
        for (int y : tasks[r].observed) colors[std::size_t(y)] = kObservedColor;
        for (int x : tasks[r].latents) colors[std::size_t(x)] = kLatentColor;
        for (int f = 0; f < n; ++f) cell(out, f, int(r), colors[std::size_t(f)]);
    }
    out += "</svg>\n";
    return out;
}

// Vertical bars, normalized to the tallest bin.
inline std::string render_histogram_svg(const std::vector<double>& bins, int bar_width = 8,
                                        int height = 120) {
    std::string out;
    svg_detail::open(out, int(bins.size()) * bar_width, height);
    double peak = 1e-12;
    for (double b : bins) peak = std::max(peak, b);
    char buf[160];
    for (std::size_t i = 0; i < bins.size(); ++i) {
        int h = int(double(height) * bins[i] / peak);
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"#4878cf\"/>\n",
                      int(i) * bar_width, height - h, bar_width - 1, h);
        out += buf;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace fdm
