#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "calf/harness.hpp"

// Static SVG plot files: box plot of total costs, plan-view trajectories, and
// cost / J_hat / L traces against time.

namespace calf {

namespace svg {

class Canvas {
 public:
  Canvas(double width, double height) : w_(width), h_(height) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
        << "\" viewBox=\"0 0 " << w_ << " " << h_ << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& color = "black",
            double width = 1.0) {
    os_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
        << "\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& stroke,
            const std::string& fill = "none") {
    os_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
        << "\" stroke=\"" << stroke << "\" fill=\"" << fill << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                double width = 1.0) {
    os_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
        << "\" points=\"";
    for (const auto& [x, y] : pts) os_ << x << "," << y << " ";
    os_ << "\"/>\n";
  }
  void circle(double cx, double cy, double r, const std::string& color) {
    os_ << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r << "\" fill=\"" << color
        << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, int size = 12) {
    os_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
        << "\" font-family=\"sans-serif\">" << s << "</text>\n";
  }
  void save(const std::filesystem::path& path) {
    os_ << "</svg>\n";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write plot: " + path.string());
    const std::string s = os_.str();
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  double w_, h_;
  std::ostringstream os_;
};

struct AxisMap {
  double lo = 0.0, hi = 1.0, pix_lo = 0.0, pix_hi = 1.0;
  double operator()(double v) const {
    const double span = hi - lo;
    const double t = span > 0 ? (v - lo) / span : 0.5;
    return pix_lo + t * (pix_hi - pix_lo);
  }
};

}  // namespace svg

struct BoxGroup {
  std::string name;
  Stats stats;
  std::vector<double> values;
};

inline void plot_boxes(const std::vector<BoxGroup>& groups, const std::filesystem::path& path,
                       const std::string& title) {
  const double w = 160.0 * groups.size() + 120.0, h = 420.0;
  svg::Canvas canvas(w, h);
  double vmax = -1e300, vmin = 1e300;
  for (const auto& g : groups) {
    for (double v : g.values) {
      vmax = std::max(vmax, v);
      vmin = std::min(vmin, v);
    }
  }
  if (vmin > vmax) {
    vmin = 0;
    vmax = 1;
  }
  const double pad = 0.05 * std::max(1e-12, vmax - vmin);
  svg::AxisMap ymap{vmin - pad, vmax + pad, h - 50.0, 40.0};
  canvas.text(20, 24, title, 14);
  canvas.line(60, 40, 60, h - 50, "black");
  for (int i = 0; i < 5; ++i) {
    const double v = vmin + (vmax - vmin) * i / 4.0;
    const double y = ymap(v);
    canvas.line(55, y, 60, y);
    std::ostringstream lab;
    lab.precision(4);
    lab << v;
    canvas.text(4, y + 4, lab.str(), 10);
  }
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const double cx = 140.0 + 160.0 * gi;
    const double half = 40.0;
    const auto& s = g.stats;
    canvas.line(cx, ymap(s.whisker_lo), cx, ymap(s.q1), "black");
    canvas.line(cx, ymap(s.q3), cx, ymap(s.whisker_hi), "black");
    canvas.line(cx - half / 2, ymap(s.whisker_lo), cx + half / 2, ymap(s.whisker_lo), "black");
    canvas.line(cx - half / 2, ymap(s.whisker_hi), cx + half / 2, ymap(s.whisker_hi), "black");
    canvas.rect(cx - half, ymap(s.q3), 2 * half, ymap(s.q1) - ymap(s.q3), "black");
    canvas.line(cx - half, ymap(s.median), cx + half, ymap(s.median), "crimson", 2.0);
    for (double v : g.values) canvas.circle(cx + half + 12, ymap(v), 2, "steelblue");
    canvas.text(cx - half, h - 28, g.name, 12);
  }
  canvas.save(path);
}

inline void plot_plan_view(const std::vector<CsvTable>& tables, const nlohmann::json& summary,
                           const std::filesystem::path& path) {
  svg::Canvas canvas(520, 520);
  double lo = -1.4, hi = 1.4;
  for (const auto& t : tables) {
    const int cx1 = t.column("x1"), cx2 = t.column("x2");
    for (const auto& r : t.rows) {
      lo = std::min({lo, r[cx1], r[cx2]});
      hi = std::max({hi, r[cx1], r[cx2]});
    }
  }
  svg::AxisMap xmap{lo, hi, 30.0, 490.0};
  svg::AxisMap ymap{lo, hi, 490.0, 30.0};
  canvas.text(16, 20, "plan view (x1, x2)", 13);
  canvas.line(xmap(lo), ymap(0), xmap(hi), ymap(0), "#cccccc");
  canvas.line(xmap(0), ymap(lo), xmap(0), ymap(hi), "#cccccc");
  const char* colors[] = {"steelblue", "darkorange", "seagreen", "crimson",
                          "slateblue", "peru",       "teal",     "magenta"};
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& t = tables[i];
    const int cx1 = t.column("x1"), cx2 = t.column("x2");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); r += 5)
      pts.emplace_back(xmap(t.rows[r][cx1]), ymap(t.rows[r][cx2]));
    canvas.polyline(pts, colors[i % 8]);
  }
  if (summary.contains("runs"))
    canvas.circle(xmap(0), ymap(0), 4, "black");
  canvas.save(path);
}

inline void plot_traces(const CsvTable& t, int substeps, const std::filesystem::path& path) {
  svg::Canvas canvas(820, 640);
  const int ct = t.column("t");
  const char* names[] = {"r", "J_hat", "L"};
  const char* colors[] = {"crimson", "steelblue", "seagreen"};
  for (int p = 0; p < 3; ++p) {
    const int col = t.column(names[p]);
    double lo = 1e300, hi = -1e300, tmax = 0.0;
    for (std::size_t r = 0; r < t.rows.size(); r += substeps) {
      lo = std::min(lo, t.rows[r][col]);
      hi = std::max(hi, t.rows[r][col]);
      tmax = std::max(tmax, t.rows[r][ct]);
    }
    if (lo > hi) continue;
    const double y0 = 30.0 + 200.0 * p;
    svg::AxisMap xmap{0.0, tmax, 60.0, 800.0};
    svg::AxisMap ymap{lo, hi == lo ? lo + 1 : hi, y0 + 170.0, y0 + 10.0};
    canvas.text(8, y0 + 10, names[p], 12);
    canvas.line(60, y0 + 170, 800, y0 + 170, "#999999");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t r = 0; r < t.rows.size(); r += substeps)
      pts.emplace_back(xmap(t.rows[r][ct]), ymap(t.rows[r][col]));
    canvas.polyline(pts, colors[p]);
  }
  canvas.save(path);
}

// Emits the plot files for a summary JSON (single-config or comparison). CSVs
// are resolved relative to the summary's directory. Returns the written paths.
inline std::vector<std::string> emit_plots(const nlohmann::json& summary,
                                           const std::filesystem::path& summary_dir,
                                           const std::filesystem::path& out_dir) {
  std::vector<std::string> written;
  std::vector<BoxGroup> groups;
  std::vector<std::string> csvs;
  int substeps = 10;

  if (summary.contains("rows")) {  // comparison shape
    for (const auto& row : summary["rows"]) {
      BoxGroup g;
      g.name = row.value("agent", "?") + "/" + row.value("h", "?");
      g.stats.n = row.value("n", 0L);
      g.stats.mean = row.value("mean", 0.0);
      g.stats.q1 = row.value("q1", 0.0);
      g.stats.median = row.value("median", 0.0);
      g.stats.q3 = row.value("q3", 0.0);
      g.stats.whisker_lo = row.value("whisker_lo", 0.0);
      g.stats.whisker_hi = row.value("whisker_hi", 0.0);
      groups.push_back(g);
    }
  } else if (summary.contains("runs") && !summary["runs"].empty()) {
    BoxGroup g;
    g.name = summary.value("agent", "?") + "/" + summary.value("h", "?");
    substeps = summary.value("substeps", 10);
    for (const auto& run : summary["runs"]) {
      g.values.push_back(run.value("total_cost", 0.0));
      if (run.contains("csv") && !run["csv"].get<std::string>().empty())
        csvs.push_back(run["csv"].get<std::string>());
    }
    g.stats = compute_stats(g.values);
    groups.push_back(g);
  }

  if (groups.empty()) {
    std::cerr << "emit_plots: summary holds no runs, nothing to plot\n";
    return written;
  }

  std::filesystem::create_directories(out_dir);
  const auto box_path = out_dir / "box_costs.svg";
  plot_boxes(groups, box_path, "accumulated running cost");
  written.push_back(box_path.string());

  if (!csvs.empty()) {
    std::vector<CsvTable> tables;
    for (std::size_t i = 0; i < csvs.size() && i < 8; ++i)
      tables.push_back(read_csv((summary_dir / csvs[i]).string()));
    const auto plan_path = out_dir / "trajectory_plan.svg";
    plot_plan_view(tables, summary, plan_path);
    written.push_back(plan_path.string());
    const auto traces_path = out_dir / "traces.svg";
    plot_traces(tables[0], substeps, traces_path);
    written.push_back(traces_path.string());
  }
  return written;
}

}  // namespace calf
