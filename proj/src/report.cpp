#include "vsop3d/eval/report.hpp"

#include <cstdio>
#include <sstream>

namespace vsop3d {

const std::vector<PublishedReference>& published_reference() {
  static const std::vector<PublishedReference> values{
      {"median", 0.44, 0.75, 65.9},
      {"iqm", 0.43, 0.70, 62.8},
      {"mean", 0.42, 0.64, 52.5},
      {"optimality_gap", 0.58, 0.36, -37.9},
  };
  return values;
}

nlohmann::ordered_json metrics_report(const std::vector<AgentReport>& agents, const std::string& baseline_label) {
  nlohmann::ordered_json out;
  out["agents"] = nlohmann::ordered_json::array();
  const AgentReport* baseline = nullptr;
  for (const auto& a : agents) {
    if (a.label == baseline_label) baseline = &a;
    nlohmann::ordered_json entry;
    entry["label"] = a.label;
    entry["num_seeds"] = a.matrix.num_seeds();
    entry["envs"] = a.matrix.env_names;
    entry["seeds"] = a.matrix.seed_ids;
    entry["scores"] = a.matrix.scores;
    for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
      const Metric m = kAllMetrics[k];
      entry["metrics"][to_string(m)] = {{"point", a.metrics.point.get(m)},
                                        {"ci_low", a.metrics.ci[k].low},
                                        {"ci_high", a.metrics.ci[k].high},
                                        {"degenerate_ci", a.metrics.ci[k].degenerate}};
    }
    out["agents"].push_back(entry);
  }
  out["comparisons"] = nlohmann::ordered_json::array();
  if (baseline != nullptr) {
    for (const auto& a : agents) {
      if (&a == baseline) continue;
      nlohmann::ordered_json cmp;
      cmp["baseline"] = baseline->label;
      cmp["agent"] = a.label;
      for (Metric m : kAllMetrics) {
        const double b = baseline->metrics.point.get(m), v = a.metrics.point.get(m);
        cmp["relative_change_percent"][to_string(m)] = b != 0.0 ? nlohmann::ordered_json(100.0 * (v - b) / b)
                                                                : nlohmann::ordered_json(nullptr);
      }
      out["comparisons"].push_back(cmp);
    }
  }
  out["published_reference"]["note"] =
      "Published VSOP vs VSOP-3D+ aggregate test scores on the full 16-game benchmark at 25M steps. "
      "Reference values for qualitative comparison only; not thresholds.";
  for (const auto& r : published_reference()) {
    out["published_reference"]["metrics"][r.metric] = {{"vsop", r.baseline},
                                                       {"vsop3d_plus", r.scaled},
                                                       {"relative_change_percent", r.relative_change_percent}};
  }
  return out;
}

namespace {

// Canvas and plot-area geometry in SVG user units.
constexpr double kGroupWidth = 180.0;
constexpr double kLeft = 60.0;
constexpr double kTop = 40.0;
constexpr double kPlotHeight = 220.0;
constexpr double kBottom = 70.0;
constexpr const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

double y_of(double value) {
  const double clamped = value < 0.0 ? 0.0 : (value > 1.0 ? 1.0 : value);
  return kTop + kPlotHeight * (1.0 - clamped);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const std::vector<AgentReport>& agents) {
  const double width = kLeft + kGroupWidth * static_cast<double>(kAllMetrics.size()) + 20.0;
  const double height = kTop + kPlotHeight + kBottom;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"white\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = 0.25 * tick;
    svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y_of(v)) << "\" x2=\"" << num(width - 20.0) << "\" y2=\""
        << num(y_of(v)) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << num(kLeft - 6.0) << "\" y=\"" << num(y_of(v) + 4.0) << "\" text-anchor=\"end\">" << num(v)
        << "</text>\n";
  }
  const double n = static_cast<double>(std::max<std::size_t>(agents.size(), 1));
  const double bar = (kGroupWidth - 40.0) / n;
  for (std::size_t g = 0; g < kAllMetrics.size(); ++g) {
    const Metric m = kAllMetrics[g];
    const double x0 = kLeft + kGroupWidth * static_cast<double>(g) + 20.0;
    svg << "<g id=\"" << to_string(m) << "\">\n";
    for (std::size_t a = 0; a < agents.size(); ++a) {
      const double point = agents[a].metrics.point.get(m);
      const Interval& ci = agents[a].metrics.ci[g];
      const double x = x0 + bar * static_cast<double>(a);
      const double cx = x + 0.5 * bar;
      svg << "<rect x=\"" << num(x + 2.0) << "\" y=\"" << num(y_of(point)) << "\" width=\"" << num(bar - 4.0)
          << "\" height=\"" << num(y_of(0.0) - y_of(point)) << "\" fill=\"" << kPalette[a % 6] << "\"/>\n";
      svg << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y_of(ci.low)) << "\" x2=\"" << num(cx) << "\" y2=\""
          << num(y_of(ci.high)) << "\" stroke=\"black\"/>\n";
      for (double v : {ci.low, ci.high}) {
        svg << "<line x1=\"" << num(cx - 4.0) << "\" y1=\"" << num(y_of(v)) << "\" x2=\"" << num(cx + 4.0)
            << "\" y2=\"" << num(y_of(v)) << "\" stroke=\"black\"/>\n";
      }
    }
    svg << "<text x=\"" << num(x0 + 0.5 * (kGroupWidth - 40.0)) << "\" y=\"" << num(y_of(0.0) + 18.0)
        << "\" text-anchor=\"middle\">" << to_string(m) << "</text>\n";
    svg << "</g>\n";
  }
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const double x = kLeft + 110.0 * static_cast<double>(a);
    const double y = height - 22.0;
    svg << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 9.0) << "\" width=\"10\" height=\"10\" fill=\""
        << kPalette[a % 6] << "\"/>\n";
    svg << "<text x=\"" << num(x + 14.0) << "\" y=\"" << num(y) << "\">" << escape(agents[a].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<AgentReport> agent_reports_from_json(const nlohmann::ordered_json& report) {
  std::vector<AgentReport> out;
  for (const auto& entry : report.at("agents")) {
    AgentReport a;
    a.label = entry.at("label").get<std::string>();
    a.matrix.env_names = entry.at("envs").get<std::vector<std::string>>();
    a.matrix.seed_ids = entry.at("seeds").get<std::vector<std::uint64_t>>();
    a.matrix.scores = entry.at("scores").get<std::vector<double>>();
    a.matrix.validate();
    for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
      const auto& m = entry.at("metrics").at(to_string(kAllMetrics[k]));
      a.metrics.point.set(kAllMetrics[k], m.at("point").get<double>());
      a.metrics.ci[k] = {m.at("ci_low").get<double>(), m.at("ci_high").get<double>(),
                         m.at("degenerate_ci").get<bool>()};
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace vsop3d
