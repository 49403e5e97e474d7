#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "vsop3d/eval/stats.hpp"

namespace vsop3d {

struct AgentReport {
  std::string label;
  RunMatrix matrix;
  AggregateMetrics metrics;
};

// Published aggregate test scores (VSOP -> VSOP-3D+) on the full 16-game
// benchmark, reported next to local results for qualitative comparison only.
struct PublishedReference {
  const char* metric;
  double baseline;
  double scaled;
  double relative_change_percent;
};
const std::vector<PublishedReference>& published_reference();

// {"agents": [...], "comparisons": [...], "published_reference": [...]}.
// Comparisons list relative changes of every agent against `baseline_label`
// when that agent is present.
nlohmann::ordered_json metrics_report(const std::vector<AgentReport>& agents, const std::string& baseline_label);

// Inverse of the "agents" section of metrics_report.
std::vector<AgentReport> agent_reports_from_json(const nlohmann::ordered_json& report);

// Grouped bar chart, one group per metric and one bar per agent, with
// whiskers at the interval bounds. Layout constants live in report.cpp; the
// output depends only on the inputs.
std::string render_svg(const std::vector<AgentReport>& agents);

}  // namespace vsop3d
