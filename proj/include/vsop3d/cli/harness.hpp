#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsop3d/cli/config.hpp"
#include "vsop3d/eval/report.hpp"
#include "vsop3d/io/metrics_io.hpp"

namespace vsop3d {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kArtifactVersion = 1;

enum class RunStatus { kPending, kRunning, kDone, kFailed };
std::string to_string(RunStatus status);
RunStatus parse_run_status(const std::string& text);

struct RunEntry {
  std::string env;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::kPending;
  std::int64_t steps = 0;
  std::int64_t updates = 0;
  std::optional<double> final_score;
  std::string error;

  // Paths relative to the run directory.
  std::string metrics_path() const;
  std::string updates_path() const;
  std::string checkpoint_path() const;
};

struct Manifest {
  int artifact_version = kArtifactVersion;
  std::string config_hash;
  std::string label;
  nlohmann::ordered_json config;
  std::vector<RunEntry> runs;
  std::vector<std::string> files;  // sorted, relative, includes manifest.json

  nlohmann::ordered_json to_json() const;
  static Manifest from_json(const nlohmann::ordered_json& j);
  static Manifest load(const std::string& run_dir);
  RunEntry* find(const std::string& env, std::uint64_t seed);
};

using LogFn = std::function<void(const std::string&)>;

struct TrainCommandOptions {
  // Continue unfinished runs from their last checkpoint instead of restarting.
  bool resume = false;
  LogFn log;
};

// Trains every (env, seed) pair of the config into config.output_dir and
// returns the final manifest. Completed runs with a matching config hash are
// kept. A directory holding a different configuration is refused. Runs that
// fail are marked failed; the remaining runs still execute.
Manifest cmd_train(const RunConfig& config, const TrainCommandOptions& options = {});

// Configuration as written to config.json and the manifest: output_dir and
// workers are omitted so identical configs produce identical bytes.
nlohmann::ordered_json portable_config_json(const RunConfig& config);

// Mean normalized return over the last `window` test episodes, or over the
// last `window` evaluation rounds' means when unit is kEvaluations.
double test_final_score(const std::vector<MetricRow>& rows, std::int64_t window, WindowUnit unit);

struct AggregateOptions {
  std::string output_dir;       // receives report.json, figure.svg, manifest.json
  std::int64_t window = 0;      // 0: each run directory's configured window
  std::int64_t resamples = 2000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  BootstrapMode mode = BootstrapMode::kStratified;
  std::string baseline = "vsop";
  LogFn log;
};

struct AggregateResult {
  std::vector<AgentReport> agents;
  nlohmann::ordered_json report;
  std::string svg;
  std::int64_t skipped_rows = 0;
};

// Rebuilds per-agent score matrices from the metrics CSVs of completed run
// directories. Every directory must cover the same environment set.
AggregateResult cmd_aggregate(const std::vector<std::string>& run_dirs, const AggregateOptions& options);

struct AblationOptions {
  // Environment steps per run; negative uses the config's total_steps.
  std::int64_t budget = -1;
  bool resume = false;
  std::vector<std::string> agents{"ppo", "ppo3d", "vsop", "vsop3d"};
  LogFn log;
};

// Trains each agent preset under <config.output_dir>/<preset> with the
// config's environments, seeds and budget, then writes ablation.json and a
// per-seed sign table (ablation_signs.txt) comparing paired final scores.
// A zero budget skips training and yields an empty comparison.
nlohmann::ordered_json cmd_ablation_ppo3d(const RunConfig& config, const AblationOptions& options = {});

// Plain-text sign table from an ablation report.
std::string sign_table(const nlohmann::ordered_json& ablation);

// Re-renders figure SVG from a saved report.json.
std::string cmd_plot(const std::string& report_path, const std::string& svg_path);

}  // namespace vsop3d
