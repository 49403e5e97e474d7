#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsop3d/rl/rollout.hpp"
#include "vsop3d/rl/trainer.hpp"

namespace vsop3d {

inline constexpr const char* kMetricsCsvHeader = "step,split,env,seed,episodic_return,normalized_return";

struct MetricRow {
  std::int64_t step = 0;
  Split split = Split::kTrain;
  std::string env;
  std::uint64_t seed = 0;
  double episodic_return = 0.0;
  double normalized_return = 0.0;
};

// Shortest text that parses back to the same double.
std::string format_double(double value);

std::string metrics_csv(const std::vector<EpisodeRecord>& timeline, std::uint64_t seed);

struct MetricsCsv {
  std::vector<MetricRow> rows;
  std::int64_t skipped_rows = 0;  // malformed lines, skipped
};
// Throws std::runtime_error when the header is missing or wrong.
MetricsCsv parse_metrics_csv(const std::string& text);

// JSON array of {"update","step","policy_loss","value_loss","entropy","grad_norm","approx_kl"}.
std::string update_stats_json(const std::vector<UpdateRecord>& updates);

std::string read_file(const std::string& path);
// Writes through a temporary file and renames it into place.
void write_file(const std::string& path, const std::string& contents);

}  // namespace vsop3d
