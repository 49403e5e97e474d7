#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsop3d/rl/agent.hpp"
#include "vsop3d/rl/trainer.hpp"

namespace vsop3d {

// Raised with every problem found in a configuration, not just the first.
class ConfigValidationError : public ConfigError {
 public:
  explicit ConfigValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class WindowUnit { kEpisodes, kEvaluations };

struct RunConfig {
  std::string preset;
  AgentHyperparams hyperparams;  // preset plus any explicit overrides
  std::vector<std::string> envs;
  std::uint64_t num_train_levels = 50;
  std::int64_t total_steps = 0;
  std::int64_t num_envs = 8;
  std::int64_t eval_interval = 10240;
  std::int64_t eval_episodes = 32;
  std::int64_t eval_envs = 8;
  bool eval_dropout = true;
  std::int64_t final_window = 100;
  WindowUnit window_unit = WindowUnit::kEpisodes;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  // Updates between checkpoints; 0 keeps only the final one.
  std::int64_t checkpoint_interval = 10;
  EnvOptions observation{32, 32};
  std::array<std::int64_t, 3> base_channels{16, 32, 32};
  std::int64_t hidden_units = 256;
  std::int64_t workers = 1;

  TrainOptions train_options(const std::string& env, std::uint64_t seed) const;
};

// Name of the environment variable that supplies the default output root.
inline constexpr const char* kOutputRootVariable = "VSOP3D_OUTPUT_ROOT";

// Parses YAML text, applies dotted-key overrides (values are parsed as YAML
// scalars or flow sequences, e.g. {"seeds", "[0, 1]"}), then validates.
// When output_dir is absent it becomes <root>/<preset>, where root comes from
// VSOP3D_OUTPUT_ROOT or defaults to "runs".
RunConfig parse_run_config(const std::string& yaml_text, const std::map<std::string, std::string>& overrides = {});
RunConfig load_run_config(const std::string& path, const std::map<std::string, std::string>& overrides = {});

nlohmann::ordered_json to_json(const AgentHyperparams& hp);
AgentHyperparams hyperparams_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::ordered_json& j);
// 16 hex digits identifying the resolved configuration, output_dir and
// workers excluded since neither affects results.
std::string config_hash(const RunConfig& config);

std::string to_string(WindowUnit unit);

}  // namespace vsop3d
