#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsop3d/tensor/rng.hpp"

namespace vsop3d {

enum class Split { kTrain, kTest };

std::string to_string(Split split);

struct LevelSeed {
  std::string env_name;
  std::uint64_t seed = 0;
  Split split = Split::kTrain;
};

struct EnvSpec {
  std::string name;
  std::int64_t grid = 8;
  std::int64_t obs_height = 32;
  std::int64_t obs_width = 32;
  std::int64_t num_actions = 5;
  std::int64_t max_episode_steps = 256;
  // Analytic bounds on the episodic return.
  double score_min = 0.0;
  double score_max = 1.0;
};

struct StepResult {
  std::vector<double> observation;  // H x W x 3, values in [0, 1]
  double reward = 0.0;
  bool done = false;
  double episode_return = 0.0;  // valid when done
};

class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Color = std::array<double, 3>;

// Base for the grid games. Subclasses provide level generation, dynamics and
// a full-state oracle; the base enforces the episode protocol.
class Env {
 public:
  explicit Env(EnvSpec spec);
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }

  // Generates the level and returns its first observation.
  std::vector<double> reset(const LevelSeed& level);
  StepResult step(std::int64_t action);
  std::vector<double> observation() const;

  bool done() const { return done_; }
  std::int64_t steps() const { return steps_; }
  double episode_return() const { return episode_return_; }
  const LevelSeed& level() const { return level_; }

  // Action chosen with access to the full game state.
  virtual std::int64_t oracle_action() const = 0;

  std::vector<std::int64_t> save_state() const;
  void load_state(const std::vector<std::int64_t>& state);

 protected:
  struct Outcome {
    double reward = 0.0;
    bool terminal = false;
  };

  virtual void generate(Rng& level_rng) = 0;
  virtual Outcome advance(std::int64_t action) = 0;
  virtual void render(std::vector<double>& canvas) const = 0;
  virtual void save_game(std::vector<std::int64_t>& out) const = 0;
  virtual std::size_t load_game(const std::vector<std::int64_t>& in, std::size_t pos) = 0;

  void fill_cell(std::vector<double>& canvas, std::int64_t row, std::int64_t col, const Color& color) const;
  Color jittered(const Color& base, double amount);

  Rng rng_;  // level stream: generation and in-episode randomness
  Color background_{};

 private:
  EnvSpec spec_;
  LevelSeed level_;
  std::int64_t steps_ = 0;
  bool done_ = true;
  double episode_return_ = 0.0;
};

struct EnvOptions {
  std::int64_t obs_height = 32;
  std::int64_t obs_width = 32;
};

std::vector<std::string> env_names();
// Throws EnvError for unknown names.
std::unique_ptr<Env> make_env(const std::string& name, const EnvOptions& options = {});
EnvSpec env_spec(const std::string& name, const EnvOptions& options = {});

// (R - score_min) / (score_max - score_min), clamped to [0, 1]. Out-of-range
// returns increment normalization_clamp_count().
double normalized_return(const EnvSpec& spec, double episodic_return);
std::int64_t normalization_clamp_count();

// Train levels come from [0, num_train_levels); test levels from
// [num_train_levels, 2^64).
class LevelSampler {
 public:
  LevelSampler(std::string env_name, std::uint64_t num_train_levels, Rng rng);
  LevelSeed sample(Split split);
  const Rng& rng() const { return rng_; }
  void set_rng(const Rng& rng) { rng_ = rng; }

 private:
  std::string env_name_;
  std::uint64_t num_train_levels_;
  Rng rng_;
};

// One JSON object per line: {"step":..,"action":..,"reward":..,"done":..}.
void write_trace_line(std::ostream& os, std::int64_t step, std::int64_t action, double reward, bool done);

}  // namespace vsop3d
