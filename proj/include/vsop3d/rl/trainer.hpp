#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vsop3d/io/checkpoint.hpp"
#include "vsop3d/rl/agent.hpp"
#include "vsop3d/rl/rollout.hpp"

namespace vsop3d {

struct TrainOptions {
  std::string env_name = "chase_dot";
  std::uint64_t seed = 0;
  std::uint64_t num_train_levels = 50;
  std::int64_t total_steps = 0;
  std::int64_t num_envs = 8;
  // Test-level evaluation every eval_interval environment steps.
  std::int64_t eval_interval = 10240;
  std::int64_t eval_episodes = 32;
  std::int64_t eval_envs = 8;
  // VSOP acts through sampled dropout masks at evaluation unless disabled.
  bool eval_dropout = true;
  EnvOptions observation{32, 32};
  std::array<std::int64_t, 3> base_channels{16, 32, 32};
  std::int64_t hidden_units = 256;
};

struct UpdateRecord {
  std::int64_t step = 0;
  UpdateStats stats;
};

// Alternates collect -> GAE -> update until total_steps environment steps
// have been taken (rounded up to whole batches), evaluating on held-out
// levels along the way.
class Trainer {
 public:
  Trainer(const AgentHyperparams& hp, const TrainOptions& options);

  std::int64_t horizon() const { return horizon_; }
  std::int64_t global_step() const { return global_step_; }
  std::int64_t updates_done() const { return static_cast<std::int64_t>(updates_.size()); }
  bool finished() const { return global_step_ >= options_.total_steps; }

  // One collect + update, followed by any evaluation that falls due.
  void step_update();
  // Runs to completion, calling after_update after each update.
  void run(const std::function<void(const Trainer&)>& after_update = {});

  const std::vector<EpisodeRecord>& timeline() const { return timeline_; }
  const std::vector<UpdateRecord>& updates() const { return updates_; }
  const Agent& agent() const { return *agent_; }
  const TrainOptions& options() const { return options_; }

  // Complete training state, restorable at an update boundary.
  Checkpoint checkpoint() const;
  void restore(const Checkpoint& checkpoint);

 private:
  void evaluate();

  AgentHyperparams hp_;
  TrainOptions options_;
  std::int64_t horizon_ = 0;
  std::unique_ptr<Agent> agent_;
  std::unique_ptr<VecEnv> envs_;
  Rng root_;
  Rng action_rng_, dropout_rng_, shuffle_rng_;
  std::int64_t global_step_ = 0;
  std::int64_t next_eval_ = 0;
  std::int64_t evals_done_ = 0;
  std::int64_t last_eval_step_ = -1;
  std::vector<EpisodeRecord> timeline_;
  std::vector<UpdateRecord> updates_;
};

}  // namespace vsop3d
