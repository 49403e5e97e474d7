#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vsop3d/envs/env.hpp"
#include "vsop3d/nn/backbone.hpp"
#include "vsop3d/tensor/tensor.hpp"

namespace vsop3d {

// Ring of the most recent `capacity` frames. Frames are stored channel-major
// (3 x H x W); a reset fills every slot with the reset frame.
class FrameStack {
 public:
  FrameStack(std::int64_t capacity, std::int64_t height, std::int64_t width);

  // Takes an H x W x 3 observation as produced by Env.
  void reset(const std::vector<double>& observation);
  void push(const std::vector<double>& observation);

  std::int64_t capacity() const { return capacity_; }
  std::int64_t frame_size() const { return 3 * height_ * width_; }
  // Oldest-first frame i (channel-major).
  const double* frame(std::int64_t i) const;

  // [capacity*3, H, W] for conv2d (frames along channels) or
  // [3, capacity, H, W] for conv3d (frames along depth), oldest first.
  std::vector<double> stacked(ConvKind kind) const;
  void write_stacked(ConvKind kind, double* dst) const;

  std::vector<double> save_state() const;
  void load_state(const std::vector<double>& state);

 private:
  std::int64_t capacity_, height_, width_;
  std::vector<double> ring_;
  std::int64_t head_ = 0;  // slot of the oldest frame
};

// H x W x 3 -> 3 x H x W.
std::vector<double> to_channel_major(const std::vector<double>& hwc, std::int64_t height, std::int64_t width);

struct GaeResult {
  std::vector<double> advantages;  // [T, E] row-major
  std::vector<double> returns;     // advantages + values
};

// delta_t = r_t + gamma (1 - done_t) V_{t+1} - V_t
// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, scanned backward with
// V_T = bootstrap_value. Throws std::invalid_argument on NaN input or on
// gamma / lambda outside [0, 1].
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<double>& dones, const std::vector<double>& bootstrap_value,
                      std::int64_t horizon, std::int64_t num_envs, double gamma, double lambda);

struct EpisodeRecord {
  std::int64_t step = 0;
  Split split = Split::kTrain;
  std::string env;
  std::uint64_t level_seed = 0;
  double episodic_return = 0.0;
  double normalized_return = 0.0;
};

// E independent environments with their own level samplers (streams split
// from one Rng by index) and frame stacks. Finished episodes reset in place
// onto a freshly sampled level.
class VecEnv {
 public:
  VecEnv(const std::string& env_name, std::int64_t num_envs, std::uint64_t num_train_levels, Split split,
         const EnvOptions& options, std::int64_t frames, ConvKind kind, const Rng& rng);

  std::int64_t size() const { return static_cast<std::int64_t>(envs_.size()); }
  const EnvSpec& spec() const { return envs_.front()->spec(); }
  Split split() const { return split_; }
  // Per-environment stacked observation shape, without the batch axis.
  Shape observation_shape() const;
  std::int64_t observation_size() const;

  void reset_all();
  // Stacked observations of all environments, [E, ...].
  Tensor observations() const;

  struct StepOutput {
    std::vector<double> rewards;
    std::vector<double> dones;             // 1.0 where the episode ended
    std::vector<EpisodeRecord> finished;   // step field left for the caller
  };
  StepOutput step(const std::vector<std::int64_t>& actions);

  Env& env(std::int64_t i) { return *envs_[static_cast<std::size_t>(i)]; }

  std::vector<std::int64_t> save_state() const;
  void load_state(const std::vector<std::int64_t>& state);

 private:
  void start_episode(std::size_t i);

  Split split_;
  ConvKind kind_;
  std::vector<std::unique_ptr<Env>> envs_;
  std::vector<LevelSampler> samplers_;
  std::vector<FrameStack> stacks_;
};

// Fixed-horizon on-policy storage; index (t, e) lives at t * E + e.
struct RolloutBuffer {
  std::int64_t horizon = 0;
  std::int64_t num_envs = 0;
  Shape observation_shape;  // per sample
  std::vector<double> observations;
  std::vector<std::int64_t> actions;
  std::vector<double> logprobs;
  std::vector<double> rewards;
  std::vector<double> dones;
  std::vector<double> values;
  std::vector<double> bootstrap_value;  // [E]
  std::vector<double> advantages;
  std::vector<double> returns;

  std::int64_t size() const { return horizon * num_envs; }
  bool has_advantages() const { return !advantages.empty(); }
  void compute_advantages(double gamma, double lambda);
  // Observation batch for the given sample indices.
  Tensor gather_observations(const std::vector<std::int64_t>& index) const;
  void clear();
};

struct PolicyStep {
  std::vector<std::int64_t> actions;
  std::vector<double> logprobs;
  std::vector<double> values;
};
using PolicyFn = std::function<PolicyStep(const Tensor& observations)>;
using ValueFn = std::function<std::vector<double>(const Tensor& observations)>;

// Steps every environment `horizon` times. global_step advances by E per
// tick and stamps each finished episode appended to `episodes`.
RolloutBuffer collect(VecEnv& envs, const PolicyFn& policy, const ValueFn& bootstrap, std::int64_t horizon,
                      std::int64_t& global_step, std::vector<EpisodeRecord>* episodes);

}  // namespace vsop3d
