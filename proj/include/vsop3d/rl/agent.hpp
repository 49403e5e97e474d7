#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vsop3d/nn/backbone.hpp"
#include "vsop3d/rl/rollout.hpp"
#include "vsop3d/tensor/optim.hpp"

namespace vsop3d {

enum class Algo { kPpo, kVsop };

std::string to_string(Algo algo);
Algo parse_algo(const std::string& text);

// One column of the hyperparameter table. Optional fields are "not
// applicable" for one of the algorithms and stay empty there.
struct AgentHyperparams {
  std::string name;
  Algo algo = Algo::kPpo;
  std::int64_t frames = 1;
  std::int64_t width_multiplier = 1;
  ConvKind conv_kind = ConvKind::kConv2d;
  double learning_rate = 5e-4;
  std::int64_t batch_size = 2048;
  std::int64_t num_minibatches = 8;
  std::int64_t epochs_per_update = 3;
  double gamma = 0.999;
  double gae_lambda = 0.95;
  std::optional<bool> normalize_advantages;
  std::optional<bool> clip_value_loss;
  std::optional<double> clip_coeff;
  double entropy_coeff = 1e-2;
  double value_loss_coeff = 0.5;
  double max_grad_norm = 0.5;
  std::optional<double> dropout_rate;

  std::int64_t minibatch_size() const { return batch_size / num_minibatches; }
  double dropout() const { return dropout_rate.value_or(0.0); }
  // Throws ConfigError naming every violated constraint.
  void validate() const;
  friend bool operator==(const AgentHyperparams&, const AgentHyperparams&) = default;
};

std::vector<std::string> preset_names();
// ppo, ppo3d, vsop, vsop3d, vsop3d_plus. Throws ConfigError otherwise.
AgentHyperparams preset(const std::string& name);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  double approx_kl = 0.0;
};

struct MinibatchData {
  std::vector<std::int64_t> actions;
  std::vector<double> old_logprobs;
  std::vector<double> old_values;
  std::vector<double> advantages;
  std::vector<double> returns;
};

struct LossTerms {
  Tensor total;  // differentiable scalar
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
};

// Per-minibatch normalization (population std, epsilon 1e-8).
std::vector<double> normalize_advantages(const std::vector<double>& advantages);

// Clipped-surrogate loss on fresh network outputs. Advantages are used as
// given; ppo_update normalizes them beforehand when the config asks for it.
LossTerms ppo_loss(const Tensor& logits, const Tensor& values, const MinibatchData& batch,
                   const AgentHyperparams& hp);
// -mean(relu(A) log pi(a|s)) + c_v mean((V - R)^2)/2 - c_e H.
LossTerms vsop_loss(const Tensor& logits, const Tensor& values, const MinibatchData& batch,
                    const AgentHyperparams& hp);

// Network plus optimizer state for one algorithm configuration.
class Agent {
 public:
  // frames, conv_kind and width_multiplier in `network` are overridden by hp.
  Agent(const AgentHyperparams& hp, BackboneConfig network, Rng& init_rng);

  const AgentHyperparams& hyperparams() const { return hp_; }
  const Backbone& network() const { return net_; }
  Backbone& network() { return net_; }
  AdamState& optimizer_state() { return adam_; }
  const AdamState& optimizer_state() const { return adam_; }

  // PPO: eval-mode forward. VSOP: train-mode forward with dropout so each
  // draw acts under a sampled subnetwork, unless dropout_active is false.
  PolicyStep act(const Tensor& observations, Rng& sample_rng, Rng& dropout_rng, bool dropout_active = true) const;
  // Eval-mode value estimates.
  std::vector<double> values(const Tensor& observations) const;

  // Runs epochs over shuffled minibatches. Requires computed advantages.
  UpdateStats update(const RolloutBuffer& buffer, Rng& shuffle_rng, Rng& dropout_rng);

 private:
  AgentHyperparams hp_;
  Backbone net_;
  std::vector<Tensor> params_;
  AdamState adam_;
};

UpdateStats ppo_update(Agent& agent, const RolloutBuffer& buffer, Rng& shuffle_rng, Rng& dropout_rng);
UpdateStats vsop_update(Agent& agent, const RolloutBuffer& buffer, Rng& shuffle_rng, Rng& dropout_rng);

}  // namespace vsop3d
