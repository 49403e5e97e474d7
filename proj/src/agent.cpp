#include "vsop3d/rl/agent.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vsop3d {

std::string to_string(Algo algo) { return algo == Algo::kPpo ? "ppo" : "vsop"; }

Algo parse_algo(const std::string& text) {
  if (text == "ppo") return Algo::kPpo;
  if (text == "vsop") return Algo::kVsop;
  throw ConfigError("unknown algorithm '" + text + "' (expected ppo or vsop)");
}

void AgentHyperparams::validate() const {
  std::vector<std::string> problems;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  need(frames >= 1, "frames must be >= 1");
  need(width_multiplier >= 1, "width_multiplier must be >= 1");
  need(learning_rate > 0.0, "learning_rate must be positive");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(num_minibatches >= 1 && num_minibatches <= batch_size, "num_minibatches must lie in [1, batch_size]");
  need(num_minibatches >= 1 && batch_size % num_minibatches == 0, "batch_size must be divisible by num_minibatches");
  need(epochs_per_update >= 1, "epochs_per_update must be >= 1");
  need(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  need(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  need(entropy_coeff >= 0.0, "entropy_coeff must be >= 0");
  need(value_loss_coeff >= 0.0, "value_loss_coeff must be >= 0");
  need(max_grad_norm > 0.0, "max_grad_norm must be positive");
  if (algo == Algo::kPpo) {
    need(!dropout_rate || *dropout_rate == 0.0, "ppo does not use dropout (dropout_rate must be unset or 0)");
    need(clip_coeff.has_value() && *clip_coeff > 0.0, "ppo requires a positive clip_coeff");
    need(normalize_advantages.has_value(), "ppo requires normalize_advantages");
    need(clip_value_loss.has_value(), "ppo requires clip_value_loss");
  } else {
    need(!clip_coeff, "vsop does not use clip_coeff");
    need(!normalize_advantages.value_or(false), "vsop does not normalize advantages");
    need(!clip_value_loss.value_or(false), "vsop does not clip the value loss");
    need(dropout_rate.has_value() && *dropout_rate >= 0.0 && *dropout_rate < 1.0,
         "vsop requires dropout_rate in [0, 1)");
  }
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "invalid hyperparameters '" << name << "': ";
    for (std::size_t i = 0; i < problems.size(); ++i) msg << (i ? "; " : "") << problems[i];
    throw ConfigError(msg.str());
  }
}

std::vector<std::string> preset_names() { return {"ppo", "ppo3d", "vsop", "vsop3d", "vsop3d_plus"}; }

AgentHyperparams preset(const std::string& name) {
  AgentHyperparams ppo;
  ppo.name = "ppo";
  ppo.algo = Algo::kPpo;
  ppo.learning_rate = 5e-4;
  ppo.batch_size = 2048;
  ppo.epochs_per_update = 3;
  ppo.gamma = 0.999;
  ppo.gae_lambda = 0.95;
  ppo.normalize_advantages = true;
  ppo.clip_value_loss = true;
  ppo.clip_coeff = 0.2;
  ppo.entropy_coeff = 1e-2;
  ppo.value_loss_coeff = 0.5;
  ppo.max_grad_norm = 0.5;
  if (name == "ppo") return ppo;
  if (name == "ppo3d") {
    AgentHyperparams hp = ppo;
    hp.name = name;
    hp.frames = 8;
    hp.conv_kind = ConvKind::kConv3d;
    return hp;
  }

  AgentHyperparams vsop;
  vsop.name = "vsop";
  vsop.algo = Algo::kVsop;
  vsop.learning_rate = 4.5e-4;
  vsop.batch_size = 2048;
  vsop.epochs_per_update = 3;
  vsop.gamma = 0.999;
  vsop.gae_lambda = 0.881;
  vsop.entropy_coeff = 1e-5;
  vsop.value_loss_coeff = 0.5;
  vsop.max_grad_norm = 0.5;
  vsop.dropout_rate = 0.075;
  if (name == "vsop") return vsop;
  if (name == "vsop3d") {
    AgentHyperparams hp = vsop;
    hp.name = name;
    hp.frames = 8;
    hp.conv_kind = ConvKind::kConv3d;
    return hp;
  }
  if (name == "vsop3d_plus") {
    AgentHyperparams hp = vsop;
    hp.name = name;
    hp.frames = 16;
    hp.conv_kind = ConvKind::kConv3d;
    hp.width_multiplier = 2;
    hp.learning_rate = 2.0e-4;
    hp.batch_size = 512;
    hp.num_minibatches = 32;
    hp.epochs_per_update = 1;
    return hp;
  }
  throw ConfigError("unknown preset '" + name + "' (expected one of ppo, ppo3d, vsop, vsop3d, vsop3d_plus)");
}

std::vector<double> normalize_advantages(const std::vector<double>& advantages) {
  const double n = static_cast<double>(advantages.size());
  const double mu = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : advantages) var += (a - mu) * (a - mu);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(advantages.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (advantages[i] - mu) / (sd + 1e-8);
  return out;
}

namespace {

Tensor constant(const std::vector<double>& v) {
  return Tensor::from({static_cast<std::int64_t>(v.size())}, v);
}

void check_batch(const Tensor& logits, const Tensor& values, const MinibatchData& b) {
  const auto n = static_cast<std::size_t>(logits.dim(0));
  if (logits.rank() != 2 || values.rank() != 1 || static_cast<std::size_t>(values.dim(0)) != n ||
      b.actions.size() != n || b.old_logprobs.size() != n || b.old_values.size() != n || b.advantages.size() != n ||
      b.returns.size() != n) {
    throw DimensionError("loss: minibatch fields disagree with logits " + shape_str(logits.shape()));
  }
}

// Shared tail: entropy bonus, KL diagnostic and the weighted total.
LossTerms finish(const Tensor& policy, const Tensor& value, const Tensor& logits, const Tensor& logp,
                 const MinibatchData& b, const AgentHyperparams& hp) {
  const Tensor entropy = ops::mean(ops::categorical_entropy(logits));
  LossTerms out;
  out.total = ops::sub(ops::add(policy, ops::scale(value, hp.value_loss_coeff)), ops::scale(entropy, hp.entropy_coeff));
  out.policy_loss = policy.item();
  out.value_loss = value.item();
  out.entropy = entropy.item();
  // E[(r - 1) - log r], non-negative per sample.
  double kl = 0.0;
  for (std::size_t i = 0; i < b.actions.size(); ++i) {
    const double log_ratio = logp[static_cast<std::int64_t>(i)] - b.old_logprobs[i];
    kl += std::expm1(log_ratio) - log_ratio;
  }
  out.approx_kl = kl / static_cast<double>(b.actions.size());
  return out;
}

}  // namespace

LossTerms ppo_loss(const Tensor& logits, const Tensor& values, const MinibatchData& b, const AgentHyperparams& hp) {
  check_batch(logits, values, b);
  const double c = hp.clip_coeff.value_or(0.2);
  const Tensor logp = ops::gather_rows(ops::log_softmax(logits), b.actions);
  const Tensor ratio = ops::exp(ops::sub(logp, constant(b.old_logprobs)));
  const Tensor adv = constant(b.advantages);
  const Tensor surrogate =
      ops::minimum(ops::mul(ratio, adv), ops::mul(ops::clamp(ratio, 1.0 - c, 1.0 + c), adv));
  const Tensor policy = ops::scale(ops::mean(surrogate), -1.0);

  const Tensor ret = constant(b.returns);
  const Tensor unclipped = ops::square(ops::sub(values, ret));
  Tensor value;
  if (hp.clip_value_loss.value_or(false)) {
    const Tensor old = constant(b.old_values);
    const Tensor clipped = ops::add(old, ops::clamp(ops::sub(values, old), -c, c));
    value = ops::scale(ops::mean(ops::maximum(unclipped, ops::square(ops::sub(clipped, ret)))), 0.5);
  } else {
    value = ops::scale(ops::mean(unclipped), 0.5);
  }
  return finish(policy, value, logits, logp, b, hp);
}

LossTerms vsop_loss(const Tensor& logits, const Tensor& values, const MinibatchData& b, const AgentHyperparams& hp) {
  check_batch(logits, values, b);
  const Tensor logp = ops::gather_rows(ops::log_softmax(logits), b.actions);
  std::vector<double> gate(b.advantages.size());
  for (std::size_t i = 0; i < gate.size(); ++i) gate[i] = b.advantages[i] > 0.0 ? b.advantages[i] : 0.0;
  const Tensor policy = ops::scale(ops::mean(ops::mul(constant(gate), logp)), -1.0);
  const Tensor value = ops::scale(ops::mean(ops::square(ops::sub(values, constant(b.returns)))), 0.5);
  return finish(policy, value, logits, logp, b, hp);
}

Agent::Agent(const AgentHyperparams& hp, BackboneConfig network, Rng& init_rng)
    : hp_(hp),
      net_(
          [&] {
            hp.validate();
            network.frames = hp.frames;
            network.conv_kind = hp.conv_kind;
            network.width_multiplier = hp.width_multiplier;
            return network;
          }(),
          init_rng),
      params_(net_.parameters()) {}

PolicyStep Agent::act(const Tensor& observations, Rng& sample_rng, Rng& dropout_rng, bool dropout_active) const {
  NoGradGuard no_grad;
  const bool thompson = hp_.algo == Algo::kVsop && dropout_active && hp_.dropout() > 0.0;
  const auto out = net_.forward(observations, thompson ? Mode::kTrain : Mode::kEval, hp_.dropout(), dropout_rng);
  const auto sample = ops::softmax_categorical(out.logits, sample_rng);
  PolicyStep step;
  step.actions = sample.actions;
  step.logprobs.assign(sample.logprobs.data().begin(), sample.logprobs.data().end());
  step.values.assign(out.value.data().begin(), out.value.data().end());
  return step;
}

std::vector<double> Agent::values(const Tensor& observations) const {
  NoGradGuard no_grad;
  Rng unused(0);
  const auto out = net_.forward(observations, Mode::kEval, 0.0, unused);
  return {out.value.data().begin(), out.value.data().end()};
}

UpdateStats Agent::update(const RolloutBuffer& buffer, Rng& shuffle_rng, Rng& dropout_rng) {
  if (!buffer.has_advantages()) throw std::logic_error("update called before advantages were computed");
  const std::int64_t n = buffer.size();
  const std::int64_t mb = std::max<std::int64_t>(1, n / hp_.num_minibatches);
  UpdateStats stats;
  std::int64_t count = 0;
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t epoch = 0; epoch < hp_.epochs_per_update; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::int64_t i = n - 1; i > 0; --i) {  // Fisher-Yates
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(shuffle_rng.below(static_cast<std::uint64_t>(i + 1)))]);
    }
    for (std::int64_t start = 0; start + mb <= n; start += mb) {
      std::vector<std::int64_t> index(order.begin() + start, order.begin() + start + mb);
      MinibatchData batch;
      for (std::int64_t k : index) {
        const auto s = static_cast<std::size_t>(k);
        batch.actions.push_back(buffer.actions[s]);
        batch.old_logprobs.push_back(buffer.logprobs[s]);
        batch.old_values.push_back(buffer.values[s]);
        batch.advantages.push_back(buffer.advantages[s]);
        batch.returns.push_back(buffer.returns[s]);
      }
      const Tensor obs = buffer.gather_observations(index);
      LossTerms loss;
      if (hp_.algo == Algo::kPpo) {
        if (hp_.normalize_advantages.value_or(false)) batch.advantages = normalize_advantages(batch.advantages);
        const auto out = net_.forward(obs, Mode::kTrain, 0.0, dropout_rng);
        loss = ppo_loss(out.logits, out.value, batch, hp_);
      } else {
        const auto out = net_.forward(obs, Mode::kTrain, hp_.dropout(), dropout_rng);
        loss = vsop_loss(out.logits, out.value, batch, hp_);
      }
      if (!std::isfinite(loss.total.item())) {
        std::ostringstream msg;
        msg << "non-finite loss in " << to_string(hp_.algo) << " update (epoch " << epoch << ", minibatch at "
            << start << "): policy " << loss.policy_loss << ", value " << loss.value_loss << ", entropy "
            << loss.entropy;
        throw std::runtime_error(msg.str());
      }
      zero_grads(params_);
      backward(loss.total);
      stats.grad_norm += clip_grad_norm(params_, hp_.max_grad_norm);
      adam_step(params_, hp_.learning_rate, adam_);
      stats.policy_loss += loss.policy_loss;
      stats.value_loss += loss.value_loss;
      stats.entropy += loss.entropy;
      stats.approx_kl += loss.approx_kl;
      ++count;
    }
  }
  if (count > 0) {
    const double inv = 1.0 / static_cast<double>(count);
    stats.policy_loss *= inv;
    stats.value_loss *= inv;
    stats.entropy *= inv;
    stats.grad_norm *= inv;
    stats.approx_kl *= inv;
  }
  return stats;
}

UpdateStats ppo_update(Agent& agent, const RolloutBuffer& buffer, Rng& shuffle_rng, Rng& dropout_rng) {
  if (agent.hyperparams().algo != Algo::kPpo) throw std::invalid_argument("ppo_update on a vsop agent");
  return agent.update(buffer, shuffle_rng, dropout_rng);
}

UpdateStats vsop_update(Agent& agent, const RolloutBuffer& buffer, Rng& shuffle_rng, Rng& dropout_rng) {
  if (agent.hyperparams().algo != Algo::kVsop) throw std::invalid_argument("vsop_update on a ppo agent");
  return agent.update(buffer, shuffle_rng, dropout_rng);
}

}  // namespace vsop3d
