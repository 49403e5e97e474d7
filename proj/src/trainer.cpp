#include "vsop3d/rl/trainer.hpp"

#include <stdexcept>

namespace vsop3d {

namespace {

BackboneConfig network_config(const TrainOptions& o) {
  BackboneConfig cfg;
  const EnvSpec spec = env_spec(o.env_name, o.observation);
  cfg.obs_height = spec.obs_height;
  cfg.obs_width = spec.obs_width;
  cfg.num_actions = spec.num_actions;
  cfg.base_channels = o.base_channels;
  cfg.hidden_units = o.hidden_units;
  return cfg;
}

}  // namespace

Trainer::Trainer(const AgentHyperparams& hp, const TrainOptions& options)
    : hp_(hp),
      options_(options),
      root_(options.seed),
      action_rng_(root_.split("action")),
      dropout_rng_(root_.split("dropout")),
      shuffle_rng_(root_.split("shuffle")) {
  hp_.validate();
  if (options_.num_envs < 1) throw ConfigError("num_envs must be >= 1");
  if (hp_.batch_size % options_.num_envs != 0) {
    throw ConfigError("batch_size " + std::to_string(hp_.batch_size) + " is not divisible by num_envs " +
                      std::to_string(options_.num_envs));
  }
  if (options_.eval_interval < 1 || options_.eval_episodes < 1 || options_.eval_envs < 1) {
    throw ConfigError("eval_interval, eval_episodes and eval_envs must be >= 1");
  }
  horizon_ = hp_.batch_size / options_.num_envs;
  Rng init = root_.split("network");
  agent_ = std::make_unique<Agent>(hp_, network_config(options_), init);
  envs_ = std::make_unique<VecEnv>(options_.env_name, options_.num_envs, options_.num_train_levels, Split::kTrain,
                                   options_.observation, hp_.frames, hp_.conv_kind, root_.split("train_levels"));
  envs_->reset_all();
  next_eval_ = options_.eval_interval;
}

void Trainer::step_update() {
  const PolicyFn policy = [&](const Tensor& obs) { return agent_->act(obs, action_rng_, dropout_rng_); };
  const ValueFn bootstrap = [&](const Tensor& obs) { return agent_->values(obs); };
  RolloutBuffer buffer = collect(*envs_, policy, bootstrap, horizon_, global_step_, &timeline_);
  buffer.compute_advantages(hp_.gamma, hp_.gae_lambda);
  UpdateRecord rec;
  rec.step = global_step_;
  rec.stats = agent_->update(buffer, shuffle_rng_, dropout_rng_);
  updates_.push_back(rec);
  bool due = false;
  while (global_step_ >= next_eval_) {
    due = true;
    next_eval_ += options_.eval_interval;
  }
  // The final policy is always evaluated.
  if (due || finished()) {
    if (last_eval_step_ != global_step_) evaluate();
  }
}

void Trainer::run(const std::function<void(const Trainer&)>& after_update) {
  while (!finished()) {
    step_update();
    if (after_update) after_update(*this);
  }
}

void Trainer::evaluate() {
  const auto index = static_cast<std::uint64_t>(evals_done_);
  Rng level_rng = root_.split("eval_levels").split(index);
  Rng sample_rng = root_.split("eval_action").split(index);
  Rng mask_rng = root_.split("eval_dropout").split(index);
  const std::int64_t width = std::min(options_.eval_envs, options_.eval_episodes);
  VecEnv envs(options_.env_name, width, options_.num_train_levels, Split::kTest, options_.observation, hp_.frames,
              hp_.conv_kind, level_rng);
  envs.reset_all();
  // Each slot keeps running episodes until the quota of started episodes is
  // used up, so short episodes are not over-represented.
  std::vector<bool> active(static_cast<std::size_t>(width), true);
  std::int64_t started = width, remaining = width;
  while (remaining > 0) {
    const PolicyStep act = agent_->act(envs.observations(), sample_rng, mask_rng, options_.eval_dropout);
    std::vector<std::int64_t> actions = act.actions;
    const auto out = envs.step(actions);
    std::size_t f = 0;
    for (std::size_t e = 0; e < active.size(); ++e) {
      if (out.dones[e] == 0.0) continue;
      EpisodeRecord rec = out.finished[f++];
      if (!active[e]) continue;
      rec.step = global_step_;
      timeline_.push_back(std::move(rec));
      if (started < options_.eval_episodes) {
        ++started;
      } else {
        active[e] = false;
        --remaining;
      }
    }
  }
  ++evals_done_;
  last_eval_step_ = global_step_;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.config = agent_->network().config();
  for (const auto& p : agent_->network().named_parameters()) {
    ck.put_f64("param/" + p.name, {p.tensor.data().begin(), p.tensor.data().end()});
  }
  const AdamState& adam = agent_->optimizer_state();
  ck.put_i64("adam/step", {adam.step});
  for (std::size_t i = 0; i < adam.first_moment.size(); ++i) {
    ck.put_f64("adam/m/" + std::to_string(i), adam.first_moment[i]);
    ck.put_f64("adam/v/" + std::to_string(i), adam.second_moment[i]);
  }
  auto rng_state = [](const Rng& r) {
    return std::vector<std::int64_t>{static_cast<std::int64_t>(r.seed()), static_cast<std::int64_t>(r.counter())};
  };
  ck.put_i64("rng/action", rng_state(action_rng_));
  ck.put_i64("rng/dropout", rng_state(dropout_rng_));
  ck.put_i64("rng/shuffle", rng_state(shuffle_rng_));
  ck.put_i64("trainer/counters", {global_step_, next_eval_, evals_done_, last_eval_step_});
  ck.put_i64("envs", envs_->save_state());

  std::vector<std::int64_t> ints;
  std::vector<double> reals;
  for (const auto& r : timeline_) {
    ints.insert(ints.end(), {r.step, r.split == Split::kTrain ? 0 : 1, static_cast<std::int64_t>(r.level_seed)});
    reals.insert(reals.end(), {r.episodic_return, r.normalized_return});
  }
  ck.put_i64("timeline/ints", std::move(ints));
  ck.put_f64("timeline/reals", std::move(reals));
  std::vector<std::int64_t> steps;
  std::vector<double> stats;
  for (const auto& u : updates_) {
    steps.push_back(u.step);
    stats.insert(stats.end(), {u.stats.policy_loss, u.stats.value_loss, u.stats.entropy, u.stats.grad_norm,
                               u.stats.approx_kl});
  }
  ck.put_i64("updates/steps", std::move(steps));
  ck.put_f64("updates/stats", std::move(stats));
  return ck;
}

void Trainer::restore(const Checkpoint& ck) {
  if (!(ck.config == agent_->network().config())) {
    throw CheckpointError("checkpoint network configuration does not match the run configuration");
  }
  for (auto& p : agent_->network().named_parameters()) {
    const auto& values = ck.f64("param/" + p.name);
    auto dst = p.tensor.mutable_data();
    if (values.size() != dst.size()) throw CheckpointError("parameter '" + p.name + "' has the wrong size");
    std::copy(values.begin(), values.end(), dst.begin());
  }
  AdamState& adam = agent_->optimizer_state();
  adam.step = ck.i64("adam/step").at(0);
  adam.first_moment.clear();
  adam.second_moment.clear();
  for (std::size_t i = 0; ck.has("adam/m/" + std::to_string(i)); ++i) {
    adam.first_moment.push_back(ck.f64("adam/m/" + std::to_string(i)));
    adam.second_moment.push_back(ck.f64("adam/v/" + std::to_string(i)));
  }
  auto rng_from = [&](const std::string& name) {
    const auto& v = ck.i64(name);
    return Rng(static_cast<std::uint64_t>(v.at(0)), static_cast<std::uint64_t>(v.at(1)));
  };
  action_rng_ = rng_from("rng/action");
  dropout_rng_ = rng_from("rng/dropout");
  shuffle_rng_ = rng_from("rng/shuffle");
  const auto& counters = ck.i64("trainer/counters");
  global_step_ = counters.at(0);
  next_eval_ = counters.at(1);
  evals_done_ = counters.at(2);
  last_eval_step_ = counters.at(3);
  envs_->load_state(ck.i64("envs"));

  const auto& ints = ck.i64("timeline/ints");
  const auto& reals = ck.f64("timeline/reals");
  if (ints.size() % 3 != 0 || reals.size() * 3 != ints.size() * 2) throw CheckpointError("malformed timeline");
  timeline_.clear();
  for (std::size_t i = 0; i < ints.size() / 3; ++i) {
    EpisodeRecord r;
    r.step = ints[3 * i];
    r.split = ints[3 * i + 1] == 0 ? Split::kTrain : Split::kTest;
    r.env = options_.env_name;
    r.level_seed = static_cast<std::uint64_t>(ints[3 * i + 2]);
    r.episodic_return = reals[2 * i];
    r.normalized_return = reals[2 * i + 1];
    timeline_.push_back(std::move(r));
  }
  const auto& steps = ck.i64("updates/steps");
  const auto& stats = ck.f64("updates/stats");
  if (stats.size() != steps.size() * 5) throw CheckpointError("malformed update statistics");
  updates_.clear();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    UpdateRecord u;
    u.step = steps[i];
    u.stats = {stats[5 * i], stats[5 * i + 1], stats[5 * i + 2], stats[5 * i + 3], stats[5 * i + 4]};
    updates_.push_back(u);
  }
}

}  // namespace vsop3d
