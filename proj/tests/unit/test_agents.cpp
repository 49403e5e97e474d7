#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "oracles.hpp"
#include "vsop3d/cli/config.hpp"
#include "vsop3d/rl/agent.hpp"
#include "vsop3d/rl/trainer.hpp"

#ifndef VSOP3D_SOURCE_DIR
#define VSOP3D_SOURCE_DIR "."
#endif

namespace vsop3d {
namespace {

// --- presets -------------------------------------------------------------

TEST(Presets, SerializedPresetsMatchGoldenFile) {
  std::ifstream in(std::string(VSOP3D_SOURCE_DIR) + "/tests/golden/presets.json");
  ASSERT_TRUE(in) << "golden file missing";
  const auto golden = nlohmann::ordered_json::parse(in);
  ASSERT_EQ(golden.size(), preset_names().size());
  for (const auto& name : preset_names()) {
    const auto got = to_json(preset(name));
    const auto& want = golden.at(name);
    for (const auto& [field, value] : want.items()) {
      EXPECT_EQ(got.at(field), value) << name << "." << field;
    }
    EXPECT_EQ(got.size(), want.size()) << name;
  }
}

TEST(Presets, VsopThreeDPlusColumn) {
  const auto p = preset("vsop3d_plus");
  EXPECT_EQ(p.frames, 16);
  EXPECT_EQ(p.width_multiplier, 2);
  EXPECT_EQ(p.learning_rate, 2.0e-4);
  EXPECT_EQ(p.batch_size, 512);
  EXPECT_EQ(p.epochs_per_update, 1);
  EXPECT_EQ(p.gamma, 0.999);
  EXPECT_EQ(p.gae_lambda, 0.881);
  EXPECT_EQ(p.entropy_coeff, 1e-5);
  EXPECT_EQ(p.value_loss_coeff, 0.5);
  EXPECT_EQ(p.max_grad_norm, 0.5);
  EXPECT_EQ(p.dropout_rate, 0.075);
}

TEST(Presets, PpoColumn) {
  const auto p = preset("ppo");
  EXPECT_EQ(p.learning_rate, 5e-4);
  EXPECT_EQ(p.batch_size, 2048);
  EXPECT_EQ(p.epochs_per_update, 3);
  EXPECT_EQ(p.gae_lambda, 0.95);
  EXPECT_EQ(p.normalize_advantages, true);
  EXPECT_EQ(p.clip_coeff, 0.2);
  EXPECT_EQ(p.entropy_coeff, 1e-2);
  EXPECT_FALSE(p.dropout_rate.has_value());
}

TEST(Presets, VsopThreeDDiffersFromVsopOnlyInFramesAndConv) {
  auto a = preset("vsop"), b = preset("vsop3d");
  EXPECT_EQ(b.frames, 8);
  EXPECT_EQ(b.conv_kind, ConvKind::kConv3d);
  b.name = a.name;
  b.frames = a.frames;
  b.conv_kind = a.conv_kind;
  EXPECT_EQ(a, b);
}

TEST(Presets, UnknownNameAndValidation) {
  EXPECT_THROW(preset("impala"), ConfigError);
  for (const auto& n : preset_names()) EXPECT_NO_THROW(preset(n).validate());
  auto p = preset("ppo");
  p.dropout_rate = 0.1;
  EXPECT_THROW(p.validate(), ConfigError);
  auto v = preset("vsop");
  v.clip_coeff = 0.2;
  v.normalize_advantages = true;
  try {
    v.validate();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("clip_coeff"), std::string::npos) << msg;
    EXPECT_NE(msg.find("normalize"), std::string::npos) << msg;
  }
  auto m = preset("vsop");
  m.num_minibatches = 3;  // 2048 is not divisible by 3
  EXPECT_THROW(m.validate(), ConfigError);
}

// --- loss oracles --------------------------------------------------------

struct TwoSample {
  std::vector<double> logits{0.2, -0.1, 0.4, 1.0, 0.0, -1.0};
  std::vector<double> values{0.3, -0.2};
  MinibatchData batch;
  TwoSample() {
    batch.actions = {0, 2};
    batch.old_logprobs = {-1.3, -2.1};
    batch.old_values = {0.1, 0.1};
    batch.advantages = {0.8, -0.4};
    batch.returns = {1.0, -0.5};
  }
  Tensor logits_t(bool grad = false) const { return Tensor::from({2, 3}, logits, grad); }
  Tensor values_t() const { return Tensor::from({2}, values); }
};

// log pi(a | row) by direct evaluation.
double logp(const std::vector<double>& logits, int row, std::int64_t a) {
  const double* z = &logits[static_cast<std::size_t>(row * 3)];
  return z[a] - std::log(std::exp(z[0]) + std::exp(z[1]) + std::exp(z[2]));
}
double entropy(const std::vector<double>& logits, int row) {
  double h = 0.0;
  for (std::int64_t a = 0; a < 3; ++a) h -= std::exp(logp(logits, row, a)) * logp(logits, row, a);
  return h;
}

TEST(PpoLoss, TwoSampleHandComputation) {
  const TwoSample s;
  const auto hp = preset("ppo");
  const auto terms = ppo_loss(s.logits_t(), s.values_t(), s.batch, hp);
  double policy = 0.0, value = 0.0;
  for (int i = 0; i < 2; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double rho = std::exp(logp(s.logits, i, s.batch.actions[k]) - s.batch.old_logprobs[k]);
    const double a = s.batch.advantages[k];
    const double clipped_rho = std::min(std::max(rho, 0.8), 1.2);
    policy += -std::min(rho * a, clipped_rho * a) / 2.0;
    const double v = s.values[k], old = s.batch.old_values[k], r = s.batch.returns[k];
    const double v_clip = old + std::min(std::max(v - old, -0.2), 0.2);
    value += std::max((v - r) * (v - r), (v_clip - r) * (v_clip - r)) / 2.0 / 2.0;
  }
  const double ent = (entropy(s.logits, 0) + entropy(s.logits, 1)) / 2.0;
  EXPECT_NEAR(terms.policy_loss, policy, 1e-10);
  EXPECT_NEAR(terms.value_loss, value, 1e-10);
  EXPECT_NEAR(terms.entropy, ent, 1e-10);
  EXPECT_NEAR(terms.total.item(), policy + 0.5 * value - 0.01 * ent, 1e-10);
}

TEST(PpoLoss, RatioOneGivesMinusMeanAdvantage) {
  TwoSample s;
  s.batch.old_logprobs = {logp(s.logits, 0, 0), logp(s.logits, 1, 2)};
  s.batch.advantages = normalize_advantages({0.8, -0.4});
  const auto terms = ppo_loss(s.logits_t(), s.values_t(), s.batch, preset("ppo"));
  EXPECT_NEAR(terms.policy_loss, 0.0, 1e-12);
  EXPECT_NEAR(terms.approx_kl, 0.0, 1e-15);
}

TEST(PpoLoss, SurrogateClipsTheRatio) {
  // One sample with A = +1 and rho = 1.5: the clipped 1.2 * A wins the min.
  MinibatchData b;
  const std::vector<double> z{0.0, 0.0};
  b.actions = {0};
  b.old_logprobs = {std::log(0.5) - std::log(1.5)};
  b.old_values = {0.0};
  b.advantages = {1.0};
  b.returns = {0.0};
  const auto terms = ppo_loss(Tensor::from({1, 2}, z), Tensor::zeros({1}), b, preset("ppo"));
  EXPECT_NEAR(terms.policy_loss, -1.2, 1e-12);
}

TEST(PpoLoss, UnboundedClipIsVanillaSurrogate) {
  const TwoSample s;
  auto hp = preset("ppo");
  hp.clip_coeff = 1e300;
  hp.clip_value_loss = false;
  const auto terms = ppo_loss(s.logits_t(), s.values_t(), s.batch, hp);
  double policy = 0.0, value = 0.0;
  for (int i = 0; i < 2; ++i) {
    const auto k = static_cast<std::size_t>(i);
    policy -= std::exp(logp(s.logits, i, s.batch.actions[k]) - s.batch.old_logprobs[k]) * s.batch.advantages[k] / 2;
    value += (s.values[k] - s.batch.returns[k]) * (s.values[k] - s.batch.returns[k]) / 4;
  }
  EXPECT_NEAR(terms.policy_loss, policy, 1e-10);
  EXPECT_NEAR(terms.value_loss, value, 1e-10);
}

TEST(VsopLoss, TwoSampleHandComputation) {
  TwoSample s;
  s.batch.advantages = {2.0, -1.0};
  const auto terms = vsop_loss(s.logits_t(), s.values_t(), s.batch, preset("vsop"));
  const double policy = -(2.0 * logp(s.logits, 0, 0)) / 2.0;
  const double value = ((0.3 - 1.0) * (0.3 - 1.0) + (-0.2 + 0.5) * (-0.2 + 0.5)) / 2.0 / 2.0;
  const double ent = (entropy(s.logits, 0) + entropy(s.logits, 1)) / 2.0;
  EXPECT_NEAR(terms.policy_loss, policy, 1e-10);
  EXPECT_NEAR(terms.value_loss, value, 1e-10);
  EXPECT_NEAR(terms.total.item(), policy + 0.5 * value - 1e-5 * ent, 1e-10);
}

TEST(VsopLoss, ZeroAdvantagesZeroPolicyLoss) {
  TwoSample s;
  s.batch.advantages = {0.0, 0.0};
  EXPECT_EQ(vsop_loss(s.logits_t(), s.values_t(), s.batch, preset("vsop")).policy_loss, 0.0);
}

std::vector<double> policy_gradient(const TwoSample& s, const std::vector<double>& adv) {
  auto hp = preset("vsop");
  hp.entropy_coeff = 0.0;
  hp.value_loss_coeff = 0.0;
  MinibatchData b = s.batch;
  b.advantages = adv;
  Tensor logits = s.logits_t(true);
  backward(vsop_loss(logits, s.values_t(), b, hp).total);
  return {logits.grad().begin(), logits.grad().end()};
}

TEST(VsopLoss, NegativeAdvantagesContributeExactlyZeroGradient) {
  const TwoSample s;
  for (double g : policy_gradient(s, {-0.5, -3.0})) EXPECT_EQ(g, 0.0);
  // Changing a non-positive advantage leaves the gradient bit-identical.
  EXPECT_EQ(policy_gradient(s, {2.0, -1.0}), policy_gradient(s, {2.0, -7.5}));
  EXPECT_EQ(policy_gradient(s, {2.0, 0.0}), policy_gradient(s, {2.0, -1.0}));
  const auto g = policy_gradient(s, {2.0, -1.0});
  for (std::size_t k = 3; k < 6; ++k) EXPECT_EQ(g[k], 0.0);
}

TEST(NormalizeAdvantages, PopulationStatistics) {
  const auto n = normalize_advantages({1.0, 2.0, 3.0, 6.0});
  double m = 0.0, v = 0.0;
  for (double x : n) m += x / 4;
  for (double x : n) v += (x - m) * (x - m) / 4;
  EXPECT_NEAR(m, 0.0, 1e-15);
  EXPECT_NEAR(v, 1.0, 1e-7);
  EXPECT_EQ(normalize_advantages({2.0, 2.0}), (std::vector<double>{0.0, 0.0}));
}

// --- agent ---------------------------------------------------------------

BackboneConfig tiny_net() {
  BackboneConfig c;
  c.obs_height = c.obs_width = 8;
  c.num_actions = 5;
  c.base_channels = {4, 8, 8};
  c.hidden_units = 16;
  return c;
}

Tensor tiny_obs(const AgentHyperparams& hp, std::int64_t n, Rng& rng) {
  BackboneConfig c = tiny_net();
  c.frames = hp.frames;
  c.conv_kind = hp.conv_kind;
  std::vector<double> v(static_cast<std::size_t>(shape_numel(c.observation_shape(n))));
  for (double& x : v) x = rng.uniform();
  return Tensor::from(c.observation_shape(n), v);
}

TEST(Agent, PpoActionsDeterministicForFixedSeeds) {
  auto run = [] {
    Rng init(1), data(2), sample(3), drop(4);
    const Agent agent(preset("ppo"), tiny_net(), init);
    const Tensor obs = tiny_obs(agent.hyperparams(), 6, data);
    auto a = agent.act(obs, sample, drop);
    auto b = agent.act(obs, sample, drop);
    a.actions.insert(a.actions.end(), b.actions.begin(), b.actions.end());
    return a.actions;
  };
  EXPECT_EQ(run(), run());
}

TEST(Agent, PpoIgnoresDropoutStream) {
  Rng init(1), data(2);
  const Agent agent(preset("ppo"), tiny_net(), init);
  const Tensor obs = tiny_obs(agent.hyperparams(), 4, data);
  Rng s1(5), s2(5), d1(1), d2(2);
  EXPECT_EQ(agent.act(obs, s1, d1).logprobs, agent.act(obs, s2, d2).logprobs);
}

TEST(Agent, VsopDropoutDrawsChangeTheActionDistribution) {
  Rng init(1), data(2);
  const Agent agent(preset("vsop"), tiny_net(), init);
  const Tensor obs = tiny_obs(agent.hyperparams(), 1, data);
  auto probs = [&](std::uint64_t mask_seed) {
    Rng drop(mask_seed);
    const auto out = agent.network().forward(obs, Mode::kTrain, 0.075, drop);
    return ops::softmax_row(out.logits.data());
  };
  // Empirical frequencies over 10^4 draws, each under its own mask.
  Rng sample(9), drop(10);
  std::vector<double> freq(5, 0.0);
  for (int i = 0; i < 10000; ++i) freq[static_cast<std::size_t>(agent.act(obs, sample, drop).actions[0])] += 1e-4;
  const auto p = probs(11), q = probs(12);
  double tv = 0.0;
  for (std::size_t a = 0; a < 5; ++a) tv += 0.5 * std::abs(p[a] - q[a]);
  EXPECT_GT(tv, 0.0);
  for (double f : freq) EXPECT_GT(f, 0.0);
}

TEST(Agent, ZeroDropoutVsopHasFixedLogits) {
  auto hp = preset("vsop");
  hp.dropout_rate = 0.0;
  Rng init(1), data(2);
  const Agent agent(hp, tiny_net(), init);
  const Tensor obs = tiny_obs(hp, 3, data);
  Rng s1(5), s2(5), d1(1), d2(2);
  EXPECT_EQ(agent.act(obs, s1, d1).logprobs, agent.act(obs, s2, d2).logprobs);
}

RolloutBuffer synthetic_buffer(const Agent& agent, std::int64_t T, std::int64_t E, Rng& rng) {
  RolloutBuffer buf;
  buf.horizon = T;
  buf.num_envs = E;
  const Tensor obs = tiny_obs(agent.hyperparams(), T * E, rng);
  buf.observation_shape.assign(obs.shape().begin() + 1, obs.shape().end());
  buf.observations.assign(obs.data().begin(), obs.data().end());
  Rng s(1), d(2);
  const auto step = agent.act(obs, s, d);
  buf.actions = step.actions;
  buf.logprobs = step.logprobs;
  buf.values = step.values;
  for (std::int64_t i = 0; i < T * E; ++i) {
    buf.rewards.push_back(rng.normal());
    buf.dones.push_back(rng.bernoulli(0.1) ? 1.0 : 0.0);
  }
  buf.bootstrap_value.assign(static_cast<std::size_t>(E), 0.0);
  buf.compute_advantages(agent.hyperparams().gamma, agent.hyperparams().gae_lambda);
  return buf;
}

AgentHyperparams small_batch(const std::string& name) {
  auto hp = preset(name);
  hp.batch_size = 64;
  hp.num_minibatches = 4;
  return hp;
}

TEST(Agent, UpdatesChangeParametersAndReportFiniteStats) {
  for (const std::string name : {"ppo", "vsop"}) {
    Rng init(1), data(2), shuffle(3), drop(4);
    Agent agent(small_batch(name), tiny_net(), init);
    const auto before = agent.network().parameters()[0].data()[0];
    const auto buf = synthetic_buffer(agent, 16, 4, data);
    const auto stats = name == "ppo" ? ppo_update(agent, buf, shuffle, drop) : vsop_update(agent, buf, shuffle, drop);
    EXPECT_NE(agent.network().parameters()[0].data()[0], before);
    for (double v : {stats.policy_loss, stats.value_loss, stats.entropy, stats.grad_norm, stats.approx_kl})
      EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(stats.grad_norm, 0.0);
    EXPECT_EQ(agent.optimizer_state().step, 3 * 4);
  }
}

TEST(Agent, WrongAlgorithmAndMissingAdvantagesRejected) {
  Rng init(1), data(2), shuffle(3), drop(4);
  Agent ppo(small_batch("ppo"), tiny_net(), init);
  auto buf = synthetic_buffer(ppo, 16, 4, data);
  EXPECT_THROW(vsop_update(ppo, buf, shuffle, drop), std::invalid_argument);
  buf.advantages.clear();
  EXPECT_THROW(ppo_update(ppo, buf, shuffle, drop), std::logic_error);
}

TEST(Agent, NanLossAbortsWithDiagnostics) {
  Rng init(1), data(2), shuffle(3), drop(4);
  Agent agent(small_batch("vsop"), tiny_net(), init);
  auto buf = synthetic_buffer(agent, 16, 4, data);
  buf.returns[5] = NAN;
  try {
    vsop_update(agent, buf, shuffle, drop);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("non-finite"), std::string::npos) << msg;
  }
}

TEST(Agent, SmallStepDescendsAlongTheGradient) {
  // Plain gradient step of size eps changes the loss by about -eps |g|^2.
  for (const std::string name : {"ppo", "vsop"}) {
    Rng init(1), data(2);
    Agent agent(small_batch(name), tiny_net(), init);
    const auto buf = synthetic_buffer(agent, 8, 2, data);
    std::vector<std::int64_t> all(16);
    for (std::int64_t i = 0; i < 16; ++i) all[static_cast<std::size_t>(i)] = i;
    MinibatchData mb;
    mb.actions = buf.actions;
    mb.old_logprobs = buf.logprobs;
    mb.old_values = buf.values;
    mb.advantages = buf.advantages;
    mb.returns = buf.returns;
    const Tensor obs = buf.gather_observations(all);
    auto loss = [&]() {
      Rng drop(7);
      const auto out = agent.network().forward(obs, Mode::kTrain, agent.hyperparams().dropout(), drop);
      return name == "ppo" ? ppo_loss(out.logits, out.value, mb, agent.hyperparams())
                           : vsop_loss(out.logits, out.value, mb, agent.hyperparams());
    };
    auto params = agent.network().parameters();
    zero_grads(params);
    const auto l0 = loss();
    backward(l0.total);
    double g2 = 0.0;
    for (auto& p : params)
      for (double g : p.grad()) g2 += g * g;
    const double eps = 1e-6 / std::sqrt(g2);
    for (auto& p : params) {
      auto d = p.mutable_data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= eps * p.grad()[i];
    }
    const double change = loss().total.item() - l0.total.item();
    EXPECT_NEAR(change / (-eps * g2), 1.0, 1e-3) << name;
  }
}

// --- trainer ---------------------------------------------------------------

TrainOptions tiny_training(std::int64_t steps) {
  TrainOptions o;
  o.env_name = "blink_door";
  o.seed = 3;
  o.total_steps = steps;
  o.num_envs = 4;
  o.eval_interval = 128;
  o.eval_episodes = 4;
  o.eval_envs = 4;
  o.observation = {8, 8};
  o.base_channels = {4, 8, 8};
  o.hidden_units = 16;
  return o;
}

AgentHyperparams tiny_vsop3d() {
  auto hp = preset("vsop3d");
  hp.frames = 4;
  hp.batch_size = 64;
  hp.num_minibatches = 2;
  hp.epochs_per_update = 1;
  return hp;
}

std::string timeline_text(const Trainer& t) {
  std::string s;
  for (const auto& e : t.timeline())
    s += std::to_string(e.step) + (e.split == Split::kTrain ? "t" : "e") + std::to_string(e.level_seed) + ":" +
         std::to_string(e.episodic_return) + ";";
  for (const auto& u : t.updates()) s += std::to_string(u.stats.policy_loss) + ",";
  return s;
}

TEST(Trainer, ZeroBudgetDoesNothing) {
  Trainer t(tiny_vsop3d(), tiny_training(0));
  EXPECT_TRUE(t.finished());
  t.run();
  EXPECT_TRUE(t.timeline().empty());
  EXPECT_EQ(t.updates_done(), 0);
}

TEST(Trainer, HorizonIsBatchOverEnvsAndStepsRoundUp) {
  Trainer t(tiny_vsop3d(), tiny_training(100));
  EXPECT_EQ(t.horizon(), 16);
  t.run();
  EXPECT_EQ(t.global_step(), 128);
  EXPECT_EQ(t.updates_done(), 2);
  bool saw_test = false;
  for (const auto& e : t.timeline()) saw_test |= e.split == Split::kTest;
  EXPECT_TRUE(saw_test);
}

TEST(Trainer, SameSeedSameRun) {
  Trainer a(tiny_vsop3d(), tiny_training(256)), b(tiny_vsop3d(), tiny_training(256));
  a.run();
  b.run();
  EXPECT_EQ(timeline_text(a), timeline_text(b));
  EXPECT_EQ(a.checkpoint().encode(), b.checkpoint().encode());
}

TEST(Trainer, ResumeFromCheckpointMatchesUninterruptedRun) {
  Trainer full(tiny_vsop3d(), tiny_training(256));
  full.run();

  Trainer first(tiny_vsop3d(), tiny_training(256));
  first.step_update();
  first.step_update();
  const std::string saved = first.checkpoint().encode();
  Trainer second(tiny_vsop3d(), tiny_training(256));
  second.restore(Checkpoint::decode(saved));
  EXPECT_EQ(second.global_step(), 128);
  second.run();
  EXPECT_EQ(timeline_text(second), timeline_text(full));
  EXPECT_EQ(second.checkpoint().encode(), full.checkpoint().encode());
}

TEST(Trainer, RestoreRejectsForeignCheckpoint) {
  Trainer a(tiny_vsop3d(), tiny_training(64));
  auto other = tiny_vsop3d();
  other.frames = 2;
  Trainer b(other, tiny_training(64));
  EXPECT_THROW(b.restore(a.checkpoint()), CheckpointError);
}

TEST(Checkpoint, EncodeDecodeRoundTripIsExact) {
  Checkpoint c;
  c.config = tiny_net();
  c.put_f64("w", {0.1, -0.0, 1e-300, std::numeric_limits<double>::infinity()});
  c.put_i64("n", {-1, 0, std::numeric_limits<std::int64_t>::max()});
  c.put_bytes("s", std::string("a\0b", 3));
  const std::string bytes = c.encode();
  const auto d = Checkpoint::decode(bytes);
  EXPECT_EQ(d.encode(), bytes);
  EXPECT_EQ(d.config, c.config);
  EXPECT_TRUE(std::signbit(d.f64("w")[1]));
  EXPECT_EQ(d.i64("n")[2], std::numeric_limits<std::int64_t>::max());
  EXPECT_EQ(d.bytes("s").size(), 3u);
  EXPECT_THROW(d.f64("n"), CheckpointError);
  EXPECT_THROW(d.f64("missing"), CheckpointError);
}

TEST(Checkpoint, CorruptionIsDetected) {
  Checkpoint c;
  c.config = tiny_net();
  c.put_f64("w", {1.0, 2.0});
  const std::string bytes = c.encode();
  EXPECT_THROW(Checkpoint::decode(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  std::string bad_magic = bytes;
  bad_magic[0] ^= 0x5a;
  EXPECT_THROW(Checkpoint::decode(bad_magic), CheckpointError);
  EXPECT_THROW(Checkpoint::decode(bytes + "x"), CheckpointError);
}

}  // namespace
}  // namespace vsop3d
