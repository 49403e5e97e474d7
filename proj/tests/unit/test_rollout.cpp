#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vsop3d/envs/games.hpp"
#include "vsop3d/rl/rollout.hpp"

namespace vsop3d {
namespace {

// H x W x 3 frame whose every value is `v`, with a marker in pixel 0.
std::vector<double> frame(double v, std::int64_t h = 2, std::int64_t w = 2) {
  std::vector<double> f(static_cast<std::size_t>(h * w * 3), v);
  f[0] = v + 0.5;
  return f;
}

TEST(ChannelMajor, HandWorkedTranspose) {
  // 1 x 2 image: pixel 0 = (1,2,3), pixel 1 = (4,5,6).
  EXPECT_EQ(to_channel_major({1, 2, 3, 4, 5, 6}, 1, 2), (std::vector<double>{1, 4, 2, 5, 3, 6}));
}

TEST(FrameStack, CapacityOneIsTheObservation) {
  FrameStack s(1, 2, 2);
  s.reset(frame(0.1));
  s.push(frame(0.2));
  EXPECT_EQ(s.stacked(ConvKind::kConv2d), to_channel_major(frame(0.2), 2, 2));
  EXPECT_EQ(s.stacked(ConvKind::kConv3d), to_channel_major(frame(0.2), 2, 2));
}

TEST(FrameStack, ResetRepeatsTheFirstFrame) {
  FrameStack s(8, 2, 2);
  s.reset(frame(0.1));
  const auto r = to_channel_major(frame(0.1), 2, 2);
  for (int i = 0; i < 8; ++i) EXPECT_TRUE(std::equal(r.begin(), r.end(), s.frame(i)));
}

TEST(FrameStack, AfterThreeSteps) {
  FrameStack s(8, 2, 2);
  s.reset(frame(0.0));
  s.push(frame(0.1));
  s.push(frame(0.2));
  s.push(frame(0.3));
  const std::vector<double> expect_tag{0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.3};
  // Channel-stacked layout: frame i occupies channels 3i..3i+2.
  const auto flat2d = s.stacked(ConvKind::kConv2d);
  // Depth layout: channel c, frame i starts at (c * 8 + i) * H * W.
  const auto flat3d = s.stacked(ConvKind::kConv3d);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_DOUBLE_EQ(flat2d[i * 12], expect_tag[i] + 0.5);
    EXPECT_DOUBLE_EQ(flat2d[i * 12 + 1], expect_tag[i]);
    EXPECT_DOUBLE_EQ(flat3d[i * 4], expect_tag[i] + 0.5);
    for (std::size_t c = 1; c < 3; ++c) EXPECT_DOUBLE_EQ(flat3d[(c * 8 + i) * 4], expect_tag[i]);
  }
}

TEST(FrameStack, ResetForgetsThePreviousEpisode) {
  FrameStack s(4, 2, 2);
  s.reset(frame(0.0));
  for (int i = 1; i <= 6; ++i) s.push(frame(0.1 * i));
  s.reset(frame(0.9));
  FrameStack fresh(4, 2, 2);
  fresh.reset(frame(0.9));
  EXPECT_EQ(s.stacked(ConvKind::kConv3d), fresh.stacked(ConvKind::kConv3d));
}

TEST(FrameStack, SaveLoad) {
  FrameStack s(3, 2, 2), t(3, 2, 2);
  s.reset(frame(0.0));
  s.push(frame(0.4));
  t.load_state(s.save_state());
  s.push(frame(0.7));
  t.push(frame(0.7));
  EXPECT_EQ(s.stacked(ConvKind::kConv2d), t.stacked(ConvKind::kConv2d));
}

TEST(Gae, LambdaZeroIsOneStepResidual) {
  const std::vector<double> r{1, 2, 3}, v{0.5, -1, 2}, d{0, 0, 0}, b{4};
  const auto out = compute_gae(r, v, d, b, 3, 1, 0.9, 0.0);
  EXPECT_DOUBLE_EQ(out.advantages[0], 1 + 0.9 * -1 - 0.5);
  EXPECT_DOUBLE_EQ(out.advantages[1], 2 + 0.9 * 2 + 1);
  EXPECT_DOUBLE_EQ(out.advantages[2], 3 + 0.9 * 4 - 2);
}

TEST(Gae, MonteCarloLimit) {
  const std::vector<double> r{1, 0, 2, -1}, zeros(4, 0.0), b{0};
  const auto out = compute_gae(r, zeros, zeros, b, 4, 1, 1.0, 1.0);
  EXPECT_EQ(out.advantages, (std::vector<double>{2, 1, 1, -1}));
  EXPECT_EQ(out.returns, out.advantages);
}

TEST(Gae, ThreeStepExample) {
  const std::vector<double> r{1, 0, 2}, v{0.5, 0.5, 0.5}, d{0, 0, 0}, b{0.5};
  const auto out = compute_gae(r, v, d, b, 3, 1, 0.999, 0.881);
  const auto oracle = oracle::gae_recursion(r, v, d, b, 3, 1, 0.999, 0.881);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(out.advantages[static_cast<std::size_t>(i)], oracle[static_cast<std::size_t>(i)], 1e-12);
    EXPECT_NEAR(out.returns[static_cast<std::size_t>(i)], oracle[static_cast<std::size_t>(i)] + 0.5, 1e-12);
  }
}

TEST(Gae, RandomInstancesMatchRecursionAndClosedForm) {
  Rng rng(31);
  for (int n = 0; n < 100; ++n) {
    const std::int64_t T = 1 + rng.below(16), E = 1 + rng.below(4);
    const double g = rng.uniform(), l = rng.uniform();
    std::vector<double> r(static_cast<std::size_t>(T * E)), v(r.size()), d(r.size()), b(static_cast<std::size_t>(E));
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = rng.normal();
      v[i] = rng.normal();
      d[i] = rng.bernoulli(0.25) ? 1.0 : 0.0;
    }
    for (double& x : b) x = rng.normal();
    const auto out = compute_gae(r, v, d, b, T, E, g, l);
    const auto rec = oracle::gae_recursion(r, v, d, b, T, E, g, l);
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t e = 0; e < E; ++e) {
        const auto i = static_cast<std::size_t>(t * E + e);
        ASSERT_NEAR(out.advantages[i], rec[i], 1e-10);
        ASSERT_NEAR(out.advantages[i], oracle::gae_closed_form(r, v, d, b, T, E, g, l, t, e), 1e-10);
        ASSERT_DOUBLE_EQ(out.returns[i], out.advantages[i] + v[i]);
      }
  }
}

TEST(Gae, DoneMasksEverythingAfterIt) {
  Rng rng(32);
  const std::int64_t T = 10;
  std::vector<double> r(T), v(T), d(T, 0.0), b{rng.normal()};
  for (std::int64_t i = 0; i < T; ++i) {
    r[static_cast<std::size_t>(i)] = rng.normal();
    v[static_cast<std::size_t>(i)] = rng.normal();
  }
  d[4] = 1.0;
  const auto before = compute_gae(r, v, d, b, T, 1, 0.99, 0.9);
  for (std::size_t i = 5; i < 10; ++i) {
    r[i] += 10 * rng.normal();
    v[i] += 10 * rng.normal();
  }
  b[0] = 123.0;
  const auto after = compute_gae(r, v, d, b, T, 1, 0.99, 0.9);
  for (std::size_t i = 0; i <= 4; ++i) EXPECT_EQ(before.advantages[i], after.advantages[i]);
}

TEST(Gae, InputValidation) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(compute_gae({NAN}, one, {0.0}, one, 1, 1, 0.9, 0.9), std::invalid_argument);
  EXPECT_THROW(compute_gae(one, one, {0.0}, {NAN}, 1, 1, 0.9, 0.9), std::invalid_argument);
  EXPECT_THROW(compute_gae(one, one, {0.0}, one, 1, 1, 1.1, 0.9), std::invalid_argument);
  EXPECT_THROW(compute_gae(one, one, {0.0}, one, 1, 1, 0.9, -0.1), std::invalid_argument);
  EXPECT_THROW(compute_gae(one, one, {0.0}, one, 2, 1, 0.9, 0.9), DimensionError);
}

VecEnv make_vec(std::int64_t n, std::int64_t frames = 4, ConvKind kind = ConvKind::kConv3d, std::uint64_t seed = 1,
                const std::string& name = "blink_door") {
  return VecEnv(name, n, 50, Split::kTrain, EnvOptions{8, 8}, frames, kind, Rng(seed));
}

// Deterministic stand-in policy: action from the observation checksum.
PolicyStep checksum_policy(const Tensor& obs) {
  PolicyStep p;
  const std::int64_t n = obs.dim(0), per = obs.numel() / n;
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::int64_t k = 0; k < per; ++k) s += obs[i * per + k] * static_cast<double>(k % 7);
    p.actions.push_back(static_cast<std::int64_t>(std::fmod(std::abs(s) * 1000.0, 3.0)));
    p.logprobs.push_back(-std::log(5.0));
    p.values.push_back(std::fmod(s, 1.0));
  }
  return p;
}

std::vector<double> zero_values(const Tensor& obs) { return std::vector<double>(static_cast<std::size_t>(obs.dim(0)), 0.0); }

TEST(VecEnv, ObservationShapes) {
  auto a = make_vec(3, 8, ConvKind::kConv3d);
  EXPECT_EQ(a.observation_shape(), (Shape{3, 8, 8, 8}));
  auto b = make_vec(3, 8, ConvKind::kConv2d);
  EXPECT_EQ(b.observation_shape(), (Shape{24, 8, 8}));
  b.reset_all();
  EXPECT_EQ(b.observations().shape(), (Shape{3, 24, 8, 8}));
}

TEST(Collect, HorizonFourTwoEnvsGivesEightTransitions) {
  auto envs = make_vec(2);
  envs.reset_all();
  std::int64_t step = 0;
  std::vector<EpisodeRecord> episodes;
  const auto buf = collect(envs, checksum_policy, zero_values, 4, step, &episodes);
  EXPECT_EQ(buf.size(), 8);
  EXPECT_EQ(buf.actions.size(), 8u);
  EXPECT_EQ(buf.rewards.size(), 8u);
  EXPECT_EQ(buf.observations.size(), static_cast<std::size_t>(8 * envs.observation_size()));
  EXPECT_EQ(buf.bootstrap_value.size(), 2u);
  EXPECT_EQ(step, 8);
  EXPECT_FALSE(buf.has_advantages());
}

TEST(Collect, DeterministicAcrossRuns) {
  auto run = [] {
    auto envs = make_vec(3);
    envs.reset_all();
    std::int64_t step = 0;
    std::vector<EpisodeRecord> episodes;
    auto a = collect(envs, checksum_policy, zero_values, 32, step, &episodes);
    auto b = collect(envs, checksum_policy, zero_values, 32, step, &episodes);
    a.observations.insert(a.observations.end(), b.observations.begin(), b.observations.end());
    a.rewards.insert(a.rewards.end(), b.rewards.begin(), b.rewards.end());
    return std::make_pair(a.observations, a.rewards);
  };
  EXPECT_EQ(run(), run());
}

TEST(Collect, ContainedEpisodeRewardsSumToItsReturn) {
  for (const std::string name : {"chase_dot", "blink_door", "corridor_dodge"}) {
    auto envs = make_vec(2, 1, ConvKind::kConv2d, 3, name);
    envs.reset_all();
    std::int64_t step = 0;
    std::vector<EpisodeRecord> episodes;
    const std::int64_t T = 600;
    const auto buf = collect(envs, checksum_policy, zero_values, T, step, &episodes);
    std::size_t checked = 0;
    for (std::int64_t e = 0; e < 2; ++e) {
      // Episodes ending after the first done in this column started inside the buffer.
      std::vector<double> sums;
      bool started = false;
      double acc = 0.0;
      for (std::int64_t t = 0; t < T; ++t) {
        const auto i = static_cast<std::size_t>(t * 2 + e);
        acc += buf.rewards[i];
        if (buf.dones[i] != 0.0) {
          if (started) sums.push_back(acc);
          started = true;
          acc = 0.0;
        }
      }
      checked += sums.size();
      // Each complete in-buffer episode's reward sum is a valid return.
      for (double s : sums) {
        EXPECT_GE(s, envs.spec().score_min);
        EXPECT_LE(s, envs.spec().score_max);
      }
    }
    EXPECT_GT(checked, 0u) << name;
  }
}

TEST(Collect, EpisodeRecordsMatchRewardSums) {
  // One env: the records list episodes in completion order, so the k-th
  // record lines up with the k-th done in the buffer.
  auto envs = make_vec(1, 2, ConvKind::kConv2d, 4, "chase_dot");
  envs.reset_all();
  std::int64_t step = 0;
  std::vector<EpisodeRecord> episodes;
  const auto buf = collect(envs, checksum_policy, zero_values, 1000, step, &episodes);
  std::vector<double> sums;
  std::vector<std::int64_t> end_steps;
  double acc = 0.0;
  for (std::int64_t t = 0; t < 1000; ++t) {
    acc += buf.rewards[static_cast<std::size_t>(t)];
    if (buf.dones[static_cast<std::size_t>(t)] != 0.0) {
      sums.push_back(acc);
      end_steps.push_back(t + 1);
      acc = 0.0;
    }
  }
  ASSERT_EQ(sums.size(), episodes.size());
  ASSERT_GE(sums.size(), 3u);
  for (std::size_t k = 0; k < sums.size(); ++k) {
    EXPECT_EQ(episodes[k].episodic_return, sums[k]);
    EXPECT_EQ(episodes[k].step, end_steps[k]);
    EXPECT_EQ(episodes[k].normalized_return, normalized_return(envs.spec(), sums[k]));
    EXPECT_EQ(episodes[k].split, Split::kTrain);
    EXPECT_LT(episodes[k].level_seed, 50u);
  }
}

TEST(Collect, StackRestartsAfterEpisodeEnd) {
  auto envs = make_vec(1, 4, ConvKind::kConv3d, 5, "blink_door");
  envs.reset_all();
  for (int guard = 0; guard < 100; ++guard) {
    const auto out = envs.step({kUp});
    if (out.dones[0] != 0.0) {
      // All four slots now hold the new episode's first frame.
      const Tensor obs = envs.observations();
      const std::int64_t hw = 64;
      for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t f = 1; f < 4; ++f)
          for (std::int64_t k = 0; k < hw; ++k) ASSERT_EQ(obs[(c * 4 + f) * hw + k], obs[(c * 4) * hw + k]);
      return;
    }
  }
  FAIL() << "episode never ended";
}

TEST(VecEnv, SaveLoadContinuesIdentically) {
  auto a = make_vec(2), b = make_vec(2, 4, ConvKind::kConv3d, 99);
  a.reset_all();
  for (int t = 0; t < 7; ++t) a.step({1, 3});
  b.load_state(a.save_state());
  for (int t = 0; t < 50; ++t) {
    const std::vector<std::int64_t> act{t % 5, (t * 3) % 5};
    const auto x = a.step(act), y = b.step(act);
    ASSERT_EQ(x.rewards, y.rewards);
    ASSERT_EQ(x.dones, y.dones);
  }
  const Tensor oa = a.observations(), ob = b.observations();
  EXPECT_TRUE(std::equal(oa.data().begin(), oa.data().end(), ob.data().begin()));
}

TEST(RolloutBuffer, GatherAndAdvantages) {
  auto envs = make_vec(2);
  envs.reset_all();
  std::int64_t step = 0;
  auto buf = collect(envs, checksum_policy, zero_values, 5, step, nullptr);
  const Tensor g = buf.gather_observations({7, 0});
  const std::int64_t per = envs.observation_size();
  EXPECT_EQ(g.shape()[0], 2);
  for (std::int64_t k = 0; k < per; ++k) {
    ASSERT_EQ(g[k], buf.observations[static_cast<std::size_t>(7 * per + k)]);
    ASSERT_EQ(g[per + k], buf.observations[static_cast<std::size_t>(k)]);
  }
  buf.compute_advantages(0.99, 0.95);
  const auto ref = compute_gae(buf.rewards, buf.values, buf.dones, buf.bootstrap_value, 5, 2, 0.99, 0.95);
  EXPECT_EQ(buf.advantages, ref.advantages);
  EXPECT_EQ(buf.returns, ref.returns);
  buf.clear();
  EXPECT_EQ(buf.size(), 0);
  EXPECT_FALSE(buf.has_advantages());
}

}  // namespace
}  // namespace vsop3d
