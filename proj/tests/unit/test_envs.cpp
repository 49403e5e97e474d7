#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "json.hpp"
#include "vsop3d/envs/env.hpp"
#include "vsop3d/envs/games.hpp"

namespace vsop3d {
namespace {

EnvOptions small_obs() { return {8, 8}; }

LevelSeed level(const std::string& env, std::uint64_t seed, Split split = Split::kTest) { return {env, seed, split}; }

double run_episode(Env& env, const LevelSeed& lvl, bool oracle, Rng& rng) {
  env.reset(lvl);
  StepResult r;
  while (!env.done()) {
    const std::int64_t a =
        oracle ? env.oracle_action() : static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(env.spec().num_actions)));
    r = env.step(a);
  }
  EXPECT_LE(env.steps(), env.spec().max_episode_steps);
  return r.episode_return;
}

TEST(Registry, NamesAndUnknown) {
  EXPECT_EQ(env_names(), (std::vector<std::string>{"chase_dot", "blink_door", "corridor_dodge"}));
  EXPECT_THROW(make_env("coinrun"), EnvError);
  EXPECT_THROW(env_spec("coinrun"), EnvError);
}

TEST(Registry, SpecsAreConsistent) {
  for (const auto& name : env_names()) {
    const auto spec = env_spec(name);
    EXPECT_EQ(spec.name, name);
    EXPECT_LT(spec.score_min, spec.score_max);
    EXPECT_LE(spec.max_episode_steps, 256);
    EXPECT_GE(spec.num_actions, 3);
    EXPECT_LE(spec.num_actions, 15);
    EXPECT_EQ(spec.obs_height, 32);
    EXPECT_EQ(make_env(name)->spec().num_actions, spec.num_actions);
  }
}

class EachEnv : public ::testing::TestWithParam<std::string> {};

TEST_P(EachEnv, SameSeedSameObservationBytes) {
  auto a = make_env(GetParam()), b = make_env(GetParam());
  EXPECT_EQ(a->reset(level(GetParam(), 123)), b->reset(level(GetParam(), 123)));
}

TEST_P(EachEnv, DifferentSeedsDifferentObservations) {
  auto env = make_env(GetParam());
  int differ = 0;
  for (std::uint64_t s = 0; s < 100; ++s) differ += env->reset(level(GetParam(), 2 * s)) != env->reset(level(GetParam(), 2 * s + 1));
  EXPECT_GE(differ, 99);
}

TEST_P(EachEnv, ObservationShapeAndRange) {
  for (const EnvOptions& opt : {EnvOptions{}, small_obs(), EnvOptions{64, 64}}) {
    auto env = make_env(GetParam(), opt);
    Rng rng(1);
    auto obs = env->reset(level(GetParam(), 5));
    for (int t = 0; t < 20 && !env->done(); ++t) {
      ASSERT_EQ(obs.size(), static_cast<std::size_t>(opt.obs_height * opt.obs_width * 3));
      for (double v : obs) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
      obs = env->step(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(env->spec().num_actions)))).observation;
    }
  }
}

TEST_P(EachEnv, ActionSequenceDeterminesEverything) {
  auto play = [&] {
    auto env = make_env(GetParam(), small_obs());
    Rng rng(77);
    std::vector<double> trace;
    for (int ep = 0; ep < 3; ++ep) {
      env->reset(level(GetParam(), 40 + ep));
      while (!env->done()) {
        const auto r = env->step(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(env->spec().num_actions))));
        trace.insert(trace.end(), r.observation.begin(), r.observation.end());
        trace.push_back(r.reward);
        trace.push_back(r.done);
      }
    }
    return trace;
  };
  EXPECT_EQ(play(), play());
}

TEST_P(EachEnv, ProtocolErrors) {
  auto env = make_env(GetParam());
  EXPECT_THROW(env->step(0), EnvError);  // never reset
  env->reset(level(GetParam(), 1));
  EXPECT_THROW(env->step(-1), EnvError);
  EXPECT_THROW(env->step(env->spec().num_actions), EnvError);
  while (!env->done()) env->step(env->oracle_action());
  EXPECT_THROW(env->step(0), EnvError);
  EXPECT_THROW(env->reset(level("other", 1)), EnvError);
}

TEST_P(EachEnv, RandomEpisodesStayWithinBounds) {
  auto env = make_env(GetParam(), small_obs());
  Rng rng(3);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const double ret = run_episode(*env, level(GetParam(), i), false, rng);
    ASSERT_GE(ret, env->spec().score_min);
    ASSERT_LE(ret, env->spec().score_max);
  }
}

TEST_P(EachEnv, OracleSolvesEveryLevelRandomDoesNot) {
  auto env = make_env(GetParam(), small_obs());
  Rng rng(4), seeds(5);
  const std::int64_t clamps_before = normalization_clamp_count();
  double random_total = 0.0;
  const int n = 300;
  for (int i = 0; i < n; ++i) {
    const auto lvl = level(GetParam(), i < 50 ? static_cast<std::uint64_t>(i) : seeds.next_u64(), i < 50 ? Split::kTrain : Split::kTest);
    ASSERT_GE(normalized_return(env->spec(), run_episode(*env, lvl, true, rng)), 0.9) << "seed " << lvl.seed;
    random_total += normalized_return(env->spec(), run_episode(*env, lvl, false, rng));
  }
  EXPECT_LT(random_total / n, 0.5);
  EXPECT_EQ(normalization_clamp_count(), clamps_before);
}

TEST_P(EachEnv, SaveLoadRoundTripMidEpisode) {
  auto a = make_env(GetParam(), small_obs()), b = make_env(GetParam(), small_obs());
  Rng rng(6);
  a->reset(level(GetParam(), 9));
  for (int t = 0; t < 5 && !a->done(); ++t) a->step(0);
  const auto state = a->save_state();
  b->load_state(state);
  EXPECT_EQ(b->save_state(), state);
  EXPECT_EQ(a->observation(), b->observation());
  while (!a->done()) {
    const auto act = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(a->spec().num_actions)));
    const auto ra = a->step(act), rb = b->step(act);
    ASSERT_EQ(ra.observation, rb.observation);
    ASSERT_EQ(ra.reward, rb.reward);
    ASSERT_EQ(ra.done, rb.done);
  }
  auto truncated = state;
  truncated.pop_back();
  EXPECT_THROW(b->load_state(truncated), EnvError);
}

INSTANTIATE_TEST_SUITE_P(Games, EachEnv, ::testing::ValuesIn(env_names()),
                         [](const auto& info) { return info.param; });

TEST(LevelSampler, TrainAndTestSplitsAreDisjoint) {
  LevelSampler sampler("chase_dot", 50, Rng(1));
  std::set<std::uint64_t> train;
  for (int i = 0; i < 5000; ++i) {
    const auto t = sampler.sample(Split::kTrain);
    ASSERT_LT(t.seed, 50u);
    ASSERT_EQ(t.split, Split::kTrain);
    train.insert(t.seed);
    ASSERT_GE(sampler.sample(Split::kTest).seed, 50u);
  }
  EXPECT_EQ(train.size(), 50u);
  EXPECT_THROW(LevelSampler("chase_dot", 0, Rng(1)), EnvError);
}

TEST(NormalizedReturn, EndpointsMidpointAndClamp) {
  const auto spec = env_spec("blink_door");
  EXPECT_EQ(normalized_return(spec, spec.score_min), 0.0);
  EXPECT_EQ(normalized_return(spec, spec.score_max), 1.0);
  EXPECT_EQ(normalized_return(spec, 0.5 * (spec.score_min + spec.score_max)), 0.5);
  const auto before = normalization_clamp_count();
  EXPECT_EQ(normalized_return(spec, 7.0), 1.0);
  EXPECT_EQ(normalized_return(spec, -7.0), 0.0);
  EXPECT_EQ(normalization_clamp_count(), before + 2);
}

TEST(BlinkDoor, NoopAwayFromTheDoorIsQuiet) {
  BlinkDoor env(small_obs());
  env.reset(level("blink_door", 3));
  ASSERT_GE(env.agent_row, 2);
  const auto r = env.step(kNoop);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(r.done);
}

TEST(BlinkDoor, EnteringOpenDoorScoresAndEnds) {
  BlinkDoor env(small_obs());
  env.reset(level("blink_door", 3));
  StepResult r;
  while (!env.done()) r = env.step(env.oracle_action());
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_EQ(r.episode_return, 1.0);
}

TEST(BlinkDoor, PhaseIsInvisibleInOneFrame) {
  BlinkDoor a(small_obs()), b(small_obs());
  a.reset(level("blink_door", 11));
  b.reset(level("blink_door", 11));
  // Different phases that are both closed at the current tick look the same.
  a.phase = (4 - a.tick % 4 + 1) % 4;
  b.phase = (4 - b.tick % 4 + 2) % 4;
  ASSERT_FALSE(a.door_open_at(a.tick));
  ASSERT_FALSE(b.door_open_at(b.tick));
  EXPECT_EQ(a.observation(), b.observation());
}

TEST(ChaseDot, VelocityIsInvisibleInOneFrame) {
  int outcome_differs = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ChaseDot a(small_obs()), b(small_obs());
    a.reset(level("chase_dot", seed));
    b.reset(level("chase_dot", seed));
    // From the spawn row both directions reach the same column (the bounce
    // path has period 14 on the 8-wide grid), so compare one row lower.
    EXPECT_EQ(a.landing_column(), [&] {
      ChaseDot c = a;
      c.velocity = -c.velocity;
      return c.landing_column();
    }());
    a.step(kNoop);
    b.step(kNoop);
    b.velocity = -a.velocity;
    ASSERT_EQ(a.observation(), b.observation());
    outcome_differs += a.landing_column() != b.landing_column();
  }
  // The hidden velocity changes where the dot lands on most levels.
  EXPECT_GT(outcome_differs, 25);
}

TEST(CorridorDodge, LaneMotionIsInvisibleInOneFrame) {
  CorridorDodge a(small_obs()), b(small_obs());
  a.reset(level("corridor_dodge", 13));
  b.reset(level("corridor_dodge", 13));
  for (auto& v : b.lane_velocity) v = v == 0 ? 1 : 0;
  EXPECT_EQ(a.observation(), b.observation());
}

TEST(CorridorDodge, ReachingTheTopScores) {
  CorridorDodge env(small_obs());
  env.reset(level("corridor_dodge", 14));
  StepResult r;
  while (!env.done()) r = env.step(env.oracle_action());
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_EQ(env.agent_row, 0);
}

TEST(Trace, JsonLines) {
  std::ostringstream os;
  write_trace_line(os, 3, 2, 0.5, false);
  write_trace_line(os, 4, 1, -1.0, true);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["step"], 3);
  EXPECT_EQ(j["action"], 2);
  EXPECT_EQ(j["reward"], 0.5);
  EXPECT_EQ(j["done"], false);
  std::getline(in, line);
  EXPECT_EQ(nlohmann::json::parse(line)["done"], true);
}

}  // namespace
}  // namespace vsop3d
