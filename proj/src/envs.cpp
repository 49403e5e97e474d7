#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "vsop3d/envs/env.hpp"
#include "vsop3d/envs/games.hpp"

namespace vsop3d {

namespace {
std::atomic<std::int64_t> g_clamp_count{0};
}

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Env::Env(EnvSpec spec) : spec_(std::move(spec)) {
  if (spec_.grid < 1 || spec_.obs_height % spec_.grid != 0 || spec_.obs_width % spec_.grid != 0) {
    throw EnvError(spec_.name + ": observation " + std::to_string(spec_.obs_height) + "x" +
                   std::to_string(spec_.obs_width) + " is not a multiple of the " + std::to_string(spec_.grid) +
                   "-cell grid");
  }
}

std::vector<double> Env::reset(const LevelSeed& level) {
  if (level.env_name != spec_.name) {
    throw EnvError("level for '" + level.env_name + "' passed to environment '" + spec_.name + "'");
  }
  level_ = level;
  rng_ = Rng(splitmix64(fnv1a64(spec_.name) ^ splitmix64(level.seed)));
  background_ = {0.05 + 0.25 * rng_.uniform(), 0.05 + 0.25 * rng_.uniform(), 0.05 + 0.25 * rng_.uniform()};
  generate(rng_);
  steps_ = 0;
  done_ = false;
  episode_return_ = 0.0;
  return observation();
}

StepResult Env::step(std::int64_t action) {
  if (done_) throw EnvError(spec_.name + ": step called on a finished episode; reset first");
  if (action < 0 || action >= spec_.num_actions) {
    throw EnvError(spec_.name + ": action " + std::to_string(action) + " outside [0, " +
                   std::to_string(spec_.num_actions) + ")");
  }
  const Outcome outcome = advance(action);
  ++steps_;
  episode_return_ += outcome.reward;
  done_ = outcome.terminal || steps_ >= spec_.max_episode_steps;
  StepResult result;
  result.observation = observation();
  result.reward = outcome.reward;
  result.done = done_;
  result.episode_return = episode_return_;
  return result;
}

std::vector<double> Env::observation() const {
  std::vector<double> canvas(static_cast<std::size_t>(spec_.obs_height * spec_.obs_width * 3));
  for (std::size_t i = 0; i < canvas.size(); i += 3) {
    canvas[i] = background_[0];
    canvas[i + 1] = background_[1];
    canvas[i + 2] = background_[2];
  }
  render(canvas);
  return canvas;
}

void Env::fill_cell(std::vector<double>& canvas, std::int64_t row, std::int64_t col, const Color& color) const {
  const std::int64_t ch = spec_.obs_height / spec_.grid, cw = spec_.obs_width / spec_.grid;
  for (std::int64_t y = row * ch; y < (row + 1) * ch; ++y) {
    for (std::int64_t x = col * cw; x < (col + 1) * cw; ++x) {
      double* px = canvas.data() + (y * spec_.obs_width + x) * 3;
      px[0] = color[0];
      px[1] = color[1];
      px[2] = color[2];
    }
  }
}

Color Env::jittered(const Color& base, double amount) {
  Color c{};
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(base[i] + amount * (2.0 * rng_.uniform() - 1.0), 0.0, 1.0);
  return c;
}

std::vector<std::int64_t> Env::save_state() const {
  std::vector<std::int64_t> out{static_cast<std::int64_t>(level_.seed),
                                level_.split == Split::kTrain ? 0 : 1,
                                steps_,
                                done_ ? 1 : 0,
                                std::bit_cast<std::int64_t>(episode_return_),
                                static_cast<std::int64_t>(rng_.seed()),
                                static_cast<std::int64_t>(rng_.counter())};
  for (double c : background_) out.push_back(std::bit_cast<std::int64_t>(c));
  save_game(out);
  return out;
}

void Env::load_state(const std::vector<std::int64_t>& state) {
  if (state.size() < 10) throw EnvError(spec_.name + ": truncated environment state");
  level_.env_name = spec_.name;
  level_.seed = static_cast<std::uint64_t>(state[0]);
  level_.split = state[1] == 0 ? Split::kTrain : Split::kTest;
  steps_ = state[2];
  done_ = state[3] != 0;
  episode_return_ = std::bit_cast<double>(state[4]);
  rng_ = Rng(static_cast<std::uint64_t>(state[5]), static_cast<std::uint64_t>(state[6]));
  for (int i = 0; i < 3; ++i) background_[i] = std::bit_cast<double>(state[7 + i]);
  if (load_game(state, 10) != state.size()) throw EnvError(spec_.name + ": malformed environment state");
}

std::vector<std::string> env_names() { return {"chase_dot", "blink_door", "corridor_dodge"}; }

std::unique_ptr<Env> make_env(const std::string& name, const EnvOptions& options) {
  if (name == "chase_dot") return std::make_unique<ChaseDot>(options);
  if (name == "blink_door") return std::make_unique<BlinkDoor>(options);
  if (name == "corridor_dodge") return std::make_unique<CorridorDodge>(options);
  throw EnvError("unknown environment '" + name + "'");
}

EnvSpec env_spec(const std::string& name, const EnvOptions& options) { return make_env(name, options)->spec(); }

double normalized_return(const EnvSpec& spec, double episodic_return) {
  const double x = (episodic_return - spec.score_min) / (spec.score_max - spec.score_min);
  if (x < 0.0 || x > 1.0) {
    g_clamp_count.fetch_add(1, std::memory_order_relaxed);
    return std::clamp(x, 0.0, 1.0);
  }
  return x;
}

std::int64_t normalization_clamp_count() { return g_clamp_count.load(); }

LevelSampler::LevelSampler(std::string env_name, std::uint64_t num_train_levels, Rng rng)
    : env_name_(std::move(env_name)), num_train_levels_(num_train_levels), rng_(rng) {
  if (num_train_levels_ == 0) throw EnvError("num_train_levels must be positive");
}

LevelSeed LevelSampler::sample(Split split) {
  LevelSeed level;
  level.env_name = env_name_;
  level.split = split;
  if (split == Split::kTrain) {
    level.seed = rng_.below(num_train_levels_);
  } else {
    const std::uint64_t span = std::numeric_limits<std::uint64_t>::max() - num_train_levels_;
    level.seed = num_train_levels_ + rng_.below(span);
  }
  return level;
}

void write_trace_line(std::ostream& os, std::int64_t step, std::int64_t action, double reward, bool done) {
  std::ostringstream line;
  line << std::setprecision(17) << "{\"step\":" << step << ",\"action\":" << action << ",\"reward\":" << reward
       << ",\"done\":" << (done ? "true" : "false") << "}\n";
  os << line.str();
}

}  // namespace vsop3d
