#include "vsop3d/rl/rollout.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace vsop3d {

std::vector<double> to_channel_major(const std::vector<double>& hwc, std::int64_t height, std::int64_t width) {
  const std::int64_t plane = height * width;
  if (static_cast<std::int64_t>(hwc.size()) != plane * 3) {
    throw DimensionError("observation has " + std::to_string(hwc.size()) + " values, expected " +
                         std::to_string(plane * 3));
  }
  std::vector<double> chw(hwc.size());
  for (std::int64_t p = 0; p < plane; ++p) {
    for (std::int64_t c = 0; c < 3; ++c) chw[static_cast<std::size_t>(c * plane + p)] = hwc[static_cast<std::size_t>(p * 3 + c)];
  }
  return chw;
}

FrameStack::FrameStack(std::int64_t capacity, std::int64_t height, std::int64_t width)
    : capacity_(capacity), height_(height), width_(width) {
  if (capacity < 1) throw std::invalid_argument("frame stack capacity must be at least 1");
  ring_.assign(static_cast<std::size_t>(capacity_ * frame_size()), 0.0);
}

void FrameStack::reset(const std::vector<double>& observation) {
  const auto chw = to_channel_major(observation, height_, width_);
  for (std::int64_t i = 0; i < capacity_; ++i) std::memcpy(ring_.data() + i * frame_size(), chw.data(), chw.size() * sizeof(double));
  head_ = 0;
}

void FrameStack::push(const std::vector<double>& observation) {
  const auto chw = to_channel_major(observation, height_, width_);
  // The oldest slot becomes the newest frame.
  std::memcpy(ring_.data() + head_ * frame_size(), chw.data(), chw.size() * sizeof(double));
  head_ = (head_ + 1) % capacity_;
}

const double* FrameStack::frame(std::int64_t i) const {
  return ring_.data() + ((head_ + i) % capacity_) * frame_size();
}

std::vector<double> FrameStack::stacked(ConvKind kind) const {
  std::vector<double> out(ring_.size());
  write_stacked(kind, out.data());
  return out;
}

void FrameStack::write_stacked(ConvKind kind, double* dst) const {
  const std::int64_t plane = height_ * width_;
  if (kind == ConvKind::kConv2d) {
    for (std::int64_t f = 0; f < capacity_; ++f) std::memcpy(dst + f * frame_size(), frame(f), frame_size() * sizeof(double));
    return;
  }
  for (std::int64_t c = 0; c < 3; ++c) {
    for (std::int64_t f = 0; f < capacity_; ++f) {
      std::memcpy(dst + (c * capacity_ + f) * plane, frame(f) + c * plane, plane * sizeof(double));
    }
  }
}

std::vector<double> FrameStack::save_state() const {
  std::vector<double> out{static_cast<double>(head_)};
  out.insert(out.end(), ring_.begin(), ring_.end());
  return out;
}

void FrameStack::load_state(const std::vector<double>& state) {
  if (state.size() != ring_.size() + 1) throw std::invalid_argument("frame stack state has the wrong size");
  head_ = static_cast<std::int64_t>(state[0]);
  std::copy(state.begin() + 1, state.end(), ring_.begin());
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<double>& dones, const std::vector<double>& bootstrap_value,
                      std::int64_t horizon, std::int64_t num_envs, double gamma, double lambda) {
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("gamma and lambda must lie in [0, 1]");
  }
  const auto n = static_cast<std::size_t>(horizon * num_envs);
  if (rewards.size() != n || values.size() != n || dones.size() != n ||
      bootstrap_value.size() != static_cast<std::size_t>(num_envs)) {
    throw DimensionError("compute_gae: inputs must be [T, E] with a length-E bootstrap");
  }
  auto check = [](const std::vector<double>& v, const char* what) {
    for (double x : v) {
      if (std::isnan(x)) throw std::invalid_argument(std::string("compute_gae: NaN in ") + what);
    }
  };
  check(rewards, "rewards");
  check(values, "values");
  check(dones, "dones");
  check(bootstrap_value, "bootstrap_value");

  GaeResult result;
  result.advantages.assign(n, 0.0);
  result.returns.assign(n, 0.0);
  for (std::int64_t e = 0; e < num_envs; ++e) {
    double next_value = bootstrap_value[static_cast<std::size_t>(e)];
    double next_advantage = 0.0;
    for (std::int64_t t = horizon - 1; t >= 0; --t) {
      const auto i = static_cast<std::size_t>(t * num_envs + e);
      const double live = 1.0 - dones[i];
      const double delta = rewards[i] + gamma * live * next_value - values[i];
      next_advantage = delta + gamma * lambda * live * next_advantage;
      result.advantages[i] = next_advantage;
      result.returns[i] = next_advantage + values[i];
      next_value = values[i];
    }
  }
  return result;
}

VecEnv::VecEnv(const std::string& env_name, std::int64_t num_envs, std::uint64_t num_train_levels, Split split,
               const EnvOptions& options, std::int64_t frames, ConvKind kind, const Rng& rng)
    : split_(split), kind_(kind) {
  if (num_envs < 1) throw std::invalid_argument("num_envs must be at least 1");
  for (std::int64_t i = 0; i < num_envs; ++i) {
    envs_.push_back(make_env(env_name, options));
    samplers_.emplace_back(env_name, num_train_levels, rng.split(static_cast<std::uint64_t>(i)));
    stacks_.emplace_back(frames, options.obs_height, options.obs_width);
  }
}

Shape VecEnv::observation_shape() const {
  const auto& s = spec();
  const std::int64_t f = stacks_.front().capacity();
  if (kind_ == ConvKind::kConv2d) return {f * 3, s.obs_height, s.obs_width};
  return {3, f, s.obs_height, s.obs_width};
}

std::int64_t VecEnv::observation_size() const { return shape_numel(observation_shape()); }

void VecEnv::start_episode(std::size_t i) {
  stacks_[i].reset(envs_[i]->reset(samplers_[i].sample(split_)));
}

void VecEnv::reset_all() {
  for (std::size_t i = 0; i < envs_.size(); ++i) start_episode(i);
}

Tensor VecEnv::observations() const {
  const std::int64_t per = observation_size();
  std::vector<double> data(static_cast<std::size_t>(per * size()));
  for (std::size_t i = 0; i < stacks_.size(); ++i) stacks_[i].write_stacked(kind_, data.data() + static_cast<std::int64_t>(i) * per);
  Shape shape = observation_shape();
  shape.insert(shape.begin(), size());
  return Tensor::from(std::move(shape), std::move(data));
}

VecEnv::StepOutput VecEnv::step(const std::vector<std::int64_t>& actions) {
  if (static_cast<std::int64_t>(actions.size()) != size()) {
    throw DimensionError("expected " + std::to_string(size()) + " actions, got " + std::to_string(actions.size()));
  }
  StepOutput out;
  out.rewards.resize(envs_.size());
  out.dones.resize(envs_.size());
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    StepResult r = envs_[i]->step(actions[i]);
    out.rewards[i] = r.reward;
    out.dones[i] = r.done ? 1.0 : 0.0;
    if (r.done) {
      EpisodeRecord rec;
      rec.split = split_;
      rec.env = envs_[i]->spec().name;
      rec.level_seed = envs_[i]->level().seed;
      rec.episodic_return = r.episode_return;
      rec.normalized_return = normalized_return(envs_[i]->spec(), r.episode_return);
      out.finished.push_back(std::move(rec));
      start_episode(i);
    } else {
      stacks_[i].push(r.observation);
    }
  }
  return out;
}

std::vector<std::int64_t> VecEnv::save_state() const {
  std::vector<std::int64_t> out{size()};
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    const auto env_state = envs_[i]->save_state();
    out.push_back(static_cast<std::int64_t>(env_state.size()));
    out.insert(out.end(), env_state.begin(), env_state.end());
    out.push_back(static_cast<std::int64_t>(samplers_[i].rng().seed()));
    out.push_back(static_cast<std::int64_t>(samplers_[i].rng().counter()));
    const auto stack = stacks_[i].save_state();
    out.push_back(static_cast<std::int64_t>(stack.size()));
    for (double v : stack) out.push_back(std::bit_cast<std::int64_t>(v));
  }
  return out;
}

void VecEnv::load_state(const std::vector<std::int64_t>& state) {
  std::size_t pos = 0;
  auto take = [&]() {
    if (pos >= state.size()) throw std::invalid_argument("truncated vectorized environment state");
    return state[pos++];
  };
  if (take() != size()) throw std::invalid_argument("vectorized environment state has a different env count");
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    const auto n = static_cast<std::size_t>(take());
    if (pos + n > state.size()) throw std::invalid_argument("truncated vectorized environment state");
    envs_[i]->load_state(std::vector<std::int64_t>(state.begin() + static_cast<std::ptrdiff_t>(pos),
                                                   state.begin() + static_cast<std::ptrdiff_t>(pos + n)));
    pos += n;
    const auto seed = static_cast<std::uint64_t>(take());
    const auto counter = static_cast<std::uint64_t>(take());
    samplers_[i].set_rng(Rng(seed, counter));
    const auto m = static_cast<std::size_t>(take());
    std::vector<double> stack(m);
    for (double& v : stack) v = std::bit_cast<double>(take());
    stacks_[i].load_state(stack);
  }
  if (pos != state.size()) throw std::invalid_argument("trailing data in vectorized environment state");
}

void RolloutBuffer::compute_advantages(double gamma, double lambda) {
  auto gae = compute_gae(rewards, values, dones, bootstrap_value, horizon, num_envs, gamma, lambda);
  advantages = std::move(gae.advantages);
  returns = std::move(gae.returns);
}

Tensor RolloutBuffer::gather_observations(const std::vector<std::int64_t>& index) const {
  const std::int64_t per = shape_numel(observation_shape);
  std::vector<double> data(static_cast<std::size_t>(per * static_cast<std::int64_t>(index.size())));
  for (std::size_t k = 0; k < index.size(); ++k) {
    std::memcpy(data.data() + static_cast<std::int64_t>(k) * per, observations.data() + index[k] * per,
                static_cast<std::size_t>(per) * sizeof(double));
  }
  Shape shape = observation_shape;
  shape.insert(shape.begin(), static_cast<std::int64_t>(index.size()));
  return Tensor::from(std::move(shape), std::move(data));
}

void RolloutBuffer::clear() { *this = RolloutBuffer{}; }

RolloutBuffer collect(VecEnv& envs, const PolicyFn& policy, const ValueFn& bootstrap, std::int64_t horizon,
                      std::int64_t& global_step, std::vector<EpisodeRecord>* episodes) {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  RolloutBuffer buf;
  buf.horizon = horizon;
  buf.num_envs = envs.size();
  buf.observation_shape = envs.observation_shape();
  const auto n = static_cast<std::size_t>(buf.size());
  const std::int64_t per = envs.observation_size();
  buf.observations.resize(n * static_cast<std::size_t>(per));
  buf.actions.resize(n);
  buf.logprobs.resize(n);
  buf.rewards.resize(n);
  buf.dones.resize(n);
  buf.values.resize(n);
  for (std::int64_t t = 0; t < horizon; ++t) {
    const Tensor obs = envs.observations();
    const PolicyStep act = policy(obs);
    const std::size_t base = static_cast<std::size_t>(t * buf.num_envs);
    std::copy(obs.data().begin(), obs.data().end(), buf.observations.begin() + static_cast<std::ptrdiff_t>(base * per));
    auto out = envs.step(act.actions);
    global_step += buf.num_envs;
    for (std::int64_t e = 0; e < buf.num_envs; ++e) {
      const std::size_t i = base + static_cast<std::size_t>(e);
      buf.actions[i] = act.actions[static_cast<std::size_t>(e)];
      buf.logprobs[i] = act.logprobs[static_cast<std::size_t>(e)];
      buf.values[i] = act.values[static_cast<std::size_t>(e)];
      buf.rewards[i] = out.rewards[static_cast<std::size_t>(e)];
      buf.dones[i] = out.dones[static_cast<std::size_t>(e)];
    }
    if (episodes != nullptr) {
      for (auto& rec : out.finished) {
        rec.step = global_step;
        episodes->push_back(std::move(rec));
      }
    }
  }
  buf.bootstrap_value = bootstrap(envs.observations());
  return buf;
}

}  // namespace vsop3d
