#include "vsop3d/envs/games.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <deque>
#include <tuple>

namespace vsop3d {

namespace {

constexpr std::int64_t kGrid = 8;

EnvSpec base_spec(const std::string& name, const EnvOptions& options, std::int64_t actions, std::int64_t max_steps,
                  double lo, double hi) {
  EnvSpec spec;
  spec.name = name;
  spec.grid = kGrid;
  spec.obs_height = options.obs_height;
  spec.obs_width = options.obs_width;
  spec.num_actions = actions;
  spec.max_episode_steps = max_steps;
  spec.score_min = lo;
  spec.score_max = hi;
  return spec;
}

std::int64_t wrap(std::int64_t x, std::int64_t n) { return ((x % n) + n) % n; }

// Row/column deltas of the five movement actions.
constexpr std::array<std::int64_t, 5> kDRow{0, 0, 0, -1, 1};
constexpr std::array<std::int64_t, 5> kDCol{0, -1, 1, 0, 0};

void put(std::vector<std::int64_t>& out, const Color& c) {
  for (double v : c) out.push_back(std::bit_cast<std::int64_t>(v));
}

std::size_t get(const std::vector<std::int64_t>& in, std::size_t pos, Color& c) {
  if (pos + 3 > in.size()) throw EnvError("truncated environment state");
  for (int i = 0; i < 3; ++i) c[i] = std::bit_cast<double>(in[pos + i]);
  return pos + 3;
}

std::size_t get_ints(const std::vector<std::int64_t>& in, std::size_t pos, std::initializer_list<std::int64_t*> dst) {
  if (pos + dst.size() > in.size()) throw EnvError("truncated environment state");
  for (std::int64_t* d : dst) *d = in[pos++];
  return pos;
}

}  // namespace

// ---------------------------------------------------------------- chase_dot

ChaseDot::ChaseDot(const EnvOptions& options)
    : Env(base_spec("chase_dot", options, 3, 256, 0.0, static_cast<double>(kDots))) {}

void ChaseDot::generate(Rng& level_rng) {
  paddle_color_ = jittered({0.2, 0.6, 1.0}, 0.15);
  dot_color_ = jittered({1.0, 0.85, 0.2}, 0.15);
  velocity = level_rng.bernoulli(0.5) ? 1 : -1;
  paddle_col = static_cast<std::int64_t>(level_rng.below(kGrid));
  dots_done = 0;
  spawn_dot();
}

void ChaseDot::spawn_dot() {
  dot_row = 0;
  dot_col = static_cast<std::int64_t>(rng_.below(kGrid));
}

namespace {
void drift(std::int64_t& col, std::int64_t& velocity) {
  if (col + velocity < 0 || col + velocity >= kGrid) velocity = -velocity;
  col += velocity;
}
}  // namespace

Env::Outcome ChaseDot::advance(std::int64_t action) {
  paddle_col = std::clamp(paddle_col + kDCol[static_cast<std::size_t>(action)], std::int64_t{0}, kGrid - 1);
  ++dot_row;
  drift(dot_col, velocity);
  Outcome outcome;
  if (dot_row == kGrid - 1) {
    outcome.reward = dot_col == paddle_col ? 1.0 : 0.0;
    if (++dots_done == kDots) {
      outcome.terminal = true;
    } else {
      spawn_dot();
    }
  }
  return outcome;
}

std::int64_t ChaseDot::landing_column() const {
  std::int64_t row = dot_row, col = dot_col, v = velocity;
  while (row < kGrid - 1) {
    ++row;
    drift(col, v);
  }
  return col;
}

std::int64_t ChaseDot::oracle_action() const {
  const std::int64_t target = landing_column();
  if (target < paddle_col) return kLeft;
  if (target > paddle_col) return kRight;
  return kNoop;
}

void ChaseDot::render(std::vector<double>& canvas) const {
  fill_cell(canvas, kGrid - 1, paddle_col, paddle_color_);
  fill_cell(canvas, dot_row, dot_col, dot_color_);
}

void ChaseDot::save_game(std::vector<std::int64_t>& out) const {
  out.insert(out.end(), {paddle_col, dot_row, dot_col, velocity, dots_done});
  put(out, paddle_color_);
  put(out, dot_color_);
}

std::size_t ChaseDot::load_game(const std::vector<std::int64_t>& in, std::size_t pos) {
  pos = get_ints(in, pos, {&paddle_col, &dot_row, &dot_col, &velocity, &dots_done});
  pos = get(in, pos, paddle_color_);
  return get(in, pos, dot_color_);
}

// --------------------------------------------------------------- blink_door

BlinkDoor::BlinkDoor(const EnvOptions& options) : Env(base_spec("blink_door", options, 5, 64, -1.0, 1.0)) {}

void BlinkDoor::generate(Rng& level_rng) {
  agent_color_ = jittered({0.2, 0.6, 1.0}, 0.15);
  wall_color_ = jittered({0.55, 0.55, 0.6}, 0.1);
  open_color_ = jittered({0.3, 0.95, 0.35}, 0.05);
  closed_color_ = jittered({0.9, 0.2, 0.2}, 0.05);
  door_col = static_cast<std::int64_t>(level_rng.below(kGrid));
  phase = static_cast<std::int64_t>(level_rng.below(kPeriod));
  agent_row = kGrid / 2 + static_cast<std::int64_t>(level_rng.below(kGrid / 2));
  agent_col = static_cast<std::int64_t>(level_rng.below(kGrid));
  tick = 0;
}

Env::Outcome BlinkDoor::advance(std::int64_t action) {
  ++tick;
  const auto a = static_cast<std::size_t>(action);
  const std::int64_t row = agent_row + kDRow[a], col = agent_col + kDCol[a];
  Outcome outcome;
  if (col < 0 || col >= kGrid || row >= kGrid) return outcome;
  if (row == 0) {
    if (col == door_col) {
      outcome.reward = door_open_at(tick) ? 1.0 : -1.0;
      outcome.terminal = true;
      agent_row = row;
    }
    return outcome;  // the rest of the top row is wall
  }
  agent_row = row;
  agent_col = col;
  return outcome;
}

std::int64_t BlinkDoor::oracle_action() const {
  if (agent_col < door_col) return kRight;
  if (agent_col > door_col) return kLeft;
  if (agent_row > 1) return kUp;
  return door_open_at(tick + 1) ? kUp : kNoop;
}

void BlinkDoor::render(std::vector<double>& canvas) const {
  for (std::int64_t c = 0; c < kGrid; ++c) fill_cell(canvas, 0, c, wall_color_);
  fill_cell(canvas, 0, door_col, door_open_at(tick) ? open_color_ : closed_color_);
  fill_cell(canvas, agent_row, agent_col, agent_color_);
}

void BlinkDoor::save_game(std::vector<std::int64_t>& out) const {
  out.insert(out.end(), {agent_row, agent_col, door_col, phase, tick});
  for (const Color* c : {&agent_color_, &wall_color_, &open_color_, &closed_color_}) put(out, *c);
}

std::size_t BlinkDoor::load_game(const std::vector<std::int64_t>& in, std::size_t pos) {
  pos = get_ints(in, pos, {&agent_row, &agent_col, &door_col, &phase, &tick});
  for (Color* c : {&agent_color_, &wall_color_, &open_color_, &closed_color_}) pos = get(in, pos, *c);
  return pos;
}

// ----------------------------------------------------------- corridor_dodge

CorridorDodge::CorridorDodge(const EnvOptions& options)
    : Env(base_spec("corridor_dodge", options, 5, 64, -1.0, 1.0)) {}

void CorridorDodge::generate(Rng& level_rng) {
  agent_color_ = jittered({0.2, 0.6, 1.0}, 0.15);
  hazard_color_ = jittered({1.0, 0.3, 0.2}, 0.1);
  goal_color_ = jittered({0.3, 0.9, 0.3}, 0.1);
  const std::int64_t lanes = kGrid - 2;
  lane_velocity.assign(static_cast<std::size_t>(lanes), 0);
  hazard_col.assign(static_cast<std::size_t>(lanes * kHazardsPerLane), 0);
  // Some hazard patterns cannot be crossed; redraw until the level is solvable.
  do {
    layout(level_rng);
  } while (plan_first_action() < 0);
}

void CorridorDodge::layout(Rng& level_rng) {
  const std::int64_t lanes = kGrid - 2;
  for (std::int64_t lane = 0; lane < lanes; ++lane) {
    lane_velocity[static_cast<std::size_t>(lane)] = static_cast<std::int64_t>(level_rng.below(3)) - 1;
    // Two hazards at least three columns apart (both ways round the wrap).
    const std::int64_t first = static_cast<std::int64_t>(level_rng.below(kGrid));
    const std::int64_t gap = 3 + static_cast<std::int64_t>(level_rng.below(kGrid - 5));
    hazard_col[static_cast<std::size_t>(lane * kHazardsPerLane)] = first;
    hazard_col[static_cast<std::size_t>(lane * kHazardsPerLane + 1)] = wrap(first + gap, kGrid);
  }
  agent_row = kGrid - 1;
  agent_col = static_cast<std::int64_t>(level_rng.below(kGrid));
}

bool CorridorDodge::hazard_at(std::int64_t row, std::int64_t col, std::int64_t ticks_ahead) const {
  if (row < 1 || row > kGrid - 2) return false;
  const std::int64_t lane = row - 1;
  const std::int64_t v = lane_velocity[static_cast<std::size_t>(lane)];
  for (std::int64_t h = 0; h < kHazardsPerLane; ++h) {
    if (wrap(hazard_col[static_cast<std::size_t>(lane * kHazardsPerLane + h)] + v * ticks_ahead, kGrid) == col) {
      return true;
    }
  }
  return false;
}

Env::Outcome CorridorDodge::advance(std::int64_t action) {
  const auto a = static_cast<std::size_t>(action);
  const std::int64_t row = agent_row + kDRow[a], col = agent_col + kDCol[a];
  if (row >= 0 && row < kGrid && col >= 0 && col < kGrid) {
    agent_row = row;
    agent_col = col;
  }
  Outcome outcome;
  // A hazard on the entered cell before or after it moves counts as a hit;
  // this also covers the agent and a hazard swapping cells.
  if (hazard_at(agent_row, agent_col, 0) || hazard_at(agent_row, agent_col, 1)) {
    outcome.reward = -1.0;
    outcome.terminal = true;
  } else if (agent_row == 0) {
    outcome.reward = 1.0;
    outcome.terminal = true;
  }
  const std::int64_t lanes = kGrid - 2;
  for (std::int64_t lane = 0; lane < lanes; ++lane) {
    for (std::int64_t h = 0; h < kHazardsPerLane; ++h) {
      auto& c = hazard_col[static_cast<std::size_t>(lane * kHazardsPerLane + h)];
      c = wrap(c + lane_velocity[static_cast<std::size_t>(lane)], kGrid);
    }
  }
  return outcome;
}

std::int64_t CorridorDodge::oracle_action() const {
  const std::int64_t action = plan_first_action();
  return action < 0 ? kNoop : action;
}

std::int64_t CorridorDodge::plan_first_action() const {
  // Breadth-first search over (row, col, ticks ahead) with the same
  // collision rule as advance().
  constexpr std::int64_t kHorizon = 48;
  using State = std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t>;  // row, col, t, first action
  std::vector<char> seen(static_cast<std::size_t>(kGrid * kGrid * (kHorizon + 1)), 0);
  std::deque<State> queue{{agent_row, agent_col, 0, -1}};
  while (!queue.empty()) {
    const auto [r, c, t, first] = queue.front();
    queue.pop_front();
    if (t == kHorizon) continue;
    for (std::size_t a = 0; a < kDRow.size(); ++a) {
      std::int64_t nr = r + kDRow[a], nc = c + kDCol[a];
      if (nr < 0 || nr >= kGrid || nc < 0 || nc >= kGrid) nr = r, nc = c;
      if (hazard_at(nr, nc, t) || hazard_at(nr, nc, t + 1)) continue;
      const std::int64_t act = first < 0 ? static_cast<std::int64_t>(a) : first;
      if (nr == 0) return act;
      auto& mark = seen[static_cast<std::size_t>((nr * kGrid + nc) * (kHorizon + 1) + t + 1)];
      if (mark) continue;
      mark = 1;
      queue.emplace_back(nr, nc, t + 1, act);
    }
  }
  return -1;
}

void CorridorDodge::render(std::vector<double>& canvas) const {
  for (std::int64_t c = 0; c < kGrid; ++c) fill_cell(canvas, 0, c, goal_color_);
  for (std::int64_t row = 1; row <= kGrid - 2; ++row) {
    for (std::int64_t c = 0; c < kGrid; ++c) {
      if (hazard_at(row, c, 0)) fill_cell(canvas, row, c, hazard_color_);
    }
  }
  fill_cell(canvas, agent_row, agent_col, agent_color_);
}

void CorridorDodge::save_game(std::vector<std::int64_t>& out) const {
  out.insert(out.end(), {agent_row, agent_col});
  out.insert(out.end(), lane_velocity.begin(), lane_velocity.end());
  out.insert(out.end(), hazard_col.begin(), hazard_col.end());
  for (const Color* c : {&agent_color_, &hazard_color_, &goal_color_}) put(out, *c);
}

std::size_t CorridorDodge::load_game(const std::vector<std::int64_t>& in, std::size_t pos) {
  pos = get_ints(in, pos, {&agent_row, &agent_col});
  const std::size_t lanes = static_cast<std::size_t>(kGrid - 2);
  const std::size_t hazards = lanes * static_cast<std::size_t>(kHazardsPerLane);
  if (pos + lanes + hazards > in.size()) throw EnvError("corridor_dodge: truncated environment state");
  lane_velocity.assign(in.begin() + static_cast<std::ptrdiff_t>(pos),
                       in.begin() + static_cast<std::ptrdiff_t>(pos + lanes));
  pos += lanes;
  hazard_col.assign(in.begin() + static_cast<std::ptrdiff_t>(pos),
                    in.begin() + static_cast<std::ptrdiff_t>(pos + hazards));
  pos += hazards;
  for (Color* c : {&agent_color_, &hazard_color_, &goal_color_}) pos = get(in, pos, *c);
  return pos;
}

}  // namespace vsop3d
