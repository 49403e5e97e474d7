#pragma once

#include <vector>

#include "vsop3d/envs/env.hpp"

namespace vsop3d {

// Actions shared by the games: 0 no-op, 1 left, 2 right, 3 up, 4 down.
enum Action : std::int64_t { kNoop = 0, kLeft = 1, kRight = 2, kUp = 3, kDown = 4 };

// Dots fall from the top row, drifting sideways with a per-level horizontal
// velocity and bouncing off the side walls. A paddle on the bottom row
// (no-op/left/right) scores 1 per dot caught; an episode lasts kDots dots.
// The drift direction is visible only across consecutive frames.
class ChaseDot final : public Env {
 public:
  static constexpr std::int64_t kDots = 8;

  explicit ChaseDot(const EnvOptions& options);
  std::int64_t oracle_action() const override;

  std::int64_t paddle_col = 0;
  std::int64_t dot_row = 0;
  std::int64_t dot_col = 0;
  std::int64_t velocity = 1;
  std::int64_t dots_done = 0;

  // Column at which the current dot reaches the paddle row.
  std::int64_t landing_column() const;

 protected:
  void generate(Rng& level_rng) override;
  Outcome advance(std::int64_t action) override;
  void render(std::vector<double>& canvas) const override;
  void save_game(std::vector<std::int64_t>& out) const override;
  std::size_t load_game(const std::vector<std::int64_t>& in, std::size_t pos) override;

 private:
  void spawn_dot();
  Color paddle_color_{}, dot_color_{};
};

// An exit in the top wall opens for a single tick every kPeriod ticks with a
// per-level phase. Walking into it while open scores +1; walking into it
// while closed scores -1. Both end the episode; a timeout scores 0.
class BlinkDoor final : public Env {
 public:
  static constexpr std::int64_t kPeriod = 4;

  explicit BlinkDoor(const EnvOptions& options);
  std::int64_t oracle_action() const override;

  bool door_open_at(std::int64_t tick) const { return (tick + phase) % kPeriod == 0; }

  std::int64_t agent_row = 0;
  std::int64_t agent_col = 0;
  std::int64_t door_col = 0;
  std::int64_t phase = 0;
  std::int64_t tick = 0;

 protected:
  void generate(Rng& level_rng) override;
  Outcome advance(std::int64_t action) override;
  void render(std::vector<double>& canvas) const override;
  void save_game(std::vector<std::int64_t>& out) const override;
  std::size_t load_game(const std::vector<std::int64_t>& in, std::size_t pos) override;

 private:
  Color agent_color_{}, wall_color_{}, open_color_{}, closed_color_{};
};

// Cross from the bottom row to the top row through lanes of hazards that
// translate with per-level, per-lane velocities in {-1, 0, +1} (wrapping).
// Moving and static hazards look identical in a single frame. Reaching the
// top scores +1, a collision -1; both end the episode.
class CorridorDodge final : public Env {
 public:
  static constexpr std::int64_t kHazardsPerLane = 2;

  explicit CorridorDodge(const EnvOptions& options);
  std::int64_t oracle_action() const override;

  std::int64_t agent_row = 0;
  std::int64_t agent_col = 0;
  std::vector<std::int64_t> lane_velocity;  // one per lane, lanes are rows 1..grid-2
  std::vector<std::int64_t> hazard_col;     // kHazardsPerLane per lane

  bool hazard_at(std::int64_t row, std::int64_t col, std::int64_t ticks_ahead) const;

 protected:
  void generate(Rng& level_rng) override;
  Outcome advance(std::int64_t action) override;
  void render(std::vector<double>& canvas) const override;
  void save_game(std::vector<std::int64_t>& out) const override;
  std::size_t load_game(const std::vector<std::int64_t>& in, std::size_t pos) override;

 private:
  void layout(Rng& level_rng);
  // First action of a shortest safe path to the goal row, or -1 if none.
  std::int64_t plan_first_action() const;

  Color agent_color_{}, hazard_color_{}, goal_color_{};
};

}  // namespace vsop3d
