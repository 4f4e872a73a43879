#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etd/linalg.hpp"
#include "etd/rng.hpp"

namespace etd::envkit {

enum class EnvFamily { spiral, chain, multiroom };

std::string family_name(EnvFamily family);
EnvFamily family_from_name(const std::string& name);

enum class Action : int { up = 0, down = 1, left = 2, right = 3, pickup = 4, toggle = 5 };

int action_count(EnvFamily family);  // 4 for spiral/chain, 6 for multiroom

/// Per-episode environment context; same seed and family give the same layout.
struct Context {
  std::uint64_t seed = 0;
  EnvFamily family = EnvFamily::spiral;
};

Context sample_context(std::uint64_t master_seed, std::uint64_t episode_index, EnvFamily family);

struct DoorSpec {
  int x = 0, y = 0;
};

struct GridLayout {
  EnvFamily family = EnvFamily::spiral;
  int width = 0, height = 0;
  std::vector<std::uint8_t> walls;  // row-major, 1 = wall
  int start_x = 0, start_y = 0;
  int goal_x = 0, goal_y = 0;
  std::vector<DoorSpec> doors;  // multiroom only; doors start closed
  int key_x = -1, key_y = -1;   // -1 when absent
  int wall_col = -1, wall_row = -1;  // multiroom dividing wall lines
  int time_limit = 0;
  int shortest_path_steps = 0;  // BFS start->goal with doors passable

  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool wall(int x, int y) const { return walls[static_cast<std::size_t>(y) * width + x] != 0; }
  int cell_index(int x, int y) const { return y * width + x; }
  int door_at(int x, int y) const;  // index into doors, or -1
  std::uint64_t layout_hash() const;
  std::string to_json() const;  // debug dump: cells, walls, goal, doors
};

struct NoiseConfig {
  bool enabled = false;
  double mean = 0.0;
  double variance = 0.1;
  std::uint64_t seed = 0;
};

struct EnvConfig {
  EnvFamily family = EnvFamily::multiroom;
  int size = 20;          // multiroom grid side
  int rooms = 4;          // 2 or 4
  int chain_length = 8;   // chain family
  int time_limit_factor = 20;
  NoiseConfig noise;
};

/// Throws std::runtime_error if generation cannot produce a start->goal path.
GridLayout generate_layout(const Context& context, const EnvConfig& config);

struct EnvState {
  int x = 0, y = 0;
  std::vector<std::uint8_t> door_open;
  bool key_held = false;
  int t = 0;
  bool done = false;
};

EnvState initial_state(const GridLayout& layout);

struct StepResult {
  Vec observation;  // noiseless; wrappers add noise
  double reward = 0;
  bool done = false;
  int step_index = 0;
};

int observation_dim(const GridLayout& layout);
Vec observe(const GridLayout& layout, const EnvState& state);

/// Moves blocked by walls, bounds, and closed doors leave the position
/// unchanged. Reward is 1.0 exactly on goal arrival; done at goal or when the
/// time limit is reached. Throws std::invalid_argument for actions outside
/// the family's action set.
StepResult step(const GridLayout& layout, EnvState& state, Action action);

Vec add_noise(const Vec& observation, const NoiseConfig& config, Rng& rng);

/// Positional MDP under a fixed stochastic policy over actions. Doors are
/// treated as open; the goal does not absorb (movement dynamics only).
struct TabularMDP {
  int n = 0;
  Mat transition;                  // n x n row-stochastic
  std::vector<int> cell_of_state;  // state -> cell index
  std::vector<int> state_of_cell;  // cell index -> state or -1
};

/// `action_probs` has one probability per family action and must sum to 1.
/// Throws std::length_error above 1e4 states.
TabularMDP tabularize(const GridLayout& layout, const std::vector<double>& action_probs);

/// BFS distance in steps with doors passable; -1 if unreachable.
int bfs_distance(const GridLayout& layout, int from_cell, int to_cell);

/// Free cells of the spiral in path order, outer start first.
std::vector<int> spiral_path_cells(const GridLayout& layout);

/// Stateful convenience wrapper owning layout, state, and the noise stream.
class GridEnv {
 public:
  GridEnv(const EnvConfig& config, std::uint64_t noise_seed);

  Vec reset(const Context& context);
  StepResult step(Action action);

  const GridLayout& layout() const { return layout_; }
  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }

 private:
  Vec maybe_noise(const Vec& obs);

  EnvConfig config_;
  GridLayout layout_;
  EnvState state_;
  Rng noise_rng_;
};

}  // namespace etd::envkit
