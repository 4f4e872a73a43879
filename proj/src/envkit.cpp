#include "etd/envkit.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "json.hpp"

namespace etd::envkit {

namespace {

constexpr int kSpiralSide = 17;

struct Move {
  int dx, dy;
};

Move move_of(Action a) {
  switch (a) {
    case Action::up: return {0, -1};
    case Action::down: return {0, 1};
    case Action::left: return {-1, 0};
    case Action::right: return {1, 0};
    default: return {0, 0};
  }
}

GridLayout make_spiral() {
  GridLayout layout;
  layout.family = EnvFamily::spiral;
  layout.width = kSpiralSide;
  layout.height = kSpiralSide;
  layout.walls.assign(static_cast<std::size_t>(kSpiralSide) * kSpiralSide, 1);
  auto carve = [&](int x, int y) { layout.walls[layout.cell_index(x, y)] = 0; };
  int x = 1, y = 1;
  carve(x, y);
  // Clockwise inward spiral; arms two cells apart so loops never touch.
  const int dirs[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  int arm = kSpiralSide - 3;
  int dir = 0;
  int arms_at_length = 2;
  while (arm > 0) {
    for (int i = 0; i < arm; ++i) {
      x += dirs[dir][0];
      y += dirs[dir][1];
      carve(x, y);
    }
    dir = (dir + 1) % 4;
    if (--arms_at_length == 0) {
      arm -= 2;
      arms_at_length = 2;
    }
  }
  layout.start_x = 1;
  layout.start_y = 1;
  layout.goal_x = x;
  layout.goal_y = y;
  return layout;
}

GridLayout make_chain(int length) {
  if (length < 2) throw std::invalid_argument("chain length must be >= 2");
  GridLayout layout;
  layout.family = EnvFamily::chain;
  layout.width = length;
  layout.height = 1;
  layout.walls.assign(static_cast<std::size_t>(length), 0);
  layout.start_x = 0;
  layout.start_y = 0;
  layout.goal_x = length - 1;
  layout.goal_y = 0;
  return layout;
}

GridLayout make_multiroom(std::uint64_t seed, const EnvConfig& config) {
  if (config.rooms != 2 && config.rooms != 4)
    throw std::invalid_argument("multiroom supports 2 or 4 rooms");
  const int s = config.size;
  if (s < 10) throw std::invalid_argument("multiroom size must be >= 10");
  Rng rng(splitmix64(seed));
  GridLayout layout;
  layout.family = EnvFamily::multiroom;
  layout.width = s;
  layout.height = s;
  layout.walls.assign(static_cast<std::size_t>(s) * s, 0);
  for (int i = 0; i < s; ++i) {
    layout.walls[layout.cell_index(i, 0)] = 1;
    layout.walls[layout.cell_index(i, s - 1)] = 1;
    layout.walls[layout.cell_index(0, i)] = 1;
    layout.walls[layout.cell_index(s - 1, i)] = 1;
  }
  const int lo = 4, hi = s - 5;  // keeps every room at least 3 cells wide
  const int cx = uniform_int(rng, lo, hi);
  layout.wall_col = cx;
  for (int y = 1; y < s - 1; ++y) layout.walls[layout.cell_index(cx, y)] = 1;
  auto carve_door = [&](int dx, int dy) {
    layout.walls[layout.cell_index(dx, dy)] = 0;
    layout.doors.push_back(DoorSpec{dx, dy});
  };
  if (config.rooms == 2) {
    carve_door(cx, uniform_int(rng, 1, s - 2));
    layout.start_x = uniform_int(rng, 1, cx - 1);
    layout.start_y = uniform_int(rng, 1, s - 2);
    layout.goal_x = uniform_int(rng, cx + 1, s - 2);
    layout.goal_y = uniform_int(rng, 1, s - 2);
  } else {
    const int cy = uniform_int(rng, lo, hi);
    layout.wall_row = cy;
    for (int x = 1; x < s - 1; ++x) layout.walls[layout.cell_index(x, cy)] = 1;
    carve_door(cx, uniform_int(rng, 1, cy - 1));      // vertical wall, upper half
    carve_door(cx, uniform_int(rng, cy + 1, s - 2));  // vertical wall, lower half
    carve_door(uniform_int(rng, 1, cx - 1), cy);      // horizontal wall, left half
    carve_door(uniform_int(rng, cx + 1, s - 2), cy);  // horizontal wall, right half
    layout.start_x = uniform_int(rng, 1, cx - 1);
    layout.start_y = uniform_int(rng, 1, cy - 1);
    layout.goal_x = uniform_int(rng, cx + 1, s - 2);
    layout.goal_y = uniform_int(rng, cy + 1, s - 2);
  }
  return layout;
}

}  // namespace

std::string family_name(EnvFamily family) {
  switch (family) {
    case EnvFamily::spiral: return "spiral";
    case EnvFamily::chain: return "chain";
    case EnvFamily::multiroom: return "multiroom";
  }
  return "unknown";
}

EnvFamily family_from_name(const std::string& name) {
  if (name == "spiral") return EnvFamily::spiral;
  if (name == "chain") return EnvFamily::chain;
  if (name == "multiroom") return EnvFamily::multiroom;
  throw std::invalid_argument("unknown env family: " + name);
}

int action_count(EnvFamily family) {
  return family == EnvFamily::multiroom ? 6 : 4;
}

Context sample_context(std::uint64_t master_seed, std::uint64_t episode_index, EnvFamily family) {
  return Context{substream_seed(master_seed, family_name(family), episode_index), family};
}

int GridLayout::door_at(int x, int y) const {
  for (std::size_t i = 0; i < doors.size(); ++i)
    if (doors[i].x == x && doors[i].y == y) return static_cast<int>(i);
  return -1;
}

std::uint64_t GridLayout::layout_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  mix(static_cast<std::uint64_t>(family));
  mix(static_cast<std::uint64_t>(width));
  mix(static_cast<std::uint64_t>(height));
  for (auto w : walls) mix(w);
  mix(static_cast<std::uint64_t>(start_x));
  mix(static_cast<std::uint64_t>(start_y));
  mix(static_cast<std::uint64_t>(goal_x));
  mix(static_cast<std::uint64_t>(goal_y));
  for (const auto& d : doors) {
    mix(static_cast<std::uint64_t>(d.x));
    mix(static_cast<std::uint64_t>(d.y));
  }
  mix(static_cast<std::uint64_t>(key_x + 1));
  mix(static_cast<std::uint64_t>(key_y + 1));
  return h;
}

std::string GridLayout::to_json() const {
  nlohmann::json j;
  j["family"] = family_name(family);
  j["width"] = width;
  j["height"] = height;
  j["walls"] = walls;
  j["start"] = {{"x", start_x}, {"y", start_y}};
  j["goal"] = {{"x", goal_x}, {"y", goal_y}};
  j["doors"] = nlohmann::json::array();
  for (const auto& d : doors) j["doors"].push_back({{"x", d.x}, {"y", d.y}});
  j["time_limit"] = time_limit;
  j["shortest_path_steps"] = shortest_path_steps;
  return j.dump();
}

GridLayout generate_layout(const Context& context, const EnvConfig& config) {
  GridLayout layout;
  switch (context.family) {
    case EnvFamily::spiral: layout = make_spiral(); break;
    case EnvFamily::chain: layout = make_chain(config.chain_length); break;
    case EnvFamily::multiroom: layout = make_multiroom(context.seed, config); break;
  }
  const int dist =
      bfs_distance(layout, layout.cell_index(layout.start_x, layout.start_y),
                   layout.cell_index(layout.goal_x, layout.goal_y));
  if (dist < 0) throw std::runtime_error("layout generation produced an unreachable goal");
  layout.shortest_path_steps = dist;
  layout.time_limit = config.time_limit_factor * dist;
  return layout;
}

EnvState initial_state(const GridLayout& layout) {
  EnvState state;
  state.x = layout.start_x;
  state.y = layout.start_y;
  state.door_open.assign(layout.doors.size(), 0);
  return state;
}

int observation_dim(const GridLayout& layout) {
  if (layout.family == EnvFamily::multiroom) return 10 * layout.width + 5;
  return layout.width * layout.height;
}

Vec observe(const GridLayout& layout, const EnvState& state) {
  if (layout.family != EnvFamily::multiroom) {
    Vec obs = Vec::Zero(layout.width * layout.height);
    obs[layout.cell_index(state.x, state.y)] = 1.0;
    return obs;
  }
  // Factored layout encoding: agent and goal positions, wall lines, door
  // positions, door states, key flag. Fixed width of 10*size + 5.
  const int s = layout.width;
  Vec obs = Vec::Zero(10 * s + 5);
  int off = 0;
  auto one_hot = [&](int value) {
    obs[off + value] = 1.0;
    off += s;
  };
  one_hot(state.y);
  one_hot(state.x);
  one_hot(layout.goal_y);
  one_hot(layout.goal_x);
  // wall lines: vertical wall x, horizontal wall y (zeroed when absent)
  if (layout.wall_col >= 0) obs[off + layout.wall_col] = 1.0;
  off += s;
  if (layout.wall_row >= 0) obs[off + layout.wall_row] = 1.0;
  off += s;
  // four door slots; vertical-wall doors encode y, horizontal-wall doors x
  for (std::size_t i = 0; i < 4; ++i) {
    if (i < layout.doors.size()) {
      const auto& d = layout.doors[i];
      obs[off + (d.x == layout.wall_col ? d.y : d.x)] = 1.0;
    }
    off += s;
  }
  for (std::size_t i = 0; i < 4; ++i)
    obs[off + static_cast<int>(i)] = (i < state.door_open.size() && state.door_open[i]) ? 1.0 : 0.0;
  off += 4;
  obs[off] = state.key_held ? 1.0 : 0.0;
  return obs;
}

StepResult step(const GridLayout& layout, EnvState& state, Action action) {
  const int n_actions = action_count(layout.family);
  const int a = static_cast<int>(action);
  if (a < 0 || a >= n_actions)
    throw std::invalid_argument("invalid action index " + std::to_string(a) + " for family " +
                                family_name(layout.family));
  if (state.done) throw std::logic_error("step called on a finished episode");

  if (action == Action::pickup) {
    if (layout.key_x >= 0 && !state.key_held) {
      const int dx = std::abs(state.x - layout.key_x), dy = std::abs(state.y - layout.key_y);
      if (dx + dy <= 1) state.key_held = true;
    }
  } else if (action == Action::toggle) {
    const int nx[4] = {state.x, state.x, state.x - 1, state.x + 1};
    const int ny[4] = {state.y - 1, state.y + 1, state.y, state.y};
    for (int i = 0; i < 4; ++i) {
      const int d = layout.door_at(nx[i], ny[i]);
      if (d >= 0) state.door_open[d] ^= 1;
    }
  } else {
    const Move m = move_of(action);
    const int tx = state.x + m.dx, ty = state.y + m.dy;
    if (layout.in_bounds(tx, ty) && !layout.wall(tx, ty)) {
      const int d = layout.door_at(tx, ty);
      if (d < 0 || state.door_open[d]) {
        state.x = tx;
        state.y = ty;
      }
    }
  }

  state.t += 1;
  StepResult result;
  result.step_index = state.t;
  if (state.x == layout.goal_x && state.y == layout.goal_y) {
    result.reward = 1.0;
    state.done = true;
  }
  if (layout.time_limit > 0 && state.t >= layout.time_limit) state.done = true;
  result.done = state.done;
  result.observation = observe(layout, state);
  return result;
}

Vec add_noise(const Vec& observation, const NoiseConfig& config, Rng& rng) {
  if (config.variance < 0) throw std::invalid_argument("noise variance must be >= 0");
  if (!config.enabled) return observation;
  Vec out = observation;
  if (config.variance == 0.0) {
    out.array() += config.mean;
    return out;
  }
  const double stddev = std::sqrt(config.variance);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += normal(rng, config.mean, stddev);
  return out;
}

TabularMDP tabularize(const GridLayout& layout, const std::vector<double>& action_probs) {
  const int n_actions = action_count(layout.family);
  if (static_cast<int>(action_probs.size()) != n_actions)
    throw std::invalid_argument("tabularize: policy must give one probability per action");
  double total = 0;
  for (double p : action_probs) {
    if (p < 0) throw std::invalid_argument("tabularize: negative action probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("tabularize: action probabilities must sum to 1");

  TabularMDP mdp;
  mdp.state_of_cell.assign(static_cast<std::size_t>(layout.width) * layout.height, -1);
  for (int y = 0; y < layout.height; ++y)
    for (int x = 0; x < layout.width; ++x)
      if (!layout.wall(x, y)) {
        mdp.state_of_cell[layout.cell_index(x, y)] = static_cast<int>(mdp.cell_of_state.size());
        mdp.cell_of_state.push_back(layout.cell_index(x, y));
      }
  mdp.n = static_cast<int>(mdp.cell_of_state.size());
  if (mdp.n > 10000) throw std::length_error("tabularize: state space exceeds 1e4 states");

  mdp.transition = Mat::Zero(mdp.n, mdp.n);
  for (int s = 0; s < mdp.n; ++s) {
    const int cell = mdp.cell_of_state[s];
    const int x = cell % layout.width, y = cell / layout.width;
    for (int a = 0; a < n_actions; ++a) {
      const double p = action_probs[a];
      if (p == 0.0) continue;
      const Move m = move_of(static_cast<Action>(a));
      int tx = x + m.dx, ty = y + m.dy;
      if (!layout.in_bounds(tx, ty) || layout.wall(tx, ty)) {
        tx = x;
        ty = y;
      }
      mdp.transition(s, mdp.state_of_cell[layout.cell_index(tx, ty)]) += p;
    }
  }
  return mdp;
}

int bfs_distance(const GridLayout& layout, int from_cell, int to_cell) {
  std::vector<int> dist(static_cast<std::size_t>(layout.width) * layout.height, -1);
  std::deque<int> queue;
  dist[from_cell] = 0;
  queue.push_back(from_cell);
  while (!queue.empty()) {
    const int cell = queue.front();
    queue.pop_front();
    if (cell == to_cell) return dist[cell];
    const int x = cell % layout.width, y = cell / layout.width;
    const int nx[4] = {x, x, x - 1, x + 1};
    const int ny[4] = {y - 1, y + 1, y, y};
    for (int i = 0; i < 4; ++i) {
      if (!layout.in_bounds(nx[i], ny[i]) || layout.wall(nx[i], ny[i])) continue;
      const int next = layout.cell_index(nx[i], ny[i]);
      if (dist[next] < 0) {
        dist[next] = dist[cell] + 1;
        queue.push_back(next);
      }
    }
  }
  return dist[to_cell];
}

std::vector<int> spiral_path_cells(const GridLayout& layout) {
  if (layout.family != EnvFamily::spiral)
    throw std::invalid_argument("spiral_path_cells: layout is not a spiral");
  std::vector<std::uint8_t> visited(layout.walls.size(), 0);
  std::vector<int> path;
  int x = layout.start_x, y = layout.start_y;
  for (;;) {
    path.push_back(layout.cell_index(x, y));
    visited[layout.cell_index(x, y)] = 1;
    const int nx[4] = {x, x, x - 1, x + 1};
    const int ny[4] = {y - 1, y + 1, y, y};
    int found = -1;
    for (int i = 0; i < 4; ++i) {
      if (!layout.in_bounds(nx[i], ny[i]) || layout.wall(nx[i], ny[i])) continue;
      if (!visited[layout.cell_index(nx[i], ny[i])]) {
        found = i;
        break;
      }
    }
    if (found < 0) break;
    x = nx[found];
    y = ny[found];
  }
  return path;
}

GridEnv::GridEnv(const EnvConfig& config, std::uint64_t noise_seed)
    : config_(config), noise_rng_(splitmix64(noise_seed ^ config.noise.seed)) {}

Vec GridEnv::maybe_noise(const Vec& obs) { return add_noise(obs, config_.noise, noise_rng_); }

Vec GridEnv::reset(const Context& context) {
  layout_ = generate_layout(context, config_);
  state_ = initial_state(layout_);
  return maybe_noise(observe(layout_, state_));
}

StepResult GridEnv::step(Action action) {
  StepResult result = envkit::step(layout_, state_, action);
  result.observation = maybe_noise(result.observation);
  return result;
}

}  // namespace etd::envkit
