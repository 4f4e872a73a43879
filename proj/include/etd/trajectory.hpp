#pragma once

#include <cstddef>
#include <vector>

#include "etd/linalg.hpp"

namespace etd {

/// One episode (or contiguous episode segment): T+1 observations with the
/// T actions/rewards taken between them.
struct Episode {
  Mat observations;  // (T+1) x obs_dim, includes the arrival observation
  std::vector<int> actions;
  std::vector<double> rewards;  // extrinsic
  bool completed = false;       // ended by the environment rather than a rollout cut

  int num_observations() const { return static_cast<int>(observations.rows()); }
};

struct TrajectoryBuffer {
  std::vector<Episode> episodes;

  bool empty() const { return episodes.empty(); }
  std::size_t total_observations() const {
    std::size_t n = 0;
    for (const auto& e : episodes) n += static_cast<std::size_t>(e.num_observations());
    return n;
  }
};

}  // namespace etd
