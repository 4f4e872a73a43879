#pragma once

#include <cstdint>
#include <string>

#include "etd/envkit.hpp"
#include "etd/rng.hpp"
#include "etd/trajectory.hpp"

namespace etd::harness {

/// Fixed-length uniform-random-action trajectories; episode termination is
/// ignored so the data follow the movement dynamics exactly.
TrajectoryBuffer collect_uniform_trajectories(const envkit::GridLayout& layout, int episodes,
                                              int steps, Rng& rng, bool random_start);

struct SpiralConfig {
  int episodes = 100;
  int steps = 50;
  double gamma = 0.99;
  int etd_train_steps = 12000;
  int baseline_train_steps = 4000;
  int batch_size = 256;
  double learning_rate = 3e-4;
  double final_learning_rate = 2e-5;  // cosine decay endpoint
  std::uint64_t seed = 7;
  std::string out_dir = "spiral_out";
};

struct SpiralReport {
  double etd_spearman = 0;
  double ec_spearman = 0;
  double invdyn_spearman = 0;
  double oracle_spearman = 0;  // oracle table vs path distance; 1.0 by construction
  std::string etd_heatmap, ec_heatmap, invdyn_heatmap, oracle_heatmap;
};

/// Collects random trajectories on the 17x17 spiral, trains the temporal
/// distance, the reachability classifier, and the inverse-dynamics baseline
/// on the same data, then reports the rank correlation of each method's
/// distance-from-probe field against the true path distance and writes the
/// four heatmaps.
SpiralReport spiral_diagnostic(const SpiralConfig& config);

struct OracleAuditSummary {
  int mdps = 0;
  long positivity = 0;
  long identity = 0;
  long triangle = 0;
  double max_equivalence_gap = 0;  // |successor_distance - hitting_time_mgf|
  double max_chain_gap = 0;        // deterministic chain vs (y-x) ln(1/gamma)
  double min_offdiag_margin = 0;   // min over finite D(x,y) of D - ln(1/gamma)
  bool clean() const { return positivity == 0 && identity == 0 && triangle == 0; }
};

Mat random_ergodic_transition(int n, Rng& rng);

/// Random ergodic MDPs audited at gamma in {0.5, 0.9, 0.99} with tolerance
/// 1e-9, cross-checked against the hitting-time route and the deterministic
/// chain closed form.
OracleAuditSummary audit_random_mdps(int n_mdps, std::uint64_t seed);

}  // namespace etd::harness
