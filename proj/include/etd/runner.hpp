#pragma once

#include <string>
#include <vector>

#include "etd/agent.hpp"
#include "etd/config.hpp"
#include "etd/envkit.hpp"

namespace etd::harness {

struct SeedRunResult {
  std::uint64_t seed = 0;
  std::string dir;
  long steps_run = 0;
  double final_eval_success = 0;
  double best_eval_success = 0;
  long solved_at_steps = -1;  // first eval with success >= 0.8; -1 if never
  bool early_stopped = false;
  double final_train_success = 0;
};

/// Rollout -> bonus -> model update -> PPO update cycles until the step
/// budget. Writes metrics.csv, eval.csv, timing.csv, and checkpoints under
/// <out_dir>/seed_<seed>/.
SeedRunResult run_single_seed(const RunConfig& config, std::uint64_t seed);

/// Runs every seed in the config; echoes the merged config to
/// <out_dir>/config.json first.
std::vector<SeedRunResult> run_experiment(const RunConfig& config);

struct EvalReport {
  double success_rate = 0;
  double mean_return = 0;
  double mean_length = 0;
  int episodes = 0;
};

/// Deterministic-argmax rollouts over fresh contexts.
EvalReport evaluate(const agent::PolicyValueNet& policy, const envkit::EnvConfig& env_config,
                    int n_episodes, std::uint64_t eval_seed);

/// Loads <checkpoint> (a policy .json) and evaluates it on the named family.
/// Throws std::runtime_error when the checkpoint does not fit the env.
EvalReport evaluate_checkpoint(const std::string& checkpoint, const envkit::EnvConfig& env_config,
                               int n_episodes, std::uint64_t eval_seed);

}  // namespace etd::harness
