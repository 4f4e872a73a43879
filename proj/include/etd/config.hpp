#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "etd/agent.hpp"
#include "etd/bonus.hpp"
#include "etd/contrastive.hpp"
#include "etd/envkit.hpp"
#include "etd/metricnet.hpp"

namespace etd::harness {

/// Quasimetric-model training settings.
struct ModelConfig {
  double gamma = 0.99;
  int epochs = 8;
  int minibatch = 512;
  double learning_rate = 3e-4;
  int embed_dim = 64;
  int sym_dim = 16;
  int asym_dim = 16;
  int encoder_hidden = 128;
  int head_hidden = 64;
  metricnet::EnergyKind energy = metricnet::EnergyKind::mrn_pot;
  contrastive::LossVariant loss = contrastive::LossVariant::symmetric;
  bool symmetric_only = false;
};

struct EcConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double percentile = 0.9;
  int horizon = 5;
};

struct RunSettings {
  long total_env_steps = 2000000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out_dir = "run";
  int eval_interval_iters = 8;
  int eval_episodes = 32;
  std::uint64_t eval_seed = 9000;
  double early_stop_success = -1.0;  // < 0 disables early stopping
  bool verbose_bonus_log = false;
};

struct RunConfig {
  envkit::EnvConfig env;
  std::string bonus_provider = "etd";  // etd | count | ec | invdyn | none
  bonus::Aggregator aggregator = bonus::Aggregator::min;
  agent::PPOConfig ppo;
  ModelConfig model;
  EcConfig ec;
  RunSettings run;

  void validate() const;  // throws std::invalid_argument
};

/// Strict parse: unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

/// Applies a dotted-path override such as "ppo.learning_rate=1e-4".
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Prefixes relative paths with $ETD_OUTPUT_ROOT when set.
std::string resolve_out_dir(const std::string& dir);

}  // namespace etd::harness
