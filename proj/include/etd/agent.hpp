#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etd/net.hpp"
#include "etd/rng.hpp"

namespace etd::agent {

using diffcore::AdamConfig;
using diffcore::AdamState;
using diffcore::DenseNet;
using diffcore::NetGrads;

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 512;
  int workers = 16;
  int rollout_steps = 512;
  double learning_rate = 3e-4;
  double entropy_coef = 5e-4;
  double value_coef = 0.5;
  double intrinsic_coef = 1e-2;   // beta
  double extrinsic_coef = 1.0;

  void validate() const;  // throws std::invalid_argument
};

/// Shared encoder with policy-logit and value heads.
struct PolicyValueNet {
  DenseNet encoder, policy_head, value_head;
  int action_count = 0;
  int obs_dim = 0;
};

PolicyValueNet make_policy(int obs_dim, int n_actions, Rng& rng, int encoder_hidden = 128,
                           int embed_dim = 64, int head_hidden = 128);

struct PolicyGrads {
  NetGrads encoder, policy_head, value_head;
  void zero();
};
PolicyGrads make_grads(const PolicyValueNet& net);

struct PolicyAdam {
  AdamState encoder, policy_head, value_head;
};
PolicyAdam make_adam(const PolicyValueNet& net);

struct ActResult {
  int action = 0;
  double log_prob = 0;
  double value = 0;
};
ActResult act(const PolicyValueNet& net, const Vec& obs, Rng& rng, bool deterministic = false);

struct BatchActResult {
  std::vector<int> actions;
  Vec log_probs;
  Vec values;
};
BatchActResult act_batch(const PolicyValueNet& net, const Mat& obs_rows, Rng& rng,
                         bool deterministic = false);

double combine_reward(double extrinsic, double normalized_bonus, const PPOConfig& config);

/// delta_t = r_t + gamma v_{t+1} (1 - done_t) - v_t;
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}.
/// `bootstrap_value` stands in for v_T at the rollout cut.
std::vector<double> gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        const std::vector<std::uint8_t>& dones, double gamma, double lambda,
                        double bootstrap_value);

/// Flattened rollout; index = worker * rollout_steps + t.
struct RolloutBatch {
  Mat observations;
  std::vector<int> actions;
  Vec log_probs;
  Vec values;
  Vec rewards;  // combined
  std::vector<std::uint8_t> dones;
  Vec advantages;
  Vec returns;

  int size() const { return static_cast<int>(observations.rows()); }
};

struct UpdateStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
};

/// Clipped-surrogate PPO with full-batch advantage normalization, value MSE,
/// and entropy bonus, for config.epochs over shuffled minibatches.
UpdateStats ppo_update(PolicyValueNet& net, PolicyGrads& grads, PolicyAdam& adam,
                       const RolloutBatch& batch, const PPOConfig& config, Rng& rng);

void save_policy(const PolicyValueNet& net, const std::string& path);
PolicyValueNet load_policy(const std::string& path);

}  // namespace etd::agent
