#include "doctest.h"

#include <cmath>

#include "etd/agent.hpp"
#include "etd/envkit.hpp"
#include "support/oracles.hpp"

using namespace etd;
using namespace etd::agent;

TEST_SUITE_BEGIN("agent");

TEST_CASE("gae with lambda 0 reduces to one-step TD errors") {
  Rng rng(1);
  std::vector<double> rewards, values;
  std::vector<std::uint8_t> dones(100, 0);
  for (int i = 0; i < 100; ++i) {
    rewards.push_back(uniform_real(rng) - 0.5);
    values.push_back(uniform_real(rng));
  }
  dones[40] = 1;
  const double bootstrap = 0.33;
  const auto adv = gae(rewards, values, dones, 0.99, 0.0, bootstrap);
  for (int t = 0; t < 100; ++t) {
    const double next = t == 99 ? bootstrap : values[t + 1];
    const double expected = rewards[t] + 0.99 * next * (dones[t] ? 0.0 : 1.0) - values[t];
    CHECK(adv[t] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gae with lambda 1 telescopes to discounted returns minus the baseline") {
  Rng rng(2);
  const int n = 100;
  std::vector<double> rewards, values;
  std::vector<std::uint8_t> dones(n, 0);
  for (int i = 0; i < n; ++i) {
    rewards.push_back(uniform_real(rng) - 0.2);
    values.push_back(uniform_real(rng));
  }
  const double gamma = 0.97, bootstrap = -0.4;
  const auto adv = gae(rewards, values, dones, gamma, 1.0, bootstrap);
  for (int t = 0; t < n; ++t) {
    double ret = 0, scale = 1;
    for (int k = t; k < n; ++k) {
      ret += scale * rewards[k];
      scale *= gamma;
    }
    ret += scale * bootstrap;
    CHECK(adv[t] == doctest::Approx(ret - values[t]).epsilon(1e-12));
  }
}

TEST_CASE("gae of an all-zero sequence is zero and mismatched lengths throw") {
  std::vector<double> zeros(5, 0.0);
  std::vector<std::uint8_t> dones(5, 0);
  for (double a : gae(zeros, zeros, dones, 0.99, 0.95, 0.0)) CHECK(a == 0.0);
  std::vector<double> short_values(4, 0.0);
  CHECK_THROWS_AS(gae(zeros, short_values, dones, 0.99, 0.95, 0.0), std::invalid_argument);
}

TEST_CASE("combine_reward applies both coefficients") {
  PPOConfig config;
  config.extrinsic_coef = 1.0;
  config.intrinsic_coef = 0.01;
  CHECK(combine_reward(1.0, 0.0, config) == doctest::Approx(1.0));
  CHECK(combine_reward(0.0, 2.0, config) == doctest::Approx(0.02));
  config.intrinsic_coef = 0.0;
  CHECK(combine_reward(0.5, 123.0, config) == doctest::Approx(0.5));
}

TEST_CASE("sampling from uniform logits is uniform and log-probs match softmax") {
  Rng init(3);
  PolicyValueNet net = make_policy(4, 4, init, 16, 8, 16);
  // zero the policy head: logits all equal
  for (auto& w : net.policy_head.weights) w.setZero();
  for (auto& b : net.policy_head.biases) b.setZero();
  Rng rng(4);
  std::vector<int> counts(4, 0);
  Vec obs = Vec::Ones(4);
  for (int i = 0; i < 10000; ++i) {
    const ActResult r = act(net, obs, rng);
    ++counts[r.action];
    CHECK(r.log_prob == doctest::Approx(std::log(0.25)).epsilon(1e-9));
  }
  for (int a = 0; a < 4; ++a) {
    CHECK(counts[a] / 10000.0 > 0.22);
    CHECK(counts[a] / 10000.0 < 0.28);
  }
}

TEST_CASE("deterministic action is the argmax and log-probs are exact log softmax") {
  Rng init(5);
  PolicyValueNet net = make_policy(6, 5, init, 16, 8, 16);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec obs = testing::random_vec(rng, 6);
    const Vec emb = diffcore::evaluate(net.encoder, obs);
    const Vec logits = diffcore::evaluate(net.policy_head, emb);
    Eigen::Index best;
    logits.maxCoeff(&best);
    const ActResult r = act(net, obs, rng, /*deterministic=*/true);
    CHECK(r.action == static_cast<int>(best));
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    CHECK(r.log_prob == doctest::Approx(logits[r.action] - lse).epsilon(1e-12));
    // stochastic log_prob matches softmax of the sampled logit too
    const ActResult s = act(net, obs, rng);
    CHECK(s.log_prob == doctest::Approx(logits[s.action] - lse).epsilon(1e-12));
  }
}

TEST_CASE("zero advantages with an unchanged policy give zero policy loss and clip fraction") {
  Rng init(7);
  PolicyValueNet net = make_policy(4, 3, init, 16, 8, 16);
  PolicyGrads grads = make_grads(net);
  PolicyAdam adam = make_adam(net);
  PPOConfig config;
  config.minibatch = 8;
  config.epochs = 1;
  config.workers = 1;
  config.rollout_steps = 8;
  config.learning_rate = 1e-9;

  Rng rng(8);
  RolloutBatch batch;
  const int n = 8;
  batch.observations.resize(n, 4);
  batch.log_probs.resize(n);
  batch.values.resize(n);
  batch.rewards = Vec::Zero(n);
  batch.dones.assign(n, 0);
  batch.advantages = Vec::Zero(n);
  batch.returns.resize(n);
  for (int i = 0; i < n; ++i) {
    batch.observations.row(i) = testing::random_vec(rng, 4).transpose();
    const ActResult r = act(net, batch.observations.row(i).transpose(), rng);
    batch.actions.push_back(r.action);
    batch.log_probs[i] = r.log_prob;
    batch.values[i] = r.value;
    batch.returns[i] = r.value;  // zero value error as well
  }
  const UpdateStats stats = ppo_update(net, grads, adam, batch, config, rng);
  CHECK(stats.policy_loss == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(stats.clip_fraction == 0.0);
  CHECK(stats.value_loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("one update on a bandit batch raises the probability of the rewarded action") {
  Rng init(9);
  PolicyValueNet net = make_policy(2, 2, init, 16, 8, 16);
  PolicyGrads grads = make_grads(net);
  PolicyAdam adam = make_adam(net);
  PPOConfig config;
  config.minibatch = 64;
  config.epochs = 1;
  config.learning_rate = 1e-2;
  config.entropy_coef = 0.0;

  Vec obs = Vec::Ones(2);
  const Vec emb = diffcore::evaluate(net.encoder, obs);
  const Vec logits0 = diffcore::evaluate(net.policy_head, emb);
  const double p0_before = std::exp(logits0[0]) / (std::exp(logits0[0]) + std::exp(logits0[1]));

  Rng rng(10);
  const int n = 64;
  RolloutBatch batch;
  batch.observations = obs.transpose().replicate(n, 1);
  batch.log_probs.resize(n);
  batch.values = Vec::Zero(n);
  batch.rewards.resize(n);
  batch.dones.assign(n, 1);
  batch.advantages.resize(n);
  batch.returns.resize(n);
  for (int i = 0; i < n; ++i) {
    const ActResult r = act(net, obs, rng);
    batch.actions.push_back(r.action);
    batch.log_probs[i] = r.log_prob;
    const double reward = r.action == 0 ? 1.0 : 0.0;
    batch.rewards[i] = reward;
    batch.advantages[i] = reward - 0.5;
    batch.returns[i] = reward;
  }
  ppo_update(net, grads, adam, batch, config, rng);

  const Vec emb_after = diffcore::evaluate(net.encoder, obs);
  const Vec logits1 = diffcore::evaluate(net.policy_head, emb_after);
  const double p0_after = std::exp(logits1[0]) / (std::exp(logits1[0]) + std::exp(logits1[1]));
  CHECK(p0_after > p0_before);
}

TEST_CASE("advantage normalization inside the update uses mean zero and unit variance") {
  // checked indirectly: constant advantages normalize to zero, so the policy
  // loss is exactly zero even though the raw advantages are large
  Rng init(11);
  PolicyValueNet net = make_policy(3, 2, init, 8, 8, 8);
  PolicyGrads grads = make_grads(net);
  PolicyAdam adam = make_adam(net);
  PPOConfig config;
  config.minibatch = 16;
  config.epochs = 1;
  config.learning_rate = 1e-9;
  config.entropy_coef = 0.0;

  Rng rng(12);
  const int n = 16;
  RolloutBatch batch;
  batch.observations.resize(n, 3);
  batch.log_probs.resize(n);
  batch.values = Vec::Zero(n);
  batch.rewards = Vec::Zero(n);
  batch.dones.assign(n, 0);
  batch.advantages = Vec::Constant(n, 7.5);
  batch.returns = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    batch.observations.row(i) = testing::random_vec(rng, 3).transpose();
    const ActResult r = act(net, batch.observations.row(i).transpose(), rng);
    batch.actions.push_back(r.action);
    batch.log_probs[i] = r.log_prob;
  }
  const UpdateStats stats = ppo_update(net, grads, adam, batch, config, rng);
  CHECK(stats.policy_loss == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("plain ppo improves the return on an easy dense chain") {
  // four-cell chain, frequent goal hits under random behavior; the smoothed
  // return curve should trend upward
  envkit::EnvConfig env_config;
  env_config.family = envkit::EnvFamily::chain;
  env_config.chain_length = 4;
  env_config.time_limit_factor = 6;

  Rng init(13);
  const envkit::GridLayout probe =
      envkit::generate_layout(envkit::sample_context(1, 0, envkit::EnvFamily::chain), env_config);
  PolicyValueNet net = make_policy(envkit::observation_dim(probe), 4, init, 32, 16, 32);
  PolicyGrads grads = make_grads(net);
  PolicyAdam adam = make_adam(net);
  PPOConfig config;
  config.workers = 8;
  config.rollout_steps = 64;
  config.minibatch = 128;
  config.epochs = 4;
  config.learning_rate = 1e-3;
  config.entropy_coef = 1e-3;

  Rng policy_rng(14), ppo_rng(15);
  std::vector<envkit::GridEnv> envs;
  std::vector<Vec> obs;
  std::uint64_t episode = 0;
  for (int w = 0; w < config.workers; ++w) {
    envs.emplace_back(env_config, w);
    obs.push_back(envs[w].reset(envkit::sample_context(2, episode++, envkit::EnvFamily::chain)));
  }

  std::vector<double> update_returns;
  for (int update = 0; update < 40; ++update) {
    const int rows = config.workers * config.rollout_steps;
    RolloutBatch batch;
    batch.observations.resize(rows, net.obs_dim);
    batch.actions.assign(rows, 0);
    batch.log_probs.resize(rows);
    batch.values.resize(rows);
    batch.rewards.resize(rows);
    batch.dones.assign(rows, 0);
    batch.advantages.resize(rows);
    batch.returns.resize(rows);
    double sum_return = 0;
    int episodes_seen = 0;
    for (int t = 0; t < config.rollout_steps; ++t) {
      for (int w = 0; w < config.workers; ++w) {
        const int row = w * config.rollout_steps + t;
        const ActResult r = act(net, obs[w], policy_rng);
        batch.observations.row(row) = obs[w].transpose();
        batch.actions[row] = r.action;
        batch.log_probs[row] = r.log_prob;
        batch.values[row] = r.value;
        const envkit::StepResult sr = envs[w].step(static_cast<envkit::Action>(r.action));
        batch.rewards[row] = sr.reward;
        batch.dones[row] = sr.done ? 1 : 0;
        if (sr.done) {
          sum_return += sr.reward;
          ++episodes_seen;
          obs[w] = envs[w].reset(envkit::sample_context(2, episode++, envkit::EnvFamily::chain));
        } else {
          obs[w] = sr.observation;
        }
      }
    }
    for (int w = 0; w < config.workers; ++w) {
      std::vector<double> rewards(config.rollout_steps), values(config.rollout_steps);
      std::vector<std::uint8_t> dones(config.rollout_steps);
      for (int t = 0; t < config.rollout_steps; ++t) {
        const int row = w * config.rollout_steps + t;
        rewards[t] = batch.rewards[row];
        values[t] = batch.values[row];
        dones[t] = batch.dones[row];
      }
      Rng dummy(0);
      const double bootstrap = act(net, obs[w], dummy, true).value;
      const auto adv = gae(rewards, values, dones, config.gamma, config.gae_lambda, bootstrap);
      for (int t = 0; t < config.rollout_steps; ++t) {
        const int row = w * config.rollout_steps + t;
        batch.advantages[row] = adv[t];
        batch.returns[row] = adv[t] + values[t];
      }
    }
    ppo_update(net, grads, adam, batch, config, ppo_rng);
    update_returns.push_back(episodes_seen ? sum_return / episodes_seen : 0.0);
  }
  auto mean_of = [&](int from, int count) {
    double s = 0;
    for (int i = from; i < from + count; ++i) s += update_returns[i];
    return s / count;
  };
  const double early = mean_of(0, 10);
  const double late = mean_of(30, 10);
  CHECK(late > early);
  CHECK(late >= 0.9);  // the 4-chain is solvable almost surely
}

TEST_CASE("ratio clipping zeroes the gradient contribution of over-updated samples") {
  // sample 0 has positive normalized advantage and a ratio far beyond
  // 1 + clip: the clipped branch is active, so making its ratio even more
  // extreme must not change the update at all
  Rng init(16);
  PolicyValueNet reference = make_policy(2, 2, init, 8, 8, 8);

  auto run_update = [&](double staleness) {
    PolicyValueNet net = reference;
    PolicyGrads grads = make_grads(net);
    PolicyAdam adam = make_adam(net);
    PPOConfig config;
    config.minibatch = 4;
    config.epochs = 1;
    config.learning_rate = 1e-3;
    config.entropy_coef = 0.0;
    config.value_coef = 0.0;

    Rng rng(17);
    const int n = 4;
    RolloutBatch batch;
    batch.observations.resize(n, 2);
    batch.log_probs.resize(n);
    batch.values = Vec::Zero(n);
    batch.rewards = Vec::Zero(n);
    batch.dones.assign(n, 0);
    batch.advantages.resize(n);
    batch.returns = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
      batch.observations.row(i) = testing::random_vec(rng, 2).transpose();
      const ActResult r = act(net, batch.observations.row(i).transpose(), rng);
      batch.actions.push_back(r.action);
      // sample 0: stale log-prob so its ratio blows past the clip window
      batch.log_probs[i] = i == 0 ? r.log_prob - staleness : r.log_prob;
      batch.advantages[i] = i == 0 ? 2.0 : 1.0;  // sample 0 normalizes positive
    }
    const UpdateStats stats = ppo_update(net, grads, adam, batch, config, rng);
    CHECK(stats.clip_fraction == doctest::Approx(0.25));
    return diffcore::flatten_params(net.policy_head);
  };

  const Vec params_a = run_update(10.0);
  const Vec params_b = run_update(20.0);
  CHECK((params_a - params_b).norm() == 0.0);
}

TEST_SUITE_END();
