#include "etd/runner.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "etd/baselines.hpp"
#include "etd/bonus.hpp"
#include "etd/contrastive.hpp"
#include "etd/metricnet.hpp"
#include "etd/trajectory.hpp"

namespace etd::harness {

namespace {

namespace fs = std::filesystem;

/// Swap-in intrinsic-reward source; one per run, with per-worker episodic state.
class BonusProvider {
 public:
  virtual ~BonusProvider() = default;
  virtual void episode_start(int worker, const Vec& initial_obs) = 0;
  /// Bonus for the arriving state, computed against the episodic record
  /// before the state itself is recorded.
  virtual double bonus_for_arrival(int worker, const Vec& obs) = 0;
  virtual double train(const TrajectoryBuffer& data, Rng& rng) { return 0.0; }
  virtual bool provides_bonus() const { return true; }
  virtual void save(const std::string& dir) const {}
};

class NoneProvider final : public BonusProvider {
 public:
  void episode_start(int, const Vec&) override {}
  double bonus_for_arrival(int, const Vec&) override { return 0.0; }
  bool provides_bonus() const override { return false; }
};

class EtdProvider final : public BonusProvider {
 public:
  EtdProvider(const RunConfig& config, int obs_dim, int workers, Rng& init_rng)
      : aggregator_(config.aggregator),
        gamma_(config.model.gamma),
        minibatch_(config.model.minibatch),
        epochs_(config.model.epochs),
        variant_(config.model.loss),
        adam_config_{config.model.learning_rate, 0.9, 0.999, 1e-5},
        memories_(workers) {
    metricnet::QuasimetricConfig mc;
    mc.obs_dim = obs_dim;
    mc.embed_dim = config.model.embed_dim;
    mc.sym_dim = config.model.sym_dim;
    mc.asym_dim = config.model.asym_dim;
    mc.encoder_hidden = config.model.encoder_hidden;
    mc.head_hidden = config.model.head_hidden;
    mc.energy = config.model.energy;
    mc.symmetric_only = config.model.symmetric_only;
    model_ = metricnet::make_quasimetric_model(mc, init_rng);
    grads_ = metricnet::make_grads(model_);
    adam_ = metricnet::make_adam(model_);
  }

  void episode_start(int worker, const Vec& initial_obs) override {
    memories_[worker].clear();
    bonus::append_heads(memories_[worker], bonus::query_heads(model_, initial_obs));
  }

  double bonus_for_arrival(int worker, const Vec& obs) override {
    const bonus::QueryHeads q = bonus::query_heads(model_, obs);
    double b = 0.0;
    if (!memories_[worker].empty())
      b = bonus::aggregate(
          bonus::distances_from_memory(memories_[worker], q, model_.config.symmetric_only),
          aggregator_);
    bonus::append_heads(memories_[worker], q);
    return b;
  }

  double train(const TrajectoryBuffer& data, Rng& rng) override {
    if (data.empty() || epochs_ <= 0) return 0.0;
    const long per_epoch =
        std::max<long>(1, static_cast<long>(data.total_observations()) / minibatch_);
    double total = 0;
    long steps = 0;
    for (int epoch = 0; epoch < epochs_; ++epoch)
      for (long k = 0; k < per_epoch; ++k) {
        total += contrastive::train_step(model_, grads_, adam_, adam_config_, data, gamma_,
                                         minibatch_, variant_, rng);
        ++steps;
      }
    return total / static_cast<double>(steps);
  }

  void save(const std::string& dir) const override {
    metricnet::save_checkpoint(model_, dir + "/metric.json");
  }

  const metricnet::QuasimetricModel& model() const { return model_; }

 private:
  bonus::Aggregator aggregator_;
  double gamma_;
  int minibatch_;
  int epochs_;
  contrastive::LossVariant variant_;
  diffcore::AdamConfig adam_config_;
  metricnet::QuasimetricModel model_;
  metricnet::QuasimetricGrads grads_;
  metricnet::QuasimetricAdam adam_;
  std::vector<bonus::EpisodicMemory> memories_;
};

class CountProvider final : public BonusProvider {
 public:
  explicit CountProvider(int workers) : tables_(workers) {}

  void episode_start(int worker, const Vec& initial_obs) override {
    tables_[worker].clear();
    baselines::record_visit(tables_[worker], baselines::observation_key(initial_obs));
  }

  double bonus_for_arrival(int worker, const Vec& obs) override {
    const std::uint64_t key = baselines::observation_key(obs);
    baselines::record_visit(tables_[worker], key);
    return baselines::count_bonus(tables_[worker], key);
  }

 private:
  std::vector<baselines::EpisodicCountTable> tables_;
};

class EcProvider final : public BonusProvider {
 public:
  EcProvider(const RunConfig& config, int obs_dim, int workers, Rng& init_rng)
      : ec_(config.ec),
        epochs_(config.model.epochs),
        minibatch_(config.model.minibatch),
        adam_config_{config.model.learning_rate, 0.9, 0.999, 1e-5},
        memories_(workers) {
    classifier_ = baselines::make_reachability(obs_dim, 32, config.ec.horizon, init_rng);
    grads_ = baselines::make_grads(classifier_);
    adam_ = baselines::make_adam(classifier_);
  }

  void episode_start(int worker, const Vec& initial_obs) override {
    memories_[worker].clear();
    memories_[worker].push_back(baselines::reachability_embed(classifier_, initial_obs));
  }

  double bonus_for_arrival(int worker, const Vec& obs) override {
    const Vec emb = baselines::reachability_embed(classifier_, obs);
    const double b =
        baselines::ec_bonus(classifier_, memories_[worker], emb, ec_.alpha, ec_.beta,
                            ec_.percentile);
    memories_[worker].push_back(emb);
    return b;
  }

  double train(const TrajectoryBuffer& data, Rng& rng) override {
    if (data.empty() || epochs_ <= 0) return 0.0;
    const long per_epoch =
        std::max<long>(1, static_cast<long>(data.total_observations()) / minibatch_);
    double total = 0;
    long steps = 0;
    for (int epoch = 0; epoch < epochs_; ++epoch)
      for (long k = 0; k < per_epoch; ++k) {
        total += baselines::train_reachability_step(classifier_, grads_, adam_, adam_config_,
                                                    data, minibatch_, rng);
        ++steps;
      }
    return total / static_cast<double>(steps);
  }

 private:
  EcConfig ec_;
  int epochs_;
  int minibatch_;
  diffcore::AdamConfig adam_config_;
  baselines::ReachabilityClassifier classifier_;
  baselines::ReachabilityGrads grads_;
  baselines::ReachabilityAdam adam_;
  std::vector<std::vector<Vec>> memories_;
};

class InvdynProvider final : public BonusProvider {
 public:
  InvdynProvider(const RunConfig& config, int obs_dim, int n_actions, int workers, Rng& init_rng)
      : epochs_(config.model.epochs),
        minibatch_(config.model.minibatch),
        adam_config_{config.model.learning_rate, 0.9, 0.999, 1e-5},
        memories_(workers) {
    model_ = baselines::make_invdyn(obs_dim, 32, n_actions, init_rng);
    grads_ = baselines::make_grads(model_);
    adam_ = baselines::make_adam(model_);
  }

  void episode_start(int worker, const Vec& initial_obs) override {
    memories_[worker].clear();
    memories_[worker].push_back(baselines::invdyn_embed(model_, initial_obs));
  }

  double bonus_for_arrival(int worker, const Vec& obs) override {
    const Vec emb = baselines::invdyn_embed(model_, obs);
    const double b = baselines::invdyn_bonus(model_, memories_[worker], emb);
    memories_[worker].push_back(emb);
    return b;
  }

  double train(const TrajectoryBuffer& data, Rng& rng) override {
    bool has_actions = false;
    for (const auto& ep : data.episodes)
      if (!ep.actions.empty()) has_actions = true;
    if (!has_actions || epochs_ <= 0) return 0.0;
    const long per_epoch =
        std::max<long>(1, static_cast<long>(data.total_observations()) / minibatch_);
    double total = 0;
    long steps = 0;
    for (int epoch = 0; epoch < epochs_; ++epoch)
      for (long k = 0; k < per_epoch; ++k) {
        total += baselines::train_invdyn_step(model_, grads_, adam_, adam_config_, data,
                                              minibatch_, rng);
        ++steps;
      }
    return total / static_cast<double>(steps);
  }

 private:
  int epochs_;
  int minibatch_;
  diffcore::AdamConfig adam_config_;
  baselines::InverseDynamicsModel model_;
  baselines::InvdynGrads grads_;
  baselines::InvdynAdam adam_;
  std::vector<std::vector<Vec>> memories_;
};

std::unique_ptr<BonusProvider> make_provider(const RunConfig& config, int obs_dim, int n_actions,
                                             Rng& init_rng) {
  const int workers = config.ppo.workers;
  if (config.bonus_provider == "etd")
    return std::make_unique<EtdProvider>(config, obs_dim, workers, init_rng);
  if (config.bonus_provider == "count") return std::make_unique<CountProvider>(workers);
  if (config.bonus_provider == "ec")
    return std::make_unique<EcProvider>(config, obs_dim, workers, init_rng);
  if (config.bonus_provider == "invdyn")
    return std::make_unique<InvdynProvider>(config, obs_dim, n_actions, workers, init_rng);
  if (config.bonus_provider == "none") return std::make_unique<NoneProvider>();
  throw std::invalid_argument("unknown bonus provider: " + config.bonus_provider);
}

struct SegmentAccumulator {
  std::vector<Vec> observations;
  std::vector<int> actions;
  std::vector<double> rewards;

  void start(const Vec& obs) {
    observations.assign(1, obs);
    actions.clear();
    rewards.clear();
  }
  void add(const Vec& obs, int action, double reward) {
    observations.push_back(obs);
    actions.push_back(action);
    rewards.push_back(reward);
  }
  Episode finish(bool completed) {
    Episode ep;
    ep.observations.resize(static_cast<Eigen::Index>(observations.size()), observations[0].size());
    for (std::size_t i = 0; i < observations.size(); ++i)
      ep.observations.row(static_cast<Eigen::Index>(i)) = observations[i].transpose();
    ep.actions = actions;
    ep.rewards = rewards;
    ep.completed = completed;
    return ep;
  }
};

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path);
    out_.precision(12);
    out_ << header << "\n";
  }
  template <typename... Ts>
  void row(Ts... values) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, out_ << values), ...);
    out_ << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace

EvalReport evaluate(const agent::PolicyValueNet& policy, const envkit::EnvConfig& env_config,
                    int n_episodes, std::uint64_t eval_seed) {
  EvalReport report;
  if (n_episodes <= 0) return report;
  Rng dummy(0);
  double successes = 0, returns = 0, lengths = 0;
  for (int e = 0; e < n_episodes; ++e) {
    envkit::GridEnv env(env_config, substream_seed(eval_seed, "eval-noise", e));
    Vec obs = env.reset(envkit::sample_context(eval_seed, e, env_config.family));
    if (obs.size() != policy.obs_dim)
      throw std::runtime_error("evaluate: checkpoint obs dim " + std::to_string(policy.obs_dim) +
                               " does not match env obs dim " + std::to_string(obs.size()));
    double ep_return = 0;
    int steps = 0;
    for (;;) {
      const agent::ActResult a = agent::act(policy, obs, dummy, /*deterministic=*/true);
      const envkit::StepResult sr = env.step(static_cast<envkit::Action>(a.action));
      ep_return += sr.reward;
      ++steps;
      obs = sr.observation;
      if (sr.done) break;
    }
    successes += ep_return > 0 ? 1.0 : 0.0;
    returns += ep_return;
    lengths += steps;
  }
  report.episodes = n_episodes;
  report.success_rate = successes / n_episodes;
  report.mean_return = returns / n_episodes;
  report.mean_length = lengths / n_episodes;
  return report;
}

EvalReport evaluate_checkpoint(const std::string& checkpoint, const envkit::EnvConfig& env_config,
                               int n_episodes, std::uint64_t eval_seed) {
  const agent::PolicyValueNet policy = agent::load_policy(checkpoint);
  if (policy.action_count != envkit::action_count(env_config.family))
    throw std::runtime_error("evaluate_checkpoint: action count mismatch between checkpoint and env");
  return evaluate(policy, env_config, n_episodes, eval_seed);
}

SeedRunResult run_single_seed(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const envkit::EnvFamily family = config.env.family;
  const int workers = config.ppo.workers;
  const int rollout_steps = config.ppo.rollout_steps;

  SeedRunResult result;
  result.seed = seed;
  result.dir = resolve_out_dir(config.run.out_dir) + "/seed_" + std::to_string(seed);
  fs::create_directories(result.dir);

  // probe layout for dims
  envkit::EnvConfig env_config = config.env;
  const envkit::GridLayout probe =
      envkit::generate_layout(envkit::sample_context(seed, 0, family), env_config);
  const int obs_dim = envkit::observation_dim(probe);
  const int n_actions = envkit::action_count(family);

  Rng policy_init_rng = make_rng(seed, "policy-init");
  Rng model_init_rng = make_rng(seed, "model-init");
  Rng policy_rng = make_rng(seed, "policy-sample");
  Rng ppo_rng = make_rng(seed, "ppo-shuffle");
  Rng model_rng = make_rng(seed, "model-train");

  agent::PolicyValueNet policy = agent::make_policy(obs_dim, n_actions, policy_init_rng);
  agent::PolicyGrads policy_grads = agent::make_grads(policy);
  agent::PolicyAdam policy_adam = agent::make_adam(policy);
  auto provider = make_provider(config, obs_dim, n_actions, model_init_rng);
  bonus::RewardNormalizer normalizer;

  std::vector<envkit::GridEnv> envs;
  envs.reserve(workers);
  for (int w = 0; w < workers; ++w)
    envs.emplace_back(env_config, substream_seed(seed, "noise", w));

  std::uint64_t episode_counter = 0;
  std::vector<Vec> current_obs(workers);
  std::vector<double> episode_return(workers, 0.0);
  std::vector<SegmentAccumulator> segments(workers);
  for (int w = 0; w < workers; ++w) {
    current_obs[w] = envs[w].reset(envkit::sample_context(seed, episode_counter++, family));
    provider->episode_start(w, current_obs[w]);
    segments[w].start(current_obs[w]);
  }

  CsvWriter metrics(result.dir + "/metrics.csv",
                    "env_steps,episodes,return_mean,success_rate,raw_bonus_mean,norm_bonus_mean,"
                    "model_loss,policy_loss,value_loss,entropy,clip_fraction");
  CsvWriter eval_csv(result.dir + "/eval.csv",
                     "env_steps,success_rate,mean_return,mean_length,episodes");
  CsvWriter timing(result.dir + "/timing.csv", "env_steps,wall_clock_s");
  std::unique_ptr<CsvWriter> bonus_log;
  if (config.run.verbose_bonus_log)
    bonus_log = std::make_unique<CsvWriter>(result.dir + "/bonuses.csv",
                                            "env_step,worker,raw_bonus,normalized_bonus");

  std::deque<double> recent_returns, recent_successes;
  auto rolling_mean = [](const std::deque<double>& d) {
    if (d.empty()) return 0.0;
    double s = 0;
    for (double v : d) s += v;
    return s / static_cast<double>(d.size());
  };

  long steps_done = 0;
  long episodes_done = 0;
  long iteration = 0;
  const int batch_rows = workers * rollout_steps;

  while (steps_done < config.run.total_env_steps) {
    agent::RolloutBatch batch;
    batch.observations.resize(batch_rows, obs_dim);
    batch.actions.assign(batch_rows, 0);
    batch.log_probs.resize(batch_rows);
    batch.values.resize(batch_rows);
    batch.rewards.resize(batch_rows);
    batch.dones.assign(batch_rows, 0);
    batch.advantages.resize(batch_rows);
    batch.returns.resize(batch_rows);

    TrajectoryBuffer rollout_data;
    double raw_bonus_sum = 0, norm_bonus_sum = 0;

    Mat obs_rows(workers, obs_dim);
    for (int t = 0; t < rollout_steps; ++t) {
      for (int w = 0; w < workers; ++w) obs_rows.row(w) = current_obs[w].transpose();
      const agent::BatchActResult acts = agent::act_batch(policy, obs_rows, policy_rng);
      for (int w = 0; w < workers; ++w) {
        const int row = w * rollout_steps + t;
        batch.observations.row(row) = obs_rows.row(w);
        batch.actions[row] = acts.actions[w];
        batch.log_probs[row] = acts.log_probs[w];
        batch.values[row] = acts.values[w];

        const envkit::StepResult sr = envs[w].step(static_cast<envkit::Action>(acts.actions[w]));
        const double raw = provider->bonus_for_arrival(w, sr.observation);
        const double normalized =
            provider->provides_bonus() ? bonus::normalize(normalizer, raw) : 0.0;
        raw_bonus_sum += raw;
        norm_bonus_sum += normalized;
        if (bonus_log) bonus_log->row(steps_done + t * workers + w, w, raw, normalized);

        batch.rewards[row] = agent::combine_reward(sr.reward, normalized, config.ppo);
        batch.dones[row] = sr.done ? 1 : 0;
        segments[w].add(sr.observation, acts.actions[w], sr.reward);
        episode_return[w] += sr.reward;

        if (sr.done) {
          ++episodes_done;
          recent_returns.push_back(episode_return[w]);
          recent_successes.push_back(episode_return[w] > 0 ? 1.0 : 0.0);
          if (recent_returns.size() > 100) {
            recent_returns.pop_front();
            recent_successes.pop_front();
          }
          rollout_data.episodes.push_back(segments[w].finish(true));
          episode_return[w] = 0;
          current_obs[w] = envs[w].reset(envkit::sample_context(seed, episode_counter++, family));
          provider->episode_start(w, current_obs[w]);
          segments[w].start(current_obs[w]);
        } else {
          current_obs[w] = sr.observation;
        }
      }
    }
    for (int w = 0; w < workers; ++w) {
      if (segments[w].observations.size() > 1)
        rollout_data.episodes.push_back(segments[w].finish(false));
      segments[w].start(current_obs[w]);
    }

    // bootstrap values for truncated episodes
    for (int w = 0; w < workers; ++w) obs_rows.row(w) = current_obs[w].transpose();
    Rng bootstrap_dummy(0);
    const agent::BatchActResult boot =
        agent::act_batch(policy, obs_rows, bootstrap_dummy, /*deterministic=*/true);
    for (int w = 0; w < workers; ++w) {
      std::vector<double> rewards(rollout_steps), values(rollout_steps);
      std::vector<std::uint8_t> dones(rollout_steps);
      for (int t = 0; t < rollout_steps; ++t) {
        const int row = w * rollout_steps + t;
        rewards[t] = batch.rewards[row];
        values[t] = batch.values[row];
        dones[t] = batch.dones[row];
      }
      const std::vector<double> adv = agent::gae(rewards, values, dones, config.ppo.gamma,
                                                 config.ppo.gae_lambda, boot.values[w]);
      for (int t = 0; t < rollout_steps; ++t) {
        const int row = w * rollout_steps + t;
        batch.advantages[row] = adv[t];
        batch.returns[row] = adv[t] + values[t];
      }
    }

    const double model_loss = provider->train(rollout_data, model_rng);
    const agent::UpdateStats stats =
        agent::ppo_update(policy, policy_grads, policy_adam, batch, config.ppo, ppo_rng);

    steps_done += static_cast<long>(batch_rows);
    ++iteration;
    const double denom = static_cast<double>(batch_rows);
    metrics.row(steps_done, episodes_done, rolling_mean(recent_returns),
                rolling_mean(recent_successes), raw_bonus_sum / denom, norm_bonus_sum / denom,
                model_loss, stats.policy_loss, stats.value_loss, stats.entropy,
                stats.clip_fraction);
    timing.row(steps_done, std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                         t_start)
                               .count());

    if (config.run.eval_episodes > 0 && iteration % config.run.eval_interval_iters == 0) {
      const EvalReport report =
          evaluate(policy, env_config, config.run.eval_episodes, config.run.eval_seed);
      eval_csv.row(steps_done, report.success_rate, report.mean_return, report.mean_length,
                   report.episodes);
      result.best_eval_success = std::max(result.best_eval_success, report.success_rate);
      if (result.solved_at_steps < 0 && report.success_rate >= 0.8)
        result.solved_at_steps = steps_done;
      if (config.run.early_stop_success > 0 &&
          report.success_rate >= config.run.early_stop_success) {
        result.early_stopped = true;
        break;
      }
    }
  }

  result.steps_run = steps_done;
  result.final_train_success = rolling_mean(recent_successes);
  if (config.run.eval_episodes > 0) {
    const EvalReport final_report =
        evaluate(policy, env_config, config.run.eval_episodes, config.run.eval_seed);
    eval_csv.row(steps_done, final_report.success_rate, final_report.mean_return,
                 final_report.mean_length, final_report.episodes);
    result.final_eval_success = final_report.success_rate;
    result.best_eval_success = std::max(result.best_eval_success, final_report.success_rate);
    if (result.solved_at_steps < 0 && final_report.success_rate >= 0.8)
      result.solved_at_steps = steps_done;
  }

  agent::save_policy(policy, result.dir + "/policy.json");
  provider->save(result.dir);
  return result;
}

std::vector<SeedRunResult> run_experiment(const RunConfig& config) {
  config.validate();
  const std::string root = resolve_out_dir(config.run.out_dir);
  fs::create_directories(root);
  save_config(config, root + "/config.json");
  std::vector<SeedRunResult> results;
  for (std::uint64_t seed : config.run.seeds) results.push_back(run_single_seed(config, seed));
  return results;
}

}  // namespace etd::harness
