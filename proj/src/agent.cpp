#include "etd/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace etd::agent {

using diffcore::Activation;
using diffcore::BatchTape;
using diffcore::LayerSpec;
using diffcore::Normalization;

namespace {

Vec log_softmax(const Vec& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

nlohmann::json net_to_json(const DenseNet& net) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (const auto& spec : net.layers)
    j["layers"].push_back({{"in", spec.in},
                           {"out", spec.out},
                           {"act", static_cast<int>(spec.act)},
                           {"norm", static_cast<int>(spec.norm)}});
  const Vec flat = diffcore::flatten_params(net);
  j["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  return j;
}

DenseNet net_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> layers;
  for (const auto& l : j.at("layers"))
    layers.push_back(LayerSpec{l.at("in").get<int>(), l.at("out").get<int>(),
                               static_cast<Activation>(l.at("act").get<int>()),
                               static_cast<Normalization>(l.at("norm").get<int>())});
  Rng rng(0);
  DenseNet net = diffcore::make_net(layers, rng);
  const auto values = j.at("params").get<std::vector<double>>();
  diffcore::unflatten_params(
      net, Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size())));
  return net;
}

}  // namespace

void PPOConfig::validate() const {
  if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("ppo: gamma must be in (0,1)");
  if (!(gae_lambda >= 0 && gae_lambda <= 1))
    throw std::invalid_argument("ppo: gae_lambda must be in [0,1]");
  if (!(clip > 0 && clip < 1)) throw std::invalid_argument("ppo: clip must be in (0,1)");
  if (epochs <= 0 || minibatch <= 0 || workers <= 0 || rollout_steps <= 0)
    throw std::invalid_argument("ppo: epochs/minibatch/workers/rollout_steps must be positive");
  if (learning_rate <= 0) throw std::invalid_argument("ppo: learning_rate must be positive");
  if (entropy_coef < 0 || value_coef < 0)
    throw std::invalid_argument("ppo: loss coefficients must be nonnegative");
}

PolicyValueNet make_policy(int obs_dim, int n_actions, Rng& rng, int encoder_hidden,
                           int embed_dim, int head_hidden) {
  if (obs_dim <= 0 || n_actions <= 1) throw std::invalid_argument("make_policy: bad dims");
  PolicyValueNet net;
  net.obs_dim = obs_dim;
  net.action_count = n_actions;
  net.encoder = diffcore::make_net(
      {{obs_dim, encoder_hidden, Activation::relu, Normalization::layer_norm},
       {encoder_hidden, embed_dim, Activation::relu, Normalization::layer_norm}},
      rng);
  net.policy_head = diffcore::make_net(
      {{embed_dim, head_hidden, Activation::relu, Normalization::none},
       {head_hidden, n_actions, Activation::identity, Normalization::none}},
      rng);
  net.value_head = diffcore::make_net(
      {{embed_dim, head_hidden, Activation::relu, Normalization::none},
       {head_hidden, 1, Activation::identity, Normalization::none}},
      rng);
  return net;
}

void PolicyGrads::zero() {
  encoder.zero();
  policy_head.zero();
  value_head.zero();
}

PolicyGrads make_grads(const PolicyValueNet& net) {
  return PolicyGrads{diffcore::make_grads(net.encoder), diffcore::make_grads(net.policy_head),
                     diffcore::make_grads(net.value_head)};
}

PolicyAdam make_adam(const PolicyValueNet& net) {
  return PolicyAdam{diffcore::make_adam_state(net.encoder),
                    diffcore::make_adam_state(net.policy_head),
                    diffcore::make_adam_state(net.value_head)};
}

ActResult act(const PolicyValueNet& net, const Vec& obs, Rng& rng, bool deterministic) {
  const Vec emb = diffcore::evaluate(net.encoder, obs);
  const Vec logits = diffcore::evaluate(net.policy_head, emb);
  const Vec logp = log_softmax(logits);
  ActResult result;
  result.value = diffcore::evaluate(net.value_head, emb)[0];
  if (deterministic) {
    Eigen::Index arg = 0;
    logits.maxCoeff(&arg);
    result.action = static_cast<int>(arg);
  } else {
    const double u = uniform_real(rng);
    double cum = 0;
    result.action = net.action_count - 1;
    for (int a = 0; a < net.action_count; ++a) {
      cum += std::exp(logp[a]);
      if (u < cum) {
        result.action = a;
        break;
      }
    }
  }
  result.log_prob = logp[result.action];
  return result;
}

BatchActResult act_batch(const PolicyValueNet& net, const Mat& obs_rows, Rng& rng,
                         bool deterministic) {
  const Mat emb = diffcore::evaluate_batch(net.encoder, obs_rows);
  const Mat logits = diffcore::evaluate_batch(net.policy_head, emb);
  const Vec values = diffcore::evaluate_batch(net.value_head, emb).col(0);
  const Eigen::Index n = obs_rows.rows();
  BatchActResult result;
  result.actions.resize(n);
  result.log_probs.resize(n);
  result.values = values;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec logp = log_softmax(logits.row(i).transpose());
    int action;
    if (deterministic) {
      Eigen::Index arg = 0;
      logp.maxCoeff(&arg);
      action = static_cast<int>(arg);
    } else {
      const double u = uniform_real(rng);
      double cum = 0;
      action = net.action_count - 1;
      for (int a = 0; a < net.action_count; ++a) {
        cum += std::exp(logp[a]);
        if (u < cum) {
          action = a;
          break;
        }
      }
    }
    result.actions[i] = action;
    result.log_probs[i] = logp[action];
  }
  return result;
}

double combine_reward(double extrinsic, double normalized_bonus, const PPOConfig& config) {
  return config.extrinsic_coef * extrinsic + config.intrinsic_coef * normalized_bonus;
}

std::vector<double> gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        const std::vector<std::uint8_t>& dones, double gamma, double lambda,
                        double bootstrap_value) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw std::invalid_argument("gae: rewards/values/dones lengths differ");
  std::vector<double> advantages(n, 0.0);
  double next_advantage = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t i = n; i-- > 0;) {
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * not_done - values[i];
    next_advantage = delta + gamma * lambda * not_done * next_advantage;
    advantages[i] = next_advantage;
    next_value = values[i];
  }
  return advantages;
}

UpdateStats ppo_update(PolicyValueNet& net, PolicyGrads& grads, PolicyAdam& adam,
                       const RolloutBatch& batch, const PPOConfig& config, Rng& rng) {
  config.validate();
  const int n = batch.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty batch");
  if (!batch.rewards.allFinite() || !batch.advantages.allFinite())
    throw std::runtime_error("ppo_update: non-finite rewards or advantages");

  // full-batch advantage normalization
  Vec adv = batch.advantages;
  const double mean = adv.mean();
  const double stddev = std::sqrt((adv.array() - mean).square().mean());
  adv = (adv.array() - mean) / (stddev + 1e-8);

  const AdamConfig adam_config{config.learning_rate, 0.9, 0.999, 1e-5};
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  UpdateStats stats;
  long minibatches = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += config.minibatch) {
      const int count = std::min(config.minibatch, n - start);
      Mat obs(count, batch.observations.cols());
      for (int i = 0; i < count; ++i) obs.row(i) = batch.observations.row(order[start + i]);

      BatchTape enc_tape, pol_tape, val_tape;
      const Mat emb = diffcore::forward_batch(net.encoder, obs, enc_tape);
      const Mat logits = diffcore::forward_batch(net.policy_head, emb, pol_tape);
      const Vec values = diffcore::forward_batch(net.value_head, emb, val_tape).col(0);

      Mat d_logits = Mat::Zero(count, net.action_count);
      Mat d_value = Mat::Zero(count, 1);
      double policy_loss = 0, value_loss = 0, entropy = 0;
      long clipped = 0;
      const double inv = 1.0 / static_cast<double>(count);
      for (int i = 0; i < count; ++i) {
        const int row = order[start + i];
        const Vec logp = log_softmax(logits.row(i).transpose());
        const Vec p = logp.array().exp();
        const int a = batch.actions[row];
        const double advantage = adv[row];
        const double ratio = std::exp(logp[a] - batch.log_probs[row]);
        const double clipped_ratio = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
        const double surr1 = ratio * advantage;
        const double surr2 = clipped_ratio * advantage;
        policy_loss -= inv * std::min(surr1, surr2);
        if (std::abs(ratio - 1.0) > config.clip) ++clipped;
        if (surr1 <= surr2) {
          // gradient of -ratio*A w.r.t. logits: -A*ratio*(onehot - p)
          const double c = -inv * advantage * ratio;
          d_logits.row(i) += c * (-p.transpose());
          d_logits(i, a) += c;
        }
        const double h = -(p.array() * logp.array()).sum();
        entropy += inv * h;
        // d(-coef*H)/dlogits = coef * p .* (logp + H)
        d_logits.row(i) +=
            (config.entropy_coef * inv) * (p.array() * (logp.array() + h)).matrix().transpose();

        const double verr = values[i] - batch.returns[row];
        value_loss += inv * verr * verr;
        d_value(i, 0) = config.value_coef * inv * 2.0 * verr;
      }

      grads.zero();
      Mat demb = diffcore::backward_batch(net.policy_head, pol_tape, d_logits, grads.policy_head);
      demb += diffcore::backward_batch(net.value_head, val_tape, d_value, grads.value_head);
      diffcore::backward_batch(net.encoder, enc_tape, demb, grads.encoder);

      const double total_loss =
          policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy;
      if (!std::isfinite(total_loss))
        throw std::runtime_error("ppo_update: non-finite loss (policy " +
                                 std::to_string(policy_loss) + ", value " +
                                 std::to_string(value_loss) + ")");

      diffcore::adam_step(net.encoder, grads.encoder, adam.encoder, adam_config);
      diffcore::adam_step(net.policy_head, grads.policy_head, adam.policy_head, adam_config);
      diffcore::adam_step(net.value_head, grads.value_head, adam.value_head, adam_config);

      stats.policy_loss += policy_loss;
      stats.value_loss += value_loss;
      stats.entropy += entropy;
      stats.clip_fraction += static_cast<double>(clipped) / count;
      ++minibatches;
    }
  }
  if (minibatches > 0) {
    stats.policy_loss /= minibatches;
    stats.value_loss /= minibatches;
    stats.entropy /= minibatches;
    stats.clip_fraction /= minibatches;
  }
  return stats;
}

void save_policy(const PolicyValueNet& net, const std::string& path) {
  nlohmann::json j;
  j["obs_dim"] = net.obs_dim;
  j["action_count"] = net.action_count;
  j["encoder"] = net_to_json(net.encoder);
  j["policy_head"] = net_to_json(net.policy_head);
  j["value_head"] = net_to_json(net.value_head);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  out << j.dump();
}

PolicyValueNet load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  PolicyValueNet net;
  net.obs_dim = j.at("obs_dim").get<int>();
  net.action_count = j.at("action_count").get<int>();
  net.encoder = net_from_json(j.at("encoder"));
  net.policy_head = net_from_json(j.at("policy_head"));
  net.value_head = net_from_json(j.at("value_head"));
  return net;
}

}  // namespace etd::agent
