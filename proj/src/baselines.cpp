#include "etd/baselines.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "etd/stats.hpp"

namespace etd::baselines {

using diffcore::Activation;
using diffcore::BatchTape;
using diffcore::LayerSpec;
using diffcore::Normalization;

std::uint64_t observation_key(const Vec& observation) {
  // FNV-1a over the raw double bytes; under continuous noise every key is
  // unique, which is exactly the count-bonus failure mode under test.
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < observation.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &observation[i], sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

int record_visit(EpisodicCountTable& table, std::uint64_t key) { return ++table.counts[key]; }

double count_bonus(const EpisodicCountTable& table, std::uint64_t key) {
  const auto it = table.counts.find(key);
  if (it == table.counts.end())
    throw std::logic_error("count_bonus: visit not recorded before bonus query");
  return it->second == 1 ? 1.0 : 0.0;
}

ReachabilityClassifier make_reachability(int obs_dim, int embed_dim, int horizon, Rng& rng) {
  ReachabilityClassifier c;
  c.horizon = horizon;
  c.encoder = diffcore::make_net(
      {{obs_dim, 64, Activation::relu, Normalization::layer_norm},
       {64, embed_dim, Activation::relu, Normalization::none}},
      rng);
  c.head = diffcore::make_net({{2 * embed_dim, 64, Activation::relu, Normalization::none},
                               {64, 1, Activation::identity, Normalization::none}},
                              rng);
  return c;
}

void ReachabilityGrads::zero() {
  encoder.zero();
  head.zero();
}

ReachabilityGrads make_grads(const ReachabilityClassifier& c) {
  return ReachabilityGrads{diffcore::make_grads(c.encoder), diffcore::make_grads(c.head)};
}

ReachabilityAdam make_adam(const ReachabilityClassifier& c) {
  return ReachabilityAdam{diffcore::make_adam_state(c.encoder), diffcore::make_adam_state(c.head)};
}

Vec reachability_embed(const ReachabilityClassifier& c, const Vec& obs) {
  return diffcore::evaluate(c.encoder, obs);
}

double reachability_score(const ReachabilityClassifier& c, const Vec& emb_x, const Vec& emb_y) {
  Vec pair(emb_x.size() + emb_y.size());
  pair << emb_x, emb_y;
  const double logit = diffcore::evaluate(c.head, pair)[0];
  return 1.0 / (1.0 + std::exp(-logit));
}

double train_reachability_step(ReachabilityClassifier& c, ReachabilityGrads& grads,
                               ReachabilityAdam& adam, const AdamConfig& adam_config,
                               const TrajectoryBuffer& buffer, int batch_size, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("train_reachability_step: empty buffer");
  const int obs_dim = static_cast<int>(buffer.episodes.front().observations.cols());
  Mat xs(batch_size, obs_dim), ys(batch_size, obs_dim);
  Vec targets(batch_size);
  const int n_episodes = static_cast<int>(buffer.episodes.size());
  for (int i = 0; i < batch_size; ++i) {
    const Episode& ep = buffer.episodes[uniform_int(rng, 0, n_episodes - 1)];
    const int last = ep.num_observations() - 1;
    const int t = uniform_int(rng, 0, last);
    const bool positive = (i % 2) == 0;
    int other = t;
    // positives within the horizon, negatives beyond it (when the episode
    // allows; short episodes may only produce positives)
    for (int attempt = 0; attempt < 64; ++attempt) {
      other = uniform_int(rng, 0, last);
      const bool within = std::abs(other - t) <= c.horizon;
      if (within == positive) break;
    }
    xs.row(i) = ep.observations.row(t);
    ys.row(i) = ep.observations.row(other);
    targets[i] = std::abs(other - t) <= c.horizon ? 1.0 : 0.0;
  }

  BatchTape enc_x, enc_y, head_tape;
  const Mat emb_x = diffcore::forward_batch(c.encoder, xs, enc_x);
  const Mat emb_y = diffcore::forward_batch(c.encoder, ys, enc_y);
  Mat pair(batch_size, emb_x.cols() + emb_y.cols());
  pair << emb_x, emb_y;
  const Vec logits = diffcore::forward_batch(c.head, pair, head_tape).col(0);

  double loss = 0;
  Mat d_logits(batch_size, 1);
  const double inv = 1.0 / batch_size;
  for (int i = 0; i < batch_size; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits[i]));
    loss -= inv * (targets[i] * std::log(p + 1e-12) + (1.0 - targets[i]) * std::log(1.0 - p + 1e-12));
    d_logits(i, 0) = inv * (p - targets[i]);
  }

  grads.zero();
  const Mat d_pair = diffcore::backward_batch(c.head, head_tape, d_logits, grads.head);
  diffcore::backward_batch(c.encoder, enc_x, d_pair.leftCols(emb_x.cols()), grads.encoder);
  diffcore::backward_batch(c.encoder, enc_y, d_pair.rightCols(emb_y.cols()), grads.encoder);
  diffcore::adam_step(c.encoder, grads.encoder, adam.encoder, adam_config);
  diffcore::adam_step(c.head, grads.head, adam.head, adam_config);
  return loss;
}

double ec_bonus(const ReachabilityClassifier& c, const std::vector<Vec>& memory_embeddings,
                const Vec& query_embedding, double alpha, double beta_threshold,
                double percentile) {
  if (memory_embeddings.empty()) return alpha * beta_threshold;
  std::vector<double> scores;
  scores.reserve(memory_embeddings.size());
  for (const Vec& emb : memory_embeddings)
    scores.push_back(reachability_score(c, emb, query_embedding));
  return alpha * (beta_threshold - stats::percentile_linear(scores, percentile));
}

InverseDynamicsModel make_invdyn(int obs_dim, int embed_dim, int n_actions, Rng& rng) {
  InverseDynamicsModel m;
  m.action_count = n_actions;
  m.encoder = diffcore::make_net(
      {{obs_dim, 64, Activation::relu, Normalization::layer_norm},
       {64, embed_dim, Activation::relu, Normalization::none}},
      rng);
  m.head = diffcore::make_net({{2 * embed_dim, 64, Activation::relu, Normalization::none},
                               {64, n_actions, Activation::identity, Normalization::none}},
                              rng);
  return m;
}

void InvdynGrads::zero() {
  encoder.zero();
  head.zero();
}

InvdynGrads make_grads(const InverseDynamicsModel& m) {
  return InvdynGrads{diffcore::make_grads(m.encoder), diffcore::make_grads(m.head)};
}

InvdynAdam make_adam(const InverseDynamicsModel& m) {
  return InvdynAdam{diffcore::make_adam_state(m.encoder), diffcore::make_adam_state(m.head)};
}

Vec invdyn_embed(const InverseDynamicsModel& m, const Vec& obs) {
  return diffcore::evaluate(m.encoder, obs);
}

double train_invdyn_step(InverseDynamicsModel& m, InvdynGrads& grads, InvdynAdam& adam,
                         const AdamConfig& adam_config, const TrajectoryBuffer& buffer,
                         int batch_size, Rng& rng) {
  std::vector<const Episode*> usable;
  for (const auto& ep : buffer.episodes)
    if (!ep.actions.empty()) usable.push_back(&ep);
  if (usable.empty()) throw std::invalid_argument("train_invdyn_step: no transitions in buffer");
  const int obs_dim = static_cast<int>(usable.front()->observations.cols());
  Mat xs(batch_size, obs_dim), ys(batch_size, obs_dim);
  std::vector<int> actions(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    const Episode& ep = *usable[uniform_int(rng, 0, static_cast<int>(usable.size()) - 1)];
    const int t = uniform_int(rng, 0, static_cast<int>(ep.actions.size()) - 1);
    xs.row(i) = ep.observations.row(t);
    ys.row(i) = ep.observations.row(t + 1);
    actions[i] = ep.actions[t];
  }

  BatchTape enc_x, enc_y, head_tape;
  const Mat emb_x = diffcore::forward_batch(m.encoder, xs, enc_x);
  const Mat emb_y = diffcore::forward_batch(m.encoder, ys, enc_y);
  Mat pair(batch_size, emb_x.cols() + emb_y.cols());
  pair << emb_x, emb_y;
  const Mat logits = diffcore::forward_batch(m.head, pair, head_tape);

  double loss = 0;
  Mat d_logits(batch_size, m.action_count);
  const double inv = 1.0 / batch_size;
  for (int i = 0; i < batch_size; ++i) {
    const Vec row = logits.row(i).transpose();
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    loss += inv * (lse - row[actions[i]]);
    Vec p = (row.array() - lse).exp();
    d_logits.row(i) = inv * p.transpose();
    d_logits(i, actions[i]) -= inv;
  }

  grads.zero();
  const Mat d_pair = diffcore::backward_batch(m.head, head_tape, d_logits, grads.head);
  diffcore::backward_batch(m.encoder, enc_x, d_pair.leftCols(emb_x.cols()), grads.encoder);
  diffcore::backward_batch(m.encoder, enc_y, d_pair.rightCols(emb_y.cols()), grads.encoder);
  diffcore::adam_step(m.encoder, grads.encoder, adam.encoder, adam_config);
  diffcore::adam_step(m.head, grads.head, adam.head, adam_config);
  return loss;
}

double invdyn_bonus(const InverseDynamicsModel& m, const std::vector<Vec>& memory_embeddings,
                    const Vec& query_embedding) {
  if (memory_embeddings.empty()) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& emb : memory_embeddings)
    best = std::min(best, (emb - query_embedding).norm());
  return best;
}

}  // namespace etd::baselines
