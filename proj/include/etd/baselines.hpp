#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "etd/net.hpp"
#include "etd/rng.hpp"
#include "etd/trajectory.hpp"

namespace etd::baselines {

using diffcore::AdamConfig;
using diffcore::AdamState;
using diffcore::DenseNet;
using diffcore::NetGrads;

/// Per-episode visit counts keyed by hashed observation bytes.
struct EpisodicCountTable {
  std::unordered_map<std::uint64_t, int> counts;
  void clear() { counts.clear(); }
};

std::uint64_t observation_key(const Vec& observation);

/// Increments the visit count; returns the count after the increment.
int record_visit(EpisodicCountTable& table, std::uint64_t key);

/// 1 on the first visit this episode, else 0. Requires the count for this
/// visit to have been recorded already.
double count_bonus(const EpisodicCountTable& table, std::uint64_t key);

/// Encoder embeddings with a pair head scoring "y is within K steps of x".
struct ReachabilityClassifier {
  DenseNet encoder;
  DenseNet head;  // on concat(emb_x, emb_y) -> logit
  int horizon = 5;
};
ReachabilityClassifier make_reachability(int obs_dim, int embed_dim, int horizon, Rng& rng);

struct ReachabilityGrads {
  NetGrads encoder, head;
  void zero();
};
ReachabilityGrads make_grads(const ReachabilityClassifier& c);
struct ReachabilityAdam {
  AdamState encoder, head;
};
ReachabilityAdam make_adam(const ReachabilityClassifier& c);

Vec reachability_embed(const ReachabilityClassifier& c, const Vec& obs);
double reachability_score(const ReachabilityClassifier& c, const Vec& emb_x, const Vec& emb_y);

/// BCE step on within-horizon positives vs beyond-horizon negatives sampled
/// from the buffer. Returns the loss.
double train_reachability_step(ReachabilityClassifier& c, ReachabilityGrads& grads,
                               ReachabilityAdam& adam, const AdamConfig& adam_config,
                               const TrajectoryBuffer& buffer, int batch_size, Rng& rng);

/// alpha * (beta - percentile of classifier scores against memory).
/// Empty memory gives alpha * beta.
double ec_bonus(const ReachabilityClassifier& c, const std::vector<Vec>& memory_embeddings,
                const Vec& query_embedding, double alpha, double beta_threshold,
                double percentile);

/// Encoder embeddings trained to predict the action between consecutive states.
struct InverseDynamicsModel {
  DenseNet encoder;
  DenseNet head;  // on concat(emb_t, emb_t1) -> action logits
  int action_count = 0;
};
InverseDynamicsModel make_invdyn(int obs_dim, int embed_dim, int n_actions, Rng& rng);

struct InvdynGrads {
  NetGrads encoder, head;
  void zero();
};
InvdynGrads make_grads(const InverseDynamicsModel& m);
struct InvdynAdam {
  AdamState encoder, head;
};
InvdynAdam make_adam(const InverseDynamicsModel& m);

Vec invdyn_embed(const InverseDynamicsModel& m, const Vec& obs);

/// Cross-entropy step on (s_t, a_t, s_{t+1}) triples. Returns the loss.
double train_invdyn_step(InverseDynamicsModel& m, InvdynGrads& grads, InvdynAdam& adam,
                         const AdamConfig& adam_config, const TrajectoryBuffer& buffer,
                         int batch_size, Rng& rng);

/// min over memory of |emb(s_k) - emb(s)|_2; 0 on empty memory.
double invdyn_bonus(const InverseDynamicsModel& m, const std::vector<Vec>& memory_embeddings,
                    const Vec& query_embedding);

}  // namespace etd::baselines
