#pragma once

#include <string>
#include <vector>

#include "etd/metricnet.hpp"

namespace etd::bonus {

enum class Aggregator { min, quantile10, knn10, knn10avg };

std::string aggregator_name(Aggregator aggregator);
Aggregator aggregator_from_name(const std::string& name);

/// Per-episode store of state embeddings with head outputs cached at append
/// time (embeddings are frozen within an episode).
struct EpisodicMemory {
  std::vector<Vec> embeddings;
  std::vector<Vec> sym, asym;

  void clear();
  int size() const { return static_cast<int>(embeddings.size()); }
  bool empty() const { return embeddings.empty(); }
};

/// Appends after the bonus for the step has been computed.
void append(EpisodicMemory& memory, const metricnet::QuasimetricModel& model,
            const Vec& embedding);

/// Precomputed query pieces so rollout code embeds each state once.
struct QueryHeads {
  Vec embedding, sym, asym;
};
QueryHeads query_heads(const metricnet::QuasimetricModel& model, const Vec& obs);
std::vector<double> distances_from_memory(const EpisodicMemory& memory, const QueryHeads& query,
                                          bool symmetric_only);
void append_heads(EpisodicMemory& memory, const QueryHeads& query);

/// knn10/quantile10 fall back to min below 10 entries.
double aggregate(const std::vector<double>& distances, Aggregator aggregator);

/// min_k d(memory[k], current); 0 on empty memory (the t = 0 case).
double compute_bonus(const EpisodicMemory& memory, const metricnet::QuasimetricModel& model,
                     const Vec& current_obs, Aggregator aggregator);

/// Streaming moments over every raw bonus seen; shared across workers.
struct RewardNormalizer {
  long count = 0;
  double mean = 0;
  double m2 = 0;

  double stddev() const;
};

/// Updates the moments with the raw value first, then returns
/// (raw - mean) / (std + 1e-8).
double normalize(RewardNormalizer& normalizer, double raw_bonus);

}  // namespace etd::bonus
