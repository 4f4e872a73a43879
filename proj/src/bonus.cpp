#include "etd/bonus.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "etd/stats.hpp"

namespace etd::bonus {

std::string aggregator_name(Aggregator aggregator) {
  switch (aggregator) {
    case Aggregator::min: return "min";
    case Aggregator::quantile10: return "quantile10";
    case Aggregator::knn10: return "knn10";
    case Aggregator::knn10avg: return "knn10avg";
  }
  return "unknown";
}

Aggregator aggregator_from_name(const std::string& name) {
  if (name == "min") return Aggregator::min;
  if (name == "quantile10") return Aggregator::quantile10;
  if (name == "knn10") return Aggregator::knn10;
  if (name == "knn10avg") return Aggregator::knn10avg;
  throw std::invalid_argument("unknown aggregator: " + name);
}

void EpisodicMemory::clear() {
  embeddings.clear();
  sym.clear();
  asym.clear();
}

void append(EpisodicMemory& memory, const metricnet::QuasimetricModel& model,
            const Vec& embedding) {
  memory.embeddings.push_back(embedding);
  memory.sym.push_back(diffcore::evaluate(model.sym_head, embedding));
  memory.asym.push_back(diffcore::evaluate(model.asym_head, embedding));
}

QueryHeads query_heads(const metricnet::QuasimetricModel& model, const Vec& obs) {
  QueryHeads q;
  q.embedding = metricnet::embed(model, obs);
  q.sym = diffcore::evaluate(model.sym_head, q.embedding);
  q.asym = diffcore::evaluate(model.asym_head, q.embedding);
  return q;
}

std::vector<double> distances_from_memory(const EpisodicMemory& memory, const QueryHeads& query,
                                          bool symmetric_only) {
  std::vector<double> distances(memory.embeddings.size());
  for (std::size_t k = 0; k < memory.embeddings.size(); ++k) {
    double d = (memory.sym[k] - query.sym).norm();
    if (!symmetric_only) {
      const double m = (memory.asym[k] - query.asym).maxCoeff();
      if (m > 0) d += m;
    }
    distances[k] = d;
  }
  return distances;
}

void append_heads(EpisodicMemory& memory, const QueryHeads& query) {
  memory.embeddings.push_back(query.embedding);
  memory.sym.push_back(query.sym);
  memory.asym.push_back(query.asym);
}

double aggregate(const std::vector<double>& distances, Aggregator aggregator) {
  if (distances.empty()) throw std::invalid_argument("aggregate: empty distance vector");
  const double min_value = *std::min_element(distances.begin(), distances.end());
  if (aggregator == Aggregator::min) return min_value;
  if (distances.size() < 10) return min_value;  // documented degenerate rule
  switch (aggregator) {
    case Aggregator::quantile10: return stats::percentile_linear(distances, 0.10);
    case Aggregator::knn10: {
      std::vector<double> sorted = distances;
      std::nth_element(sorted.begin(), sorted.begin() + 9, sorted.end());
      return sorted[9];
    }
    case Aggregator::knn10avg: {
      std::vector<double> sorted = distances;
      std::partial_sort(sorted.begin(), sorted.begin() + 10, sorted.end());
      double sum = 0;
      for (int i = 0; i < 10; ++i) sum += sorted[i];
      return sum / 10.0;
    }
    default: return min_value;
  }
}

double compute_bonus(const EpisodicMemory& memory, const metricnet::QuasimetricModel& model,
                     const Vec& current_obs, Aggregator aggregator) {
  if (memory.empty()) return 0.0;
  const QueryHeads q = query_heads(model, current_obs);
  return aggregate(distances_from_memory(memory, q, model.config.symmetric_only), aggregator);
}

double RewardNormalizer::stddev() const {
  return count > 0 ? std::sqrt(m2 / static_cast<double>(count)) : 0.0;
}

double normalize(RewardNormalizer& normalizer, double raw_bonus) {
  ++normalizer.count;
  const double delta = raw_bonus - normalizer.mean;
  normalizer.mean += delta / static_cast<double>(normalizer.count);
  normalizer.m2 += delta * (raw_bonus - normalizer.mean);
  return (raw_bonus - normalizer.mean) / (normalizer.stddev() + 1e-8);
}

}  // namespace etd::bonus
