#pragma once

#include <cstdint>
#include <string>

#include "etd/linalg.hpp"

namespace etd::oracle {

/// O(x, y) = discounted probability that the geometrically-stopped chain
/// started at x is observed at y.
struct OccupancyTable {
  double gamma = 0;
  Mat values;
};

/// D(x, y) = log(O(y,y) / O(x,y)); +infinity where y is unreachable from x.
struct SuccessorDistanceTable {
  double gamma = 0;
  Mat values;
};

/// O = (1 - gamma) * (I - gamma P)^-1 via dense partial-pivot LU solve.
/// Requires P row-stochastic (rows sum to 1 within 1e-9) and gamma in (0,1).
OccupancyTable discounted_occupancy(const Mat& transition, double gamma);

SuccessorDistanceTable successor_distance_exact(const OccupancyTable& occupancy);

/// -log E[gamma^H(from,to)], computed by making `to` absorbing and solving
/// the resulting linear system. Returns 0 for from == to, +infinity when
/// `to` is unreachable.
double hitting_time_mgf(const Mat& transition, double gamma, int from, int to);

struct AuditReport {
  long positivity = 0;
  long identity = 0;
  long triangle = 0;
  long triples_checked = 0;
  bool clean() const { return positivity == 0 && identity == 0 && triangle == 0; }
};

/// Checks positivity, zero diagonal, and the triangle inequality.
/// Exhaustive over all triples for n <= 200, otherwise 1e5 random triples.
/// Triples touching an infinite entry are skipped.
AuditReport quasimetric_audit(const Mat& distances, double tolerance,
                              std::uint64_t rng_seed = 0);

void write_csv(const Mat& table, const std::string& path);

}  // namespace etd::oracle
