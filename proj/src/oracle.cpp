#include "etd/oracle.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "etd/rng.hpp"

namespace etd::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_stochastic(const Mat& transition, double gamma) {
  if (transition.rows() != transition.cols() || transition.rows() == 0)
    throw std::invalid_argument("transition matrix must be square and nonempty");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
  for (Eigen::Index r = 0; r < transition.rows(); ++r) {
    if (transition.row(r).minCoeff() < -1e-12)
      throw std::invalid_argument("transition matrix has negative entries");
    if (std::abs(transition.row(r).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("transition row " + std::to_string(r) + " does not sum to 1");
  }
}

}  // namespace

OccupancyTable discounted_occupancy(const Mat& transition, double gamma) {
  check_stochastic(transition, gamma);
  const Eigen::Index n = transition.rows();
  Mat system = Mat::Identity(n, n) - gamma * transition;
  Eigen::PartialPivLU<Mat> lu(system);
  Mat occupancy = lu.solve(Mat::Identity(n, n) * (1.0 - gamma));
  if (!occupancy.allFinite())
    throw std::runtime_error("discounted_occupancy: singular solve");
  return OccupancyTable{gamma, std::move(occupancy)};
}

SuccessorDistanceTable successor_distance_exact(const OccupancyTable& occupancy) {
  const Mat& o = occupancy.values;
  const Eigen::Index n = o.rows();
  Mat d(n, n);
  for (Eigen::Index y = 0; y < n; ++y) {
    const double self = o(y, y);
    for (Eigen::Index x = 0; x < n; ++x) {
      // Occupancies are nonnegative in exact arithmetic; values at or below
      // zero can only be unreachable pairs plus round-off.
      d(x, y) = o(x, y) <= 0.0 ? kInf : std::log(self / o(x, y));
    }
    d(y, y) = 0.0;
  }
  return SuccessorDistanceTable{occupancy.gamma, std::move(d)};
}

double hitting_time_mgf(const Mat& transition, double gamma, int from, int to) {
  check_stochastic(transition, gamma);
  const Eigen::Index n = transition.rows();
  if (from < 0 || from >= n || to < 0 || to >= n)
    throw std::invalid_argument("hitting_time_mgf: state out of range");
  if (from == to) return 0.0;
  // v[x] = E_x[gamma^H] over x != to:  (I - gamma P_{-to,-to}) v = gamma P[., to]
  const Eigen::Index m = n - 1;
  Mat system(m, m);
  Vec rhs(m);
  auto idx = [&](Eigen::Index s) { return s < to ? s : s - 1; };
  for (Eigen::Index x = 0; x < n; ++x) {
    if (x == to) continue;
    rhs[idx(x)] = gamma * transition(x, to);
    for (Eigen::Index z = 0; z < n; ++z) {
      if (z == to) continue;
      system(idx(x), idx(z)) = (x == z ? 1.0 : 0.0) - gamma * transition(x, z);
    }
  }
  Vec v = Eigen::PartialPivLU<Mat>(system).solve(rhs);
  const double value = v[idx(from)];
  if (!(value > 0.0)) return kInf;
  return -std::log(value);
}

AuditReport quasimetric_audit(const Mat& distances, double tolerance, std::uint64_t rng_seed) {
  if (distances.rows() != distances.cols() || distances.rows() == 0)
    throw std::invalid_argument("quasimetric_audit: matrix must be square and nonempty");
  const Eigen::Index n = distances.rows();
  AuditReport report;
  for (Eigen::Index x = 0; x < n; ++x) {
    if (!(std::abs(distances(x, x)) <= tolerance)) ++report.identity;
    for (Eigen::Index y = 0; y < n; ++y)
      if (distances(x, y) < -tolerance) ++report.positivity;
  }
  auto check_triple = [&](Eigen::Index x, Eigen::Index y, Eigen::Index z) {
    const double xy = distances(x, y), yz = distances(y, z), xz = distances(x, z);
    if (std::isinf(xy) || std::isinf(yz) || std::isinf(xz)) return;
    ++report.triples_checked;
    if (xz > xy + yz + tolerance) ++report.triangle;
  };
  if (n <= 200) {
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = 0; y < n; ++y)
        for (Eigen::Index z = 0; z < n; ++z) check_triple(x, y, z);
  } else {
    Rng rng(rng_seed);
    for (int k = 0; k < 100000; ++k) {
      const auto x = static_cast<Eigen::Index>(rng() % n);
      const auto y = static_cast<Eigen::Index>(rng() % n);
      const auto z = static_cast<Eigen::Index>(rng() % n);
      check_triple(x, y, z);
    }
  }
  return report;
}

void write_csv(const Mat& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out.precision(17);
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
      if (c) out << ',';
      out << table(r, c);
    }
    out << '\n';
  }
}

}  // namespace etd::oracle
