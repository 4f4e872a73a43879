#include "doctest.h"

#include <cmath>

#include "etd/diagnostics.hpp"
#include "etd/oracle.hpp"
#include "support/oracles.hpp"

using namespace etd;
using namespace etd::oracle;

TEST_SUITE_BEGIN("oracle");

TEST_CASE("two-state uniform chain occupancy by hand inversion") {
  Mat p(2, 2);
  p << 0.5, 0.5, 0.5, 0.5;
  const OccupancyTable table = discounted_occupancy(p, 0.5);
  CHECK(table.values(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(table.values(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(table.values(1, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(table.values(1, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("absorbing identity transition gives identity occupancy") {
  const Mat p = Mat::Identity(4, 4);
  for (double gamma : {0.3, 0.9, 0.99}) {
    const OccupancyTable table = discounted_occupancy(p, gamma);
    CHECK((table.values - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("occupancy matches a truncated power-series oracle") {
  Rng rng(21);
  const Mat p = harness::random_ergodic_transition(6, rng);
  const double gamma = 0.9;
  const OccupancyTable table = discounted_occupancy(p, gamma);
  for (Eigen::Index r = 0; r < 6; ++r)
    CHECK(table.values.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
  // (1-gamma) sum_k gamma^k P^k truncated at K = 500
  Mat series = Mat::Zero(6, 6);
  Mat power = Mat::Identity(6, 6);
  double scale = 1.0;
  for (int k = 0; k <= 500; ++k) {
    series += scale * power;
    power = power * p;
    scale *= gamma;
  }
  series *= (1.0 - gamma);
  CHECK((series - table.values).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("occupancy validates inputs") {
  Mat bad(2, 2);
  bad << 0.7, 0.7, 0.5, 0.5;
  CHECK_THROWS_AS(discounted_occupancy(bad, 0.9), std::invalid_argument);
  Mat good(2, 2);
  good << 0.5, 0.5, 0.5, 0.5;
  CHECK_THROWS_AS(discounted_occupancy(good, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(discounted_occupancy(good, 0.0), std::invalid_argument);
}

TEST_CASE("successor distance of the uniform chain is ln 3") {
  Mat p(2, 2);
  p << 0.5, 0.5, 0.5, 0.5;
  const auto table = successor_distance_exact(discounted_occupancy(p, 0.5));
  CHECK(table.values(0, 1) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(table.values(0, 0) == 0.0);
  CHECK(table.values(1, 1) == 0.0);
}

TEST_CASE("deterministic right-shift chain has linear distances and infinite reverse") {
  const int n = 6;
  const double gamma = 0.99;
  Mat p = Mat::Zero(n, n);
  for (int x = 0; x < n - 1; ++x) p(x, x + 1) = 1.0;
  p(n - 1, n - 1) = 1.0;
  const auto table = successor_distance_exact(discounted_occupancy(p, gamma));
  for (int x = 0; x < n; ++x)
    for (int y = x; y < n; ++y)
      CHECK(table.values(x, y) ==
            doctest::Approx((y - x) * std::log(1.0 / gamma)).epsilon(1e-9));
  CHECK(std::isinf(table.values(3, 1)));
}

TEST_CASE("hitting-time route agrees with the occupancy route") {
  Mat p(2, 2);
  p << 0.5, 0.5, 0.5, 0.5;
  CHECK(hitting_time_mgf(p, 0.5, 0, 1) == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(hitting_time_mgf(p, 0.5, 0, 0) == 0.0);

  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = uniform_int(rng, 3, 20);
    const Mat q = harness::random_ergodic_transition(n, rng);
    const double gamma = trial % 3 == 0 ? 0.5 : (trial % 3 == 1 ? 0.9 : 0.99);
    const auto table = successor_distance_exact(discounted_occupancy(q, gamma));
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        CHECK(std::abs(table.values(x, y) - hitting_time_mgf(q, gamma, x, y)) <= 1e-9);
  }
}

TEST_CASE("deterministic five-step chain matches the closed form") {
  const int n = 6;
  const double gamma = 0.99;
  Mat p = Mat::Zero(n, n);
  for (int x = 0; x < n - 1; ++x) p(x, x + 1) = 1.0;
  p(n - 1, n - 1) = 1.0;
  CHECK(hitting_time_mgf(p, gamma, 0, 5) ==
        doctest::Approx(5.0 * std::log(1.0 / 0.99)).epsilon(1e-12));
}

TEST_CASE("finite off-diagonal distances respect the ln(1/gamma) lower bound") {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(rng, 3, 12);
    const double gamma = trial % 2 ? 0.9 : 0.5;
    const auto table =
        successor_distance_exact(discounted_occupancy(harness::random_ergodic_transition(n, rng), gamma));
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) {
        if (x == y || std::isinf(table.values(x, y))) continue;
        CHECK(table.values(x, y) >= std::log(1.0 / gamma) - 1e-9);
      }
  }
}

TEST_CASE("directed cycle is asymmetric") {
  Mat p = Mat::Zero(3, 3);
  p(0, 1) = 1.0;
  p(1, 2) = 1.0;
  p(2, 0) = 1.0;
  const auto table = successor_distance_exact(discounted_occupancy(p, 0.9));
  CHECK(table.values(0, 1) == doctest::Approx(std::log(1.0 / 0.9)).epsilon(1e-9));
  CHECK(table.values(1, 0) == doctest::Approx(2.0 * std::log(1.0 / 0.9)).epsilon(1e-9));
  CHECK(table.values(0, 1) != doctest::Approx(table.values(1, 0)));
  // still a quasimetric
  CHECK(quasimetric_audit(table.values, 1e-9).clean());
}

TEST_CASE("exact oracle tables audit clean on random ergodic MDPs") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = uniform_int(rng, 4, 20);
    for (double gamma : {0.5, 0.9, 0.99}) {
      const auto table = successor_distance_exact(
          discounted_occupancy(harness::random_ergodic_transition(n, rng), gamma));
      const AuditReport report = quasimetric_audit(table.values, 1e-9);
      CHECK(report.clean());
      CHECK(report.triples_checked == static_cast<long>(n) * n * n);
    }
  }
}

TEST_CASE("audit flags a dirty diagonal") {
  Mat d = Mat::Zero(3, 3);
  d(0, 0) = 0.1;
  const AuditReport report = quasimetric_audit(d, 1e-9);
  CHECK(report.identity >= 1);
}

TEST_CASE("audit accepts symmetric Euclidean distances of random points") {
  Rng rng(88);
  const int n = 40;
  std::vector<Vec> points;
  for (int i = 0; i < n; ++i) points.push_back(testing::random_vec(rng, 3));
  Mat d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = (points[i] - points[j]).norm();
  CHECK(quasimetric_audit(d, 1e-9).clean());
}

TEST_CASE("audit samples triples above the exhaustive cutoff") {
  const int n = 250;
  Mat d = Mat::Zero(n, n);
  const AuditReport report = quasimetric_audit(d, 1e-9, 5);
  CHECK(report.clean());
  CHECK(report.triples_checked == 100000);
}

TEST_SUITE_END();
