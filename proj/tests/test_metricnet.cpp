#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "etd/metricnet.hpp"
#include "support/oracles.hpp"

using namespace etd;
using namespace etd::metricnet;

namespace {

QuasimetricModel small_model(std::uint64_t seed, EnergyKind kind = EnergyKind::mrn_pot,
                             bool symmetric_only = false) {
  QuasimetricConfig config;
  config.obs_dim = 6;
  config.embed_dim = 16;
  config.sym_dim = 8;
  config.asym_dim = 8;
  config.encoder_hidden = 16;
  config.head_hidden = 16;
  config.energy = kind;
  config.symmetric_only = symmetric_only;
  Rng rng(seed);
  return make_quasimetric_model(config, rng);
}

}  // namespace

TEST_SUITE_BEGIN("metricnet");

TEST_CASE("distance is exactly zero at x = y and nonnegative everywhere") {
  Rng rng(1);
  const QuasimetricModel model = small_model(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec x = testing::random_vec(rng, 6);
    const Vec y = testing::random_vec(rng, 6);
    CHECK(quasimetric_distance(model, x, x) == 0.0);
    CHECK(quasimetric_distance(model, x, y) >= 0.0);
  }
}

TEST_CASE("triangle inequality holds architecturally for random parameters") {
  Rng rng(2);
  for (int m = 0; m < 5; ++m) {
    const QuasimetricModel model = small_model(100 + m);
    for (int trial = 0; trial < 200; ++trial) {
      const Vec x = testing::random_vec(rng, 6);
      const Vec y = testing::random_vec(rng, 6);
      const Vec z = testing::random_vec(rng, 6);
      CHECK(quasimetric_distance(model, x, z) <=
            quasimetric_distance(model, x, y) + quasimetric_distance(model, y, z) + 1e-9);
    }
  }
}

TEST_CASE("symmetric_only mode is exactly symmetric") {
  Rng rng(3);
  const QuasimetricModel model = small_model(4, EnergyKind::mrn, /*symmetric_only=*/true);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec x = testing::random_vec(rng, 6);
    const Vec y = testing::random_vec(rng, 6);
    CHECK(quasimetric_distance(model, x, y) == quasimetric_distance(model, y, x));
  }
}

TEST_CASE("asymmetric distance differs between directions for random inputs") {
  Rng rng(4);
  const QuasimetricModel model = small_model(5);
  int asymmetric = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Vec x = testing::random_vec(rng, 6);
    const Vec y = testing::random_vec(rng, 6);
    if (quasimetric_distance(model, x, y) != quasimetric_distance(model, y, x)) ++asymmetric;
  }
  CHECK(asymmetric > 0);
}

TEST_CASE("distance requires an mrn energy kind") {
  const QuasimetricModel model = small_model(6, EnergyKind::l2);
  Vec x = Vec::Zero(6), y = Vec::Ones(6);
  CHECK_THROWS_AS(quasimetric_distance(model, x, y), std::invalid_argument);
  CHECK_THROWS_AS(pairwise_distances(model, Mat::Zero(1, 16), y), std::invalid_argument);
}

TEST_CASE("potential is deterministic, zero for zeroed head, and gradient-checked") {
  Rng rng(7);
  QuasimetricModel model = small_model(8);
  const Vec y = testing::random_vec(rng, 6);
  CHECK(potential(model, y) == potential(model, y));

  QuasimetricModel zeroed = model;
  for (auto& w : zeroed.potential_head.weights) w.setZero();
  for (auto& b : zeroed.potential_head.biases) b.setZero();
  CHECK(potential(zeroed, y) == 0.0);

  PotentialTape tape;
  const double value = potential_forward(model, y, tape);
  CHECK(value == doctest::Approx(potential(model, y)).epsilon(1e-12));
  QuasimetricGrads grads = make_grads(model);
  potential_backward(model, tape, 1.0, grads);

  // finite differences through potential-head and encoder parameters
  auto get = [&]() {
    Vec head = diffcore::flatten_params(model.potential_head);
    Vec enc = diffcore::flatten_params(model.encoder);
    Vec all(head.size() + enc.size());
    all << head, enc;
    return all;
  };
  auto set = [&](const Vec& p) {
    const Eigen::Index nh = static_cast<Eigen::Index>(diffcore::param_count(model.potential_head));
    diffcore::unflatten_params(model.potential_head, p.head(nh));
    diffcore::unflatten_params(model.encoder, p.tail(p.size() - nh));
  };
  const Vec numeric = testing::finite_difference(
      get, set, [&]() { return potential(model, y); }, 1e-5);
  Vec analytic(numeric.size());
  analytic << diffcore::flatten_grads(grads.potential_head), diffcore::flatten_grads(grads.encoder);
  CHECK(testing::max_relative_error(analytic, numeric) <= 1e-4);
}

TEST_CASE("energy identities per kind") {
  Rng rng(9);
  const Vec x = testing::random_vec(rng, 6);
  const Vec y = testing::random_vec(rng, 6);

  const QuasimetricModel l2 = small_model(10, EnergyKind::l2);
  CHECK(energy(l2, x, x) == 0.0);
  const QuasimetricModel cos = small_model(11, EnergyKind::cosine);
  CHECK(energy(cos, x, x) == doctest::Approx(1.0).epsilon(1e-6));
  const QuasimetricModel mrn = small_model(12, EnergyKind::mrn);
  CHECK(energy(mrn, x, y) == doctest::Approx(-quasimetric_distance(mrn, x, y)).epsilon(1e-12));
  const QuasimetricModel pot = small_model(13, EnergyKind::mrn_pot);
  CHECK(energy(pot, x, x) == doctest::Approx(potential(pot, x)).epsilon(1e-12));
  // f(y,y) - f(x,y) = d(x,y)
  CHECK(energy(pot, y, y) - energy(pot, x, y) ==
        doctest::Approx(quasimetric_distance(pot, x, y)).epsilon(1e-12));
}

TEST_CASE("mrn_pot energy decomposition depends on x only through the distance") {
  Rng rng(14);
  const QuasimetricModel model = small_model(15);
  const Vec y = testing::random_vec(rng, 6);
  // f(x,y) + d(x,y) = c(y) for every x
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x = testing::random_vec(rng, 6);
    const double value = energy(model, x, y) + quasimetric_distance(model, x, y);
    CHECK(value == doctest::Approx(potential(model, y)).epsilon(1e-12));
  }
}

TEST_CASE("batched pairwise distances equal the per-pair loop") {
  Rng rng(16);
  const QuasimetricModel model = small_model(17);
  const int m = 12;
  Mat memory(m, model.config.embed_dim);
  std::vector<Vec> obs;
  for (int k = 0; k < m; ++k) {
    obs.push_back(testing::random_vec(rng, 6));
    memory.row(k) = embed(model, obs.back()).transpose();
  }
  const Vec query = testing::random_vec(rng, 6);
  const Vec batched = pairwise_distances(model, memory, query);
  REQUIRE(batched.size() == m);
  for (int k = 0; k < m; ++k) {
    CHECK(batched[k] >= 0.0);
    CHECK(std::abs(batched[k] - quasimetric_distance(model, obs[k], query)) <= 1e-12);
  }
}

TEST_CASE("pairwise distance of the query against itself is zero") {
  Rng rng(18);
  const QuasimetricModel model = small_model(19);
  const Vec s = testing::random_vec(rng, 6);
  Mat memory(1, model.config.embed_dim);
  memory.row(0) = embed(model, s).transpose();
  const Vec d = pairwise_distances(model, memory, s);
  CHECK(d[0] == 0.0);
}

TEST_CASE("single-pair distance tape gradients match finite differences") {
  Rng rng(20);
  for (int trial = 0; trial < 5; ++trial) {
    QuasimetricModel model = small_model(21 + trial, EnergyKind::mrn, trial % 2 == 1);
    const Vec x = testing::random_vec(rng, 6);
    const Vec y = testing::random_vec(rng, 6);
    DistanceTape tape;
    const double d = distance_forward(model, x, y, tape);
    CHECK(d == doctest::Approx(quasimetric_distance(model, x, y)).epsilon(1e-12));
    QuasimetricGrads grads = make_grads(model);
    distance_backward(model, tape, 1.0, grads);

    auto get = [&]() {
      Vec enc = diffcore::flatten_params(model.encoder);
      Vec sym = diffcore::flatten_params(model.sym_head);
      Vec asym = diffcore::flatten_params(model.asym_head);
      Vec all(enc.size() + sym.size() + asym.size());
      all << enc, sym, asym;
      return all;
    };
    auto set = [&](const Vec& p) {
      Eigen::Index o = 0;
      const Eigen::Index ne = static_cast<Eigen::Index>(diffcore::param_count(model.encoder));
      const Eigen::Index ns = static_cast<Eigen::Index>(diffcore::param_count(model.sym_head));
      const Eigen::Index na = static_cast<Eigen::Index>(diffcore::param_count(model.asym_head));
      diffcore::unflatten_params(model.encoder, p.segment(o, ne));
      o += ne;
      diffcore::unflatten_params(model.sym_head, p.segment(o, ns));
      o += ns;
      diffcore::unflatten_params(model.asym_head, p.segment(o, na));
    };
    const Vec numeric = testing::finite_difference(
        get, set, [&]() { return quasimetric_distance(model, x, y); }, 1e-5);
    Vec analytic(numeric.size());
    analytic << diffcore::flatten_grads(grads.encoder), diffcore::flatten_grads(grads.sym_head),
        diffcore::flatten_grads(grads.asym_head);
    CHECK(testing::max_relative_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("checkpoint round-trips model parameters and config") {
  Rng rng(30);
  const QuasimetricModel model = small_model(31);
  const std::string path = "metric_roundtrip_test.json";
  save_checkpoint(model, path);
  const QuasimetricModel loaded = load_checkpoint(path);
  std::remove(path.c_str());
  CHECK(loaded.config.energy == model.config.energy);
  CHECK(loaded.config.embed_dim == model.config.embed_dim);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec x = testing::random_vec(rng, 6);
    const Vec y = testing::random_vec(rng, 6);
    CHECK(quasimetric_distance(loaded, x, y) == quasimetric_distance(model, x, y));
    CHECK(potential(loaded, y) == potential(model, y));
  }
}

TEST_SUITE_END();
