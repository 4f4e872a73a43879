#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "etd/config.hpp"
#include "etd/diagnostics.hpp"
#include "etd/heatmap.hpp"
#include "etd/oracle.hpp"
#include "etd/runner.hpp"

using namespace etd;
using namespace etd::harness;

namespace {

namespace fs = std::filesystem;

RunConfig tiny_chain_config(const std::string& out_dir) {
  RunConfig config;
  config.env.family = envkit::EnvFamily::chain;
  config.env.chain_length = 5;
  config.env.time_limit_factor = 4;
  config.bonus_provider = "etd";
  config.ppo.workers = 4;
  config.ppo.rollout_steps = 32;
  config.ppo.minibatch = 64;
  config.ppo.epochs = 2;
  config.model.epochs = 1;
  config.model.minibatch = 32;
  config.model.embed_dim = 12;
  config.model.sym_dim = 6;
  config.model.asym_dim = 6;
  config.model.encoder_hidden = 16;
  config.model.head_hidden = 12;
  config.run.total_env_steps = 3 * 4 * 32;
  config.run.seeds = {1};
  config.run.out_dir = out_dir;
  config.run.eval_interval_iters = 2;
  config.run.eval_episodes = 4;
  return config;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("config json round-trips") {
  RunConfig config = tiny_chain_config("roundtrip");
  config.aggregator = bonus::Aggregator::knn10;
  config.model.energy = metricnet::EnergyKind::mrn;
  config.env.noise.enabled = true;
  const nlohmann::json j = config_to_json(config);
  const RunConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
}

TEST_CASE("unknown config keys are rejected") {
  nlohmann::json j = config_to_json(tiny_chain_config("x"));
  j["ppo"]["learning_rte"] = 1e-4;
  CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("unknown key"),
                       std::invalid_argument);
  nlohmann::json top = config_to_json(tiny_chain_config("x"));
  top["misc"] = 1;
  CHECK_THROWS_AS(config_from_json(top), std::invalid_argument);
}

TEST_CASE("config validation spots bad values") {
  RunConfig config = tiny_chain_config("x");
  config.bonus_provider = "rnd";
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = tiny_chain_config("x");
  config.ppo.clip = 1.5;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = tiny_chain_config("x");
  config.run.seeds.clear();
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("dotted overrides hit nested keys") {
  nlohmann::json j = config_to_json(tiny_chain_config("x"));
  apply_override(j, "ppo.learning_rate=0.001");
  apply_override(j, "bonus.provider=count");
  apply_override(j, "run.total_env_steps=0");
  const RunConfig config = config_from_json(j);
  CHECK(config.ppo.learning_rate == doctest::Approx(0.001));
  CHECK(config.bonus_provider == "count");
  CHECK(config.run.total_env_steps == 0);
  CHECK_THROWS_AS(apply_override(j, "no-equals-sign"), std::invalid_argument);
}

TEST_CASE("zero-step run writes an empty metrics file and a config echo") {
  const std::string dir = "test_out_zero";
  fs::remove_all(dir);
  RunConfig config = tiny_chain_config(dir);
  config.run.total_env_steps = 0;
  config.run.eval_episodes = 0;
  const auto results = run_experiment(config);
  REQUIRE(results.size() == 1);
  CHECK(results[0].steps_run == 0);
  const std::string metrics = read_file(dir + "/seed_1/metrics.csv");
  CHECK(metrics.find("env_steps") == 0);
  CHECK(metrics.find('\n') == metrics.size() - 1);  // header only
  const RunConfig echoed = load_config(dir + "/config.json");
  CHECK(config_to_json(echoed) == config_to_json(config));
  fs::remove_all(dir);
}

TEST_CASE("identical seeds give bit-identical metrics files") {
  const std::string dir_a = "test_out_det_a";
  const std::string dir_b = "test_out_det_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  RunConfig config = tiny_chain_config(dir_a);
  run_experiment(config);
  config.run.out_dir = dir_b;
  run_experiment(config);
  CHECK(read_file(dir_a + "/seed_1/metrics.csv") == read_file(dir_b + "/seed_1/metrics.csv"));
  CHECK(read_file(dir_a + "/seed_1/eval.csv") == read_file(dir_b + "/seed_1/eval.csv"));
  CHECK(read_file(dir_a + "/seed_1/policy.json") == read_file(dir_b + "/seed_1/policy.json"));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("every bonus provider runs the tiny loop") {
  for (const std::string provider : {"etd", "count", "ec", "invdyn", "none"}) {
    const std::string dir = "test_out_" + provider;
    fs::remove_all(dir);
    RunConfig config = tiny_chain_config(dir);
    config.bonus_provider = provider;
    config.run.total_env_steps = 4 * 32;
    config.run.eval_episodes = 2;
    const auto results = run_experiment(config);
    CHECK(results[0].steps_run == 4 * 32);
    CHECK(fs::exists(dir + "/seed_1/metrics.csv"));
    fs::remove_all(dir);
  }
}

TEST_CASE("untrained policy fails the multiroom eval") {
  Rng rng(1);
  envkit::EnvConfig env;
  env.family = envkit::EnvFamily::multiroom;
  const envkit::GridLayout probe =
      envkit::generate_layout(envkit::sample_context(1, 0, env.family), env);
  const agent::PolicyValueNet policy =
      agent::make_policy(envkit::observation_dim(probe), 6, rng);
  const EvalReport report = evaluate(policy, env, 8, 91);
  CHECK(report.success_rate <= 0.1);
  CHECK(report.episodes == 8);
}

TEST_CASE("zero-episode eval returns an empty report") {
  Rng rng(2);
  envkit::EnvConfig env;
  env.family = envkit::EnvFamily::chain;
  const envkit::GridLayout probe =
      envkit::generate_layout(envkit::sample_context(1, 0, env.family), env);
  const agent::PolicyValueNet policy =
      agent::make_policy(envkit::observation_dim(probe), 4, rng);
  const EvalReport report = evaluate(policy, env, 0, 91);
  CHECK(report.episodes == 0);
  CHECK(report.success_rate == 0.0);
}

TEST_CASE("checkpoint and env family mismatches are load errors") {
  const std::string dir = "test_out_ckpt";
  fs::remove_all(dir);
  RunConfig config = tiny_chain_config(dir);
  config.run.total_env_steps = 4 * 32;
  config.run.eval_episodes = 0;
  run_experiment(config);
  envkit::EnvConfig wrong;
  wrong.family = envkit::EnvFamily::multiroom;
  CHECK_THROWS_AS(evaluate_checkpoint(dir + "/seed_1/policy.json", wrong, 2, 5),
                  std::runtime_error);
  envkit::EnvConfig right = config.env;
  const EvalReport report = evaluate_checkpoint(dir + "/seed_1/policy.json", right, 2, 5);
  CHECK(report.episodes == 2);
  CHECK_THROWS_AS(evaluate_checkpoint(dir + "/missing.json", right, 2, 5), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("output root env var prefixes relative out dirs") {
  setenv("ETD_OUTPUT_ROOT", "/tmp/etd_test_root", 1);
  CHECK(resolve_out_dir("abc") == "/tmp/etd_test_root/abc");
  CHECK(resolve_out_dir("/abs/path") == "/abs/path");
  unsetenv("ETD_OUTPUT_ROOT");
  CHECK(resolve_out_dir("abc") == "abc");
}

TEST_CASE("heatmap renders the probe white and walls black, strictly darker along the spiral") {
  envkit::EnvConfig env;
  env.family = envkit::EnvFamily::spiral;
  const envkit::GridLayout layout =
      envkit::generate_layout(envkit::sample_context(1, 0, env.family), env);
  const envkit::TabularMDP mdp = envkit::tabularize(layout, {0.25, 0.25, 0.25, 0.25});
  const auto table =
      oracle::successor_distance_exact(oracle::discounted_occupancy(mdp.transition, 0.99));
  const int probe = layout.cell_index(layout.start_x, layout.start_y);
  const auto field = field_from_table(table, mdp, layout, probe);
  const std::string path = "test_heatmap_spiral.pnm";
  emit_heatmap(field, layout, path);
  const HeatmapImage img = read_heatmap(path);
  fs::remove(path);

  CHECK(img.cell_darkness(layout, layout.start_x, layout.start_y) == doctest::Approx(0.0));
  CHECK(img.cell_value(layout, 0, 0) == 0);  // wall: black
  const std::vector<int> cells = envkit::spiral_path_cells(layout);
  double previous = -1.0;
  for (int cell : cells) {
    const double darkness = img.cell_darkness(layout, cell % layout.width, cell / layout.width);
    CHECK(darkness > previous);
    previous = darkness;
  }
}

TEST_CASE("constant distance fields render uniformly") {
  envkit::EnvConfig env;
  env.family = envkit::EnvFamily::chain;
  env.chain_length = 5;
  const envkit::GridLayout layout =
      envkit::generate_layout(envkit::sample_context(1, 0, env.family), env);
  std::vector<double> field(5, 3.25);
  const std::string path = "test_heatmap_const.pnm";
  emit_heatmap(field, layout, path);
  const HeatmapImage img = read_heatmap(path);
  fs::remove(path);
  for (int x = 0; x < 5; ++x) CHECK(img.cell_value(layout, x, 0) == 65535);
}

TEST_CASE("uniform trajectories cover the spiral and respect lengths") {
  envkit::EnvConfig env;
  env.family = envkit::EnvFamily::spiral;
  const envkit::GridLayout layout =
      envkit::generate_layout(envkit::sample_context(1, 0, env.family), env);
  Rng rng(3);
  const TrajectoryBuffer buffer = collect_uniform_trajectories(layout, 20, 50, rng, true);
  CHECK(buffer.episodes.size() == 20);
  for (const auto& ep : buffer.episodes) {
    CHECK(ep.num_observations() == 51);
    CHECK(ep.actions.size() == 50);
  }
}

TEST_SUITE_END();
