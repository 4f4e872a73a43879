// Command-line harness: run experiments, evaluate checkpoints, reproduce the
// spiral distance diagnostic, and audit the exact-oracle tables.
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "etd/config.hpp"
#include "etd/diagnostics.hpp"
#include "etd/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Episodic novelty through temporal distance: experiment harness"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Run a training experiment from a JSON config");
  std::string config_path;
  std::vector<std::string> overrides;
  run_cmd->add_option("config", config_path, "Path to the run configuration JSON")->required();
  run_cmd->add_option("--set", overrides,
                      "Override a config value, e.g. --set ppo.learning_rate=1e-4");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  std::string checkpoint, eval_family = "multiroom";
  int eval_episodes = 32;
  std::uint64_t eval_seed = 12345;
  int eval_size = 20, eval_rooms = 4, eval_chain = 8, eval_tmax = 20;
  bool eval_noise = false;
  eval_cmd->add_option("checkpoint", checkpoint, "Path to policy.json")->required();
  eval_cmd->add_option("env", eval_family, "Env family: spiral | chain | multiroom")->required();
  eval_cmd->add_option("--episodes", eval_episodes, "Number of evaluation episodes");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation context seed");
  eval_cmd->add_option("--size", eval_size, "Multiroom grid side");
  eval_cmd->add_option("--rooms", eval_rooms, "Multiroom room count (2 or 4)");
  eval_cmd->add_option("--chain-length", eval_chain, "Chain length");
  eval_cmd->add_option("--time-limit-factor", eval_tmax, "Episode limit factor");
  eval_cmd->add_flag("--noise", eval_noise, "Enable Gaussian observation noise (variance 0.1)");

  // spiral
  auto* spiral_cmd = app.add_subcommand("spiral", "Spiral-maze distance diagnostic");
  std::string spiral_out = "spiral_out";
  std::uint64_t spiral_seed = 7;
  int spiral_train_steps = 0, spiral_batch = 0, spiral_baseline_steps = 0;
  double spiral_gamma = 0.0;
  spiral_cmd->add_option("--out", spiral_out, "Output directory");
  spiral_cmd->add_option("--seed", spiral_seed, "Diagnostic seed");
  spiral_cmd->add_option("--train-steps", spiral_train_steps, "Temporal-distance train steps");
  spiral_cmd->add_option("--baseline-steps", spiral_baseline_steps, "Baseline train steps");
  spiral_cmd->add_option("--batch", spiral_batch, "Contrastive batch size");
  spiral_cmd->add_option("--gamma", spiral_gamma, "Offset-sampling discount");

  // audit-oracle
  auto* audit_cmd = app.add_subcommand("audit-oracle", "Audit exact successor distances");
  int n_mdps = 100;
  std::uint64_t audit_seed = 11;
  audit_cmd->add_option("--n-mdps", n_mdps, "Number of random MDPs");
  audit_cmd->add_option("--seed", audit_seed, "Audit seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      std::ifstream in(config_path);
      if (!in) {
        std::cerr << "error: cannot open config " << config_path << "\n";
        return 1;
      }
      nlohmann::json j = nlohmann::json::parse(in);
      for (const auto& assignment : overrides) etd::harness::apply_override(j, assignment);
      const etd::harness::RunConfig config = etd::harness::config_from_json(j);
      const auto results = etd::harness::run_experiment(config);
      for (const auto& r : results)
        std::printf("seed %llu: steps=%ld eval_success=%.3f best=%.3f dir=%s\n",
                    static_cast<unsigned long long>(r.seed), r.steps_run, r.final_eval_success,
                    r.best_eval_success, r.dir.c_str());
      return 0;
    }
    if (*eval_cmd) {
      etd::envkit::EnvConfig env;
      env.family = etd::envkit::family_from_name(eval_family);
      env.size = eval_size;
      env.rooms = eval_rooms;
      env.chain_length = eval_chain;
      env.time_limit_factor = eval_tmax;
      env.noise.enabled = eval_noise;
      const auto report =
          etd::harness::evaluate_checkpoint(checkpoint, env, eval_episodes, eval_seed);
      std::printf("episodes=%d success_rate=%.4f mean_return=%.4f mean_length=%.1f\n",
                  report.episodes, report.success_rate, report.mean_return, report.mean_length);
      return 0;
    }
    if (*spiral_cmd) {
      etd::harness::SpiralConfig config;
      config.out_dir = spiral_out;
      config.seed = spiral_seed;
      if (spiral_train_steps > 0) config.etd_train_steps = spiral_train_steps;
      if (spiral_baseline_steps > 0) config.baseline_train_steps = spiral_baseline_steps;
      if (spiral_batch > 0) config.batch_size = spiral_batch;
      if (spiral_gamma > 0) config.gamma = spiral_gamma;
      const auto report = etd::harness::spiral_diagnostic(config);
      std::printf("spearman vs path distance: etd=%.4f ec=%.4f invdyn=%.4f oracle=%.4f\n",
                  report.etd_spearman, report.ec_spearman, report.invdyn_spearman,
                  report.oracle_spearman);
      std::printf("heatmaps: %s %s %s %s\n", report.etd_heatmap.c_str(),
                  report.ec_heatmap.c_str(), report.invdyn_heatmap.c_str(),
                  report.oracle_heatmap.c_str());
      return 0;
    }
    if (*audit_cmd) {
      const auto summary = etd::harness::audit_random_mdps(n_mdps, audit_seed);
      std::printf("mdps=%d positivity=%ld identity=%ld triangle=%ld\n", summary.mdps,
                  summary.positivity, summary.identity, summary.triangle);
      std::printf("max |d_sd - mgf| = %.3e, max chain gap = %.3e, min offdiag margin = %.3e\n",
                  summary.max_equivalence_gap, summary.max_chain_gap,
                  summary.min_offdiag_margin);
      if (!summary.clean() || summary.max_equivalence_gap > 1e-9 ||
          summary.max_chain_gap > 1e-9) {
        std::cerr << "oracle audit FAILED\n";
        return 1;
      }
      std::puts("oracle audit passed");
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
