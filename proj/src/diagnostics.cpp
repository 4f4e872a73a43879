#include "etd/diagnostics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "etd/baselines.hpp"
#include "etd/config.hpp"
#include "etd/contrastive.hpp"
#include "etd/heatmap.hpp"
#include "etd/metricnet.hpp"
#include "etd/oracle.hpp"
#include "etd/stats.hpp"

namespace etd::harness {

TrajectoryBuffer collect_uniform_trajectories(const envkit::GridLayout& layout, int episodes,
                                              int steps, Rng& rng, bool random_start) {
  std::vector<int> free_cells;
  for (int y = 0; y < layout.height; ++y)
    for (int x = 0; x < layout.width; ++x)
      if (!layout.wall(x, y)) free_cells.push_back(layout.cell_index(x, y));

  const int n_actions = envkit::action_count(layout.family);
  TrajectoryBuffer buffer;
  for (int e = 0; e < episodes; ++e) {
    envkit::EnvState state = envkit::initial_state(layout);
    if (random_start) {
      const int cell = free_cells[uniform_int(rng, 0, static_cast<int>(free_cells.size()) - 1)];
      state.x = cell % layout.width;
      state.y = cell / layout.width;
    }
    Episode ep;
    ep.observations.resize(steps + 1, envkit::observation_dim(layout));
    ep.actions.resize(steps);
    ep.rewards.assign(steps, 0.0);
    ep.completed = true;
    ep.observations.row(0) = envkit::observe(layout, state).transpose();
    for (int t = 0; t < steps; ++t) {
      const int a = uniform_int(rng, 0, n_actions - 1);
      envkit::StepResult sr = envkit::step(layout, state, static_cast<envkit::Action>(a));
      state.done = false;  // fixed-length collection ignores termination
      state.t = 0;
      ep.actions[t] = a;
      ep.observations.row(t + 1) = sr.observation.transpose();
    }
    buffer.episodes.push_back(std::move(ep));
  }
  return buffer;
}

SpiralReport spiral_diagnostic(const SpiralConfig& config) {
  namespace fs = std::filesystem;
  const std::string out = resolve_out_dir(config.out_dir);
  fs::create_directories(out);

  const envkit::GridLayout layout = envkit::generate_layout(
      envkit::sample_context(config.seed, 0, envkit::EnvFamily::spiral), envkit::EnvConfig{});
  {
    std::ofstream layout_dump(out + "/layout.json");
    layout_dump << layout.to_json() << "\n";
  }
  const int probe_cell = layout.cell_index(layout.start_x, layout.start_y);

  Rng data_rng = make_rng(config.seed, "spiral-data");
  const TrajectoryBuffer data = collect_uniform_trajectories(layout, config.episodes,
                                                             config.steps, data_rng,
                                                             /*random_start=*/true);

  // ground truth: BFS path distance from the probe plus the exact successor
  // distance table for the oracle heatmap
  const std::vector<int> path = envkit::spiral_path_cells(layout);
  std::vector<double> path_distance(layout.walls.size(),
                                    std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < path.size(); ++i) path_distance[path[i]] = static_cast<double>(i);

  const std::vector<double> uniform_policy(4, 0.25);
  const envkit::TabularMDP mdp = envkit::tabularize(layout, uniform_policy);
  const oracle::SuccessorDistanceTable sd_table =
      oracle::successor_distance_exact(oracle::discounted_occupancy(mdp.transition, config.gamma));
  const std::vector<double> oracle_field = field_from_table(sd_table, mdp, layout, probe_cell);

  // temporal distance (quasimetric + potential, symmetric InfoNCE)
  Rng etd_rng = make_rng(config.seed, "spiral-etd");
  metricnet::QuasimetricConfig mc;
  mc.obs_dim = envkit::observation_dim(layout);
  metricnet::QuasimetricModel model = metricnet::make_quasimetric_model(mc, etd_rng);
  metricnet::QuasimetricGrads grads = metricnet::make_grads(model);
  metricnet::QuasimetricAdam adam = metricnet::make_adam(model);
  diffcore::AdamConfig adam_config{config.learning_rate, 0.9, 0.999, 1e-5};
  for (int step = 0; step < config.etd_train_steps; ++step) {
    const double progress = static_cast<double>(step) / config.etd_train_steps;
    adam_config.learning_rate =
        config.final_learning_rate + 0.5 * (config.learning_rate - config.final_learning_rate) *
                                         (1.0 + std::cos(progress * 3.14159265358979323846));
    contrastive::train_step(model, grads, adam, adam_config, data, config.gamma,
                            config.batch_size, contrastive::LossVariant::symmetric, etd_rng);
  }

  // reachability classifier (EC)
  Rng ec_rng = make_rng(config.seed, "spiral-ec");
  baselines::ReachabilityClassifier classifier =
      baselines::make_reachability(mc.obs_dim, 32, 5, ec_rng);
  baselines::ReachabilityGrads ec_grads = baselines::make_grads(classifier);
  baselines::ReachabilityAdam ec_adam = baselines::make_adam(classifier);
  for (int step = 0; step < config.baseline_train_steps; ++step)
    baselines::train_reachability_step(classifier, ec_grads, ec_adam, adam_config, data,
                                       config.batch_size, ec_rng);

  // inverse dynamics
  Rng id_rng = make_rng(config.seed, "spiral-invdyn");
  baselines::InverseDynamicsModel invdyn = baselines::make_invdyn(mc.obs_dim, 32, 4, id_rng);
  baselines::InvdynGrads id_grads = baselines::make_grads(invdyn);
  baselines::InvdynAdam id_adam = baselines::make_adam(invdyn);
  for (int step = 0; step < config.baseline_train_steps; ++step)
    baselines::train_invdyn_step(invdyn, id_grads, id_adam, adam_config, data, config.batch_size,
                                 id_rng);

  // distance-from-probe fields
  envkit::EnvState state = envkit::initial_state(layout);
  const Vec probe_obs = envkit::observe(layout, state);
  const Vec probe_ec = baselines::reachability_embed(classifier, probe_obs);
  const Vec probe_id = baselines::invdyn_embed(invdyn, probe_obs);
  std::vector<double> etd_field(layout.walls.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> ec_field = etd_field, invdyn_field = etd_field;
  std::vector<double> truth, etd_values, ec_values, invdyn_values, oracle_values;
  for (int cell : path) {
    state.x = cell % layout.width;
    state.y = cell / layout.width;
    const Vec obs = envkit::observe(layout, state);
    etd_field[cell] = metricnet::quasimetric_distance(model, probe_obs, obs);
    // likelihood of closeness flipped into a distance-like score
    ec_field[cell] = -baselines::reachability_score(
        classifier, probe_ec, baselines::reachability_embed(classifier, obs));
    invdyn_field[cell] = (probe_id - baselines::invdyn_embed(invdyn, obs)).norm();
    truth.push_back(path_distance[cell]);
    etd_values.push_back(etd_field[cell]);
    ec_values.push_back(ec_field[cell]);
    invdyn_values.push_back(invdyn_field[cell]);
    oracle_values.push_back(oracle_field[cell]);
  }

  SpiralReport report;
  report.etd_spearman = stats::spearman(etd_values, truth);
  report.ec_spearman = stats::spearman(ec_values, truth);
  report.invdyn_spearman = stats::spearman(invdyn_values, truth);
  report.oracle_spearman = stats::spearman(oracle_values, truth);
  report.etd_heatmap = out + "/etd_distance.pnm";
  report.ec_heatmap = out + "/ec_distance.pnm";
  report.invdyn_heatmap = out + "/invdyn_distance.pnm";
  report.oracle_heatmap = out + "/oracle_distance.pnm";
  emit_heatmap(etd_field, layout, report.etd_heatmap);
  emit_heatmap(ec_field, layout, report.ec_heatmap);
  emit_heatmap(invdyn_field, layout, report.invdyn_heatmap);
  emit_heatmap(oracle_field, layout, report.oracle_heatmap);
  oracle::write_csv(sd_table.values, out + "/oracle_distance.csv");

  std::ofstream summary(out + "/report.json");
  summary << "{\n"
          << "  \"etd_spearman\": " << report.etd_spearman << ",\n"
          << "  \"ec_spearman\": " << report.ec_spearman << ",\n"
          << "  \"invdyn_spearman\": " << report.invdyn_spearman << ",\n"
          << "  \"oracle_spearman\": " << report.oracle_spearman << "\n}\n";

  std::ofstream distances(out + "/distances.csv");
  distances << "path_index,etd,ec,invdyn,oracle\n";
  distances.precision(12);
  for (std::size_t i = 0; i < truth.size(); ++i)
    distances << truth[i] << "," << etd_values[i] << "," << ec_values[i] << ","
              << invdyn_values[i] << "," << oracle_values[i] << "\n";
  return report;
}

Mat random_ergodic_transition(int n, Rng& rng) {
  Mat p(n, n);
  for (int r = 0; r < n; ++r) {
    double total = 0;
    for (int c = 0; c < n; ++c) {
      // positive everywhere, so the chain is irreducible and aperiodic
      p(r, c) = 0.05 + uniform_real(rng);
      total += p(r, c);
    }
    p.row(r) /= total;
  }
  return p;
}

OracleAuditSummary audit_random_mdps(int n_mdps, std::uint64_t seed) {
  OracleAuditSummary summary;
  summary.min_offdiag_margin = std::numeric_limits<double>::infinity();
  Rng rng = make_rng(seed, "oracle-audit");
  const double gammas[3] = {0.5, 0.9, 0.99};
  for (int i = 0; i < n_mdps; ++i) {
    const int n = uniform_int(rng, 3, 20);
    const Mat p = random_ergodic_transition(n, rng);
    for (double gamma : gammas) {
      const auto occupancy = oracle::discounted_occupancy(p, gamma);
      const auto table = oracle::successor_distance_exact(occupancy);
      const auto report = oracle::quasimetric_audit(table.values, 1e-9, rng());
      summary.positivity += report.positivity;
      summary.identity += report.identity;
      summary.triangle += report.triangle;
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) {
          if (x == y) continue;
          const double mgf = oracle::hitting_time_mgf(p, gamma, x, y);
          summary.max_equivalence_gap =
              std::max(summary.max_equivalence_gap, std::abs(table.values(x, y) - mgf));
          summary.min_offdiag_margin = std::min(
              summary.min_offdiag_margin, table.values(x, y) - std::log(1.0 / gamma));
        }
    }
    ++summary.mdps;
  }
  // deterministic always-right chain: D(x, y) = (y - x) ln(1/gamma)
  for (double gamma : gammas) {
    const int length = 8;
    Mat chain = Mat::Zero(length, length);
    for (int x = 0; x < length - 1; ++x) chain(x, x + 1) = 1.0;
    chain(length - 1, length - 1) = 1.0;
    const auto table = oracle::successor_distance_exact(oracle::discounted_occupancy(chain, gamma));
    for (int x = 0; x < length; ++x)
      for (int y = x; y < length; ++y)
        summary.max_chain_gap =
            std::max(summary.max_chain_gap,
                     std::abs(table.values(x, y) - (y - x) * std::log(1.0 / gamma)));
  }
  return summary;
}

}  // namespace etd::harness
