#include "etd/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

namespace etd::harness {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + where + it.key() + "'");
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  ppo.validate();
  if (bonus_provider != "etd" && bonus_provider != "count" && bonus_provider != "ec" &&
      bonus_provider != "invdyn" && bonus_provider != "none")
    throw std::invalid_argument("config: unknown bonus provider '" + bonus_provider + "'");
  if (env.noise.variance < 0) throw std::invalid_argument("config: noise variance must be >= 0");
  if (!(model.gamma > 0 && model.gamma < 1))
    throw std::invalid_argument("config: model.gamma must be in (0,1)");
  if (model.epochs < 0 || model.minibatch <= 0 || model.learning_rate <= 0)
    throw std::invalid_argument("config: bad model training settings");
  if (run.total_env_steps < 0) throw std::invalid_argument("config: negative step budget");
  if (run.seeds.empty()) throw std::invalid_argument("config: at least one seed required");
  if (run.eval_episodes < 0 || run.eval_interval_iters <= 0)
    throw std::invalid_argument("config: bad evaluation settings");
  if (env.family == envkit::EnvFamily::multiroom && env.rooms != 2 && env.rooms != 4)
    throw std::invalid_argument("config: multiroom rooms must be 2 or 4");
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, "", {"env", "bonus", "ppo", "model", "run"});
  if (j.contains("env")) {
    const json& e = j.at("env");
    check_keys(e, "env.",
               {"family", "size", "rooms", "chain_length", "time_limit_factor", "noise"});
    if (e.contains("family")) c.env.family = envkit::family_from_name(e.at("family"));
    get_if(e, "size", c.env.size);
    get_if(e, "rooms", c.env.rooms);
    get_if(e, "chain_length", c.env.chain_length);
    get_if(e, "time_limit_factor", c.env.time_limit_factor);
    if (e.contains("noise")) {
      const json& n = e.at("noise");
      check_keys(n, "env.noise.", {"enabled", "mean", "variance", "seed"});
      get_if(n, "enabled", c.env.noise.enabled);
      get_if(n, "mean", c.env.noise.mean);
      get_if(n, "variance", c.env.noise.variance);
      get_if(n, "seed", c.env.noise.seed);
    }
  }
  if (j.contains("bonus")) {
    const json& b = j.at("bonus");
    check_keys(b, "bonus.", {"provider", "aggregator", "ec"});
    get_if(b, "provider", c.bonus_provider);
    if (b.contains("aggregator"))
      c.aggregator = bonus::aggregator_from_name(b.at("aggregator"));
    if (b.contains("ec")) {
      const json& ec = b.at("ec");
      check_keys(ec, "bonus.ec.", {"alpha", "beta", "percentile", "horizon"});
      get_if(ec, "alpha", c.ec.alpha);
      get_if(ec, "beta", c.ec.beta);
      get_if(ec, "percentile", c.ec.percentile);
      get_if(ec, "horizon", c.ec.horizon);
    }
  }
  if (j.contains("ppo")) {
    const json& p = j.at("ppo");
    check_keys(p, "ppo.",
               {"gamma", "gae_lambda", "clip", "epochs", "minibatch", "workers", "rollout_steps",
                "learning_rate", "entropy_coef", "value_coef", "intrinsic_coef",
                "extrinsic_coef"});
    get_if(p, "gamma", c.ppo.gamma);
    get_if(p, "gae_lambda", c.ppo.gae_lambda);
    get_if(p, "clip", c.ppo.clip);
    get_if(p, "epochs", c.ppo.epochs);
    get_if(p, "minibatch", c.ppo.minibatch);
    get_if(p, "workers", c.ppo.workers);
    get_if(p, "rollout_steps", c.ppo.rollout_steps);
    get_if(p, "learning_rate", c.ppo.learning_rate);
    get_if(p, "entropy_coef", c.ppo.entropy_coef);
    get_if(p, "value_coef", c.ppo.value_coef);
    get_if(p, "intrinsic_coef", c.ppo.intrinsic_coef);
    get_if(p, "extrinsic_coef", c.ppo.extrinsic_coef);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model.",
               {"gamma", "epochs", "minibatch", "learning_rate", "embed_dim", "sym_dim",
                "asym_dim", "encoder_hidden", "head_hidden", "energy", "loss", "symmetric_only"});
    get_if(m, "gamma", c.model.gamma);
    get_if(m, "epochs", c.model.epochs);
    get_if(m, "minibatch", c.model.minibatch);
    get_if(m, "learning_rate", c.model.learning_rate);
    get_if(m, "embed_dim", c.model.embed_dim);
    get_if(m, "sym_dim", c.model.sym_dim);
    get_if(m, "asym_dim", c.model.asym_dim);
    get_if(m, "encoder_hidden", c.model.encoder_hidden);
    get_if(m, "head_hidden", c.model.head_hidden);
    if (m.contains("energy")) c.model.energy = metricnet::energy_from_name(m.at("energy"));
    if (m.contains("loss")) c.model.loss = contrastive::variant_from_name(m.at("loss"));
    get_if(m, "symmetric_only", c.model.symmetric_only);
  }
  if (j.contains("run")) {
    const json& r = j.at("run");
    check_keys(r, "run.",
               {"total_env_steps", "seeds", "out_dir", "eval_interval_iters", "eval_episodes",
                "eval_seed", "early_stop_success", "verbose_bonus_log"});
    get_if(r, "total_env_steps", c.run.total_env_steps);
    if (r.contains("seeds")) c.run.seeds = r.at("seeds").get<std::vector<std::uint64_t>>();
    get_if(r, "out_dir", c.run.out_dir);
    get_if(r, "eval_interval_iters", c.run.eval_interval_iters);
    get_if(r, "eval_episodes", c.run.eval_episodes);
    get_if(r, "eval_seed", c.run.eval_seed);
    get_if(r, "early_stop_success", c.run.early_stop_success);
    get_if(r, "verbose_bonus_log", c.run.verbose_bonus_log);
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const RunConfig& c) {
  json j;
  j["env"] = {{"family", envkit::family_name(c.env.family)},
              {"size", c.env.size},
              {"rooms", c.env.rooms},
              {"chain_length", c.env.chain_length},
              {"time_limit_factor", c.env.time_limit_factor},
              {"noise",
               {{"enabled", c.env.noise.enabled},
                {"mean", c.env.noise.mean},
                {"variance", c.env.noise.variance},
                {"seed", c.env.noise.seed}}}};
  j["bonus"] = {{"provider", c.bonus_provider},
                {"aggregator", bonus::aggregator_name(c.aggregator)},
                {"ec",
                 {{"alpha", c.ec.alpha},
                  {"beta", c.ec.beta},
                  {"percentile", c.ec.percentile},
                  {"horizon", c.ec.horizon}}}};
  j["ppo"] = {{"gamma", c.ppo.gamma},
              {"gae_lambda", c.ppo.gae_lambda},
              {"clip", c.ppo.clip},
              {"epochs", c.ppo.epochs},
              {"minibatch", c.ppo.minibatch},
              {"workers", c.ppo.workers},
              {"rollout_steps", c.ppo.rollout_steps},
              {"learning_rate", c.ppo.learning_rate},
              {"entropy_coef", c.ppo.entropy_coef},
              {"value_coef", c.ppo.value_coef},
              {"intrinsic_coef", c.ppo.intrinsic_coef},
              {"extrinsic_coef", c.ppo.extrinsic_coef}};
  j["model"] = {{"gamma", c.model.gamma},
                {"epochs", c.model.epochs},
                {"minibatch", c.model.minibatch},
                {"learning_rate", c.model.learning_rate},
                {"embed_dim", c.model.embed_dim},
                {"sym_dim", c.model.sym_dim},
                {"asym_dim", c.model.asym_dim},
                {"encoder_hidden", c.model.encoder_hidden},
                {"head_hidden", c.model.head_hidden},
                {"energy", metricnet::energy_name(c.model.energy)},
                {"loss", contrastive::variant_name(c.model.loss)},
                {"symmetric_only", c.model.symmetric_only}};
  j["run"] = {{"total_env_steps", c.run.total_env_steps},
              {"seeds", c.run.seeds},
              {"out_dir", c.run.out_dir},
              {"eval_interval_iters", c.run.eval_interval_iters},
              {"eval_episodes", c.run.eval_episodes},
              {"eval_seed", c.run.eval_seed},
              {"early_stop_success", c.run.early_stop_success},
              {"verbose_bonus_log", c.run.verbose_bonus_log}};
  return j;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j = json::parse(in);
  return config_from_json(j);
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file " + path);
  out << config_to_json(config).dump(2) << "\n";
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like section.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json* node = &j;
  std::size_t pos = 0;
  for (;;) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw std::invalid_argument("override has an empty key: " + assignment);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

std::string resolve_out_dir(const std::string& dir) {
  if (!dir.empty() && dir.front() == '/') return dir;
  const char* root = std::getenv("ETD_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0') return dir;
  return std::string(root) + "/" + dir;
}

}  // namespace etd::harness
