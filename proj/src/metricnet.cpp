#include "etd/metricnet.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace etd::metricnet {

using diffcore::Activation;
using diffcore::LayerSpec;
using diffcore::Normalization;

namespace {

constexpr double kCosineEps = 1e-8;

void require_mrn(const QuasimetricModel& model, const char* what) {
  if (model.config.energy != EnergyKind::mrn && model.config.energy != EnergyKind::mrn_pot)
    throw std::invalid_argument(std::string(what) + " requires energy kind mrn or mrn_pot");
}

nlohmann::json net_to_json(const DenseNet& net) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (const auto& spec : net.layers)
    j["layers"].push_back({{"in", spec.in},
                           {"out", spec.out},
                           {"act", static_cast<int>(spec.act)},
                           {"norm", static_cast<int>(spec.norm)}});
  const Vec flat = diffcore::flatten_params(net);
  j["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  return j;
}

DenseNet net_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> layers;
  for (const auto& l : j.at("layers"))
    layers.push_back(LayerSpec{l.at("in").get<int>(), l.at("out").get<int>(),
                               static_cast<Activation>(l.at("act").get<int>()),
                               static_cast<Normalization>(l.at("norm").get<int>())});
  Rng rng(0);
  DenseNet net = diffcore::make_net(layers, rng);
  const auto values = j.at("params").get<std::vector<double>>();
  Vec flat = Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
  diffcore::unflatten_params(net, flat);
  return net;
}

}  // namespace

std::string energy_name(EnergyKind kind) {
  switch (kind) {
    case EnergyKind::cosine: return "cosine";
    case EnergyKind::l2: return "l2";
    case EnergyKind::mrn: return "mrn";
    case EnergyKind::mrn_pot: return "mrn_pot";
  }
  return "unknown";
}

EnergyKind energy_from_name(const std::string& name) {
  if (name == "cosine") return EnergyKind::cosine;
  if (name == "l2") return EnergyKind::l2;
  if (name == "mrn") return EnergyKind::mrn;
  if (name == "mrn_pot") return EnergyKind::mrn_pot;
  throw std::invalid_argument("unknown energy kind: " + name);
}

QuasimetricModel make_quasimetric_model(const QuasimetricConfig& config, Rng& rng) {
  if (config.obs_dim <= 0) throw std::invalid_argument("quasimetric model needs obs_dim > 0");
  QuasimetricModel model;
  model.config = config;
  model.encoder = diffcore::make_net(
      {{config.obs_dim, config.encoder_hidden, Activation::relu, Normalization::layer_norm},
       {config.encoder_hidden, config.embed_dim, Activation::relu, Normalization::layer_norm}},
      rng);
  model.sym_head = diffcore::make_net(
      {{config.embed_dim, config.head_hidden, Activation::relu, Normalization::none},
       {config.head_hidden, config.sym_dim, Activation::identity, Normalization::none}},
      rng);
  model.asym_head = diffcore::make_net(
      {{config.embed_dim, config.head_hidden, Activation::relu, Normalization::none},
       {config.head_hidden, config.asym_dim, Activation::identity, Normalization::none}},
      rng);
  model.potential_head = diffcore::make_net(
      {{config.embed_dim, config.head_hidden, Activation::relu, Normalization::none},
       {config.head_hidden, 1, Activation::identity, Normalization::none}},
      rng);
  return model;
}

void QuasimetricGrads::zero() {
  encoder.zero();
  sym_head.zero();
  asym_head.zero();
  potential_head.zero();
}

QuasimetricGrads make_grads(const QuasimetricModel& model) {
  return QuasimetricGrads{diffcore::make_grads(model.encoder), diffcore::make_grads(model.sym_head),
                          diffcore::make_grads(model.asym_head),
                          diffcore::make_grads(model.potential_head)};
}

QuasimetricAdam make_adam(const QuasimetricModel& model) {
  return QuasimetricAdam{
      diffcore::make_adam_state(model.encoder), diffcore::make_adam_state(model.sym_head),
      diffcore::make_adam_state(model.asym_head), diffcore::make_adam_state(model.potential_head)};
}

void apply_adam(QuasimetricModel& model, const QuasimetricGrads& grads, QuasimetricAdam& adam,
                const AdamConfig& config) {
  diffcore::adam_step(model.encoder, grads.encoder, adam.encoder, config);
  diffcore::adam_step(model.sym_head, grads.sym_head, adam.sym_head, config);
  diffcore::adam_step(model.asym_head, grads.asym_head, adam.asym_head, config);
  diffcore::adam_step(model.potential_head, grads.potential_head, adam.potential_head, config);
}

Vec embed(const QuasimetricModel& model, const Vec& obs) {
  return diffcore::evaluate(model.encoder, obs);
}

Mat embed_batch(const QuasimetricModel& model, const Mat& obs_rows) {
  return diffcore::evaluate_batch(model.encoder, obs_rows);
}

HeadOutputs heads(const QuasimetricModel& model, const Vec& embedding) {
  return HeadOutputs{diffcore::evaluate(model.sym_head, embedding),
                     diffcore::evaluate(model.asym_head, embedding)};
}

double distance_from_heads(const HeadOutputs& x, const HeadOutputs& y, bool symmetric_only) {
  double d = (x.sym - y.sym).norm();
  if (!symmetric_only) {
    const double asym = (x.asym - y.asym).maxCoeff();
    if (asym > 0) d += asym;
  }
  return d;
}

double quasimetric_distance(const QuasimetricModel& model, const Vec& x_obs, const Vec& y_obs) {
  require_mrn(model, "quasimetric_distance");
  const HeadOutputs hx = heads(model, embed(model, x_obs));
  const HeadOutputs hy = heads(model, embed(model, y_obs));
  return distance_from_heads(hx, hy, model.config.symmetric_only);
}

double potential(const QuasimetricModel& model, const Vec& y_obs) {
  return diffcore::evaluate(model.potential_head, embed(model, y_obs))[0];
}

double energy(const QuasimetricModel& model, const Vec& x_obs, const Vec& y_obs) {
  switch (model.config.energy) {
    case EnergyKind::cosine: {
      const Vec ex = embed(model, x_obs), ey = embed(model, y_obs);
      return ex.dot(ey) / ((ex.norm() + kCosineEps) * (ey.norm() + kCosineEps));
    }
    case EnergyKind::l2: {
      const Vec ex = embed(model, x_obs), ey = embed(model, y_obs);
      return -(ex - ey).norm();
    }
    case EnergyKind::mrn: return -quasimetric_distance(model, x_obs, y_obs);
    case EnergyKind::mrn_pot:
      return potential(model, y_obs) - quasimetric_distance(model, x_obs, y_obs);
  }
  throw std::logic_error("unreachable energy kind");
}

Vec pairwise_distances(const QuasimetricModel& model, const Mat& memory_embeddings,
                       const Vec& query_obs) {
  require_mrn(model, "pairwise_distances");
  if (memory_embeddings.rows() == 0)
    throw std::invalid_argument("pairwise_distances: memory is empty");
  const Mat mem_sym = diffcore::evaluate_batch(model.sym_head, memory_embeddings);
  const Vec q_emb = embed(model, query_obs);
  const Vec q_sym = diffcore::evaluate(model.sym_head, q_emb);
  Vec distances =
      (mem_sym.rowwise() - q_sym.transpose()).rowwise().norm();
  if (!model.config.symmetric_only) {
    const Mat mem_asym = diffcore::evaluate_batch(model.asym_head, memory_embeddings);
    const Vec q_asym = diffcore::evaluate(model.asym_head, q_emb);
    const Vec asym =
        (mem_asym.rowwise() - q_asym.transpose()).rowwise().maxCoeff().cwiseMax(0.0);
    distances += asym;
  }
  return distances;
}

double potential_forward(const QuasimetricModel& model, const Vec& y_obs, PotentialTape& tape) {
  const Vec emb = diffcore::forward(model.encoder, y_obs, tape.encoder);
  return diffcore::forward(model.potential_head, emb, tape.head)[0];
}

void potential_backward(const QuasimetricModel& model, const PotentialTape& tape,
                        double output_grad, QuasimetricGrads& sink) {
  Vec g(1);
  g[0] = output_grad;
  const Vec demb = diffcore::backward(model.potential_head, tape.head, g, sink.potential_head);
  diffcore::backward(model.encoder, tape.encoder, demb, sink.encoder);
}

double distance_forward(const QuasimetricModel& model, const Vec& x_obs, const Vec& y_obs,
                        DistanceTape& tape) {
  require_mrn(model, "distance_forward");
  const Vec ex = diffcore::forward(model.encoder, x_obs, tape.enc_x);
  const Vec ey = diffcore::forward(model.encoder, y_obs, tape.enc_y);
  const Vec sx = diffcore::forward(model.sym_head, ex, tape.sym_x);
  const Vec sy = diffcore::forward(model.sym_head, ey, tape.sym_y);
  tape.sym_diff = sx - sy;
  tape.l2 = tape.sym_diff.norm();
  double d = tape.l2;
  tape.argmax = -1;
  if (!model.config.symmetric_only) {
    const Vec ax = diffcore::forward(model.asym_head, ex, tape.asym_x);
    const Vec ay = diffcore::forward(model.asym_head, ey, tape.asym_y);
    Eigen::Index arg = 0;
    const double m = (ax - ay).maxCoeff(&arg);
    if (m > 0) {
      d += m;
      tape.argmax = static_cast<int>(arg);
    }
  }
  return d;
}

void distance_backward(const QuasimetricModel& model, const DistanceTape& tape, double output_grad,
                       QuasimetricGrads& sink) {
  const Eigen::Index sym_dim = tape.sym_diff.size();
  Vec d_sym = Vec::Zero(sym_dim);
  if (tape.l2 > 0) d_sym = (output_grad / tape.l2) * tape.sym_diff;
  Vec dex = diffcore::backward(model.sym_head, tape.sym_x, d_sym, sink.sym_head);
  Vec dey = diffcore::backward(model.sym_head, tape.sym_y, -d_sym, sink.sym_head);
  if (!model.config.symmetric_only && !tape.asym_x.empty()) {
    Vec d_asym = Vec::Zero(model.config.asym_dim);
    if (tape.argmax >= 0) d_asym[tape.argmax] = output_grad;
    dex += diffcore::backward(model.asym_head, tape.asym_x, d_asym, sink.asym_head);
    dey += diffcore::backward(model.asym_head, tape.asym_y, -d_asym, sink.asym_head);
  }
  diffcore::backward(model.encoder, tape.enc_x, dex, sink.encoder);
  diffcore::backward(model.encoder, tape.enc_y, dey, sink.encoder);
}

void save_checkpoint(const QuasimetricModel& model, const std::string& path) {
  nlohmann::json j;
  j["obs_dim"] = model.config.obs_dim;
  j["embed_dim"] = model.config.embed_dim;
  j["sym_dim"] = model.config.sym_dim;
  j["asym_dim"] = model.config.asym_dim;
  j["encoder_hidden"] = model.config.encoder_hidden;
  j["head_hidden"] = model.config.head_hidden;
  j["energy"] = energy_name(model.config.energy);
  j["symmetric_only"] = model.config.symmetric_only;
  j["encoder"] = net_to_json(model.encoder);
  j["sym_head"] = net_to_json(model.sym_head);
  j["asym_head"] = net_to_json(model.asym_head);
  j["potential_head"] = net_to_json(model.potential_head);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << j.dump();
}

QuasimetricModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  QuasimetricModel model;
  model.config.obs_dim = j.at("obs_dim").get<int>();
  model.config.embed_dim = j.at("embed_dim").get<int>();
  model.config.sym_dim = j.at("sym_dim").get<int>();
  model.config.asym_dim = j.at("asym_dim").get<int>();
  model.config.encoder_hidden = j.at("encoder_hidden").get<int>();
  model.config.head_hidden = j.at("head_hidden").get<int>();
  model.config.energy = energy_from_name(j.at("energy").get<std::string>());
  model.config.symmetric_only = j.at("symmetric_only").get<bool>();
  model.encoder = net_from_json(j.at("encoder"));
  model.sym_head = net_from_json(j.at("sym_head"));
  model.asym_head = net_from_json(j.at("asym_head"));
  model.potential_head = net_from_json(j.at("potential_head"));
  return model;
}

}  // namespace etd::metricnet
