#pragma once

#include <string>

#include "etd/linalg.hpp"
#include "etd/net.hpp"
#include "etd/rng.hpp"

namespace etd::metricnet {

using diffcore::AdamConfig;
using diffcore::AdamState;
using diffcore::DenseNet;
using diffcore::GradTape;
using diffcore::NetGrads;

enum class EnergyKind { cosine, l2, mrn, mrn_pot };

std::string energy_name(EnergyKind kind);
EnergyKind energy_from_name(const std::string& name);

struct QuasimetricConfig {
  int obs_dim = 0;
  int embed_dim = 64;
  int sym_dim = 16;
  int asym_dim = 16;
  int encoder_hidden = 128;
  int head_hidden = 64;
  EnergyKind energy = EnergyKind::mrn_pot;
  bool symmetric_only = false;
};

/// Shared encoder with symmetric, asymmetric, and potential heads.
/// distance(x, y) = |sym(x) - sym(y)|_2 + max_i relu(asym(x)_i - asym(y)_i);
/// the asymmetric term is dropped in symmetric_only mode.
struct QuasimetricModel {
  QuasimetricConfig config;
  DenseNet encoder;
  DenseNet sym_head;
  DenseNet asym_head;
  DenseNet potential_head;
};

QuasimetricModel make_quasimetric_model(const QuasimetricConfig& config, Rng& rng);

struct QuasimetricGrads {
  NetGrads encoder, sym_head, asym_head, potential_head;
  void zero();
};
QuasimetricGrads make_grads(const QuasimetricModel& model);

struct QuasimetricAdam {
  AdamState encoder, sym_head, asym_head, potential_head;
};
QuasimetricAdam make_adam(const QuasimetricModel& model);
void apply_adam(QuasimetricModel& model, const QuasimetricGrads& grads, QuasimetricAdam& adam,
                const AdamConfig& config);

Vec embed(const QuasimetricModel& model, const Vec& obs);
Mat embed_batch(const QuasimetricModel& model, const Mat& obs_rows);

struct HeadOutputs {
  Vec sym, asym;
};
HeadOutputs heads(const QuasimetricModel& model, const Vec& embedding);
double distance_from_heads(const HeadOutputs& x, const HeadOutputs& y, bool symmetric_only);

/// Quasimetric distance d(x, y); requires energy kind mrn or mrn_pot.
double quasimetric_distance(const QuasimetricModel& model, const Vec& x_obs, const Vec& y_obs);

/// Scalar potential c(y); sign unconstrained.
double potential(const QuasimetricModel& model, const Vec& y_obs);

/// cosine -> cos(enc x, enc y); l2 -> -|enc x - enc y|; mrn -> -d(x,y);
/// mrn_pot -> c(y) - d(x,y).
double energy(const QuasimetricModel& model, const Vec& x_obs, const Vec& y_obs);

/// Component k is distance(memory[k] -> query), evaluated as one batched pass.
/// Throws std::invalid_argument on empty memory.
Vec pairwise_distances(const QuasimetricModel& model, const Mat& memory_embeddings,
                       const Vec& query_obs);

/// Gradient-carrying scalar evaluations for checks and small-scale use.
struct PotentialTape {
  GradTape encoder, head;
};
double potential_forward(const QuasimetricModel& model, const Vec& y_obs, PotentialTape& tape);
void potential_backward(const QuasimetricModel& model, const PotentialTape& tape,
                        double output_grad, QuasimetricGrads& sink);

struct DistanceTape {
  GradTape enc_x, enc_y, sym_x, sym_y, asym_x, asym_y;
  Vec sym_diff;
  double l2 = 0;
  int argmax = -1;  // -1 when the asymmetric term is inactive
};
double distance_forward(const QuasimetricModel& model, const Vec& x_obs, const Vec& y_obs,
                        DistanceTape& tape);
void distance_backward(const QuasimetricModel& model, const DistanceTape& tape, double output_grad,
                       QuasimetricGrads& sink);

void save_checkpoint(const QuasimetricModel& model, const std::string& path);
QuasimetricModel load_checkpoint(const std::string& path);

}  // namespace etd::metricnet
