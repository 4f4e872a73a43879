#pragma once

#include <string>

#include "etd/metricnet.hpp"
#include "etd/rng.hpp"
#include "etd/trajectory.hpp"

namespace etd::contrastive {

using metricnet::QuasimetricAdam;
using metricnet::QuasimetricGrads;
using metricnet::QuasimetricModel;

enum class LossVariant { forward, backward, symmetric };

std::string variant_name(LossVariant variant);
LossVariant variant_from_name(const std::string& name);

/// Anchor/positive pairs; row i of positives is a same-episode future state of
/// row i of anchors at a geometric offset.
struct PairBatch {
  Mat anchors;
  Mat positives;
  int size() const { return static_cast<int>(anchors.rows()); }
};

/// P(j = k) = (1 - gamma) * gamma^k for k >= 0, by inversion.
int sample_geometric_offset(double gamma, Rng& rng);

/// Uniform episode and anchor index; the offset is redrawn until the positive
/// lands inside the episode. Throws std::invalid_argument on an empty buffer.
PairBatch sample_pairs(const TrajectoryBuffer& buffer, double gamma, int batch_size, Rng& rng);

/// Forward state kept for the backward pass: per-sample network tapes plus the
/// B x B energy matrix and its pairwise intermediates.
struct LossTape {
  LossVariant variant = LossVariant::symmetric;
  diffcore::BatchTape enc_x, enc_y;
  diffcore::BatchTape sym_x, sym_y, asym_x, asym_y, pot_y;
  Mat emb_x, emb_y;  // encoder outputs
  Mat sx, sy, ax, ay;
  Vec pot;
  Mat energies;       // F(i, j) = energy(x_i, y_j)
  Mat l2;             // symmetric-part norms (mrn) or embedding distances (l2)
  Eigen::MatrixXi argmax;  // asym argmax per pair; -1 inactive
  Vec norm_x, norm_y;      // cosine embedding norms
};

/// Negative-log InfoNCE over in-batch negatives. Returns the minimizable loss;
/// fills `tape` when non-null so infonce_backward can run.
double infonce_loss(const QuasimetricModel& model, const PairBatch& batch, LossVariant variant,
                    LossTape* tape = nullptr);

/// Accumulates parameter gradients of the recorded loss into `sink`.
void infonce_backward(const QuasimetricModel& model, const LossTape& tape, QuasimetricGrads& sink);

/// One sample -> loss -> backward -> Adam cycle; returns the pre-update loss.
double train_step(QuasimetricModel& model, QuasimetricGrads& grads, QuasimetricAdam& adam,
                  const diffcore::AdamConfig& adam_config, const TrajectoryBuffer& buffer,
                  double gamma, int batch_size, LossVariant variant, Rng& rng);

/// As train_step but on an already-sampled batch.
double train_on_batch(QuasimetricModel& model, QuasimetricGrads& grads, QuasimetricAdam& adam,
                      const diffcore::AdamConfig& adam_config, const PairBatch& batch,
                      LossVariant variant);

}  // namespace etd::contrastive
