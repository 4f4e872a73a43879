#include "etd/contrastive.hpp"

#include <cmath>
#include <stdexcept>

namespace etd::contrastive {

using metricnet::EnergyKind;

namespace {

constexpr double kCosineEps = 1e-8;

double logsumexp(const Vec& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Vec softmax(const Vec& v) {
  const double m = v.maxCoeff();
  Vec e = (v.array() - m).exp();
  return e / e.sum();
}

// Pairwise Euclidean norms between rows of a and rows of b.
Mat pairwise_l2(const Mat& a, const Mat& b) {
  const Vec sq_a = a.rowwise().squaredNorm();
  const Vec sq_b = b.rowwise().squaredNorm();
  Mat d2 = (-2.0 * a * b.transpose());
  d2.colwise() += sq_a;
  d2.rowwise() += sq_b.transpose();
  return d2.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

std::string variant_name(LossVariant variant) {
  switch (variant) {
    case LossVariant::forward: return "forward";
    case LossVariant::backward: return "backward";
    case LossVariant::symmetric: return "symmetric";
  }
  return "unknown";
}

LossVariant variant_from_name(const std::string& name) {
  if (name == "forward") return LossVariant::forward;
  if (name == "backward") return LossVariant::backward;
  if (name == "symmetric") return LossVariant::symmetric;
  throw std::invalid_argument("unknown loss variant: " + name);
}

int sample_geometric_offset(double gamma, Rng& rng) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    if (gamma == 0.0) return 0;
    throw std::invalid_argument("geometric offset needs gamma in [0,1)");
  }
  const double u = uniform_real(rng);
  return static_cast<int>(std::floor(std::log1p(-u) / std::log(gamma)));
}

PairBatch sample_pairs(const TrajectoryBuffer& buffer, double gamma, int batch_size, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("sample_pairs: empty trajectory buffer");
  if (batch_size < 1) throw std::invalid_argument("sample_pairs: batch_size must be >= 1");
  const int obs_dim = static_cast<int>(buffer.episodes.front().observations.cols());
  PairBatch batch;
  batch.anchors.resize(batch_size, obs_dim);
  batch.positives.resize(batch_size, obs_dim);
  const int n_episodes = static_cast<int>(buffer.episodes.size());
  for (int i = 0; i < batch_size; ++i) {
    const Episode& ep = buffer.episodes[uniform_int(rng, 0, n_episodes - 1)];
    const int last = ep.num_observations() - 1;
    const int t = uniform_int(rng, 0, last);
    int j = sample_geometric_offset(gamma, rng);
    int guard = 0;
    while (t + j > last) {
      j = sample_geometric_offset(gamma, rng);
      if (++guard > 1000000)
        throw std::runtime_error("sample_pairs: offset resampling failed to terminate");
    }
    batch.anchors.row(i) = ep.observations.row(t);
    batch.positives.row(i) = ep.observations.row(t + j);
  }
  return batch;
}

double infonce_loss(const QuasimetricModel& model, const PairBatch& batch, LossVariant variant,
                    LossTape* tape) {
  const int b = batch.size();
  if (b < 1) throw std::invalid_argument("infonce_loss: batch must be nonempty");
  LossTape local;
  LossTape& t = tape ? *tape : local;
  t.variant = variant;

  const EnergyKind kind = model.config.energy;
  t.emb_x = diffcore::forward_batch(model.encoder, batch.anchors, t.enc_x);
  t.emb_y = diffcore::forward_batch(model.encoder, batch.positives, t.enc_y);

  if (kind == EnergyKind::mrn || kind == EnergyKind::mrn_pot) {
    t.sx = diffcore::forward_batch(model.sym_head, t.emb_x, t.sym_x);
    t.sy = diffcore::forward_batch(model.sym_head, t.emb_y, t.sym_y);
    t.l2 = pairwise_l2(t.sx, t.sy);
    Mat distance = t.l2;
    t.argmax = Eigen::MatrixXi::Constant(b, b, -1);
    if (!model.config.symmetric_only) {
      t.ax = diffcore::forward_batch(model.asym_head, t.emb_x, t.asym_x);
      t.ay = diffcore::forward_batch(model.asym_head, t.emb_y, t.asym_y);
      const int k_dim = static_cast<int>(t.ax.cols());
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) {
          double best = 0.0;
          int arg = -1;
          for (int k = 0; k < k_dim; ++k) {
            const double v = t.ax(i, k) - t.ay(j, k);
            if (v > best) {
              best = v;
              arg = k;
            }
          }
          if (arg >= 0) {
            distance(i, j) += best;
            t.argmax(i, j) = arg;
          }
        }
    }
    t.energies = -distance;
    if (kind == EnergyKind::mrn_pot) {
      t.pot = diffcore::forward_batch(model.potential_head, t.emb_y, t.pot_y).col(0);
      t.energies.rowwise() += t.pot.transpose();
    }
  } else if (kind == EnergyKind::l2) {
    t.l2 = pairwise_l2(t.emb_x, t.emb_y);
    t.energies = -t.l2;
  } else {  // cosine
    t.norm_x = t.emb_x.rowwise().norm();
    t.norm_y = t.emb_y.rowwise().norm();
    const Vec inv_x = (t.norm_x.array() + kCosineEps).inverse();
    const Vec inv_y = (t.norm_y.array() + kCosineEps).inverse();
    t.energies = inv_x.asDiagonal() * (t.emb_x * t.emb_y.transpose()) * inv_y.asDiagonal();
  }

  if (!t.energies.allFinite()) throw std::runtime_error("infonce_loss: non-finite energy");

  double loss = 0;
  if (variant == LossVariant::forward || variant == LossVariant::symmetric)
    for (int i = 0; i < b; ++i) loss += logsumexp(t.energies.row(i).transpose()) - t.energies(i, i);
  if (variant == LossVariant::backward || variant == LossVariant::symmetric)
    for (int i = 0; i < b; ++i) loss += logsumexp(t.energies.col(i)) - t.energies(i, i);
  return loss;
}

void infonce_backward(const QuasimetricModel& model, const LossTape& t, QuasimetricGrads& sink) {
  const int b = static_cast<int>(t.energies.rows());
  if (b == 0) throw std::invalid_argument("infonce_backward: empty tape");

  // dL/dF
  Mat g = Mat::Zero(b, b);
  if (t.variant == LossVariant::forward || t.variant == LossVariant::symmetric)
    for (int i = 0; i < b; ++i) {
      g.row(i) += softmax(t.energies.row(i).transpose()).transpose();
      g(i, i) -= 1.0;
    }
  if (t.variant == LossVariant::backward || t.variant == LossVariant::symmetric)
    for (int j = 0; j < b; ++j) {
      g.col(j) += softmax(t.energies.col(j));
      g(j, j) -= 1.0;
    }

  const EnergyKind kind = model.config.energy;
  if (kind == EnergyKind::mrn || kind == EnergyKind::mrn_pot) {
    // symmetric part: contribution c(i,j) * (sx_i - sy_j) with c = -g / l2
    Mat c(b, b);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < b; ++j) c(i, j) = t.l2(i, j) > 0 ? -g(i, j) / t.l2(i, j) : 0.0;
    Mat d_sx = c.rowwise().sum().asDiagonal() * t.sx - c * t.sy;
    Mat d_sy = c.colwise().sum().asDiagonal() * t.sy - c.transpose() * t.sx;
    Mat demb_x = diffcore::backward_batch(model.sym_head, t.sym_x, d_sx, sink.sym_head);
    Mat demb_y = diffcore::backward_batch(model.sym_head, t.sym_y, d_sy, sink.sym_head);
    if (!model.config.symmetric_only) {
      Mat d_ax = Mat::Zero(b, t.ax.cols());
      Mat d_ay = Mat::Zero(b, t.ay.cols());
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) {
          const int k = t.argmax(i, j);
          if (k >= 0) {
            d_ax(i, k) -= g(i, j);
            d_ay(j, k) += g(i, j);
          }
        }
      demb_x += diffcore::backward_batch(model.asym_head, t.asym_x, d_ax, sink.asym_head);
      demb_y += diffcore::backward_batch(model.asym_head, t.asym_y, d_ay, sink.asym_head);
    }
    if (kind == EnergyKind::mrn_pot) {
      Mat d_pot = g.colwise().sum().transpose();
      demb_y +=
          diffcore::backward_batch(model.potential_head, t.pot_y, d_pot, sink.potential_head);
    }
    diffcore::backward_batch(model.encoder, t.enc_x, demb_x, sink.encoder);
    diffcore::backward_batch(model.encoder, t.enc_y, demb_y, sink.encoder);
  } else if (kind == EnergyKind::l2) {
    Mat c(b, b);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < b; ++j) c(i, j) = t.l2(i, j) > 0 ? -g(i, j) / t.l2(i, j) : 0.0;
    Mat demb_x = c.rowwise().sum().asDiagonal() * t.emb_x - c * t.emb_y;
    Mat demb_y = c.colwise().sum().asDiagonal() * t.emb_y - c.transpose() * t.emb_x;
    diffcore::backward_batch(model.encoder, t.enc_x, demb_x, sink.encoder);
    diffcore::backward_batch(model.encoder, t.enc_y, demb_y, sink.encoder);
  } else {  // cosine
    const Vec inv_x = (t.norm_x.array() + kCosineEps).inverse();
    const Vec inv_y = (t.norm_y.array() + kCosineEps).inverse();
    const Mat gf = g.cwiseProduct(t.energies);
    Mat demb_x = inv_x.asDiagonal() * ((g * inv_y.asDiagonal()) * t.emb_y);
    Mat demb_y = inv_y.asDiagonal() * ((g.transpose() * inv_x.asDiagonal()) * t.emb_x);
    for (int i = 0; i < b; ++i) {
      if (t.norm_x[i] > 1e-12)
        demb_x.row(i) -= inv_x[i] * gf.row(i).sum() / t.norm_x[i] * t.emb_x.row(i);
      if (t.norm_y[i] > 1e-12)
        demb_y.row(i) -= inv_y[i] * gf.col(i).sum() / t.norm_y[i] * t.emb_y.row(i);
    }
    diffcore::backward_batch(model.encoder, t.enc_x, demb_x, sink.encoder);
    diffcore::backward_batch(model.encoder, t.enc_y, demb_y, sink.encoder);
  }
}

double train_on_batch(QuasimetricModel& model, QuasimetricGrads& grads, QuasimetricAdam& adam,
                      const diffcore::AdamConfig& adam_config, const PairBatch& batch,
                      LossVariant variant) {
  LossTape tape;
  const double loss = infonce_loss(model, batch, variant, &tape);
  grads.zero();
  infonce_backward(model, tape, grads);
  metricnet::apply_adam(model, grads, adam, adam_config);
  return loss;
}

double train_step(QuasimetricModel& model, QuasimetricGrads& grads, QuasimetricAdam& adam,
                  const diffcore::AdamConfig& adam_config, const TrajectoryBuffer& buffer,
                  double gamma, int batch_size, LossVariant variant, Rng& rng) {
  const PairBatch batch = sample_pairs(buffer, gamma, batch_size, rng);
  return train_on_batch(model, grads, adam, adam_config, batch, variant);
}

}  // namespace etd::contrastive
