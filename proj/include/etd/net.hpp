#pragma once

#include <cstddef>
#include <vector>

#include "etd/linalg.hpp"
#include "etd/rng.hpp"

namespace etd::diffcore {

enum class Activation { identity, relu, tanh };
enum class Normalization { none, layer_norm };

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
  Normalization norm = Normalization::none;
};

constexpr double kLayerNormEps = 1e-5;

/// Dense feed-forward network. Each layer computes act(norm(W x + b)).
struct DenseNet {
  std::vector<LayerSpec> layers;
  std::vector<Mat> weights;  // out x in
  std::vector<Vec> biases;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t layer_count() const { return layers.size(); }
};

/// Xavier-uniform weights, zero biases. Throws std::invalid_argument on
/// inconsistent consecutive layer dims.
DenseNet make_net(const std::vector<LayerSpec>& layers, Rng& rng);

struct NetGrads {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  void zero();
};
NetGrads make_grads(const DenseNet& net);

/// Intermediate values recorded in evaluation order; replaying a tape
/// backward yields gradients for every parameter touched by the forward pass.
struct GradTape {
  Vec input;
  std::vector<Vec> pre;     // W x + b
  std::vector<Vec> normed;  // after normalization
  std::vector<Vec> out;     // after activation
  bool empty() const { return out.empty(); }
};

Vec forward(const DenseNet& net, const Vec& input, GradTape& tape);
Vec evaluate(const DenseNet& net, const Vec& input);

/// Accumulates parameter gradients into `sink` and returns the gradient with
/// respect to the input, so composed networks chain naturally.
Vec backward(const DenseNet& net, const GradTape& tape, const Vec& output_grad, NetGrads& sink);

/// Batched variants; rows are samples.
struct BatchTape {
  Mat input;
  std::vector<Mat> pre, normed, out;
};

Mat forward_batch(const DenseNet& net, const Mat& inputs, BatchTape& tape);
Mat evaluate_batch(const DenseNet& net, const Mat& inputs);
Mat backward_batch(const DenseNet& net, const BatchTape& tape, const Mat& output_grads,
                   NetGrads& sink);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-5;
};

struct AdamState {
  long step = 0;
  std::vector<Mat> m_weights, v_weights;
  std::vector<Vec> m_biases, v_biases;
};
AdamState make_adam_state(const DenseNet& net);

/// Bias-corrected adaptive-moment update. Throws std::runtime_error naming
/// the offending layer if a gradient is non-finite.
void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state, const AdamConfig& config);

std::size_t param_count(const DenseNet& net);
Vec flatten_params(const DenseNet& net);
void unflatten_params(DenseNet& net, const Vec& flat);
Vec flatten_grads(const NetGrads& grads);

}  // namespace etd::diffcore
