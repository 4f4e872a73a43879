#include "etd/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace etd::diffcore {

namespace {

void check_layers(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw std::invalid_argument("net needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in <= 0 || layers[i].out <= 0)
      throw std::invalid_argument("layer " + std::to_string(i) + " has non-positive dims");
    if (i > 0 && layers[i].in != layers[i - 1].out)
      throw std::invalid_argument("layer " + std::to_string(i) + " input dim " +
                                  std::to_string(layers[i].in) + " != previous output dim " +
                                  std::to_string(layers[i - 1].out));
  }
}

inline Vec apply_activation(const Vec& x, Activation act) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::relu: return x.cwiseMax(0.0);
    case Activation::tanh: return x.array().tanh().matrix();
  }
  return x;
}

inline Mat apply_activation(const Mat& x, Activation act) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::relu: return x.cwiseMax(0.0);
    case Activation::tanh: return x.array().tanh().matrix();
  }
  return x;
}

// d(act)/d(pre-activation), expressed via the normalized input n.
inline Vec activation_grad(const Vec& n, const Vec& upstream, Activation act) {
  switch (act) {
    case Activation::identity: return upstream;
    case Activation::relu: return (n.array() > 0.0).select(upstream, 0.0);
    case Activation::tanh: {
      Vec t = n.array().tanh().matrix();
      return upstream.array() * (1.0 - t.array().square());
    }
  }
  return upstream;
}

inline Mat activation_grad(const Mat& n, const Mat& upstream, Activation act) {
  switch (act) {
    case Activation::identity: return upstream;
    case Activation::relu: return (n.array() > 0.0).select(upstream, 0.0);
    case Activation::tanh: {
      Mat t = n.array().tanh().matrix();
      return upstream.array() * (1.0 - t.array().square());
    }
  }
  return upstream;
}

inline Vec layer_norm(const Vec& z) {
  const double mu = z.mean();
  const double var = (z.array() - mu).square().mean();
  const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
  return (z.array() - mu).matrix() * inv;
}

// g_z = (g_n - mean(g_n) - n * mean(g_n .* n)) / sigma
inline Vec layer_norm_grad(const Vec& z, const Vec& normed, const Vec& g) {
  const double mu = z.mean();
  const double var = (z.array() - mu).square().mean();
  const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
  const double g_mean = g.mean();
  const double gn_mean = (g.array() * normed.array()).mean();
  return ((g.array() - g_mean) - normed.array() * gn_mean).matrix() * inv;
}

}  // namespace

DenseNet make_net(const std::vector<LayerSpec>& layers, Rng& rng) {
  check_layers(layers);
  DenseNet net;
  net.layers = layers;
  net.weights.reserve(layers.size());
  net.biases.reserve(layers.size());
  for (const auto& spec : layers) {
    const double limit = std::sqrt(6.0 / (spec.in + spec.out));
    Mat w(spec.out, spec.in);
    for (int r = 0; r < spec.out; ++r)
      for (int c = 0; c < spec.in; ++c) w(r, c) = (uniform_real(rng) * 2.0 - 1.0) * limit;
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vec::Zero(spec.out));
  }
  return net;
}

void NetGrads::zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

NetGrads make_grads(const DenseNet& net) {
  NetGrads g;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    g.weights.push_back(Mat::Zero(net.weights[i].rows(), net.weights[i].cols()));
    g.biases.push_back(Vec::Zero(net.biases[i].size()));
  }
  return g;
}

Vec forward(const DenseNet& net, const Vec& input, GradTape& tape) {
  if (input.size() != net.input_dim())
    throw std::invalid_argument("forward: input length " + std::to_string(input.size()) +
                                " != first layer dim " + std::to_string(net.input_dim()));
  tape.input = input;
  tape.pre.assign(net.layer_count(), Vec());
  tape.normed.assign(net.layer_count(), Vec());
  tape.out.assign(net.layer_count(), Vec());
  Vec x = input;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    tape.pre[i] = net.weights[i] * x + net.biases[i];
    tape.normed[i] = net.layers[i].norm == Normalization::layer_norm ? layer_norm(tape.pre[i])
                                                                     : tape.pre[i];
    tape.out[i] = apply_activation(tape.normed[i], net.layers[i].act);
    x = tape.out[i];
  }
  return x;
}

Vec evaluate(const DenseNet& net, const Vec& input) {
  if (input.size() != net.input_dim())
    throw std::invalid_argument("evaluate: input length " + std::to_string(input.size()) +
                                " != first layer dim " + std::to_string(net.input_dim()));
  Vec x = input;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    Vec z = net.weights[i] * x + net.biases[i];
    if (net.layers[i].norm == Normalization::layer_norm) z = layer_norm(z);
    x = apply_activation(z, net.layers[i].act);
  }
  return x;
}

Vec backward(const DenseNet& net, const GradTape& tape, const Vec& output_grad, NetGrads& sink) {
  if (tape.out.size() != net.layer_count())
    throw std::invalid_argument("backward: tape does not match net (stale tape?)");
  if (output_grad.size() != net.output_dim())
    throw std::invalid_argument("backward: output_grad length mismatch");
  if (sink.weights.size() != net.layer_count())
    throw std::invalid_argument("backward: gradient sink does not match net");
  Vec g = output_grad;
  for (int i = static_cast<int>(net.layer_count()) - 1; i >= 0; --i) {
    g = activation_grad(tape.normed[i], g, net.layers[i].act);
    if (net.layers[i].norm == Normalization::layer_norm)
      g = layer_norm_grad(tape.pre[i], tape.normed[i], g);
    const Vec& in = i == 0 ? tape.input : tape.out[i - 1];
    sink.weights[i].noalias() += g * in.transpose();
    sink.biases[i] += g;
    g = net.weights[i].transpose() * g;
  }
  return g;
}

Mat forward_batch(const DenseNet& net, const Mat& inputs, BatchTape& tape) {
  if (inputs.cols() != net.input_dim())
    throw std::invalid_argument("forward_batch: input width != first layer dim");
  tape.input = inputs;
  tape.pre.assign(net.layer_count(), Mat());
  tape.normed.assign(net.layer_count(), Mat());
  tape.out.assign(net.layer_count(), Mat());
  Mat x = inputs;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    Mat z = x * net.weights[i].transpose();
    z.rowwise() += net.biases[i].transpose();
    tape.pre[i] = z;
    if (net.layers[i].norm == Normalization::layer_norm) {
      Mat n(z.rows(), z.cols());
      for (Eigen::Index r = 0; r < z.rows(); ++r) n.row(r) = layer_norm(z.row(r).transpose()).transpose();
      tape.normed[i] = std::move(n);
    } else {
      tape.normed[i] = tape.pre[i];
    }
    tape.out[i] = apply_activation(tape.normed[i], net.layers[i].act);
    x = tape.out[i];
  }
  return x;
}

Mat evaluate_batch(const DenseNet& net, const Mat& inputs) {
  if (inputs.cols() != net.input_dim())
    throw std::invalid_argument("evaluate_batch: input width != first layer dim");
  Mat x = inputs;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    Mat z = x * net.weights[i].transpose();
    z.rowwise() += net.biases[i].transpose();
    if (net.layers[i].norm == Normalization::layer_norm) {
      for (Eigen::Index r = 0; r < z.rows(); ++r)
        z.row(r) = layer_norm(z.row(r).transpose()).transpose();
    }
    x = apply_activation(z, net.layers[i].act);
  }
  return x;
}

Mat backward_batch(const DenseNet& net, const BatchTape& tape, const Mat& output_grads,
                   NetGrads& sink) {
  if (tape.out.size() != net.layer_count())
    throw std::invalid_argument("backward_batch: tape does not match net");
  if (output_grads.cols() != net.output_dim() || output_grads.rows() != tape.input.rows())
    throw std::invalid_argument("backward_batch: output_grads shape mismatch");
  Mat g = output_grads;
  for (int i = static_cast<int>(net.layer_count()) - 1; i >= 0; --i) {
    g = activation_grad(tape.normed[i], g, net.layers[i].act);
    if (net.layers[i].norm == Normalization::layer_norm) {
      for (Eigen::Index r = 0; r < g.rows(); ++r)
        g.row(r) = layer_norm_grad(tape.pre[i].row(r).transpose(),
                                   tape.normed[i].row(r).transpose(), g.row(r).transpose())
                       .transpose();
    }
    const Mat& in = i == 0 ? tape.input : tape.out[i - 1];
    sink.weights[i].noalias() += g.transpose() * in;
    sink.biases[i] += g.colwise().sum().transpose();
    g = g * net.weights[i];
  }
  return g;
}

AdamState make_adam_state(const DenseNet& net) {
  AdamState s;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    s.m_weights.push_back(Mat::Zero(net.weights[i].rows(), net.weights[i].cols()));
    s.v_weights.push_back(Mat::Zero(net.weights[i].rows(), net.weights[i].cols()));
    s.m_biases.push_back(Vec::Zero(net.biases[i].size()));
    s.v_biases.push_back(Vec::Zero(net.biases[i].size()));
  }
  return s;
}

namespace {

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, long step, const AdamConfig& c,
                 const char* what, std::size_t layer) {
  if (!grad.allFinite())
    throw std::runtime_error("adam_step: non-finite gradient in layer " + std::to_string(layer) +
                             " " + what);
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  param.array() -=
      c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
}

}  // namespace

void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state, const AdamConfig& config) {
  if (grads.weights.size() != net.layer_count() || state.m_weights.size() != net.layer_count())
    throw std::invalid_argument("adam_step: shapes do not match net");
  ++state.step;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    adam_update(net.weights[i], grads.weights[i], state.m_weights[i], state.v_weights[i],
                state.step, config, "weights", i);
    adam_update(net.biases[i], grads.biases[i], state.m_biases[i], state.v_biases[i], state.step,
                config, "biases", i);
  }
}

std::size_t param_count(const DenseNet& net) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < net.layer_count(); ++i)
    n += static_cast<std::size_t>(net.weights[i].size()) + net.biases[i].size();
  return n;
}

Vec flatten_params(const DenseNet& net) {
  Vec flat(param_count(net));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    for (Eigen::Index j = 0; j < net.weights[i].size(); ++j) flat[k++] = net.weights[i].data()[j];
    for (Eigen::Index j = 0; j < net.biases[i].size(); ++j) flat[k++] = net.biases[i][j];
  }
  return flat;
}

void unflatten_params(DenseNet& net, const Vec& flat) {
  if (static_cast<std::size_t>(flat.size()) != param_count(net))
    throw std::invalid_argument("unflatten_params: size mismatch");
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    for (Eigen::Index j = 0; j < net.weights[i].size(); ++j) net.weights[i].data()[j] = flat[k++];
    for (Eigen::Index j = 0; j < net.biases[i].size(); ++j) net.biases[i][j] = flat[k++];
  }
}

Vec flatten_grads(const NetGrads& grads) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < grads.weights.size(); ++i)
    n += static_cast<std::size_t>(grads.weights[i].size()) + grads.biases[i].size();
  Vec flat(n);
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < grads.weights.size(); ++i) {
    for (Eigen::Index j = 0; j < grads.weights[i].size(); ++j) flat[k++] = grads.weights[i].data()[j];
    for (Eigen::Index j = 0; j < grads.biases[i].size(); ++j) flat[k++] = grads.biases[i][j];
  }
  return flat;
}

}  // namespace etd::diffcore
