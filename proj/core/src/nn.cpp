#include "ogl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ogl/rng.hpp"

namespace ogl::nn {

namespace {

constexpr double kLogFloor = 1e-300;

bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void apply_activation(Activation act, std::vector<double>& z) {
  switch (act) {
    case Activation::relu:
      for (double& v : z) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::softmax: {
      double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
      }
      for (double& v : z) v /= sum;
      break;
    }
    case Activation::identity:
      break;
  }
}

struct LayerOffsets {
  std::size_t weights;
  std::size_t biases;
};

std::vector<LayerOffsets> layer_offsets(std::span<const LayerSpec> layers) {
  std::vector<LayerOffsets> offs(layers.size());
  std::size_t pos = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    offs[l].weights = pos;
    pos += static_cast<std::size_t>(layers[l].output_dim) * layers[l].input_dim;
    offs[l].biases = pos;
    pos += static_cast<std::size_t>(layers[l].output_dim);
  }
  return offs;
}

// Forward pass keeping every layer's post-activation output (activations[0]
// is the input itself). Pre-activations are not stored: relu and softmax
// backward rules only need the outputs.
std::vector<std::vector<double>> forward_trace(const DenseNetwork& net,
                                               std::span<const double> input) {
  std::vector<std::vector<double>> activations;
  activations.reserve(net.layers.size() + 1);
  activations.emplace_back(input.begin(), input.end());
  auto offs = layer_offsets(net.layers);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& spec = net.layers[l];
    const double* w = net.params.data() + offs[l].weights;
    const double* b = net.params.data() + offs[l].biases;
    const std::vector<double>& in = activations.back();
    std::vector<double> z(static_cast<std::size_t>(spec.output_dim));
    for (int o = 0; o < spec.output_dim; ++o) {
      double acc = b[o];
      const double* wrow = w + static_cast<std::size_t>(o) * spec.input_dim;
      for (int i = 0; i < spec.input_dim; ++i) acc += wrow[i] * in[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = acc;
    }
    apply_activation(spec.activation, z);
    activations.push_back(std::move(z));
  }
  return activations;
}

void check_target(const Sample& s, int output_dim) {
  if (static_cast<int>(s.y.size()) != output_dim) {
    throw std::invalid_argument("nn: sample target length does not match network output");
  }
}

// Accumulates one sample's parameter gradient (unscaled) into grad.
void backprop_sample(const DenseNetwork& net, const Sample& s, Loss loss,
                     const std::vector<LayerOffsets>& offs, std::vector<double>& grad) {
  auto acts = forward_trace(net, s.x);
  const std::vector<double>& out = acts.back();
  const auto& final_spec = net.layers.back();
  const int out_dim = final_spec.output_dim;

  // delta = dL/dz for the final layer.
  std::vector<double> delta(static_cast<std::size_t>(out_dim));
  if (loss == Loss::cross_entropy) {
    if (final_spec.activation != Activation::softmax) {
      throw std::invalid_argument("nn: cross-entropy requires a softmax final layer");
    }
    for (int j = 0; j < out_dim; ++j) {
      delta[static_cast<std::size_t>(j)] =
          out[static_cast<std::size_t>(j)] - s.y[static_cast<std::size_t>(j)];
    }
  } else {
    std::vector<double> dlda(static_cast<std::size_t>(out_dim));
    for (int j = 0; j < out_dim; ++j) {
      dlda[static_cast<std::size_t>(j)] =
          2.0 * (out[static_cast<std::size_t>(j)] - s.y[static_cast<std::size_t>(j)]) / out_dim;
    }
    switch (final_spec.activation) {
      case Activation::identity:
        delta = std::move(dlda);
        break;
      case Activation::relu:
        for (int j = 0; j < out_dim; ++j) {
          delta[static_cast<std::size_t>(j)] =
              out[static_cast<std::size_t>(j)] > 0.0 ? dlda[static_cast<std::size_t>(j)] : 0.0;
        }
        break;
      case Activation::softmax: {
        // J^T g = p .* (g - <g, p>)
        double dot = 0.0;
        for (int j = 0; j < out_dim; ++j) {
          dot += dlda[static_cast<std::size_t>(j)] * out[static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < out_dim; ++j) {
          delta[static_cast<std::size_t>(j)] =
              out[static_cast<std::size_t>(j)] * (dlda[static_cast<std::size_t>(j)] - dot);
        }
        break;
      }
    }
  }

  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const auto& spec = net.layers[static_cast<std::size_t>(l)];
    const std::vector<double>& in = acts[static_cast<std::size_t>(l)];
    double* gw = grad.data() + offs[static_cast<std::size_t>(l)].weights;
    double* gb = grad.data() + offs[static_cast<std::size_t>(l)].biases;
    for (int o = 0; o < spec.output_dim; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      double* grow = gw + static_cast<std::size_t>(o) * spec.input_dim;
      for (int i = 0; i < spec.input_dim; ++i) grow[i] += d * in[static_cast<std::size_t>(i)];
      gb[o] += d;
    }
    if (l == 0) break;
    const double* w = net.params.data() + offs[static_cast<std::size_t>(l)].weights;
    std::vector<double> prev(static_cast<std::size_t>(spec.input_dim), 0.0);
    for (int o = 0; o < spec.output_dim; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      const double* wrow = w + static_cast<std::size_t>(o) * spec.input_dim;
      for (int i = 0; i < spec.input_dim; ++i) prev[static_cast<std::size_t>(i)] += wrow[i] * d;
    }
    // Pull the gradient through the previous layer's activation.
    const auto& prev_spec = net.layers[static_cast<std::size_t>(l - 1)];
    const std::vector<double>& prev_out = acts[static_cast<std::size_t>(l)];
    switch (prev_spec.activation) {
      case Activation::relu:
        for (int i = 0; i < prev_spec.output_dim; ++i) {
          if (prev_out[static_cast<std::size_t>(i)] <= 0.0) prev[static_cast<std::size_t>(i)] = 0.0;
        }
        break;
      case Activation::identity:
        break;
      case Activation::softmax:
        // validate_layers forbids softmax before the final layer.
        throw std::logic_error("nn: softmax in a hidden layer");
    }
    delta = std::move(prev);
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "softmax") return Activation::softmax;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("nn: unknown activation '" + s + "'");
}

Sample one_hot_sample(std::vector<double> x, int label, int num_classes) {
  if (label < 0 || label >= num_classes) {
    throw std::invalid_argument("nn: label out of range for one-hot encoding");
  }
  Sample s;
  s.x = std::move(x);
  s.y.assign(static_cast<std::size_t>(num_classes), 0.0);
  s.y[static_cast<std::size_t>(label)] = 1.0;
  s.label = label;
  return s;
}

int param_count(std::span<const LayerSpec> layers) {
  int n = 0;
  for (const auto& l : layers) n += l.input_dim * l.output_dim + l.output_dim;
  return n;
}

void validate_layers(std::span<const LayerSpec> layers) {
  if (layers.empty()) throw std::invalid_argument("nn: empty layer spec");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].input_dim <= 0 || layers[i].output_dim <= 0) {
      throw std::invalid_argument("nn: layer dims must be positive");
    }
    if (i + 1 < layers.size()) {
      if (layers[i].output_dim != layers[i + 1].input_dim) {
        throw std::invalid_argument("nn: consecutive layer dims mismatch");
      }
      if (layers[i].activation == Activation::softmax) {
        throw std::invalid_argument("nn: softmax allowed only as the final layer");
      }
    }
  }
}

DenseNetwork init_network(std::span<const LayerSpec> spec, std::uint64_t seed) {
  validate_layers(spec);
  DenseNetwork net;
  net.layers.assign(spec.begin(), spec.end());
  net.params.assign(static_cast<std::size_t>(param_count(spec)), 0.0);
  Rng rng(seed);
  auto offs = layer_offsets(net.layers);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& ls = net.layers[l];
    const double limit = std::sqrt(6.0 / ls.input_dim);
    double* w = net.params.data() + offs[l].weights;
    const std::size_t n = static_cast<std::size_t>(ls.input_dim) * ls.output_dim;
    for (std::size_t i = 0; i < n; ++i) w[i] = rng.uniform(-limit, limit);
    // biases stay zero
  }
  return net;
}

std::vector<double> forward(const DenseNetwork& net, std::span<const double> input) {
  if (net.layers.empty()) throw std::invalid_argument("nn: empty network");
  if (static_cast<int>(input.size()) != net.input_dim()) {
    throw std::invalid_argument("nn: input length does not match first layer");
  }
  if (!all_finite(input)) throw std::invalid_argument("nn: non-finite input");
  auto acts = forward_trace(net, input);
  return std::move(acts.back());
}

std::vector<double> gradient(const DenseNetwork& net, std::span<const Sample> batch,
                             Loss loss) {
  if (batch.empty()) throw std::invalid_argument("nn: gradient over empty batch");
  auto offs = layer_offsets(net.layers);
  std::vector<double> grad(net.params.size(), 0.0);
  for (const Sample& s : batch) {
    if (static_cast<int>(s.x.size()) != net.input_dim()) {
      throw std::invalid_argument("nn: sample feature length does not match network input");
    }
    check_target(s, net.output_dim());
    backprop_sample(net, s, loss, offs, grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
  if (!all_finite(grad)) throw std::runtime_error("nn: non-finite gradient");
  return grad;
}

DenseNetwork train_epochs(const DenseNetwork& net, std::span<const Sample> train,
                          int epochs, const OptimizerConfig& opt, Loss loss,
                          std::uint64_t rng_seed, const EpochCallback& on_epoch) {
  if (epochs < 0) throw std::invalid_argument("nn: negative epoch count");
  if (epochs == 0) return net;
  if (train.empty()) throw std::invalid_argument("nn: training on an empty set");
  if (opt.learning_rate <= 0.0) throw std::invalid_argument("nn: learning rate must be positive");
  if (opt.batch_size <= 0) throw std::invalid_argument("nn: batch size must be positive");

  DenseNetwork cur = net;
  Rng rng(rng_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> velocity;
  std::vector<double> m1, m2;
  if (opt.kind == OptimizerConfig::Kind::sgd_momentum) {
    velocity.assign(cur.params.size(), 0.0);
  } else {
    m1.assign(cur.params.size(), 0.0);
    m2.assign(cur.params.size(), 0.0);
  }
  long long step = 0;

  std::vector<Sample> batch;
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      auto grad = gradient(cur, batch, loss);
      if (opt.kind == OptimizerConfig::Kind::sgd_momentum) {
        for (std::size_t i = 0; i < grad.size(); ++i) {
          velocity[i] = opt.momentum * velocity[i] - opt.learning_rate * grad[i];
          cur.params[i] += velocity[i];
        }
      } else {
        ++step;
        const double bc1 = 1.0 - std::pow(opt.adam_beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(opt.adam_beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < grad.size(); ++i) {
          m1[i] = opt.adam_beta1 * m1[i] + (1.0 - opt.adam_beta1) * grad[i];
          m2[i] = opt.adam_beta2 * m2[i] + (1.0 - opt.adam_beta2) * grad[i] * grad[i];
          const double mhat = m1[i] / bc1;
          const double vhat = m2[i] / bc2;
          cur.params[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.adam_epsilon);
        }
      }
    }
    if (on_epoch && !on_epoch(e + 1, cur)) break;
  }
  return cur;
}

DenseNetwork train_epochs(const DenseNetwork& net, std::span<const Sample> train,
                          int epochs, const OptimizerConfig& opt, Loss loss,
                          std::uint64_t rng_seed) {
  return train_epochs(net, train, epochs, opt, loss, rng_seed, EpochCallback{});
}

double sample_loss(std::span<const double> prediction, const Sample& s, Loss loss) {
  if (loss == Loss::cross_entropy) {
    double acc = 0.0;
    for (std::size_t j = 0; j < prediction.size(); ++j) {
      if (s.y[j] != 0.0) acc -= s.y[j] * std::log(std::max(prediction[j], kLogFloor));
    }
    return acc;
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < prediction.size(); ++j) {
    const double d = prediction[j] - s.y[j];
    acc += d * d;
  }
  return acc / static_cast<double>(prediction.size());
}

double mean_loss(const DenseNetwork& net, std::span<const Sample> data, Loss loss) {
  if (data.empty()) throw std::invalid_argument("nn: mean_loss over empty data");
  double acc = 0.0;
  for (const Sample& s : data) {
    check_target(s, net.output_dim());
    acc += sample_loss(forward(net, s.x), s, loss);
  }
  return acc / static_cast<double>(data.size());
}

EvalMetrics evaluate(const DenseNetwork& net, std::span<const Sample> data, Loss loss) {
  if (data.empty()) throw std::invalid_argument("nn: evaluate over empty data");
  const int classes = net.output_dim();
  std::vector<long long> tp(static_cast<std::size_t>(classes), 0);
  std::vector<long long> fp(static_cast<std::size_t>(classes), 0);
  std::vector<long long> fn(static_cast<std::size_t>(classes), 0);
  std::vector<bool> present(static_cast<std::size_t>(classes), false);
  double loss_acc = 0.0;
  long long correct = 0;

  for (const Sample& s : data) {
    if (s.label < 0 || s.label >= classes) {
      throw std::invalid_argument("nn: evaluate needs class labels in range");
    }
    auto out = forward(net, s.x);
    loss_acc += sample_loss(out, s, loss);
    int pred = 0;
    for (int j = 1; j < classes; ++j) {
      if (out[static_cast<std::size_t>(j)] > out[static_cast<std::size_t>(pred)]) pred = j;
    }
    present[static_cast<std::size_t>(s.label)] = true;
    if (pred == s.label) {
      ++correct;
      ++tp[static_cast<std::size_t>(pred)];
    } else {
      ++fp[static_cast<std::size_t>(pred)];
      ++fn[static_cast<std::size_t>(s.label)];
    }
  }

  EvalMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  m.mean_loss = loss_acc / static_cast<double>(data.size());
  int present_count = 0;
  for (int c = 0; c < classes; ++c) {
    if (!present[static_cast<std::size_t>(c)]) continue;
    ++present_count;
    const double tpc = static_cast<double>(tp[static_cast<std::size_t>(c)]);
    const double fpc = static_cast<double>(fp[static_cast<std::size_t>(c)]);
    const double fnc = static_cast<double>(fn[static_cast<std::size_t>(c)]);
    const double prec = (tpc + fpc) > 0.0 ? tpc / (tpc + fpc) : 0.0;
    const double rec = (tpc + fnc) > 0.0 ? tpc / (tpc + fnc) : 0.0;
    const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    m.macro_precision += prec;
    m.macro_recall += rec;
    m.macro_f1 += f1;
  }
  if (present_count > 0) {
    m.macro_precision /= present_count;
    m.macro_recall /= present_count;
    m.macro_f1 /= present_count;
  }
  return m;
}

std::vector<double> dfed_pow_weights(std::span<const double> losses) {
  if (losses.empty()) throw std::invalid_argument("nn: dfed_pow_weights on empty list");
  constexpr double kEps = 1e-8;
  std::vector<double> w(losses.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] < 0.0) throw std::invalid_argument("nn: negative loss in dfed_pow_weights");
    w[i] = 1.0 / std::max(losses[i], kEps);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

DenseNetwork merge_models(std::span<const DenseNetwork> models,
                          std::span<const double> weights) {
  if (models.empty()) throw std::invalid_argument("nn: merge of zero models");
  if (models.size() != weights.size()) {
    throw std::invalid_argument("nn: merge weight count does not match model count");
  }
  const DenseNetwork& first = models.front();
  for (const DenseNetwork& m : models) {
    if (m.layers.size() != first.layers.size() || m.params.size() != first.params.size()) {
      throw std::invalid_argument("nn: merging models with different layer specs");
    }
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      if (m.layers[l].input_dim != first.layers[l].input_dim ||
          m.layers[l].output_dim != first.layers[l].output_dim ||
          m.layers[l].activation != first.layers[l].activation) {
        throw std::invalid_argument("nn: merging models with different layer specs");
      }
    }
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (std::fabs(wsum - 1.0) > 1e-9) {
    throw std::invalid_argument("nn: merge weights must sum to 1");
  }
  DenseNetwork out;
  out.layers = first.layers;
  out.params.assign(first.params.size(), 0.0);
  for (std::size_t k = 0; k < models.size(); ++k) {
    const double w = weights[k];
    const auto& p = models[k].params;
    for (std::size_t i = 0; i < p.size(); ++i) out.params[i] += w * p[i];
  }
  return out;
}

}  // namespace ogl::nn
