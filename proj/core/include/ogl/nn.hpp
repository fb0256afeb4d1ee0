#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ogl::nn {

enum class Activation { relu, softmax, identity };
enum class Loss { cross_entropy, mse };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  int input_dim = 0;
  int output_dim = 0;
  Activation activation = Activation::relu;
};

/// One labeled sample. `y` is the training target: a one-hot vector for
/// classification, an arbitrary real vector for regression. `label` carries
/// the class index for classification samples and is -1 otherwise.
struct Sample {
  std::vector<double> x;
  std::vector<double> y;
  int label = -1;
};

Sample one_hot_sample(std::vector<double> x, int label, int num_classes);

/// Feedforward dense network stored as one flat float64 parameter vector,
/// laid out per layer as a row-major [output_dim x input_dim] weight block
/// followed by the bias vector.
struct DenseNetwork {
  std::vector<LayerSpec> layers;
  std::vector<double> params;

  int param_count() const { return static_cast<int>(params.size()); }
  int input_dim() const { return layers.empty() ? 0 : layers.front().input_dim; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().output_dim; }
};

int param_count(std::span<const LayerSpec> layers);

/// Throws if dims are non-positive, consecutive dims mismatch, or softmax
/// appears before the final layer.
void validate_layers(std::span<const LayerSpec> layers);

/// He-uniform weights, zero biases. Pure function of (spec, seed): identical
/// arguments give bit-identical parameter vectors.
DenseNetwork init_network(std::span<const LayerSpec> spec, std::uint64_t seed);

std::vector<double> forward(const DenseNetwork& net, std::span<const double> input);

/// Mean over the batch of per-sample loss gradients w.r.t. every parameter.
std::vector<double> gradient(const DenseNetwork& net, std::span<const Sample> batch,
                             Loss loss);

struct OptimizerConfig {
  enum class Kind { sgd_momentum, adam };
  Kind kind = Kind::sgd_momentum;
  double learning_rate = 0.01;
  double momentum = 0.0;        // sgd only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 32;
};

/// Runs `epochs` full passes of seeded-shuffle mini-batch training and
/// returns the updated network. epochs == 0 returns `net` unchanged.
/// Optimizer state (momentum / Adam moments) is fresh per call.
DenseNetwork train_epochs(const DenseNetwork& net, std::span<const Sample> train,
                          int epochs, const OptimizerConfig& opt, Loss loss,
                          std::uint64_t rng_seed);

/// Called after each epoch with the 1-based epoch index and the network as of
/// that epoch; return false to stop training there.
using EpochCallback = std::function<bool(int, const DenseNetwork&)>;

/// Same training loop with a per-epoch observer. Optimizer state carries
/// across all epochs of the call, so an early-stopping caller sees the same
/// trajectory a plain `epochs`-long run would produce.
DenseNetwork train_epochs(const DenseNetwork& net, std::span<const Sample> train,
                          int epochs, const OptimizerConfig& opt, Loss loss,
                          std::uint64_t rng_seed, const EpochCallback& on_epoch);

struct EvalMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double mean_loss = 0.0;
};

double sample_loss(std::span<const double> prediction, const Sample& s, Loss loss);
double mean_loss(const DenseNetwork& net, std::span<const Sample> data, Loss loss);

/// Classification metrics on argmax predictions; ties break toward the lowest
/// class index. Macro averages run over the classes present in `data`.
EvalMetrics evaluate(const DenseNetwork& net, std::span<const Sample> data, Loss loss);

/// Inverse-loss merge weights: w_i = (1/max(l_i, eps)) normalized to sum 1,
/// eps = 1e-8. Defined for zero losses via the clamp.
std::vector<double> dfed_pow_weights(std::span<const double> losses);

/// Componentwise convex combination of parameter vectors. All models must
/// share one layer spec; weights must sum to 1 within 1e-9.
DenseNetwork merge_models(std::span<const DenseNetwork> models,
                          std::span<const double> weights);

}  // namespace ogl::nn
