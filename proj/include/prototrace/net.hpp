#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prototrace/dataio.hpp"
#include "prototrace/rng.hpp"

namespace prototrace {

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
           a.bias.size() == b.bias.size() && a.weights == b.weights && a.bias == b.bias;
  }
};

/// What the final layer emits.
enum class OutputKind {
  Softmax,    ///< class probabilities; hidden layers rectified
  Rectified,  ///< feature extractor; every layer rectified
};

/// Dense network with rectified-linear hidden units.
///
/// Dropout is applied after every rectified layer in training mode only
/// (inverted dropout, survivors scaled by 1/(1 - rate)).
struct FeedforwardNetwork {
  std::vector<std::size_t> layer_dims;
  std::vector<DenseLayer> layers;
  double dropout_rate = 0.0;
  /// Output class labels (softmax networks); sorted ascending.
  std::vector<std::string> classes;
  OutputKind output = OutputKind::Softmax;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t layer_count() const { return layers.size(); }
  bool rectified(std::size_t layer) const {
    return output == OutputKind::Rectified || layer + 1 < layers.size();
  }
  std::size_t parameter_count() const;

  void validate() const;

  friend bool operator==(const FeedforwardNetwork&, const FeedforwardNetwork&) = default;
};

/// Glorot-uniform weights, zero biases.
FeedforwardNetwork init_network(const std::vector<std::size_t>& layer_dims, std::uint64_t seed,
                                OutputKind output = OutputKind::Softmax,
                                std::vector<std::string> classes = {});
/// Same, drawing from a caller-owned stream (layers in order).
FeedforwardNetwork init_network(const std::vector<std::size_t>& layer_dims, Rng& rng,
                                OutputKind output = OutputKind::Softmax,
                                std::vector<std::string> classes = {});

/// Activations recorded by one forward pass.
///
/// activations[0] is the input and activations[l + 1] the output of layer l
/// (after dropout). For softmax networks the last entry holds probabilities
/// and `logits` the pre-softmax values.
struct ForwardPass {
  std::vector<Vector> activations;
  std::vector<Vector> pre_activations;
  std::vector<Vector> dropout_scale;  // empty when the layer had no dropout
  Vector logits;

  const Vector& output() const { return activations.back(); }
};

/// Inference when `dropout` is null, otherwise training with masks drawn from it.
ForwardPass forward(const FeedforwardNetwork& net, const Vector& x, Rng* dropout);
ForwardPass forward(const FeedforwardNetwork& net, const Vector& x, bool train_mode,
                    std::uint64_t dropout_seed);

/// Parameter gradients laid out like the network's layers.
struct Gradients {
  std::vector<DenseLayer> layers;

  static Gradients zeros_like(const FeedforwardNetwork& net);
  void add(const Gradients& other, double scale = 1.0);
};

/// Backpropagates `upstream`, the loss gradient with respect to the logits
/// (softmax networks) or the emitted features (rectified networks), and
/// accumulates into `grads`. Returns the gradient with respect to the input.
Vector backward(const FeedforwardNetwork& net, const ForwardPass& pass, const Vector& upstream,
                Gradients& grads);

/// Gradient of v . softmax(z) with respect to z, given p = softmax(z).
Vector softmax_vjp(const Vector& probabilities, const Vector& v);

/// Index of the largest entry; the earliest index wins ties.
std::size_t argmax(const Vector& v);

/// Cross-entropy -log p[target] computed from the logits.
double cross_entropy(const Vector& logits, std::size_t target);

/// Applies params -= step * grads.
void apply_gradients(FeedforwardNetwork& net, const Gradients& grads, double step);

struct TrainConfig {
  std::size_t batch_size = 10;
  double learning_rate = 0.001;
  double dropout_rate = 0.5;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> validation_accuracy;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  FeedforwardNetwork network;
  TrainHistory history;
};

/// Index of `label` in the network's classes.
std::size_t class_index(const FeedforwardNetwork& net, const std::string& label);

/// Mini-batch SGD on mean cross-entropy. When the network has no classes yet
/// they are taken from the training labels. History losses are full-batch,
/// inference-mode values recorded after every epoch.
TrainResult train(FeedforwardNetwork net, const RepresentationSet& train_set,
                  const std::optional<RepresentationSet>& validation, const TrainConfig& config);

/// Mean inference-mode cross-entropy over a labeled set.
double mean_loss(const FeedforwardNetwork& net, const RepresentationSet& set);
double accuracy(const FeedforwardNetwork& net, const RepresentationSet& set);

/// argmax class; ties go to the earlier (lexicographically smaller) class.
std::string classify(const FeedforwardNetwork& net, const Vector& x);

/// Last hidden layer (or, for rectified networks, the output) at inference.
Vector embed(const FeedforwardNetwork& net, const Vector& x);
RepresentationSet extract_representations(const FeedforwardNetwork& net,
                                          const RepresentationSet& set);

/// Max relative error between `analytic` and central differences of the mean
/// cross-entropy over `samples`, with relative error
/// |a - f| / max(|a|, |f|, 1e-12).
double gradient_error(const FeedforwardNetwork& net, const RepresentationSet& samples,
                      double epsilon, const Gradients& analytic);
/// Analytic mean cross-entropy gradient (dropout disabled).
Gradients loss_gradients(const FeedforwardNetwork& net, const RepresentationSet& samples);
double gradient_check(const FeedforwardNetwork& net, const RepresentationSet& samples,
                      double epsilon);

}  // namespace prototrace
