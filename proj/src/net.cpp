#include "prototrace/net.hpp"

#include <algorithm>
#include <cmath>

#include "prototrace/error.hpp"

namespace prototrace {

std::size_t FeedforwardNetwork::parameter_count() const {
  std::size_t total = 0;
  for (const DenseLayer& l : layers) total += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return total;
}

void FeedforwardNetwork::validate() const {
  if (layer_dims.size() < 2) throw InvalidArgument("network needs at least 2 layer dims");
  for (std::size_t d : layer_dims) {
    if (d == 0) throw InvalidArgument("layer dims must be positive");
  }
  if (layers.size() != layer_dims.size() - 1) {
    throw InvalidArgument("network has " + std::to_string(layers.size()) + " layers for " +
                          std::to_string(layer_dims.size()) + " layer dims");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(layer_dims[l + 1]);
    const auto in = static_cast<Eigen::Index>(layer_dims[l]);
    if (layers[l].weights.rows() != out || layers[l].weights.cols() != in ||
        layers[l].bias.size() != out) {
      throw DimensionError("layer " + std::to_string(l) + " shape does not match layer dims");
    }
    if (!layers[l].weights.allFinite() || !layers[l].bias.allFinite()) {
      throw InvalidArgument("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidArgument("dropout rate must lie in [0, 1)");
  }
  if (output == OutputKind::Softmax && !classes.empty() && classes.size() != output_dim()) {
    throw DimensionError("network has " + std::to_string(classes.size()) + " classes but " +
                         std::to_string(output_dim()) + " outputs");
  }
  if (!std::is_sorted(classes.begin(), classes.end()) ||
      std::adjacent_find(classes.begin(), classes.end()) != classes.end()) {
    throw InvalidArgument("network classes must be sorted and distinct");
  }
}

FeedforwardNetwork init_network(const std::vector<std::size_t>& layer_dims, std::uint64_t seed,
                                OutputKind output, std::vector<std::string> classes) {
  Rng rng(seed);
  return init_network(layer_dims, rng, output, std::move(classes));
}

FeedforwardNetwork init_network(const std::vector<std::size_t>& layer_dims, Rng& rng,
                                OutputKind output, std::vector<std::string> classes) {
  if (layer_dims.size() < 2) throw InvalidArgument("network needs at least 2 layer dims");
  FeedforwardNetwork net;
  net.layer_dims = layer_dims;
  net.output = output;
  net.classes = std::move(classes);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(layer_dims[l]);
    const auto out = static_cast<Eigen::Index>(layer_dims[l + 1]);
    if (in == 0 || out == 0) throw InvalidArgument("layer dims must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    }
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

// ---------------------------------------------------------------------------
// Forward / backward

ForwardPass forward(const FeedforwardNetwork& net, const Vector& x, Rng* dropout) {
  if (static_cast<std::size_t>(x.size()) != net.input_dim()) {
    throw DimensionError("input has dim " + std::to_string(x.size()) + ", network expects dim " +
                         std::to_string(net.input_dim()));
  }
  ForwardPass pass;
  pass.activations.reserve(net.layers.size() + 1);
  pass.activations.push_back(x);
  const bool drop = dropout != nullptr && net.dropout_rate > 0.0;
  const double keep_scale = 1.0 / (1.0 - net.dropout_rate);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& layer = net.layers[l];
    Vector z = layer.weights * pass.activations.back() + layer.bias;
    Vector a;
    Vector scale;
    if (net.rectified(l)) {
      a = z.cwiseMax(0.0);
      if (drop) {
        scale.resize(a.size());
        for (Eigen::Index j = 0; j < a.size(); ++j) {
          scale[j] = dropout->bernoulli(net.dropout_rate) ? 0.0 : keep_scale;
        }
        a = a.cwiseProduct(scale);
      }
    } else {
      pass.logits = z;
      const double top = z.maxCoeff();
      a = (z.array() - top).exp();
      a /= a.sum();
    }
    pass.pre_activations.push_back(std::move(z));
    pass.dropout_scale.push_back(std::move(scale));
    pass.activations.push_back(std::move(a));
  }
  return pass;
}

ForwardPass forward(const FeedforwardNetwork& net, const Vector& x, bool train_mode,
                    std::uint64_t dropout_seed) {
  if (!train_mode) return forward(net, x, nullptr);
  Rng rng(dropout_seed);
  return forward(net, x, &rng);
}

Gradients Gradients::zeros_like(const FeedforwardNetwork& net) {
  Gradients g;
  for (const DenseLayer& l : net.layers) {
    g.layers.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
  }
  return g;
}

void Gradients::add(const Gradients& other, double scale) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights += scale * other.layers[l].weights;
    layers[l].bias += scale * other.layers[l].bias;
  }
}

Vector backward(const FeedforwardNetwork& net, const ForwardPass& pass, const Vector& upstream,
                Gradients& grads) {
  const std::size_t last = net.layers.size() - 1;
  Vector delta = upstream;
  auto through_rectifier = [&](std::size_t l, Vector d) {
    d = d.cwiseProduct((pass.pre_activations[l].array() > 0.0).cast<double>().matrix());
    if (pass.dropout_scale[l].size() > 0) d = d.cwiseProduct(pass.dropout_scale[l]);
    return d;
  };
  if (net.rectified(last)) delta = through_rectifier(last, delta);
  for (std::size_t l = last + 1; l-- > 0;) {
    grads.layers[l].weights.noalias() += delta * pass.activations[l].transpose();
    grads.layers[l].bias += delta;
    Vector below = net.layers[l].weights.transpose() * delta;
    if (l == 0) return below;
    delta = through_rectifier(l - 1, std::move(below));
  }
  return delta;
}

Vector softmax_vjp(const Vector& p, const Vector& v) {
  return p.cwiseProduct(v.array().matrix() - Vector::Constant(p.size(), p.dot(v)));
}

std::size_t argmax(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<std::size_t>(best);
}

double cross_entropy(const Vector& logits, std::size_t target) {
  const double top = logits.maxCoeff();
  const double log_sum = top + std::log((logits.array() - top).exp().sum());
  return log_sum - logits[static_cast<Eigen::Index>(target)];
}

void apply_gradients(FeedforwardNetwork& net, const Gradients& grads, double step) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    net.layers[l].weights -= step * grads.layers[l].weights;
    net.layers[l].bias -= step * grads.layers[l].bias;
  }
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be finite and non-negative");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidArgument("dropout rate must lie in [0, 1)");
  }
  if (epochs == 0) throw InvalidArgument("epochs must be positive");
}

std::size_t class_index(const FeedforwardNetwork& net, const std::string& label) {
  const auto it = std::lower_bound(net.classes.begin(), net.classes.end(), label);
  if (it == net.classes.end() || *it != label) {
    throw InvalidArgument("unknown label '" + label + "'");
  }
  return static_cast<std::size_t>(it - net.classes.begin());
}

namespace {

std::vector<std::size_t> targets_of(const FeedforwardNetwork& net, const RepresentationSet& set) {
  std::vector<std::size_t> targets;
  targets.reserve(set.size());
  for (const Item& item : set.items()) {
    if (!item.label) throw InvalidArgument("item '" + item.id + "' is unlabeled");
    targets.push_back(class_index(net, *item.label));
  }
  return targets;
}

void check_input_dim(const FeedforwardNetwork& net, const RepresentationSet& set) {
  if (set.dim() != net.input_dim()) {
    throw DimensionError("set has dim " + std::to_string(set.dim()) + ", network expects dim " +
                         std::to_string(net.input_dim()));
  }
}

void require_classifier(const FeedforwardNetwork& net) {
  if (net.output != OutputKind::Softmax) throw InvalidArgument("network is not a classifier");
  if (net.classes.empty()) throw InvalidArgument("network has no classes");
}

}  // namespace

double mean_loss(const FeedforwardNetwork& net, const RepresentationSet& set) {
  require_classifier(net);
  check_input_dim(net, set);
  const auto targets = targets_of(net, set);
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    total += cross_entropy(forward(net, set[i].vector, nullptr).logits, targets[i]);
  }
  return set.empty() ? 0.0 : total / static_cast<double>(set.size());
}

std::string classify(const FeedforwardNetwork& net, const Vector& x) {
  require_classifier(net);
  return net.classes[argmax(forward(net, x, nullptr).output())];
}

double accuracy(const FeedforwardNetwork& net, const RepresentationSet& set) {
  require_classifier(net);
  check_input_dim(net, set);
  std::size_t correct = 0;
  for (const Item& item : set.items()) {
    if (!item.label) throw InvalidArgument("item '" + item.id + "' is unlabeled");
    if (classify(net, item.vector) == *item.label) ++correct;
  }
  return set.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(set.size());
}

TrainResult train(FeedforwardNetwork net, const RepresentationSet& train_set,
                  const std::optional<RepresentationSet>& validation, const TrainConfig& config) {
  config.validate();
  net.validate();
  if (net.output != OutputKind::Softmax) throw InvalidArgument("only classifiers can be trained");
  if (train_set.empty()) throw InvalidArgument("training set is empty");
  check_input_dim(net, train_set);
  if (!train_set.fully_labeled()) throw InvalidArgument("training set must be labeled");
  if (net.classes.empty()) {
    net.classes = train_set.classes();
    if (net.classes.size() != net.output_dim()) {
      throw DimensionError("training set has " + std::to_string(net.classes.size()) +
                           " classes but the network has " + std::to_string(net.output_dim()) +
                           " outputs");
    }
  }
  const auto targets = targets_of(net, train_set);
  if (validation) {
    check_input_dim(net, *validation);
    targets_of(net, *validation);
  }
  net.dropout_rate = config.dropout_rate;

  TrainResult result;
  Rng rng(config.seed);
  const std::size_t n = train_set.size();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      Gradients grads = Gradients::zeros_like(net);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        const ForwardPass pass = forward(net, train_set[i].vector, &rng);
        Vector upstream = pass.output();
        upstream[static_cast<Eigen::Index>(targets[i])] -= 1.0;
        backward(net, pass, upstream, grads);
      }
      apply_gradients(net, grads, config.learning_rate / static_cast<double>(stop - start));
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = mean_loss(net, train_set);
    record.train_accuracy = accuracy(net, train_set);
    if (validation && !validation->empty()) record.validation_accuracy = accuracy(net, *validation);
    result.history.epochs.push_back(record);
  }
  result.network = std::move(net);
  return result;
}

// ---------------------------------------------------------------------------
// Representation extraction

Vector embed(const FeedforwardNetwork& net, const Vector& x) {
  if (net.output == OutputKind::Rectified) return forward(net, x, nullptr).output();
  if (net.layers.size() < 2) throw InvalidArgument("network has no hidden layer to extract");
  const ForwardPass pass = forward(net, x, nullptr);
  return pass.activations[pass.activations.size() - 2];
}

RepresentationSet extract_representations(const FeedforwardNetwork& net,
                                          const RepresentationSet& set) {
  if (net.output == OutputKind::Softmax && net.layers.size() < 2) {
    throw InvalidArgument("network has no hidden layer to extract");
  }
  check_input_dim(net, set);
  const std::size_t width =
      net.output == OutputKind::Rectified ? net.output_dim() : net.layer_dims[net.layer_dims.size() - 2];
  std::vector<Item> items;
  items.reserve(set.size());
  for (const Item& item : set.items()) items.push_back({item.id, item.label, embed(net, item.vector)});
  return {width, std::move(items)};
}

// ---------------------------------------------------------------------------
// Gradient checking

Gradients loss_gradients(const FeedforwardNetwork& net, const RepresentationSet& samples) {
  require_classifier(net);
  check_input_dim(net, samples);
  if (samples.empty()) throw InvalidArgument("gradient check needs at least one sample");
  const auto targets = targets_of(net, samples);
  Gradients grads = Gradients::zeros_like(net);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ForwardPass pass = forward(net, samples[i].vector, nullptr);
    Vector upstream = pass.output();
    upstream[static_cast<Eigen::Index>(targets[i])] -= 1.0;
    backward(net, pass, upstream, grads);
  }
  for (DenseLayer& l : grads.layers) {
    l.weights /= static_cast<double>(samples.size());
    l.bias /= static_cast<double>(samples.size());
  }
  return grads;
}

double gradient_error(const FeedforwardNetwork& net, const RepresentationSet& samples,
                      double epsilon, const Gradients& analytic) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  FeedforwardNetwork probe = net;
  double worst = 0.0;
  auto check = [&](double& param, double grad) {
    const double saved = param;
    param = saved + epsilon;
    const double up = mean_loss(probe, samples);
    param = saved - epsilon;
    const double down = mean_loss(probe, samples);
    param = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double scale = std::max({std::abs(grad), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(grad - numeric) / scale);
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    DenseLayer& layer = probe.layers[l];
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        check(layer.weights(r, c), analytic.layers[l].weights(r, c));
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) check(layer.bias[r], analytic.layers[l].bias[r]);
  }
  return worst;
}

double gradient_check(const FeedforwardNetwork& net, const RepresentationSet& samples,
                      double epsilon) {
  FeedforwardNetwork inference = net;
  inference.dropout_rate = 0.0;
  return gradient_error(inference, samples, epsilon, loss_gradients(inference, samples));
}

}  // namespace prototrace
