#include "prototrace/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "prototrace/error.hpp"

namespace prototrace {

std::string to_string(Kernel kernel) { return kernel == Kernel::Linear ? "linear" : "rbf"; }

Kernel parse_kernel(const std::string& name) {
  if (name == "linear") return Kernel::Linear;
  if (name == "rbf") return Kernel::Rbf;
  throw InvalidArgument("unknown kernel '" + name + "' (expected linear or rbf)");
}

namespace {

void check_pair(const Matrix& x, const Matrix& y, Eigen::Index min_rows) {
  if (x.rows() < min_rows || y.rows() < min_rows) {
    throw InvalidArgument("discrepancy needs at least " + std::to_string(min_rows) +
                          " samples on each side");
  }
  if (x.cols() != y.cols()) {
    throw DimensionError("samples have dims " + std::to_string(x.cols()) + " and " +
                         std::to_string(y.cols()));
  }
}

double mean_kernel(const Matrix& a, const Matrix& b, Kernel kernel, double sigma) {
  if (kernel == Kernel::Linear) return (a * b.transpose()).mean();
  const double scale = 1.0 / (2.0 * sigma * sigma);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      total += std::exp(-(a.row(i) - b.row(j)).squaredNorm() * scale);
    }
  }
  return total / static_cast<double>(a.rows() * b.rows());
}

Matrix covariance(const Matrix& x) {
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

// Gradient of the mean kernel value over (a_i, b_j) pairs with respect to
// each row of a, where the pair sum is taken over `a` against `b`.
Matrix mean_kernel_grad(const Matrix& a, const Matrix& b, Kernel kernel, double sigma) {
  Matrix grad = Matrix::Zero(a.rows(), a.cols());
  const double norm = 1.0 / static_cast<double>(a.rows() * b.rows());
  if (kernel == Kernel::Linear) {
    grad.rowwise() = b.colwise().sum() * norm;
    return grad;
  }
  const double inv_var = 1.0 / (sigma * sigma);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const Eigen::RowVectorXd diff = a.row(i) - b.row(j);
      const double k = std::exp(-0.5 * diff.squaredNorm() * inv_var);
      grad.row(i) -= (k * inv_var * norm) * diff;
    }
  }
  return grad;
}

}  // namespace

double median_bandwidth(const Matrix& x, const Matrix& y) {
  Matrix all(x.rows() + y.rows(), x.cols());
  all << x, y;
  std::vector<double> distances;
  for (Eigen::Index i = 0; i < all.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < all.rows(); ++j) {
      const double d = (all.row(i) - all.row(j)).norm();
      if (d > 0.0) distances.push_back(d);
    }
  }
  if (distances.empty()) return 1.0;
  const std::size_t mid = distances.size() / 2;
  std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid),
                   distances.end());
  const double upper = distances[mid];
  if (distances.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double mmd2(const Matrix& x, const Matrix& y, Kernel kernel, std::optional<double> bandwidth) {
  check_pair(x, y, 1);
  double sigma = 1.0;
  if (kernel == Kernel::Rbf) {
    sigma = bandwidth ? *bandwidth : median_bandwidth(x, y);
    if (!(sigma > 0.0)) throw InvalidArgument("rbf bandwidth must be positive");
  }
  return mean_kernel(x, x, kernel, sigma) + mean_kernel(y, y, kernel, sigma) -
         2.0 * mean_kernel(x, y, kernel, sigma);
}

double coral(const Matrix& x, const Matrix& y) {
  check_pair(x, y, 2);
  const double d = static_cast<double>(x.cols());
  return (covariance(x) - covariance(y)).squaredNorm() / (4.0 * d * d);
}

double class_discrepancy(const std::vector<std::vector<Vector>>& probabilities) {
  if (probabilities.empty()) throw InvalidArgument("class discrepancy needs target samples");
  const std::size_t heads = probabilities.front().size();
  if (heads < 2) throw InvalidArgument("class discrepancy needs at least 2 heads");
  const double pairs = static_cast<double>(heads * (heads - 1) / 2);
  double total = 0.0;
  for (const auto& sample : probabilities) {
    if (sample.size() != heads) throw InvalidArgument("every sample needs one vector per head");
    for (const Vector& p : sample) {
      if (p.size() != sample.front().size()) throw DimensionError("probability vectors differ in length");
      if (std::abs(p.sum() - 1.0) > 1e-6 || (p.array() < -1e-12).any()) {
        throw InvalidArgument("malformed probability vector");
      }
    }
    double sample_total = 0.0;
    for (std::size_t a = 0; a < heads; ++a) {
      for (std::size_t b = a + 1; b < heads; ++b) {
        sample_total += (sample[a] - sample[b]).lpNorm<1>();
      }
    }
    total += sample_total / pairs;
  }
  return total / static_cast<double>(probabilities.size());
}

DiscrepancyReport discrepancy(const Matrix& x, const Matrix& y, Kernel kernel,
                              std::optional<double> bandwidth) {
  DiscrepancyReport report;
  report.kernel = kernel;
  if (kernel == Kernel::Rbf) report.bandwidth = bandwidth ? *bandwidth : median_bandwidth(x, y);
  report.mmd2 = mmd2(x, y, kernel, report.bandwidth);
  report.coral = coral(x, y);
  return report;
}

DiscrepancyGradients discrepancy_gradients(const Matrix& x, const Matrix& y, Kernel kernel,
                                           std::optional<double> bandwidth) {
  check_pair(x, y, 1);
  DiscrepancyGradients g;
  if (kernel == Kernel::Rbf) {
    g.bandwidth = bandwidth ? *bandwidth : median_bandwidth(x, y);
    if (!(g.bandwidth > 0.0)) throw InvalidArgument("rbf bandwidth must be positive");
  }
  // d/dx_i of mean k(X,X) counts x_i in both slots, hence the factor 2.
  g.mmd2_x = 2.0 * mean_kernel_grad(x, x, kernel, g.bandwidth) -
             2.0 * mean_kernel_grad(x, y, kernel, g.bandwidth);
  g.mmd2_y = 2.0 * mean_kernel_grad(y, y, kernel, g.bandwidth) -
             2.0 * mean_kernel_grad(y, x, kernel, g.bandwidth);

  g.coral_x = Matrix::Zero(x.rows(), x.cols());
  g.coral_y = Matrix::Zero(y.rows(), y.cols());
  if (x.rows() >= 2 && y.rows() >= 2) {
    const double d = static_cast<double>(x.cols());
    const Matrix diff = covariance(x) - covariance(y);
    const Matrix xc = x.rowwise() - x.colwise().mean();
    const Matrix yc = y.rowwise() - y.colwise().mean();
    g.coral_x = xc * diff / (static_cast<double>(x.rows() - 1) * d * d);
    g.coral_y = -yc * diff / (static_cast<double>(y.rows() - 1) * d * d);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Model

void DAModel::validate() const {
  extractor.validate();
  if (extractor.output != OutputKind::Rectified) {
    throw InvalidArgument("extractor must be a rectified feature network");
  }
  if (heads.empty()) throw InvalidArgument("adaptation model needs at least one head");
  if (heads.size() != sources.size()) throw InvalidArgument("one source tag per head required");
  std::set<std::string> tags(sources.begin(), sources.end());
  if (tags.size() != sources.size()) throw InvalidArgument("source tags must be unique");
  for (const FeedforwardNetwork& head : heads) {
    head.validate();
    if (head.output != OutputKind::Softmax) throw InvalidArgument("heads must be softmax networks");
    if (head.input_dim() != extractor.output_dim()) {
      throw DimensionError("head input dim " + std::to_string(head.input_dim()) +
                           " does not match extractor feature dim " +
                           std::to_string(extractor.output_dim()));
    }
    if (head.classes != heads.front().classes || head.classes.empty()) {
      throw InvalidArgument("all heads must share a non-empty class list");
    }
  }
  if (!(lambda_feat >= 0.0) || !(lambda_class >= 0.0)) {
    throw InvalidArgument("loss weights must be non-negative");
  }
  if (bandwidth && !(*bandwidth > 0.0)) throw InvalidArgument("rbf bandwidth must be positive");
}

void DAConfig::validate() const {
  train.validate();
  if (!(lambda_feat >= 0.0) || !(lambda_class >= 0.0)) {
    throw InvalidArgument("loss weights must be non-negative");
  }
  if (bandwidth && !(*bandwidth > 0.0)) throw InvalidArgument("rbf bandwidth must be positive");
  if (extractor_hidden.empty()) throw InvalidArgument("extractor needs at least one layer");
}

DAModel init_da_model(std::size_t input_dim, const std::vector<std::string>& classes,
                      const std::vector<std::string>& sources, const DAConfig& config) {
  Rng rng(config.train.seed);
  DAModel model;
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), config.extractor_hidden.begin(), config.extractor_hidden.end());
  model.extractor = init_network(dims, rng, OutputKind::Rectified);
  model.extractor.dropout_rate = config.train.dropout_rate;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    std::vector<std::size_t> head_dims{model.extractor.output_dim()};
    head_dims.insert(head_dims.end(), config.head_hidden.begin(), config.head_hidden.end());
    head_dims.push_back(classes.size());
    FeedforwardNetwork head = init_network(head_dims, rng, OutputKind::Softmax, classes);
    head.dropout_rate = config.train.dropout_rate;
    model.heads.push_back(std::move(head));
  }
  model.sources = sources;
  model.lambda_feat = config.lambda_feat;
  model.lambda_class = config.lambda_class;
  model.kernel = config.kernel;
  model.bandwidth = config.bandwidth;
  model.validate();
  return model;
}

namespace {

Matrix features_of(const FeedforwardNetwork& extractor, const RepresentationSet& set) {
  Matrix features(static_cast<Eigen::Index>(set.size()),
                  static_cast<Eigen::Index>(extractor.output_dim()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    features.row(static_cast<Eigen::Index>(i)) =
        forward(extractor, set[i].vector, nullptr).output().transpose();
  }
  return features;
}

double feature_term(const Matrix& fs, const Matrix& ft, Kernel kernel,
                    std::optional<double> bandwidth) {
  double value = mmd2(fs, ft, kernel, bandwidth);
  if (fs.rows() >= 2 && ft.rows() >= 2) value += coral(fs, ft);
  return value;
}

std::vector<std::string> check_sources(const std::vector<RepresentationSet>& sources,
                                       const std::vector<std::string>& tags,
                                       const RepresentationSet& target) {
  if (sources.empty()) throw InvalidArgument("adaptation needs at least one source");
  if (tags.size() != sources.size()) throw InvalidArgument("one tag per source required");
  const std::vector<std::string> classes = sources.front().classes();
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const RepresentationSet& s = sources[i];
    if (s.empty()) throw InvalidArgument("source '" + tags[i] + "' is empty");
    if (!s.fully_labeled()) throw InvalidArgument("source '" + tags[i] + "' has unlabeled items");
    if (s.dim() != target.dim()) {
      throw DimensionError("source '" + tags[i] + "' has dim " + std::to_string(s.dim()) +
                           ", target has dim " + std::to_string(target.dim()));
    }
    if (s.classes() != classes) {
      throw InvalidArgument("source '" + tags[i] + "' does not share the class set of '" +
                            tags.front() + "'");
    }
  }
  if (classes.size() < 2) throw InvalidArgument("adaptation needs at least 2 classes");
  if (target.empty()) throw InvalidArgument("target set is empty");
  for (const std::string& label : target.classes()) {
    if (!std::binary_search(classes.begin(), classes.end(), label)) {
      throw InvalidArgument("target label '" + label + "' is not a source class");
    }
  }
  return classes;
}

}  // namespace

DALossBreakdown da_objective(const DAModel& model, const std::vector<RepresentationSet>& sources,
                             const RepresentationSet& target) {
  const double n_sources = static_cast<double>(sources.size());
  DALossBreakdown b;
  b.lambda_feat = model.lambda_feat;
  b.lambda_class = model.lambda_class;
  const Matrix ft = features_of(model.extractor, target);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const FeedforwardNetwork& head = model.heads[i];
    const Matrix fs = features_of(model.extractor, sources[i]);
    double ce = 0.0;
    for (std::size_t k = 0; k < sources[i].size(); ++k) {
      const ForwardPass pass = forward(head, fs.row(static_cast<Eigen::Index>(k)).transpose(), nullptr);
      ce += cross_entropy(pass.logits, class_index(head, *sources[i][k].label));
    }
    b.classification += ce / static_cast<double>(sources[i].size()) / n_sources;
    b.feature_discrepancy += feature_term(fs, ft, model.kernel, model.bandwidth) / n_sources;
  }
  if (model.heads.size() >= 2) {
    std::vector<std::vector<Vector>> probs(target.size());
    for (std::size_t t = 0; t < target.size(); ++t) {
      const Vector f = ft.row(static_cast<Eigen::Index>(t)).transpose();
      for (const FeedforwardNetwork& head : model.heads) probs[t].push_back(forward(head, f, nullptr).output());
    }
    b.class_discrepancy = class_discrepancy(probs);
  }
  b.total = b.classification + b.lambda_feat * b.feature_discrepancy +
            b.lambda_class * b.class_discrepancy;
  return b;
}

DATrainResult da_train(const std::vector<RepresentationSet>& sources,
                       const std::vector<std::string>& source_tags,
                       const RepresentationSet& target, const DAConfig& config) {
  config.validate();
  const auto classes = check_sources(sources, source_tags, target);

  DATrainResult result;
  DAModel& model = result.model;
  model = init_da_model(target.dim(), classes, source_tags, config);

  const std::size_t n_src = sources.size();
  const double inv_sources = 1.0 / static_cast<double>(n_src);
  const std::size_t batch = config.train.batch_size;
  const double lr = config.train.learning_rate;
  const bool use_feat = config.lambda_feat > 0.0;
  const bool use_class = config.lambda_class > 0.0 && n_src >= 2;

  std::vector<std::vector<std::size_t>> targets(n_src);
  std::size_t n_max = 0;
  for (std::size_t i = 0; i < n_src; ++i) {
    for (const Item& item : sources[i].items()) targets[i].push_back(class_index(model.heads[i], *item.label));
    n_max = std::max(n_max, sources[i].size());
  }

  // Source batches and dropout draw from `rng`; target batches and their
  // dropout from `target_rng`, so the source path is independent of the target.
  Rng rng(config.train.seed);
  Rng target_rng(config.train.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t feat_dim = model.extractor.output_dim();

  for (std::size_t epoch = 1; epoch <= config.train.epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> order(n_src);
    for (std::size_t i = 0; i < n_src; ++i) order[i] = rng.permutation(sources[i].size());
    const auto target_order = target_rng.permutation(target.size());

    for (std::size_t start = 0; start < n_max; start += batch) {
      const std::size_t step_size = std::min(batch, n_max - start);
      Gradients ext_grads = Gradients::zeros_like(model.extractor);
      std::vector<Gradients> head_grads;
      for (const auto& head : model.heads) head_grads.push_back(Gradients::zeros_like(head));

      // Source forward passes and classification gradients w.r.t. features.
      std::vector<std::vector<ForwardPass>> ext_passes(n_src);
      std::vector<Matrix> feature_grad(n_src);
      std::vector<Matrix> source_features(n_src);
      for (std::size_t i = 0; i < n_src; ++i) {
        const std::size_t n_i = sources[i].size();
        const std::size_t b_i = std::min(step_size, n_i);
        source_features[i].resize(static_cast<Eigen::Index>(b_i), static_cast<Eigen::Index>(feat_dim));
        feature_grad[i].resize(static_cast<Eigen::Index>(b_i), static_cast<Eigen::Index>(feat_dim));
        const double ce_scale = inv_sources / static_cast<double>(b_i);
        for (std::size_t k = 0; k < b_i; ++k) {
          const std::size_t idx = order[i][(start + k) % n_i];
          ForwardPass ep = forward(model.extractor, sources[i][idx].vector, &rng);
          const ForwardPass hp = forward(model.heads[i], ep.output(), &rng);
          Vector upstream = hp.output();
          upstream[static_cast<Eigen::Index>(targets[i][idx])] -= 1.0;
          upstream *= ce_scale;
          const Vector dfeat = backward(model.heads[i], hp, upstream, head_grads[i]);
          source_features[i].row(static_cast<Eigen::Index>(k)) = ep.output().transpose();
          feature_grad[i].row(static_cast<Eigen::Index>(k)) = dfeat.transpose();
          ext_passes[i].push_back(std::move(ep));
        }
      }

      std::vector<ForwardPass> target_passes;
      Matrix target_features, target_grad;
      if (use_feat || use_class) {
        const std::size_t b_t = std::min(batch, target.size());
        target_features.resize(static_cast<Eigen::Index>(b_t), static_cast<Eigen::Index>(feat_dim));
        for (std::size_t k = 0; k < b_t; ++k) {
          const std::size_t idx = target_order[(start + k) % target.size()];
          target_passes.push_back(forward(model.extractor, target[idx].vector, &target_rng));
          target_features.row(static_cast<Eigen::Index>(k)) = target_passes.back().output().transpose();
        }
        target_grad = Matrix::Zero(target_features.rows(), target_features.cols());
      }

      if (use_feat) {
        const double w = config.lambda_feat * inv_sources;
        for (std::size_t i = 0; i < n_src; ++i) {
          const DiscrepancyGradients g =
              discrepancy_gradients(source_features[i], target_features, config.kernel, config.bandwidth);
          feature_grad[i] += w * (g.mmd2_x + g.coral_x);
          target_grad += w * (g.mmd2_y + g.coral_y);
        }
      }

      if (use_class) {
        const std::size_t heads = model.heads.size();
        const double pairs = static_cast<double>(heads * (heads - 1) / 2);
        const double w = config.lambda_class / (pairs * static_cast<double>(target_features.rows()));
        for (Eigen::Index t = 0; t < target_features.rows(); ++t) {
          const Vector f = target_features.row(t).transpose();
          std::vector<ForwardPass> hp;
          for (const auto& head : model.heads) hp.push_back(forward(head, f, &target_rng));
          for (std::size_t a = 0; a < heads; ++a) {
            Vector dprob = Vector::Zero(hp[a].output().size());
            for (std::size_t b = 0; b < heads; ++b) {
              if (a == b) continue;
              dprob += (hp[a].output() - hp[b].output()).cwiseSign();
            }
            const Vector dlogits = softmax_vjp(hp[a].output(), w * dprob);
            target_grad.row(t) += backward(model.heads[a], hp[a], dlogits, head_grads[a]).transpose();
          }
        }
      }

      for (std::size_t i = 0; i < n_src; ++i) {
        for (std::size_t k = 0; k < ext_passes[i].size(); ++k) {
          backward(model.extractor, ext_passes[i][k],
                   feature_grad[i].row(static_cast<Eigen::Index>(k)).transpose(), ext_grads);
        }
      }
      for (std::size_t k = 0; k < target_passes.size(); ++k) {
        backward(model.extractor, target_passes[k],
                 target_grad.row(static_cast<Eigen::Index>(k)).transpose(), ext_grads);
      }

      apply_gradients(model.extractor, ext_grads, lr);
      for (std::size_t i = 0; i < n_src; ++i) apply_gradients(model.heads[i], head_grads[i], lr);
    }

    DALossBreakdown record = da_objective(model, sources, target);
    record.epoch = epoch;
    result.history.push_back(record);
  }
  return result;
}

DAPrediction da_predict(const DAModel& model, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != model.input_dim()) {
    throw DimensionError("input has dim " + std::to_string(x.size()) + ", model expects dim " +
                         std::to_string(model.input_dim()));
  }
  const Vector features = forward(model.extractor, x, nullptr).output();
  DAPrediction p;
  p.averaged = Vector::Zero(static_cast<Eigen::Index>(model.classes().size()));
  for (const FeedforwardNetwork& head : model.heads) {
    p.per_head.push_back(forward(head, features, nullptr).output());
    p.averaged += p.per_head.back();
  }
  p.averaged /= static_cast<double>(model.heads.size());
  p.label = model.classes()[argmax(p.averaged)];
  return p;
}

double da_accuracy(const DAModel& model, const RepresentationSet& set) {
  if (set.empty()) return 0.0;
  std::size_t correct = 0;
  for (const Item& item : set.items()) {
    if (!item.label) throw InvalidArgument("item '" + item.id + "' is unlabeled");
    if (da_predict(model, item.vector).label == *item.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

}  // namespace prototrace
