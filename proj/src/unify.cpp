#include "prototrace/unify.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <set>

#include "prototrace/error.hpp"

namespace prototrace {

void Projection::validate() const {
  if (components.rows() == 0 || components.cols() == 0) {
    throw InvalidArgument("projection needs positive in_dim and out_dim");
  }
  if (components.rows() > components.cols()) throw InvalidArgument("projection out_dim exceeds in_dim");
  if (mean.size() != components.cols()) {
    throw DimensionError("projection mean has length " + std::to_string(mean.size()) +
                         ", expected " + std::to_string(components.cols()));
  }
  if (!mean.allFinite() || !components.allFinite()) {
    throw InvalidArgument("projection has non-finite entries");
  }
  const Matrix gram = components * components.transpose();
  const Matrix identity = Matrix::Identity(gram.rows(), gram.cols());
  if ((gram - identity).cwiseAbs().maxCoeff() > 1e-8) {
    throw InvalidArgument("projection components are not orthonormal");
  }
}

PcaResult pca_spectrum(const RepresentationSet& set, std::size_t out_dim) {
  if (set.size() < 2) throw InvalidArgument("PCA needs at least 2 items");
  if (out_dim == 0) throw InvalidArgument("PCA out_dim must be positive");
  const std::size_t limit = std::min(set.dim(), set.size() - 1);
  if (out_dim > limit) {
    throw InvalidArgument("PCA out_dim " + std::to_string(out_dim) + " exceeds min(dim, items - 1) = " +
                          std::to_string(limit));
  }
  const Matrix data = set.matrix();
  const Vector mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - mean.transpose();
  const Matrix covariance =
      (centered.transpose() * centered) / static_cast<double>(set.size() - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(covariance);
  if (solver.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");

  const Eigen::Index d = covariance.rows();
  const auto out = static_cast<Eigen::Index>(out_dim);
  PcaResult result;
  result.projection.mean = mean;
  result.projection.components.resize(out, d);
  for (Eigen::Index r = 0; r < out; ++r) {
    // Eigen sorts eigenvalues ascending.
    const Eigen::Index source = d - 1 - r;
    Vector axis = solver.eigenvectors().col(source);
    Eigen::Index pivot = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
      if (std::abs(axis[j]) > std::abs(axis[pivot])) pivot = j;
    }
    if (axis[pivot] < 0.0) axis = -axis;
    result.projection.components.row(r) = axis.transpose();
    result.eigenvalues.push_back(solver.eigenvalues()[source]);
  }
  return result;
}

Projection pca_fit(const RepresentationSet& set, std::size_t out_dim) {
  return pca_spectrum(set, out_dim).projection;
}

Vector pca_project(const Projection& p, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != p.in_dim()) {
    throw DimensionError("vector has dim " + std::to_string(x.size()) +
                         ", projection expects dim " + std::to_string(p.in_dim()));
  }
  return p.components * (x - p.mean);
}

Vector pca_reconstruct(const Projection& p, const Vector& y) {
  if (static_cast<std::size_t>(y.size()) != p.out_dim()) {
    throw DimensionError("coordinates have dim " + std::to_string(y.size()) +
                         ", projection has out_dim " + std::to_string(p.out_dim()));
  }
  return p.mean + p.components.transpose() * y;
}

RepresentationSet project_set(const Projection& p, const RepresentationSet& set) {
  std::vector<Item> items;
  items.reserve(set.size());
  for (const Item& item : set.items()) items.push_back({item.id, item.label, pca_project(p, item.vector)});
  return {p.out_dim(), std::move(items)};
}

PrototypeModel align_model(const PrototypeModel& model, const Projection& p) {
  if (model.dim() != p.in_dim()) {
    throw DimensionError("model has dim " + std::to_string(model.dim()) +
                         ", projection expects dim " + std::to_string(p.in_dim()));
  }
  std::vector<Center> centers = model.centers();
  for (Center& c : centers) c.vector = pca_project(p, c.vector);
  return {p.out_dim(), model.source(), std::move(centers)};
}

UnifiedModel::UnifiedModel(std::size_t dim, std::vector<Branch> branches)
    : dim_(dim), branches_(std::move(branches)) {
  if (branches_.empty()) throw InvalidArgument("unified model needs at least one branch");
  std::set<std::string> sources;
  for (const Branch& b : branches_) {
    if (!sources.insert(b.source).second) {
      throw InvalidArgument("duplicate branch source '" + b.source + "'");
    }
    if (b.model.dim() != dim_) {
      throw DimensionError("branch '" + b.source + "' has dim " + std::to_string(b.model.dim()) +
                           ", unified dim is " + std::to_string(dim_));
    }
    if (b.projection) {
      b.projection->validate();
      if (b.projection->out_dim() != dim_) {
        throw DimensionError("branch '" + b.source + "' projection has out_dim " +
                             std::to_string(b.projection->out_dim()) + ", unified dim is " +
                             std::to_string(dim_));
      }
    }
  }
}

const Branch* UnifiedModel::find(const std::string& source) const {
  for (const Branch& b : branches_) {
    if (b.source == source) return &b;
  }
  return nullptr;
}

std::size_t UnifiedModel::center_count() const {
  std::size_t total = 0;
  for (const Branch& b : branches_) total += b.model.size();
  return total;
}

UnifiedModel merge_models(const std::vector<BranchInput>& inputs) {
  if (inputs.empty()) throw InvalidArgument("merge needs at least one branch");
  std::vector<Branch> branches;
  std::size_t dim = 0;
  for (const BranchInput& in : inputs) {
    Branch b{in.source, in.projection ? align_model(in.model, *in.projection) : in.model,
             in.projection};
    if (branches.empty()) {
      dim = b.model.dim();
    } else if (b.model.dim() != dim) {
      throw DimensionError("branch '" + b.source + "' has dim " + std::to_string(b.model.dim()) +
                           " after projection, expected " + std::to_string(dim));
    }
    branches.push_back(std::move(b));
  }
  return {dim, std::move(branches)};
}

Vector branch_embedding(const UnifiedModel& u, const std::string& source, const Vector& raw) {
  const Branch* b = u.find(source);
  if (!b) throw InvalidArgument("unknown branch source '" + source + "'");
  return b->projection ? pca_project(*b->projection, raw) : raw;
}

Prediction unified_predict(const UnifiedModel& u, const std::map<std::string, Vector>& embeddings) {
  for (const auto& [source, vec] : embeddings) {
    if (!u.find(source)) throw InvalidArgument("embedding for unknown branch '" + source + "'");
  }
  // Candidates are ordered by (distance, source, center_id).
  const Center* winner = nullptr;
  const std::string* winner_source = nullptr;
  double best = std::numeric_limits<double>::infinity();
  double runner_up = std::numeric_limits<double>::infinity();
  std::size_t seen = 0;
  for (const Branch& b : u.branches()) {
    const auto it = embeddings.find(b.source);
    if (it == embeddings.end()) throw InvalidArgument("missing embedding for branch '" + b.source + "'");
    const Vector& query = it->second;
    if (static_cast<std::size_t>(query.size()) != u.dim()) {
      throw DimensionError("embedding for branch '" + b.source + "' has dim " +
                           std::to_string(query.size()) + ", unified dim is " +
                           std::to_string(u.dim()));
    }
    for (const Center& c : b.model.centers()) {
      const double d = (query - c.vector).norm();
      ++seen;
      const bool wins = winner == nullptr || d < best ||
                        (d == best && (b.source < *winner_source ||
                                       (b.source == *winner_source && c.center_id < winner->center_id)));
      if (wins) {
        runner_up = best;
        best = d;
        winner = &c;
        winner_source = &b.source;
      } else if (d < runner_up) {
        runner_up = d;
      }
    }
  }
  Prediction p;
  p.label = winner->label;
  p.center_id = winner->center_id;
  p.distance = best;
  if (seen > 1) p.margin = runner_up - best;
  p.source = *winner_source;
  return p;
}

}  // namespace prototrace
