#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prototrace/dataio.hpp"
#include "prototrace/prototype.hpp"

namespace prototrace {

/// Affine map onto the leading principal axes: y = components * (x - mean).
/// Rows of `components` are orthonormal.
struct Projection {
  Vector mean;
  Matrix components;  // out_dim x in_dim

  std::size_t in_dim() const { return static_cast<std::size_t>(components.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(components.rows()); }

  void validate() const;

  friend bool operator==(const Projection& a, const Projection& b) {
    return a.mean.size() == b.mean.size() && a.components.rows() == b.components.rows() &&
           a.components.cols() == b.components.cols() && a.mean == b.mean &&
           a.components == b.components;
  }
};

struct PcaResult {
  Projection projection;
  /// Sample-covariance eigenvalues of the kept components, descending.
  std::vector<double> eigenvalues;
};

/// Principal axes of the sample covariance. Component signs are fixed so the
/// entry of largest magnitude is positive (earliest index on ties).
PcaResult pca_spectrum(const RepresentationSet& set, std::size_t out_dim);
Projection pca_fit(const RepresentationSet& set, std::size_t out_dim);

Vector pca_project(const Projection& p, const Vector& x);
Vector pca_reconstruct(const Projection& p, const Vector& y);

/// Projects every item; ids and labels carried over.
RepresentationSet project_set(const Projection& p, const RepresentationSet& set);

/// Replaces every center vector by its projection; metadata is untouched.
PrototypeModel align_model(const PrototypeModel& model, const Projection& p);

struct Branch {
  std::string source;
  PrototypeModel model;
  /// Applied to queries of this branch before matching.
  std::optional<Projection> projection;
};

class UnifiedModel {
public:
  UnifiedModel(std::size_t dim, std::vector<Branch> branches);

  std::size_t dim() const { return dim_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const Branch* find(const std::string& source) const;
  std::size_t center_count() const;

  friend bool operator==(const UnifiedModel& a, const UnifiedModel& b) {
    if (a.dim_ != b.dim_ || a.branches_.size() != b.branches_.size()) return false;
    for (std::size_t i = 0; i < a.branches_.size(); ++i) {
      const Branch& x = a.branches_[i];
      const Branch& y = b.branches_[i];
      if (x.source != y.source || !(x.model == y.model) || x.projection != y.projection) {
        return false;
      }
    }
    return true;
  }

private:
  std::size_t dim_;
  std::vector<Branch> branches_;
};

struct BranchInput {
  std::string source;
  PrototypeModel model;
  std::optional<Projection> projection;
};

/// Aligns each branch model with its projection (if any) and stores the union.
/// Post-projection dims must agree and sources must be unique.
UnifiedModel merge_models(const std::vector<BranchInput>& branches);

/// A branch's query embedding from its raw latent vector: projected when the
/// branch has a projection, otherwise returned unchanged.
Vector branch_embedding(const UnifiedModel& u, const std::string& source, const Vector& raw);

/// Nearest center over the union, each branch matched against its own
/// embedding. Ties are broken by (source, center_id).
Prediction unified_predict(const UnifiedModel& u, const std::map<std::string, Vector>& embeddings);

}  // namespace prototrace
