#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

namespace prototrace {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One latent vector exported from an upstream network.
struct Item {
  std::string id;
  std::optional<std::string> label;
  Vector vector;
};

/// A set of equal-length latent vectors with unique ids.
///
/// Construction validates the invariants (positive dim, matching lengths,
/// unique ids, finite entries); instances are immutable afterwards.
class RepresentationSet {
public:
  RepresentationSet(std::size_t dim, std::vector<Item> items);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  const std::vector<Item>& items() const { return items_; }
  const Item& operator[](std::size_t i) const { return items_[i]; }

  /// True when every item carries a label.
  bool fully_labeled() const;
  /// Sorted distinct labels of labeled items.
  std::vector<std::string> classes() const;

  /// Items as rows of an N x dim matrix.
  Matrix matrix() const;

  /// Index of the item with this id, if present.
  std::optional<std::size_t> find(const std::string& id) const;

  /// Same ids and vectors, labels dropped.
  RepresentationSet without_labels() const;

  friend bool operator==(const RepresentationSet& a, const RepresentationSet& b);

private:
  std::size_t dim_;
  std::vector<Item> items_;
};

/// Train/validation/test fractions plus the shuffle seed.
struct SplitSpec {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MixtureComponent {
  Vector mean;
  double stddev = 1.0;
  std::size_t count = 1;
};

struct MixtureClass {
  std::string label;
  std::vector<MixtureComponent> components;
};

/// Isotropic Gaussian mixture description used to synthesize datasets.
struct MixtureSpec {
  std::size_t dim = 0;
  std::vector<MixtureClass> classes;

  void validate() const;
};

RepresentationSet load_representations(const std::filesystem::path& path);
void save_representations(const RepresentationSet& set, const std::filesystem::path& path);

/// CSV text for a set; save_representations writes exactly this.
std::string format_representations(const RepresentationSet& set);
/// Parses CSV text. `origin` only decorates error messages.
RepresentationSet parse_representations(const std::string& text,
                                        const std::string& origin = "<memory>");

struct Partition {
  RepresentationSet train;
  RepresentationSet validation;
  RepresentationSet test;
};

/// Stratified, seeded three-way split. Each output keeps input order.
Partition split(const RepresentationSet& set, const SplitSpec& spec);

RepresentationSet synth_mixture(const MixtureSpec& spec, std::uint64_t seed);

MixtureSpec load_mixture_spec(const std::filesystem::path& path);
MixtureSpec parse_mixture_spec(const std::string& json_text);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

}  // namespace prototrace
