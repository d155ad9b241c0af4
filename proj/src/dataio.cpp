#include "prototrace/dataio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "prototrace/error.hpp"
#include "prototrace/rng.hpp"

namespace prototrace {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return value;
}

void check_csv_token(const std::string& token, const char* what) {
  if (token.find_first_of(",\n\r") != std::string::npos) {
    throw InvalidArgument(std::string(what) + " '" + token + "' contains a CSV delimiter");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// RepresentationSet

RepresentationSet::RepresentationSet(std::size_t dim, std::vector<Item> items)
    : dim_(dim), items_(std::move(items)) {
  if (dim_ == 0) throw InvalidArgument("representation dim must be positive");
  std::set<std::string_view> seen;
  for (const Item& item : items_) {
    if (static_cast<std::size_t>(item.vector.size()) != dim_) {
      throw DimensionError("item '" + item.id + "' has " + std::to_string(item.vector.size()) +
                           " features, expected " + std::to_string(dim_));
    }
    if (!item.vector.allFinite()) {
      throw InvalidArgument("item '" + item.id + "' has a non-finite feature");
    }
    if (!seen.insert(item.id).second) {
      throw InvalidArgument("duplicate id '" + item.id + "'");
    }
  }
}

bool RepresentationSet::fully_labeled() const {
  return std::all_of(items_.begin(), items_.end(),
                     [](const Item& item) { return item.label.has_value(); });
}

std::vector<std::string> RepresentationSet::classes() const {
  std::set<std::string> labels;
  for (const Item& item : items_) {
    if (item.label) labels.insert(*item.label);
  }
  return {labels.begin(), labels.end()};
}

Matrix RepresentationSet::matrix() const {
  Matrix rows(static_cast<Eigen::Index>(items_.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < items_.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = items_[i].vector.transpose();
  }
  return rows;
}

std::optional<std::size_t> RepresentationSet::find(const std::string& id) const {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].id == id) return i;
  }
  return std::nullopt;
}

RepresentationSet RepresentationSet::without_labels() const {
  std::vector<Item> stripped = items_;
  for (Item& item : stripped) item.label.reset();
  return {dim_, std::move(stripped)};
}

bool operator==(const RepresentationSet& a, const RepresentationSet& b) {
  if (a.dim_ != b.dim_ || a.items_.size() != b.items_.size()) return false;
  for (std::size_t i = 0; i < a.items_.size(); ++i) {
    const Item& x = a.items_[i];
    const Item& y = b.items_[i];
    if (x.id != y.id || x.label != y.label || x.vector != y.vector) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw Error("cannot format floating-point value");
  return {buffer, ptr};
}

std::string format_representations(const RepresentationSet& set) {
  std::string out = "id,label";
  for (std::size_t f = 0; f < set.dim(); ++f) {
    out += ",f";
    out += std::to_string(f);
  }
  out += '\n';
  for (const Item& item : set.items()) {
    check_csv_token(item.id, "id");
    out += item.id;
    out += ',';
    if (item.label) {
      check_csv_token(*item.label, "label");
      out += *item.label;
    }
    for (Eigen::Index f = 0; f < item.vector.size(); ++f) {
      out += ',';
      out += format_double(item.vector[f]);
    }
    out += '\n';
  }
  return out;
}

RepresentationSet parse_representations(const std::string& text, const std::string& origin) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      std::string_view line = rest.substr(0, nl);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  auto fail = [&](std::size_t row, const std::string& message) -> LoadError {
    return LoadError(origin + ": row " + std::to_string(row) + ": " + message);
  };

  if (lines.empty() || lines.front().empty()) throw fail(1, "missing header");
  const auto header = split_fields(lines.front());
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw fail(1, "header must start with id,label followed by feature columns");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t f = 0; f < dim; ++f) {
    if (header[f + 2] != "f" + std::to_string(f)) {
      throw fail(1, "feature column " + std::to_string(f) + " must be named f" + std::to_string(f));
    }
  }

  std::vector<Item> items;
  std::set<std::string, std::less<>> ids;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li + 1;
    const std::string_view line = lines[li];
    if (line.empty()) {
      if (li + 1 == lines.size()) break;
      throw fail(row, "empty row");
    }
    const auto fields = split_fields(line);
    if (fields.size() != dim + 2) {
      const std::size_t got = fields.size() >= 2 ? fields.size() - 2 : 0;
      throw fail(row, "expected " + std::to_string(dim) + " features, got " + std::to_string(got));
    }
    Item item;
    item.id = std::string(fields[0]);
    if (item.id.empty()) throw fail(row, "empty id");
    if (!ids.insert(item.id).second) throw fail(row, "duplicate id '" + item.id + "'");
    if (!fields[1].empty()) item.label = std::string(fields[1]);
    item.vector.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t f = 0; f < dim; ++f) {
      const auto value = parse_double(fields[f + 2]);
      if (!value) {
        throw fail(row, "non-numeric feature '" + std::string(fields[f + 2]) + "' in column f" +
                            std::to_string(f));
      }
      if (!std::isfinite(*value)) {
        throw fail(row, "non-finite feature in column f" + std::to_string(f));
      }
      item.vector[static_cast<Eigen::Index>(f)] = *value;
    }
    items.push_back(std::move(item));
  }
  return {dim, std::move(items)};
}

RepresentationSet load_representations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_representations(buffer.str(), path.string());
}

void save_representations(const RepresentationSet& set, const std::filesystem::path& path) {
  const std::string text = format_representations(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------
// Splitting

void SplitSpec::validate() const {
  for (double f : {train, validation, test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("split fractions must lie in [0, 1]");
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must sum to 1");
  }
}

namespace {

// Integer table with row sums `group_sizes` and column sums `targets`,
// close to group_size * fraction per cell (largest remainder first).
std::vector<std::array<std::size_t, 3>> allocate(const std::vector<std::size_t>& group_sizes,
                                                 const std::array<double, 3>& fractions,
                                                 const std::array<std::size_t, 3>& targets) {
  const std::size_t groups = group_sizes.size();
  std::vector<std::array<std::size_t, 3>> table(groups);
  std::vector<std::array<double, 3>> remainder(groups);
  std::array<long long, 3> column_deficit{};
  std::vector<long long> row_deficit(groups);
  for (std::size_t j = 0; j < 3; ++j) column_deficit[j] = static_cast<long long>(targets[j]);

  for (std::size_t g = 0; g < groups; ++g) {
    row_deficit[g] = static_cast<long long>(group_sizes[g]);
    for (std::size_t j = 0; j < 3; ++j) {
      const double quota = static_cast<double>(group_sizes[g]) * fractions[j];
      const double whole = std::floor(quota + 1e-9);
      table[g][j] = static_cast<std::size_t>(whole);
      remainder[g][j] = std::max(0.0, quota - whole);
      row_deficit[g] -= static_cast<long long>(table[g][j]);
      column_deficit[j] -= static_cast<long long>(table[g][j]);
    }
  }
  // Rounding of the global targets can leave a column over-allocated.
  for (std::size_t j = 0; j < 3; ++j) {
    while (column_deficit[j] < 0) {
      std::size_t best = 0;
      for (std::size_t g = 1; g < groups; ++g) {
        if (table[g][j] > table[best][j]) best = g;
      }
      --table[best][j];
      ++row_deficit[best];
      ++column_deficit[j];
      remainder[best][j] = 0.0;
    }
  }

  struct Cell {
    double remainder;
    std::size_t group;
    std::size_t column;
  };
  std::vector<Cell> cells;
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t j = 0; j < 3; ++j) cells.push_back({remainder[g][j], g, j});
  }
  std::stable_sort(cells.begin(), cells.end(),
                   [](const Cell& a, const Cell& b) { return a.remainder > b.remainder; });
  for (const Cell& cell : cells) {
    if (row_deficit[cell.group] > 0 && column_deficit[cell.column] > 0) {
      ++table[cell.group][cell.column];
      --row_deficit[cell.group];
      --column_deficit[cell.column];
    }
  }
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t j = 0; j < 3 && row_deficit[g] > 0; ++j) {
      const long long moved = std::min(row_deficit[g], column_deficit[j]);
      if (moved <= 0) continue;
      table[g][j] += static_cast<std::size_t>(moved);
      row_deficit[g] -= moved;
      column_deficit[j] -= moved;
    }
  }
  return table;
}

}  // namespace

Partition split(const RepresentationSet& set, const SplitSpec& spec) {
  spec.validate();
  if (set.empty()) throw InvalidArgument("cannot split an empty set");

  const std::size_t n = set.size();
  const std::array<double, 3> fractions{spec.train, spec.validation, spec.test};
  std::array<std::size_t, 3> targets{};
  targets[0] = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(n * spec.train)));
  targets[1] = std::min<std::size_t>(n - targets[0],
                                     static_cast<std::size_t>(std::llround(n * spec.validation)));
  targets[2] = n - targets[0] - targets[1];

  // Groups: each class in label order, then the unlabeled pool.
  std::map<std::string, std::vector<std::size_t>> by_label;
  std::vector<std::size_t> unlabeled;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& label = set[i].label;
    if (label) {
      by_label[*label].push_back(i);
    } else {
      unlabeled.push_back(i);
    }
  }
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [label, members] : by_label) groups.push_back(std::move(members));
  if (!unlabeled.empty()) groups.push_back(std::move(unlabeled));

  std::vector<std::size_t> sizes;
  for (const auto& g : groups) sizes.push_back(g.size());
  const auto table = allocate(sizes, fractions, targets);

  Rng rng(spec.seed);
  std::array<std::vector<std::size_t>, 3> chosen;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto order = rng.permutation(groups[g].size());
    std::size_t cursor = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < table[g][j]; ++k) chosen[j].push_back(groups[g][order[cursor++]]);
    }
  }

  auto build = [&](std::vector<std::size_t>& indices) {
    std::sort(indices.begin(), indices.end());
    std::vector<Item> items;
    items.reserve(indices.size());
    for (std::size_t i : indices) items.push_back(set[i]);
    return RepresentationSet(set.dim(), std::move(items));
  };
  return {build(chosen[0]), build(chosen[1]), build(chosen[2])};
}

// ---------------------------------------------------------------------------
// Synthetic mixtures

void MixtureSpec::validate() const {
  if (dim == 0) throw InvalidArgument("mixture dim must be positive");
  if (classes.empty()) throw InvalidArgument("mixture needs at least one class");
  std::set<std::string> labels;
  for (const MixtureClass& cls : classes) {
    if (cls.label.empty()) throw InvalidArgument("mixture class label must be non-empty");
    check_csv_token(cls.label, "label");
    if (!labels.insert(cls.label).second) {
      throw InvalidArgument("duplicate mixture class '" + cls.label + "'");
    }
    if (cls.components.empty()) {
      throw InvalidArgument("mixture class '" + cls.label + "' has no components");
    }
    for (const MixtureComponent& comp : cls.components) {
      if (static_cast<std::size_t>(comp.mean.size()) != dim) {
        throw DimensionError("mixture class '" + cls.label + "' has a mean of length " +
                             std::to_string(comp.mean.size()) + ", expected " +
                             std::to_string(dim));
      }
      if (!comp.mean.allFinite()) throw InvalidArgument("mixture mean must be finite");
      if (!(comp.stddev >= 0.0) || !std::isfinite(comp.stddev)) {
        throw InvalidArgument("mixture stddev must be finite and non-negative");
      }
      if (comp.count == 0) throw InvalidArgument("mixture component count must be at least 1");
    }
  }
}

RepresentationSet synth_mixture(const MixtureSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<Item> items;
  for (const MixtureClass& cls : spec.classes) {
    std::size_t index = 0;
    for (const MixtureComponent& comp : cls.components) {
      for (std::size_t k = 0; k < comp.count; ++k) {
        Item item;
        item.id = cls.label + "-" + std::to_string(index++);
        item.label = cls.label;
        item.vector = comp.mean;
        for (Eigen::Index f = 0; f < item.vector.size(); ++f) {
          item.vector[f] += comp.stddev * rng.normal();
        }
        items.push_back(std::move(item));
      }
    }
  }
  return {spec.dim, std::move(items)};
}

MixtureSpec parse_mixture_spec(const std::string& json_text) {
  MixtureSpec spec;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    spec.dim = doc.at("dim").get<std::size_t>();
    for (const auto& cls : doc.at("classes")) {
      MixtureClass parsed;
      parsed.label = cls.at("label").get<std::string>();
      for (const auto& comp : cls.at("components")) {
        MixtureComponent c;
        const auto mean = comp.at("mean").get<std::vector<double>>();
        c.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        c.stddev = comp.at("stddev").get<double>();
        const auto count = comp.at("count").get<long long>();
        if (count < 1) throw InvalidArgument("mixture component count must be at least 1");
        c.count = static_cast<std::size_t>(count);
        parsed.components.push_back(std::move(c));
      }
      spec.classes.push_back(std::move(parsed));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed mixture spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

MixtureSpec load_mixture_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_mixture_spec(buffer.str());
}

}  // namespace prototrace
