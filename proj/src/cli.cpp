#include "prototrace/cli.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "prototrace/adapt.hpp"
#include "prototrace/cluster.hpp"
#include "prototrace/dataio.hpp"
#include "prototrace/error.hpp"
#include "prototrace/net.hpp"
#include "prototrace/prototype.hpp"
#include "prototrace/serialize.hpp"
#include "prototrace/unify.hpp"

namespace prototrace::cli {

using json::Json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(buffer.str());
  return hex.str();
}

namespace {

/// Tracks the files one command reads and writes so manifests can be emitted.
class RunContext {
public:
  std::string input(const std::string& path) {
    digests_[path] = file_digest(path);
    return path;
  }

  void write_json(const std::string& path, const Json& doc) {
    json::write_file(path, json::dump(doc));
    outputs_.push_back(path);
  }

  void write_csv(const std::string& path, const RepresentationSet& set) {
    save_representations(set, path);
    outputs_.push_back(path);
  }

  void write_manifests(const std::string& command, const Json& arguments, std::uint64_t seed) const {
    Json inputs = Json::object();
    for (const auto& [path, digest] : digests_) inputs[path] = digest;
    for (const std::string& out : outputs_) {
      Json doc;
      doc["version"] = json::kFormatVersion;
      doc["command"] = command;
      doc["arguments"] = arguments;
      doc["seed"] = seed;
      doc["input_digests"] = inputs;
      doc["output"] = out;
      doc["tool_version"] = kToolVersion;
      json::write_file(out + ".manifest.json", json::dump(doc));
    }
  }

private:
  std::map<std::string, std::string> digests_;
  std::vector<std::string> outputs_;
};

RepresentationSet load_set(RunContext& ctx, const std::string& path) {
  return load_representations(ctx.input(path));
}

Json load_json(RunContext& ctx, const std::string& path) { return json::read_file(ctx.input(path)); }

/// Splits "KEY=VALUE".
std::pair<std::string, std::string> key_value(const std::string& text, const char* flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw CLI::ValidationError(flag, "expected SOURCE=PATH, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

std::vector<std::size_t> with_ends(std::size_t first, const std::vector<std::size_t>& middle,
                                   std::size_t last) {
  std::vector<std::size_t> dims{first};
  dims.insert(dims.end(), middle.begin(), middle.end());
  dims.push_back(last);
  return dims;
}

struct Command {
  CLI::App* app = nullptr;
  std::function<void(RunContext&)> action;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prototype-based transparent models from latent representations", "prototrace"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::uint64_t seed = 0;
  std::map<std::string, Command> commands;
  auto add = [&](const std::string& name, const std::string& description) -> CLI::App* {
    CLI::App* sub = app.add_subcommand(name, description);
    commands[name].app = sub;
    return sub;
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "Random seed")->capture_default_str(); };

  // synth ---------------------------------------------------------------
  std::string spec_path, out_path, input_path;
  {
    CLI::App* sub = add("synth", "Sample a labeled Gaussian-mixture dataset");
    sub->add_option("--spec", spec_path, "Mixture spec JSON")->required();
    sub->add_option("--out", out_path, "Output CSV")->required();
    add_seed(sub);
    commands["synth"].action = [&](RunContext& ctx) {
      const MixtureSpec spec = load_mixture_spec(ctx.input(spec_path));
      ctx.write_csv(out_path, synth_mixture(spec, seed));
    };
  }

  // split ---------------------------------------------------------------
  SplitSpec split_spec;
  std::string out_train, out_val, out_test;
  {
    CLI::App* sub = add("split", "Stratified train/validation/test split");
    sub->add_option("--input", input_path, "Input CSV")->required();
    sub->add_option("--train", split_spec.train, "Train fraction")->capture_default_str();
    sub->add_option("--val", split_spec.validation, "Validation fraction")->capture_default_str();
    sub->add_option("--test", split_spec.test, "Test fraction")->capture_default_str();
    sub->add_option("--out-train", out_train, "Train CSV")->required();
    sub->add_option("--out-val", out_val, "Validation CSV")->required();
    sub->add_option("--out-test", out_test, "Test CSV")->required();
    add_seed(sub);
    commands["split"].action = [&](RunContext& ctx) {
      split_spec.seed = seed;
      const Partition parts = split(load_set(ctx, input_path), split_spec);
      ctx.write_csv(out_train, parts.train);
      ctx.write_csv(out_val, parts.validation);
      ctx.write_csv(out_test, parts.test);
    };
  }

  // cluster / select-k ----------------------------------------------------
  std::size_t k = 0, k_min = 1, k_max = 1;
  KMeansOptions kmeans;
  auto add_kmeans = [&](CLI::App* sub) {
    sub->add_option("--restarts", kmeans.restarts, "k-means++ restarts")->capture_default_str();
    sub->add_option("--tol", kmeans.tol, "Mean movement tolerance")->capture_default_str();
    sub->add_option("--max-iter", kmeans.max_iter, "Lloyd iteration cap")->capture_default_str();
    add_seed(sub);
  };
  {
    CLI::App* sub = add("cluster", "k-means++ clustering of a representation set");
    sub->add_option("--input", input_path, "Input CSV")->required();
    sub->add_option("--k", k, "Cluster count")->required();
    sub->add_option("--out", out_path, "Clustering JSON")->required();
    add_kmeans(sub);
    commands["cluster"].action = [&](RunContext& ctx) {
      ctx.write_json(out_path, json::to_json(cluster(load_set(ctx, input_path), k, seed, kmeans)));
    };
  }
  {
    CLI::App* sub = add("select-k", "Choose the cluster count by macro-F1 of majority labeling");
    sub->add_option("--input", input_path, "Labeled input CSV")->required();
    sub->add_option("--min-k", k_min, "Smallest cluster count")->required();
    sub->add_option("--max-k", k_max, "Largest cluster count")->required();
    sub->add_option("--out", out_path, "Report JSON")->required();
    add_kmeans(sub);
    commands["select-k"].action = [&](RunContext& ctx) {
      ctx.write_json(out_path, json::to_json(select_cluster_count(load_set(ctx, input_path), k_min,
                                                                  k_max, seed, kmeans)));
    };
  }

  // prototype models ------------------------------------------------------
  std::string clusters_path, model_path, source_tag = "model", center_id, text, predictions_path;
  std::size_t exemplars = 3;
  {
    CLI::App* sub = add("build-model", "Build a labeled cluster-center model");
    sub->add_option("--input", input_path, "Labeled CSV the clustering was computed on")->required();
    sub->add_option("--clusters", clusters_path, "Clustering JSON")->required();
    sub->add_option("--exemplars", exemplars, "Exemplars kept per center")->capture_default_str();
    sub->add_option("--source", source_tag, "Model source tag")->capture_default_str();
    sub->add_option("--out", out_path, "Model JSON")->required();
    commands["build-model"].action = [&](RunContext& ctx) {
      const RepresentationSet set = load_set(ctx, input_path);
      const ClusteringResult result = json::clustering_from_json(load_json(ctx, clusters_path));
      ctx.write_json(out_path, json::to_json(build_prototype_model(result, set, exemplars, source_tag)));
    };
  }
  {
    CLI::App* sub = add("annotate", "Attach an annotation to a center");
    sub->add_option("--model", model_path, "Model JSON")->required();
    sub->add_option("--center", center_id, "Center id")->required();
    sub->add_option("--text", text, "Annotation text")->required();
    sub->add_option("--out", out_path, "Annotated model JSON")->required();
    commands["annotate"].action = [&](RunContext& ctx) {
      const PrototypeModel model = json::model_from_json(load_json(ctx, model_path));
      ctx.write_json(out_path, json::to_json(annotate_center(model, center_id, text)));
    };
  }
  {
    CLI::App* sub = add("predict", "Nearest-center prediction for every row of a CSV");
    sub->add_option("--model", model_path, "Model JSON")->required();
    sub->add_option("--input", input_path, "Query CSV")->required();
    sub->add_option("--out", out_path, "Predictions JSON")->required();
    commands["predict"].action = [&](RunContext& ctx) {
      const PrototypeModel model = json::model_from_json(load_json(ctx, model_path));
      const RepresentationSet queries = load_set(ctx, input_path);
      if (queries.dim() != model.dim()) {
        throw DimensionError("query file has dim " + std::to_string(queries.dim()) +
                             " but the model has dim " + std::to_string(model.dim()));
      }
      std::vector<std::pair<std::string, Prediction>> predictions;
      for (const Item& item : queries.items()) predictions.emplace_back(item.id, predict(model, item.vector));
      ctx.write_json(out_path, json::predictions_to_json(predictions));
    };
  }
  {
    CLI::App* sub = add("explain", "Provenance of the centers behind stored predictions");
    sub->add_option("--model", model_path, "Model JSON")->required();
    sub->add_option("--predictions", predictions_path, "Predictions JSON")->required();
    sub->add_option("--out", out_path, "Explanations JSON")->required();
    commands["explain"].action = [&](RunContext& ctx) {
      const PrototypeModel model = json::model_from_json(load_json(ctx, model_path));
      Json list = Json::array();
      for (const auto& [id, p] : json::predictions_from_json(load_json(ctx, predictions_path))) {
        Json entry;
        entry["id"] = id;
        const Json detail = json::to_json(explain(model, p));
        for (const auto& [key, value] : detail.items()) entry[key] = value;
        list.push_back(std::move(entry));
      }
      Json doc;
      doc["version"] = json::kFormatVersion;
      doc["explanations"] = std::move(list);
      ctx.write_json(out_path, doc);
    };
  }
  {
    CLI::App* sub = add("eval", "Accuracy, per-class and macro F1 of a model on a labeled CSV");
    sub->add_option("--model", model_path, "Model JSON")->required();
    sub->add_option("--input", input_path, "Labeled CSV")->required();
    sub->add_option("--out", out_path, "Metrics JSON")->required();
    commands["eval"].action = [&](RunContext& ctx) {
      const PrototypeModel model = json::model_from_json(load_json(ctx, model_path));
      ctx.write_json(out_path, json::to_json(evaluate(model, load_set(ctx, input_path))));
    };
  }

  // networks ------------------------------------------------------------
  std::string val_path, history_path, net_path;
  std::vector<std::size_t> hidden{32}, head_hidden;
  TrainConfig train_config;
  auto add_train = [&](CLI::App* sub) {
    sub->add_option("--epochs", train_config.epochs, "Training epochs")->capture_default_str();
    sub->add_option("--batch-size", train_config.batch_size, "Mini-batch size")->capture_default_str();
    sub->add_option("--lr", train_config.learning_rate, "Learning rate")->capture_default_str();
    sub->add_option("--dropout", train_config.dropout_rate, "Dropout rate")->capture_default_str();
    sub->add_option("--history", history_path, "Optional per-epoch history JSON");
    add_seed(sub);
  };
  {
    CLI::App* sub = add("train-net", "Train a feedforward classifier on representations");
    sub->add_option("--input", input_path, "Labeled training CSV")->required();
    sub->add_option("--val", val_path, "Labeled validation CSV");
    sub->add_option("--hidden", hidden, "Hidden widths, comma separated")->delimiter(',')->capture_default_str();
    sub->add_option("--out", out_path, "Network JSON")->required();
    add_train(sub);
    commands["train-net"].action = [&](RunContext& ctx) {
      const RepresentationSet train_set = load_set(ctx, input_path);
      std::optional<RepresentationSet> validation;
      if (!val_path.empty()) validation = load_set(ctx, val_path);
      train_config.seed = seed;
      const auto classes = train_set.classes();
      FeedforwardNetwork net =
          init_network(with_ends(train_set.dim(), hidden, classes.size()), seed, OutputKind::Softmax, classes);
      const TrainResult result = train(std::move(net), train_set, validation, train_config);
      ctx.write_json(out_path, json::to_json(result.network));
      if (!history_path.empty()) ctx.write_json(history_path, json::to_json(result.history));
    };
  }
  {
    CLI::App* sub = add("extract", "Last-hidden-layer representations of a CSV");
    sub->add_option("--net", net_path, "Network JSON")->required();
    sub->add_option("--input", input_path, "Input CSV")->required();
    sub->add_option("--out", out_path, "Representation CSV")->required();
    commands["extract"].action = [&](RunContext& ctx) {
      const FeedforwardNetwork net = json::network_from_json(load_json(ctx, net_path));
      ctx.write_csv(out_path, extract_representations(net, load_set(ctx, input_path)));
    };
  }

  // PCA and merging -------------------------------------------------------
  std::size_t out_dim = 0;
  std::string projection_path, unified_path;
  std::vector<std::string> branch_args, projection_args, input_args;
  {
    CLI::App* sub = add("pca-fit", "Fit a PCA projection");
    sub->add_option("--input", input_path, "Input CSV")->required();
    sub->add_option("--dim", out_dim, "Number of components")->required();
    sub->add_option("--out", out_path, "Projection JSON")->required();
    commands["pca-fit"].action = [&](RunContext& ctx) {
      ctx.write_json(out_path, json::to_json(pca_fit(load_set(ctx, input_path), out_dim)));
    };
  }
  {
    CLI::App* sub = add("project", "Apply a projection to a CSV or a prototype model");
    sub->add_option("--projection", projection_path, "Projection JSON")->required();
    auto* in = sub->add_option("--input", input_path, "Input CSV");
    auto* model = sub->add_option("--model", model_path, "Prototype model JSON");
    in->excludes(model);
    sub->add_option("--out", out_path, "Projected CSV or model JSON")->required();
    commands["project"].action = [&](RunContext& ctx) {
      const Projection p = json::projection_from_json(load_json(ctx, projection_path));
      if (!model_path.empty()) {
        ctx.write_json(out_path, json::to_json(align_model(json::model_from_json(load_json(ctx, model_path)), p)));
      } else if (!input_path.empty()) {
        ctx.write_csv(out_path, project_set(p, load_set(ctx, input_path)));
      } else {
        throw CLI::RequiredError("--input or --model");
      }
    };
  }
  {
    CLI::App* sub = add("merge", "Merge prototype models into a unified model");
    sub->add_option("--branch", branch_args, "SOURCE=MODEL_JSON (repeatable)")->required();
    sub->add_option("--projection", projection_args, "SOURCE=PROJECTION_JSON (repeatable)");
    sub->add_option("--out", out_path, "Unified model JSON")->required();
    commands["merge"].action = [&](RunContext& ctx) {
      std::map<std::string, Projection> projections;
      for (const std::string& arg : projection_args) {
        const auto [source, path] = key_value(arg, "--projection");
        projections.emplace(source, json::projection_from_json(load_json(ctx, path)));
      }
      std::vector<BranchInput> inputs;
      for (const std::string& arg : branch_args) {
        const auto [source, path] = key_value(arg, "--branch");
        std::optional<Projection> projection;
        if (const auto it = projections.find(source); it != projections.end()) {
          projection = it->second;
          projections.erase(it);
        }
        inputs.push_back({source, json::model_from_json(load_json(ctx, path)), projection});
      }
      if (!projections.empty()) {
        throw InvalidArgument("projection given for unknown branch '" + projections.begin()->first + "'");
      }
      ctx.write_json(out_path, json::to_json(merge_models(inputs)));
    };
  }
  {
    CLI::App* sub = add("unified-predict", "Predict with a unified model from per-branch embeddings");
    sub->add_option("--model", unified_path, "Unified model JSON")->required();
    sub->add_option("--input", input_args, "SOURCE=CSV of that branch's vectors (repeatable)")->required();
    sub->add_option("--out", out_path, "Predictions JSON")->required();
    commands["unified-predict"].action = [&](RunContext& ctx) {
      const UnifiedModel u = json::unified_from_json(load_json(ctx, unified_path));
      std::vector<std::pair<std::string, RepresentationSet>> sets;
      for (const std::string& arg : input_args) {
        const auto [source, path] = key_value(arg, "--input");
        const Branch* branch = u.find(source);
        if (!branch) throw InvalidArgument("unified model has no branch '" + source + "'");
        RepresentationSet set = load_set(ctx, path);
        if (branch->projection && set.dim() == branch->projection->in_dim()) {
          set = project_set(*branch->projection, set);
        } else if (set.dim() != u.dim()) {
          throw DimensionError("input for branch '" + source + "' has dim " + std::to_string(set.dim()) +
                               " but the unified model has dim " + std::to_string(u.dim()));
        }
        sets.emplace_back(source, std::move(set));
      }
      if (sets.size() != u.branches().size()) {
        throw InvalidArgument("unified-predict needs one --input per branch (" +
                              std::to_string(u.branches().size()) + " branches)");
      }
      const RepresentationSet& lead = sets.front().second;
      std::vector<std::pair<std::string, Prediction>> predictions;
      for (const Item& item : lead.items()) {
        std::map<std::string, Vector> embeddings;
        for (const auto& [source, set] : sets) {
          const auto index = set.find(item.id);
          if (!index) throw InvalidArgument("id '" + item.id + "' missing from branch '" + source + "' input");
          embeddings.emplace(source, set[*index].vector);
        }
        predictions.emplace_back(item.id, unified_predict(u, embeddings));
      }
      ctx.write_json(out_path, json::predictions_to_json(predictions));
    };
  }

  // domain adaptation -----------------------------------------------------
  DAConfig da_config;
  std::string kernel_name = "rbf", target_path, x_path, y_path;
  std::optional<double> bandwidth;
  std::vector<std::string> source_args;
  auto add_kernel = [&](CLI::App* sub) {
    sub->add_option("--kernel", kernel_name, "MMD kernel: linear or rbf")->capture_default_str();
    sub->add_option("--bandwidth", bandwidth, "RBF bandwidth (default: median heuristic)");
  };
  {
    CLI::App* sub = add("da-train", "Multi-source domain-adaptation training");
    sub->add_option("--source", source_args, "TAG=CSV labeled source (repeatable)")->required();
    sub->add_option("--target", target_path, "Target CSV (labels unused)")->required();
    sub->add_option("--lambda-feat", da_config.lambda_feat, "Feature discrepancy weight")->capture_default_str();
    sub->add_option("--lambda-class", da_config.lambda_class, "Class discrepancy weight")->capture_default_str();
    sub->add_option("--hidden", hidden, "Extractor widths, comma separated")->delimiter(',')->capture_default_str();
    sub->add_option("--head-hidden", head_hidden, "Head hidden widths, comma separated")->delimiter(',');
    sub->add_option("--out", out_path, "Adaptation model JSON")->required();
    add_kernel(sub);
    add_train(sub);
    commands["da-train"].action = [&](RunContext& ctx) {
      std::vector<RepresentationSet> sources;
      std::vector<std::string> tags;
      for (const std::string& arg : source_args) {
        const auto [tag, path] = key_value(arg, "--source");
        tags.push_back(tag);
        sources.push_back(load_set(ctx, path));
      }
      da_config.kernel = parse_kernel(kernel_name);
      da_config.bandwidth = bandwidth;
      da_config.extractor_hidden = hidden;
      da_config.head_hidden = head_hidden;
      da_config.train = train_config;
      da_config.train.seed = seed;
      const DATrainResult result = da_train(sources, tags, load_set(ctx, target_path), da_config);
      ctx.write_json(out_path, json::to_json(result.model));
      if (!history_path.empty()) ctx.write_json(history_path, json::to_json(result.history));
    };
  }
  {
    CLI::App* sub = add("da-predict", "Head-averaged predictions of an adaptation model");
    sub->add_option("--model", model_path, "Adaptation model JSON")->required();
    sub->add_option("--input", input_path, "Query CSV")->required();
    sub->add_option("--out", out_path, "Predictions JSON")->required();
    commands["da-predict"].action = [&](RunContext& ctx) {
      const DAModel model = json::da_model_from_json(load_json(ctx, model_path));
      const RepresentationSet queries = load_set(ctx, input_path);
      if (queries.dim() != model.input_dim()) {
        throw DimensionError("query file has dim " + std::to_string(queries.dim()) +
                             " but the model has dim " + std::to_string(model.input_dim()));
      }
      Json list = Json::array();
      for (const Item& item : queries.items()) {
        Json entry;
        entry["id"] = item.id;
        const Json detail = json::to_json(da_predict(model, item.vector), model.classes());
        for (const auto& [key, value] : detail.items()) {
          if (key != "classes") entry[key] = value;
        }
        list.push_back(std::move(entry));
      }
      Json doc;
      doc["version"] = json::kFormatVersion;
      doc["classes"] = model.classes();
      doc["predictions"] = std::move(list);
      ctx.write_json(out_path, doc);
    };
  }
  {
    CLI::App* sub = add("discrepancy", "MMD and CORAL between two representation sets");
    sub->add_option("--x", x_path, "First CSV")->required();
    sub->add_option("--y", y_path, "Second CSV")->required();
    sub->add_option("--out", out_path, "Report JSON")->required();
    add_kernel(sub);
    commands["discrepancy"].action = [&](RunContext& ctx) {
      const RepresentationSet x = load_set(ctx, x_path);
      const RepresentationSet y = load_set(ctx, y_path);
      ctx.write_json(out_path, json::to_json(discrepancy(x.matrix(), y.matrix(), parse_kernel(kernel_name), bandwidth)));
    };
  }
  {
    CLI::App* sub = add("coords3d", "First three principal coordinates for external plotting");
    auto* in = sub->add_option("--input", input_path, "Input CSV");
    auto* unified = sub->add_option("--unified", unified_path, "Unified model JSON (plots its centers)");
    in->excludes(unified);
    sub->add_option("--out", out_path, "Coordinates CSV")->required();
    commands["coords3d"].action = [&](RunContext& ctx) {
      RepresentationSet points(1, {});
      if (!unified_path.empty()) {
        const UnifiedModel u = json::unified_from_json(load_json(ctx, unified_path));
        std::vector<Item> items;
        for (const Branch& b : u.branches()) {
          for (const Center& c : b.model.centers()) items.push_back({b.source + ":" + c.center_id, c.label, c.vector});
        }
        points = RepresentationSet(u.dim(), std::move(items));
      } else if (!input_path.empty()) {
        points = load_set(ctx, input_path);
      } else {
        throw CLI::RequiredError("--input or --unified");
      }
      const std::size_t dims = std::min<std::size_t>({3, points.dim(), points.size() > 0 ? points.size() - 1 : 0});
      ctx.write_csv(out_path, project_set(pca_fit(points, dims), points));
    };
  }

  // -----------------------------------------------------------------------
  std::vector<std::string> argv_storage{"prototrace"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    // Subcommand help text when a subcommand was recognised.
    const auto selected = app.get_subcommands();
    err << (selected.empty() ? app.help() : selected.front()->help());
    return kUsageError;
  }

  CLI::App* selected = app.get_subcommands().front();
  const std::string name = selected->get_name();
  Json arguments = Json::object();
  for (const CLI::Option* opt : selected->get_options()) {
    if (opt->count() == 0 || opt->get_name() == "--help") continue;
    std::string joined;
    for (const std::string& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
    arguments[opt->get_name()] = joined;
  }

  RunContext ctx;
  try {
    commands.at(name).action(ctx);
    ctx.write_manifests(name, arguments, seed);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << selected->help();
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kSuccess;
}

}  // namespace prototrace::cli
