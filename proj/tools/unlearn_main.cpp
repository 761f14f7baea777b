// Command-line surface for the feature-space unlearning toolkit:
// data generation, training, unlearning, evaluation, diagnostics, reports.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unlearn/baselines.hpp"
#include "unlearn/dataset.hpp"
#include "unlearn/esc.hpp"
#include "unlearn/esc_t.hpp"
#include "unlearn/eval.hpp"
#include "unlearn/model.hpp"
#include "unlearn/sidecar.hpp"
#include "unlearn/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace unlearn;

// Invalid flag combinations detected past CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t env_seed_fallback(std::uint64_t fallback) {
  if (const char* env = std::getenv("UNLEARN_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("UNLEARN_SEED is set but not an integer: " + std::string(env));
    }
  }
  return fallback;
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&now));
  return buf;
}

void write_run_manifest(const std::string& path, const std::string& command,
                        const json& config, std::uint64_t seed, const json& inputs,
                        const json& outputs, const json& timings) {
  const json manifest{{"command", command}, {"config", config},
                      {"seed", seed},       {"inputs", inputs},
                      {"outputs", outputs}, {"tool_version", kToolVersion},
                      {"timings", timings}, {"written_at", iso_timestamp()}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << manifest.dump(2) << '\n';
}

// Looks for the run manifest of the command that produced `artifact` and
// returns its recorded method seconds, if any.
std::optional<double> method_seconds_from_manifest(const std::string& artifact) {
  fs::path p(artifact);
  std::vector<fs::path> candidates;
  candidates.emplace_back(p.string() + ".manifest.json");
  fs::path stem = p.filename();
  while (stem.has_extension()) stem = stem.stem();
  candidates.emplace_back(p.parent_path() / (stem.string() + ".manifest.json"));
  for (const fs::path& c : candidates) {
    std::ifstream in(c);
    if (!in) continue;
    try {
      json j;
      in >> j;
      if (j.contains("timings") && j["timings"].contains("method_seconds")) {
        return j["timings"]["method_seconds"].get<double>();
      }
    } catch (const json::exception&) {
      continue;
    }
  }
  return std::nullopt;
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& flag) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    try {
      out.push_back(std::stoi(token));
    } catch (const std::exception&) {
      throw UsageError(flag + ": '" + token + "' is not an integer");
    }
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

// Shared split selection: class list or random fraction.
struct SplitFlags {
  std::string forget_classes;
  double forget_fraction = 0.0;
  std::uint64_t split_seed = 42;

  void attach(CLI::App* cmd) {
    cmd->add_option("--forget-classes", forget_classes,
                    "comma-separated class ids forming the forgetting set");
    cmd->add_option("--forget-fraction", forget_fraction,
                    "random fraction of train samples to forget, in (0,1)");
    cmd->add_option("--split-seed", split_seed, "seed for the random forgetting split");
  }

  SplitDataset make(const LabeledSet& train, const LabeledSet& test) const {
    const bool by_class = !forget_classes.empty();
    const bool by_fraction = forget_fraction != 0.0;
    if (by_class == by_fraction) {
      throw UsageError("exactly one of --forget-classes / --forget-fraction is required");
    }
    if (by_class) {
      return split_by_classes(train, test, parse_int_list(forget_classes, "--forget-classes"));
    }
    return split_random(train, test, forget_fraction, split_seed);
  }

  json to_json() const {
    return json{{"forget_classes", forget_classes},
                {"forget_fraction", forget_fraction},
                {"split_seed", split_seed}};
  }
};

FeatureMap load_sidecars(const std::vector<std::string>& paths, const MlpModel& model,
                         bool* any) {
  FeatureMap combined = FeatureMap::identity(static_cast<std::size_t>(model.meta.feature_dim));
  *any = false;
  for (const std::string& path : paths) {
    const LoadedSidecar sidecar = load_sidecar(path);
    if (sidecar.d != static_cast<std::size_t>(model.meta.feature_dim)) {
      throw std::runtime_error("sidecar " + path + " has feature dimension " +
                               std::to_string(sidecar.d) + ", model expects " +
                               std::to_string(model.meta.feature_dim));
    }
    combined = merge(combined, sidecar.map);
    *any = true;
  }
  return combined;
}

void save_matrix_csv(const std::string& path, const Matrix& m, const std::string& prefix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t j = 0; j < m.cols(); ++j) {
    out << prefix << j << (j + 1 < m.cols() ? "," : "\n");
  }
  char buf[40];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.10g", m(i, j));
      out << buf << (j + 1 < m.cols() ? "," : "\n");
    }
  }
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  int classes = 10;
  int per_class = 500;
  int per_class_test = 100;
  int dim = 20;
  double separation = 10.0;
  std::uint64_t seed = 42;
  std::string out;
  CLI::Option* seed_opt = nullptr;
};

int run_gen_data(const GenDataArgs& args) {
  if (args.classes < 2) throw UsageError("gen-data: --classes must be >= 2");
  const auto t0 = Clock::now();

  BlobSpec spec{args.classes,   args.per_class, args.per_class_test,
                args.dim,       args.separation, args.seed};
  const auto [train, test] = generate_blobs(spec);

  fs::create_directories(args.out);
  const fs::path dir(args.out);
  save_csv((dir / "train.csv").string(), train);
  save_csv((dir / "test.csv").string(), test);
  save_manifest((dir / "manifest.json").string(),
                {args.classes, args.dim, "train.csv", "test.csv", args.seed});

  write_run_manifest((dir / "gen-data.manifest.json").string(), "gen-data",
                     json{{"classes", args.classes},
                          {"per_class", args.per_class},
                          {"per_class_test", args.per_class_test},
                          {"dim", args.dim},
                          {"separation", args.separation}},
                     args.seed, json::object(),
                     json{{"train", "train.csv"},
                          {"test", "test.csv"},
                          {"manifest", "manifest.json"}},
                     json{{"total_seconds", seconds_since(t0)}});
  std::cout << "wrote " << (dir / "train.csv").string() << " (" << train.size()
            << " rows) and " << (dir / "test.csv").string() << " (" << test.size()
            << " rows)\n";
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string out;
  std::string arch = "64,32";
  TrainConfig cfg;
  CLI::Option* seed_opt = nullptr;
};

int run_train(const TrainArgs& args) {
  const auto t0 = Clock::now();
  const auto [train_set, test_set] = load_dataset(args.data);
  const std::vector<int> hidden = parse_int_list(args.arch, "--arch");

  const auto method_start = Clock::now();
  const TrainResult result = train(train_set, hidden, args.cfg);
  const double method_seconds = seconds_since(method_start);

  save_checkpoint(result.model, args.out);
  write_run_manifest(args.out + ".manifest.json", "train",
                     json{{"arch", args.arch},
                          {"epochs", args.cfg.epochs},
                          {"batch_size", args.cfg.batch_size},
                          {"learning_rate", args.cfg.learning_rate},
                          {"momentum", args.cfg.momentum},
                          {"shuffle", args.cfg.shuffle},
                          {"final_train_accuracy", result.final_train_accuracy}},
                     args.cfg.seed, json{{"data", args.data}}, json{{"checkpoint", args.out}},
                     json{{"method_seconds", method_seconds},
                          {"total_seconds", seconds_since(t0)}});
  std::cout << "trained " << args.out << ": final train accuracy "
            << result.final_train_accuracy << "%\n";
  return 0;
}

// ----------------------------------------------------------------- unlearn

struct UnlearnArgs {
  std::string method;
  std::string ckpt;
  std::string data;
  std::string out;
  SplitFlags split;
  std::vector<std::string> base_sidecars;
  double p = 3.0;
  bool center = false;
  double tau = 0.75;
  int epochs = -1;  // -1 selects the per-method default
  double lr = -1.0;
  int batch_size = 32;
  std::uint64_t seed = 42;
  CLI::Option* seed_opt = nullptr;
};

int run_unlearn(const UnlearnArgs& args) {
  const auto t0 = Clock::now();
  const MlpModel model = load_checkpoint(args.ckpt);
  const auto [train_set, test_set] = load_dataset(args.data);
  const SplitDataset splits = args.split.make(train_set, test_set);

  bool has_base = false;
  const FeatureMap base = load_sidecars(args.base_sidecars, model, &has_base);
  if (has_base && args.method != "esc" && args.method != "esc-t") {
    throw UsageError("--base-sidecar only applies to esc and esc-t");
  }

  json outputs;
  json method_config{{"method", args.method}};
  double method_seconds = 0.0;

  if (args.method == "esc") {
    const EscConfig cfg{args.p, args.center};
    const auto m0 = Clock::now();
    const PrunedBasis basis =
        esc_fit(model, splits.forget_train.inputs, cfg, has_base ? &base : nullptr);
    method_seconds = seconds_since(m0);
    save_sidecar(args.out + ".sidecar.json", basis);
    outputs["sidecar"] = args.out + ".sidecar.json";
    method_config["p"] = args.p;
    method_config["center"] = args.center;
    method_config["k"] = basis.k;
  } else if (args.method == "esc-t") {
    EscTConfig cfg;
    cfg.tau = args.tau;
    cfg.seed = args.seed;
    cfg.batch_size = args.batch_size;
    if (args.epochs > 0) cfg.epochs = args.epochs;
    if (args.lr >= 0.0) cfg.learning_rate = args.lr;
    const auto m0 = Clock::now();
    Matrix features = forward_features(model, splits.forget_train.inputs);
    if (has_base) features = base.apply_columns(features);
    const SvdBasis svd = svd_complete(features);
    const MaskTrainResult trained =
        train_mask(model, svd.u, splits.forget_train, cfg, has_base ? &base : nullptr);
    const RefinedBasis refined = refine(svd.u, trained.state.m_r);
    method_seconds = seconds_since(m0);
    save_sidecar(args.out + ".sidecar.json", refined, cfg.tau);
    outputs["sidecar"] = args.out + ".sidecar.json";
    method_config["tau"] = cfg.tau;
    method_config["epochs"] = cfg.epochs;
    method_config["learning_rate"] = cfg.learning_rate;
    method_config["batch_size"] = cfg.batch_size;
    method_config["epochs_run"] = trained.stats.epochs_run;
    method_config["early_stopped"] = trained.stats.early_stopped;
  } else if (args.method == "ng" || args.method == "rl" || args.method == "finetune") {
    BaselineConfig cfg;
    cfg.batch_size = args.batch_size;
    cfg.seed = args.seed;
    if (args.method == "ng") {
      cfg.epochs = 5;
      cfg.learning_rate = 0.02;
    } else if (args.method == "rl") {
      cfg.epochs = 10;
      cfg.learning_rate = 0.05;
    } else {
      cfg.epochs = 20;
      cfg.learning_rate = 0.05;
    }
    if (args.epochs > 0) cfg.epochs = args.epochs;
    if (args.lr >= 0.0) cfg.learning_rate = args.lr;

    const auto m0 = Clock::now();
    const BaselineResult result =
        args.method == "ng"   ? negative_gradient(model, splits.forget_train, cfg)
        : args.method == "rl" ? random_label(model, splits.forget_train, cfg)
                              : finetune(model, splits.remain_train, cfg);
    method_seconds = seconds_since(m0);
    save_checkpoint(result.model, args.out + ".ckpt.json");
    outputs["checkpoint"] = args.out + ".ckpt.json";
    method_config["epochs"] = cfg.epochs;
    method_config["learning_rate"] = cfg.learning_rate;
    method_config["batch_size"] = cfg.batch_size;
    if (result.divergence_warning) {
      method_config["divergence_warning"] = true;
      std::cerr << "warning: " << args.method
                << " hit non-finite parameters; kept the last finite state\n";
    }
  } else if (args.method == "retrain") {
    std::vector<int> hidden;
    for (const Layer& layer : model.extractor) {
      hidden.push_back(static_cast<int>(layer.weight.rows()));
    }
    TrainConfig cfg;
    cfg.seed = args.seed;
    cfg.batch_size = args.batch_size;
    if (args.epochs > 0) cfg.epochs = args.epochs;
    if (args.lr >= 0.0) cfg.learning_rate = args.lr;

    const auto m0 = Clock::now();
    const TrainResult result = retrain(splits.remain_train, hidden, cfg);
    method_seconds = seconds_since(m0);
    save_checkpoint(result.model, args.out + ".ckpt.json");
    outputs["checkpoint"] = args.out + ".ckpt.json";
    method_config["epochs"] = cfg.epochs;
    method_config["learning_rate"] = cfg.learning_rate;
    method_config["final_train_accuracy"] = result.final_train_accuracy;
  } else {
    throw UsageError("unknown method '" + args.method + "'");
  }

  method_config["split"] = args.split.to_json();
  method_config["base_sidecars"] = args.base_sidecars;
  write_run_manifest(args.out + ".manifest.json", "unlearn", method_config, args.seed,
                     json{{"checkpoint", args.ckpt}, {"data", args.data}}, outputs,
                     json{{"method_seconds", method_seconds},
                          {"total_seconds", seconds_since(t0)}});
  std::cout << "unlearn " << args.method << " done in " << method_seconds
            << "s (method phase)\n";
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  std::vector<std::string> sidecars;
  SplitFlags split;
  std::string method_label = "model";
  bool with_kr = false;
  bool json_only = false;
  bool csv_only = false;
  ProbeConfig probe;
  std::uint64_t mia_seed = 0;
  std::uint64_t zrf_seed = 9001;
  double seconds_override = -1.0;
};

int run_eval(const EvalArgs& args) {
  const auto t0 = Clock::now();
  const MlpModel model = load_checkpoint(args.ckpt);
  const auto [train_set, test_set] = load_dataset(args.data);
  const SplitDataset splits = args.split.make(train_set, test_set);

  bool any_sidecar = false;
  const FeatureMap map = load_sidecars(args.sidecars, model, &any_sidecar);

  EvalOptions options;
  options.method_label = args.method_label;
  options.mia_seed = args.mia_seed;
  options.zrf_seed = args.zrf_seed;
  options.with_kr = args.with_kr;
  options.probe = args.probe;
  options.dataset_id = args.data;
  if (args.seconds_override >= 0.0) {
    options.method_seconds = args.seconds_override;
  } else {
    const std::string timing_source =
        !args.sidecars.empty() ? args.sidecars.front() : args.ckpt;
    options.method_seconds = method_seconds_from_manifest(timing_source).value_or(0.0);
  }

  const EvalReport report = evaluate(model, any_sidecar ? &map : nullptr, splits, options);

  if (!args.csv_only) save_report_json(args.out + ".json", report);
  if (!args.json_only) save_report_csv(args.out + ".csv", {report});
  write_run_manifest(args.out + ".manifest.json", "eval",
                     json{{"method_label", args.method_label},
                          {"with_kr", args.with_kr},
                          {"sidecars", args.sidecars},
                          {"split", args.split.to_json()}},
                     args.mia_seed, json{{"checkpoint", args.ckpt}, {"data", args.data}},
                     json{{"report_json", args.out + ".json"},
                          {"report_csv", args.out + ".csv"}},
                     json{{"total_seconds", seconds_since(t0)}});
  std::cout << report_to_json_string(report) << '\n';
  return 0;
}

// ------------------------------------------------------------------- probe

struct ProbeArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  std::vector<std::string> sidecars;
  SplitFlags split;
  std::string method_label = "probe";
  ProbeConfig probe;
};

int run_probe(const ProbeArgs& args) {
  const auto t0 = Clock::now();
  const MlpModel model = load_checkpoint(args.ckpt);
  const auto [train_set, test_set] = load_dataset(args.data);
  const SplitDataset splits = args.split.make(train_set, test_set);

  bool any_sidecar = false;
  const FeatureMap map = load_sidecars(args.sidecars, model, &any_sidecar);

  const LabeledSet full_train = concat(splits.forget_train, splits.remain_train);
  EvalReport report =
      kr_probe(model, any_sidecar ? &map : nullptr, full_train, splits, args.probe);
  report.method = args.method_label;
  report.dataset = args.data;

  save_report_json(args.out + ".json", report);
  write_run_manifest(args.out + ".manifest.json", "probe",
                     json{{"method_label", args.method_label},
                          {"sidecars", args.sidecars},
                          {"split", args.split.to_json()},
                          {"epochs", args.probe.epochs},
                          {"learning_rate", args.probe.learning_rate},
                          {"batch_size", args.probe.batch_size}},
                     args.probe.seed, json{{"checkpoint", args.ckpt}, {"data", args.data}},
                     json{{"report_json", args.out + ".json"}},
                     json{{"total_seconds", seconds_since(t0)}});
  std::cout << report_to_json_string(report) << '\n';
  return 0;
}

// -------------------------------------------------------------------- diag

struct DiagArgs {
  std::string ckpt;
  std::string unlearned_ckpt;
  std::string data;
  std::string out;
  std::vector<std::string> sidecars;
  SplitFlags split;
};

int run_diag(const DiagArgs& args) {
  const auto t0 = Clock::now();
  const MlpModel original = load_checkpoint(args.ckpt);
  const MlpModel unlearned =
      args.unlearned_ckpt.empty() ? original : load_checkpoint(args.unlearned_ckpt);
  const auto [train_set, test_set] = load_dataset(args.data);
  args.split.make(train_set, test_set);  // validates the split flags

  bool any_sidecar = false;
  const FeatureMap map = load_sidecars(args.sidecars, unlearned, &any_sidecar);
  const FeatureMap* hook = any_sidecar ? &map : nullptr;

  fs::create_directories(args.out);
  const fs::path dir(args.out);

  const auto original_by_class = features_by_class(original, nullptr, train_set);
  const auto unlearned_by_class = features_by_class(unlearned, hook, train_set);
  save_matrix_csv((dir / "cosine_original.csv").string(),
                  class_cosine_matrix(original_by_class), "c");
  save_matrix_csv((dir / "cosine_cross.csv").string(),
                  class_cosine_matrix(original_by_class, unlearned_by_class), "c");

  const WeightDiff wd = weight_diff(original, unlearned);
  {
    std::ofstream out(dir / "weight_diff.csv");
    if (!out) throw std::runtime_error("cannot write weight_diff.csv");
    out << "layer,value\n";
    for (std::size_t l = 0; l + 1 < wd.per_layer.size(); ++l) {
      out << "extractor_" << l << ',' << wd.per_layer[l] << '\n';
    }
    out << "head," << wd.head << '\n';
    out << "extractor_sum," << wd.extractor_sum << '\n';
  }

  // Raw features for external visualization tooling.
  const auto export_features = [&](const MlpModel& m, const FeatureMap* h,
                                   const fs::path& path) {
    LabeledSet features;
    features.classes = train_set.classes;
    features.labels = train_set.labels;
    Matrix cols = forward_features(m, train_set.inputs);
    if (h) cols = h->apply_columns(cols);
    features.inputs = transpose(cols);
    save_csv(path.string(), features);
  };
  export_features(original, nullptr, dir / "features_original.csv");
  export_features(unlearned, hook, dir / "features_unlearned.csv");

  write_run_manifest((dir / "diag.manifest.json").string(), "diag",
                     json{{"sidecars", args.sidecars}, {"split", args.split.to_json()}}, 0,
                     json{{"checkpoint", args.ckpt},
                          {"unlearned_checkpoint", args.unlearned_ckpt},
                          {"data", args.data}},
                     json{{"cosine_original", "cosine_original.csv"},
                          {"cosine_cross", "cosine_cross.csv"},
                          {"weight_diff", "weight_diff.csv"},
                          {"features_original", "features_original.csv"},
                          {"features_unlearned", "features_unlearned.csv"}},
                     json{{"total_seconds", seconds_since(t0)}});
  std::cout << "diagnostics written to " << args.out << '\n';
  return 0;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int run_report(const ReportArgs& args) {
  std::vector<EvalReport> reports;
  reports.reserve(args.inputs.size());
  for (const std::string& path : args.inputs) reports.push_back(load_report_json(path));

  std::vector<std::string> warnings;
  const std::string markdown = reports_to_markdown(reports, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';

  if (args.out.empty()) {
    std::cout << markdown;
  } else {
    std::ofstream out(args.out);
    if (!out) throw std::runtime_error("cannot write " + args.out);
    out << markdown;
    std::cout << "wrote " << args.out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-space machine unlearning toolkit"};
  app.set_version_flag("--version", std::string("unlearn ") + kToolVersion);
  app.require_subcommand(1);

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic blob dataset");
  gen->add_option("--classes", gen_args.classes, "number of classes (>= 2)");
  gen->add_option("--per-class", gen_args.per_class, "train samples per class");
  gen->add_option("--per-class-test", gen_args.per_class_test, "test samples per class");
  gen->add_option("--dim", gen_args.dim, "input dimension");
  gen->add_option("--separation", gen_args.separation, "minimum distance between class means");
  gen_args.seed_opt = gen->add_option("--seed", gen_args.seed, "generation seed");
  gen->add_option("--out", gen_args.out, "output directory")->required();

  TrainArgs train_args;
  CLI::App* trn = app.add_subcommand("train", "train the original model");
  trn->add_option("--data", train_args.data, "dataset manifest JSON")->required();
  trn->add_option("--out", train_args.out, "checkpoint output path")->required();
  trn->add_option("--arch", train_args.arch, "comma-separated hidden layer sizes");
  trn->add_option("--epochs", train_args.cfg.epochs, "training epochs");
  trn->add_option("--batch", train_args.cfg.batch_size, "batch size");
  trn->add_option("--lr", train_args.cfg.learning_rate, "learning rate");
  trn->add_option("--momentum", train_args.cfg.momentum, "SGD momentum");
  train_args.seed_opt = trn->add_option("--seed", train_args.cfg.seed, "training seed");

  UnlearnArgs unlearn_args;
  CLI::App* unl = app.add_subcommand("unlearn", "apply an unlearning method");
  unl->add_option("--method", unlearn_args.method,
                  "one of: esc, esc-t, ng, rl, finetune, retrain")
      ->required();
  unl->add_option("--ckpt", unlearn_args.ckpt, "original model checkpoint")->required();
  unl->add_option("--data", unlearn_args.data, "dataset manifest JSON")->required();
  unl->add_option("--out", unlearn_args.out, "output stem")->required();
  unlearn_args.split.attach(unl);
  unl->add_option("--base-sidecar", unlearn_args.base_sidecars,
                  "existing erasure sidecar(s) already in effect (incremental)");
  unl->add_option("--p", unlearn_args.p, "esc pruning percentage in [0,100)");
  unl->add_flag("--center", unlearn_args.center, "mean-center features before decomposition");
  unl->add_option("--tau", unlearn_args.tau, "esc-t binarization threshold in (0,1)");
  unl->add_option("--epochs", unlearn_args.epochs, "method epochs (default per method)");
  unl->add_option("--lr", unlearn_args.lr, "method learning rate (default per method)");
  unl->add_option("--batch", unlearn_args.batch_size, "batch size");
  unlearn_args.seed_opt = unl->add_option("--seed", unlearn_args.seed, "method seed");

  EvalArgs eval_args;
  CLI::App* evl = app.add_subcommand("eval", "evaluate a (wrapped) model");
  evl->add_option("--ckpt", eval_args.ckpt, "model checkpoint")->required();
  evl->add_option("--data", eval_args.data, "dataset manifest JSON")->required();
  evl->add_option("--out", eval_args.out, "report output stem")->required();
  evl->add_option("--sidecar", eval_args.sidecars, "erasure sidecar(s), applied in order");
  eval_args.split.attach(evl);
  evl->add_option("--method-label", eval_args.method_label, "method name for the report");
  evl->add_flag("--with-kr", eval_args.with_kr, "run the linear-probing sub-report");
  evl->add_flag("--json", eval_args.json_only, "emit only the JSON report");
  evl->add_flag("--csv", eval_args.csv_only, "emit only the CSV report");
  evl->add_option("--probe-epochs", eval_args.probe.epochs, "probe epochs");
  evl->add_option("--probe-lr", eval_args.probe.learning_rate, "probe learning rate");
  evl->add_option("--probe-batch", eval_args.probe.batch_size, "probe batch size");
  evl->add_option("--probe-seed", eval_args.probe.seed, "probe head seed");
  evl->add_option("--mia-seed", eval_args.mia_seed, "membership inference seed");
  evl->add_option("--zrf-seed", eval_args.zrf_seed, "random model seed for the ZRF score");
  evl->add_option("--seconds", eval_args.seconds_override,
                  "method seconds to record (default: from the producing manifest)");

  ProbeArgs probe_args;
  CLI::App* prb = app.add_subcommand("probe", "linear-probe a frozen extractor");
  prb->add_option("--ckpt", probe_args.ckpt, "model checkpoint")->required();
  prb->add_option("--data", probe_args.data, "dataset manifest JSON")->required();
  prb->add_option("--out", probe_args.out, "report output stem")->required();
  prb->add_option("--sidecar", probe_args.sidecars, "erasure sidecar(s), applied in order");
  probe_args.split.attach(prb);
  prb->add_option("--method-label", probe_args.method_label, "method name for the report");
  prb->add_option("--probe-epochs", probe_args.probe.epochs, "probe epochs");
  prb->add_option("--probe-lr", probe_args.probe.learning_rate, "probe learning rate");
  prb->add_option("--probe-batch", probe_args.probe.batch_size, "probe batch size");
  prb->add_option("--probe-seed", probe_args.probe.seed, "probe head seed");

  DiagArgs diag_args;
  CLI::App* dia = app.add_subcommand("diag", "feature and weight diagnostics");
  dia->add_option("--ckpt", diag_args.ckpt, "original model checkpoint")->required();
  dia->add_option("--unlearned-ckpt", diag_args.unlearned_ckpt,
                  "unlearned checkpoint (defaults to --ckpt)");
  dia->add_option("--data", diag_args.data, "dataset manifest JSON")->required();
  dia->add_option("--out", diag_args.out, "output directory")->required();
  dia->add_option("--sidecar", diag_args.sidecars, "erasure sidecar(s) for the unlearned side");
  diag_args.split.attach(dia);

  ReportArgs report_args;
  CLI::App* rep = app.add_subcommand("report", "merge eval reports into a markdown table");
  rep->add_option("reports", report_args.inputs, "report JSON files")->required();
  rep->add_option("--out", report_args.out, "markdown output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      if (!gen_args.seed_opt->count()) gen_args.seed = env_seed_fallback(gen_args.seed);
      return run_gen_data(gen_args);
    }
    if (trn->parsed()) {
      if (!train_args.seed_opt->count()) {
        train_args.cfg.seed = env_seed_fallback(train_args.cfg.seed);
      }
      return run_train(train_args);
    }
    if (unl->parsed()) {
      if (!unlearn_args.seed_opt->count()) {
        unlearn_args.seed = env_seed_fallback(unlearn_args.seed);
      }
      return run_unlearn(unlearn_args);
    }
    if (evl->parsed()) return run_eval(eval_args);
    if (prb->parsed()) return run_probe(probe_args);
    if (dia->parsed()) return run_diag(diag_args);
    if (rep->parsed()) return run_report(report_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
