// lbrkit: command-line front end for training and evaluating latent-blending
// fake-image detectors on precomputed embedding stores.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lbr/embedding_store.hpp"
#include "lbr/metrics.hpp"
#include "lbr/oneclass.hpp"
#include "lbr/sweep.hpp"
#include "lbr/synthetic.hpp"
#include "lbr/trainer.hpp"
#include "run_manifest.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitRuntime = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dotted config-key flags shared by `train` and `sweep`.
struct ConfigFlags {
  std::string config_file;
  bool desk_scale = false;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_file, "JSON config with dotted or nested keys");
    cmd.add_flag("--desk-scale", desk_scale,
                 "start from the synthetic-world settings (lr 1e-3, batch 100, width 256)");
    cmd.add_option("--seed", seed, "master seed (same as --train.seed)");
    for (const auto& key : lbr::config_keys()) {
      cmd.add_option_function<std::string>(
          "--" + key, [this, key](const std::string& v) { overrides[key] = v; },
          "override " + key);
    }
  }

  lbr::TrainConfig resolve() const {
    lbr::TrainConfig config = desk_scale ? lbr::desk_scale_config() : lbr::TrainConfig{};
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw InputError("cannot open config " + config_file);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& ex) {
        throw InputError(config_file + ": " + ex.what());
      }
      config = lbr::config_from_json(doc, config);
    }
    for (const auto& [key, value] : overrides) lbr::set_config_value(config, key, value);
    if (seed) config.seed = *seed;
    config.validate();
    return config;
  }
};

lbr::EmbeddingStore load_store(const std::string& path) {
  if (!fs::exists(path)) throw InputError("store not found: " + path);
  return lbr::read_store_file(path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  lbrkit::write_atomically(path, text);
}

fs::path with_suffix(const fs::path& prefix, const std::string& suffix) {
  auto p = prefix;
  p += suffix;
  return p;
}

std::size_t sweep_workers() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LBR_THREADS")) {
    try {
      const auto cap = std::stoul(env);
      if (cap > 0) n = std::min<std::size_t>(n, cap);
    } catch (const std::exception&) {
      throw UsageError(std::string("LBR_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return n;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad grid value '" + item + "'");
    }
  }
  if (grid.empty()) throw UsageError("sweep grid is empty");
  return grid;
}

// --- subcommands -----------------------------------------------------------

struct SynthArgs {
  bool canonical = false;
  std::string spec_file;
  std::string out_dir;
  std::string name = "world";
};

int run_synth(const SynthArgs& args) {
  lbrkit::RunManifest run("synth");
  lbr::synth::SynthSpec spec;
  if (args.canonical == !args.spec_file.empty()) {
    throw UsageError("synth needs exactly one of --canonical or --spec");
  }
  if (args.canonical) {
    spec = lbr::synth::canonical_scenario();
  } else {
    std::ifstream in(args.spec_file);
    if (!in) throw InputError("cannot open spec " + args.spec_file);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
      throw InputError(args.spec_file + ": " + ex.what());
    }
    spec = lbr::synth::spec_from_json(doc);
    run.add_input(args.spec_file);
  }
  const auto store = lbr::synth::generate(spec);
  fs::create_directories(args.out_dir);
  const auto store_path = fs::path(args.out_dir) / (args.name + ".lbrs");
  lbr::write_store_file(store, store_path);
  const auto spec_path = fs::path(args.out_dir) / (args.name + ".synth.json");
  write_text(spec_path, lbr::synth::to_json(spec).dump(2) + "\n");

  run.set_config(lbr::synth::to_json(spec));
  run.add_output(store_path);
  run.finish();
  std::cout << "wrote " << store.size() << " records (dimension " << store.dimension() << ") to "
            << store_path.string() << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string store;
  std::string out;
  bool quiet = false;
};

int run_train(const TrainArgs& args, const ConfigFlags& flags) {
  lbrkit::RunManifest run("train");
  const auto config = flags.resolve();
  const auto store = load_store(args.store);
  run.add_input(args.store);

  const auto result = lbr::train(store, config, [&](const lbr::EpochStats& e) {
    if (!args.quiet) {
      std::cerr << "epoch " << e.epoch << "/" << config.max_epochs << "  loss " << e.mean_loss
                << "  train acc " << e.accuracy << '\n';
    }
  });

  const fs::path ckpt(args.out);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  {
    std::ostringstream bytes;
    lbr::write_checkpoint(result.checkpoint, bytes);
    lbrkit::write_atomically(ckpt, bytes.str());
  }
  const auto log_path = with_suffix(ckpt, ".log.json");
  write_text(log_path, lbr::to_json(result.log).dump(2) + "\n");

  run.set_config(lbr::to_json(config));
  run.add_output(ckpt);
  run.add_output(log_path);
  run.finish();
  std::cout << "checkpoint " << ckpt.string() << "  final train acc "
            << result.log.epochs.back().accuracy << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::vector<std::string> stores;
  std::string out;
  double a_base = 50.0;
  double threshold = 0.5;
  bool include_training = true;
  bool worst_include_training = false;
};

lbr::EvalOptions eval_options(const EvalArgs& args) {
  lbr::EvalOptions options;
  options.a_base = args.a_base;
  options.threshold = args.threshold;
  options.include_training_in_mean = args.include_training;
  options.include_training_in_worst = args.worst_include_training;
  for (const auto& s : args.stores) options.store_names.push_back(fs::path(s).stem().string());
  return options;
}

void emit_report(const lbr::EvalReport& report, const fs::path& prefix, lbrkit::RunManifest& run) {
  const auto json_path = with_suffix(prefix, ".json");
  const auto csv_path = with_suffix(prefix, ".csv");
  const auto txt_path = with_suffix(prefix, ".txt");
  const auto text = lbr::to_text(report);
  write_text(json_path, lbr::to_json(report).dump(2) + "\n");
  write_text(csv_path, lbr::to_csv(report));
  write_text(txt_path, text);
  run.add_output(json_path);
  run.add_output(csv_path);
  run.add_output(txt_path);
  run.finish();
  std::cout << text;
}

int run_eval(const EvalArgs& args) {
  lbrkit::RunManifest run("eval");
  if (!fs::exists(args.checkpoint)) throw InputError("checkpoint not found: " + args.checkpoint);
  const auto checkpoint = lbr::read_checkpoint_file(args.checkpoint);
  run.add_input(args.checkpoint);
  std::vector<lbr::EmbeddingStore> stores;
  for (const auto& s : args.stores) {
    stores.push_back(load_store(s));
    run.add_input(s);
  }
  const auto options = eval_options(args);
  const auto report = lbr::evaluate(checkpoint, stores, options);
  run.set_config({{"a_base", args.a_base},
                  {"threshold", args.threshold},
                  {"include_training", args.include_training},
                  {"worst_include_training", args.worst_include_training}});
  emit_report(report, args.out, run);
  return kExitOk;
}

struct SweepArgs {
  std::string axis;
  std::string grid;
  std::string store;
  std::string out;
};

int run_sweep_cmd(const SweepArgs& args, const ConfigFlags& flags) {
  lbrkit::RunManifest run("sweep");
  lbr::SweepAxis axis;
  try {
    axis = lbr::sweep_axis_from_string(args.axis);
  } catch (const lbr::ConfigError& ex) {
    throw UsageError(ex.what());
  }
  const auto grid = parse_grid(args.grid);
  const auto base = flags.resolve();
  const auto store = load_store(args.store);
  run.add_input(args.store);

  const auto points = lbr::run_sweep(store, axis, grid, base, sweep_workers());
  const fs::path out(args.out);
  const auto csv = lbr::sweep_csv(axis, points);
  write_text(out, csv);
  run.set_config({{"axis", args.axis}, {"grid", grid}, {"base", lbr::to_json(base)}});
  run.add_output(out);
  run.finish();
  std::cout << csv;
  return kExitOk;
}

struct OneClassArgs {
  std::string store;
  std::vector<std::string> eval_stores;
  double quantile = 0.95;
  std::string out;
  double a_base = 50.0;
};

int run_oneclass(const OneClassArgs& args) {
  lbrkit::RunManifest run("baseline oneclass");
  const auto train_store = load_store(args.store);
  run.add_input(args.store);
  const auto model = lbr::fit_oneclass(train_store, args.quantile);

  std::vector<lbr::EmbeddingStore> stores;
  lbr::EvalOptions options;
  options.a_base = args.a_base;
  if (args.eval_stores.empty()) {
    stores.push_back(train_store);
    options.store_names.push_back(fs::path(args.store).stem().string());
  } else {
    for (const auto& s : args.eval_stores) {
      stores.push_back(load_store(s));
      run.add_input(s);
      options.store_names.push_back(fs::path(s).stem().string());
    }
  }
  const auto report = lbr::score_oneclass(model, stores, options);
  run.set_config({{"quantile", args.quantile}, {"threshold", model.threshold}, {"a_base", args.a_base}});
  emit_report(report, args.out, run);
  return kExitOk;
}

struct ExportArgs {
  std::string checkpoint;
  std::string store;
  std::string out;
};

int run_export(const ExportArgs& args) {
  lbrkit::RunManifest run("export-penultimate");
  if (!fs::exists(args.checkpoint)) throw InputError("checkpoint not found: " + args.checkpoint);
  const auto checkpoint = lbr::read_checkpoint_file(args.checkpoint);
  const auto store = load_store(args.store);
  run.add_input(args.checkpoint);
  run.add_input(args.store);
  const auto features = lbr::export_penultimate(checkpoint, store);
  const fs::path out(args.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  lbr::write_store_file(features, out);
  run.add_output(out);
  run.finish();
  std::cout << "wrote " << features.size() << " x " << features.dimension() << " features to "
            << out.string() << '\n';
  return kExitOk;
}

struct InspectArgs {
  std::string store;
  std::size_t head = 0;
};

int run_inspect(const InspectArgs& args) {
  const auto store = load_store(args.store);
  std::map<std::string, std::size_t> counts;
  for (const auto& r : store.records) {
    counts[store.manifest.find(r.generator_id)->name + "/" + lbr::to_string(r.split)]++;
  }
  nlohmann::json summary = {{"path", args.store},
                            {"version", lbr::kStoreVersion},
                            {"record_count", store.size()},
                            {"dimension", store.dimension()},
                            {"manifest", lbr::to_json(store.manifest)},
                            {"counts", counts}};
  std::cout << summary.dump(2) << '\n';
  for (std::size_t i = 0; i < std::min(args.head, store.size()); ++i) {
    const auto& r = store.records[i];
    std::cout << i << ": " << lbr::to_string(r.label) << " gen=" << r.generator_id << " "
              << lbr::to_string(r.split) << " [";
    for (std::size_t k = 0; k < std::min<std::size_t>(r.embedding.size(), 4); ++k) {
      std::cout << (k ? ", " : "") << r.embedding[k];
    }
    std::cout << (r.embedding.size() > 4 ? ", ...]" : "]") << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lbrkit: latent blending regularization toolkit"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a Gaussian-cluster embedding world");
  synth->add_flag("--canonical", synth_args.canonical, "use the built-in acceptance scenario");
  synth->add_option("--spec", synth_args.spec_file, "SynthSpec JSON file");
  synth->add_option("-o,--out", synth_args.out_dir, "output directory")->required();
  synth->add_option("--name", synth_args.name, "store file stem");

  TrainArgs train_args;
  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "train an MLP detector");
  train->add_option("--store", train_args.store, "embedding store")->required();
  train->add_option("-o,--out", train_args.out, "checkpoint path")->required();
  train->add_flag("-q,--quiet", train_args.quiet, "no per-epoch progress");
  train_flags.attach(*train);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one or more stores");
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
  eval->add_option("--store", eval_args.stores, "embedding store (repeatable)")->required();
  eval->add_option("-o,--out", eval_args.out, "report path prefix")->required();
  eval->add_option("--a-base", eval_args.a_base, "baseline accuracy for reliability")
      ->capture_default_str();
  eval->add_option("--threshold", eval_args.threshold, "fake probability threshold")
      ->capture_default_str();
  eval->add_option("--include-training", eval_args.include_training,
                   "include training generators in mean/std")
      ->capture_default_str();
  eval->add_flag("--worst-include-training", eval_args.worst_include_training,
                 "include training generators in the worst case");

  SweepArgs sweep_args;
  ConfigFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "train/evaluate across a grid of one setting");
  sweep->add_option("--axis", sweep_args.axis, "alpha_B or depth")->required();
  sweep->add_option("--grid", sweep_args.grid, "comma-separated values")->required();
  sweep->add_option("--store", sweep_args.store, "embedding store")->required();
  sweep->add_option("-o,--out", sweep_args.out, "CSV path")->required();
  sweep_flags.attach(*sweep);

  OneClassArgs oc_args;
  auto* baseline = app.add_subcommand("baseline", "reference detectors");
  baseline->require_subcommand(1);
  auto* oneclass = baseline->add_subcommand("oneclass", "Mahalanobis one-class baseline");
  oneclass->add_option("--store", oc_args.store, "store whose TRAIN reals are fitted")->required();
  oneclass->add_option("--eval-store", oc_args.eval_stores, "stores to score (default: --store)");
  oneclass->add_option("--quantile", oc_args.quantile, "distance quantile for the threshold")
      ->capture_default_str();
  oneclass->add_option("--a-base", oc_args.a_base, "baseline accuracy")->capture_default_str();
  oneclass->add_option("-o,--out", oc_args.out, "report path prefix")->required();

  ExportArgs export_args;
  auto* exp = app.add_subcommand("export-penultimate", "dump last-hidden-layer features");
  exp->add_option("--checkpoint", export_args.checkpoint, "checkpoint file")->required();
  exp->add_option("--store", export_args.store, "embedding store")->required();
  exp->add_option("-o,--out", export_args.out, "output store path")->required();

  InspectArgs inspect_args;
  auto* inspect = app.add_subcommand("inspect", "print a store's header and manifest");
  inspect->add_option("store", inspect_args.store, "embedding store")->required();
  inspect->add_option("--head", inspect_args.head, "also print the first N records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (train->parsed()) return run_train(train_args, train_flags);
    if (eval->parsed()) return run_eval(eval_args);
    if (sweep->parsed()) return run_sweep_cmd(sweep_args, sweep_flags);
    if (oneclass->parsed()) return run_oneclass(oc_args);
    if (exp->parsed()) return run_export(export_args);
    if (inspect->parsed()) return run_inspect(inspect_args);
  } catch (const UsageError& ex) {
    std::cerr << "usage error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const lbr::TrainingAborted& ex) {
    std::cerr << "training aborted: " << ex.what() << '\n';
    return kExitRuntime;
  } catch (const InputError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitInput;
  } catch (const lbr::Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitInput;
  } catch (const std::exception& ex) {
    std::cerr << "fatal: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
