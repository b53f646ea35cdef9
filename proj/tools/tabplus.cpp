// Command-line front end: train, hpo, ablate, inspect-gates.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "tabplus/commands.hpp"

using namespace tabplus;

namespace {

struct SourceFlags {
  std::string dataset;
  std::string csv;
  std::string label;
  std::string positive = "1";
  std::string delimiter = ",";
  bool no_header = false;
  std::size_t batch_size = 0;
  std::size_t ghost_size = 0;
  std::string registry;

  void add(CLI::App* app, bool dataset_required_alone = true) {
    auto* d = app->add_option("--dataset", dataset, "Registry dataset name");
    auto* c = app->add_option("--csv", csv, "CSV file (instead of --dataset)");
    if (dataset_required_alone) d->excludes(c);
    app->add_option("--label", label, "Label column of the CSV");
    app->add_option("--positive", positive, "Positive class token")->capture_default_str();
    app->add_option("--delimiter", delimiter, "CSV delimiter")->capture_default_str();
    app->add_flag("--no-header", no_header, "CSV has no header; columns are named c0, c1, ...");
    app->add_option("--batch-size", batch_size, "Override the registry batch size");
    app->add_option("--ghost-size", ghost_size, "Override the registry ghost batch size");
    app->add_option("--registry", registry, "Dataset registry JSON");
  }

  DataSource source(const std::string& name) const {
    DataSource s;
    s.dataset = name;
    if (name.empty()) s.csv = csv;
    s.label = {label, positive};
    if (delimiter.size() != 1) throw UsageError("--delimiter must be a single character");
    s.csv_options = {delimiter[0], !no_header};
    if (batch_size) s.batch_size = batch_size;
    if (ghost_size) s.ghost_size = ghost_size;
    if (!registry.empty()) s.registry = registry;
    return s;
  }
};

struct ModelFlags {
  std::string family;
  std::string config;
  bool raw_numeric = false;
  bool no_skip = false;
  bool no_gate = false;
  std::size_t embedding_size = 0;

  void add(CLI::App* app) {
    app->add_option("--family", family, "mlp-plus, pnn or autoint");
    app->add_option("--config", config, "Experiment config JSON");
    app->add_flag("--raw-numeric-input", raw_numeric, "mlp-plus: feed numeric columns without embedding");
    app->add_flag("--no-skip", no_skip, "Ablate the skip path");
    app->add_flag("--no-gate", no_gate, "Ablate the leaky gates");
    app->add_option("--embedding-size", embedding_size, "Embedding size (8, 16 or 32)");
  }

  ExperimentConfig experiment() const {
    ExperimentConfig e;
    if (!config.empty()) {
      e = read_experiment_config(config);
      if (!family.empty() && parse_family(family) != e.model.family) {
        throw UsageError("--family " + family + " contradicts the config family " + to_string(e.model.family));
      }
    } else {
      if (family.empty()) throw UsageError("give --family or --config");
      e.model = default_config(parse_family(family));
    }
    if (raw_numeric) e.model.raw_numeric_input = true;
    if (no_skip) e.model.use_skip = false;
    if (no_gate) e.model.use_gate = false;
    if (embedding_size) e.model.embedding_size = embedding_size;
    return e;
  }
};

std::vector<int> parse_folds(const std::string& text) {
  if (text == "all") return {0, 1, 2, 3, 4};
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw UsageError("bad fold '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("no folds given");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw UsageError("bad seed '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("no seeds given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular deep learning: MLP+, PNN and AutoInt with leaky gates"};
  app.require_subcommand(1);
  std::string output;
  bool quiet = false;
  app.add_option("--output", output, "Output root (default $TABPLUS_OUTPUT_ROOT or ./runs)");
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  int patience = 15, max_epochs = 200;
  auto add_training = [&](CLI::App* sub) {
    sub->add_option("--patience", patience, "Early stopping patience in epochs")->capture_default_str();
    sub->add_option("--max-epochs", max_epochs, "Epoch cap")->capture_default_str();
  };

  SourceFlags src;
  ModelFlags model;

  auto* train = app.add_subcommand("train", "Train one model on one fold");
  src.add(train);
  model.add(train);
  add_training(train);
  std::uint64_t seed = kDefaultSeeds[0];
  int fold = 0;
  double lr = 0;
  int lr_step = 0;
  train->add_option("--seed", seed, "Fold and training seed")->capture_default_str();
  train->add_option("--fold", fold, "Fold index 0-4")->capture_default_str();
  train->add_option("--lr", lr, "Learning rate (0.1, 0.01 or 0.001)");
  train->add_option("--lr-step", lr_step, "Epochs between lr decays (10, 15 or 20)");

  auto* hpo = app.add_subcommand("hpo", "Hyperparameter search per fold");
  src.add(hpo);
  model.add(hpo);
  add_training(hpo);
  std::string folds_text = "0", seeds_text = std::to_string(kDefaultSeeds[0]), sampler = "random";
  int trials = kDefaultTrials, jobs = 1;
  hpo->add_option("--folds", folds_text, "Comma-separated folds or 'all'")->capture_default_str();
  hpo->add_option("--seeds", seeds_text, "Comma-separated seeds")->capture_default_str();
  hpo->add_option("--trials", trials, "Trials per study")->capture_default_str();
  hpo->add_option("--sampler", sampler, "random or surrogate")->capture_default_str();
  hpo->add_option("--jobs", jobs, "Concurrent trials")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "skip/gate ablation with fixed hyperparameters");
  std::vector<std::string> ablate_datasets, ablate_families, ablate_configs;
  std::string ablate_folds = "all", ablate_seeds = "20210,20211";
  ablate->add_option("--dataset", ablate_datasets, "Registry datasets (repeatable)");
  ablate->add_option("--family", ablate_families, "Families (repeatable)");
  ablate->add_option("--config", ablate_configs, "Experiment configs (repeatable, one per family)");
  ablate->add_option("--folds", ablate_folds, "Comma-separated folds or 'all'")->capture_default_str();
  ablate->add_option("--seeds", ablate_seeds, "Comma-separated seeds")->capture_default_str();
  std::string ablate_registry;
  ablate->add_option("--registry", ablate_registry, "Dataset registry JSON");
  add_training(ablate);

  auto* inspect = app.add_subcommand("inspect-gates", "Leaky gate report for a trained mlp-plus run");
  std::string checkpoint;
  bool apply_drops = false;
  std::string report_dir;
  inspect->add_option("--checkpoint", checkpoint, "checkpoint.json written by train")->required();
  src.add(inspect);
  inspect->add_flag("--apply-drops", apply_drops, "Drop never-passing columns and refit");
  inspect->add_option("--report-dir", report_dir, "Where to write the report (default: run directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  std::ostream* log = quiet ? nullptr : &std::cerr;
  const std::filesystem::path root = output.empty() ? default_output_root() : std::filesystem::path(output);
  try {
    if (train->parsed()) {
      TrainCommand cmd;
      cmd.source = src.source(src.dataset);
      cmd.experiment = model.experiment();
      if (lr != 0) cmd.experiment.lr = lr;
      if (lr_step != 0) cmd.experiment.lr_step = lr_step;
      cmd.seed = seed;
      cmd.fold = fold;
      cmd.patience = patience;
      cmd.max_epochs = max_epochs;
      cmd.output_root = root;
      const auto out = cmd_train(cmd, log);
      std::cout << (out.run_dir / "result.json").string() << '\n';
      return out.result.ok ? kExitOk : kExitFailure;
    }
    if (hpo->parsed()) {
      HpoCommand cmd;
      cmd.source = src.source(src.dataset);
      cmd.base = model.experiment().model;
      cmd.folds = parse_folds(folds_text);
      cmd.seeds = parse_seeds(seeds_text);
      cmd.trials = trials;
      cmd.sampler = parse_sampler(sampler);
      cmd.jobs = jobs;
      cmd.patience = patience;
      cmd.max_epochs = max_epochs;
      cmd.output_root = root;
      const auto out = cmd_hpo(cmd, log);
      std::cout << (out.dir / "summary.json").string() << '\n';
      return kExitOk;
    }
    if (ablate->parsed()) {
      AblateCommand cmd;
      for (const auto& name : ablate_datasets) {
        DataSource s;
        s.dataset = name;
        if (!ablate_registry.empty()) s.registry = ablate_registry;
        cmd.sources.push_back(s);
      }
      for (const auto& path : ablate_configs) cmd.experiments.push_back(read_experiment_config(path));
      for (const auto& f : ablate_families) {
        const Family fam = parse_family(f);
        const bool covered = std::any_of(cmd.experiments.begin(), cmd.experiments.end(),
                                         [&](const ExperimentConfig& e) { return e.model.family == fam; });
        if (!covered) cmd.experiments.push_back(ExperimentConfig{default_config(fam), 0.01, 10});
      }
      cmd.folds = parse_folds(ablate_folds);
      cmd.seeds = parse_seeds(ablate_seeds);
      cmd.patience = patience;
      cmd.max_epochs = max_epochs;
      cmd.output_root = root;
      const auto out = cmd_ablate(cmd, log);
      std::cout << (out.dir / "ablation.csv").string() << '\n';
      return kExitOk;
    }
    if (inspect->parsed()) {
      InspectCommand cmd;
      cmd.checkpoint = checkpoint;
      cmd.source = src.source(src.dataset);
      cmd.apply_drops = apply_drops;
      cmd.output_dir = report_dir;
      const auto out = cmd_inspect_gates(cmd, log);
      std::cout << gate_report_csv(out.report);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
