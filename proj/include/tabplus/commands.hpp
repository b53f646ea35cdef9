#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tabplus/hpo.hpp"
#include "tabplus/interpret.hpp"

namespace tabplus {

/// Invalid invocation or input; mapped to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Default registry: $TABPLUS_REGISTRY, else the bundled data/registry.json.
std::filesystem::path default_registry();
/// Default output root: $TABPLUS_OUTPUT_ROOT, else ./runs.
std::filesystem::path default_output_root();

/// A registry dataset or an explicit CSV file.
struct DataSource {
  std::string dataset;
  std::filesystem::path csv;
  LabelSpec label;
  CsvOptions csv_options;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> ghost_size;
  std::filesystem::path registry = default_registry();
};

struct ResolvedData {
  std::string name;
  Dataset data;
  std::size_t batch_size = 1024;
  std::size_t ghost_size = 8;
};

/// Loads the data; batch and ghost sizes come from the registry unless overridden.
ResolvedData resolve_data(const DataSource& source);

/// Reads an experiment config file and validates it (UsageError names the axis).
ExperimentConfig read_experiment_config(const std::filesystem::path& path);

struct TrainCommand {
  DataSource source;
  ExperimentConfig experiment;
  std::uint64_t seed = kDefaultSeeds[0];
  int fold = 0;
  int patience = 15;
  int max_epochs = 200;
  std::filesystem::path output_root = default_output_root();
};

struct TrainOutcome {
  std::string run_id;
  std::filesystem::path run_dir;
  TrainResult result;
};

/// Content hash of everything that determines a run.
std::string run_id(const std::string& dataset, const ExperimentConfig& config, std::uint64_t seed,
                   int fold, const TrainSettings& settings);

/// Trains one fold and writes checkpoint, model config, fold manifest,
/// epoch log, result JSON and metadata under <output_root>/train/<run-id>.
TrainOutcome cmd_train(const TrainCommand& cmd, std::ostream* log = nullptr);

struct HpoCommand {
  DataSource source;
  ModelConfig base;
  std::vector<std::uint64_t> seeds = {kDefaultSeeds[0]};
  std::vector<int> folds = {0};
  int trials = kDefaultTrials;
  Sampler sampler = Sampler::kRandom;
  int jobs = 1;
  int patience = 15;
  int max_epochs = 200;
  std::filesystem::path output_root = default_output_root();
};

struct HpoOutcome {
  std::filesystem::path dir;
  std::vector<std::vector<TrialRecord>> studies;  ///< seed-major, then fold
  std::vector<double> best_holdout;               ///< holdout AUROC of each study's best trial
  Summary summary;
};

/// One study per (seed, fold). Studies resume from their trial log.
HpoOutcome cmd_hpo(const HpoCommand& cmd, std::ostream* log = nullptr);

struct AblationScenario {
  bool use_skip;
  bool use_gate;
  std::string label() const;
};

inline constexpr AblationScenario kAblationScenarios[] = {{true, true}, {true, false}, {false, false}};

struct AblateCommand {
  std::vector<DataSource> sources;
  std::vector<ExperimentConfig> experiments;  ///< one per family
  std::vector<std::uint64_t> seeds = {kDefaultSeeds[0], kDefaultSeeds[1]};
  std::vector<int> folds = {0, 1, 2, 3, 4};
  int patience = 15;
  int max_epochs = 200;
  std::filesystem::path output_root = default_output_root();
};

struct AblateOutcome {
  std::filesystem::path dir;
  ResultTable table;                 ///< dataset -> "<family> <scenario>" -> holdout AUROCs
  std::vector<std::string> columns;
};

/// Fits every family under the three scenarios with otherwise identical
/// settings and seeds, writing per-run JSON lines and a scenario table.
AblateOutcome cmd_ablate(const AblateCommand& cmd, std::ostream* log = nullptr);

struct InspectCommand {
  std::filesystem::path checkpoint;  ///< manifest written by cmd_train
  DataSource source;
  bool apply_drops = false;
  std::filesystem::path output_dir;  ///< default: the checkpoint's directory
};

struct InspectOutcome {
  GateReport report;
  std::optional<DropComparison> drops;
};

/// Gate report over the fold's train and validation rows.
InspectOutcome cmd_inspect_gates(const InspectCommand& cmd, std::ostream* log = nullptr);

}  // namespace tabplus
