#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "tabplus/training.hpp"

namespace tabplus {

/// Number of points in a family's search grid: 144 shared points times
/// 12 product points (pnn) or 96 attention points (autoint).
std::size_t grid_size(Family family);

/// Decodes a grid index (mixed radix, shared axes first) onto `base`.
/// Fields outside the searched axes (ablation flags, slope, raw input and,
/// for mlp-plus and pnn, the embedding size) are taken from `base`.
ExperimentConfig grid_point(const ModelConfig& base, std::size_t index);

/// Inverse of grid_point for a config inside the grid.
std::size_t grid_index(const ExperimentConfig& config);

enum class Sampler {
  kRandom,     ///< uniform without replacement
  kSurrogate,  ///< random warm-up, then neighbours of the best trials so far
};

std::string to_string(Sampler sampler);
Sampler parse_sampler(const std::string& text);

inline constexpr int kDefaultTrials = 20;

struct TrialRecord {
  int trial = 0;
  std::size_t point = 0;
  ExperimentConfig config;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string failure;
  int best_epoch = -1;
  double val_auroc = 0.0;
  double holdout_auroc = 0.0;
  std::vector<double> val_curve;
};

void to_json(nlohmann::json& j, const TrialRecord& r);
void from_json(const nlohmann::json& j, TrialRecord& r);

struct StudySettings {
  ModelConfig base;           ///< family, ablation flags and fixed fields
  TrainSettings train;        ///< batch, ghost, patience and epoch cap; lr/step/seed are overridden
  int trials = kDefaultTrials;
  std::uint64_t seed = kDefaultSeeds[0];
  Sampler sampler = Sampler::kRandom;
  int jobs = 1;               ///< concurrent trials (random sampler only)
  int surrogate_warmup = 5;
};

/// Grid point for trial previous.size(), given the records of the earlier
/// trials. Deterministic in (settings, previous records).
std::size_t next_point(const StudySettings& settings, const std::vector<TrialRecord>& previous);

/// Runs the trials that `previous` does not already cover and returns all
/// records ordered by trial index. `on_record` sees each new record in
/// trial order, whatever order the trials finish in.
/// Throws std::runtime_error if every trial failed.
std::vector<TrialRecord> run_study(const FoldData& data, const StudySettings& settings,
                                   std::vector<TrialRecord> previous = {},
                                   const std::function<void(const TrialRecord&)>& on_record = {});

/// Index of the ok trial with the highest validation AUROC (earliest on ties).
int best_trial(const std::vector<TrialRecord>& records);

/// Mean and sample standard deviation in percent.
struct Summary {
  std::size_t count = 0;
  double mean_pct = 0.0;
  double sd_pct = 0.0;
};

/// Order-independent: values are summed in sorted order.
Summary summarize(std::vector<double> aurocs);

/// "92.4" style one-decimal rendering.
std::string format_pct(double pct);

/// holdout AUROCs keyed by dataset, then by column label (model or scenario).
using ResultTable = std::map<std::string, std::map<std::string, std::vector<double>>>;

/// Per-dataset mean/sd rows plus an unweighted mean-over-datasets row.
std::string summary_csv(const ResultTable& table, const std::vector<std::string>& columns);
nlohmann::json summary_json(const ResultTable& table, const std::vector<std::string>& columns);

}  // namespace tabplus
