#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "tabplus/data.hpp"
#include "tabplus/model.hpp"

namespace tabplus {

struct TrainSettings {
  std::size_t batch_size = 1024;
  std::size_t ghost_size = 8;
  double lr = 0.01;
  int lr_step = 10;
  int patience = 15;
  int max_epochs = 200;
  std::uint64_t seed = kDefaultSeeds[0];

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double val_auroc = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  bool ok = true;
  std::string failure;
  int failed_epoch = -1;
  int best_epoch = -1;
  double val_auroc = std::numeric_limits<double>::quiet_NaN();
  double holdout_auroc = std::numeric_limits<double>::quiet_NaN();
  std::vector<EpochLog> epochs;
};

/// Encoded rows for one fold; the schema is fitted on the training rows.
struct FoldData {
  FeatureSchema schema;
  EncodedRows train;
  EncodedRows validation;
  EncodedRows holdout;
};

FoldData prepare_fold(const Dataset& data, const FoldSplit& fold);

/// Observes which split is scored: "validation" after every epoch and
/// "holdout" once at the end.
using EvaluationHook = std::function<void(std::string_view split)>;

/// Mini-batch training with validation-AUROC early stopping.
///
/// Each epoch shuffles the training rows, runs Adam over consecutive
/// batches (a trailing batch of a single row joins the previous batch) with
/// lr from the step schedule, then scores validation in eval mode. The best
/// epoch is the earliest with the highest validation AUROC; training stops
/// once `patience` epochs pass without improvement. The best parameters are
/// restored before the holdout rows are scored, exactly once. A non-finite
/// loss or score marks the run failed instead of throwing.
TrainResult train_model(TabularModel& model, const FoldData& data, const TrainSettings& settings,
                        const EvaluationHook& on_evaluate = {});

/// Seed used to initialize the model of a run with training seed `seed`.
std::uint64_t init_seed(std::uint64_t seed);

/// Builds the model for `config` and trains it on `fold`.
struct FitOutput {
  TabularModel model;
  TrainResult result;
};
FitOutput fit(const ModelConfig& config, const FoldData& data, const TrainSettings& settings);

/// Batch indices [start, end) used for one epoch of `rows` rows.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t rows, std::size_t batch_size);

std::string epoch_log_csv(const TrainResult& result);

nlohmann::json result_json(const ExperimentConfig& config, std::uint64_t seed, int fold,
                           const std::string& dataset, const TrainResult& result);

}  // namespace tabplus
