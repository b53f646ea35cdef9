#include "tabplus/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>

#include "tabplus/metrics.hpp"
#include "tabplus/ops.hpp"

namespace tabplus {

namespace {

constexpr std::uint64_t kInitSalt = 0x696e6974;     // "init"
constexpr std::uint64_t kShuffleSalt = 0x73687566;  // "shuf"
constexpr std::uint64_t kDropoutSalt = 0x64726f70;  // "drop"

std::vector<std::vector<double>> snapshot(TabularModel& model) {
  std::vector<std::vector<double>> out;
  for (const auto& e : model.state()) out.emplace_back(e.data.begin(), e.data.end());
  return out;
}

void restore(TabularModel& model, const std::vector<std::vector<double>>& saved) {
  auto state = model.state();
  for (std::size_t i = 0; i < state.size(); ++i) {
    std::copy(saved[i].begin(), saved[i].end(), state[i].data.begin());
  }
}

bool finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainSettings::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  if (ghost_size < 2 || ghost_size > batch_size) {
    throw std::invalid_argument("ghost size must be in [2, batch size]");
  }
  if (patience <= 0) throw std::invalid_argument("patience must be positive");
  if (max_epochs <= 0) throw std::invalid_argument("max epochs must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (lr_step <= 0) throw std::invalid_argument("lr step must be positive");
}

std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, kInitSalt); }

FoldData prepare_fold(const Dataset& data, const FoldSplit& fold) {
  FoldData out;
  out.schema = fit_schema(data, fold.train);
  out.train = encode_rows(out.schema, data, fold.train);
  out.validation = encode_rows(out.schema, data, fold.validation);
  out.holdout = encode_rows(out.schema, data, fold.holdout);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t rows, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < rows; start += batch_size) {
    out.emplace_back(start, std::min(rows, start + batch_size));
  }
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out.pop_back();
    out.back().second = rows;
  }
  return out;
}

TrainResult train_model(TabularModel& model, const FoldData& data, const TrainSettings& settings,
                        const EvaluationHook& on_evaluate) {
  settings.validate();
  if (data.train.rows < 2) throw std::invalid_argument("training needs at least 2 rows");
  model.set_ghost_size(settings.ghost_size);
  const auto params = model.parameters();
  const LrSchedule schedule(settings.lr, settings.lr_step);
  Rng shuffle_rng(derive_seed(settings.seed, kShuffleSalt));
  Rng dropout_rng(derive_seed(settings.seed, kDropoutSalt));

  TrainResult result;
  std::vector<std::vector<double>> best_state;
  std::vector<std::size_t> order(data.train.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto ranges = batch_ranges(order.size(), settings.batch_size);

  for (int epoch = 0; epoch < settings.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = schedule.at(epoch);
    shuffle_rng.shuffle(order);
    const EncodedRows shuffled = gather(data.train, order);
    double loss_sum = 0.0;
    bool diverged = false;
    for (const auto& [start, end] : ranges) {
      const BatchView batch = shuffled.view(start, end - start);
      for (auto* p : params) p->zero_grad();
      const Tensor logits = model.forward(batch, {true, &dropout_rng});
      const Tensor loss = ops::cross_entropy(
          logits, std::span<const int>(shuffled.labels).subspan(start, end - start));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        diverged = true;
        break;
      }
      loss.backward();
      adam_step(params, lr);
      loss_sum += value * double(end - start);
    }
    if (diverged) {
      result.ok = false;
      result.failure = "non-finite training loss";
      result.failed_epoch = epoch;
      break;
    }
    if (on_evaluate) on_evaluate("validation");
    const auto scores = model.predict_scores(data.validation.view());
    if (!finite(scores)) {
      result.ok = false;
      result.failure = "non-finite validation scores";
      result.failed_epoch = epoch;
      break;
    }
    const double val = auroc(scores, data.validation.labels);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back({epoch, loss_sum / double(order.size()), val, lr, seconds});
    if (result.best_epoch < 0 || val > result.val_auroc) {
      result.best_epoch = epoch;
      result.val_auroc = val;
      best_state = snapshot(model);
    } else if (epoch - result.best_epoch >= settings.patience) {
      break;
    }
  }

  if (!result.ok) {
    result.holdout_auroc = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  restore(model, best_state);
  if (on_evaluate) on_evaluate("holdout");
  result.holdout_auroc = auroc(model.predict_scores(data.holdout.view()), data.holdout.labels);
  return result;
}

FitOutput fit(const ModelConfig& config, const FoldData& data, const TrainSettings& settings) {
  TabularModel model(config, data.schema.fields(), settings.ghost_size, init_seed(settings.seed));
  TrainResult result = train_model(model, data, settings);
  return {std::move(model), std::move(result)};
}

std::string epoch_log_csv(const TrainResult& result) {
  std::string out = "epoch,loss,val_auroc,lr\n";
  for (const auto& e : result.epochs) {
    out += std::to_string(e.epoch) + "," + fmt(e.loss) + "," + fmt(e.val_auroc) + "," + fmt(e.lr) + "\n";
  }
  return out;
}

nlohmann::json result_json(const ExperimentConfig& config, std::uint64_t seed, int fold,
                           const std::string& dataset, const TrainResult& result) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"dataset", dataset},
                      {"config", config},
                      {"seed", seed},
                      {"fold", fold},
                      {"status", result.ok ? "ok" : "failed"},
                      {"best_epoch", result.best_epoch},
                      {"epochs_run", result.epochs.size()},
                      {"val_auroc", num(result.val_auroc)},
                      {"holdout_auroc", num(result.holdout_auroc)}};
  if (!result.ok) {
    j["failure"] = result.failure;
    j["failed_epoch"] = result.failed_epoch;
  }
  return j;
}

}  // namespace tabplus
