#include "tabplus/commands.hpp"

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <nlohmann/json.hpp>
#include <ostream>

#include "tabplus/io.hpp"

#ifndef TABPLUS_DATA_DIR
#define TABPLUS_DATA_DIR "data"
#endif

namespace tabplus {

using nlohmann::json;

namespace {

void note(std::ostream* log, const std::string& message) {
  if (log) *log << message << '\n' << std::flush;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const std::filesystem::path& path, const json& j) {
  io::write_file_atomic(path, j.dump(2) + "\n");
}

json metadata(double seconds) {
  return {{"finished_at", utc_now()}, {"wall_seconds", seconds}, {"omp_max_threads", omp_get_max_threads()}};
}

FoldSplit select_fold(const Dataset& data, std::uint64_t seed, int fold) {
  if (fold < 0 || fold >= kFoldCount) {
    throw UsageError("fold must be in [0, " + std::to_string(kFoldCount - 1) + "], got " + std::to_string(fold));
  }
  return make_folds(data.rows(), seed)[std::size_t(fold)];
}

TrainSettings settings_for(const ResolvedData& d, const ExperimentConfig& e, std::uint64_t seed, int patience,
                           int max_epochs) {
  TrainSettings s;
  s.batch_size = d.batch_size;
  s.ghost_size = d.ghost_size;
  s.lr = e.lr;
  s.lr_step = e.lr_step;
  s.seed = seed;
  s.patience = patience;
  s.max_epochs = max_epochs;
  return s;
}

json settings_json(const TrainSettings& s) {
  return {{"batch_size", s.batch_size}, {"ghost_size", s.ghost_size}, {"patience", s.patience},
          {"max_epochs", s.max_epochs}};
}

void log_dropped(const Dataset& d, std::ostream* log) {
  for (const auto& c : d.dropped_constant) note(log, "notice: dropped constant column '" + c + "'");
}

}  // namespace

std::filesystem::path default_registry() {
  if (const char* env = std::getenv("TABPLUS_REGISTRY"); env && *env) return env;
  return std::filesystem::path(TABPLUS_DATA_DIR) / "registry.json";
}

std::filesystem::path default_output_root() {
  if (const char* env = std::getenv("TABPLUS_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

ResolvedData resolve_data(const DataSource& src) {
  if (src.dataset.empty() == src.csv.empty()) {
    throw UsageError("give exactly one of a registry dataset name or a CSV path");
  }
  ResolvedData out;
  if (!src.dataset.empty()) {
    if (!std::filesystem::exists(src.registry)) {
      throw UsageError("dataset registry not found: " + src.registry.string());
    }
    const auto registry = load_registry(src.registry);
    const auto it = registry.find(src.dataset);
    if (it == registry.end()) throw UsageError("unknown dataset '" + src.dataset + "' (not in the registry)");
    out.name = it->first;
    out.batch_size = it->second.batch_size;
    out.ghost_size = it->second.ghost_size;
    out.data = load_entry(it->second);
  } else {
    if (src.label.column.empty()) throw UsageError("a CSV source needs --label");
    if (!std::filesystem::exists(src.csv)) throw UsageError("CSV file not found: " + src.csv.string());
    out.name = src.csv.stem().string();
    out.data = load_csv(src.csv, src.label, src.csv_options, out.name);
  }
  if (src.batch_size) out.batch_size = *src.batch_size;
  if (src.ghost_size) out.ghost_size = *src.ghost_size;
  return out;
}

ExperimentConfig read_experiment_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    auto c = j.get<ExperimentConfig>();
    validate(c);
    return c;
  } catch (const ConfigError& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
}

std::string run_id(const std::string& dataset, const ExperimentConfig& config, std::uint64_t seed, int fold,
                   const TrainSettings& settings) {
  const json key = {{"dataset", dataset},
                    {"config", config},
                    {"seed", seed},
                    {"fold", fold},
                    {"batch_size", settings.batch_size},
                    {"ghost_size", settings.ghost_size},
                    {"patience", settings.patience},
                    {"max_epochs", settings.max_epochs}};
  return io::hex64(io::fnv1a64(key.dump()));
}

TrainOutcome cmd_train(const TrainCommand& cmd, std::ostream* log) {
  try {
    validate(cmd.experiment);
  } catch (const ConfigError& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ResolvedData d = resolve_data(cmd.source);
  log_dropped(d.data, log);
  const FoldSplit fold = select_fold(d.data, cmd.seed, cmd.fold);
  const TrainSettings settings = settings_for(d, cmd.experiment, cmd.seed, cmd.patience, cmd.max_epochs);

  TrainOutcome out;
  out.run_id = run_id(d.name, cmd.experiment, cmd.seed, cmd.fold, settings);
  out.run_dir = cmd.output_root / "train" / out.run_id;
  note(log, "train " + d.name + " " + to_string(cmd.experiment.model.family) + " seed " +
                std::to_string(cmd.seed) + " fold " + std::to_string(cmd.fold) + " -> " + out.run_dir.string());

  const FoldData fd = prepare_fold(d.data, fold);
  TabularModel model(cmd.experiment.model, fd.schema.fields(), settings.ghost_size, init_seed(settings.seed));
  out.result = train_model(model, fd, settings);

  std::filesystem::create_directories(out.run_dir);
  model.save(out.run_dir / "checkpoint.json");
  json model_doc = {{"config", cmd.experiment.model}, {"fields", json::array()}};
  for (const auto& f : fd.schema.fields()) {
    model_doc["fields"].push_back({{"name", f.name},
                                   {"kind", f.kind == FieldKind::kCategorical ? "categorical" : "numeric"},
                                   {"cardinality", f.cardinality}});
  }
  write_json(out.run_dir / "model.json", model_doc);
  write_json(out.run_dir / "fold.json", fold);
  io::write_file_atomic(out.run_dir / "epochs.csv", epoch_log_csv(out.result));
  json result = result_json(cmd.experiment, cmd.seed, cmd.fold, d.name, out.result);
  result["settings"] = settings_json(settings);
  result["run_id"] = out.run_id;
  write_json(out.run_dir / "result.json", result);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json meta = metadata(seconds);
  meta["epoch_seconds"] = json::array();
  for (const auto& e : out.result.epochs) meta["epoch_seconds"].push_back(e.seconds);
  write_json(out.run_dir / "metadata.json", meta);

  if (out.result.ok) {
    note(log, "best epoch " + std::to_string(out.result.best_epoch) + ", validation AUROC " +
                  std::to_string(out.result.val_auroc) + ", holdout AUROC " +
                  std::to_string(out.result.holdout_auroc));
  } else {
    note(log, "run failed at epoch " + std::to_string(out.result.failed_epoch) + ": " + out.result.failure);
  }
  return out;
}

HpoOutcome cmd_hpo(const HpoCommand& cmd, std::ostream* log) {
  try {
    validate(cmd.base);
  } catch (const ConfigError& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  if (cmd.trials <= 0) throw UsageError("trials must be positive");
  if (cmd.jobs <= 0) throw UsageError("jobs must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const ResolvedData d = resolve_data(cmd.source);
  log_dropped(d.data, log);

  HpoOutcome out;
  out.dir = cmd.output_root / "hpo" / d.name / to_string(cmd.base.family);
  ResultTable table;
  const std::string column = to_string(cmd.base.family);
  for (const auto seed : cmd.seeds) {
    for (const int k : cmd.folds) {
      const FoldSplit fold = select_fold(d.data, seed, k);
      const FoldData fd = prepare_fold(d.data, fold);
      StudySettings s;
      s.base = cmd.base;
      s.train = settings_for(d, ExperimentConfig{cmd.base, 0.01, 10}, seed, cmd.patience, cmd.max_epochs);
      s.trials = cmd.trials;
      s.seed = seed;
      s.sampler = cmd.sampler;
      s.jobs = cmd.jobs;

      const auto study_dir = out.dir / ("seed-" + std::to_string(seed)) / ("fold-" + std::to_string(k));
      const auto log_path = study_dir / "trials.jsonl";
      std::vector<TrialRecord> previous;
      std::string lines;
      if (std::filesystem::exists(log_path)) {
        const std::string text = io::read_file(log_path);
        std::size_t pos = 0;
        while (pos < text.size()) {
          const std::size_t end = text.find('\n', pos);
          const std::string line = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
          pos = end == std::string::npos ? text.size() : end + 1;
          if (line.empty()) continue;
          try {
            previous.push_back(json::parse(line).get<TrialRecord>());
            lines += line + "\n";
          } catch (const json::exception&) {
            break;  // a torn final line is rerun
          }
        }
        note(log, "resuming " + log_path.string() + " at trial " + std::to_string(previous.size()));
      }
      std::filesystem::create_directories(study_dir);
      auto records = run_study(fd, s, previous, [&](const TrialRecord& r) {
        lines += json(r).dump() + "\n";
        io::write_file_atomic(log_path, lines);
        note(log, "seed " + std::to_string(seed) + " fold " + std::to_string(k) + " trial " +
                      std::to_string(r.trial) + (r.ok ? " val " + std::to_string(r.val_auroc) : " failed"));
      });
      const int best = best_trial(records);
      const auto& b = records[std::size_t(best)];
      write_json(study_dir / "summary.json", {{"dataset", d.name},
                                              {"family", column},
                                              {"seed", seed},
                                              {"fold", k},
                                              {"sampler", to_string(cmd.sampler)},
                                              {"trials", records.size()},
                                              {"best_trial", best},
                                              {"best", b}});
      out.best_holdout.push_back(b.holdout_auroc);
      table[d.name][column].push_back(b.holdout_auroc);
      out.studies.push_back(std::move(records));
    }
  }
  out.summary = summarize(out.best_holdout);
  io::write_file_atomic(out.dir / "summary.csv", summary_csv(table, {column}));
  json summary = summary_json(table, {column});
  summary["sampler"] = to_string(cmd.sampler);
  summary["seeds"] = cmd.seeds;
  summary["folds"] = cmd.folds;
  summary["trials"] = cmd.trials;
  write_json(out.dir / "summary.json", summary);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(out.dir / "metadata.json", metadata(seconds));
  note(log, column + " on " + d.name + ": " + format_pct(out.summary.mean_pct) + " +- " +
                format_pct(out.summary.sd_pct) + " over " + std::to_string(out.summary.count) + " studies");
  return out;
}

std::string AblationScenario::label() const {
  return std::string("skip=") + (use_skip ? "T" : "F") + " gate=" + (use_gate ? "T" : "F");
}

AblateOutcome cmd_ablate(const AblateCommand& cmd, std::ostream* log) {
  if (cmd.sources.empty()) throw UsageError("ablation needs at least one dataset");
  if (cmd.experiments.empty()) throw UsageError("ablation needs at least one family");
  for (const auto& e : cmd.experiments) {
    try {
      validate(e);
    } catch (const ConfigError& err) {
      throw UsageError(std::string("invalid config: ") + err.what());
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  AblateOutcome out;
  out.dir = cmd.output_root / "ablate";
  for (const auto& e : cmd.experiments) {
    for (const auto& sc : kAblationScenarios) out.columns.push_back(to_string(e.model.family) + " " + sc.label());
  }
  std::string lines;
  for (const auto& src : cmd.sources) {
    const ResolvedData d = resolve_data(src);
    log_dropped(d.data, log);
    for (const auto seed : cmd.seeds) {
      for (const int k : cmd.folds) {
        const FoldData fd = prepare_fold(d.data, select_fold(d.data, seed, k));
        for (const auto& base : cmd.experiments) {
          for (const auto& sc : kAblationScenarios) {
            ExperimentConfig e = base;
            e.model.use_skip = sc.use_skip;
            e.model.use_gate = sc.use_gate;
            const auto settings = settings_for(d, e, seed, cmd.patience, cmd.max_epochs);
            const auto fitted = fit(e.model, fd, settings);
            const std::string column = to_string(e.model.family) + " " + sc.label();
            if (fitted.result.ok) out.table[d.name][column].push_back(fitted.result.holdout_auroc);
            json row = result_json(e, seed, k, d.name, fitted.result);
            row["scenario"] = sc.label();
            lines += row.dump() + "\n";
            io::write_file_atomic(out.dir / "runs.jsonl", lines);
            note(log, d.name + " " + column + " seed " + std::to_string(seed) + " fold " + std::to_string(k) +
                          ": " + (fitted.result.ok ? std::to_string(fitted.result.holdout_auroc) : "failed"));
          }
        }
      }
    }
  }
  io::write_file_atomic(out.dir / "ablation.csv", summary_csv(out.table, out.columns));
  write_json(out.dir / "ablation.json", summary_json(out.table, out.columns));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(out.dir / "metadata.json", metadata(seconds));
  return out;
}

InspectOutcome cmd_inspect_gates(const InspectCommand& cmd, std::ostream* log) {
  if (!std::filesystem::exists(cmd.checkpoint)) {
    throw UsageError("checkpoint not found: " + cmd.checkpoint.string());
  }
  const auto run_dir = cmd.checkpoint.parent_path();
  const auto result_path = run_dir / "result.json";
  if (!std::filesystem::exists(result_path)) {
    throw UsageError("no result.json next to the checkpoint: " + result_path.string());
  }
  const json result = json::parse(io::read_file(result_path));
  const auto experiment = result.at("config").get<ExperimentConfig>();
  const auto seed = result.at("seed").get<std::uint64_t>();
  const int fold_index = result.at("fold").get<int>();
  const auto& st = result.at("settings");

  const ResolvedData d = resolve_data(cmd.source);
  if (d.name != result.at("dataset").get<std::string>()) {
    note(log, "warning: checkpoint was trained on '" + result.at("dataset").get<std::string>() +
                  "', inspecting with '" + d.name + "'");
  }
  const FoldSplit fold = select_fold(d.data, seed, fold_index);
  const FoldData fd = prepare_fold(d.data, fold);
  TabularModel model(experiment.model, fd.schema.fields(), st.at("ghost_size").get<std::size_t>(), 0);
  model.load(cmd.checkpoint);

  EncodedRows rows = fd.train;
  rows.rows += fd.validation.rows;
  rows.codes.insert(rows.codes.end(), fd.validation.codes.begin(), fd.validation.codes.end());
  rows.numerics.insert(rows.numerics.end(), fd.validation.numerics.begin(), fd.validation.numerics.end());
  rows.labels.insert(rows.labels.end(), fd.validation.labels.begin(), fd.validation.labels.end());

  InspectOutcome out;
  try {
    out.report = gate_passage_stats(model, rows.view());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto dir = cmd.output_dir.empty() ? run_dir : cmd.output_dir;
  io::write_file_atomic(dir / "gates.csv", gate_report_csv(out.report));
  write_json(dir / "gates.json", gate_report_json(out.report));
  note(log, std::to_string(out.report.drop_candidates.size()) + " drop candidate(s)");

  if (cmd.apply_drops) {
    TrainSettings s;
    s.batch_size = st.at("batch_size").get<std::size_t>();
    s.ghost_size = st.at("ghost_size").get<std::size_t>();
    s.patience = st.at("patience").get<int>();
    s.max_epochs = st.at("max_epochs").get<int>();
    s.lr = experiment.lr;
    s.lr_step = experiment.lr_step;
    s.seed = seed;
    const double before = result.at("holdout_auroc").is_null() ? std::nan("")
                                                               : result.at("holdout_auroc").get<double>();
    out.drops = suggest_and_apply_drops(out.report, d.data, fold, experiment.model, s, before);
    write_json(dir / "drops.json", drop_comparison_json(*out.drops));
    note(log, out.drops->noop ? "no candidates, nothing refitted"
                              : "refit holdout AUROC " + std::to_string(out.drops->before_auroc) + " -> " +
                                    std::to_string(out.drops->after_auroc));
  }
  return out;
}

}  // namespace tabplus
