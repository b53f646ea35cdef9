#include "tabplus/hpo.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <thread>

namespace tabplus {

namespace {

constexpr std::uint64_t kOrderSalt = 0x6f72646572;  // "order"
constexpr std::uint64_t kPickSalt = 0x7069636b;     // "pick"

// Radices of the grid axes, least significant first.
std::vector<std::size_t> radices(Family family) {
  std::vector<std::size_t> r = {space::kMlpLayers.size(), space::kDropout.size(),
                                space::kLearningRate.size(), space::kLrStep.size()};
  if (family == Family::kPnn) {
    r.insert(r.end(), {space::kProductType.size(), space::kProductOutput.size()});
  } else if (family == Family::kAutoInt) {
    r.insert(r.end(), {space::kEmbeddingSize.size(), space::kAttentionLayers.size(),
                       space::kAttentionHeads.size(), space::kAttentionDropout.size(),
                       space::kAttentionActivation.size(), space::kAttentionResidual.size()});
  }
  return r;
}

std::vector<std::size_t> decode(Family family, std::size_t index) {
  const auto r = radices(family);
  std::vector<std::size_t> digits(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    digits[i] = index % r[i];
    index /= r[i];
  }
  return digits;
}

std::size_t encode(Family family, const std::vector<std::size_t>& digits) {
  const auto r = radices(family);
  std::size_t index = 0;
  for (std::size_t i = r.size(); i-- > 0;) index = index * r[i] + digits[i];
  return index;
}

template <typename Axis, typename T>
std::size_t position(const Axis& axis, const T& value, const char* name) {
  const auto it = std::find(axis.begin(), axis.end(), value);
  if (it == axis.end()) throw ConfigError(name, "value is not in the search space");
  return std::size_t(it - axis.begin());
}

std::vector<std::size_t> random_order(const StudySettings& s) {
  std::vector<std::size_t> order(grid_size(s.base.family));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(s.seed, kOrderSalt));
  rng.shuffle(order);
  return order;
}

std::size_t next_random(const std::vector<std::size_t>& order, const std::set<std::size_t>& used) {
  for (std::size_t p : order) {
    if (!used.count(p)) return p;
  }
  throw std::runtime_error("search grid exhausted");
}

TrialRecord run_trial(const FoldData& data, const StudySettings& s, int trial, std::size_t point) {
  TrialRecord rec;
  rec.trial = trial;
  rec.point = point;
  rec.config = grid_point(s.base, point);
  rec.seed = derive_seed(s.seed, std::uint64_t(trial));
  TrainSettings ts = s.train;
  ts.lr = rec.config.lr;
  ts.lr_step = rec.config.lr_step;
  ts.seed = rec.seed;
  try {
    TabularModel model(rec.config.model, data.schema.fields(), ts.ghost_size, init_seed(ts.seed));
    const TrainResult result = train_model(model, data, ts);
    rec.ok = result.ok;
    rec.failure = result.failure;
    rec.best_epoch = result.best_epoch;
    rec.val_auroc = result.val_auroc;
    rec.holdout_auroc = result.holdout_auroc;
    for (const auto& e : result.epochs) rec.val_curve.push_back(e.val_auroc);
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace

std::size_t grid_size(Family family) {
  const auto r = radices(family);
  return std::accumulate(r.begin(), r.end(), std::size_t{1}, std::multiplies<>());
}

ExperimentConfig grid_point(const ModelConfig& base, std::size_t index) {
  if (index >= grid_size(base.family)) throw std::out_of_range("grid index out of range");
  const auto d = decode(base.family, index);
  ExperimentConfig c;
  c.model = base;
  c.model.mlp_layers = space::kMlpLayers[d[0]];
  c.model.dropout = space::kDropout[d[1]];
  c.lr = space::kLearningRate[d[2]];
  c.lr_step = space::kLrStep[d[3]];
  if (base.family == Family::kPnn) {
    c.model.product = ProductSpec{space::kProductType[d[4]], space::kProductOutput[d[5]]};
  } else if (base.family == Family::kAutoInt) {
    c.model.embedding_size = space::kEmbeddingSize[d[4]];
    AttentionSpec a;
    a.layers = space::kAttentionLayers[d[5]];
    a.heads = space::kAttentionHeads[d[6]];
    a.dropout = space::kAttentionDropout[d[7]];
    a.activation = space::kAttentionActivation[d[8]];
    a.residual = space::kAttentionResidual[d[9]];
    a.slope = base.leaky_slope;
    c.model.attention = a;
  }
  return c;
}

std::size_t grid_index(const ExperimentConfig& c) {
  const auto& m = c.model;
  std::vector<std::size_t> d = {position(space::kMlpLayers, m.mlp_layers, "mlp_layers"),
                                position(space::kDropout, m.dropout, "dropout"),
                                position(space::kLearningRate, c.lr, "lr"),
                                position(space::kLrStep, c.lr_step, "lr_step")};
  if (m.family == Family::kPnn) {
    d.push_back(position(space::kProductType, m.product->type, "product.type"));
    d.push_back(position(space::kProductOutput, m.product->output_size, "product.output_size"));
  } else if (m.family == Family::kAutoInt) {
    const auto& a = *m.attention;
    d.push_back(position(space::kEmbeddingSize, m.embedding_size, "embedding_size"));
    d.push_back(position(space::kAttentionLayers, a.layers, "attention.layers"));
    d.push_back(position(space::kAttentionHeads, a.heads, "attention.heads"));
    d.push_back(position(space::kAttentionDropout, a.dropout, "attention.dropout"));
    d.push_back(position(space::kAttentionActivation, a.activation, "attention.activation"));
    d.push_back(position(space::kAttentionResidual, a.residual, "attention.residual"));
  }
  return encode(m.family, d);
}

std::string to_string(Sampler sampler) {
  return sampler == Sampler::kRandom ? "random-search" : "random-search+neighbour-surrogate";
}

Sampler parse_sampler(const std::string& text) {
  if (text == "random") return Sampler::kRandom;
  if (text == "surrogate") return Sampler::kSurrogate;
  throw ConfigError("sampler", "unknown sampler '" + text + "' (expected random or surrogate)");
}

std::size_t next_point(const StudySettings& s, const std::vector<TrialRecord>& previous) {
  std::set<std::size_t> used;
  for (const auto& r : previous) used.insert(r.point);
  const auto order = random_order(s);
  if (s.sampler == Sampler::kRandom || previous.size() < std::size_t(std::max(1, s.surrogate_warmup))) {
    return next_random(order, used);
  }

  std::vector<const TrialRecord*> ok;
  for (const auto& r : previous) {
    if (r.ok) ok.push_back(&r);
  }
  if (ok.empty()) return next_random(order, used);
  std::stable_sort(ok.begin(), ok.end(),
                   [](const TrialRecord* a, const TrialRecord* b) { return a->val_auroc > b->val_auroc; });
  const std::size_t top = std::max<std::size_t>(1, ok.size() / 4);
  Rng rng(derive_seed(derive_seed(s.seed, kPickSalt), previous.size()));
  const auto* anchor = ok[rng.bounded(top)];

  const auto r = radices(s.base.family);
  const auto digits = decode(s.base.family, anchor->point);
  std::vector<std::size_t> neighbours;
  for (std::size_t axis = 0; axis < r.size(); ++axis) {
    for (int step : {-1, 1}) {
      const auto v = std::ptrdiff_t(digits[axis]) + step;
      if (v < 0 || v >= std::ptrdiff_t(r[axis])) continue;
      auto d = digits;
      d[axis] = std::size_t(v);
      const std::size_t p = encode(s.base.family, d);
      if (!used.count(p)) neighbours.push_back(p);
    }
  }
  if (neighbours.empty()) return next_random(order, used);
  return neighbours[rng.bounded(neighbours.size())];
}

std::vector<TrialRecord> run_study(const FoldData& data, const StudySettings& s,
                                   std::vector<TrialRecord> previous,
                                   const std::function<void(const TrialRecord&)>& on_record) {
  if (s.trials <= 0) throw std::invalid_argument("a study needs at least one trial");
  std::sort(previous.begin(), previous.end(),
            [](const TrialRecord& a, const TrialRecord& b) { return a.trial < b.trial; });
  for (std::size_t i = 0; i < previous.size(); ++i) {
    if (previous[i].trial != int(i)) throw std::runtime_error("resumed trial log is not contiguous from 0");
  }
  if (previous.size() > std::size_t(s.trials)) previous.resize(std::size_t(s.trials));
  std::vector<TrialRecord> records = std::move(previous);
  const int start = int(records.size());

  if (s.sampler == Sampler::kSurrogate || s.jobs <= 1) {
    for (int t = start; t < s.trials; ++t) {
      records.push_back(run_trial(data, s, t, next_point(s, records)));
      if (on_record) on_record(records.back());
    }
  } else {
    // Random points do not depend on results, so they can be fixed up front.
    std::vector<std::size_t> points;
    {
      std::vector<TrialRecord> shadow = records;
      for (int t = start; t < s.trials; ++t) {
        TrialRecord r;
        r.trial = t;
        r.point = next_point(s, shadow);
        points.push_back(r.point);
        shadow.push_back(r);
      }
    }
    const int pending = s.trials - start;
    const int jobs = std::min(s.jobs, pending);
    const int threads_each = std::max(1, omp_get_max_threads() / jobs);
    std::vector<std::optional<TrialRecord>> done(static_cast<std::size_t>(pending));
    std::atomic<int> cursor{0};
    std::mutex mu;
    int emitted = 0;
    std::exception_ptr error;
    auto worker = [&] {
      omp_set_num_threads(threads_each);
      for (int i; (i = cursor.fetch_add(1)) < pending;) {
        TrialRecord rec = run_trial(data, s, start + i, points[std::size_t(i)]);
        std::lock_guard lock(mu);
        done[std::size_t(i)] = std::move(rec);
        try {
          while (emitted < pending && done[std::size_t(emitted)]) {
            if (on_record) on_record(*done[std::size_t(emitted)]);
            ++emitted;
          }
        } catch (...) {
          if (!error) error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    for (auto& d : done) records.push_back(std::move(*d));
  }

  if (best_trial(records) < 0) throw std::runtime_error("every trial of the study failed");
  return records;
}

int best_trial(const std::vector<TrialRecord>& records) {
  int best = -1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].ok) continue;
    if (best < 0 || records[i].val_auroc > records[std::size_t(best)].val_auroc) best = int(i);
  }
  return best;
}

void to_json(nlohmann::json& j, const TrialRecord& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  j = {{"trial", r.trial},
       {"point", r.point},
       {"seed", r.seed},
       {"config", r.config},
       {"status", r.ok ? "ok" : "failed"},
       {"best_epoch", r.best_epoch},
       {"val_auroc", num(r.val_auroc)},
       {"holdout_auroc", num(r.holdout_auroc)},
       {"val_curve", r.val_curve}};
  if (!r.ok) j["failure"] = r.failure;
}

void from_json(const nlohmann::json& j, TrialRecord& r) {
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  r.trial = j.at("trial").get<int>();
  r.point = j.at("point").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = j.at("config").get<ExperimentConfig>();
  r.ok = j.at("status").get<std::string>() == "ok";
  r.failure = j.value("failure", std::string());
  r.best_epoch = j.at("best_epoch").get<int>();
  r.val_auroc = num(j.at("val_auroc"));
  r.holdout_auroc = num(j.at("holdout_auroc"));
  r.val_curve.clear();
  for (const auto& v : j.at("val_curve")) r.val_curve.push_back(num(v));
}

Summary summarize(std::vector<double> aurocs) {
  Summary s;
  s.count = aurocs.size();
  if (aurocs.empty()) return s;
  std::sort(aurocs.begin(), aurocs.end());
  double sum = 0.0;
  for (double v : aurocs) sum += 100.0 * v;
  s.mean_pct = sum / double(aurocs.size());
  if (aurocs.size() > 1) {
    std::vector<double> sq;
    for (double v : aurocs) sq.push_back((100.0 * v - s.mean_pct) * (100.0 * v - s.mean_pct));
    std::sort(sq.begin(), sq.end());
    double ss = 0.0;
    for (double v : sq) ss += v;
    s.sd_pct = std::sqrt(ss / double(aurocs.size() - 1));
  }
  return s;
}

std::string format_pct(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", pct);
  return buf;
}

namespace {

// Mean over datasets of the per-dataset means, summed in sorted order.
std::optional<double> mean_of_means(const ResultTable& table, const std::string& column) {
  std::vector<double> means;
  for (const auto& [dataset, cols] : table) {
    const auto it = cols.find(column);
    if (it != cols.end() && !it->second.empty()) means.push_back(summarize(it->second).mean_pct);
  }
  if (means.empty()) return std::nullopt;
  std::sort(means.begin(), means.end());
  double sum = 0.0;
  for (double m : means) sum += m;
  return sum / double(means.size());
}

}  // namespace

std::string summary_csv(const ResultTable& table, const std::vector<std::string>& columns) {
  std::string out = "dataset";
  for (const auto& c : columns) out += "," + c + "_mean," + c + "_sd," + c + "_n";
  out += "\n";
  for (const auto& [dataset, cols] : table) {
    out += dataset;
    for (const auto& c : columns) {
      const auto it = cols.find(c);
      if (it == cols.end() || it->second.empty()) {
        out += ",,,0";
        continue;
      }
      const Summary s = summarize(it->second);
      out += "," + format_pct(s.mean_pct) + "," + format_pct(s.sd_pct) + "," + std::to_string(s.count);
    }
    out += "\n";
  }
  out += "Mean";
  for (const auto& c : columns) {
    const auto m = mean_of_means(table, c);
    out += "," + (m ? format_pct(*m) : std::string()) + ",,";
  }
  out += "\n";
  return out;
}

nlohmann::json summary_json(const ResultTable& table, const std::vector<std::string>& columns) {
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [dataset, cols] : table) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& c : columns) {
      const auto it = cols.find(c);
      if (it == cols.end() || it->second.empty()) continue;
      const Summary s = summarize(it->second);
      row[c] = {{"mean_pct", format_pct(s.mean_pct)}, {"sd_pct", format_pct(s.sd_pct)}, {"n", s.count},
                {"mean", s.mean_pct / 100.0}};
    }
    rows[dataset] = row;
  }
  nlohmann::json mean = nlohmann::json::object();
  for (const auto& c : columns) {
    if (const auto m = mean_of_means(table, c)) mean[c] = format_pct(*m);
  }
  return {{"datasets", rows}, {"mean_pct", mean}};
}

}  // namespace tabplus
