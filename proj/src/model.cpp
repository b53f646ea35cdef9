#include "tabplus/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "tabplus/checkpoint.hpp"
#include "tabplus/ops.hpp"

namespace tabplus {

namespace {

constexpr std::size_t kScoreChunk = 4096;

MlpSpec mlp_spec(const ModelConfig& c, std::size_t ghost) {
  return MlpSpec{c.mlp_layers, c.dropout, ghost, c.leaky_slope};
}

std::size_t mlp_count(std::size_t in, std::size_t out, const std::vector<std::size_t>& layers) {
  std::size_t total = 0, width = in;
  for (std::size_t h : layers) {
    total += width * h + h + 2 * h;
    width = h;
  }
  return total + width * out + out;
}

std::size_t mlp_plus_count(std::size_t in, std::size_t out, const ModelConfig& c) {
  std::size_t total = mlp_count(in, out, c.mlp_layers);
  if (c.use_gate) total += 2 * in;
  if (c.use_skip) total += in * out + out + 1 + (c.use_gate ? 2 * in : 0);
  return total;
}

}  // namespace

std::size_t embedded_width(const ModelConfig& c, const std::vector<FieldSpec>& fields) {
  std::size_t w = 0;
  for (const auto& f : fields) {
    w += (f.kind == FieldKind::kNumeric && c.raw_numeric_input) ? 1 : c.embedding_size;
  }
  return w;
}

std::size_t expected_parameter_count(const ModelConfig& c, const std::vector<FieldSpec>& fields) {
  const std::size_t m = c.embedding_size;
  std::size_t total = 0;
  for (const auto& f : fields) {
    if (f.kind == FieldKind::kCategorical) {
      total += m * f.cardinality;
    } else if (!c.raw_numeric_input) {
      total += m;
    }
  }
  const std::size_t width = embedded_width(c, fields);
  total += mlp_plus_count(width, c.n_classes, c);
  if (c.family == Family::kMlpPlus) return total;

  if (c.use_gate) total += 2 * width;
  total += 1;  // column mix
  std::size_t interaction_out = 0;
  if (c.family == Family::kPnn) {
    const std::size_t F = fields.size();
    std::size_t raw = 0;
    switch (c.product->type) {
      case ProductType::kInner: raw = inner_product_width(F); break;
      case ProductType::kOuter: raw = m * m; break;
      case ProductType::kBoth: raw = inner_product_width(F) + m * m; break;
    }
    total += raw * c.product->output_size + c.product->output_size;
    interaction_out = c.product->output_size;
  } else {
    const auto& a = *c.attention;
    const std::size_t hm = a.heads * m;
    const std::size_t per_layer = 3 * m * hm + hm * m + m + (a.residual ? m * m : 0);
    total += a.layers * per_layer;
    interaction_out = fields.size() * m;
  }
  return total + mlp_plus_count(interaction_out, c.n_classes, c);
}

TabularModel::TabularModel(ModelConfig config, std::vector<FieldSpec> fields, std::size_t ghost_size,
                           std::uint64_t seed)
    : config_(std::move(config)) {
  validate(config_);
  if (fields.empty()) throw std::invalid_argument("model needs at least one field");
  Rng init(seed);
  const std::size_t m = config_.embedding_size;
  const std::size_t F = fields.size();
  embedding_ = std::make_unique<FieldEmbedding>("embedding", std::move(fields), m,
                                                config_.raw_numeric_input, init);
  const std::size_t width = embedding_->output_width();
  const MlpSpec spec = mlp_spec(config_, ghost_size);

  if (config_.family != Family::kMlpPlus) {
    if (config_.use_gate) {
      interaction_gate_ = std::make_unique<LeakyGate>("interaction_gate", width, config_.leaky_slope);
    }
    std::size_t interaction_out = 0;
    if (config_.family == Family::kPnn) {
      product_ = std::make_unique<ProductInteraction>("product", F, m, config_.product->type,
                                                      config_.product->output_size, init);
      interaction_out = product_->output_size();
    } else {
      AttentionSpec a = *config_.attention;
      a.slope = config_.leaky_slope;
      attention_ = std::make_unique<AttentionInteraction>("attention", m, a, init);
      interaction_out = F * m;
    }
    interaction_block_ = std::make_unique<MlpPlusBlock>("interaction_block", interaction_out,
                                                        config_.n_classes, spec, config_.use_skip,
                                                        config_.use_gate, init);
    column_mix_ = std::make_unique<Parameter>("column_mix", Shape{1}, std::vector<double>{0.0});
  }
  block_ = std::make_unique<MlpPlusBlock>("block", width, config_.n_classes, spec, config_.use_skip,
                                          config_.use_gate, init);
}

Tensor TabularModel::forward(const BatchView& batch, const ForwardContext& ctx) {
  const Tensor flat = embedding_->forward(batch);
  if (config_.family == Family::kMlpPlus) return block_->forward(flat, ctx);

  const std::size_t rows = batch.rows;
  const std::size_t F = embedding_->fields().size();
  const std::size_t m = config_.embedding_size;
  const Tensor gated = interaction_gate_ ? interaction_gate_->forward(flat) : flat;
  const Tensor fields = ops::reshape(gated, {rows, F, m});
  Tensor interaction;
  if (product_) {
    interaction = product_->forward(fields);
  } else {
    if (record_attention_) attention_weights_.clear();
    const Tensor attended =
        attention_->forward(fields, ctx, record_attention_ ? &attention_weights_ : nullptr);
    interaction = ops::reshape(attended, {rows, F * m});
  }
  const Tensor first = interaction_block_->forward(interaction, ctx);
  const Tensor second = block_->forward(flat, ctx);
  return convex_mix(column_mix_->tensor(), first, second);
}

std::vector<double> TabularModel::predict_scores(const BatchView& batch) {
  NoGradGuard no_grad;
  const std::size_t nc = embedding_->categorical_count();
  const std::size_t nn = embedding_->numeric_count();
  std::vector<double> scores;
  scores.reserve(batch.rows);
  for (std::size_t start = 0; start < batch.rows; start += kScoreChunk) {
    const std::size_t rows = std::min(kScoreChunk, batch.rows - start);
    const BatchView chunk{rows, batch.codes.subspan(start * nc, rows * nc),
                          batch.numerics.subspan(start * nn, rows * nn)};
    const Tensor probs = ops::softmax(forward(chunk, ForwardContext{}));
    const auto p = probs.values();
    for (std::size_t r = 0; r < rows; ++r) scores.push_back(p[r * 2 + 1]);
  }
  return scores;
}

void TabularModel::set_ghost_size(std::size_t ghost_size) {
  block_->set_ghost_size(ghost_size);
  if (interaction_block_) interaction_block_->set_ghost_size(ghost_size);
}

ParameterList TabularModel::parameters() {
  ParameterList out;
  embedding_->collect(out);
  if (interaction_gate_) interaction_gate_->collect(out);
  if (product_) product_->collect(out);
  if (attention_) attention_->collect(out);
  if (interaction_block_) interaction_block_->collect(out);
  if (column_mix_) out.push_back(column_mix_.get());
  block_->collect(out);
  return out;
}

StateList TabularModel::state() {
  StateList out;
  ParameterList ps;
  embedding_->collect(ps);
  if (interaction_gate_) interaction_gate_->collect(ps);
  if (product_) product_->collect(ps);
  if (attention_) attention_->collect(ps);
  for (auto* p : ps) append_parameter_state(*p, out);
  if (interaction_block_) interaction_block_->collect_state(out);
  if (column_mix_) append_parameter_state(*column_mix_, out);
  block_->collect_state(out);
  return out;
}

std::size_t TabularModel::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->size();
  return n;
}

void TabularModel::save(const std::filesystem::path& manifest) { save_checkpoint(manifest, state()); }

void TabularModel::load(const std::filesystem::path& manifest) { load_checkpoint(manifest, state()); }

}  // namespace tabplus
