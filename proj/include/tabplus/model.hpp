#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "tabplus/blocks.hpp"
#include "tabplus/config.hpp"

namespace tabplus {

/// One of the three architectures over a fixed field schema.
///
///   mlp-plus: logits = MLP+(flat embeddings)
///   pnn:      logits = mix(MLP+(product(gate(flat))), MLP+(flat))
///   autoint:  logits = mix(MLP+(flatten(attention(gate(flat)))), MLP+(flat))
///
/// mix(c1, c2) = sigmoid(column_mix) * c1 + (1 - sigmoid(column_mix)) * c2.
/// Parameter initialization is a pure function of (config, fields, seed).
class TabularModel {
 public:
  TabularModel(ModelConfig config, std::vector<FieldSpec> fields, std::size_t ghost_size,
               std::uint64_t seed);

  TabularModel(TabularModel&&) noexcept = default;
  TabularModel& operator=(TabularModel&&) noexcept = default;

  /// Logits [rows, 2].
  Tensor forward(const BatchView& batch, const ForwardContext& ctx);

  /// Positive-class probabilities in eval mode without recording a graph.
  std::vector<double> predict_scores(const BatchView& batch);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<FieldSpec>& fields() const noexcept { return embedding_->fields(); }
  FieldEmbedding& embedding() noexcept { return *embedding_; }
  /// The plain MLP+ block (the only block for mlp-plus).
  MlpPlusBlock& block() noexcept { return *block_; }
  MlpPlusBlock* interaction_block() noexcept { return interaction_block_.get(); }
  LeakyGate* interaction_gate() noexcept { return interaction_gate_.get(); }
  ProductInteraction* product() noexcept { return product_.get(); }
  AttentionInteraction* attention() noexcept { return attention_.get(); }
  Parameter* column_mix() noexcept { return column_mix_ ? column_mix_.get() : nullptr; }

  /// When set, forward() stores every attention head's softmax weights.
  void record_attention(bool on) { record_attention_ = on; }
  const std::vector<Tensor>& attention_weights() const noexcept { return attention_weights_; }

  void set_ghost_size(std::size_t ghost_size);
  ParameterList parameters();
  StateList state();
  std::size_t parameter_count();

  void save(const std::filesystem::path& manifest);
  void load(const std::filesystem::path& manifest);

 private:
  ModelConfig config_;
  std::unique_ptr<FieldEmbedding> embedding_;
  std::unique_ptr<LeakyGate> interaction_gate_;
  std::unique_ptr<ProductInteraction> product_;
  std::unique_ptr<AttentionInteraction> attention_;
  std::unique_ptr<MlpPlusBlock> interaction_block_;
  std::unique_ptr<MlpPlusBlock> block_;
  std::unique_ptr<Parameter> column_mix_;
  bool record_attention_ = false;
  std::vector<Tensor> attention_weights_;
};

/// Parameter count of TabularModel(config, fields) derived in closed form.
std::size_t expected_parameter_count(const ModelConfig& config, const std::vector<FieldSpec>& fields);

/// Width of the flattened embedding for a schema.
std::size_t embedded_width(const ModelConfig& config, const std::vector<FieldSpec>& fields);

}  // namespace tabplus
