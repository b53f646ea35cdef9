#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tabplus/layers.hpp"

namespace tabplus {

/// Dropout that honours the context: identity outside training.
Tensor apply_dropout(const Tensor& x, double rate, const ForwardContext& ctx);

struct MlpSpec {
  std::vector<std::size_t> layers;
  double dropout = 0.0;
  std::size_t ghost_size = 8;
  double slope = kDefaultLeakySlope;
};

/// Hidden layers of linear -> ghost batch norm -> leaky relu -> dropout,
/// then a bare linear head.
class MlpBlock {
 public:
  MlpBlock(const std::string& name, std::size_t in, std::size_t out, const MlpSpec& spec, Rng& init);

  Tensor forward(const Tensor& x, const ForwardContext& ctx);

  std::size_t in_features() const noexcept { return in_; }
  void set_ghost_size(std::size_t ghost_size);
  void collect(ParameterList& out);
  void collect_state(StateList& out);

 private:
  std::size_t in_;
  double dropout_;
  double slope_;
  std::vector<Linear> hidden_;
  std::vector<GhostBatchNorm> norms_;
  Linear head_;
};

/// Gated MLP plus a gated linear skip path, mixed as
/// sigmoid(a) * mlp + (1 - sigmoid(a)) * skip.
class MlpPlusBlock {
 public:
  MlpPlusBlock(const std::string& name, std::size_t in, std::size_t out, const MlpSpec& spec,
               bool use_skip, bool use_gate, Rng& init);

  Tensor forward(const Tensor& x, const ForwardContext& ctx);

  std::size_t in_features() const noexcept { return in_; }
  bool use_skip() const noexcept { return skip_.has_value(); }
  bool use_gate() const noexcept { return main_gate_.has_value(); }
  LeakyGate* main_gate() { return main_gate_ ? &*main_gate_ : nullptr; }
  LeakyGate* skip_gate() { return skip_gate_ ? &*skip_gate_ : nullptr; }
  Linear* skip() { return skip_ ? &*skip_ : nullptr; }
  Parameter* mix() { return skip_ ? &mix_ : nullptr; }
  MlpBlock& mlp() noexcept { return mlp_; }

  void set_ghost_size(std::size_t ghost_size) { mlp_.set_ghost_size(ghost_size); }
  void collect(ParameterList& out);
  void collect_state(StateList& out);

 private:
  std::size_t in_;
  std::optional<LeakyGate> main_gate_;
  MlpBlock mlp_;
  std::optional<LeakyGate> skip_gate_;
  std::optional<Linear> skip_;
  Parameter mix_;
};

/// sigmoid(a) * first + (1 - sigmoid(a)) * second for a one-element `a`.
Tensor convex_mix(const Tensor& a, const Tensor& first, const Tensor& second);

enum class ProductType { kInner, kOuter, kBoth };

/// Product features of embedded fields followed by one linear map to D.
///   inner: <e_i, e_j> for i < j in lexicographic order, F(F-1)/2 values
///   outer: flatten(s s^T) with s the sum of field embeddings, m*m values
///   both:  inner then outer, concatenated before the linear map
class ProductInteraction {
 public:
  ProductInteraction(const std::string& name, std::size_t fields, std::size_t dim, ProductType type,
                     std::size_t output_size, Rng& init);

  /// e [B, F, m] -> raw product features [B, raw_width()].
  Tensor features(const Tensor& e) const;
  /// e [B, F, m] -> [B, D].
  Tensor forward(const Tensor& e) const;

  std::size_t raw_width() const noexcept { return raw_width_; }
  std::size_t output_size() const noexcept { return proj_.out_features(); }
  void collect(ParameterList& out) { proj_.collect(out); }

 private:
  std::size_t fields_;
  std::size_t dim_;
  ProductType type_;
  std::size_t raw_width_;
  Linear proj_;
};

std::size_t inner_product_width(std::size_t fields);

struct AttentionSpec {
  std::size_t layers = 3;
  std::size_t heads = 2;
  double dropout = 0.0;
  bool residual = true;
  bool activation = false;  ///< leaky relu after every layer
  double slope = kDefaultLeakySlope;

  bool operator==(const AttentionSpec&) const = default;
};

/// One multi-head self-attention layer over fields, [B, F, m] -> [B, F, m].
/// Every head works at width m; heads are concatenated and projected back.
class AttentionLayer {
 public:
  AttentionLayer(const std::string& name, std::size_t dim, const AttentionSpec& spec, Rng& init);

  /// Appends each head's softmax weights [B, F, F] to `weights` when given.
  Tensor forward(const Tensor& e, const ForwardContext& ctx,
                 std::vector<Tensor>* weights = nullptr) const;

  void collect(ParameterList& out);

 private:
  std::size_t dim_;
  std::size_t heads_;
  double dropout_;
  bool activation_;
  double slope_;
  Linear query_;
  Linear key_;
  Linear value_;
  Linear out_;
  std::optional<Linear> residual_;
};

class AttentionInteraction {
 public:
  AttentionInteraction(const std::string& name, std::size_t dim, const AttentionSpec& spec, Rng& init);

  Tensor forward(const Tensor& e, const ForwardContext& ctx,
                 std::vector<Tensor>* weights = nullptr) const;

  std::size_t layer_count() const noexcept { return layers_.size(); }
  void collect(ParameterList& out);

 private:
  std::vector<AttentionLayer> layers_;
};

}  // namespace tabplus
