#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tabplus/checkpoint.hpp"
#include "tabplus/kernels.hpp"
#include "tabplus/optim.hpp"
#include "tabplus/rng.hpp"
#include "tabplus/tensor.hpp"

namespace tabplus {

inline constexpr double kDefaultLeakySlope = 0.01;

/// Train/eval switch plus the dropout stream for one forward pass.
struct ForwardContext {
  bool train = false;
  Rng* rng = nullptr;
};

using ParameterList = std::vector<Parameter*>;
using StateList = std::vector<StateEntry>;

void append_parameter_state(Parameter& p, StateList& out);

/// Fully connected layer y = x W + b with W stored [in, out].
class Linear {
 public:
  Linear(std::string name, std::size_t in, std::size_t out, Rng& init, bool bias = true);

  Tensor forward(const Tensor& x) const;

  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }
  Parameter& weight() noexcept { return weight_; }
  const Parameter& weight() const noexcept { return weight_; }
  bool has_bias() const noexcept { return has_bias_; }
  Parameter& bias() noexcept { return bias_; }

  void collect(ParameterList& out);

 private:
  std::size_t in_;
  std::size_t out_;
  bool has_bias_;
  Parameter weight_;
  Parameter bias_;
};

/// Per-column affine transform followed by LeakyReLU:
/// g_i(x) = leaky_relu(w_i x + b_i).
class LeakyGate {
 public:
  LeakyGate(std::string name, std::size_t width, double slope = kDefaultLeakySlope);

  Tensor pre_activation(const Tensor& x) const;
  Tensor forward(const Tensor& x) const;

  std::size_t width() const noexcept { return width_; }
  double slope() const noexcept { return slope_; }
  Parameter& weight() noexcept { return w_; }
  const Parameter& weight() const noexcept { return w_; }
  Parameter& bias() noexcept { return b_; }
  const Parameter& bias() const noexcept { return b_; }

  void collect(ParameterList& out);

 private:
  void check_width(const Tensor& x) const;

  std::size_t width_;
  double slope_;
  Parameter w_;
  Parameter b_;
};

/// Interval on the extended real line; `empty` overrides the bounds.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_closed = false;
  bool hi_closed = false;
  bool empty = false;

  bool contains(double x) const;
  bool operator==(const Interval&) const = default;
};

struct GatePartition {
  Interval pass;  ///< values with w x + b > 0
  Interval leak;  ///< values with w x + b <= 0
};

/// How one gate column splits the real line between passing and leaking.
///   w > 0:          pass (-b/w, +inf),  leak (-inf, -b/w]
///   w < 0:          pass (-inf, -b/w),  leak [-b/w, +inf)
///   w = 0, b > 0:   pass everything,    leak nothing
///   w = 0, b <= 0:  pass nothing,       leak everything
GatePartition gate_partition(double w, double b);

/// Batch norm whose training statistics come from consecutive sub-batches.
///
/// Rows are split into segments of `ghost_size`; a trailing remainder of two
/// or more rows forms its own segment, a single leftover row joins the
/// previous one. Running statistics are updated once per segment with the
/// unbiased variance. Eval mode uses the running statistics.
class GhostBatchNorm {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEpsilon = 1e-5;

  GhostBatchNorm(std::string name, std::size_t features, std::size_t ghost_size);

  Tensor forward(const Tensor& x, bool train);

  static std::vector<kernels::Segment> segments(std::size_t batch, std::size_t ghost_size);

  std::size_t features() const noexcept { return features_; }
  std::size_t ghost_size() const noexcept { return ghost_size_; }
  void set_ghost_size(std::size_t ghost_size);
  std::span<const double> running_mean() const noexcept { return running_mean_; }
  std::span<const double> running_var() const noexcept { return running_var_; }
  Parameter& scale() noexcept { return scale_; }
  Parameter& shift() noexcept { return shift_; }

  void collect(ParameterList& out);
  void collect_state(StateList& out);

 private:
  std::string name_;
  std::size_t features_;
  std::size_t ghost_size_;
  Parameter scale_;
  Parameter shift_;
  std::vector<double> running_mean_;
  std::vector<double> running_var_;
};

enum class FieldKind { kCategorical, kNumeric };

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kNumeric;
  std::size_t cardinality = 0;  ///< categorical only, includes the unknown code
};

/// Encoded rows: categorical codes (one per categorical field, in schema
/// order) and numeric values (one per numeric field, in schema order).
struct BatchView {
  std::size_t rows = 0;
  std::span<const int> codes;
  std::span<const double> numerics;
};

/// Per-field embeddings with a shared size m.
///
/// Categorical field f owns E_f [m, c_f]; code k selects column k.
/// Numeric field f owns V_f [m]; value x embeds to x * V_f. With
/// `raw_numeric` set, numeric values bypass embedding and occupy one column.
class FieldEmbedding {
 public:
  FieldEmbedding(std::string name, std::vector<FieldSpec> fields, std::size_t dim, bool raw_numeric,
                 Rng& init);

  /// [rows, output_width()] with fields laid out in schema order.
  Tensor forward(const BatchView& batch) const;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t output_width() const noexcept { return column_field_.size(); }
  const std::vector<FieldSpec>& fields() const noexcept { return fields_; }
  std::size_t categorical_count() const noexcept { return n_categorical_; }
  std::size_t numeric_count() const noexcept { return n_numeric_; }
  /// Field index of every output column.
  const std::vector<std::size_t>& column_field() const noexcept { return column_field_; }
  bool raw_numeric() const noexcept { return raw_numeric_; }
  Parameter& table(std::size_t field) { return tables_.at(field); }

  void collect(ParameterList& out);

 private:
  std::vector<FieldSpec> fields_;
  std::size_t dim_;
  bool raw_numeric_;
  std::size_t n_categorical_ = 0;
  std::size_t n_numeric_ = 0;
  std::vector<Parameter> tables_;  ///< one per field; unused (empty) for raw numeric fields
  std::vector<std::size_t> slot_;  ///< index into codes or numerics for each field
  std::vector<std::size_t> column_field_;
};

/// Embedding of a single row as [F, m].
Tensor embed_row(const FieldEmbedding& embedding, std::span<const int> codes,
                 std::span<const double> numerics);

}  // namespace tabplus
