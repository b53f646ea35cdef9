#include "tabplus/layers.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "tabplus/ops.hpp"

namespace tabplus {

namespace {

std::vector<double> uniform_init(Rng& rng, std::size_t count, double fan_in) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::vector<double> v(count);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return v;
}

Shape flat2(const Tensor& x, std::size_t width) {
  if (x.rank() == 0 || x.shape().back() != width) return {};
  return {x.size() / width, width};
}

}  // namespace

void append_parameter_state(Parameter& p, StateList& out) {
  out.push_back({p.name(), StateEntry::Kind::kParameter, p.shape(), p.tensor().mutable_values()});
}

Linear::Linear(std::string name, std::size_t in, std::size_t out, Rng& init, bool bias)
    : in_(in), out_(out), has_bias_(bias) {
  if (in == 0 || out == 0) throw std::invalid_argument("linear layer " + name + " needs nonzero widths");
  weight_ = Parameter(name + ".weight", {in, out}, uniform_init(init, in * out, double(in)));
  if (bias) bias_ = Parameter(name + ".bias", {out}, uniform_init(init, out, double(in)));
}

Tensor Linear::forward(const Tensor& x) const {
  const Shape flat = flat2(x, in_);
  if (flat.empty()) throw ShapeError("linear", x.shape(), weight_.shape(), "last axis must equal in_features");
  Tensor y = ops::matmul(x.rank() == 2 ? x : ops::reshape(x, flat), weight_.tensor());
  if (has_bias_) y = ops::add_row(y, bias_.tensor());
  if (x.rank() == 2) return y;
  Shape out_shape = x.shape();
  out_shape.back() = out_;
  return ops::reshape(y, out_shape);
}

void Linear::collect(ParameterList& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

LeakyGate::LeakyGate(std::string name, std::size_t width, double slope)
    : width_(width),
      slope_(slope),
      w_(name + ".w", {width}, std::vector<double>(width, 1.0)),
      b_(name + ".b", {width}, std::vector<double>(width, 0.0)) {
  if (width == 0) throw std::invalid_argument("leaky gate " + name + " needs a nonzero width");
}

void LeakyGate::check_width(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != width_) {
    throw ShapeError("leaky_gate", x.shape(), w_.shape(), "input width must equal gate width");
  }
}

Tensor LeakyGate::pre_activation(const Tensor& x) const {
  check_width(x);
  return ops::add_row(ops::mul_row(x, w_.tensor()), b_.tensor());
}

Tensor LeakyGate::forward(const Tensor& x) const {
  return ops::leaky_relu(pre_activation(x), slope_);
}

void LeakyGate::collect(ParameterList& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

bool Interval::contains(double x) const {
  if (empty) return false;
  const bool above = lo_closed ? x >= lo : x > lo;
  const bool below = hi_closed ? x <= hi : x < hi;
  return above && below;
}

GatePartition gate_partition(double w, double b) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  GatePartition p;
  if (w > 0) {
    const double t = -b / w;
    p.pass = {t, inf, false, false, false};
    p.leak = {-inf, t, false, true, false};
  } else if (w < 0) {
    const double t = -b / w;
    p.pass = {-inf, t, false, false, false};
    p.leak = {t, inf, true, false, false};
  } else if (b > 0) {
    p.pass = {};
    p.leak = {0, 0, false, false, true};
  } else {
    p.pass = {0, 0, false, false, true};
    p.leak = {};
  }
  return p;
}

GhostBatchNorm::GhostBatchNorm(std::string name, std::size_t features, std::size_t ghost_size)
    : name_(std::move(name)),
      features_(features),
      ghost_size_(ghost_size),
      scale_(name_ + ".scale", {features}, std::vector<double>(features, 1.0)),
      shift_(name_ + ".shift", {features}, std::vector<double>(features, 0.0)),
      running_mean_(features, 0.0),
      running_var_(features, 1.0) {
  set_ghost_size(ghost_size);
}

void GhostBatchNorm::set_ghost_size(std::size_t ghost_size) {
  if (ghost_size < 2) throw std::invalid_argument("ghost batch size must be at least 2");
  ghost_size_ = ghost_size;
}

std::vector<kernels::Segment> GhostBatchNorm::segments(std::size_t batch, std::size_t ghost_size) {
  std::vector<kernels::Segment> segs;
  if (batch == 0) return segs;
  if (batch < ghost_size) return {{0, batch}};
  const std::size_t full = batch / ghost_size;
  const std::size_t rem = batch % ghost_size;
  for (std::size_t i = 0; i < full; ++i) segs.push_back({i * ghost_size, ghost_size});
  if (rem == 1) {
    segs.back().size += 1;
  } else if (rem > 1) {
    segs.push_back({full * ghost_size, rem});
  }
  return segs;
}

Tensor GhostBatchNorm::forward(const Tensor& x, bool train) {
  if (x.rank() != 2 || x.dim(1) != features_) {
    throw ShapeError("ghost_batch_norm", x.shape(), scale_.shape(), "input width must equal features");
  }
  Tensor normalized;
  if (train) {
    const std::size_t batch = x.dim(0);
    if (batch < 2) throw std::invalid_argument("ghost batch norm in train mode needs at least 2 rows");
    const auto segs = segments(batch, ghost_size_);
    auto res = ops::ghost_normalize(x, segs, kEpsilon);
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const double n = double(segs[s].size);
      for (std::size_t j = 0; j < features_; ++j) {
        const double unbiased = res.variance[s * features_ + j] * n / (n - 1.0);
        running_mean_[j] = (1.0 - kMomentum) * running_mean_[j] + kMomentum * res.mean[s * features_ + j];
        running_var_[j] = (1.0 - kMomentum) * running_var_[j] + kMomentum * unbiased;
      }
    }
    normalized = res.normalized;
  } else {
    std::vector<double> neg_mean(features_), inv_std(features_);
    for (std::size_t j = 0; j < features_; ++j) {
      neg_mean[j] = -running_mean_[j];
      inv_std[j] = 1.0 / std::sqrt(running_var_[j] + kEpsilon);
    }
    normalized = ops::mul_row(ops::add_row(x, Tensor::from({features_}, std::move(neg_mean))),
                              Tensor::from({features_}, std::move(inv_std)));
  }
  return ops::add_row(ops::mul_row(normalized, scale_.tensor()), shift_.tensor());
}

void GhostBatchNorm::collect(ParameterList& out) {
  out.push_back(&scale_);
  out.push_back(&shift_);
}

void GhostBatchNorm::collect_state(StateList& out) {
  append_parameter_state(scale_, out);
  append_parameter_state(shift_, out);
  out.push_back({name_ + ".running_mean", StateEntry::Kind::kBuffer, {features_}, running_mean_});
  out.push_back({name_ + ".running_var", StateEntry::Kind::kBuffer, {features_}, running_var_});
}

FieldEmbedding::FieldEmbedding(std::string name, std::vector<FieldSpec> fields, std::size_t dim,
                               bool raw_numeric, Rng& init)
    : fields_(std::move(fields)), dim_(dim), raw_numeric_(raw_numeric) {
  if (fields_.empty()) throw std::invalid_argument("embedding needs at least one field");
  if (dim == 0) throw std::invalid_argument("embedding size must be positive");
  tables_.reserve(fields_.size());
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    const auto& spec = fields_[f];
    const std::string pname = name + "." + std::to_string(f);
    if (spec.kind == FieldKind::kCategorical) {
      if (spec.cardinality < 2) {
        throw std::invalid_argument("categorical field '" + spec.name + "' needs cardinality >= 2");
      }
      slot_.push_back(n_categorical_++);
      tables_.emplace_back(pname, Shape{dim, spec.cardinality},
                           uniform_init(init, dim * spec.cardinality, double(spec.cardinality)));
      column_field_.insert(column_field_.end(), dim, f);
    } else {
      slot_.push_back(n_numeric_++);
      if (raw_numeric_) {
        tables_.emplace_back();
        column_field_.push_back(f);
      } else {
        tables_.emplace_back(pname, Shape{dim}, uniform_init(init, dim, 1.0));
        column_field_.insert(column_field_.end(), dim, f);
      }
    }
  }
}

Tensor FieldEmbedding::forward(const BatchView& batch) const {
  const std::size_t rows = batch.rows;
  if (batch.codes.size() != rows * n_categorical_ || batch.numerics.size() != rows * n_numeric_) {
    throw ShapeError("embed", {rows, n_categorical_, n_numeric_},
                     {batch.codes.size(), batch.numerics.size()},
                     "codes/numerics do not match the schema");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < fields_.size(); ++f) {
      if (fields_[f].kind != FieldKind::kCategorical) continue;
      const int code = batch.codes[r * n_categorical_ + slot_[f]];
      if (code < 0 || std::size_t(code) >= fields_[f].cardinality) {
        throw std::out_of_range("field '" + fields_[f].name + "' code " + std::to_string(code) +
                                " outside [0, " + std::to_string(fields_[f].cardinality) + ")");
      }
    }
  }

  const std::size_t width = output_width();
  std::vector<double> out(rows * width);
  std::vector<std::size_t> offset(fields_.size());
  for (std::size_t f = 0, col = 0; f < fields_.size(); ++f) {
    offset[f] = col;
    col += tables_[f].tensor().defined() ? dim_ : 1;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * width;
    for (std::size_t f = 0; f < fields_.size(); ++f) {
      double* dst = o + offset[f];
      if (fields_[f].kind == FieldKind::kCategorical) {
        const auto code = std::size_t(batch.codes[r * n_categorical_ + slot_[f]]);
        const auto e = tables_[f].tensor().values();
        const std::size_t c = fields_[f].cardinality;
        for (std::size_t k = 0; k < dim_; ++k) dst[k] = e[k * c + code];
      } else {
        const double x = batch.numerics[r * n_numeric_ + slot_[f]];
        if (!tables_[f].tensor().defined()) {
          dst[0] = x;
        } else {
          const auto v = tables_[f].tensor().values();
          for (std::size_t k = 0; k < dim_; ++k) dst[k] = x * v[k];
        }
      }
    }
  }

  std::vector<Tensor> parents;
  std::vector<Tensor> tables;
  for (const auto& t : tables_) {
    tables.push_back(t.tensor());
    if (t.tensor().defined()) parents.push_back(t.tensor());
  }
  auto codes = std::make_shared<std::vector<int>>(batch.codes.begin(), batch.codes.end());
  auto nums = std::make_shared<std::vector<double>>(batch.numerics.begin(), batch.numerics.end());
  return Tensor::result(
      {rows, width}, std::move(out), std::move(parents),
      [this_fields = fields_, slot = slot_, dim = dim_, nc = n_categorical_, nn = n_numeric_, rows,
       width, offset, tables = std::move(tables), codes,
       nums](std::span<const double> g, std::span<const double>) {
        for (std::size_t f = 0; f < this_fields.size(); ++f) {
          const Tensor& t = tables[f];
          if (!t.defined() || !t.requires_grad()) continue;
          auto d = t.grad_accumulator();
          for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g.data() + r * width + offset[f];
            if (this_fields[f].kind == FieldKind::kCategorical) {
              const auto code = std::size_t((*codes)[r * nc + slot[f]]);
              const std::size_t c = this_fields[f].cardinality;
              for (std::size_t k = 0; k < dim; ++k) d[k * c + code] += gr[k];
            } else {
              const double x = (*nums)[r * nn + slot[f]];
              for (std::size_t k = 0; k < dim; ++k) d[k] += gr[k] * x;
            }
          }
        }
      });
}

void FieldEmbedding::collect(ParameterList& out) {
  for (auto& t : tables_) {
    if (t.tensor().defined()) out.push_back(&t);
  }
}

Tensor embed_row(const FieldEmbedding& embedding, std::span<const int> codes,
                 std::span<const double> numerics) {
  if (embedding.raw_numeric() && embedding.numeric_count() > 0) {
    throw std::logic_error("embed_row requires every field to be embedded");
  }
  Tensor flat = embedding.forward({1, codes, numerics});
  return ops::reshape(flat, {embedding.fields().size(), embedding.dim()});
}

}  // namespace tabplus
