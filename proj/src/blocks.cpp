#include "tabplus/blocks.hpp"

#include <cmath>
#include <stdexcept>

#include "tabplus/ops.hpp"

namespace tabplus {

Tensor apply_dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  if (!ctx.train || rate == 0.0) return x;
  if (ctx.rng == nullptr) throw std::logic_error("training-mode dropout needs a random stream");
  return ops::dropout(x, rate, true, *ctx.rng);
}

Tensor convex_mix(const Tensor& a, const Tensor& first, const Tensor& second) {
  const Tensor alpha = ops::sigmoid(a);
  return ops::add(ops::scale(first, alpha), ops::scale(second, ops::affine(alpha, -1.0, 1.0)));
}

namespace {

Linear make_head(const std::string& name, const MlpSpec& spec, std::size_t in, std::size_t out,
                 std::vector<Linear>& hidden, std::vector<GhostBatchNorm>& norms, Rng& init) {
  std::size_t width = in;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string prefix = name + "." + std::to_string(i);
    hidden.emplace_back(prefix, width, spec.layers[i], init);
    norms.emplace_back(prefix + ".norm", spec.layers[i], spec.ghost_size);
    width = spec.layers[i];
  }
  return Linear(name + ".out", width, out, init);
}

}  // namespace

MlpBlock::MlpBlock(const std::string& name, std::size_t in, std::size_t out, const MlpSpec& spec,
                   Rng& init)
    : in_(in),
      dropout_(spec.dropout),
      slope_(spec.slope),
      head_(make_head(name, spec, in, out, hidden_, norms_, init)) {
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) {
    throw std::invalid_argument("dropout must be in [0, 1)");
  }
}

Tensor MlpBlock::forward(const Tensor& x, const ForwardContext& ctx) {
  Tensor h = x;
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    h = hidden_[i].forward(h);
    h = norms_[i].forward(h, ctx.train);
    h = ops::leaky_relu(h, slope_);
    h = apply_dropout(h, dropout_, ctx);
  }
  return head_.forward(h);
}

void MlpBlock::set_ghost_size(std::size_t ghost_size) {
  for (auto& n : norms_) n.set_ghost_size(ghost_size);
}

void MlpBlock::collect(ParameterList& out) {
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    hidden_[i].collect(out);
    norms_[i].collect(out);
  }
  head_.collect(out);
}

void MlpBlock::collect_state(StateList& out) {
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    ParameterList ps;
    hidden_[i].collect(ps);
    for (auto* p : ps) append_parameter_state(*p, out);
    norms_[i].collect_state(out);
  }
  ParameterList ps;
  head_.collect(ps);
  for (auto* p : ps) append_parameter_state(*p, out);
}

MlpPlusBlock::MlpPlusBlock(const std::string& name, std::size_t in, std::size_t out,
                           const MlpSpec& spec, bool use_skip, bool use_gate, Rng& init)
    : in_(in),
      main_gate_(use_gate ? std::optional<LeakyGate>(std::in_place, name + ".main_gate", in, spec.slope)
                          : std::nullopt),
      mlp_(name + ".mlp", in, out, spec, init) {
  if (use_skip) {
    if (use_gate) skip_gate_.emplace(name + ".skip_gate", in, spec.slope);
    skip_.emplace(name + ".skip", in, out, init);
    mix_ = Parameter(name + ".mix", {1}, {0.0});
  }
}

Tensor MlpPlusBlock::forward(const Tensor& x, const ForwardContext& ctx) {
  if (x.rank() != 2 || x.dim(1) != in_) {
    throw ShapeError("mlp_plus", x.shape(), {in_}, "input width must equal block width");
  }
  Tensor main = mlp_.forward(main_gate_ ? main_gate_->forward(x) : x, ctx);
  if (!skip_) return main;
  Tensor side = skip_->forward(skip_gate_ ? skip_gate_->forward(x) : x);
  return convex_mix(mix_.tensor(), main, side);
}

void MlpPlusBlock::collect(ParameterList& out) {
  if (main_gate_) main_gate_->collect(out);
  mlp_.collect(out);
  if (skip_gate_) skip_gate_->collect(out);
  if (skip_) {
    skip_->collect(out);
    out.push_back(&mix_);
  }
}

void MlpPlusBlock::collect_state(StateList& out) {
  ParameterList ps;
  if (main_gate_) main_gate_->collect(ps);
  for (auto* p : ps) append_parameter_state(*p, out);
  mlp_.collect_state(out);
  ps.clear();
  if (skip_gate_) skip_gate_->collect(ps);
  if (skip_) {
    skip_->collect(ps);
    ps.push_back(&mix_);
  }
  for (auto* p : ps) append_parameter_state(*p, out);
}

std::size_t inner_product_width(std::size_t fields) { return fields * (fields - 1) / 2; }

namespace {

std::size_t product_raw_width(std::size_t fields, std::size_t dim, ProductType type) {
  if (type != ProductType::kOuter && fields < 2) {
    throw std::invalid_argument("inner products need at least 2 fields");
  }
  switch (type) {
    case ProductType::kInner: return inner_product_width(fields);
    case ProductType::kOuter: return dim * dim;
    case ProductType::kBoth: return inner_product_width(fields) + dim * dim;
  }
  return 0;
}

}  // namespace

ProductInteraction::ProductInteraction(const std::string& name, std::size_t fields, std::size_t dim,
                                       ProductType type, std::size_t output_size, Rng& init)
    : fields_(fields),
      dim_(dim),
      type_(type),
      raw_width_(product_raw_width(fields, dim, type)),
      proj_(name + ".proj", raw_width_, output_size, init) {}

Tensor ProductInteraction::features(const Tensor& e) const {
  if (e.rank() != 3 || e.dim(1) != fields_ || e.dim(2) != dim_) {
    throw ShapeError("product", e.shape(), {fields_, dim_}, "expected [batch, fields, dim]");
  }
  switch (type_) {
    case ProductType::kInner: return ops::pairwise_inner(e);
    case ProductType::kOuter: return ops::outer_self(ops::sum_axis(e, 1));
    case ProductType::kBoth: {
      const Tensor parts[] = {ops::pairwise_inner(e), ops::outer_self(ops::sum_axis(e, 1))};
      return ops::concat(parts, 1);
    }
  }
  throw std::logic_error("unknown product type");
}

Tensor ProductInteraction::forward(const Tensor& e) const { return proj_.forward(features(e)); }

AttentionLayer::AttentionLayer(const std::string& name, std::size_t dim, const AttentionSpec& spec,
                               Rng& init)
    : dim_(dim),
      heads_(spec.heads),
      dropout_(spec.dropout),
      activation_(spec.activation),
      slope_(spec.slope),
      query_(name + ".query", dim, dim * spec.heads, init, false),
      key_(name + ".key", dim, dim * spec.heads, init, false),
      value_(name + ".value", dim, dim * spec.heads, init, false),
      out_(name + ".out", dim * spec.heads, dim, init) {
  if (spec.heads == 0) throw std::invalid_argument("attention needs at least one head");
  if (spec.residual) residual_.emplace(name + ".residual", dim, dim, init, false);
}

Tensor AttentionLayer::forward(const Tensor& e, const ForwardContext& ctx,
                               std::vector<Tensor>* weights) const {
  if (e.rank() != 3 || e.dim(2) != dim_) {
    throw ShapeError("attention", e.shape(), {dim_}, "expected [batch, fields, dim]");
  }
  const Tensor q = query_.forward(e);
  const Tensor k = key_.forward(e);
  const Tensor v = value_.forward(e);
  const double inv_sqrt = 1.0 / std::sqrt(double(dim_));
  std::vector<Tensor> heads;
  heads.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    const Tensor qh = ops::slice(q, 2, h * dim_, dim_);
    const Tensor kh = ops::slice(k, 2, h * dim_, dim_);
    const Tensor vh = ops::slice(v, 2, h * dim_, dim_);
    Tensor w = ops::softmax(ops::affine(ops::batched_matmul(qh, kh, true), inv_sqrt, 0.0));
    if (weights) weights->push_back(w);
    w = apply_dropout(w, dropout_, ctx);
    heads.push_back(ops::batched_matmul(w, vh));
  }
  Tensor y = out_.forward(heads.size() == 1 ? heads[0] : ops::concat(heads, 2));
  if (residual_) y = ops::add(y, residual_->forward(e));
  if (activation_) y = ops::leaky_relu(y, slope_);
  return y;
}

void AttentionLayer::collect(ParameterList& out) {
  query_.collect(out);
  key_.collect(out);
  value_.collect(out);
  out_.collect(out);
  if (residual_) residual_->collect(out);
}

AttentionInteraction::AttentionInteraction(const std::string& name, std::size_t dim,
                                           const AttentionSpec& spec, Rng& init) {
  if (spec.layers == 0) throw std::invalid_argument("attention needs at least one layer");
  layers_.reserve(spec.layers);
  for (std::size_t i = 0; i < spec.layers; ++i) {
    layers_.emplace_back(name + "." + std::to_string(i), dim, spec, init);
  }
}

Tensor AttentionInteraction::forward(const Tensor& e, const ForwardContext& ctx,
                                     std::vector<Tensor>* weights) const {
  Tensor h = e;
  for (const auto& layer : layers_) h = layer.forward(h, ctx, weights);
  return h;
}

void AttentionInteraction::collect(ParameterList& out) {
  for (auto& l : layers_) l.collect(out);
}

}  // namespace tabplus
