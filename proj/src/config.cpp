#include "tabplus/config.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>

namespace tabplus {

using nlohmann::json;

std::string to_string(Family family) {
  switch (family) {
    case Family::kMlpPlus: return "mlp-plus";
    case Family::kPnn: return "pnn";
    case Family::kAutoInt: return "autoint";
  }
  return "?";
}

Family parse_family(const std::string& text) {
  if (text == "mlp-plus") return Family::kMlpPlus;
  if (text == "pnn") return Family::kPnn;
  if (text == "autoint") return Family::kAutoInt;
  throw ConfigError("family", "unknown family '" + text + "' (expected mlp-plus, pnn or autoint)");
}

std::string to_string(ProductType type) {
  switch (type) {
    case ProductType::kInner: return "inner";
    case ProductType::kOuter: return "outer";
    case ProductType::kBoth: return "both";
  }
  return "?";
}

ProductType parse_product_type(const std::string& text) {
  if (text == "inner") return ProductType::kInner;
  if (text == "outer") return ProductType::kOuter;
  if (text == "both") return ProductType::kBoth;
  throw ConfigError("product.type", "unknown product type '" + text + "' (expected inner, outer or both)");
}

ConfigError::ConfigError(std::string axis, const std::string& message)
    : std::invalid_argument(axis + ": " + message), axis_(std::move(axis)) {}

namespace {

template <typename Axis, typename T>
void require_in(const Axis& axis, const T& value, const std::string& name, const std::string& shown) {
  if (std::find(axis.begin(), axis.end(), value) == axis.end()) {
    throw ConfigError(name, "value " + shown + " is not in the search space");
  }
}

std::string show(double v) { return json(v).dump(); }

std::string show(const std::vector<std::size_t>& v) { return json(v).dump(); }

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError(where + key, "unknown setting");
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + key, e.what());
  }
}

}  // namespace

ModelConfig default_config(Family family) {
  ModelConfig c;
  c.family = family;
  if (family == Family::kPnn) c.product = ProductSpec{ProductType::kInner, space::kProductOutput[0]};
  if (family == Family::kAutoInt) c.attention = AttentionSpec{};
  return c;
}

void validate(const ModelConfig& c) {
  require_in(space::kEmbeddingSize, c.embedding_size, "embedding_size", std::to_string(c.embedding_size));
  require_in(space::kMlpLayers, c.mlp_layers, "mlp_layers", show(c.mlp_layers));
  require_in(space::kDropout, c.dropout, "dropout", show(c.dropout));
  if (c.n_classes != 2) throw ConfigError("n_classes", "only binary tasks (2 classes) are supported");
  if (!(c.leaky_slope >= 0.0 && c.leaky_slope < 1.0)) {
    throw ConfigError("leaky_slope", "must lie in [0, 1), got " + show(c.leaky_slope));
  }
  if (c.product.has_value() != (c.family == Family::kPnn)) {
    throw ConfigError("product", "product settings belong to the pnn family only");
  }
  if (c.attention.has_value() != (c.family == Family::kAutoInt)) {
    throw ConfigError("attention", "attention settings belong to the autoint family only");
  }
  if (c.raw_numeric_input && c.family != Family::kMlpPlus) {
    throw ConfigError("raw_numeric_input", "only supported by the mlp-plus family");
  }
  if (c.product) {
    require_in(space::kProductOutput, c.product->output_size, "product.output_size",
               std::to_string(c.product->output_size));
  }
  if (c.attention) {
    const auto& a = *c.attention;
    require_in(space::kAttentionLayers, a.layers, "attention.layers", std::to_string(a.layers));
    require_in(space::kAttentionHeads, a.heads, "attention.heads", std::to_string(a.heads));
    require_in(space::kAttentionDropout, a.dropout, "attention.dropout", show(a.dropout));
  }
}

void validate(const ExperimentConfig& c) {
  validate(c.model);
  require_in(space::kLearningRate, c.lr, "lr", show(c.lr));
  require_in(space::kLrStep, c.lr_step, "lr_step", std::to_string(c.lr_step));
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"family", to_string(c.family)},
           {"embedding_size", c.embedding_size},
           {"mlp_layers", c.mlp_layers},
           {"dropout", c.dropout},
           {"use_skip", c.use_skip},
           {"use_gate", c.use_gate},
           {"raw_numeric_input", c.raw_numeric_input},
           {"n_classes", c.n_classes},
           {"leaky_slope", c.leaky_slope}};
  if (c.product) {
    j["product"] = {{"type", to_string(c.product->type)}, {"output_size", c.product->output_size}};
  }
  if (c.attention) {
    j["attention"] = {{"layers", c.attention->layers},
                      {"heads", c.attention->heads},
                      {"dropout", c.attention->dropout},
                      {"residual", c.attention->residual},
                      {"activation", c.attention->activation ? "leaky-relu" : "none"}};
  }
}

namespace {

const std::set<std::string> kModelKeys = {"family",      "embedding_size",    "mlp_layers",
                                          "dropout",     "use_skip",          "use_gate",
                                          "raw_numeric_input", "n_classes",   "leaky_slope",
                                          "product",     "attention"};

void read_model(const json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  c = default_config(parse_family(field<std::string>(j, "family", "")));
  c.product.reset();
  c.attention.reset();
  if (j.contains("embedding_size")) c.embedding_size = field<std::size_t>(j, "embedding_size", "");
  if (j.contains("mlp_layers")) c.mlp_layers = field<std::vector<std::size_t>>(j, "mlp_layers", "");
  if (j.contains("dropout")) c.dropout = field<double>(j, "dropout", "");
  if (j.contains("use_skip")) c.use_skip = field<bool>(j, "use_skip", "");
  if (j.contains("use_gate")) c.use_gate = field<bool>(j, "use_gate", "");
  if (j.contains("raw_numeric_input")) c.raw_numeric_input = field<bool>(j, "raw_numeric_input", "");
  if (j.contains("n_classes")) c.n_classes = field<std::size_t>(j, "n_classes", "");
  if (j.contains("leaky_slope")) c.leaky_slope = field<double>(j, "leaky_slope", "");
  if (j.contains("product")) {
    const auto& p = j.at("product");
    reject_unknown_keys(p, {"type", "output_size"}, "product.");
    ProductSpec spec;
    if (p.contains("type")) spec.type = parse_product_type(field<std::string>(p, "type", "product."));
    if (p.contains("output_size")) spec.output_size = field<std::size_t>(p, "output_size", "product.");
    c.product = spec;
  } else if (c.family == Family::kPnn) {
    c.product = ProductSpec{};
  }
  if (j.contains("attention")) {
    const auto& a = j.at("attention");
    reject_unknown_keys(a, {"layers", "heads", "dropout", "residual", "activation"}, "attention.");
    AttentionSpec spec;
    if (a.contains("layers")) spec.layers = field<std::size_t>(a, "layers", "attention.");
    if (a.contains("heads")) spec.heads = field<std::size_t>(a, "heads", "attention.");
    if (a.contains("dropout")) spec.dropout = field<double>(a, "dropout", "attention.");
    if (a.contains("residual")) spec.residual = field<bool>(a, "residual", "attention.");
    if (a.contains("activation")) {
      const auto act = field<std::string>(a, "activation", "attention.");
      if (act != "none" && act != "leaky-relu") {
        throw ConfigError("attention.activation", "expected none or leaky-relu, got '" + act + "'");
      }
      spec.activation = act == "leaky-relu";
    }
    c.attention = spec;
  } else if (c.family == Family::kAutoInt) {
    c.attention = AttentionSpec{};
  }
  if (c.attention) c.attention->slope = c.leaky_slope;
}

}  // namespace

void from_json(const json& j, ModelConfig& c) {
  reject_unknown_keys(j, kModelKeys, "");
  read_model(j, c);
}

void to_json(json& j, const ExperimentConfig& c) {
  to_json(j, c.model);
  j["lr"] = c.lr;
  j["lr_step"] = c.lr_step;
}

void from_json(const json& j, ExperimentConfig& c) {
  auto keys = kModelKeys;
  keys.insert({"lr", "lr_step"});
  reject_unknown_keys(j, keys, "");
  read_model(j, c.model);
  if (j.contains("lr")) c.lr = field<double>(j, "lr", "");
  if (j.contains("lr_step")) c.lr_step = field<int>(j, "lr_step", "");
}

}  // namespace tabplus
