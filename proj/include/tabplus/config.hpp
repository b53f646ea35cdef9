#pragma once

#include <array>
#include <cstddef>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tabplus/blocks.hpp"

namespace tabplus {

enum class Family { kMlpPlus, kPnn, kAutoInt };

std::string to_string(Family family);
Family parse_family(const std::string& text);
std::string to_string(ProductType type);
ProductType parse_product_type(const std::string& text);

/// Rejected configuration value; `axis` names the offending setting.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string axis, const std::string& message);
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

// The hyperparameter space searched for every family.
namespace space {
inline const std::array<std::vector<std::size_t>, 4> kMlpLayers = {{
    {256, 192, 128, 64},
    {512, 256, 128, 64},
    {512, 256, 128, 64, 32},
    {1024, 512, 256, 128},
}};
inline constexpr std::array<double, 4> kDropout = {0.0, 0.25, 0.50, 0.75};
inline constexpr std::array<double, 3> kLearningRate = {0.1, 0.01, 0.001};
inline constexpr std::array<int, 3> kLrStep = {10, 15, 20};
inline constexpr std::array<ProductType, 3> kProductType = {ProductType::kInner, ProductType::kOuter,
                                                            ProductType::kBoth};
inline constexpr std::array<std::size_t, 4> kProductOutput = {20, 40, 80, 120};
inline constexpr std::array<std::size_t, 3> kEmbeddingSize = {8, 16, 32};
inline constexpr std::array<std::size_t, 2> kAttentionLayers = {3, 4};
inline constexpr std::array<std::size_t, 2> kAttentionHeads = {2, 3};
inline constexpr std::array<double, 2> kAttentionDropout = {0.0, 0.1};
inline constexpr std::array<bool, 2> kAttentionActivation = {false, true};
inline constexpr std::array<bool, 2> kAttentionResidual = {true, false};
}  // namespace space

struct ProductSpec {
  ProductType type = ProductType::kInner;
  std::size_t output_size = 40;

  bool operator==(const ProductSpec&) const = default;
};

struct ModelConfig {
  Family family = Family::kMlpPlus;
  std::size_t embedding_size = 8;
  std::vector<std::size_t> mlp_layers = space::kMlpLayers[0];
  double dropout = 0.0;
  std::optional<ProductSpec> product;      ///< pnn only
  std::optional<AttentionSpec> attention;  ///< autoint only
  bool use_skip = true;
  bool use_gate = true;
  bool raw_numeric_input = false;  ///< mlp-plus only: numeric columns bypass embedding
  std::size_t n_classes = 2;
  double leaky_slope = kDefaultLeakySlope;

  bool operator==(const ModelConfig&) const = default;
};

/// Family defaults: the first value of every axis.
ModelConfig default_config(Family family);

/// Throws ConfigError unless every value lies in its axis and the
/// family-specific sections are present exactly for their family.
void validate(const ModelConfig& config);

/// Model settings plus the optimizer axes searched alongside them.
struct ExperimentConfig {
  ModelConfig model;
  double lr = 0.01;
  int lr_step = 10;

  bool operator==(const ExperimentConfig&) const = default;
};

void validate(const ExperimentConfig& config);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
/// Same object as the model with extra "lr" and "lr_step" keys.
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

}  // namespace tabplus
