#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "atlt/core/parameter.hpp"
#include "atlt/core/tape.hpp"

namespace atlt::nets {

struct ConvBlock {
  std::size_t out_channels = 16;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  std::size_t pool = 2;  // max-pool window after the relu; 0 disables pooling

  friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

/// Convolutional feature extractor f(x): conv blocks (conv, bias, relu,
/// optional max-pool), flatten, then dense+relu layers. The width of the last
/// dense layer is the feature dimension D.
struct FeatureExtractorSpec {
  std::size_t in_channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  std::vector<ConvBlock> convs;
  std::vector<std::size_t> hidden;

  // conv(16,3x3)-relu-pool -> conv(32,3x3)-relu-pool -> dense(128)-relu
  static FeatureExtractorSpec desk_default(std::size_t channels, std::size_t height, std::size_t width);

  // Shape after the conv stack as (C, H, W). Throws ShapeError if the layers
  // do not compose.
  Shape conv_output_shape() const;
  std::size_t feature_dim() const;
  void validate() const;

  friend bool operator==(const FeatureExtractorSpec&, const FeatureExtractorSpec&) = default;
};

enum class HeadKind { Linear, Cosine };

std::string head_kind_name(HeadKind kind);
HeadKind parse_head_kind(const std::string& name);

struct HeadSpec {
  HeadKind kind = HeadKind::Linear;
  std::size_t num_classes = 10;
  double scale = 10.0;     // s, cosine head only
  bool learn_bias = true;  // false freezes b at its initial value (zero)

  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

struct ModelSpec {
  FeatureExtractorSpec features;
  HeadSpec head;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

void to_json(nlohmann::json& j, const ConvBlock& b);
void from_json(const nlohmann::json& j, ConvBlock& b);
void to_json(nlohmann::json& j, const FeatureExtractorSpec& s);
void from_json(const nlohmann::json& j, FeatureExtractorSpec& s);
void to_json(nlohmann::json& j, const HeadSpec& s);
void from_json(const nlohmann::json& j, HeadSpec& s);
void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

// Norms below this floor are clamped rather than divided by.
inline constexpr double kNormFloor = 1e-12;

// Linear head: features (N,D) x W (D,C) + b (C).
template <typename T>
Var<T> linear_logits(Var<T> features, Var<T> weight, Var<T> bias);

// Raw cosine similarities cos(theta_i) between each feature row and each
// weight column, shape (N,C).
template <typename T>
Var<T> cosine_similarity(Var<T> features, Var<T> weight);

// Cosine head: s * cos(theta_i) + b_i.
template <typename T>
Var<T> cosine_logits(Var<T> features, Var<T> weight, double scale, Var<T> bias);

template <typename T>
struct ForwardResult {
  Var<T> features;
  Var<T> cosine;  // raw cos(theta), cosine head only
  Var<T> logits;
  std::vector<Var<T>> params;  // parallel to Model::parameters()
};

template <typename T>
class Model {
 public:
  Model(ModelSpec spec, std::uint64_t init_seed);
  // Builds a model from explicit parameter values, e.g. a loaded checkpoint.
  Model(ModelSpec spec, std::vector<Parameter<T>> params);

  const ModelSpec& spec() const { return spec_; }
  std::size_t num_classes() const { return spec_.head.num_classes; }
  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  Parameter<T>& parameter(const std::string& name);
  const Parameter<T>& parameter(const std::string& name) const;

  // Records the forward pass on `tape`. Parameters become leaves that require
  // grad only when `param_grads` is set (and the parameter is trainable).
  ForwardResult<T> forward(Tape<T>& tape, Var<T> input, bool param_grads) const;

  // Logits for a batch without recording gradients.
  Tensor<T> logits(const Tensor<T>& input) const;

  // Adds the parameter gradients recorded on `tape` into each Parameter::grad.
  void accumulate_grads(const Tape<T>& tape, const ForwardResult<T>& fwd);
  void zero_grad();

  template <typename U>
  Model<U> cast() const {
    std::vector<Parameter<U>> ps;
    for (const auto& p : params_) ps.emplace_back(p.name, p.value.template cast<U>(), p.trainable);
    return Model<U>(spec_, std::move(ps));
  }

 private:
  ModelSpec spec_;
  std::vector<Parameter<T>> params_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace atlt::nets
