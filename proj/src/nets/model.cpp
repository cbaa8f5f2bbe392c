#include "atlt/nets/model.hpp"

#include <cmath>

#include "atlt/core/errors.hpp"
#include "atlt/core/rng.hpp"

namespace atlt::nets {

FeatureExtractorSpec FeatureExtractorSpec::desk_default(std::size_t channels, std::size_t height, std::size_t width) {
  FeatureExtractorSpec s;
  s.in_channels = channels;
  s.height = height;
  s.width = width;
  s.convs = {ConvBlock{16, 3, 1, 1, 2}, ConvBlock{32, 3, 1, 1, 2}};
  s.hidden = {128};
  return s;
}

Shape FeatureExtractorSpec::conv_output_shape() const {
  if (in_channels == 0 || height == 0 || width == 0) throw ShapeError("feature extractor input extents must be positive");
  std::size_t c = in_channels, h = height, w = width;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& b = convs[i];
    const std::string where = "conv block " + std::to_string(i);
    if (b.out_channels == 0 || b.kernel == 0 || b.stride == 0) throw ShapeError(where + ": zero extent");
    if (h + 2 * b.padding < b.kernel || w + 2 * b.padding < b.kernel) throw ShapeError(where + ": kernel exceeds input");
    h = (h + 2 * b.padding - b.kernel) / b.stride + 1;
    w = (w + 2 * b.padding - b.kernel) / b.stride + 1;
    c = b.out_channels;
    if (b.pool > 0) {
      if (h < b.pool || w < b.pool) throw ShapeError(where + ": pool window exceeds feature map");
      h /= b.pool;
      w /= b.pool;
    }
  }
  return {c, h, w};
}

std::size_t FeatureExtractorSpec::feature_dim() const {
  if (!hidden.empty()) return hidden.back();
  return shape_numel(conv_output_shape());
}

void FeatureExtractorSpec::validate() const {
  conv_output_shape();
  for (auto h : hidden)
    if (h == 0) throw ShapeError("hidden width must be positive");
}

std::string head_kind_name(HeadKind kind) { return kind == HeadKind::Linear ? "linear" : "cosine"; }

HeadKind parse_head_kind(const std::string& name) {
  if (name == "linear") return HeadKind::Linear;
  if (name == "cosine") return HeadKind::Cosine;
  throw ConfigError("unknown head kind '" + name + "' (expected linear or cosine)");
}

void to_json(nlohmann::json& j, const ConvBlock& b) {
  j = {{"out_channels", b.out_channels}, {"kernel", b.kernel}, {"stride", b.stride}, {"padding", b.padding}, {"pool", b.pool}};
}

void from_json(const nlohmann::json& j, ConvBlock& b) {
  if (!j.is_object()) throw ConfigError("conv block must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "out_channels" && k != "kernel" && k != "stride" && k != "padding" && k != "pool")
      throw ConfigError("unknown key '" + k + "' in conv block");
  }
  j.at("out_channels").get_to(b.out_channels);
  j.at("kernel").get_to(b.kernel);
  b.stride = j.value("stride", std::size_t{1});
  b.padding = j.value("padding", std::size_t{0});
  b.pool = j.value("pool", std::size_t{0});
}

void to_json(nlohmann::json& j, const FeatureExtractorSpec& s) {
  j = {{"in_channels", s.in_channels}, {"height", s.height}, {"width", s.width}, {"convs", s.convs}, {"hidden", s.hidden}};
}

void from_json(const nlohmann::json& j, FeatureExtractorSpec& s) {
  j.at("in_channels").get_to(s.in_channels);
  j.at("height").get_to(s.height);
  j.at("width").get_to(s.width);
  s.convs = j.value("convs", std::vector<ConvBlock>{});
  s.hidden = j.value("hidden", std::vector<std::size_t>{});
}

void to_json(nlohmann::json& j, const HeadSpec& s) {
  j = {{"kind", head_kind_name(s.kind)}, {"num_classes", s.num_classes}, {"scale", s.scale}, {"learn_bias", s.learn_bias}};
}

void from_json(const nlohmann::json& j, HeadSpec& s) {
  s.kind = parse_head_kind(j.at("kind").get<std::string>());
  j.at("num_classes").get_to(s.num_classes);
  s.scale = j.value("scale", 10.0);
  s.learn_bias = j.value("learn_bias", true);
}

void to_json(nlohmann::json& j, const ModelSpec& s) { j = {{"features", s.features}, {"head", s.head}}; }

void from_json(const nlohmann::json& j, ModelSpec& s) {
  j.at("features").get_to(s.features);
  j.at("head").get_to(s.head);
}

template <typename T>
Var<T> linear_logits(Var<T> features, Var<T> weight, Var<T> bias) {
  return ops::add_row_vector(ops::matmul(features, weight), bias);
}

template <typename T>
Var<T> cosine_similarity(Var<T> features, Var<T> weight) {
  return ops::matmul(ops::normalize_rows(features, kNormFloor), ops::normalize_cols(weight, kNormFloor));
}

template <typename T>
Var<T> cosine_logits(Var<T> features, Var<T> weight, double scale, Var<T> bias) {
  if (!(scale > 0.0)) throw ConfigError("cosine head scale must be positive");
  return ops::add_row_vector(ops::scale(cosine_similarity(features, weight), scale), bias);
}

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

template <typename T>
Model<T>::Model(ModelSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
  spec_.features.validate();
  if (spec_.head.num_classes < 2) throw ConfigError("model needs at least 2 classes");
  if (spec_.head.kind == HeadKind::Cosine && !(spec_.head.scale > 0.0)) throw ConfigError("cosine head scale must be positive");
  Rng rng(derive_seed(init_seed, "init"));
  const auto& f = spec_.features;
  std::size_t c = f.in_channels;
  for (std::size_t i = 0; i < f.convs.size(); ++i) {
    const auto& b = f.convs[i];
    const std::size_t fan_in = c * b.kernel * b.kernel;
    const std::string prefix = "conv" + std::to_string(i);
    params_.emplace_back(prefix + ".weight", uniform_tensor<T>({b.out_channels, c, b.kernel, b.kernel}, std::sqrt(6.0 / fan_in), rng));
    params_.emplace_back(prefix + ".bias", Tensor<T>(Shape{b.out_channels}));
    c = b.out_channels;
  }
  std::size_t width = shape_numel(f.conv_output_shape());
  for (std::size_t i = 0; i < f.hidden.size(); ++i) {
    const std::string prefix = "fc" + std::to_string(i);
    params_.emplace_back(prefix + ".weight", uniform_tensor<T>({width, f.hidden[i]}, std::sqrt(6.0 / width), rng));
    params_.emplace_back(prefix + ".bias", Tensor<T>(Shape{f.hidden[i]}));
    width = f.hidden[i];
  }
  params_.emplace_back("head.weight", uniform_tensor<T>({width, spec_.head.num_classes}, std::sqrt(1.0 / width), rng));
  params_.emplace_back("head.bias", Tensor<T>(Shape{spec_.head.num_classes}), spec_.head.learn_bias);
}

template <typename T>
Model<T>::Model(ModelSpec spec, std::vector<Parameter<T>> params) : spec_(std::move(spec)), params_(std::move(params)) {
  Model<T> reference(spec_, 0);
  if (reference.params_.size() != params_.size()) throw ShapeError("parameter count does not match model spec");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& want = reference.params_[i];
    auto& got = params_[i];
    if (want.name != got.name || want.value.shape() != got.value.shape()) {
      throw ShapeError("parameter " + got.name + " " + shape_str(got.value.shape()) + " does not match expected " +
                       want.name + " " + shape_str(want.value.shape()));
    }
    got.trainable = want.trainable;
  }
}

template <typename T>
Parameter<T>& Model<T>::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ConfigError("no parameter named " + name);
}

template <typename T>
const Parameter<T>& Model<T>::parameter(const std::string& name) const {
  return const_cast<Model<T>*>(this)->parameter(name);
}

template <typename T>
ForwardResult<T> Model<T>::forward(Tape<T>& tape, Var<T> input, bool param_grads) const {
  const auto& f = spec_.features;
  const Shape in = input.shape();
  if (in.size() != 4 || in[1] != f.in_channels || in[2] != f.height || in[3] != f.width) {
    throw ShapeError("model expects input (N," + std::to_string(f.in_channels) + "," + std::to_string(f.height) + "," +
                     std::to_string(f.width) + "), got " + shape_str(in));
  }
  ForwardResult<T> out;
  for (const auto& p : params_) out.params.push_back(tape.leaf(p.value, param_grads && p.trainable));
  std::size_t k = 0;
  Var<T> h = input;
  for (const auto& b : f.convs) {
    h = ops::conv2d(h, out.params[k], b.stride, b.padding);
    h = ops::relu(ops::add_channel_bias(h, out.params[k + 1]));
    if (b.pool > 0) h = ops::max_pool2d(h, b.pool);
    k += 2;
  }
  h = ops::reshape(h, Shape{in[0], shape_numel(f.conv_output_shape())});
  for (std::size_t i = 0; i < f.hidden.size(); ++i) {
    h = ops::relu(linear_logits(h, out.params[k], out.params[k + 1]));
    k += 2;
  }
  out.features = h;
  if (spec_.head.kind == HeadKind::Linear) {
    out.logits = linear_logits(h, out.params[k], out.params[k + 1]);
    out.cosine = out.logits;
  } else {
    out.cosine = cosine_similarity(h, out.params[k]);
    out.logits = ops::add_row_vector(ops::scale(out.cosine, spec_.head.scale), out.params[k + 1]);
  }
  return out;
}

template <typename T>
Tensor<T> Model<T>::logits(const Tensor<T>& input) const {
  Tape<T> tape;
  auto fwd = forward(tape, tape.constant(input), false);
  return fwd.logits.value();
}

template <typename T>
void Model<T>::accumulate_grads(const Tape<T>& tape, const ForwardResult<T>& fwd) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!tape.requires_grad(fwd.params[i])) continue;
    const Tensor<T> g = tape.grad(fwd.params[i]);
    auto& acc = params_[i].grad;
    for (std::size_t e = 0; e < g.numel(); ++e) acc[e] += g[e];
  }
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template Var<float> linear_logits(Var<float>, Var<float>, Var<float>);
template Var<double> linear_logits(Var<double>, Var<double>, Var<double>);
template Var<float> cosine_similarity(Var<float>, Var<float>);
template Var<double> cosine_similarity(Var<double>, Var<double>);
template Var<float> cosine_logits(Var<float>, Var<float>, double, Var<float>);
template Var<double> cosine_logits(Var<double>, Var<double>, double, Var<double>);
template class Model<float>;
template class Model<double>;

}  // namespace atlt::nets
