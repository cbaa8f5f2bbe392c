#include "atlt/data/dataset.hpp"

#include <algorithm>
#include <cstring>

#include "atlt/core/digest.hpp"
#include "atlt/core/errors.hpp"
#include "atlt/core/rng.hpp"

namespace atlt::data {

std::string split_name(Split split) { return split == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + name + "'");
}

void to_json(nlohmann::json& j, const Manifest& m) {
  j = {{"source", m.source}, {"seed", m.seed}, {"ir", m.ir}, {"counts", m.counts}};
}

void from_json(const nlohmann::json& j, Manifest& m) {
  j.at("source").get_to(m.source);
  j.at("seed").get_to(m.seed);
  j.at("ir").get_to(m.ir);
  j.at("counts").get_to(m.counts);
}

std::span<const float> ImageDataset::image(std::size_t i) const {
  return std::span<const float>(pixels).subspan(i * image_numel(), image_numel());
}

void ImageDataset::validate() const {
  if (pixels.size() != labels.size() * image_numel()) {
    throw DataError("pixel buffer holds " + std::to_string(pixels.size()) + " values, expected " +
                    std::to_string(labels.size() * image_numel()));
  }
  for (auto y : labels) {
    if (y >= num_classes) throw DataError("label " + std::to_string(y) + " out of range [0," + std::to_string(num_classes) + ")");
  }
  for (float v : pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("pixel value outside [0,1]");
  }
}

std::string ImageDataset::digest() const {
  Digest d;
  d.pod(channels).pod(height).pod(width).pod(num_classes);
  d.bytes(labels.data(), labels.size() * sizeof(std::size_t));
  d.bytes(pixels.data(), pixels.size() * sizeof(float));
  return d.hex();
}

Tensor<float> ImageDataset::batch_images(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw DataError("empty batch");
  const std::size_t per = image_numel();
  std::vector<float> buf(indices.size() * per);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) throw DataError("batch index out of range");
    std::memcpy(buf.data() + b * per, pixels.data() + indices[b] * per, per * sizeof(float));
  }
  return Tensor<float>(Shape{indices.size(), channels, height, width}, std::move(buf));
}

losses::Labels ImageDataset::batch_labels(std::span<const std::size_t> indices) const {
  losses::Labels out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

ImageDataset ImageDataset::subset(std::span<const std::size_t> indices) const {
  ImageDataset out;
  out.channels = channels;
  out.height = height;
  out.width = width;
  out.num_classes = num_classes;
  out.split = split;
  out.manifest = manifest;
  const std::size_t per = image_numel();
  out.pixels.reserve(indices.size() * per);
  for (auto i : indices) {
    if (i >= size()) throw DataError("subset index out of range");
    out.labels.push_back(labels[i]);
    out.pixels.insert(out.pixels.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i * per),
                      pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
  }
  return out;
}

std::vector<std::int64_t> class_histogram(const ImageDataset& dataset) {
  std::vector<std::int64_t> hist(dataset.num_classes, 0);
  for (auto y : dataset.labels) {
    if (y >= hist.size()) throw DataError("label out of range while counting classes");
    ++hist[y];
  }
  return hist;
}

losses::ClassCounts class_counts(const ImageDataset& dataset) {
  if (dataset.empty()) throw DataError("cannot count classes of an empty dataset");
  auto hist = class_histogram(dataset);
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (hist[i] == 0) throw DataError("class " + std::to_string(i) + " has no examples");
  }
  return losses::ClassCounts(std::move(hist));
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace atlt::data
