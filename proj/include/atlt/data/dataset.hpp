#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "atlt/core/tensor.hpp"
#include "atlt/losses/losses.hpp"

namespace atlt::data {

enum class Split { Train, Test };

std::string split_name(Split split);
Split parse_split(const std::string& name);

// Provenance record written next to dataset files as
// {"source", "seed", "ir", "counts": [...]}.
struct Manifest {
  std::string source = "memory";
  std::uint64_t seed = 0;
  double ir = 1.0;
  std::vector<std::int64_t> counts;
};

void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

/// Labelled images stored as one contiguous N x C x H x W float buffer with
/// values in [0,1].
struct ImageDataset {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 0;
  std::vector<float> pixels;
  std::vector<std::size_t> labels;
  Split split = Split::Train;
  Manifest manifest;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t image_numel() const { return channels * height * width; }
  std::span<const float> image(std::size_t i) const;

  // Throws DataError on out-of-range labels, pixels outside [0,1] or a pixel
  // buffer that does not match N x C x H x W.
  void validate() const;

  // Digest of geometry, labels and pixel bits.
  std::string digest() const;

  Tensor<float> batch_images(std::span<const std::size_t> indices) const;
  losses::Labels batch_labels(std::span<const std::size_t> indices) const;
  ImageDataset subset(std::span<const std::size_t> indices) const;
};

std::vector<std::int64_t> class_histogram(const ImageDataset& dataset);

// Exact label histogram as ClassCounts; throws DataError when the dataset is
// empty or a class has no examples.
losses::ClassCounts class_counts(const ImageDataset& dataset);

// Uniform permutation of [0, n) via Fisher-Yates on the given seed.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace atlt::data
