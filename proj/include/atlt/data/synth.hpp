#pragma once

#include <cstdint>

#include "atlt/data/dataset.hpp"

namespace atlt::data {

struct SynthOptions {
  std::size_t channels = 1;
  // Seed for the per-class base textures. Train and test sets generated with
  // different `seed`s but the same template seed share their classes.
  std::uint64_t template_seed = 0;
  Split split = Split::Train;
  // Per-example nuisance variation.
  double max_shift = 3.0;         // pixels, each axis
  double max_rotate_deg = 30.0;
  double contrast_jitter = 0.4;   // contrast factor in 1 +- jitter
  double brightness_jitter = 0.12;
  double noise = 0.05;            // pixel noise standard deviation
};

/// Procedural classification data. Each class owns a smooth base texture
/// (low-frequency gratings plus a blob); every example is that texture under a
/// random rotation and circular shift, a random contrast and brightness
/// change, and pixel noise. Pixels are quantized to k/255 so the IDX and
/// CIFAR writers round-trip them exactly. Examples are ordered class-major.
ImageDataset synth_dataset(std::uint64_t seed, std::size_t num_classes, std::size_t per_class, std::size_t side,
                           const SynthOptions& options = {});

}  // namespace atlt::data
