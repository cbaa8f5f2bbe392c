#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "atlt/data/dataset.hpp"

namespace atlt::data {

// Exponential long-tail profile: counts[i] = round(n_max * ir^(-i / (C - 1))).
// counts[0] = n_max and counts[C-1] = n_max / ir up to rounding.
struct LongTailProfile {
  double imbalance_ratio = 1.0;
  std::vector<std::int64_t> counts;
};

LongTailProfile longtail_profile(std::int64_t n_max, std::size_t num_classes, double imbalance_ratio);

/// Subsamples each class of a balanced dataset down to the profile counts.
/// Class i keeps the first counts[i] entries of a permutation seeded by
/// (seed, i); selected examples keep their original relative order, so
/// ir = 1 returns the input unchanged. The test split should stay balanced.
std::pair<ImageDataset, losses::ClassCounts> make_longtail(const ImageDataset& dataset, double imbalance_ratio,
                                                            std::uint64_t seed);

}  // namespace atlt::data
