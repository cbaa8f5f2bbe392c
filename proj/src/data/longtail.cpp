#include "atlt/data/longtail.hpp"

#include <algorithm>
#include <cmath>

#include "atlt/core/errors.hpp"
#include "atlt/core/rng.hpp"

namespace atlt::data {

LongTailProfile longtail_profile(std::int64_t n_max, std::size_t num_classes, double imbalance_ratio) {
  if (num_classes == 0) throw ConfigError("long-tail profile needs at least one class");
  if (!(imbalance_ratio >= 1.0) || !std::isfinite(imbalance_ratio)) throw ConfigError("imbalance ratio must be finite and >= 1");
  if (static_cast<double>(n_max) / imbalance_ratio < 1.0) {
    throw ConfigError("n_max / imbalance ratio must be >= 1 (n_max " + std::to_string(n_max) + ")");
  }
  LongTailProfile p;
  p.imbalance_ratio = imbalance_ratio;
  p.counts.resize(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) {
    const double exponent = num_classes == 1 ? 0.0 : -static_cast<double>(i) / static_cast<double>(num_classes - 1);
    p.counts[i] = static_cast<std::int64_t>(std::round(static_cast<double>(n_max) * std::pow(imbalance_ratio, exponent)));
  }
  return p;
}

std::pair<ImageDataset, losses::ClassCounts> make_longtail(const ImageDataset& dataset, double imbalance_ratio,
                                                            std::uint64_t seed) {
  if (dataset.empty()) throw DataError("make_longtail: empty dataset");
  const auto hist = class_histogram(dataset);
  const std::int64_t n_max = *std::max_element(hist.begin(), hist.end());
  const auto profile = longtail_profile(n_max, dataset.num_classes, imbalance_ratio);

  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels[i]].push_back(i);

  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < dataset.num_classes; ++k) {
    const auto want = static_cast<std::size_t>(profile.counts[k]);
    const auto& pool = by_class[k];
    if (want > pool.size()) {
      throw DataError("class " + std::to_string(k) + ": profile asks for " + std::to_string(want) + " examples, only " +
                      std::to_string(pool.size()) + " available");
    }
    const auto perm = seeded_permutation(pool.size(), derive_seed(seed, "longtail", k));
    for (std::size_t j = 0; j < want; ++j) keep.push_back(pool[perm[j]]);
  }
  std::sort(keep.begin(), keep.end());

  ImageDataset out = dataset.subset(keep);
  out.manifest.seed = seed;
  out.manifest.ir = imbalance_ratio;
  out.manifest.counts = profile.counts;
  return {std::move(out), losses::ClassCounts(profile.counts)};
}

}  // namespace atlt::data
