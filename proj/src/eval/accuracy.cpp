#include "atlt/eval/accuracy.hpp"

#include <algorithm>

#include "atlt/core/errors.hpp"
#include "atlt/core/rng.hpp"

namespace atlt::eval {

std::vector<std::size_t> predict(const nets::Model<float>& model, const Tensor<float>& x) {
  const auto logits = model.logits(x);
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = logits.ptr() + i * c;
    out[i] = static_cast<std::size_t>(std::max_element(row, row + c) - row);
  }
  return out;
}

std::vector<bool> correctness(const nets::Model<float>& model, const data::ImageDataset& dataset,
                              std::span<const std::size_t> indices, const std::optional<EvalAttack>& attack,
                              std::uint64_t seed, std::size_t batch_size) {
  if (dataset.num_classes != model.num_classes()) {
    throw DataError("model has " + std::to_string(model.num_classes()) + " classes but the dataset has " +
                    std::to_string(dataset.num_classes));
  }
  if (batch_size == 0) throw ConfigError("evaluation batch size must be >= 1");
  std::vector<bool> out;
  out.reserve(indices.size());
  for (std::size_t start = 0, b = 0; start < indices.size(); start += batch_size, ++b) {
    const auto ids = indices.subspan(start, std::min(batch_size, indices.size() - start));
    auto x = dataset.batch_images(ids);
    const auto y = dataset.batch_labels(ids);
    if (attack && attack->spec.epsilon > 0.0) {
      const auto objective = attacks::model_objective(model, attack->spec.loss, y, nullptr, 0.0, attack->spec.kappa);
      if (attack->kind == AttackKind::Fgsm) {
        x = attacks::fgsm(objective, x, attack->spec.epsilon);
      } else {
        x = attacks::pgd(objective, x, attack->spec, derive_seed(seed, "eval-batch", b));
      }
    }
    const auto pred = predict(model, x);
    for (std::size_t i = 0; i < pred.size(); ++i) out.push_back(pred[i] == y[i]);
  }
  return out;
}

double percent(const std::vector<bool>& correct) {
  if (correct.empty()) return 0.0;
  const auto hits = std::count(correct.begin(), correct.end(), true);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(correct.size());
}

}  // namespace atlt::eval
