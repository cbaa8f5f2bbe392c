#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "atlt/attacks/attacks.hpp"
#include "atlt/data/dataset.hpp"
#include "atlt/nets/model.hpp"

namespace atlt::eval {

// Row-wise argmax, first maximum on ties.
std::vector<std::size_t> predict(const nets::Model<float>& model, const Tensor<float>& x);

enum class AttackKind { Fgsm, Pgd };

struct EvalAttack {
  AttackKind kind = AttackKind::Pgd;
  attacks::AttackSpec spec;
};

// Per-example correctness on `indices` of `dataset`, clean when `attack` is
// empty. The attack uses the cross-entropy objective unless attack.spec.loss names
// another; batch b starts PGD from derive_seed(seed, "eval-batch", b).
// An attack with epsilon 0 leaves the inputs unchanged.
std::vector<bool> correctness(const nets::Model<float>& model, const data::ImageDataset& dataset,
                              std::span<const std::size_t> indices, const std::optional<EvalAttack>& attack,
                              std::uint64_t seed, std::size_t batch_size = 256);

// Percentage of true entries.
double percent(const std::vector<bool>& correct);

}  // namespace atlt::eval
