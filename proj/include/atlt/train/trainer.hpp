#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atlt/attacks/attacks.hpp"
#include "atlt/augment/augment.hpp"
#include "atlt/core/parameter.hpp"
#include "atlt/data/dataset.hpp"
#include "atlt/losses/losses.hpp"
#include "atlt/nets/model.hpp"
#include "atlt/train/schedule.hpp"

namespace atlt::train {

// Plain momentum SGD with L2 weight decay on every trainable parameter:
//   v = momentum * v + (g + weight_decay * w);  w = w - lr * v
// Throws NonFiniteError naming the parameter if a gradient is NaN or infinite.
template <typename T>
void sgd_update(std::vector<Parameter<T>>& params, double lr, double momentum, double weight_decay);

// The order of augmentation and inner attack inside a training batch. Only
// AugmentThenAttack is a correct pipeline; the reversed order exists so tests
// can show that the ordering check catches it.
enum class PipelineOrder { AugmentThenAttack, AttackThenAugment };

// PGD used to score the model on the held-out subset after every epoch.
struct EvalConfig {
  std::size_t subset = 500;  // test examples per epoch, 0 = the whole test set
  double epsilon = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  int steps = 20;
  std::size_t batch_size = 256;
};

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 128;
  Schedule schedule;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;

  losses::Ladder ladder = losses::Ladder::AtBsl;
  losses::LossConfig loss = losses::ladder_defaults(losses::Ladder::AtBsl);
  attacks::AttackSpec attack = default_attack();
  augment::AugPolicy policy;

  // Feature extractor layers. Input geometry is taken from the dataset.
  std::vector<nets::ConvBlock> convs = {{16, 3, 1, 1, 2}, {32, 3, 1, 1, 2}};
  std::vector<std::size_t> hidden = {128};
  // Head kind defaults to the ladder row's choice.
  std::optional<nets::HeadKind> head;
  // Defaults to learnable only for plain CE (tau_b = 0). The logit-adjusted
  // rows keep the head bias frozen at zero; the prior shift lives in the loss.
  std::optional<bool> learn_bias;

  EvalConfig eval;
  PipelineOrder order = PipelineOrder::AugmentThenAttack;

  static attacks::AttackSpec default_attack();

  nets::HeadKind head_kind() const;
  bool bias_learnable() const;
  nets::ModelSpec model_spec(std::size_t channels, std::size_t height, std::size_t width, std::size_t num_classes) const;
  void validate() const;
  // Digest of the canonical JSON form.
  std::string digest() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; "loss" keys override the ladder row's
// defaults one by one. Unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double clean_acc = 0.0;  // percent
  double pgd20 = 0.0;      // percent

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// Per-epoch trace of one training run.
struct RunLog {
  std::vector<EpochRecord> records;
  std::size_t best_index = 0;  // record with the highest pgd20, earliest on ties
  std::string config_digest;

  static RunLog from_records(std::vector<EpochRecord> records, std::string config_digest = "");

  const EpochRecord& best() const;
  const EpochRecord& last() const;

  // epoch,lr,train_loss,clean_acc,pgd20 with one row per epoch.
  std::string csv() const;
  // {"config_digest", "records": [...], "best": {...}, "last": {...}}
  nlohmann::json json() const;
  std::string digest() const;
};

RunLog run_log_from_json(const nlohmann::json& j);

// Best minus final-epoch PGD-20 robustness.
double overfit_gap(const RunLog& log);

// Tensors seen by one training batch, for ordering checks.
struct BatchTrace {
  int epoch = 0;
  std::size_t batch = 0;
  const Tensor<float>* clean = nullptr;
  const Tensor<float>* augmented = nullptr;
  const Tensor<float>* adversarial = nullptr;
};

using BatchObserver = std::function<void(const BatchTrace&)>;

struct TrainResult {
  nets::Model<float> best;
  nets::Model<float> last;
  RunLog log;
};

/// Adversarial training: per epoch a seeded shuffle, then per batch
/// augment, inner attack, loss on the adversarial batch (plus the clean batch
/// for TRADES rows) and one SGD step; after every epoch the model is scored
/// clean and under PGD-20 on a fixed seeded test subset.
///
/// Randomness: init from derive_seed(seed, "init"), shuffling from
/// derive_seed(seed, "data", epoch), augmentation from
/// derive_seed(seed, "augment", epoch), attack starts from
/// derive_seed(seed, "attack", epoch, batch).
TrainResult adversarial_train(const TrainConfig& config, const data::ImageDataset& train_set,
                              const data::ImageDataset& test_set, const BatchObserver& observer = {});

}  // namespace atlt::train
