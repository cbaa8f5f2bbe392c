#include "atlt/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "atlt/core/digest.hpp"
#include "atlt/core/errors.hpp"
#include "atlt/core/rng.hpp"
#include "atlt/eval/accuracy.hpp"
#include "atlt/simd/kernels.hpp"

namespace atlt::train {

template <typename T>
void sgd_update(std::vector<Parameter<T>>& params, double lr, double momentum, double weight_decay) {
  const auto& k = simd::kernels<T>();
  for (auto& p : params) {
    if (!p.trainable) continue;
    for (T g : p.grad.data()) {
      if (!std::isfinite(static_cast<double>(g))) throw NonFiniteError("non-finite gradient in parameter " + p.name);
    }
    k.sgd_momentum(p.value.numel(), static_cast<T>(lr), static_cast<T>(momentum), static_cast<T>(weight_decay),
                   p.grad.ptr(), p.value.ptr(), p.momentum.ptr());
  }
}

template void sgd_update(std::vector<Parameter<float>>&, double, double, double);
template void sgd_update(std::vector<Parameter<double>>&, double, double, double);

RunLog RunLog::from_records(std::vector<EpochRecord> records, std::string config_digest) {
  RunLog log;
  log.records = std::move(records);
  log.config_digest = std::move(config_digest);
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    if (log.records[i].pgd20 > log.records[log.best_index].pgd20) log.best_index = i;
  }
  return log;
}

const EpochRecord& RunLog::best() const {
  if (records.empty()) throw ConfigError("run log is empty");
  return records.at(best_index);
}

const EpochRecord& RunLog::last() const {
  if (records.empty()) throw ConfigError("run log is empty");
  return records.back();
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json record_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"lr", r.lr}, {"train_loss", r.train_loss}, {"clean_acc", r.clean_acc}, {"pgd20", r.pgd20}};
}

}  // namespace

std::string RunLog::csv() const {
  std::string out = "epoch,lr,train_loss,clean_acc,pgd20\n";
  for (const auto& r : records) {
    out += std::to_string(r.epoch) + "," + num(r.lr) + "," + num(r.train_loss) + "," + num(r.clean_acc) + "," +
           num(r.pgd20) + "\n";
  }
  return out;
}

nlohmann::json RunLog::json() const {
  nlohmann::json j;
  j["config_digest"] = config_digest;
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) j["records"].push_back(record_json(r));
  if (!records.empty()) {
    j["best"] = record_json(best());
    j["last"] = record_json(last());
    j["overfit_gap"] = overfit_gap(*this);
  }
  return j;
}

std::string RunLog::digest() const { return hex64(fnv1a64(csv() + config_digest)); }

RunLog run_log_from_json(const nlohmann::json& j) {
  std::vector<EpochRecord> records;
  for (const auto& r : j.at("records")) {
    EpochRecord e;
    r.at("epoch").get_to(e.epoch);
    r.at("lr").get_to(e.lr);
    r.at("train_loss").get_to(e.train_loss);
    r.at("clean_acc").get_to(e.clean_acc);
    r.at("pgd20").get_to(e.pgd20);
    records.push_back(e);
  }
  return RunLog::from_records(std::move(records), j.value("config_digest", std::string()));
}

double overfit_gap(const RunLog& log) { return log.best().pgd20 - log.last().pgd20; }

namespace {

// The head output a base loss consumes: raw cosines for the margin loss on a
// cosine head, logits otherwise.
struct LossPlan {
  losses::Ladder ladder;
  losses::LossConfig cfg;
  losses::ClassCounts counts;
  std::vector<double> margins;

  bool cosine() const { return losses::ladder_uses_cosine(ladder); }

  Var<float> base(Var<float> head_out, const losses::Labels& y) const {
    switch (ladder) {
      case losses::Ladder::At: return losses::cross_entropy(head_out, y);
      case losses::Ladder::AtBsl: return losses::balanced_softmax_loss(head_out, y, counts, cfg.tau_b);
      default: return losses::margin_bsl_loss(head_out, y, counts, margins, cfg.scale, cfg.tau_b);
    }
  }
};

}  // namespace

TrainResult adversarial_train(const TrainConfig& config, const data::ImageDataset& train_set,
                              const data::ImageDataset& test_set, const BatchObserver& observer) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (test_set.empty()) throw DataError("test set is empty");
  if (test_set.num_classes != train_set.num_classes || test_set.channels != train_set.channels ||
      test_set.height != train_set.height || test_set.width != train_set.width) {
    throw DataError("train and test sets disagree on geometry or class count");
  }

  const auto spec = config.model_spec(train_set.channels, train_set.height, train_set.width, train_set.num_classes);
  nets::Model<float> model(spec, derive_seed(config.seed, "init"));

  LossPlan plan{config.ladder, config.loss, data::class_counts(train_set), {}};
  plan.margins = losses::class_aware_margin(plan.counts, config.loss.tau_m, config.loss.scale, config.loss.m0);

  std::vector<std::size_t> eval_ids = data::seeded_permutation(test_set.size(), derive_seed(config.seed, "eval-subset"));
  if (config.eval.subset > 0 && config.eval.subset < eval_ids.size()) eval_ids.resize(config.eval.subset);
  std::sort(eval_ids.begin(), eval_ids.end());
  std::optional<eval::EvalAttack> eval_attack;
  {
    eval::EvalAttack a;
    a.kind = eval::AttackKind::Pgd;
    a.spec.epsilon = config.eval.epsilon;
    a.spec.step_size = config.eval.step_size;
    a.spec.steps = config.eval.steps;
    a.spec.random_start = true;
    a.spec.loss = attacks::AttackLoss::CrossEntropy;
    eval_attack = a;
  }
  const std::uint64_t eval_seed = derive_seed(config.seed, "eval-attack");

  const std::size_t n = train_set.size();
  const std::size_t num_batches = (n + config.batch_size - 1) / config.batch_size;
  std::vector<EpochRecord> records;
  std::optional<nets::Model<float>> best;
  double best_pgd = -1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = lr_at(config.schedule, epoch);
    const auto order = data::seeded_permutation(n, derive_seed(config.seed, "data", static_cast<std::uint64_t>(epoch)));
    const std::uint64_t aug_seed = derive_seed(config.seed, "augment", static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;

    for (std::size_t b = 0; b < num_batches; ++b) {
      const std::span<const std::size_t> ids(order.data() + b * config.batch_size,
                                             std::min(config.batch_size, n - b * config.batch_size));
      const auto x = train_set.batch_images(ids);
      const auto y = train_set.batch_labels(ids);
      const std::uint64_t attack_seed =
          derive_seed(config.seed, "attack", static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b));

      auto aug = augment::apply_policy(x, y, config.policy, aug_seed, ids);
      // The inner maximisation targets the (first) label of each example.
      const auto& attack_labels = aug.mix ? aug.mix->labels_a : y;
      const auto objective =
          attacks::model_objective(model, config.attack.loss, attack_labels, &plan.counts, config.loss.tau_b, config.attack.kappa);

      Tensor<float> x_adv;
      if (config.order == PipelineOrder::AugmentThenAttack) {
        x_adv = attacks::pgd(objective, aug.images, config.attack, attack_seed);
      } else {
        const auto x_adv_clean = attacks::pgd(objective, x, config.attack, attack_seed);
        x_adv = augment::apply_policy(x_adv_clean, y, config.policy, aug_seed, ids).images;
      }
      if (observer) observer(BatchTrace{epoch, b, &x, &aug.images, &x_adv});

      Tape<float> tape;
      auto adv_fwd = model.forward(tape, tape.leaf(x_adv, false), true);
      const auto head_out = [&](const nets::ForwardResult<float>& f) { return plan.cosine() ? f.cosine : f.logits; };
      Var<float> loss;
      if (aug.mix) {
        loss = losses::mixup_loss<float>(head_out(adv_fwd), aug.mix->labels_a, aug.mix->labels_b, aug.mix->lambda,
                                         [&](Var<float> z, const losses::Labels& lab) { return plan.base(z, lab); });
      } else {
        loss = plan.base(head_out(adv_fwd), y);
      }
      std::optional<nets::ForwardResult<float>> clean_fwd;
      if (losses::ladder_uses_trades(config.ladder)) {
        clean_fwd = model.forward(tape, tape.leaf(aug.images, false), true);
        loss = ops::add(loss, ops::scale(losses::kl_divergence(adv_fwd.logits, clean_fwd->logits), config.loss.beta));
      }
      const double loss_value = static_cast<double>(loss.value().item());
      if (!std::isfinite(loss_value)) {
        throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(b));
      }
      tape.backward(loss);
      model.zero_grad();
      model.accumulate_grads(tape, adv_fwd);
      if (clean_fwd) model.accumulate_grads(tape, *clean_fwd);
      try {
        sgd_update(model.parameters(), lr, config.momentum, config.weight_decay);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + " batch " + std::to_string(b));
      }
      loss_sum += loss_value * static_cast<double>(ids.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.clean_acc = eval::percent(eval::correctness(model, test_set, eval_ids, std::nullopt, eval_seed, config.eval.batch_size));
    rec.pgd20 = eval::percent(eval::correctness(model, test_set, eval_ids, eval_attack, eval_seed, config.eval.batch_size));
    records.push_back(rec);
    if (rec.pgd20 > best_pgd) {
      best_pgd = rec.pgd20;
      best = model;
    }
  }

  return TrainResult{*best, model, RunLog::from_records(std::move(records), config.digest())};
}

}  // namespace atlt::train
