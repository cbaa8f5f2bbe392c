#include <set>

#include "atlt/core/digest.hpp"
#include "atlt/core/errors.hpp"
#include "atlt/train/trainer.hpp"

namespace atlt::train {

attacks::AttackSpec TrainConfig::default_attack() {
  attacks::AttackSpec a;
  a.epsilon = 8.0 / 255.0;
  a.step_size = 2.0 / 255.0;
  a.steps = 10;
  a.random_start = true;
  a.loss = attacks::AttackLoss::Balanced;
  return a;
}

nets::HeadKind TrainConfig::head_kind() const {
  if (head) return *head;
  return losses::ladder_uses_cosine(ladder) ? nets::HeadKind::Cosine : nets::HeadKind::Linear;
}

bool TrainConfig::bias_learnable() const { return learn_bias.value_or(loss.tau_b == 0.0); }

nets::ModelSpec TrainConfig::model_spec(std::size_t channels, std::size_t height, std::size_t width,
                                        std::size_t num_classes) const {
  nets::ModelSpec spec;
  spec.features.in_channels = channels;
  spec.features.height = height;
  spec.features.width = width;
  spec.features.convs = convs;
  spec.features.hidden = hidden;
  spec.head.kind = head_kind();
  spec.head.num_classes = num_classes;
  spec.head.scale = loss.scale;
  spec.head.learn_bias = bias_learnable();
  return spec;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  schedule.validate();
  loss.validate();
  attack.validate();
  policy.validate();
  if (eval.steps < 1) throw ConfigError("eval steps must be >= 1");
  if (!(eval.epsilon >= 0.0 && eval.epsilon <= 1.0)) throw ConfigError("eval epsilon must lie in [0,1]");
  if (!(eval.step_size > 0.0)) throw ConfigError("eval step size must be positive");
  if (eval.batch_size < 1) throw ConfigError("eval batch size must be >= 1");
  if (losses::ladder_uses_cosine(ladder) && head_kind() != nets::HeadKind::Cosine) {
    throw ConfigError("ladder row " + losses::ladder_name(ladder) + " needs a cosine head");
  }
}

namespace {

std::string order_name(PipelineOrder o) {
  return o == PipelineOrder::AugmentThenAttack ? "augment-then-attack" : "attack-then-augment";
}

PipelineOrder parse_order(const std::string& s) {
  if (s == "augment-then-attack") return PipelineOrder::AugmentThenAttack;
  if (s == "attack-then-augment") return PipelineOrder::AttackThenAugment;
  throw ConfigError("unknown pipeline order '" + s + "'");
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

nlohmann::json attack_json(const attacks::AttackSpec& a) {
  return {{"epsilon", a.epsilon}, {"step_size", a.step_size}, {"steps", a.steps}, {"random_start", a.random_start},
          {"loss", attacks::attack_loss_name(a.loss)}, {"kappa", a.kappa}};
}

attacks::AttackSpec attack_from(const nlohmann::json& j, attacks::AttackSpec a) {
  check_keys(j, {"epsilon", "step_size", "steps", "random_start", "loss", "kappa"}, "attack");
  a.epsilon = j.value("epsilon", a.epsilon);
  a.step_size = j.value("step_size", a.step_size);
  a.steps = j.value("steps", a.steps);
  a.random_start = j.value("random_start", a.random_start);
  if (j.contains("loss")) a.loss = attacks::parse_attack_loss(j.at("loss").get<std::string>());
  a.kappa = j.value("kappa", a.kappa);
  return a;
}

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json::object();
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["schedule"] = c.schedule;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["ladder"] = losses::ladder_name(c.ladder);
  j["loss"] = {{"tau_b", c.loss.tau_b}, {"tau_m", c.loss.tau_m}, {"m0", c.loss.m0}, {"scale", c.loss.scale}, {"beta", c.loss.beta}};
  j["attack"] = attack_json(c.attack);
  j["policy"] = c.policy;
  j["model"] = {{"convs", c.convs}, {"hidden", c.hidden}, {"head", nets::head_kind_name(c.head_kind())}, {"learn_bias", c.bias_learnable()}};
  j["eval"] = {{"subset", c.eval.subset}, {"epsilon", c.eval.epsilon}, {"step_size", c.eval.step_size},
               {"steps", c.eval.steps}, {"batch_size", c.eval.batch_size}};
  j["pipeline_order"] = order_name(c.order);
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  check_keys(j,
             {"epochs", "batch_size", "schedule", "momentum", "weight_decay", "seed", "ladder", "loss", "attack",
              "policy", "model", "eval", "pipeline_order"},
             "train config");
  TrainConfig d;
  try {
    d.epochs = j.value("epochs", d.epochs);
    d.batch_size = j.value("batch_size", d.batch_size);
    if (j.contains("schedule")) j.at("schedule").get_to(d.schedule);
    d.momentum = j.value("momentum", d.momentum);
    d.weight_decay = j.value("weight_decay", d.weight_decay);
    d.seed = j.value("seed", d.seed);
    if (j.contains("ladder")) d.ladder = losses::parse_ladder(j.at("ladder").get<std::string>());
    d.loss = losses::ladder_defaults(d.ladder);
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      check_keys(l, {"tau_b", "tau_m", "m0", "scale", "beta"}, "loss");
      d.loss.tau_b = l.value("tau_b", d.loss.tau_b);
      d.loss.tau_m = l.value("tau_m", d.loss.tau_m);
      d.loss.m0 = l.value("m0", d.loss.m0);
      d.loss.scale = l.value("scale", d.loss.scale);
      d.loss.beta = l.value("beta", d.loss.beta);
    }
    if (j.contains("attack")) d.attack = attack_from(j.at("attack"), d.attack);
    if (j.contains("policy")) j.at("policy").get_to(d.policy);
    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, {"convs", "hidden", "head", "learn_bias"}, "model");
      if (m.contains("convs")) m.at("convs").get_to(d.convs);
      if (m.contains("hidden")) m.at("hidden").get_to(d.hidden);
      if (m.contains("head")) d.head = nets::parse_head_kind(m.at("head").get<std::string>());
      if (m.contains("learn_bias")) d.learn_bias = m.at("learn_bias").get<bool>();
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      check_keys(e, {"subset", "epsilon", "step_size", "steps", "batch_size"}, "eval");
      d.eval.subset = e.value("subset", d.eval.subset);
      d.eval.epsilon = e.value("epsilon", d.eval.epsilon);
      d.eval.step_size = e.value("step_size", d.eval.step_size);
      d.eval.steps = e.value("steps", d.eval.steps);
      d.eval.batch_size = e.value("batch_size", d.eval.batch_size);
    }
    if (j.contains("pipeline_order")) d.order = parse_order(j.at("pipeline_order").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  d.validate();
  c = std::move(d);
}

std::string TrainConfig::digest() const {
  nlohmann::json j = *this;
  return hex64(fnv1a64(j.dump()));
}

}  // namespace atlt::train
