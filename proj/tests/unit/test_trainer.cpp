#include <doctest.h>

#include <cmath>
#include <limits>

#include "atlt/core/errors.hpp"
#include "atlt/data/synth.hpp"
#include "atlt/train/schedule.hpp"
#include "atlt/train/trainer.hpp"
#include "test_support.hpp"

using namespace atlt;
using namespace atlt::train;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 16;
  c.schedule = Schedule::constant(0.05);
  c.convs = {{4, 3, 1, 1, 2}};
  c.hidden = {16};
  c.attack.steps = 2;
  c.eval.subset = 24;
  c.eval.steps = 2;
  return c;
}

std::pair<data::ImageDataset, data::ImageDataset> tiny_data() {
  data::SynthOptions test_opt;
  test_opt.split = data::Split::Test;
  return {data::synth_dataset(1, 4, 12, 8), data::synth_dataset(2, 4, 8, 8, test_opt)};
}

// Images confined to a narrow band of grey levels, where AutoContrast
// stretches any perturbation by roughly 1 / band.
data::ImageDataset low_range(std::size_t n, std::uint64_t seed) {
  data::ImageDataset ds;
  ds.height = ds.width = 8;
  ds.num_classes = 2;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels.push_back(i % 2);
    for (std::size_t k = 0; k < 64; ++k) ds.pixels.push_back(static_cast<float>(rng.uniform(0.45, 0.55)));
  }
  return ds;
}

double linf(const Tensor<float>& a, const Tensor<float>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

RunLog log_of(std::vector<double> pgd) {
  std::vector<EpochRecord> recs;
  for (std::size_t i = 0; i < pgd.size(); ++i) recs.push_back({static_cast<int>(i + 1), 0.1, 1.0, 50.0, pgd[i]});
  return RunLog::from_records(recs, "cfg");
}

}  // namespace

TEST_CASE("schedule examples") {
  const auto pw = Schedule::piecewise({75, 90}, 0.1, 0.1);
  CHECK(lr_at(pw, 74) == 0.1);
  CHECK(lr_at(pw, 75) == 0.01);
  CHECK(lr_at(pw, 76) == 0.01);
  CHECK(lr_at(pw, 91) == doctest::Approx(0.001).epsilon(1e-15));
  const double code80 = lr_at(Schedule::robal_code(0.1), 80);
  CHECK(std::abs(code80 - 1e-26) / 1e-26 <= 1e-9);
  CHECK(lr_at(Schedule::robal_code(0.1), 60) == 0.1);
  CHECK(lr_at(Schedule::robal_code(0.1), 61) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(lr_at(Schedule::robal_paper(0.1), 59) == 0.1);
  CHECK(lr_at(Schedule::robal_paper(0.1), 60) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(lr_at(Schedule::robal_paper(0.1), 70) == doctest::Approx(0.001).epsilon(1e-15));
  for (int e = 1; e <= 120; ++e) CHECK(lr_at(Schedule::constant(0.3), e) == 0.3);
  CHECK_THROWS_AS(lr_at(pw, 0), ConfigError);
}

TEST_CASE("schedules never increase") {
  for (const auto& s : {Schedule::piecewise({10, 20, 30}, 0.5, 0.2), Schedule::robal_code(0.1), Schedule::robal_paper(0.1)}) {
    for (int e = 2; e <= 120; ++e) REQUIRE(lr_at(s, e) <= lr_at(s, e - 1));
  }
}

TEST_CASE("schedule JSON and validation") {
  const auto s = Schedule::piecewise({3, 7}, 0.5, 0.2);
  nlohmann::json j = s;
  const auto back = j.get<Schedule>();
  CHECK(back.milestones == s.milestones);
  CHECK(back.factor == 0.5);
  CHECK(back.initial_lr == 0.2);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"kind":"cosine"})").get<Schedule>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"kind":"piecewise","milestones":[5,3]})").get<Schedule>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"kind":"constant","factor":0.5})").get<Schedule>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"kind":"constant","lr":0.5})").get<Schedule>(), ConfigError);
}

TEST_CASE("sgd examples") {
  std::vector<Parameter<double>> ps;
  ps.emplace_back("w", Tensor<double>::from({1.0, -2.0}));
  ps[0].grad = Tensor<double>::from({0.5, 0.25});
  sgd_update(ps, 0.1, 0.0, 0.0);
  CHECK(ps[0].value[0] == 1.0 - 0.1 * 0.5);
  CHECK(ps[0].value[1] == -2.0 - 0.1 * 0.25);

  // Zero gradients with a primed velocity: v decays by the momentum each step.
  std::vector<Parameter<double>> q;
  q.emplace_back("w", Tensor<double>::from({1.0}));
  q[0].momentum = Tensor<double>::from({2.0});
  sgd_update(q, 0.1, 0.5, 0.0);
  CHECK(q[0].momentum[0] == 1.0);
  CHECK(q[0].value[0] == doctest::Approx(0.9).epsilon(1e-15));
  sgd_update(q, 0.1, 0.5, 0.0);
  CHECK(q[0].momentum[0] == 0.5);
  CHECK(q[0].value[0] == doctest::Approx(0.85).epsilon(1e-15));

  std::vector<Parameter<double>> d;
  d.emplace_back("w", Tensor<double>::from({3.0}));
  sgd_update(d, 0.1, 0.9, 5e-4);
  CHECK(d[0].value[0] == doctest::Approx(3.0 * (1.0 - 0.1 * 5e-4)).epsilon(1e-15));

  std::vector<Parameter<double>> frozen;
  frozen.emplace_back("b", Tensor<double>::from({1.0}), false);
  frozen[0].grad = Tensor<double>::from({5.0});
  sgd_update(frozen, 0.1, 0.9, 5e-4);
  CHECK(frozen[0].value[0] == 1.0);

  std::vector<Parameter<float>> bad;
  bad.emplace_back("conv0.weight", Tensor<float>::from({1.0f}));
  bad[0].grad[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    sgd_update(bad, 0.1, 0.9, 0.0);
    FAIL("NaN gradient accepted");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("conv0.weight") != std::string::npos);
  }
}

TEST_CASE("overfit gap examples") {
  CHECK(overfit_gap(log_of({10, 20, 30})) == 0.0);
  CHECK(overfit_gap(log_of({42})) == 0.0);
  CHECK(overfit_gap(log_of({20, 35.27, 30, 28.65})) == doctest::Approx(6.62).epsilon(1e-12));
  const auto tie = log_of({5, 9, 9, 4});
  CHECK(tie.best().epoch == 2);
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> v(1 + rng.below(30));
    for (auto& x : v) x = rng.uniform(0.0, 100.0);
    REQUIRE(overfit_gap(log_of(v)) >= 0.0);
  }
}

TEST_CASE("run log serialisation") {
  const auto log = log_of({10, 30, 20});
  const auto csv = log.csv();
  CHECK(csv.rfind("epoch,lr,train_loss,clean_acc,pgd20\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto j = log.json();
  CHECK(j.at("best").at("epoch") == 2);
  CHECK(j.at("last").at("epoch") == 3);
  CHECK(j.at("overfit_gap").get<double>() == 10.0);
  const auto back = run_log_from_json(j);
  CHECK(back.records == log.records);
  CHECK(back.digest() == log.digest());
}

TEST_CASE("train config JSON") {
  auto c = tiny_config();
  c.ladder = losses::Ladder::RoBal;
  c.loss = losses::ladder_defaults(c.ladder);
  c.policy = augment::AugPolicy::rand_augment({augment::AugOp::Rotate});
  nlohmann::json j = c;
  const auto back = j.get<TrainConfig>();
  CHECK(back.digest() == c.digest());
  CHECK(back.head_kind() == nets::HeadKind::Cosine);

  const auto over = nlohmann::json::parse(R"({"ladder":"robal","loss":{"tau_b":2.0}})").get<TrainConfig>();
  CHECK(over.loss.tau_b == 2.0);
  CHECK(over.loss.tau_m == 0.3);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"epoch":3})").get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"ladder":"robal","model":{"head":"linear"}})").get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"attack":{"steps":0}})").get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"epochs":"ten"})").get<TrainConfig>(), ConfigError);
}

TEST_CASE("zero learning rate leaves parameters at their initial values") {
  auto [train_set, test_set] = tiny_data();
  auto c = tiny_config();
  c.epochs = 1;
  c.schedule = Schedule::constant(0.0);
  c.momentum = 0.0;
  const auto r = adversarial_train(c, train_set, test_set);
  const nets::Model<float> init(c.model_spec(1, 8, 8, 4), derive_seed(c.seed, "init"));
  for (std::size_t i = 0; i < init.parameters().size(); ++i)
    CHECK(r.last.parameters()[i].value == init.parameters()[i].value);
}

TEST_CASE("an FGSM-style inner attack trains with one record per epoch") {
  auto [train_set, test_set] = tiny_data();
  auto c = tiny_config();
  c.epochs = 3;
  c.attack.steps = 1;
  c.attack.step_size = c.attack.epsilon;
  c.attack.random_start = false;
  const auto r = adversarial_train(c, train_set, test_set);
  CHECK(r.log.records.size() == 3);
  for (int e = 0; e < 3; ++e) CHECK(r.log.records[e].epoch == e + 1);
}

TEST_CASE("training is deterministic per seed") {
  auto [train_set, test_set] = tiny_data();
  for (auto ladder : {losses::Ladder::At, losses::Ladder::AtBsl, losses::Ladder::RoBal}) {
    auto c = tiny_config();
    c.ladder = ladder;
    c.loss = losses::ladder_defaults(ladder);
    c.policy = augment::AugPolicy::rand_augment({augment::kAllOps.begin(), augment::kAllOps.end()});
    const auto a = adversarial_train(c, train_set, test_set);
    const auto b = adversarial_train(c, train_set, test_set);
    CHECK(a.log.digest() == b.log.digest());
    CHECK(a.log.csv() == b.log.csv());
    CHECK(a.best.parameters()[0].value == b.best.parameters()[0].value);
    c.seed = 1;
    CHECK(adversarial_train(c, train_set, test_set).log.digest() != a.log.digest());
  }
}

TEST_CASE("mixing policies train end to end") {
  auto [train_set, test_set] = tiny_data();
  for (const auto& p : {augment::AugPolicy::mixup(0.3), augment::AugPolicy::cutmix(1.0), augment::AugPolicy::cutout(4)}) {
    CAPTURE(p.describe());
    auto c = tiny_config();
    c.epochs = 1;
    c.policy = p;
    const auto r = adversarial_train(c, train_set, test_set);
    CHECK(std::isfinite(r.log.last().train_loss));
  }
}

TEST_CASE("the adversarial batch stays within epsilon of the augmented batch") {
  const auto train_set = low_range(32, 1);
  const auto test_set = low_range(8, 2);
  auto c = tiny_config();
  c.epochs = 1;
  c.policy = augment::AugPolicy::rand_augment({augment::AugOp::AutoContrast}, 1);
  c.eval.subset = 8;

  double worst = 0.0;
  adversarial_train(c, train_set, test_set, [&](const BatchTrace& t) {
    worst = std::max(worst, linf(*t.adversarial, *t.augmented));
    CHECK(linf(*t.augmented, *t.clean) > 0.1);
  });
  CHECK(worst <= c.attack.epsilon + 1e-7);

  // Attacking first and augmenting afterwards stretches the perturbation.
  c.order = PipelineOrder::AttackThenAugment;
  double reversed = 0.0;
  adversarial_train(c, train_set, test_set, [&](const BatchTrace& t) {
    reversed = std::max(reversed, linf(*t.adversarial, *t.augmented));
  });
  CHECK(reversed > c.attack.epsilon + 1e-7);
}

TEST_CASE("mismatched train and test sets are rejected") {
  auto [train_set, test_set] = tiny_data();
  test_set.num_classes = 5;
  CHECK_THROWS_AS(adversarial_train(tiny_config(), train_set, test_set), DataError);
}

TEST_CASE("head bias is learnable only for plain cross-entropy") {
  const auto bias_trainable = [](const TrainConfig& c) {
    return nets::Model<float>(c.model_spec(1, 8, 8, 3), 0).parameter("head.bias").trainable;
  };
  auto c = tiny_config();
  c.ladder = losses::Ladder::At;
  c.loss = losses::ladder_defaults(c.ladder);
  CHECK(bias_trainable(c));
  c.learn_bias = false;
  CHECK_FALSE(bias_trainable(c));

  for (auto row : {losses::Ladder::AtBsl, losses::Ladder::RoBal}) {
    auto d = tiny_config();
    d.ladder = row;
    d.loss = losses::ladder_defaults(row);
    CHECK_FALSE(bias_trainable(d));
  }
  const auto parsed = nlohmann::json::parse(R"({"ladder":"at"})").get<TrainConfig>();
  CHECK(parsed.bias_learnable());
  CHECK(nlohmann::json(parsed)["model"]["learn_bias"] == true);
}
