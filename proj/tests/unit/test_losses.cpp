#include <doctest.h>

#include <cmath>

#include "atlt/attacks/attacks.hpp"
#include "atlt/core/errors.hpp"
#include "atlt/core/gradcheck.hpp"
#include "atlt/losses/losses.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace atlt;
using namespace atlt::losses;
using atlt::testing::random_tensor;

namespace {

double eval_loss(const std::function<Var<double>(Var<double>)>& f, const Tensor<double>& z) {
  Tape<double> tape;
  return f(tape.constant(z)).value().item();
}

Tensor<double> row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>({1, n}, std::move(v));
}

}  // namespace

TEST_CASE("class counts reject empty and zero bins") {
  CHECK_THROWS_AS(ClassCounts({}), ConfigError);
  CHECK_THROWS_AS(ClassCounts({3, 0}), ConfigError);
  const ClassCounts c({5, 2, 9});
  CHECK(c.n_min() == 2);
  CHECK(c.n_max() == 9);
  CHECK(c.log_prior(2.0)[2] == doctest::Approx(2.0 * std::log(9.0)));
}

TEST_CASE("cross entropy examples") {
  const auto ce = [](const Labels& y) { return [y](Var<double> z) { return cross_entropy(z, y); }; };
  CHECK(eval_loss(ce({3}), row(std::vector<double>(10, 0.7))) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  CHECK(eval_loss(ce({0}), row({50.0, 0.0, 0.0})) < 1e-20);
  CHECK(eval_loss(ce({2}), row({1.0, 2.0, 3.0})) == doctest::Approx(0.4076059644443803).epsilon(1e-14));
  CHECK_THROWS_AS(eval_loss(ce({3}), row({1.0, 2.0, 3.0})), DataError);
  CHECK_THROWS_AS(eval_loss(ce({0, 1}), row({1.0, 2.0, 3.0})), ShapeError);
}

TEST_CASE("balanced softmax examples") {
  const ClassCounts n({3, 1});
  CHECK(eval_loss([&](Var<double> z) { return balanced_softmax_loss(z, {1}, n, 1.0); }, row({0.0, 0.0})) ==
        doctest::Approx(1.3862943611198906).epsilon(1e-14));
  CHECK_THROWS_AS(eval_loss([&](Var<double> z) { return balanced_softmax_loss(z, {0}, ClassCounts({4}), 1.0); }, row({0.0})),
                  ConfigError);
}

TEST_CASE("class-aware margins") {
  const auto m = class_aware_margin(ClassCounts({100, 10, 10}), 0.3, 10.0, 0.1);
  CHECK(m[0] == doctest::Approx(0.1690775527898214).epsilon(1e-14));
  CHECK(m[1] == 0.1);
  CHECK(m[2] == 0.1);
  for (double v : class_aware_margin(ClassCounts({100, 7, 30}), 0.0, 10.0, 0.25)) CHECK(v == 0.25);
}

TEST_CASE("margin BSL examples") {
  const ClassCounts n({5, 5});
  const auto f = [&](std::vector<double> m) {
    return [&n, m](Var<double> c) { return margin_bsl_loss(c, {0}, n, m, 10.0, 0.0); };
  };
  CHECK(eval_loss(f({0.1, 0.0}), row({1.0, 0.0})) == doctest::Approx(0.00012340218972322915).epsilon(1e-10));
  CHECK(eval_loss(f({0.1, 0.0}), row({0.3, -0.2})) > eval_loss(f({0.0, 0.0}), row({0.3, -0.2})));
}

TEST_CASE("TRADES and KL examples") {
  Tape<double> tape;
  const auto adv = tape.constant(row({0.0, 1.0}));
  const auto clean = tape.constant(row({1.0, 0.0}));
  const BaseLoss<double> zero = [](Var<double> z, const Labels&) { return ops::scale(ops::sum(z), 0.0); };
  CHECK(trades_objective(adv, clean, {0}, 1.0, zero).value().item() == doctest::Approx(0.46211715726000974).epsilon(1e-12));
  const BaseLoss<double> ce = [](Var<double> z, const Labels& y) { return cross_entropy(z, y); };
  const double base = cross_entropy(adv, {1}).value().item();
  CHECK(trades_objective(adv, adv, {1}, 6.0, ce).value().item() == doctest::Approx(base).epsilon(1e-14));
  CHECK(trades_objective(adv, clean, {1}, 0.0, ce).value().item() == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("mixup loss examples") {
  Tape<double> tape;
  Rng rng(2);
  const auto z = tape.constant(random_tensor<double>({4, 3}, rng));
  const BaseLoss<double> ce = [](Var<double> v, const Labels& y) { return cross_entropy(v, y); };
  const Labels a = {0, 1, 2, 0}, b = {2, 2, 1, 1};
  CHECK(mixup_loss(z, a, b, 1.0, ce).value().item() == doctest::Approx(ce(z, a).value().item()).epsilon(1e-14));
  CHECK(mixup_loss(z, a, b, 0.0, ce).value().item() == doctest::Approx(ce(z, b).value().item()).epsilon(1e-14));
  CHECK(mixup_loss(z, a, a, 0.5, ce).value().item() == doctest::Approx(ce(z, a).value().item()).epsilon(1e-14));
  CHECK_THROWS_AS(mixup_loss(z, a, b, 1.5, ce), ConfigError);
}

TEST_CASE("loss algebra identities over random draws") {
  const auto r = atlt::testing::loss_algebra(1000, 77);
  CHECK(r.bsl0_mismatches == 0);
  CHECK(r.uniform_worst <= 1e-10);
  CHECK(r.zero_margin_worst <= 1e-10);
}

TEST_CASE("every loss matches finite differences at 64-bit") {
  const auto results = atlt::testing::loss_gradchecks(100);
  CHECK(results.size() == 6);
  for (const auto& r : results) {
    CAPTURE(r.name);
    CHECK(r.worst <= 1e-5);
  }
}

TEST_CASE("ladder rows") {
  CHECK(parse_ladder("robal") == Ladder::RoBal);
  CHECK(ladder_name(Ladder::AtBslCosTrades) == "at_bsl_cos_trades");
  CHECK_THROWS_AS(parse_ladder("at-bsl"), ConfigError);
  CHECK_FALSE(ladder_uses_cosine(Ladder::AtBsl));
  CHECK(ladder_uses_cosine(Ladder::AtBslCos));
  CHECK(ladder_uses_trades(Ladder::RoBal));
  CHECK_FALSE(ladder_uses_trades(Ladder::AtBslCos));
  CHECK(ladder_defaults(Ladder::At).tau_b == 0.0);
  CHECK(ladder_defaults(Ladder::RoBal).tau_m == 0.3);
  LossConfig bad;
  bad.scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
