#include <doctest.h>

#include <cmath>

#include "atlt/core/errors.hpp"
#include "atlt/core/gradcheck.hpp"
#include "atlt/losses/losses.hpp"
#include "atlt/nets/checkpoint.hpp"
#include "atlt/nets/model.hpp"
#include "test_support.hpp"

using namespace atlt;
using namespace atlt::nets;
using atlt::testing::random_tensor;

namespace {

ModelSpec tiny_spec(HeadKind head, bool learn_bias = true) {
  ModelSpec spec;
  spec.features.in_channels = 2;
  spec.features.height = 6;
  spec.features.width = 6;
  spec.features.convs = {{3, 3, 1, 1, 2}};
  spec.features.hidden = {5};
  spec.head.kind = head;
  spec.head.num_classes = 3;
  spec.head.scale = 4.0;
  spec.head.learn_bias = learn_bias;
  return spec;
}

Tensor<double> mat(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor<double>({r, c}, std::move(v)); }

}  // namespace

TEST_CASE("desk default geometry") {
  const auto f = FeatureExtractorSpec::desk_default(1, 16, 16);
  CHECK(f.conv_output_shape() == Shape{32, 4, 4});
  CHECK(f.feature_dim() == 128);
  FeatureExtractorSpec bad = f;
  bad.height = 2;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("linear head examples") {
  Tape<double> tape;
  const auto w = tape.constant(mat(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  const auto b0 = tape.constant(Tensor<double>({3}));
  const auto e1 = tape.constant(mat(1, 3, {1, 0, 0}));
  CHECK(linear_logits(e1, w, b0).value() == mat(1, 3, {1, 0, 0}));

  const auto b = tape.constant(Tensor<double>::from({0.5, -1.0, 2.0}));
  CHECK(linear_logits(tape.constant(Tensor<double>({1, 3})), w, b).value() == mat(1, 3, {0.5, -1.0, 2.0}));

  // D=3, C=2 against a hand-expanded product.
  const auto f = tape.constant(mat(1, 3, {0.5, -1.0, 2.0}));
  const auto w2 = tape.constant(mat(3, 2, {1.0, 2.0, 3.0, -1.0, 0.25, 0.5}));
  const auto b2 = tape.constant(Tensor<double>::from({0.1, -0.2}));
  const auto z = linear_logits(f, w2, b2).value();
  CHECK(z[0] == doctest::Approx(0.5 * 1.0 - 1.0 * 3.0 + 2.0 * 0.25 + 0.1));
  CHECK(z[1] == doctest::Approx(0.5 * 2.0 + 1.0 * 1.0 + 2.0 * 0.5 - 0.2));
}

TEST_CASE("cosine head examples") {
  Tape<double> tape;
  // Column 0 is parallel to the feature, column 1 orthogonal to it.
  const auto w = tape.constant(mat(3, 2, {2.0, -2.0, 4.0, 1.0, 0.0, 0.0}));
  const auto b = tape.constant(Tensor<double>::from({0.0, 0.5}));
  const auto f = tape.constant(mat(1, 3, {1.0, 2.0, 0.0}));
  const auto z = cosine_logits(f, w, 10.0, b).value();
  CHECK(z[0] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(z[1] == doctest::Approx(0.5).epsilon(1e-12));

  const auto z10 = cosine_logits(ops::scale(f, 10.0), w, 10.0, b).value();
  CHECK(z10[0] == doctest::Approx(z[0]).epsilon(1e-12));
  CHECK(z10[1] == doctest::Approx(z[1]).epsilon(1e-12));
}

TEST_CASE("cosine logits stay within the scale and ignore feature norm") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Tape<double> tape;
    const auto f = random_tensor<double>({4, 6}, rng);
    const auto w = tape.constant(random_tensor<double>({6, 5}, rng));
    const auto b = tape.constant(Tensor<double>({5}));
    const auto z = cosine_logits(tape.constant(f), w, 7.0, b).value();
    for (double v : z.data()) CHECK(std::abs(v) <= 7.0 + 1e-12);
    const auto zs = cosine_logits(ops::scale(tape.constant(f), 123.0), w, 7.0, b).value();
    CHECK(relative_error(z, zs) <= 1e-12);
  }
}

TEST_CASE("model forward shapes and parameter names") {
  Model<float> m(tiny_spec(HeadKind::Cosine, false), 3);
  CHECK(m.parameters().size() == 6);
  CHECK(m.parameter("conv0.weight").value.shape() == Shape{3, 2, 3, 3});
  CHECK(m.parameter("fc0.weight").value.shape() == Shape{27, 5});
  CHECK_FALSE(m.parameter("head.bias").trainable);
  CHECK_THROWS_AS(m.parameter("nope"), ConfigError);
  Rng rng(1);
  const auto x = random_tensor<float>({4, 2, 6, 6}, rng, 0.0, 1.0);
  CHECK(m.logits(x).shape() == Shape{4, 3});
  CHECK_THROWS_AS(m.logits(random_tensor<float>({4, 1, 6, 6}, rng)), ShapeError);
  CHECK(Model<float>(tiny_spec(HeadKind::Cosine), 3).parameters()[0].value == m.parameters()[0].value);
  CHECK_FALSE(Model<float>(tiny_spec(HeadKind::Cosine), 4).parameters()[0].value == m.parameters()[0].value);
}

TEST_CASE("model gradients match finite differences at 64-bit") {
  for (HeadKind head : {HeadKind::Linear, HeadKind::Cosine}) {
    CAPTURE(head_kind_name(head));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto spec = tiny_spec(head);
      Model<double> model(spec, seed);
      Rng rng(seed + 100);
      // Nonzero biases so that the bias gradients are exercised too.
      for (auto& p : model.parameters())
        if (p.name.find("bias") != std::string::npos) p.value = random_tensor<double>(p.value.shape(), rng, -0.1, 0.1);
      const auto x = random_tensor<double>({2, 2, 6, 6}, rng, 0.0, 1.0);
      const losses::Labels y = {0, 2};

      Tape<double> tape;
      const auto fwd = model.forward(tape, tape.constant(x), true);
      tape.backward(losses::cross_entropy(fwd.logits, y));
      model.zero_grad();
      model.accumulate_grads(tape, fwd);

      for (std::size_t k = 0; k < model.parameters().size(); ++k) {
        const std::function<double(const Tensor<double>&)> f = [&](const Tensor<double>& probe) {
          auto params = model.parameters();
          params[k].value = probe;
          Model<double> m2(spec, std::move(params));
          Tape<double> t2;
          return losses::cross_entropy(m2.forward(t2, t2.constant(x), false).logits, y).value().item();
        };
        const auto numeric = finite_difference_gradient(f, model.parameters()[k].value, 1e-6);
        CAPTURE(model.parameters()[k].name);
        CHECK(relative_error(model.parameters()[k].grad, numeric) <= 1e-5);
      }
    }
  }
}

TEST_CASE("checkpoint round trip and corruption") {
  testing::TempDir dir("ckpt");
  Model<float> m(tiny_spec(HeadKind::Linear), 9);
  const nlohmann::json meta = {{"epoch", 3}};
  save_checkpoint(dir / "m.ckpt", m, meta);
  const auto back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.meta == meta);
  CHECK(back.model.spec() == m.spec());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    CHECK(back.model.parameters()[i].value == m.parameters()[i].value);
    CHECK(back.model.parameters()[i].trainable == m.parameters()[i].trainable);
  }
  CHECK(checkpoint_digest(back.model, back.meta) == checkpoint_digest(m, meta));

  auto bytes = encode_checkpoint(m, meta);
  CHECK_THROWS_AS(decode_checkpoint({bytes.begin(), bytes.begin() + 3}), DataError);
  CHECK_THROWS_AS(decode_checkpoint({bytes.begin(), bytes.end() - 5}), DataError);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(extra), DataError);
  auto bad_version = bytes;
  bad_version[4] = 99;
  CHECK_THROWS_AS(decode_checkpoint(bad_version), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);
}

TEST_CASE("cast to double keeps values") {
  Model<float> m(tiny_spec(HeadKind::Cosine), 2);
  const auto d = m.cast<double>();
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    CHECK(d.parameters()[i].value == m.parameters()[i].value.cast<double>());
}
