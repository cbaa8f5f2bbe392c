#include <doctest.h>

#include <cmath>
#include <fstream>

#include "atlt/core/errors.hpp"
#include "atlt/data/dataset.hpp"
#include "atlt/data/formats.hpp"
#include "atlt/data/longtail.hpp"
#include "atlt/data/synth.hpp"
#include "test_support.hpp"

using namespace atlt;
using namespace atlt::data;
using atlt::testing::TempDir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 8),
          static_cast<unsigned char>(v)};
}

std::vector<unsigned char> cat(std::initializer_list<std::vector<unsigned char>> parts) {
  std::vector<unsigned char> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

TEST_CASE("IDX fixture and errors") {
  TempDir dir("idx");
  write_bytes(dir / "img", cat({be32(kIdxImagesMagic), be32(1), be32(2), be32(2), {0, 255, 128, 64}}));
  write_bytes(dir / "lbl", cat({be32(kIdxLabelsMagic), be32(1), {3}}));
  const auto ds = load_idx(dir / "img", dir / "lbl");
  REQUIRE(ds.size() == 1);
  CHECK(ds.labels[0] == 3);
  CHECK(ds.channels == 1);
  const std::vector<double> want = {0.0, 1.0, 0.5019607843137255, 0.25098039215686274};
  for (std::size_t i = 0; i < 4; ++i) CHECK(ds.pixels[i] == doctest::Approx(want[i]).epsilon(1e-7));

  write_bytes(dir / "zero", cat({be32(0), be32(1), be32(2), be32(2), {0, 0, 0, 0}}));
  CHECK_THROWS_AS(load_idx_images(dir / "zero"), DataError);
  write_bytes(dir / "empty", {});
  CHECK_THROWS_AS(load_idx_images(dir / "empty"), DataError);
  write_bytes(dir / "short", cat({be32(kIdxImagesMagic), be32(2), be32(2), be32(2), {1, 2, 3, 4}}));
  CHECK_THROWS_AS(load_idx_images(dir / "short"), DataError);
  write_bytes(dir / "lbl2", cat({be32(kIdxLabelsMagic), be32(2), {0, 1}}));
  CHECK_THROWS_AS(load_idx(dir / "img", dir / "lbl2"), DataError);
  write_bytes(dir / "lbl_big", cat({be32(kIdxLabelsMagic), be32(1), {12}}));
  CHECK_THROWS_AS(load_idx(dir / "img", dir / "lbl_big"), DataError);
  CHECK_THROWS_AS(load_idx_images(dir / "missing"), DataError);
}

TEST_CASE("IDX write and read round trip") {
  TempDir dir("idx-rt");
  const auto ds = synth_dataset(3, 4, 5, 8);
  write_idx(ds, dir / "i", dir / "l");
  const auto back = load_idx(dir / "i", dir / "l", 4);
  CHECK(back.pixels == ds.pixels);
  CHECK(back.labels == ds.labels);
  CHECK(back.digest() == ds.digest());
}

TEST_CASE("CIFAR binary fixtures") {
  TempDir dir("cifar");
  std::vector<unsigned char> rec(kCifarRecordBytes, 255);
  rec[0] = 7;
  write_bytes(dir / "one.bin", rec);
  const auto ds = load_cifar_binary(dir / "one.bin");
  REQUIRE(ds.size() == 1);
  CHECK(ds.labels[0] == 7);
  CHECK(ds.channels == 3);
  CHECK(ds.height == 32);
  CHECK(ds.pixels == std::vector<float>(3 * 32 * 32, 1.0f));

  write_bytes(dir / "zero.bin", {});
  CHECK(load_cifar_binary(dir / "zero.bin").empty());
  write_bytes(dir / "bad.bin", std::vector<unsigned char>(3074, 0));
  CHECK_THROWS_AS(load_cifar_binary(dir / "bad.bin"), DataError);

  // Plane order: the first 1024 pixel bytes are red.
  std::vector<unsigned char> planes(kCifarRecordBytes, 0);
  planes[0] = 1;
  for (std::size_t i = 0; i < 1024; ++i) planes[1 + i] = 255;
  write_bytes(dir / "red.bin", planes);
  const auto red = load_cifar_binary(dir / "red.bin");
  CHECK(red.pixels[0] == 1.0f);
  CHECK(red.pixels[1023] == 1.0f);
  CHECK(red.pixels[1024] == 0.0f);

  SynthOptions opt;
  opt.channels = 3;
  const auto sy = synth_dataset(1, 3, 2, 32, opt);
  write_cifar_binary(sy, dir / "rt.bin");
  CHECK(load_cifar_binary(dir / "rt.bin", 3).pixels == sy.pixels);
}

TEST_CASE("synthetic data") {
  const auto a = synth_dataset(11, 10, 100, 16);
  const auto b = synth_dataset(11, 10, 100, 16);
  CHECK(a.pixels == b.pixels);
  CHECK(a.digest() == b.digest());
  CHECK(a.size() == 1000);
  const auto hist = class_histogram(a);
  CHECK(hist == std::vector<std::int64_t>(10, 100));
  CHECK(synth_dataset(12, 10, 100, 16).digest() != a.digest());
  CHECK_NOTHROW(a.validate());
  for (float v : a.pixels) {
    const float k = std::round(v * 255.0f);
    REQUIRE(v == k / 255.0f);
  }
}

TEST_CASE("long-tail profiles match the closed form") {
  const std::vector<std::pair<double, std::vector<std::int64_t>>> tables = {
      {10, {5000, 3871, 2997, 2321, 1797, 1391, 1077, 834, 646, 500}},
      {20, {5000, 3584, 2570, 1842, 1320, 947, 679, 486, 349, 250}},
      {50, {5000, 3237, 2096, 1357, 879, 569, 368, 239, 154, 100}},
      {100, {5000, 2997, 1797, 1077, 646, 387, 232, 139, 83, 50}},
  };
  for (const auto& [ir, want] : tables) {
    CAPTURE(ir);
    const auto p = longtail_profile(5000, 10, ir);
    CHECK(p.counts == want);
    CHECK(static_cast<double>(p.counts.front()) / static_cast<double>(p.counts.back()) == ir);
  }
  CHECK(longtail_profile(500, 10, 50).counts == std::vector<std::int64_t>{500, 324, 210, 136, 88, 57, 37, 24, 15, 10});
  CHECK_THROWS_AS(longtail_profile(5000, 10, 0.5), ConfigError);
  CHECK_THROWS_AS(longtail_profile(10, 10, 50), ConfigError);

  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto c = 2 + rng.below(20);
    const double ir = rng.uniform(1.0, 200.0);
    const auto p = longtail_profile(5000, c, ir);
    for (std::size_t i = 1; i < c; ++i) REQUIRE(p.counts[i] <= p.counts[i - 1]);
    REQUIRE(p.counts.back() == std::llround(5000.0 / ir));
  }
}

TEST_CASE("make_longtail subsamples per class") {
  const auto ds = synth_dataset(1, 10, 500, 8);
  const auto [lt, counts] = make_longtail(ds, 50, 4);
  CHECK(counts.counts() == longtail_profile(500, 10, 50).counts);
  CHECK(class_counts(lt) == counts);
  CHECK(lt.manifest.counts == counts.counts());
  const auto [again, c2] = make_longtail(ds, 50, 4);
  CHECK(again.digest() == lt.digest());
  CHECK(make_longtail(ds, 50, 5).first.digest() != lt.digest());

  const auto [same, c1] = make_longtail(ds, 1, 4);
  CHECK(same.pixels == ds.pixels);
  CHECK(same.labels == ds.labels);
  CHECK(c1.counts() == std::vector<std::int64_t>(10, 500));
}

TEST_CASE("class counts and dataset checks") {
  auto ds = synth_dataset(1, 10, 100, 8);
  CHECK(class_counts(ds).counts() == std::vector<std::int64_t>(10, 100));
  const std::vector<std::size_t> first = {0, 1, 2};
  const auto single = ds.subset(first);
  CHECK(class_histogram(single)[0] == 3);
  CHECK_THROWS_AS(class_counts(single), DataError);

  auto broken = ds;
  broken.pixels[5] = 1.5f;
  CHECK_THROWS_AS(broken.validate(), DataError);
  broken = ds;
  broken.labels[0] = 10;
  CHECK_THROWS_AS(broken.validate(), DataError);
  broken = ds;
  broken.pixels.pop_back();
  CHECK_THROWS_AS(broken.validate(), DataError);

  const std::vector<std::size_t> idx = {3, 150};
  const auto batch = ds.batch_images(idx);
  CHECK(batch.shape() == Shape{2, 1, 8, 8});
  CHECK(batch[64] == ds.image(150)[0]);
  CHECK(ds.batch_labels(idx) == losses::Labels{0, 1});
}

TEST_CASE("seeded permutation") {
  const auto p = seeded_permutation(50, 9);
  CHECK(p == seeded_permutation(50, 9));
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  CHECK(p != seeded_permutation(50, 10));
}

TEST_CASE("manifest round trip") {
  TempDir dir("manifest");
  Manifest m;
  m.source = "synth";
  m.seed = 42;
  m.ir = 50;
  m.counts = {5, 3, 1};
  write_manifest(m, dir / "m.json");
  const auto back = read_manifest(dir / "m.json");
  CHECK(back.source == "synth");
  CHECK(back.seed == 42);
  CHECK(back.ir == 50);
  CHECK(back.counts == m.counts);
}
