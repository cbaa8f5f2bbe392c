#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "atlt/augment/augment.hpp"
#include "atlt/core/errors.hpp"
#include "atlt/data/dataset.hpp"

namespace atlt::augment {

AugPolicy AugPolicy::none() { return AugPolicy{}; }

AugPolicy AugPolicy::rand_augment(std::vector<AugOp> space, std::size_t num_ops, double magnitude) {
  AugPolicy p;
  p.kind = Kind::RandAugment;
  p.space = std::move(space);
  p.num_ops = num_ops;
  p.magnitude = magnitude;
  return p;
}

AugPolicy AugPolicy::trivial(std::vector<AugOp> space) {
  AugPolicy p;
  p.kind = Kind::Trivial;
  p.space = std::move(space);
  return p;
}

AugPolicy AugPolicy::cutout(std::size_t length) {
  AugPolicy p;
  p.kind = Kind::Cutout;
  p.length = length;
  return p;
}

AugPolicy AugPolicy::mixup(double alpha) {
  AugPolicy p;
  p.kind = Kind::MixUp;
  p.alpha = alpha;
  return p;
}

AugPolicy AugPolicy::cutmix(double alpha) {
  AugPolicy p;
  p.kind = Kind::CutMix;
  p.alpha = alpha;
  return p;
}

void AugPolicy::validate() const {
  switch (kind) {
    case Kind::None: return;
    case Kind::RandAugment:
      if (num_ops < 1) throw ConfigError("RandAugment needs num_ops >= 1");
      if (!(magnitude >= 0.0 && magnitude <= kMaxMagnitude)) throw ConfigError("RandAugment magnitude must lie in [0,30]");
      [[fallthrough]];
    case Kind::Trivial:
      if (space.empty()) throw ConfigError("augmentation search space is empty");
      return;
    case Kind::Cutout:
      if (length < 1) throw ConfigError("cutout length must be >= 1");
      return;
    case Kind::MixUp:
    case Kind::CutMix:
      if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("mixing alpha must be positive");
      return;
  }
}

namespace {

std::string space_label(const std::vector<AugOp>& space) {
  std::string out = "[";
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (i) out += ",";
    out += aug_op_name(space[i]);
  }
  return out + "]";
}

std::string kind_name(AugPolicy::Kind k) {
  switch (k) {
    case AugPolicy::Kind::None: return "none";
    case AugPolicy::Kind::RandAugment: return "ra";
    case AugPolicy::Kind::Trivial: return "trivial";
    case AugPolicy::Kind::Cutout: return "cutout";
    case AugPolicy::Kind::MixUp: return "mixup";
    case AugPolicy::Kind::CutMix: return "cutmix";
  }
  return "none";
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown augmentation key '" + it.key() + "'");
  }
}

}  // namespace

std::string AugPolicy::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::None: os << "none"; break;
    case Kind::RandAugment: os << "ra" << space_label(space); break;
    case Kind::Trivial: os << "trivial" << space_label(space); break;
    case Kind::Cutout: os << "cutout(" << length << ")"; break;
    case Kind::MixUp: os << "mixup(" << alpha << ")"; break;
    case Kind::CutMix: os << "cutmix(" << alpha << ")"; break;
  }
  return os.str();
}

void to_json(nlohmann::json& j, const AugPolicy& p) {
  j = {{"kind", kind_name(p.kind)}};
  std::vector<std::string> names;
  for (auto op : p.space) names.push_back(aug_op_name(op));
  switch (p.kind) {
    case AugPolicy::Kind::None: break;
    case AugPolicy::Kind::RandAugment:
      j["num_ops"] = p.num_ops;
      j["magnitude"] = p.magnitude;
      j["space"] = names;
      break;
    case AugPolicy::Kind::Trivial: j["space"] = names; break;
    case AugPolicy::Kind::Cutout: j["length"] = p.length; break;
    case AugPolicy::Kind::MixUp:
    case AugPolicy::Kind::CutMix: j["alpha"] = p.alpha; break;
  }
}

void from_json(const nlohmann::json& j, AugPolicy& p) {
  if (!j.is_object()) throw ConfigError("augmentation policy must be a JSON object");
  const std::string kind = j.value("kind", std::string("none"));
  p = AugPolicy{};
  const auto parse_space = [&]() {
    std::vector<AugOp> space;
    if (!j.contains("space")) return std::vector<AugOp>(kAllOps.begin(), kAllOps.end());
    for (const auto& n : j.at("space")) space.push_back(parse_aug_op(n.get<std::string>()));
    return space;
  };
  if (kind == "none") {
    reject_unknown_keys(j, {"kind"});
  } else if (kind == "ra") {
    reject_unknown_keys(j, {"kind", "num_ops", "magnitude", "space"});
    p = AugPolicy::rand_augment(parse_space(), j.value("num_ops", std::size_t{2}), j.value("magnitude", 8.0));
  } else if (kind == "trivial") {
    reject_unknown_keys(j, {"kind", "space"});
    p = AugPolicy::trivial(parse_space());
  } else if (kind == "cutout") {
    reject_unknown_keys(j, {"kind", "length"});
    p = AugPolicy::cutout(j.value("length", std::size_t{17}));
  } else if (kind == "mixup") {
    reject_unknown_keys(j, {"kind", "alpha"});
    p = AugPolicy::mixup(j.value("alpha", 0.3));
  } else if (kind == "cutmix") {
    reject_unknown_keys(j, {"kind", "alpha"});
    p = AugPolicy::cutmix(j.value("alpha", 0.1));
  } else {
    throw ConfigError("unknown augmentation kind '" + kind + "'");
  }
  p.validate();
}

namespace {

Image image_of(const Tensor<float>& batch, std::size_t i) {
  Image img;
  img.channels = batch.dim(1);
  img.height = batch.dim(2);
  img.width = batch.dim(3);
  const std::size_t per = img.channels * img.height * img.width;
  img.pixels.assign(batch.ptr() + i * per, batch.ptr() + (i + 1) * per);
  return img;
}

void store(Tensor<float>& batch, std::size_t i, const Image& img) {
  std::memcpy(batch.ptr() + i * img.pixels.size(), img.pixels.data(), img.pixels.size() * sizeof(float));
}

}  // namespace

AugmentedBatch apply_policy(const Tensor<float>& batch, const losses::Labels& labels, const AugPolicy& policy,
                            std::uint64_t seed, std::span<const std::size_t> example_ids) {
  policy.validate();
  if (batch.rank() != 4) throw ShapeError("apply_policy expects an NCHW batch, got " + shape_str(batch.shape()));
  const std::size_t n = batch.dim(0);
  if (labels.size() != n) throw ShapeError("apply_policy: label count does not match batch size");
  if (!example_ids.empty() && example_ids.size() != n) throw ShapeError("apply_policy: example id count does not match batch size");
  const auto id_of = [&](std::size_t i) -> std::uint64_t { return example_ids.empty() ? i : example_ids[i]; };

  AugmentedBatch out{batch, std::nullopt};
  const std::size_t h = batch.dim(2), w = batch.dim(3);

  switch (policy.kind) {
    case AugPolicy::Kind::None: break;
    case AugPolicy::Kind::RandAugment:
    case AugPolicy::Kind::Trivial:
    case AugPolicy::Kind::Cutout:
      for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, "aug-image", id_of(i)));
        Image img = image_of(batch, i);
        if (policy.kind == AugPolicy::Kind::RandAugment) {
          for (std::size_t k = 0; k < policy.num_ops; ++k) {
            const AugOp op = policy.space[rng.below(policy.space.size())];
            img = apply_aug_op(img, op, policy.magnitude, rng);
          }
        } else if (policy.kind == AugPolicy::Kind::Trivial) {
          const AugOp op = policy.space[rng.below(policy.space.size())];
          const double magnitude = static_cast<double>(rng.below(static_cast<std::uint64_t>(kMaxMagnitude) + 1));
          img = apply_aug_op(img, op, magnitude, rng);
        } else {
          const std::size_t cy = rng.below(h), cx = rng.below(w);
          img = cutout(img, cy, cx, policy.length);
        }
        store(out.images, i, img);
      }
      break;
    case AugPolicy::Kind::MixUp:
    case AugPolicy::Kind::CutMix: {
      Rng rng(derive_seed(seed, "aug-mix", id_of(0)));
      const auto perm = data::seeded_permutation(n, rng.next_u64());
      double lambda = rng.beta(policy.alpha, policy.alpha);
      const std::size_t per = batch.numel() / n;
      if (policy.kind == AugPolicy::Kind::MixUp) {
        // x_b + lambda (x_a - x_b) keeps identical pairs bit-exact.
        const float lam = static_cast<float>(lambda);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < per; ++k) {
            const float a = batch[i * per + k], b = batch[perm[i] * per + k];
            out.images[i * per + k] = std::clamp(b + lam * (a - b), 0.0f, 1.0f);
          }
        lambda = static_cast<double>(lam);
      } else {
        const double ratio = std::sqrt(1.0 - lambda);
        const auto cut_w = static_cast<long>(static_cast<double>(w) * ratio);
        const auto cut_h = static_cast<long>(static_cast<double>(h) * ratio);
        const auto cx = static_cast<long>(rng.below(w)), cy = static_cast<long>(rng.below(h));
        const long x0 = std::clamp(cx - cut_w / 2, 0L, static_cast<long>(w));
        const long x1 = std::clamp(cx + cut_w / 2, 0L, static_cast<long>(w));
        const long y0 = std::clamp(cy - cut_h / 2, 0L, static_cast<long>(h));
        const long y1 = std::clamp(cy + cut_h / 2, 0L, static_cast<long>(h));
        const std::size_t channels = batch.dim(1);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < channels; ++c)
            for (long y = y0; y < y1; ++y)
              for (long x = x0; x < x1; ++x) {
                const std::size_t off = (c * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x);
                out.images[i * per + off] = batch[perm[i] * per + off];
              }
        lambda = 1.0 - static_cast<double>((x1 - x0) * (y1 - y0)) / static_cast<double>(h * w);
      }
      LabelMix mix;
      mix.labels_a = labels;
      for (std::size_t i = 0; i < n; ++i) mix.labels_b.push_back(labels[perm[i]]);
      mix.lambda = lambda;
      out.mix = std::move(mix);
      break;
    }
  }
  return out;
}

AugPolicy restrict_space(const SubsetSpec& subset, std::size_t num_ops, double magnitude) {
  std::set<std::size_t> chosen;
  if (!subset.names.empty()) {
    if (subset.random_count != 0) throw ConfigError("give either explicit op names or a random count, not both");
    for (const auto& name : subset.names) {
      const AugOp op = parse_aug_op(name);
      chosen.insert(static_cast<std::size_t>(op));
    }
  } else {
    if (subset.random_count < 1 || subset.random_count > kAllOps.size()) {
      throw ConfigError("random subset size must lie in [1,14], got " + std::to_string(subset.random_count));
    }
    const auto perm = data::seeded_permutation(kAllOps.size(), subset.random_seed);
    chosen.insert(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(subset.random_count));
  }
  std::vector<AugOp> space;
  for (auto idx : chosen) space.push_back(kAllOps[idx]);
  auto policy = AugPolicy::rand_augment(std::move(space), num_ops, magnitude);
  policy.validate();
  return policy;
}

}  // namespace atlt::augment
