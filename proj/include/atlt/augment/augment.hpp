#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "atlt/core/rng.hpp"
#include "atlt/core/tensor.hpp"
#include "atlt/losses/losses.hpp"

namespace atlt::augment {

// The 14-operation RandAugment search space.
enum class AugOp {
  Identity,
  ShearX,
  ShearY,
  TranslateX,
  TranslateY,
  Rotate,
  Brightness,
  Color,
  Contrast,
  Sharpness,
  Posterize,
  Solarize,
  AutoContrast,
  Equalize,
};

inline constexpr std::array<AugOp, 14> kAllOps = {
    AugOp::Identity, AugOp::ShearX,     AugOp::ShearY,    AugOp::TranslateX, AugOp::TranslateY,
    AugOp::Rotate,   AugOp::Brightness, AugOp::Color,     AugOp::Contrast,   AugOp::Sharpness,
    AugOp::Posterize, AugOp::Solarize,  AugOp::AutoContrast, AugOp::Equalize};

inline constexpr double kMaxMagnitude = 30.0;

std::string aug_op_name(AugOp op);
AugOp parse_aug_op(const std::string& name);

// The first 11 ops: the full space without Solarize, AutoContrast, Equalize.
std::vector<AugOp> ra11_space();

// One C x H x W image, values in [0,1].
struct Image {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  float at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }
  float& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
};

// Primitive transforms. Geometric ones use nearest-neighbour sampling around
// the image centre and fill uncovered pixels with 0.
Image shear_x(const Image& img, double factor);
Image shear_y(const Image& img, double factor);
Image translate_x(const Image& img, double pixels);
Image translate_y(const Image& img, double pixels);
Image rotate(const Image& img, double degrees);  // counter-clockwise
Image brightness(const Image& img, double factor);
Image color(const Image& img, double factor);
Image contrast(const Image& img, double factor);
Image sharpness(const Image& img, double factor);
Image posterize(const Image& img, int bits);
Image solarize(const Image& img, double threshold);  // inverts pixels >= threshold
Image autocontrast(const Image& img);
Image equalize(const Image& img);
// Zeroes a length x length window whose top-left corner is
// (cy - length/2, cx - length/2), clipped to the image.
Image cutout(const Image& img, std::size_t cy, std::size_t cx, std::size_t length);

// Applies `op` at `magnitude` in [0,30]. Signed ops draw their sign from rng.
Image apply_aug_op(const Image& img, AugOp op, double magnitude, Rng& rng);

/// Augmentation strategy for one training run.
struct AugPolicy {
  enum class Kind { None, RandAugment, Trivial, Cutout, MixUp, CutMix };

  Kind kind = Kind::None;
  std::size_t num_ops = 2;    // RandAugment ops per image
  double magnitude = 8.0;     // RandAugment magnitude
  std::vector<AugOp> space;   // RandAugment / Trivial search space
  std::size_t length = 16;    // Cutout window
  double alpha = 1.0;         // MixUp / CutMix Beta(alpha, alpha)

  static AugPolicy none();
  static AugPolicy rand_augment(std::vector<AugOp> space, std::size_t num_ops = 2, double magnitude = 8.0);
  static AugPolicy trivial(std::vector<AugOp> space);
  static AugPolicy cutout(std::size_t length);
  static AugPolicy mixup(double alpha);
  static AugPolicy cutmix(double alpha);

  void validate() const;
  // Short label such as "ra[Identity]" or "mixup(0.3)".
  std::string describe() const;
};

void to_json(nlohmann::json& j, const AugPolicy& p);
void from_json(const nlohmann::json& j, AugPolicy& p);

struct LabelMix {
  losses::Labels labels_a;
  losses::Labels labels_b;
  double lambda = 1.0;
};

struct AugmentedBatch {
  Tensor<float> images;
  std::optional<LabelMix> mix;
};

/// Applies a policy to an NCHW batch. Image i draws from
/// derive_seed(seed, "aug-image", id_i) where id_i is example_ids[i] (or i when
/// no ids are given), so an example's augmentation does not depend on which
/// batch it lands in. Batch-level mixing draws from derive_seed(seed, "aug-mix", id_0).
AugmentedBatch apply_policy(const Tensor<float>& batch, const losses::Labels& labels, const AugPolicy& policy,
                            std::uint64_t seed, std::span<const std::size_t> example_ids = {});

// Search-space selection: explicit op names, or n ops drawn uniformly without
// replacement with a seed. The result is a RandAugment policy over exactly
// that subset, listed in canonical op order.
struct SubsetSpec {
  std::vector<std::string> names;
  std::size_t random_count = 0;
  std::uint64_t random_seed = 0;
};

AugPolicy restrict_space(const SubsetSpec& subset, std::size_t num_ops = 2, double magnitude = 8.0);

}  // namespace atlt::augment
