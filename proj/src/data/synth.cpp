#include "atlt/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "atlt/core/errors.hpp"
#include "atlt/core/rng.hpp"
#include "atlt/data/formats.hpp"

namespace atlt::data {
namespace {

std::vector<double> class_template(std::uint64_t template_seed, std::size_t cls, std::size_t channels, std::size_t side) {
  Rng rng(derive_seed(template_seed, "synth-template", cls));
  std::vector<double> t(channels * side * side, 0.5);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = t.data() + c * side * side;
    for (int comp = 0; comp < 3; ++comp) {
      const double fx = static_cast<double>(rng.below(5)) - 2.0;
      double fy = static_cast<double>(rng.below(5)) - 2.0;
      if (fx == 0.0 && fy == 0.0) fy = 1.0;
      const double phase = rng.uniform(0.0, two_pi);
      const double amp = rng.uniform(0.08, 0.16);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          plane[y * side + x] += amp * std::cos(two_pi * (fx * x + fy * y) / side + phase);
        }
    }
    const double cx = rng.uniform(0.2, 0.8) * side;
    const double cy = rng.uniform(0.2, 0.8) * side;
    const double amp = rng.coin() ? 0.3 : -0.3;
    const double sigma = side / 6.0;
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        plane[y * side + x] += amp * std::exp(-d2 / (2.0 * sigma * sigma));
      }
  }
  return t;
}

// Bilinear lookup with wrap-around.
double sample_periodic(const double* plane, std::size_t side, double x, double y) {
  const double n = static_cast<double>(side);
  x = std::fmod(std::fmod(x, n) + n, n);
  y = std::fmod(std::fmod(y, n) + n, n);
  const auto x0 = static_cast<std::size_t>(x) % side, y0 = static_cast<std::size_t>(y) % side;
  const std::size_t x1 = (x0 + 1) % side, y1 = (y0 + 1) % side;
  const double fx = x - std::floor(x), fy = y - std::floor(y);
  const double top = plane[y0 * side + x0] * (1.0 - fx) + plane[y0 * side + x1] * fx;
  const double bottom = plane[y1 * side + x0] * (1.0 - fx) + plane[y1 * side + x1] * fx;
  return top * (1.0 - fy) + bottom * fy;
}

}  // namespace

ImageDataset synth_dataset(std::uint64_t seed, std::size_t num_classes, std::size_t per_class, std::size_t side,
                           const SynthOptions& options) {
  if (num_classes == 0) throw ConfigError("synth_dataset: num_classes must be >= 1");
  if (per_class == 0) throw ConfigError("synth_dataset: per_class must be >= 1");
  if (side < 4) throw ConfigError("synth_dataset: side must be >= 4");
  if (options.channels == 0) throw ConfigError("synth_dataset: channels must be >= 1");
  ImageDataset ds;
  ds.channels = options.channels;
  ds.height = side;
  ds.width = side;
  ds.num_classes = num_classes;
  ds.split = options.split;
  ds.manifest.source = "synthetic";
  ds.manifest.seed = seed;
  ds.manifest.ir = 1.0;
  ds.manifest.counts.assign(num_classes, static_cast<std::int64_t>(per_class));
  const std::size_t plane = side * side;
  const std::size_t per = options.channels * plane;
  ds.pixels.resize(num_classes * per_class * per);
  ds.labels.resize(num_classes * per_class);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const auto tmpl = class_template(options.template_seed, k, options.channels, side);
    for (std::size_t e = 0; e < per_class; ++e) {
      const std::size_t idx = k * per_class + e;
      ds.labels[idx] = k;
      Rng rng(derive_seed(seed, "synth-example", idx));
      const double shift_x = rng.uniform(-options.max_shift, options.max_shift);
      const double shift_y = rng.uniform(-options.max_shift, options.max_shift);
      const double angle = rng.uniform(-options.max_rotate_deg, options.max_rotate_deg) * std::numbers::pi / 180.0;
      const double contrast = rng.uniform(1.0 - options.contrast_jitter, 1.0 + options.contrast_jitter);
      const double brightness = rng.uniform(-options.brightness_jitter, options.brightness_jitter);
      const double ca = std::cos(angle), sa = std::sin(angle);
      const double centre = (static_cast<double>(side) - 1.0) / 2.0;
      float* out = ds.pixels.data() + idx * per;
      for (std::size_t c = 0; c < options.channels; ++c)
        for (std::size_t y = 0; y < side; ++y)
          for (std::size_t x = 0; x < side; ++x) {
            // Rotate about the centre, then shift; the template is periodic.
            const double rx = static_cast<double>(x) - centre, ry = static_cast<double>(y) - centre;
            const double sx = ca * rx - sa * ry + centre + shift_x;
            const double sy = sa * rx + ca * ry + centre + shift_y;
            const double base = sample_periodic(tmpl.data() + c * plane, side, sx, sy);
            double v = 0.5 + contrast * (base - 0.5) + brightness + rng.normal(0.0, options.noise);
            out[c * plane + y * side + x] = byte_to_unit(unit_to_byte(static_cast<float>(std::clamp(v, 0.0, 1.0))));
          }
    }
  }
  return ds;
}

}  // namespace atlt::data
