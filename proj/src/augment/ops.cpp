#include <algorithm>
#include <cmath>
#include <numbers>

#include "atlt/augment/augment.hpp"
#include "atlt/core/errors.hpp"
#include "atlt/data/formats.hpp"

namespace atlt::augment {

std::string aug_op_name(AugOp op) {
  switch (op) {
    case AugOp::Identity: return "Identity";
    case AugOp::ShearX: return "ShearX";
    case AugOp::ShearY: return "ShearY";
    case AugOp::TranslateX: return "TranslateX";
    case AugOp::TranslateY: return "TranslateY";
    case AugOp::Rotate: return "Rotate";
    case AugOp::Brightness: return "Brightness";
    case AugOp::Color: return "Color";
    case AugOp::Contrast: return "Contrast";
    case AugOp::Sharpness: return "Sharpness";
    case AugOp::Posterize: return "Posterize";
    case AugOp::Solarize: return "Solarize";
    case AugOp::AutoContrast: return "AutoContrast";
    case AugOp::Equalize: return "Equalize";
  }
  return "unknown";
}

AugOp parse_aug_op(const std::string& name) {
  for (auto op : kAllOps)
    if (aug_op_name(op) == name) return op;
  throw ConfigError("unknown augmentation '" + name + "'");
}

std::vector<AugOp> ra11_space() { return std::vector<AugOp>(kAllOps.begin(), kAllOps.begin() + 11); }

namespace {

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

long nearest(double v) { return static_cast<long>(std::floor(v + 0.5)); }

// Inverse-mapped resampling: out(x, y) = in(map(x, y)), zero outside.
template <typename Map>
Image resample(const Image& img, Map map) {
  Image out = img;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      double sx = 0.0, sy = 0.0;
      map(static_cast<double>(x) - cx, static_cast<double>(y) - cy, sx, sy);
      const long ix = nearest(sx + cx);
      const long iy = nearest(sy + cy);
      const bool inside = ix >= 0 && iy >= 0 && ix < static_cast<long>(img.width) && iy < static_cast<long>(img.height);
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.at(c, y, x) = inside ? img.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) : 0.0f;
      }
    }
  }
  return out;
}

// factor * img + (1 - factor) * degenerate, clamped.
Image blend(const Image& img, const Image& degenerate, double factor) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = clamp01(factor * img.pixels[i] + (1.0 - factor) * degenerate.pixels[i]);
  }
  return out;
}

std::vector<double> grayscale(const Image& img) {
  std::vector<double> g(img.height * img.width);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (img.channels >= 3) {
      g[i] = 0.299 * img.pixels[i] + 0.587 * img.pixels[img.height * img.width + i] +
             0.114 * img.pixels[2 * img.height * img.width + i];
    } else {
      g[i] = img.pixels[i];
    }
  }
  return g;
}

}  // namespace

Image shear_x(const Image& img, double factor) {
  if (factor == 0.0) return img;
  return resample(img, [factor](double dx, double dy, double& sx, double& sy) {
    sx = dx + factor * dy;
    sy = dy;
  });
}

Image shear_y(const Image& img, double factor) {
  if (factor == 0.0) return img;
  return resample(img, [factor](double dx, double dy, double& sx, double& sy) {
    sx = dx;
    sy = dy + factor * dx;
  });
}

Image translate_x(const Image& img, double pixels) {
  if (pixels == 0.0) return img;
  return resample(img, [pixels](double dx, double dy, double& sx, double& sy) {
    sx = dx - pixels;
    sy = dy;
  });
}

Image translate_y(const Image& img, double pixels) {
  if (pixels == 0.0) return img;
  return resample(img, [pixels](double dx, double dy, double& sx, double& sy) {
    sx = dx;
    sy = dy - pixels;
  });
}

Image rotate(const Image& img, double degrees) {
  if (degrees == 0.0) return img;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  return resample(img, [c, s](double dx, double dy, double& sx, double& sy) {
    sx = c * dx - s * dy;
    sy = s * dx + c * dy;
  });
}

Image brightness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  Image black = img;
  std::fill(black.pixels.begin(), black.pixels.end(), 0.0f);
  return blend(img, black, factor);
}

Image color(const Image& img, double factor) {
  // A single-channel image already equals its grayscale version.
  if (factor == 1.0 || img.channels < 3) return img;
  const auto g = grayscale(img);
  Image gray = img;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t i = 0; i < g.size(); ++i) gray.pixels[c * g.size() + i] = static_cast<float>(g[i]);
  return blend(img, gray, factor);
}

Image contrast(const Image& img, double factor) {
  if (factor == 1.0) return img;
  const auto g = grayscale(img);
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(g.size());
  Image flat = img;
  std::fill(flat.pixels.begin(), flat.pixels.end(), static_cast<float>(mean));
  return blend(img, flat, factor);
}

Image sharpness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  // 3x3 smoothing kernel [1 1 1; 1 5 1; 1 1 1] / 13 on the interior; the
  // border rows and columns keep their original values.
  Image smooth = img;
  if (img.height >= 3 && img.width >= 3) {
    for (std::size_t c = 0; c < img.channels; ++c)
      for (std::size_t y = 1; y + 1 < img.height; ++y)
        for (std::size_t x = 1; x + 1 < img.width; ++x) {
          double acc = 4.0 * img.at(c, y, x);
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) acc += img.at(c, y + dy, x + dx);
          smooth.at(c, y, x) = static_cast<float>(acc / 13.0);
        }
  }
  return blend(img, smooth, factor);
}

Image posterize(const Image& img, int bits) {
  if (bits >= 8) return img;
  const int keep = std::max(bits, 1);
  const unsigned mask = (0xFFu << (8 - keep)) & 0xFFu;
  Image out = img;
  for (auto& v : out.pixels) v = data::byte_to_unit(static_cast<unsigned char>(data::unit_to_byte(v) & mask));
  return out;
}

Image solarize(const Image& img, double threshold) {
  Image out = img;
  for (auto& v : out.pixels)
    if (v >= threshold) v = 1.0f - v;
  return out;
}

Image autocontrast(const Image& img) {
  Image out = img;
  const std::size_t plane = img.height * img.width;
  for (std::size_t c = 0; c < img.channels; ++c) {
    float* p = out.pixels.data() + c * plane;
    const auto [lo, hi] = std::minmax_element(p, p + plane);
    const float mn = *lo, mx = *hi;
    if (!(mx > mn)) continue;
    for (std::size_t i = 0; i < plane; ++i) p[i] = clamp01((p[i] - mn) / static_cast<double>(mx - mn));
  }
  return out;
}

Image equalize(const Image& img) {
  Image out = img;
  const std::size_t plane = img.height * img.width;
  for (std::size_t c = 0; c < img.channels; ++c) {
    float* p = out.pixels.data() + c * plane;
    std::array<std::size_t, 256> hist{};
    std::vector<unsigned char> bytes(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      bytes[i] = data::unit_to_byte(p[i]);
      ++hist[bytes[i]];
    }
    std::size_t last = 0;
    for (std::size_t b = 0; b < 256; ++b)
      if (hist[b]) last = hist[b];
    const std::size_t step = (plane - last) / 255;
    if (step == 0) continue;
    std::array<unsigned char, 256> lut{};
    std::size_t cum = 0;
    for (std::size_t b = 0; b < 256; ++b) {
      lut[b] = static_cast<unsigned char>(std::min<std::size_t>((cum + step / 2) / step, 255));
      cum += hist[b];
    }
    for (std::size_t i = 0; i < plane; ++i) p[i] = data::byte_to_unit(lut[bytes[i]]);
  }
  return out;
}

Image cutout(const Image& img, std::size_t cy, std::size_t cx, std::size_t length) {
  Image out = img;
  const long half = static_cast<long>(length / 2);
  const long y0 = std::max(0L, static_cast<long>(cy) - half);
  const long x0 = std::max(0L, static_cast<long>(cx) - half);
  const long y1 = std::min(static_cast<long>(img.height), static_cast<long>(cy) - half + static_cast<long>(length));
  const long x1 = std::min(static_cast<long>(img.width), static_cast<long>(cx) - half + static_cast<long>(length));
  for (std::size_t c = 0; c < img.channels; ++c)
    for (long y = y0; y < y1; ++y)
      for (long x = x0; x < x1; ++x) out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 0.0f;
  return out;
}

Image apply_aug_op(const Image& img, AugOp op, double magnitude, Rng& rng) {
  if (!(magnitude >= 0.0 && magnitude <= kMaxMagnitude)) throw ConfigError("augmentation magnitude must lie in [0,30]");
  const double level = magnitude / kMaxMagnitude;
  const auto signed_level = [&](double range) { return (rng.coin() ? -1.0 : 1.0) * range * level; };
  switch (op) {
    case AugOp::Identity: return img;
    case AugOp::ShearX: return shear_x(img, signed_level(0.3));
    case AugOp::ShearY: return shear_y(img, signed_level(0.3));
    case AugOp::TranslateX: return translate_x(img, signed_level(0.45 * static_cast<double>(img.width)));
    case AugOp::TranslateY: return translate_y(img, signed_level(0.45 * static_cast<double>(img.height)));
    case AugOp::Rotate: return rotate(img, signed_level(30.0));
    case AugOp::Brightness: return brightness(img, 1.0 + signed_level(0.9));
    case AugOp::Color: return color(img, 1.0 + signed_level(0.9));
    case AugOp::Contrast: return contrast(img, 1.0 + signed_level(0.9));
    case AugOp::Sharpness: return sharpness(img, 1.0 + signed_level(0.9));
    case AugOp::Posterize: return posterize(img, static_cast<int>(std::ceil(8.0 - 4.0 * level)));
    case AugOp::Solarize: return solarize(img, 1.0 - level);
    case AugOp::AutoContrast: return autocontrast(img);
    case AugOp::Equalize: return equalize(img);
  }
  return img;
}

}  // namespace atlt::augment
