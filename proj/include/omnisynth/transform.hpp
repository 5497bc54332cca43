#pragma once

// Perspective -> fisheye dataset warping and the photometric / geometric
// augmentation suite.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>

#include "omnisynth/camera_models.hpp"
#include "omnisynth/image.hpp"
#include "omnisynth/layer_map.hpp"
#include "omnisynth/parallel.hpp"

namespace omnisynth {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pinhole image with its principal point at the center.
struct PerspectiveImage {
  ColorImage pixels;
  /// Focal length of the pinhole source; unset means "same as the fisheye focal".
  std::optional<double> source_focal_px;
};

struct WarpResult {
  ColorImage image;
  MaskImage void_mask;  // 1 = void
};

/// Source pixel sampled by output pixel (x, y) of a w x h equidistant
/// fisheye with focal `fisheye_f`, from a pinhole of focal `source_f` and the
/// same size. Absent when the ray is at or beyond 90 degrees.
inline std::optional<PixelCoord> warp_source_coordinate(int w, int h, double fisheye_f, double source_f, double x,
                                                        double y) {
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double dx = x - cx, dy = y - cy;
  const double r_d = std::hypot(dx, dy);
  const double theta = r_d / fisheye_f;
  if (theta >= std::numbers::pi / 2) return std::nullopt;
  if (r_d == 0.0) return PixelCoord{cx, cy};
  const double scale = source_f * std::tan(theta) / r_d;
  return PixelCoord{cx + dx * scale, cy + dy * scale};
}

/// Inverse-mapped equidistant warp keeping the input dimensions. rgb is
/// sampled bilinearly, labels by nearest neighbor. Void pixels are black.
inline WarpResult perspective_to_fisheye(const PerspectiveImage& img, double fisheye_f, ChannelKind kind,
                                         unsigned threads = 1) {
  if (!(fisheye_f > 0.0) || !std::isfinite(fisheye_f)) throw ParameterError("fisheye focal length must be positive");
  const double source_f = img.source_focal_px.value_or(fisheye_f);
  if (!(source_f > 0.0) || !std::isfinite(source_f)) throw ParameterError("source focal length must be positive");
  if (kind == ChannelKind::depth) throw ParameterError("warp supports rgb and label images only");
  const int w = img.pixels.width(), h = img.pixels.height();
  if (w < 1 || h < 1) throw ParameterError("image must be at least 1x1");
  WarpResult out{ColorImage(w, h, kVoidColor), MaskImage(w, h, 1)};
  parallel_for(h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const auto src = warp_source_coordinate(w, h, fisheye_f, source_f, x, y);
      if (!src || !inside_extent(w, h, src->u, src->v)) continue;
      out.image(x, y) = kind == ChannelKind::label ? sample_nearest(img.pixels, src->u, src->v)
                                                   : sample_bilinear(img.pixels, src->u, src->v);
      out.void_mask(x, y) = 0;
    }
  });
  return out;
}

// --- augmentation ----------------------------------------------------------

struct AugmentConfig {
  double flip_probability = 0.5;
  double brightness_probability = 0.5;
  double brightness_max_delta = 0.5;  // fraction of full scale
  double hue_probability = 0.5;
  double hue_max_delta = 0.05;  // turns
  double saturation_probability = 0.5;
  std::pair<double, double> saturation_range{0.8, 1.2};
  double noise_probability = 0.5;
  double noise_mean = 0.0;
  double noise_std = 8.0;  // intensity levels
  std::uint64_t seed = 0;

  void validate() const {
    for (double p : {flip_probability, brightness_probability, hue_probability, saturation_probability,
                     noise_probability}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("probabilities must lie in [0, 1]");
    }
    if (!(brightness_max_delta >= 0.0) || !(hue_max_delta >= 0.0) || !(noise_std >= 0.0)) {
      throw ParameterError("magnitudes must be >= 0");
    }
    if (!std::isfinite(noise_mean)) throw ParameterError("noise mean must be finite");
    if (!(saturation_range.first >= 0.0) || !(saturation_range.first <= saturation_range.second)) {
      throw ParameterError("saturation range must satisfy 0 <= lower <= upper");
    }
  }

  /// Everything off: augment_pair becomes the identity.
  static AugmentConfig none() {
    AugmentConfig c;
    c.flip_probability = c.brightness_probability = c.hue_probability = c.saturation_probability =
        c.noise_probability = 0.0;
    c.brightness_max_delta = c.hue_max_delta = c.noise_std = 0.0;
    c.saturation_range = {1.0, 1.0};
    return c;
  }
};

enum class AugmentOp : std::uint64_t { flip = 1, brightness = 2, hue = 3, saturation = 4, noise = 5 };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Generator for one (seed, sample, op) triple, independent of batch order.
inline std::mt19937_64 op_rng(std::uint64_t seed, std::uint64_t sample_index, AugmentOp op) {
  const std::uint64_t k = splitmix64(splitmix64(splitmix64(seed) ^ sample_index) ^ static_cast<std::uint64_t>(op));
  return std::mt19937_64(k);
}

struct Hsv {
  double h, s, v;  // h in turns [0, 1), s and v in [0, 1]
};

inline Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double c = mx - mn;
  double h = 0.0;
  if (c > 0.0) {
    if (mx == r) {
      h = std::fmod((g - b) / c, 6.0);
    } else if (mx == g) {
      h = (b - r) / c + 2.0;
    } else {
      h = (r - g) / c + 4.0;
    }
    h /= 6.0;
    if (h < 0.0) h += 1.0;
  }
  return {h, mx > 0.0 ? c / mx : 0.0, mx};
}

inline std::array<double, 3> hsv_to_rgb(Hsv in) {
  const double h = (in.h - std::floor(in.h)) * 6.0;
  const double c = in.v * in.s;
  const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  const double m = in.v - c;
  std::array<double, 3> rgb{};
  switch (static_cast<int>(h) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  return {rgb[0] + m, rgb[1] + m, rgb[2] + m};
}

/// Adds N(mean, std) per channel, rounding and clamping to [0, 255].
inline void add_gaussian_noise(ColorImage& img, double mean, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(mean, stddev);
  for (Rgb8& p : img.pixels()) {
    p = {detail::to_byte(p.r + noise(rng)), detail::to_byte(p.g + noise(rng)), detail::to_byte(p.b + noise(rng))};
  }
}

inline void adjust_brightness(ColorImage& img, double delta_levels) {
  for (Rgb8& p : img.pixels()) {
    p = {detail::to_byte(p.r + delta_levels), detail::to_byte(p.g + delta_levels),
         detail::to_byte(p.b + delta_levels)};
  }
}

/// Rotates hue by `hue_turns` and scales saturation by `sat_scale`.
inline void adjust_hue_saturation(ColorImage& img, double hue_turns, double sat_scale) {
  for (Rgb8& p : img.pixels()) {
    Hsv hsv = rgb_to_hsv(p.r / 255.0, p.g / 255.0, p.b / 255.0);
    hsv.h += hue_turns;
    hsv.s = std::clamp(hsv.s * sat_scale, 0.0, 1.0);
    const auto c = hsv_to_rgb(hsv);
    p = {detail::to_byte(c[0] * 255.0), detail::to_byte(c[1] * 255.0), detail::to_byte(c[2] * 255.0)};
  }
}

struct AugmentedPair {
  ColorImage rgb;
  ColorImage label;
  bool flipped = false;
  std::optional<double> brightness_delta;  // intensity levels
  std::optional<double> hue_delta;         // turns
  std::optional<double> saturation_scale;
  bool noised = false;
};

/// Applies flip (both images), then brightness, hue, saturation and Gaussian
/// noise (rgb only). Each op fires with its probability; ops whose magnitude
/// is neutral are skipped outright.
inline AugmentedPair augment_pair(const ColorImage& rgb, const ColorImage& label, const AugmentConfig& cfg,
                                  std::uint64_t sample_index) {
  cfg.validate();
  if (!rgb.same_shape(label.width(), label.height())) throw PairingError("rgb and label sizes differ");
  AugmentedPair out;
  out.rgb = rgb;
  out.label = label;
  const auto fires = [&](std::mt19937_64& rng, double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
  };

  if (auto rng = op_rng(cfg.seed, sample_index, AugmentOp::flip); fires(rng, cfg.flip_probability)) {
    out.rgb = flip_horizontal(out.rgb);
    out.label = flip_horizontal(out.label);
    out.flipped = true;
  }
  if (cfg.brightness_max_delta > 0.0) {
    auto rng = op_rng(cfg.seed, sample_index, AugmentOp::brightness);
    if (fires(rng, cfg.brightness_probability)) {
      const double m = cfg.brightness_max_delta * 255.0;
      const double delta = std::uniform_real_distribution<double>(-m, m)(rng);
      adjust_brightness(out.rgb, delta);
      out.brightness_delta = delta;
    }
  }
  if (cfg.hue_max_delta > 0.0) {
    auto rng = op_rng(cfg.seed, sample_index, AugmentOp::hue);
    if (fires(rng, cfg.hue_probability)) {
      const double delta = std::uniform_real_distribution<double>(-cfg.hue_max_delta, cfg.hue_max_delta)(rng);
      adjust_hue_saturation(out.rgb, delta, 1.0);
      out.hue_delta = delta;
    }
  }
  if (cfg.saturation_range != std::pair{1.0, 1.0}) {
    auto rng = op_rng(cfg.seed, sample_index, AugmentOp::saturation);
    if (fires(rng, cfg.saturation_probability)) {
      const auto [lo, hi] = cfg.saturation_range;
      const double scale = lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
      adjust_hue_saturation(out.rgb, 0.0, scale);
      out.saturation_scale = scale;
    }
  }
  if (cfg.noise_std > 0.0 || cfg.noise_mean != 0.0) {
    auto rng = op_rng(cfg.seed, sample_index, AugmentOp::noise);
    if (fires(rng, cfg.noise_probability)) {
      add_gaussian_noise(out.rgb, cfg.noise_mean, cfg.noise_std, rng);
      out.noised = true;
    }
  }
  return out;
}

}  // namespace omnisynth
