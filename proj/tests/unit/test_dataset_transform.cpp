#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "omnisynth/transform.hpp"

using namespace omnisynth;

namespace {

constexpr double kPi = std::numbers::pi;

ColorImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> b(0, 255);
  ColorImage img(w, h);
  for (auto& p : img.pixels()) p = {std::uint8_t(b(rng)), std::uint8_t(b(rng)), std::uint8_t(b(rng))};
  return img;
}

ColorImage palette_image(int w, int h, const std::vector<Rgb8>& palette, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, palette.size() - 1);
  ColorImage img(w, h);
  for (auto& p : img.pixels()) p = palette[pick(rng)];
  return img;
}

AugmentConfig only_noise() {
  AugmentConfig c = AugmentConfig::none();
  c.noise_probability = 1.0;
  c.noise_std = 8.0;
  return c;
}

}  // namespace

TEST(WarpCoordinate, CenterMapsToItself) {
  const auto p = warp_source_coordinate(2048, 1024, 159, 159, 1023.5, 511.5);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->u, 1023.5);
  EXPECT_EQ(p->v, 511.5);
}

TEST(WarpCoordinate, QuarterPiRadiusSamplesFocalRadius) {
  const double r = 159 * kPi / 4;
  for (double phi : {0.0, 0.7, 2.0, -2.5}) {
    const double x = 1023.5 + r * std::cos(phi), y = 511.5 + r * std::sin(phi);
    const auto p = warp_source_coordinate(2048, 1024, 159, 159, x, y);
    ASSERT_TRUE(p);
    EXPECT_NEAR(std::hypot(p->u - 1023.5, p->v - 511.5), 159.0, 0.5);
    EXPECT_NEAR(std::atan2(p->v - 511.5, p->u - 1023.5), phi, 1e-12);
  }
}

TEST(WarpCoordinate, MatchesEquidistantOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 639), v(0, 479);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng), y = v(rng);
    const double dx = x - 319.5, dy = y - 239.5, rd = std::hypot(dx, dy);
    const double theta = rd / 150.0;
    const auto p = warp_source_coordinate(640, 480, 150, 210, x, y);
    if (theta >= kPi / 2) {
      EXPECT_FALSE(p);
      continue;
    }
    ASSERT_TRUE(p);
    const double ru = 210 * std::tan(theta);
    EXPECT_NEAR(p->u, 319.5 + dx / rd * ru, 1e-9);
    EXPECT_NEAR(p->v, 239.5 + dy / rd * ru, 1e-9);
  }
}

TEST(PerspectiveToFisheye, CenterPixelPreserved) {
  ColorImage src(101, 101, {20, 20, 20});
  src(50, 50) = {200, 100, 50};
  for (auto kind : {ChannelKind::rgb, ChannelKind::label}) {
    const auto out = perspective_to_fisheye({src, std::nullopt}, 40, kind);
    EXPECT_EQ(out.image(50, 50), (Rgb8{200, 100, 50}));
    EXPECT_EQ(out.void_mask(50, 50), 0);
  }
}

TEST(PerspectiveToFisheye, KeepsDimensionsAndVoidsBeyondHemisphere) {
  const auto src = random_image(300, 200, 1);
  const double f = 40;
  const auto out = perspective_to_fisheye({src, std::nullopt}, f, ChannelKind::rgb);
  EXPECT_EQ(out.image.width(), 300);
  EXPECT_EQ(out.image.height(), 200);
  for (int y = 0; y < 200; ++y) {
    for (int x = 0; x < 300; ++x) {
      const double r = std::hypot(x - 149.5, y - 99.5);
      if (r >= f * kPi / 2) {
        EXPECT_EQ(out.void_mask(x, y), 1);
      }
      if (out.void_mask(x, y)) {
        EXPECT_EQ(out.image(x, y), kVoidColor);
      }
    }
  }
  // Inside the disc, void only where the source ray leaves the source image.
  EXPECT_EQ(out.void_mask(149, 99), 0);
}

TEST(PerspectiveToFisheye, LabelsUseNearestNeighbor) {
  const std::vector<Rgb8> palette = {{128, 64, 128}, {244, 35, 232}, {70, 70, 70}, {107, 142, 35}};
  const auto src = palette_image(257, 129, palette, 2);
  const auto out = perspective_to_fisheye({src, 120.0}, 80, ChannelKind::label);
  std::set<std::uint32_t> allowed;
  for (Rgb8 c : palette) allowed.insert(pack(c));
  for (std::size_t i = 0; i < out.image.size(); ++i) {
    if (out.void_mask.pixels()[i]) continue;
    EXPECT_TRUE(allowed.contains(pack(out.image.pixels()[i])));
  }
}

TEST(PerspectiveToFisheye, UniformInputStaysUniform) {
  const ColorImage src(200, 100, {90, 180, 30});
  const auto out = perspective_to_fisheye({src, std::nullopt}, 60, ChannelKind::rgb);
  for (std::size_t i = 0; i < out.image.size(); ++i) {
    if (!out.void_mask.pixels()[i]) {
      EXPECT_EQ(out.image.pixels()[i], (Rgb8{90, 180, 30}));
    }
  }
}

TEST(PerspectiveToFisheye, ThreadCountDoesNotChangeOutput) {
  const auto src = random_image(320, 160, 3);
  const auto a = perspective_to_fisheye({src, std::nullopt}, 100, ChannelKind::rgb, 1);
  const auto b = perspective_to_fisheye({src, std::nullopt}, 100, ChannelKind::rgb, 4);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.void_mask, b.void_mask);
}

TEST(PerspectiveToFisheye, ParameterErrors) {
  const ColorImage src(8, 8);
  EXPECT_THROW(perspective_to_fisheye({src, std::nullopt}, 0.0, ChannelKind::rgb), ParameterError);
  EXPECT_THROW(perspective_to_fisheye({src, std::nullopt}, -3.0, ChannelKind::rgb), ParameterError);
  EXPECT_THROW(perspective_to_fisheye({src, 0.0}, 10.0, ChannelKind::rgb), ParameterError);
  EXPECT_THROW(perspective_to_fisheye({src, std::nullopt}, NAN, ChannelKind::rgb), ParameterError);
}

TEST(Hsv, RoundTrip) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 5000; ++i) {
    const double r = u(rng), g = u(rng), b = u(rng);
    const auto c = hsv_to_rgb(rgb_to_hsv(r, g, b));
    EXPECT_NEAR(c[0], r, 1e-12);
    EXPECT_NEAR(c[1], g, 1e-12);
    EXPECT_NEAR(c[2], b, 1e-12);
  }
}

TEST(Hsv, HueRotationOfPrimaries) {
  ColorImage img(1, 1, {255, 0, 0});
  adjust_hue_saturation(img, 1.0 / 3.0, 1.0);
  EXPECT_EQ(img(0, 0), (Rgb8{0, 255, 0}));
  adjust_hue_saturation(img, 1.0 / 3.0, 1.0);
  EXPECT_EQ(img(0, 0), (Rgb8{0, 0, 255}));
  adjust_hue_saturation(img, 0.0, 0.0);
  EXPECT_EQ(img(0, 0), (Rgb8{255, 255, 255}));
}

TEST(Augment, NoiseStandardDeviation) {
  const ColorImage gray(512, 512, {128, 128, 128});
  const ColorImage label(512, 512, {1, 2, 3});
  const auto out = augment_pair(gray, label, only_noise(), 0);
  ASSERT_TRUE(out.noised);
  double sum = 0, sq = 0;
  long n = 0;
  for (Rgb8 p : out.rgb.pixels()) {
    for (int c : {p.r, p.g, p.b}) {
      const double d = c - 128.0;
      sum += d;
      sq += d * d;
      ++n;
    }
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_GE(sd, 7.5);
  EXPECT_LE(sd, 8.5);
  EXPECT_NEAR(mean, 0.0, 0.1);
  EXPECT_EQ(out.label, label);
}

TEST(Augment, ZeroMagnitudeIsIdentity) {
  const auto rgb = random_image(64, 48, 4);
  const auto label = random_image(64, 48, 5);
  AugmentConfig c = AugmentConfig::none();
  c.brightness_probability = c.hue_probability = c.saturation_probability = c.noise_probability = 1.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto out = augment_pair(rgb, label, c, i);
    EXPECT_EQ(out.rgb, rgb);
    EXPECT_EQ(out.label, label);
    EXPECT_FALSE(out.flipped || out.noised || out.brightness_delta || out.hue_delta || out.saturation_scale);
  }
  const auto none = augment_pair(rgb, label, AugmentConfig::none(), 3);
  EXPECT_EQ(none.rgb, rgb);
  EXPECT_EQ(none.label, label);
}

TEST(Augment, LabelsOnlyEverFlipped) {
  const std::vector<Rgb8> palette = {{128, 64, 128}, {220, 20, 60}, {0, 0, 142}};
  const auto rgb = random_image(40, 30, 6);
  const auto label = palette_image(40, 30, palette, 7);
  AugmentConfig c;
  c.seed = 99;
  int flips = 0, photometric = 0;
  for (std::uint64_t i = 0; i < 64; ++i) {
    const auto out = augment_pair(rgb, label, c, i);
    EXPECT_EQ(out.label, out.flipped ? flip_horizontal(label) : label);
    flips += out.flipped;
    photometric += out.noised || out.brightness_delta.has_value();
    if (!out.noised && !out.brightness_delta && !out.hue_delta && !out.saturation_scale) {
      EXPECT_EQ(out.rgb, out.flipped ? flip_horizontal(rgb) : rgb);
    }
  }
  EXPECT_GT(flips, 0);
  EXPECT_LT(flips, 64);
  EXPECT_GT(photometric, 0);
}

TEST(Augment, DeterministicPerSeedAndIndex) {
  const auto rgb = random_image(32, 32, 8);
  const auto label = random_image(32, 32, 9);
  AugmentConfig c;
  c.seed = 5;
  c.noise_probability = 1.0;
  const auto a = augment_pair(rgb, label, c, 17);
  const auto b = augment_pair(rgb, label, c, 17);
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_EQ(a.label, b.label);
  const auto other = augment_pair(rgb, label, c, 18);
  EXPECT_NE(a.rgb, other.rgb);
}

TEST(Augment, BrightnessWithinBounds) {
  const ColorImage rgb(4, 4, {100, 100, 100});
  AugmentConfig c = AugmentConfig::none();
  c.brightness_probability = 1.0;
  c.brightness_max_delta = 0.2;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto out = augment_pair(rgb, rgb, c, i);
    ASSERT_TRUE(out.brightness_delta);
    EXPECT_LE(std::abs(*out.brightness_delta), 0.2 * 255);
    EXPECT_EQ(out.rgb(0, 0).r, detail::to_byte(100 + *out.brightness_delta));
  }
}

TEST(Augment, Errors) {
  const ColorImage a(4, 4), b(5, 4);
  EXPECT_THROW(augment_pair(a, b, AugmentConfig{}, 0), PairingError);
  AugmentConfig c;
  c.flip_probability = 1.5;
  EXPECT_THROW(augment_pair(a, a, c, 0), ParameterError);
  c = {};
  c.noise_std = -1;
  EXPECT_THROW(augment_pair(a, a, c, 0), ParameterError);
  c = {};
  c.saturation_range = {1.2, 0.8};
  EXPECT_THROW(augment_pair(a, a, c, 0), ParameterError);
}
