#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace omnisynth {

/// Images that must share dimensions do not.
class PairingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend constexpr auto operator<=>(const Rgb8&, const Rgb8&) = default;
};

/// Packs a color into 0xRRGGBB, used as a map key.
constexpr std::uint32_t pack(Rgb8 c) { return (std::uint32_t{c.r} << 16) | (c.g << 8) | c.b; }

/// Dense row-major single-plane image.
template <typename Pixel>
class Image {
 public:
  Image() = default;
  Image(int width, int height, Pixel fill = Pixel{})
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(checked(width)) * checked(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  Pixel& operator()(int x, int y) { return pixels_[index(x, y)]; }
  const Pixel& operator()(int x, int y) const { return pixels_[index(x, y)]; }

  std::span<Pixel> pixels() { return pixels_; }
  std::span<const Pixel> pixels() const { return pixels_; }
  std::span<Pixel> row(int y) { return std::span<Pixel>(pixels_).subspan(index(0, y), width_); }
  std::span<const Pixel> row(int y) const {
    return std::span<const Pixel>(pixels_).subspan(index(0, y), width_);
  }

  bool same_shape(int w, int h) const { return width_ == w && height_ == h; }
  template <typename Other>
  bool same_shape(const Image<Other>& other) const {
    return same_shape(other.width(), other.height());
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  static int checked(int n) {
    if (n < 0) throw std::invalid_argument("image dimensions must be nonnegative");
    return n;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> pixels_;
};

using ColorImage = Image<Rgb8>;
using DepthImage = Image<float>;
/// 0 = false, 1 = true.
using MaskImage = Image<std::uint8_t>;

enum class ChannelKind { rgb, label, depth };

inline std::string_view to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::rgb: return "rgb";
    case ChannelKind::label: return "label";
    case ChannelKind::depth: return "depth";
  }
  return "unknown";
}

/// One rendered channel: color pixels for rgb/label, float for depth.
class ChannelImage {
 public:
  ChannelImage() = default;
  ChannelImage(ChannelKind kind, ColorImage color) : kind_(kind), data_(std::move(color)) {
    if (kind == ChannelKind::depth) throw std::invalid_argument("depth channel needs float pixels");
  }
  explicit ChannelImage(DepthImage depth) : kind_(ChannelKind::depth), data_(std::move(depth)) {}

  ChannelKind kind() const { return kind_; }
  int width() const {
    return std::visit([](const auto& img) { return img.width(); }, data_);
  }
  int height() const {
    return std::visit([](const auto& img) { return img.height(); }, data_);
  }

  const ColorImage& color() const { return std::get<ColorImage>(data_); }
  ColorImage& color() { return std::get<ColorImage>(data_); }
  const DepthImage& depth() const { return std::get<DepthImage>(data_); }
  DepthImage& depth() { return std::get<DepthImage>(data_); }

  friend bool operator==(const ChannelImage&, const ChannelImage&) = default;

 private:
  ChannelKind kind_ = ChannelKind::rgb;
  std::variant<ColorImage, DepthImage> data_;
};

// Sampling. Continuous coordinates put pixel (i, j)'s center at (i, j); the
// image covers [-0.5, w - 0.5) x [-0.5, h - 0.5).

inline bool inside_extent(int width, int height, double x, double y) {
  return x >= -0.5 && x < width - 0.5 && y >= -0.5 && y < height - 0.5;
}

template <typename Pixel>
Pixel sample_nearest(const Image<Pixel>& img, double x, double y) {
  const int xi = std::clamp(static_cast<int>(std::floor(x + 0.5)), 0, img.width() - 1);
  const int yi = std::clamp(static_cast<int>(std::floor(y + 0.5)), 0, img.height() - 1);
  return img(xi, yi);
}

namespace detail {

struct BilinearTaps {
  int x0, x1, y0, y1;
  double fx, fy;
};

inline BilinearTaps bilinear_taps(int width, int height, double x, double y) {
  const double xf = std::floor(x);
  const double yf = std::floor(y);
  BilinearTaps t{};
  t.fx = x - xf;
  t.fy = y - yf;
  const int xi = static_cast<int>(xf);
  const int yi = static_cast<int>(yf);
  t.x0 = std::clamp(xi, 0, width - 1);
  t.x1 = std::clamp(xi + 1, 0, width - 1);
  t.y0 = std::clamp(yi, 0, height - 1);
  t.y1 = std::clamp(yi + 1, 0, height - 1);
  return t;
}

inline double lerp2(double a, double b, double c, double d, double fx, double fy) {
  const double top = a + (b - a) * fx;
  const double bottom = c + (d - c) * fx;
  return top + (bottom - top) * fy;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace detail

/// Bilinear sample as floating-point channels, clamped at the border.
inline std::array<double, 3> sample_bilinear_rgb(const ColorImage& img, double x, double y) {
  const auto t = detail::bilinear_taps(img.width(), img.height(), x, y);
  const Rgb8 a = img(t.x0, t.y0), b = img(t.x1, t.y0), c = img(t.x0, t.y1), d = img(t.x1, t.y1);
  return {detail::lerp2(a.r, b.r, c.r, d.r, t.fx, t.fy), detail::lerp2(a.g, b.g, c.g, d.g, t.fx, t.fy),
          detail::lerp2(a.b, b.b, c.b, d.b, t.fx, t.fy)};
}

inline Rgb8 sample_bilinear(const ColorImage& img, double x, double y) {
  const auto v = sample_bilinear_rgb(img, x, y);
  return {detail::to_byte(v[0]), detail::to_byte(v[1]), detail::to_byte(v[2])};
}

inline float sample_bilinear(const DepthImage& img, double x, double y) {
  const auto t = detail::bilinear_taps(img.width(), img.height(), x, y);
  return static_cast<float>(detail::lerp2(img(t.x0, t.y0), img(t.x1, t.y0), img(t.x0, t.y1),
                                          img(t.x1, t.y1), t.fx, t.fy));
}

template <typename Pixel>
Image<Pixel> flip_horizontal(const Image<Pixel>& img) {
  Image<Pixel> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    auto src = img.row(y);
    std::reverse_copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

}  // namespace omnisynth
