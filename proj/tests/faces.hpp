#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "omnisynth/image.hpp"
#include "omnisynth/rig.hpp"

namespace testutil {

/// Face images whose pixels are a function of the rig-frame ray through the
/// pixel center, so every camera sees consistent content.
template <typename Fn>
std::vector<omnisynth::ChannelImage> direction_faces(const omnisynth::CameraRig& rig, Fn fn,
                                                     omnisynth::ChannelKind kind = omnisynth::ChannelKind::rgb) {
  std::vector<omnisynth::ChannelImage> faces;
  for (const auto& cam : rig.cameras) {
    omnisynth::ColorImage img(cam.resolution, cam.resolution);
    for (int y = 0; y < cam.resolution; ++y) {
      for (int x = 0; x < cam.resolution; ++x) img(x, y) = fn(Eigen::Vector3d((cam.orientation * cam.pixel_ray(x, y)).normalized()));
    }
    faces.emplace_back(kind, std::move(img));
  }
  return faces;
}

/// Smooth color field over directions.
inline omnisynth::Rgb8 smooth_color(const Eigen::Vector3d& d) {
  const auto byte = [](double v) { return static_cast<std::uint8_t>(std::lround(127.5 + 127.0 * v)); };
  return {byte(d.x()), byte(d.y()), byte(std::sin(2.0 * d.z() + d.x()))};
}

inline double mean_abs_diff(const omnisynth::ColorImage& a, const omnisynth::ColorImage& b,
                            const omnisynth::MaskImage& include) {
  double sum = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!include.pixels()[i]) continue;
    const auto p = a.pixels()[i], q = b.pixels()[i];
    sum += std::abs(p.r - q.r) + std::abs(p.g - q.g) + std::abs(p.b - q.b);
    n += 3;
  }
  return n ? sum / n / 255.0 : 0.0;
}

}  // namespace testutil
