#pragma once

// CPU raycaster producing pixel-aligned rgb / label / depth renders of rig
// cameras. Each pixel casts one ray through its center; all channels of a
// pixel derive from that ray's nearest hit.

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "omnisynth/image.hpp"
#include "omnisynth/parallel.hpp"
#include "omnisynth/rig.hpp"
#include "omnisynth/scene.hpp"

namespace omnisynth {

/// Distance-from-near-plane normalization: clamp((hit - near) / (far - near), 0, 1).
/// A miss (infinite distance) maps to 1.
inline double depth_normalize(double hit_distance, double near, double far) {
  if (!(near > 0.0) || !(far > near)) throw std::invalid_argument("depth range requires far > near > 0");
  if (!(hit_distance < std::numeric_limits<double>::infinity())) return 1.0;
  return std::clamp((hit_distance - near) / (far - near), 0.0, 1.0);
}

struct DepthRange {
  double near = 0.1;
  double far = 200.0;

  void validate() const {
    if (!(near > 0.0) || !(far > near)) throw std::invalid_argument("depth range requires far > near > 0");
  }
};

using FaceChannels = std::map<ChannelKind, ChannelImage>;
/// One entry per rig camera.
using RigRender = std::vector<FaceChannels>;

namespace detail {

inline void check_camera(const RigCamera& camera, const Pose& pose) {
  if (!is_rotation(pose.rotation)) throw InvalidPoseError("camera orientation is not orthonormal");
  if (!pose.position.allFinite()) throw InvalidPoseError("camera position is not finite");
  if (camera.resolution < 1) throw InvalidPoseError("camera resolution must be >= 1");
}

}  // namespace detail

/// Renders the requested channels of one camera at world pose `pose`
/// (camera frame -> world). Hits closer than range.near are ignored.
inline FaceChannels render_channels(const Scene& scene, const RigCamera& camera, const Pose& pose,
                                    const std::set<ChannelKind>& kinds, DepthRange range, unsigned threads = 1) {
  range.validate();
  detail::check_camera(camera, pose);
  const int n = camera.resolution;
  const bool want_rgb = kinds.contains(ChannelKind::rgb);
  const bool want_label = kinds.contains(ChannelKind::label);
  const bool want_depth = kinds.contains(ChannelKind::depth);
  ColorImage rgb(want_rgb ? n : 0, want_rgb ? n : 0);
  ColorImage label(want_label ? n : 0, want_label ? n : 0);
  DepthImage depth(want_depth ? n : 0, want_depth ? n : 0);

  parallel_for(n, threads, [&](int y) {
    for (int x = 0; x < n; ++x) {
      const Eigen::Vector3d dir = (pose.rotation * camera.pixel_ray(x, y)).normalized();
      const Hit hit = scene.intersect({pose.position, dir}, range.near);
      if (want_rgb) rgb(x, y) = scene.shade(hit, dir);
      if (want_label) label(x, y) = scene.label_color(hit);
      if (want_depth) depth(x, y) = static_cast<float>(depth_normalize(hit.t, range.near, range.far));
    }
  });

  FaceChannels out;
  if (want_rgb) out.emplace(ChannelKind::rgb, ChannelImage(ChannelKind::rgb, std::move(rgb)));
  if (want_label) out.emplace(ChannelKind::label, ChannelImage(ChannelKind::label, std::move(label)));
  if (want_depth) out.emplace(ChannelKind::depth, ChannelImage(std::move(depth)));
  return out;
}

inline ChannelImage render_channel(const Scene& scene, const RigCamera& camera, const Pose& pose, ChannelKind kind,
                                   DepthRange range, unsigned threads = 1) {
  return std::move(render_channels(scene, camera, pose, {kind}, range, threads).at(kind));
}

/// One render per (camera, kind). The rig must cover `theta_max`.
inline RigRender render_rig(const Scene& scene, const CameraRig& rig, const std::set<ChannelKind>& kinds,
                            DepthRange range, double theta_max, unsigned threads = 1) {
  rig.validate();
  require_coverage(rig, theta_max);
  RigRender out;
  out.reserve(rig.cameras.size());
  for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
    out.push_back(render_channels(scene, rig.cameras[i], rig.camera_pose(i), kinds, range, threads));
  }
  return out;
}

}  // namespace omnisynth
