#pragma once

// Perspective rig cameras whose renders tile the fisheye hemisphere.

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "omnisynth/camera_models.hpp"

namespace omnisynth {

class InvalidPoseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rotation whose columns are the (right, down, forward) axes of a camera
/// looking along `forward` with image-down along `down`.
inline Eigen::Matrix3d look_rotation(const Eigen::Vector3d& forward, const Eigen::Vector3d& down) {
  const Eigen::Vector3d z = forward.normalized();
  const Eigen::Vector3d y = (down - down.dot(z) * z).normalized();
  Eigen::Matrix3d r;
  r.col(0) = y.cross(z);
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

inline bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-6) {
  if (!r.allFinite()) return false;
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(r.determinant() - 1.0) < tol;
}

struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  /// rig/camera frame -> world
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

/// Square pinhole camera with a 90 degree field of view.
struct RigCamera {
  static constexpr double kFovDeg = 90.0;

  /// camera frame -> rig frame
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();
  int resolution = 256;
  std::string name;

  double focal_px() const { return resolution / 2.0 / std::tan(kFovDeg * std::numbers::pi / 360.0); }
  double center() const { return (resolution - 1) / 2.0; }
  Eigen::Vector3d axis() const { return orientation.col(2); }

  /// Unnormalized camera-frame ray through continuous pixel (x, y).
  Eigen::Vector3d pixel_ray(double x, double y) const {
    const double f = focal_px();
    return {(x - center()) / f, (y - center()) / f, 1.0};
  }

  /// Camera-frame ray through normalized texture coordinate (s, t) in [0,1]^2.
  static Eigen::Vector3d tex_ray(double s, double t) { return {2.0 * s - 1.0, 2.0 * t - 1.0, 1.0}; }

  /// Whether rig-frame direction `d` falls inside the frustum.
  bool contains(const Eigen::Vector3d& d_rig, double tol = 1e-9) const {
    const Eigen::Vector3d c = orientation.transpose() * d_rig;
    if (!(c.z() > 0.0)) return false;
    const double lim = c.z() * (1.0 + tol);
    return std::abs(c.x()) <= lim && std::abs(c.y()) <= lim;
  }

  /// Continuous pixel of rig-frame direction `d`; nullopt behind the camera.
  std::optional<PixelCoord> project(const Eigen::Vector3d& d_rig) const {
    const Eigen::Vector3d c = orientation.transpose() * d_rig;
    if (!(c.z() > 0.0)) return std::nullopt;
    const double f = focal_px();
    return PixelCoord{center() + f * c.x() / c.z(), center() + f * c.y() / c.z()};
  }
};

struct CameraRig {
  std::vector<RigCamera> cameras;
  /// rig frame -> world; the rig frame coincides with the fisheye camera frame
  Pose rig_pose;

  void validate() const {
    if (!is_rotation(rig_pose.rotation)) throw InvalidPoseError("rig rotation is not orthonormal");
    if (!rig_pose.position.allFinite()) throw InvalidPoseError("rig position is not finite");
    for (const auto& c : cameras) {
      if (!is_rotation(c.orientation)) {
        throw InvalidPoseError("camera '" + c.name + "' orientation is not orthonormal");
      }
      if (c.resolution < 1) throw InvalidPoseError("camera '" + c.name + "' resolution must be >= 1");
    }
  }

  /// World pose of camera `i`.
  Pose camera_pose(std::size_t i) const {
    return {rig_pose.position, rig_pose.rotation * cameras.at(i).orientation};
  }
};

/// Index of the camera whose axis is closest to `d_rig` among the frustums
/// containing it; ties go to the lowest index.
inline std::optional<std::size_t> select_camera(const CameraRig& rig, const Eigen::Vector3d& d_rig) {
  std::optional<std::size_t> best;
  double best_cos = -2.0;
  for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
    const auto& cam = rig.cameras[i];
    if (!cam.contains(d_rig)) continue;
    const double c = cam.axis().dot(d_rig);
    if (c > best_cos) {
      best_cos = c;
      best = i;
    }
  }
  return best;
}

enum class RigPreset { quad45, cube5 };

inline std::string_view to_string(RigPreset preset) {
  return preset == RigPreset::quad45 ? "quad45" : "cube5";
}

inline std::optional<RigPreset> parse_rig_preset(std::string_view name) {
  if (name == "quad45") return RigPreset::quad45;
  if (name == "cube5") return RigPreset::cube5;
  return std::nullopt;
}

/// quad45: four faces of a cube turned 45 degrees about the vertical axis
/// (left, right, up, down); the forward axis runs along the left/right edge.
/// cube5: front face plus the four side faces, each side half used.
inline CameraRig make_rig(RigPreset preset, int resolution) {
  const double s = std::numbers::sqrt2 / 2.0;
  CameraRig rig;
  const auto add = [&](const char* name, Eigen::Vector3d fwd, Eigen::Vector3d down) {
    rig.cameras.push_back({look_rotation(fwd, down), resolution, name});
  };
  if (preset == RigPreset::quad45) {
    add("left", {-s, 0, s}, {0, 1, 0});
    add("right", {s, 0, s}, {0, 1, 0});
    add("up", {0, -1, 0}, {s, 0, s});
    add("down", {0, 1, 0}, {-s, 0, -s});
  } else {
    add("front", {0, 0, 1}, {0, 1, 0});
    add("right", {1, 0, 0}, {0, 1, 0});
    add("left", {-1, 0, 0}, {0, 1, 0});
    add("up", {0, -1, 0}, {0, 0, 1});
    add("down", {0, 1, 0}, {0, 0, -1});
  }
  return rig;
}

/// Quasi-random (spherical Fibonacci) unit directions with polar angle at most
/// theta_max, in the rig frame.
inline std::vector<Eigen::Vector3d> cap_directions(double theta_max, int count) {
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double z_min = std::cos(theta_max);
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (1.0 - z_min) * (i + 0.5) / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.emplace_back(rho * std::cos(phi), rho * std::sin(phi), z);
  }
  // The rim itself, where coverage is tightest.
  for (int i = 0; i < 64; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / 64.0;
    dirs.emplace_back(std::sin(theta_max) * std::cos(phi), std::sin(theta_max) * std::sin(phi),
                      std::cos(theta_max));
  }
  return dirs;
}

/// Directions within theta_max that no camera frustum contains.
inline std::vector<Eigen::Vector3d> uncovered_directions(const CameraRig& rig, double theta_max,
                                                         int samples = 4096) {
  std::vector<Eigen::Vector3d> missing;
  for (const auto& d : cap_directions(theta_max, samples)) {
    if (!select_camera(rig, d)) missing.push_back(d);
  }
  return missing;
}

inline void require_coverage(const CameraRig& rig, double theta_max, int samples = 4096) {
  const auto missing = uncovered_directions(rig, theta_max, samples);
  if (!missing.empty()) {
    const auto& d = missing.front();
    throw CoverageError("rig leaves " + std::to_string(missing.size()) +
                        " sampled directions uncovered within theta_max, e.g. (" +
                        std::to_string(d.x()) + ", " + std::to_string(d.y()) + ", " +
                        std::to_string(d.z()) + ")");
  }
}

}  // namespace omnisynth
