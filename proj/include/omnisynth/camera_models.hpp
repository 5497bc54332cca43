#pragma once

// Analytic fisheye projection laws and pixel <-> ray conversion.
//
// Camera frame: right-handed, +z is the optical axis, +x points right and
// +y points down. Image u grows to the right, v grows downwards.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace omnisynth {

enum class ProjectionModel { equidistant, stereographic, equisolid, orthographic };

class InvalidAngleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class InvalidDirectionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidCameraError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string_view to_string(ProjectionModel model) {
  switch (model) {
    case ProjectionModel::equidistant: return "equidistant";
    case ProjectionModel::stereographic: return "stereographic";
    case ProjectionModel::equisolid: return "equisolid";
    case ProjectionModel::orthographic: return "orthographic";
  }
  return "unknown";
}

inline std::optional<ProjectionModel> parse_projection_model(std::string_view name) {
  for (auto m : {ProjectionModel::equidistant, ProjectionModel::stereographic,
                 ProjectionModel::equisolid, ProjectionModel::orthographic}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

/// Largest polar angle for which the model's radius law is defined (inclusive
/// unless the model is stereographic, whose radius diverges at pi).
inline double model_theta_limit(ProjectionModel model) {
  return model == ProjectionModel::orthographic ? std::numbers::pi / 2 : std::numbers::pi;
}

/// Image-plane radius in pixels of a ray at polar angle `theta`.
inline double radius_from_theta(ProjectionModel model, double f, double theta) {
  const double limit = model_theta_limit(model);
  const bool open_bound = model == ProjectionModel::stereographic;
  if (!(theta >= 0.0) || theta > limit || (open_bound && theta >= limit)) {
    throw InvalidAngleError(std::string(to_string(model)) + ": theta " + std::to_string(theta) +
                            " outside [0, " + std::to_string(limit) + (open_bound ? ")" : "]"));
  }
  switch (model) {
    case ProjectionModel::equidistant: return f * theta;
    case ProjectionModel::stereographic: return 2.0 * f * std::tan(theta / 2.0);
    case ProjectionModel::equisolid: return 2.0 * f * std::sin(theta / 2.0);
    case ProjectionModel::orthographic: return f * std::sin(theta);
  }
  return 0.0;
}

/// Inverse of radius_from_theta. Stereographic accepts any finite radius.
inline double theta_from_radius(ProjectionModel model, double f, double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw OutOfRangeError(std::string(to_string(model)) + ": radius " + std::to_string(r) +
                          " is not a nonnegative finite value");
  }
  const auto out_of_range = [&](double r_max) {
    return OutOfRangeError(std::string(to_string(model)) + ": radius " + std::to_string(r) +
                           " exceeds model range " + std::to_string(r_max));
  };
  switch (model) {
    case ProjectionModel::equidistant:
      if (r > f * std::numbers::pi) throw out_of_range(f * std::numbers::pi);
      return r / f;
    case ProjectionModel::stereographic:
      return 2.0 * std::atan(r / (2.0 * f));
    case ProjectionModel::equisolid:
      if (r > 2.0 * f) throw out_of_range(2.0 * f);
      return 2.0 * std::asin(r / (2.0 * f));
    case ProjectionModel::orthographic:
      if (r > f) throw out_of_range(f);
      return std::asin(r / f);
  }
  return 0.0;
}

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Unit-norm ray direction in the camera frame.
class Direction3 {
 public:
  static constexpr double kNormTolerance = 1e-9;

  /// Throws InvalidDirectionError unless |(x, y, z)| = 1 within tolerance.
  Direction3(double x, double y, double z) : Direction3(Eigen::Vector3d(x, y, z)) {}

  explicit Direction3(const Eigen::Vector3d& v) : v_(v) {
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > kNormTolerance) {
      throw InvalidDirectionError("direction is not unit norm (|d| = " + std::to_string(v.norm()) +
                                  ")");
    }
  }

  static Direction3 normalized(const Eigen::Vector3d& v) {
    if (!v.allFinite() || v.norm() == 0.0) throw InvalidDirectionError("cannot normalize direction");
    return Direction3(Eigen::Vector3d(v.normalized()));
  }

  /// Direction with polar angle `theta` from +z and azimuth `phi` from +x
  /// towards +y.
  static Direction3 from_angles(double theta, double phi) {
    const double s = std::sin(theta);
    return Direction3(Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), std::cos(theta)));
  }

  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  const Eigen::Vector3d& vec() const { return v_; }

  double theta() const { return std::atan2(std::hypot(v_.x(), v_.y()), v_.z()); }
  double azimuth() const { return std::atan2(v_.y(), v_.x()); }

 private:
  Eigen::Vector3d v_;
};

struct FisheyeCameraSpec {
  ProjectionModel model = ProjectionModel::equidistant;
  double focal_length_px = 159.0;
  int width_px = 1024;
  int height_px = 1024;
  PixelCoord principal_point{511.5, 511.5};
  double theta_max = std::numbers::pi / 2;

  /// Spec with the principal point at the exact image center,
  /// ((w - 1) / 2, (h - 1) / 2). Validates.
  static FisheyeCameraSpec centered(ProjectionModel model, double focal_px, int width, int height,
                                    double theta_max = std::numbers::pi / 2) {
    FisheyeCameraSpec spec;
    spec.model = model;
    spec.focal_length_px = focal_px;
    spec.width_px = width;
    spec.height_px = height;
    spec.principal_point = {(width - 1) / 2.0, (height - 1) / 2.0};
    spec.theta_max = theta_max;
    spec.validate();
    return spec;
  }

  void validate() const {
    if (!(focal_length_px > 0.0) || !std::isfinite(focal_length_px)) {
      throw InvalidCameraError("focal length must be positive, got " +
                               std::to_string(focal_length_px));
    }
    if (width_px < 1 || height_px < 1) throw InvalidCameraError("image size must be positive");
    if (!(theta_max > 0.0) || theta_max > std::numbers::pi) {
      throw InvalidCameraError("theta_max must lie in (0, pi]");
    }
    if (model == ProjectionModel::orthographic && theta_max > std::numbers::pi / 2) {
      throw InvalidCameraError("orthographic model requires theta_max <= pi/2");
    }
    if (!std::isfinite(principal_point.u) || !std::isfinite(principal_point.v)) {
      throw InvalidCameraError("principal point must be finite");
    }
  }

  /// Radius of the image circle, r(theta_max). Infinite for a stereographic
  /// lens with theta_max = pi.
  double image_circle_radius() const {
    if (model == ProjectionModel::stereographic && theta_max >= std::numbers::pi) {
      return std::numeric_limits<double>::infinity();
    }
    return radius_from_theta(model, focal_length_px, theta_max);
  }

  /// Warning state: the image circle does not fit inside the frame.
  bool circle_exceeds_frame() const {
    return image_circle_radius() > std::min(width_px, height_px) / 2.0;
  }
};

/// Focal length that makes the image circle r(theta_max) touch the shorter
/// image side.
inline double focal_filling_frame(ProjectionModel model, int width, int height, double theta_max) {
  const double unit = radius_from_theta(model, 1.0, theta_max);
  return std::min(width, height) / 2.0 / unit;
}

/// Ray through pixel `p`, or nullopt when the pixel lies outside the image
/// circle (polar angle beyond theta_max).
inline std::optional<Direction3> pixel_to_ray(const FisheyeCameraSpec& spec, PixelCoord p) {
  const double dx = p.u - spec.principal_point.u;
  const double dy = p.v - spec.principal_point.v;
  const double r = std::hypot(dx, dy);
  if (!std::isfinite(r) || r > spec.image_circle_radius()) return std::nullopt;
  const double theta = std::min(theta_from_radius(spec.model, spec.focal_length_px, r), spec.theta_max);
  if (r == 0.0) return Direction3(0.0, 0.0, 1.0);
  const double s = std::sin(theta);
  return Direction3(Eigen::Vector3d(s * dx / r, s * dy / r, std::cos(theta)));
}

/// Pixel hit by `d` under the lens model, ignoring the FOV limit. The caller
/// guarantees theta is inside the model's domain.
inline PixelCoord project_unclipped(const FisheyeCameraSpec& spec, const Eigen::Vector3d& d) {
  const double rho = std::hypot(d.x(), d.y());
  const double theta = std::atan2(rho, d.z());
  const double r = radius_from_theta(spec.model, spec.focal_length_px, theta);
  if (rho == 0.0) return spec.principal_point;
  return {spec.principal_point.u + r * d.x() / rho, spec.principal_point.v + r * d.y() / rho};
}

/// Forward projection; nullopt when the ray is outside the field of view.
inline std::optional<PixelCoord> ray_to_pixel(const FisheyeCameraSpec& spec, const Direction3& d) {
  const double theta = d.theta();
  if (theta > spec.theta_max) return std::nullopt;
  if (spec.model == ProjectionModel::stereographic && theta >= std::numbers::pi) return std::nullopt;
  return project_unclipped(spec, d.vec());
}

}  // namespace omnisynth
