#pragma once

// Immutable scene of axis-aligned boxes, spheres and planes with a BVH for
// nearest-hit ray queries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "omnisynth/image.hpp"
#include "omnisynth/layer_map.hpp"

namespace omnisynth {

struct Box {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
};

struct Sphere {
  Eigen::Vector3d center;
  double radius = 1.0;
};

/// Points x with normal . x = offset.
struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitY();
  double offset = 0.0;
};

using Shape = std::variant<Box, Sphere, Plane>;

struct SceneObject {
  Shape shape;
  int layer_id = 0;
  Rgb8 albedo;
};

struct DirectionalLight {
  /// Direction the light travels (unit).
  Eigen::Vector3d direction = Eigen::Vector3d(-0.4, -1.0, -0.3).normalized();
  double intensity = 1.0;
};

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int object = -1;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  bool valid() const { return object >= 0; }
};

namespace detail {

struct Aabb {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Aabb& o) {
    lo = lo.cwiseMin(o.lo);
    hi = hi.cwiseMax(o.hi);
  }
  Eigen::Vector3d centroid() const { return 0.5 * (lo + hi); }
};

inline Aabb bounds_of(const Shape& s) {
  if (const auto* b = std::get_if<Box>(&s)) return {b->min, b->max};
  const auto& sp = std::get<Sphere>(s);
  return {sp.center.array() - sp.radius, sp.center.array() + sp.radius};
}

/// Slab test; returns the entry distance clamped to t_min, or nullopt.
inline std::optional<double> slab_entry(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, const Ray& ray,
                                        const Eigen::Vector3d& inv, double t_min, double t_max) {
  double t0 = t_min, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    if (ray.direction[a] == 0.0) {
      if (ray.origin[a] < lo[a] || ray.origin[a] > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - ray.origin[a]) * inv[a];
    double tb = (hi[a] - ray.origin[a]) * inv[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

inline std::optional<std::pair<double, Eigen::Vector3d>> intersect(const Box& b, const Ray& ray,
                                                                   double t_min) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int enter_axis = -1, exit_axis = -1;
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    if (d == 0.0) {
      if (ray.origin[a] < b.min[a] || ray.origin[a] > b.max[a]) return std::nullopt;
      continue;
    }
    double ta = (b.min[a] - ray.origin[a]) / d;
    double tb = (b.max[a] - ray.origin[a]) / d;
    if (ta > tb) std::swap(ta, tb);
    if (ta > t_enter) {
      t_enter = ta;
      enter_axis = a;
    }
    if (tb < t_exit) {
      t_exit = tb;
      exit_axis = a;
    }
  }
  if (t_enter > t_exit) return std::nullopt;
  double t;
  int axis;
  if (t_enter >= t_min) {
    t = t_enter;
    axis = enter_axis;
  } else if (t_exit >= t_min) {
    t = t_exit;
    axis = exit_axis;
  } else {
    return std::nullopt;
  }
  if (axis < 0) return std::nullopt;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[axis] = ray.direction[axis] > 0.0 ? -1.0 : 1.0;
  return std::pair{t, n};
}

inline std::optional<std::pair<double, Eigen::Vector3d>> intersect(const Sphere& s, const Ray& ray,
                                                                   double t_min) {
  const Eigen::Vector3d oc = ray.origin - s.center;
  const double b = oc.dot(ray.direction);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  double t = -b - root;
  if (t < t_min) t = -b + root;
  if (t < t_min) return std::nullopt;
  return std::pair{t, ((ray.origin + t * ray.direction - s.center) / s.radius).eval()};
}

inline std::optional<std::pair<double, Eigen::Vector3d>> intersect(const Plane& p, const Ray& ray,
                                                                   double t_min) {
  const double denom = p.normal.dot(ray.direction);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = (p.offset - p.normal.dot(ray.origin)) / denom;
  if (t < t_min) return std::nullopt;
  return std::pair{t, p.normal};
}

}  // namespace detail

class SceneError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Scene {
 public:
  Scene() : Scene(canonical_layer_map(1), {}, {}, 0, 0) {}

  Scene(LayerMap layers, std::vector<SceneObject> objects, DirectionalLight light,
        int background_layer, std::uint64_t seed)
      : layers_(std::move(layers)), objects_(std::move(objects)), light_(light),
        background_layer_(background_layer), seed_(seed) {
    const Layer* bg = layers_.find(background_layer_);
    if (bg == nullptr) throw SceneError("background layer " + std::to_string(background_layer) + " missing");
    background_color_ = bg->color;
    for (const auto& o : objects_) {
      if (layers_.find(o.layer_id) == nullptr) {
        throw SceneError("object layer " + std::to_string(o.layer_id) + " missing from layer map");
      }
    }
    build_bvh();
  }

  const LayerMap& layers() const { return layers_; }
  const std::vector<SceneObject>& objects() const { return objects_; }
  const DirectionalLight& light() const { return light_; }
  int background_layer() const { return background_layer_; }
  Rgb8 background_color() const { return background_color_; }
  Rgb8 sky_rgb() const { return sky_rgb_; }
  double ambient() const { return ambient_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t count_layer(int layer_id) const {
    return static_cast<std::size_t>(std::ranges::count(objects_, layer_id, &SceneObject::layer_id));
  }

  /// Nearest hit with t >= t_min. Equal distances resolve to the lower
  /// object index.
  Hit intersect(const Ray& ray, double t_min) const {
    Hit best;
    const auto consider = [&](int idx) {
      const auto r = std::visit([&](const auto& s) { return detail::intersect(s, ray, t_min); },
                                objects_[idx].shape);
      if (r && (r->first < best.t || (r->first == best.t && idx < best.object))) {
        best.t = r->first;
        best.object = idx;
        best.normal = r->second;
      }
    };
    for (int idx : unbounded_) consider(idx);
    if (nodes_.empty()) return best;

    const Eigen::Vector3d inv = ray.direction.cwiseInverse();
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!detail::slab_entry(node.box.lo, node.box.hi, ray, inv, t_min, best.t)) continue;
      if (node.count > 0) {
        for (int i = 0; i < node.count; ++i) consider(order_[node.first + i]);
      } else {
        stack[top++] = node.first;
        stack[top++] = node.first + 1;
      }
    }
    return best;
  }

  /// Lambertian plus ambient shade of a hit.
  Rgb8 shade(const Hit& hit, const Eigen::Vector3d& ray_dir) const {
    if (!hit.valid()) return sky_rgb_;
    Eigen::Vector3d n = hit.normal;
    if (n.dot(ray_dir) > 0.0) n = -n;
    const double diffuse = std::max(0.0, n.dot(-light_.direction)) * light_.intensity;
    const double k = ambient_ + (1.0 - ambient_) * diffuse;
    const Rgb8 a = objects_[hit.object].albedo;
    return {detail::to_byte(a.r * k), detail::to_byte(a.g * k), detail::to_byte(a.b * k)};
  }

  Rgb8 label_color(const Hit& hit) const {
    if (!hit.valid()) return background_color_;
    return layers_.find(objects_[hit.object].layer_id)->color;
  }

 private:
  struct Node {
    detail::Aabb box;
    int first = 0;  // leaf: offset into order_; inner: index of left child
    int count = 0;  // > 0 for leaves
  };

  void build_bvh() {
    bounds_.resize(objects_.size());
    for (int i = 0; i < static_cast<int>(objects_.size()); ++i) {
      if (std::holds_alternative<Plane>(objects_[i].shape)) {
        unbounded_.push_back(i);
      } else {
        order_.push_back(i);
        bounds_[i] = detail::bounds_of(objects_[i].shape);
      }
    }
    if (order_.empty()) return;
    nodes_.reserve(2 * order_.size());
    nodes_.emplace_back();
    split(0, 0, static_cast<int>(order_.size()), 0);
  }

  void split(int node_index, int begin, int end, int depth) {
    detail::Aabb box, centroids;
    for (int i = begin; i < end; ++i) {
      box.grow(bounds_[order_[i]]);
      const Eigen::Vector3d c = bounds_[order_[i]].centroid();
      centroids.grow({c, c});
    }
    nodes_[node_index].box = box;
    if (end - begin <= kLeafSize || depth >= 60) {
      nodes_[node_index].first = begin;
      nodes_[node_index].count = end - begin;
      return;
    }
    int axis = 0;
    (centroids.hi - centroids.lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
      const double ca = bounds_[a].centroid()[axis], cb = bounds_[b].centroid()[axis];
      return ca < cb || (ca == cb && a < b);
    });
    const int left = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    nodes_[node_index].first = left;
    nodes_[node_index].count = 0;
    split(left, begin, mid, depth + 1);
    split(left + 1, mid, end, depth + 1);
  }

  static constexpr int kLeafSize = 4;

  LayerMap layers_;
  std::vector<SceneObject> objects_;
  DirectionalLight light_;
  int background_layer_ = 0;
  Rgb8 background_color_;
  Rgb8 sky_rgb_{135, 206, 235};
  double ambient_ = 0.35;
  std::uint64_t seed_ = 0;

  std::vector<int> unbounded_;
  std::vector<int> order_;
  std::vector<detail::Aabb> bounds_;
  std::vector<Node> nodes_;
};

}  // namespace omnisynth
