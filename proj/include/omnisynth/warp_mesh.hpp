#pragma once

// Precomputed warp meshes: each rig camera's image plane is gridded, and
// every grid vertex is carried through camera orientation -> rig ray ->
// fisheye projection. Texture coordinates keep the source grid position, so
// rasterizing the mesh with those coordinates reproduces the fisheye image.

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "omnisynth/camera_models.hpp"
#include "omnisynth/rig.hpp"

namespace omnisynth {

class MeshConsistencyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MeshVertex {
  PixelCoord position;  // fisheye image plane
  int camera = 0;
  std::array<double, 2> tex{};  // source camera texture coordinate in [0,1]^2
};

struct WarpMesh {
  std::vector<MeshVertex> vertices;
  std::vector<std::array<int, 3>> triangles;
  int resolution = 0;
  int camera_count = 0;
  /// Grid triangles before FOV clipping, 2 (resolution - 1)^2 per camera.
  long grid_triangles = 0;
  FisheyeCameraSpec spec;

  bool built_for(const FisheyeCameraSpec& other) const {
    return spec.model == other.model && spec.focal_length_px == other.focal_length_px &&
           spec.width_px == other.width_px && spec.height_px == other.height_px &&
           spec.principal_point.u == other.principal_point.u &&
           spec.principal_point.v == other.principal_point.v && spec.theta_max == other.theta_max;
  }
};

namespace detail {

class MeshBuilder {
 public:
  MeshBuilder(const FisheyeCameraSpec& spec, const CameraRig& rig, int resolution)
      : spec_(spec), rig_(rig), res_(resolution) {}

  WarpMesh build() {
    mesh_.resolution = res_;
    mesh_.camera_count = static_cast<int>(rig_.cameras.size());
    mesh_.spec = spec_;
    for (int c = 0; c < mesh_.camera_count; ++c) build_camera(c);
    return std::move(mesh_);
  }

 private:
  struct TexPoint {
    double s, t;
  };

  Eigen::Vector3d rig_ray(int camera, TexPoint p) const {
    return (rig_.cameras[camera].orientation * RigCamera::tex_ray(p.s, p.t)).normalized();
  }

  bool inside(int camera, TexPoint p) const {
    const Eigen::Vector3d d = rig_ray(camera, p);
    const double theta = std::atan2(std::hypot(d.x(), d.y()), d.z());
    if (spec_.model == ProjectionModel::stereographic && theta >= std::numbers::pi) return false;
    return theta <= spec_.theta_max;
  }

  int add_vertex(int camera, TexPoint p) {
    const PixelCoord pos = project_unclipped(spec_, rig_ray(camera, p));
    mesh_.vertices.push_back({pos, camera, {p.s, p.t}});
    return static_cast<int>(mesh_.vertices.size()) - 1;
  }

  TexPoint grid_point(int i, int j) const {
    return {static_cast<double>(i) / (res_ - 1), static_cast<double>(j) / (res_ - 1)};
  }

  int grid_vertex(int camera, int key) {
    auto it = grid_index_.find(key);
    if (it != grid_index_.end()) return it->second;
    const int v = add_vertex(camera, grid_point(key % res_, key / res_));
    grid_index_.emplace(key, v);
    return v;
  }

  double theta_of(int camera, TexPoint p) const {
    const Eigen::Vector3d d = rig_ray(camera, p);
    return std::atan2(std::hypot(d.x(), d.y()), d.z());
  }

  static bool in_square(TexPoint p) { return p.s >= 0.0 && p.s <= 1.0 && p.t >= 0.0 && p.t <= 1.0; }

  /// Boundary point reached from the outside point `out` by walking toward
  /// `dir`, found by bisection; absent if the walk leaves the face first.
  std::optional<TexPoint> walk_to_boundary(int camera, TexPoint out, TexPoint dir, double max_len) const {
    const int steps = 4 * res_;
    TexPoint in{};
    bool found = false;
    for (int k = 1; k <= steps; ++k) {
      const double len = max_len * k / steps;
      const TexPoint q{out.s + dir.s * len, out.t + dir.t * len};
      if (!in_square(q)) return std::nullopt;
      if (inside(camera, q)) {
        in = q;
        found = true;
        break;
      }
      out = q;
    }
    if (!found) return std::nullopt;
    for (int k = 0; k < 60; ++k) {
      const TexPoint mid{(in.s + out.s) / 2, (in.t + out.t) / 2};
      (inside(camera, mid) ? in : out) = mid;
    }
    return in;
  }

  /// Outside grid vertex moved onto the FOV boundary: along steepest descent
  /// of theta when that stays on the face, otherwise toward the face's most
  /// central point.
  int snapped_vertex(int camera, int key) {
    auto it = snapped_index_.find(key);
    if (it != snapped_index_.end()) return it->second;
    const TexPoint p = grid_point(key % res_, key / res_);
    const double h = 1e-6;
    TexPoint g{(theta_of(camera, {p.s + h, p.t}) - theta_of(camera, {p.s - h, p.t})) / (2 * h),
               (theta_of(camera, {p.s, p.t + h}) - theta_of(camera, {p.s, p.t - h})) / (2 * h)};
    const double gn = std::hypot(g.s, g.t);
    std::optional<TexPoint> q;
    if (gn > 0.0) q = walk_to_boundary(camera, p, {-g.s / gn, -g.t / gn}, std::numbers::sqrt2);
    if (!q && inside(camera, anchor_)) {
      const TexPoint d{anchor_.s - p.s, anchor_.t - p.t};
      const double dn = std::hypot(d.s, d.t);
      if (dn > 0.0) q = walk_to_boundary(camera, p, {d.s / dn, d.t / dn}, dn);
    }
    const int v = q ? add_vertex(camera, *q) : -1;
    snapped_index_.emplace(key, v);
    return v;
  }

  /// Most central point of the face (smallest theta) on a coarse lattice.
  TexPoint central_point(int camera) const {
    TexPoint best{0.5, 0.5};
    double best_theta = theta_of(camera, best);
    const int n = 64;
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        const TexPoint q{static_cast<double>(i) / n, static_cast<double>(j) / n};
        const double th = theta_of(camera, q);
        if (th < best_theta) {
          best_theta = th;
          best = q;
        }
      }
    }
    return best;
  }

  void build_camera(int camera) {
    grid_index_.clear();
    snapped_index_.clear();
    anchor_ = central_point(camera);
    std::vector<char> in(static_cast<std::size_t>(res_) * res_);
    for (int j = 0; j < res_; ++j) {
      for (int i = 0; i < res_; ++i) in[j * res_ + i] = inside(camera, grid_point(i, j));
    }
    for (int j = 0; j + 1 < res_; ++j) {
      for (int i = 0; i + 1 < res_; ++i) {
        const int a = j * res_ + i, b = a + 1, c = a + res_ + 1, d = a + res_;
        for (const auto& tri : {std::array{a, b, c}, std::array{a, c, d}}) {
          ++mesh_.grid_triangles;
          clip_triangle(camera, tri, in);
        }
      }
    }
  }

  /// Keeps triangles with at least one vertex inside the FOV; their outside
  /// vertices are replaced by snapped boundary vertices.
  void clip_triangle(int camera, const std::array<int, 3>& tri, const std::vector<char>& in) {
    if (!in[tri[0]] && !in[tri[1]] && !in[tri[2]]) return;
    std::array<int, 3> out{};
    for (int k = 0; k < 3; ++k) {
      out[k] = in[tri[k]] ? grid_vertex(camera, tri[k]) : snapped_vertex(camera, tri[k]);
      if (out[k] < 0) return;
    }
    mesh_.triangles.push_back(out);
  }

  const FisheyeCameraSpec& spec_;
  const CameraRig& rig_;
  int res_;
  WarpMesh mesh_;
  std::map<int, int> grid_index_;
  std::map<int, int> snapped_index_;
  TexPoint anchor_{0.5, 0.5};
};

}  // namespace detail

/// Builds the warp mesh of `rig` for `spec` with a resolution x resolution
/// vertex grid per camera. Grid vertices whose rays exceed theta_max are
/// clipped: triangles entirely outside are dropped and outside vertices of
/// the rest are moved onto the FOV boundary.
inline WarpMesh build_warp_mesh(const FisheyeCameraSpec& spec, const CameraRig& rig, int resolution) {
  spec.validate();
  rig.validate();
  if (resolution < 2) throw std::invalid_argument("mesh resolution must be >= 2");
  require_coverage(rig, spec.theta_max);
  return detail::MeshBuilder(spec, rig, resolution).build();
}

/// Debug text dump: header, one "v x y camera s t" line per vertex and one
/// "f a b c" line per triangle. Not a stable format.
inline void dump_mesh(const WarpMesh& mesh, std::ostream& os) {
  os << "# omnisynth warp mesh\n";
  os << "resolution " << mesh.resolution << "\ncameras " << mesh.camera_count << "\nvertices "
     << mesh.vertices.size() << "\ntriangles " << mesh.triangles.size() << "\n";
  os.precision(17);
  for (const auto& v : mesh.vertices) {
    os << "v " << v.position.u << ' ' << v.position.v << ' ' << v.camera << ' ' << v.tex[0] << ' ' << v.tex[1]
       << '\n';
  }
  for (const auto& t : mesh.triangles) os << "f " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace omnisynth
