#pragma once

// Fisheye composition of rig face renders, either by rasterizing a warp mesh
// or by per-pixel ray lookup. Labels are sampled nearest-neighbor at every
// stage; rgb and depth are sampled bilinearly.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "omnisynth/camera_models.hpp"
#include "omnisynth/image.hpp"
#include "omnisynth/layer_map.hpp"
#include "omnisynth/parallel.hpp"
#include "omnisynth/renderer.hpp"
#include "omnisynth/rig.hpp"
#include "omnisynth/warp_mesh.hpp"

namespace omnisynth {

class InputArityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ComposeMethod { mesh, per_pixel };

inline std::string_view to_string(ComposeMethod m) { return m == ComposeMethod::mesh ? "mesh" : "per_pixel"; }

/// A composed fisheye channel and its void mask (1 = no content).
struct ComposedChannel {
  ChannelImage image;
  MaskImage void_mask;
};

/// Pixel values carried by void pixels.
inline Rgb8 void_value_rgb() { return {0, 0, 0}; }
inline Rgb8 void_value_label() { return kVoidColor; }
inline float void_value_depth() { return 1.0f; }

/// 1 where the pixel center is outside the field of view.
inline MaskImage fov_void_mask(const FisheyeCameraSpec& spec) {
  MaskImage mask(spec.width_px, spec.height_px);
  for (int y = 0; y < spec.height_px; ++y) {
    for (int x = 0; x < spec.width_px; ++x) mask(x, y) = pixel_to_ray(spec, {double(x), double(y)}) ? 0 : 1;
  }
  return mask;
}

namespace detail {

template <typename Pixel>
Pixel sample_face(const Image<Pixel>& face, double x, double y, bool nearest) {
  if (nearest) return sample_nearest(face, x, y);
  return sample_bilinear(face, x, y);
}

inline void check_faces(std::span<const ChannelImage> faces, const CameraRig& rig, ChannelKind kind) {
  if (faces.size() != rig.cameras.size()) {
    throw InputArityError("expected " + std::to_string(rig.cameras.size()) + " face images, got " +
                          std::to_string(faces.size()));
  }
  for (std::size_t i = 0; i < faces.size(); ++i) {
    if (faces[i].kind() != kind) throw InputArityError("face " + std::to_string(i) + " has the wrong channel kind");
    const int n = rig.cameras[i].resolution;
    if (faces[i].width() != n || faces[i].height() != n) {
      throw InputArityError("face " + std::to_string(i) + " does not match its camera resolution");
    }
  }
}

template <typename Pixel>
std::vector<const Image<Pixel>*> face_planes(std::span<const ChannelImage> faces) {
  std::vector<const Image<Pixel>*> planes;
  for (const auto& f : faces) {
    if constexpr (std::is_same_v<Pixel, float>) {
      planes.push_back(&f.depth());
    } else {
      planes.push_back(&f.color());
    }
  }
  return planes;
}

template <typename Pixel>
ChannelImage wrap(ChannelKind kind, Image<Pixel> img) {
  if constexpr (std::is_same_v<Pixel, float>) {
    return ChannelImage(std::move(img));
  } else {
    return ChannelImage(kind, std::move(img));
  }
}

/// Reference sample of the rig at fisheye pixel (x, y); nullopt for void.
template <typename Pixel>
std::optional<Pixel> sample_rig(const std::vector<const Image<Pixel>*>& faces, const CameraRig& rig,
                                const FisheyeCameraSpec& spec, double x, double y, bool nearest) {
  const auto ray = pixel_to_ray(spec, {x, y});
  if (!ray) return std::nullopt;
  const auto cam = select_camera(rig, ray->vec());
  if (!cam) return std::nullopt;
  const auto p = rig.cameras[*cam].project(ray->vec());
  return sample_face(*faces[*cam], p->u, p->v, nearest);
}

template <typename Pixel>
ComposedChannel compose_per_pixel_impl(std::span<const ChannelImage> faces, const FisheyeCameraSpec& spec,
                                       const CameraRig& rig, ChannelKind kind, Pixel void_value, unsigned threads) {
  const auto planes = face_planes<Pixel>(faces);
  const bool nearest = kind == ChannelKind::label;
  Image<Pixel> out(spec.width_px, spec.height_px, void_value);
  MaskImage mask(spec.width_px, spec.height_px, 1);
  parallel_for(spec.height_px, threads, [&](int y) {
    for (int x = 0; x < spec.width_px; ++x) {
      if (auto v = sample_rig(planes, rig, spec, x, y, nearest)) {
        out(x, y) = *v;
        mask(x, y) = 0;
      }
    }
  });
  return {wrap(kind, std::move(out)), std::move(mask)};
}

struct RasterTriangle {
  std::array<Eigen::Vector2d, 3> p;
  std::array<std::array<double, 2>, 3> tex;
  int camera;
  double area2;  // twice the signed area
  int x0, x1, y0, y1;
};

template <typename Pixel>
ComposedChannel compose_mesh_impl(std::span<const ChannelImage> faces, const WarpMesh& mesh,
                                  const FisheyeCameraSpec& spec, ChannelKind kind, Pixel void_value,
                                  unsigned threads) {
  const auto planes = face_planes<Pixel>(faces);
  const bool nearest = kind == ChannelKind::label;
  const int w = spec.width_px, h = spec.height_px;

  std::vector<RasterTriangle> tris;
  tris.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    RasterTriangle r{};
    double minx = 1e300, maxx = -1e300, miny = 1e300, maxy = -1e300;
    for (int k = 0; k < 3; ++k) {
      const auto& v = mesh.vertices[t[k]];
      r.p[k] = {v.position.u, v.position.v};
      r.tex[k] = v.tex;
      minx = std::min(minx, v.position.u);
      maxx = std::max(maxx, v.position.u);
      miny = std::min(miny, v.position.v);
      maxy = std::max(maxy, v.position.v);
    }
    r.camera = mesh.vertices[t[0]].camera;
    const Eigen::Vector2d e1 = r.p[1] - r.p[0], e2 = r.p[2] - r.p[0];
    r.area2 = e1.x() * e2.y() - e1.y() * e2.x();
    if (std::abs(r.area2) < 1e-14) continue;
    r.x0 = std::max(0, static_cast<int>(std::ceil(minx - 1e-9)));
    r.x1 = std::min(w - 1, static_cast<int>(std::floor(maxx + 1e-9)));
    r.y0 = std::max(0, static_cast<int>(std::ceil(miny - 1e-9)));
    r.y1 = std::min(h - 1, static_cast<int>(std::floor(maxy + 1e-9)));
    if (r.x0 > r.x1 || r.y0 > r.y1) continue;
    tris.push_back(r);
  }

  const MaskImage fov_void = fov_void_mask(spec);
  Image<Pixel> out(w, h, void_value);
  MaskImage mask(w, h, 1);
  // Per-pixel winner: smallest squared camera-plane radius (most central
  // camera), then lowest camera index, then first triangle.
  Image<double> best(w, h, std::numeric_limits<double>::infinity());
  Image<int> best_cam(w, h, std::numeric_limits<int>::max());
  Image<std::array<double, 2>> best_tex(w, h);

  const int band = 16;
  const int bands = (h + band - 1) / band;
  parallel_for(bands, threads, [&](int b) {
    const int by0 = b * band, by1 = std::min(h - 1, by0 + band - 1);
    for (const auto& r : tris) {
      if (r.y1 < by0 || r.y0 > by1) continue;
      for (int y = std::max(r.y0, by0); y <= std::min(r.y1, by1); ++y) {
        for (int x = r.x0; x <= r.x1; ++x) {
          const Eigen::Vector2d q(x, y);
          const auto edge = [&](int i, int j) {
            const Eigen::Vector2d a = r.p[j] - r.p[i], c = q - r.p[i];
            return (a.x() * c.y() - a.y() * c.x()) / r.area2;
          };
          const double l0 = edge(1, 2), l1 = edge(2, 0), l2 = edge(0, 1);
          constexpr double tol = 1e-9;
          if (l0 < -tol || l1 < -tol || l2 < -tol) continue;
          const double s = l0 * r.tex[0][0] + l1 * r.tex[1][0] + l2 * r.tex[2][0];
          const double t = l0 * r.tex[0][1] + l1 * r.tex[1][1] + l2 * r.tex[2][1];
          const double cx = 2 * s - 1, cy = 2 * t - 1;
          const double prio = cx * cx + cy * cy;
          if (prio < best(x, y) || (prio == best(x, y) && r.camera < best_cam(x, y))) {
            best(x, y) = prio;
            best_cam(x, y) = r.camera;
            best_tex(x, y) = {s, t};
          }
        }
      }
    }
  });

  parallel_for(h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (best_cam(x, y) == std::numeric_limits<int>::max() || fov_void(x, y)) continue;
      const auto& face = *planes[best_cam(x, y)];
      const int n = face.width();
      const auto [s, t] = best_tex(x, y);
      out(x, y) = sample_face(face, s * n - 0.5, t * n - 0.5, nearest);
      mask(x, y) = 0;
    }
  });
  return {wrap(kind, std::move(out)), std::move(mask)};
}

}  // namespace detail

/// Reference composition: per output pixel, pixel_to_ray, pick the most
/// central containing camera, project and sample.
inline ComposedChannel compose_per_pixel(std::span<const ChannelImage> faces, const FisheyeCameraSpec& spec,
                                         const CameraRig& rig, ChannelKind kind, unsigned threads = 1) {
  spec.validate();
  detail::check_faces(faces, rig, kind);
  switch (kind) {
    case ChannelKind::rgb: return detail::compose_per_pixel_impl(faces, spec, rig, kind, void_value_rgb(), threads);
    case ChannelKind::label:
      return detail::compose_per_pixel_impl(faces, spec, rig, kind, void_value_label(), threads);
    case ChannelKind::depth:
      return detail::compose_per_pixel_impl(faces, spec, rig, kind, void_value_depth(), threads);
  }
  throw std::logic_error("unknown channel kind");
}

/// Mesh composition: rasterizes `mesh` into the fisheye plane with linearly
/// interpolated texture coordinates. Pixels covered by no triangle are void.
inline ComposedChannel compose_mesh(std::span<const ChannelImage> faces, const WarpMesh& mesh,
                                    const FisheyeCameraSpec& spec, ChannelKind kind, unsigned threads = 1) {
  spec.validate();
  if (!mesh.built_for(spec)) throw MeshConsistencyError("warp mesh was built for a different fisheye spec");
  if (static_cast<int>(faces.size()) != mesh.camera_count) {
    throw MeshConsistencyError("warp mesh expects " + std::to_string(mesh.camera_count) + " faces, got " +
                               std::to_string(faces.size()));
  }
  for (const auto& f : faces) {
    if (f.kind() != kind) throw InputArityError("face image has the wrong channel kind");
  }
  switch (kind) {
    case ChannelKind::rgb: return detail::compose_mesh_impl(faces, mesh, spec, kind, void_value_rgb(), threads);
    case ChannelKind::label: return detail::compose_mesh_impl(faces, mesh, spec, kind, void_value_label(), threads);
    case ChannelKind::depth: return detail::compose_mesh_impl(faces, mesh, spec, kind, void_value_depth(), threads);
  }
  throw std::logic_error("unknown channel kind");
}

/// rgb / label / depth channels of one capture plus the shared void mask.
struct FisheyeFrame {
  ChannelImage rgb;
  ChannelImage label;
  ChannelImage depth;
  MaskImage void_mask;
  FisheyeCameraSpec spec;
  std::string frame_id;
  /// In-FOV pixels the mesh left uncovered (rim slivers), filled by direct lookup.
  long rim_fills = 0;
};

struct ComposerSettings {
  ComposeMethod method = ComposeMethod::mesh;
  int mesh_resolution = 128;
  DepthRange range;
  unsigned threads = 1;
};

/// Renders and composes frames for a fixed fisheye spec and rig layout; the
/// warp mesh is built once and reused.
class FisheyeComposer {
 public:
  FisheyeComposer(FisheyeCameraSpec spec, CameraRig rig, ComposerSettings settings)
      : spec_(spec), rig_(std::move(rig)), settings_(settings) {
    spec_.validate();
    rig_.validate();
    settings_.range.validate();
    require_coverage(rig_, spec_.theta_max);
    if (settings_.method == ComposeMethod::mesh) mesh_ = build_warp_mesh(spec_, rig_, settings_.mesh_resolution);
  }

  const FisheyeCameraSpec& spec() const { return spec_; }
  const CameraRig& rig() const { return rig_; }
  const std::optional<WarpMesh>& mesh() const { return mesh_; }

  FisheyeFrame compose(const Scene& scene, const Pose& rig_pose, std::string frame_id) const {
    CameraRig posed = rig_;
    posed.rig_pose = rig_pose;
    const RigRender faces = render_rig(scene, posed, {ChannelKind::rgb, ChannelKind::label, ChannelKind::depth},
                                       settings_.range, spec_.theta_max, settings_.threads);
    FisheyeFrame frame;
    frame.spec = spec_;
    frame.frame_id = std::move(frame_id);
    frame.void_mask = fov_void_mask(spec_);
    long fills = 0;
    frame.rgb = compose_kind(faces, ChannelKind::rgb, frame.void_mask, fills);
    frame.depth = compose_kind(faces, ChannelKind::depth, frame.void_mask, fills);
    fills = 0;
    frame.label = compose_kind(faces, ChannelKind::label, frame.void_mask, fills);
    frame.rim_fills = fills;
    return frame;
  }

 private:
  ChannelImage compose_kind(const RigRender& faces, ChannelKind kind, const MaskImage& void_mask,
                            long& rim_fills) const {
    std::vector<ChannelImage> planes;
    planes.reserve(faces.size());
    for (const auto& f : faces) planes.push_back(f.at(kind));
    ComposedChannel c = mesh_ ? compose_mesh(planes, *mesh_, spec_, kind, settings_.threads)
                              : compose_per_pixel(planes, spec_, rig_, kind, settings_.threads);
    if (kind == ChannelKind::depth) {
      fill_and_void(c.image.depth(), c.void_mask, void_mask, detail::face_planes<float>(planes), false,
                    void_value_depth(), rim_fills);
    } else {
      fill_and_void(c.image.color(), c.void_mask, void_mask, detail::face_planes<Rgb8>(planes),
                    kind == ChannelKind::label, kind == ChannelKind::label ? void_value_label() : void_value_rgb(),
                    rim_fills);
    }
    return std::move(c.image);
  }

  /// Makes the channel's void set equal the FOV void mask.
  template <typename Pixel>
  void fill_and_void(Image<Pixel>& img, const MaskImage& composed_void, const MaskImage& fov_void,
                     const std::vector<const Image<Pixel>*>& planes, bool nearest, Pixel void_value,
                     long& rim_fills) const {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        if (fov_void(x, y)) {
          img(x, y) = void_value;
        } else if (composed_void(x, y)) {
          if (auto v = detail::sample_rig(planes, rig_, spec_, x, y, nearest)) img(x, y) = *v;
          ++rim_fills;
        }
      }
    }
  }

  FisheyeCameraSpec spec_;
  CameraRig rig_;
  ComposerSettings settings_;
  std::optional<WarpMesh> mesh_;
};

/// One-shot frame composition (builds the warp mesh each call).
inline FisheyeFrame compose_frame(const Scene& scene, const CameraRig& rig, const FisheyeCameraSpec& spec,
                                  DepthRange range, std::string frame_id, ComposeMethod method,
                                  int mesh_resolution = 128, unsigned threads = 1) {
  FisheyeComposer composer(spec, rig, {method, mesh_resolution, range, threads});
  return composer.compose(scene, rig.rig_pose, std::move(frame_id));
}

}  // namespace omnisynth
