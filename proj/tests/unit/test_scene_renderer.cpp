#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "omnisynth/city.hpp"
#include "omnisynth/renderer.hpp"

using namespace omnisynth;

namespace {

// Flattens a scene's objects to bytes for bitwise comparison.
std::vector<double> flatten(const Scene& s) {
  std::vector<double> out;
  for (const auto& o : s.objects()) {
    out.push_back(static_cast<double>(o.shape.index()));
    std::visit(
        [&](const auto& sh) {
          using T = std::decay_t<decltype(sh)>;
          if constexpr (std::is_same_v<T, Box>) {
            for (int k = 0; k < 3; ++k) out.insert(out.end(), {sh.min[k], sh.max[k]});
          } else if constexpr (std::is_same_v<T, Sphere>) {
            for (int k = 0; k < 3; ++k) out.push_back(sh.center[k]);
            out.push_back(sh.radius);
          } else {
            for (int k = 0; k < 3; ++k) out.push_back(sh.normal[k]);
            out.push_back(sh.offset);
          }
        },
        o.shape);
    out.insert(out.end(), {static_cast<double>(o.layer_id), static_cast<double>(o.albedo.r),
                           static_cast<double>(o.albedo.g), static_cast<double>(o.albedo.b)});
  }
  return out;
}

Scene empty_scene() { return Scene(canonical_layer_map(6), {}, {}, 0, 0); }

RigCamera forward_camera(int n) { return {Eigen::Matrix3d::Identity(), n, "fwd"}; }

Pose level_pose(double height) {
  return {Eigen::Vector3d(0, height, 0), look_rotation(Eigen::Vector3d::UnitZ(), -Eigen::Vector3d::UnitY())};
}

}  // namespace

TEST(GenerateCity, Deterministic) {
  const auto a = generate_city({});
  const auto b = generate_city({});
  const auto fa = flatten(a), fb = flatten(b);
  ASSERT_EQ(fa.size(), fb.size());
  EXPECT_EQ(std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(double)), 0);
  EXPECT_EQ(a.layers(), b.layers());
  CityConfig other;
  other.seed = 2;
  EXPECT_NE(flatten(generate_city(other)), fa);
}

TEST(GenerateCity, RequiredLayersPresent) {
  const auto s = generate_city({});
  for (const char* name : {"road", "sidewalk", "terrain", "building", "vehicle", "sky"}) {
    EXPECT_NE(s.layers().find(std::string_view(name)), nullptr) << name;
  }
  EXPECT_EQ(s.layers().find(s.background_layer())->name, "sky");
  for (const char* name : {"road", "sidewalk", "terrain", "building", "vehicle"}) {
    EXPECT_GT(s.count_layer(s.layers().find(std::string_view(name))->id), 0u) << name;
  }
}

TEST(GenerateCity, EightLayers) {
  CityConfig cfg;
  cfg.layer_count = 8;
  const auto s = generate_city(cfg);
  EXPECT_EQ(s.layers().size(), 8u);
  std::set<std::uint32_t> colors;
  for (const auto& l : s.layers().layers()) colors.insert(pack(l.color));
  EXPECT_EQ(colors.size(), 8u);
  EXPECT_EQ(layer_map_from_json(nlohmann::json::parse(to_json(s.layers()).dump())), s.layers());
}

TEST(GenerateCity, CapacityAndDensityErrors) {
  CityConfig cfg;
  cfg.layer_count = 33;
  EXPECT_THROW(generate_city(cfg), CapacityError);
  cfg.layer_count = 10;
  cfg.vehicle_density = -0.1;
  EXPECT_THROW(generate_city(cfg), std::invalid_argument);
}

TEST(GenerateCity, ZeroBuildingDensityHasNoBuildingPixels) {
  CityConfig cfg;
  cfg.building_density = 0.0;
  const auto s = generate_city(cfg);
  const int building = s.layers().find(std::string_view("building"))->id;
  EXPECT_EQ(s.count_layer(building), 0u);
  const Rgb8 bc = s.layers().find(building)->color;
  auto rig = make_rig(RigPreset::cube5, 48);
  for (const auto& p : scripted_drive(cfg, {}, 20.0)) {
    if (static_cast<long>(p.time * 10) % 40 != 0) continue;
    rig.rig_pose = p.pose;
    for (const auto& face : render_rig(s, rig, {ChannelKind::label}, {}, std::numbers::pi / 2)) {
      for (Rgb8 c : face.at(ChannelKind::label).color().pixels()) ASSERT_NE(c, bc);
    }
  }
}

TEST(DepthNormalize, Examples) {
  EXPECT_EQ(depth_normalize(0.5, 0.5, 10), 0.0);
  EXPECT_EQ(depth_normalize(10, 0.5, 10), 1.0);
  EXPECT_DOUBLE_EQ(depth_normalize(51, 1, 101), 0.5);
  EXPECT_EQ(depth_normalize(std::numeric_limits<double>::infinity(), 1, 101), 1.0);
  EXPECT_EQ(depth_normalize(500, 1, 101), 1.0);
  EXPECT_EQ(depth_normalize(0.1, 1, 101), 0.0);
  EXPECT_THROW(depth_normalize(1, 2, 1), std::invalid_argument);
  EXPECT_THROW(depth_normalize(1, 0, 1), std::invalid_argument);
}

TEST(RenderChannel, EmptySceneIsBackground) {
  const auto s = empty_scene();
  const auto img = render_channel(s, forward_camera(32), level_pose(1), ChannelKind::label, {});
  for (Rgb8 c : img.color().pixels()) EXPECT_EQ(c, s.background_color());
  const auto depth = render_channel(s, forward_camera(32), level_pose(1), ChannelKind::depth, {});
  for (float d : depth.depth().pixels()) EXPECT_EQ(d, 1.0f);
}

TEST(RenderChannel, GroundPlaneHorizon) {
  const LayerMap layers = canonical_layer_map(6);
  const int road = layers.find(std::string_view("road"))->id;
  const Scene s(layers, {{Plane{}, road, {100, 100, 100}}}, {}, 0, 0);
  const int n = 64;
  const double h = 1.6;
  const DepthRange range{0.1, 200};
  const auto ch = render_channels(s, forward_camera(n), level_pose(h), {ChannelKind::label, ChannelKind::depth}, range);
  const auto& label = ch.at(ChannelKind::label).color();
  const auto& depth = ch.at(ChannelKind::depth).depth();
  const double c = (n - 1) / 2.0, f = n / 2.0;
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      // Analytic: the ray (x, y, 1) descends iff y > 0, hitting y = 0 at t = h |r| / y.
      const double x = (u - c) / f, y = (v - c) / f;
      if (y > 0) {
        EXPECT_EQ(label(u, v), layers.find(road)->color);
        const double t = h * std::sqrt(x * x + y * y + 1) / y;
        EXPECT_NEAR(depth(u, v), std::clamp((t - range.near) / (range.far - range.near), 0.0, 1.0), 1e-6);
      } else {
        EXPECT_EQ(label(u, v), s.background_color());
        EXPECT_EQ(depth(u, v), 1.0f);
      }
    }
  }
}

TEST(RenderChannel, UnitBoxDepthAtCenter) {
  const LayerMap layers = canonical_layer_map(6);
  const DepthRange range{0.5, 100};
  for (double d : {2.0, 7.25, 40.0}) {
    const Scene s(layers, {{Box{{-0.5, -0.5, d}, {0.5, 0.5, d + 1}}, 5, {10, 20, 30}}}, {}, 0, 0);
    const Pose pose{Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()};
    const auto img = render_channel(s, forward_camera(33), pose, ChannelKind::depth, range);
    EXPECT_NEAR(img.depth()(16, 16), (d - range.near) / (range.far - range.near), 1e-5);
  }
}

TEST(RenderChannel, InvalidPose) {
  const auto s = empty_scene();
  Pose bad = level_pose(1);
  bad.rotation(0, 0) = 2.0;
  EXPECT_THROW(render_channel(s, forward_camera(8), bad, ChannelKind::rgb, {}), InvalidPoseError);
  EXPECT_THROW(render_channel(s, forward_camera(8), level_pose(1), ChannelKind::rgb, {2.0, 1.0}),
               std::invalid_argument);
}

TEST(RenderChannel, ChannelsAligned) {
  const auto s = generate_city({});
  const auto poses = scripted_drive({}, {}, 3.0);
  auto rig = make_rig(RigPreset::quad45, 64);
  rig.rig_pose = poses[12].pose;
  const auto color_ids = s.layers().color_index();
  for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
    const auto ch = render_channels(s, rig.cameras[i], rig.camera_pose(i),
                                    {ChannelKind::rgb, ChannelKind::label, ChannelKind::depth}, {});
    const auto& label = ch.at(ChannelKind::label).color();
    const auto& depth = ch.at(ChannelKind::depth).depth();
    const auto& rgb = ch.at(ChannelKind::rgb).color();
    for (std::size_t k = 0; k < label.size(); ++k) {
      ASSERT_TRUE(color_ids.contains(pack(label.pixels()[k])));
      const float d = depth.pixels()[k];
      ASSERT_TRUE(d >= 0.0f && d <= 1.0f);
      // Sky label <=> miss <=> depth 1 and sky rgb.
      const bool sky = label.pixels()[k] == s.background_color();
      if (sky) {
        EXPECT_EQ(d, 1.0f);
        EXPECT_EQ(rgb.pixels()[k], s.sky_rgb());
      }
    }
  }
}

TEST(RenderRig, CardinalityAndDeterminism) {
  const auto s = generate_city({});
  auto rig = make_rig(RigPreset::quad45, 32);
  rig.rig_pose = scripted_drive({}, {}, 1.0)[5].pose;
  const std::set<ChannelKind> all{ChannelKind::rgb, ChannelKind::label, ChannelKind::depth};
  const auto a = render_rig(s, rig, all, {}, std::numbers::pi / 2);
  const auto b = render_rig(s, rig, all, {}, std::numbers::pi / 2, 3);
  std::size_t images = 0;
  for (const auto& f : a) images += f.size();
  EXPECT_EQ(images, 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].at(ChannelKind::rgb).color(), b[i].at(ChannelKind::rgb).color());
    EXPECT_EQ(a[i].at(ChannelKind::label).color(), b[i].at(ChannelKind::label).color());
    EXPECT_EQ(a[i].at(ChannelKind::depth).depth(), b[i].at(ChannelKind::depth).depth());
  }
}

TEST(RenderRig, OverlapSeesSameLayer) {
  // A sphere centered on a direction two frusta share (a face border) shows
  // up in both.
  const LayerMap layers = canonical_layer_map(6);
  auto rig = make_rig(RigPreset::quad45, 96);
  int checked = 0;
  for (std::size_t c = 0; c < rig.cameras.size(); ++c) {
    for (int edge = 0; edge < 4; ++edge) {
      for (double t : {0.3, 0.5, 0.7}) {
        const double e = edge % 2;
        const Eigen::Vector3d ray = edge < 2 ? RigCamera::tex_ray(e, t) : RigCamera::tex_ray(t, e);
        const Eigen::Vector3d d = (rig.cameras[c].orientation * ray).normalized();
        std::vector<std::size_t> seen;
        for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
          if (rig.cameras[i].contains(d, 1e-6)) seen.push_back(i);
        }
        if (seen.size() < 2) continue;
        const Scene s(layers, {{Sphere{10.0 * d, 1.0}, 5, {1, 2, 3}}}, {}, 0, 0);
        for (auto i : seen) {
          const auto img = render_channel(s, rig.cameras[i], rig.camera_pose(i), ChannelKind::label, {});
          const auto p = *rig.cameras[i].project(d);
          EXPECT_EQ(sample_nearest(img.color(), std::clamp(p.u, 0.0, 95.0), std::clamp(p.v, 0.0, 95.0)),
                    layers.find(5)->color);
        }
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(Rig, PresetsCoverHemisphere) {
  for (auto preset : {RigPreset::quad45, RigPreset::cube5}) {
    const auto rig = make_rig(preset, 16);
    EXPECT_TRUE(uncovered_directions(rig, std::numbers::pi / 2, 4096).empty()) << to_string(preset);
    for (const auto& c : rig.cameras) {
      // 90 degree frustum: the outer pixel edges sit 45 degrees off axis.
      const Eigen::Vector3d edge = c.pixel_ray(-0.5, c.center()), top = c.pixel_ray(c.center(), -0.5);
      EXPECT_NEAR(std::atan2(std::abs(edge.x()), edge.z()), std::numbers::pi / 4, 1e-12);
      EXPECT_NEAR(std::atan2(std::abs(top.y()), top.z()), std::numbers::pi / 4, 1e-12);
    }
  }
}

TEST(Rig, ForwardOnlyRigFailsCoverage) {
  CameraRig rig;
  rig.cameras.push_back(forward_camera(16));
  EXPECT_FALSE(uncovered_directions(rig, std::numbers::pi / 2).empty());
  EXPECT_THROW(require_coverage(rig, std::numbers::pi / 2), CoverageError);
  EXPECT_NO_THROW(require_coverage(rig, std::numbers::pi / 5));
}

TEST(Rig, SelectCameraPrefersMostCentral) {
  const auto rig = make_rig(RigPreset::cube5, 16);
  EXPECT_EQ(select_camera(rig, Eigen::Vector3d::UnitZ()), 0u);
  EXPECT_EQ(select_camera(rig, Eigen::Vector3d(1, 0, 0.2).normalized()), 1u);
  // On the front/right seam both contain the ray with equal margin; lowest index wins.
  EXPECT_EQ(select_camera(rig, Eigen::Vector3d(1, 0, 1).normalized()), 0u);
}
