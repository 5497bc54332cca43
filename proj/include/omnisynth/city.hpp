#pragma once

// Procedural street grid and a scripted drive through it.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "omnisynth/layer_map.hpp"
#include "omnisynth/rig.hpp"
#include "omnisynth/scene.hpp"

namespace omnisynth {

/// Layers every generated city carries; these are the first six canonical
/// layers.
inline constexpr int kMinCityLayers = 6;

struct CityConfig {
  std::uint64_t seed = 1;
  int blocks = 4;  // blocks per side
  double block_size = 40.0;
  double road_width = 10.0;
  double sidewalk_width = 3.0;
  double building_density = 1.0;
  double vehicle_density = 0.5;
  double vegetation_density = 0.5;
  double pole_density = 0.5;
  int layer_count = 10;

  double pitch() const { return block_size + road_width; }

  void validate() const {
    if (layer_count > kMaxLayers) {
      throw CapacityError("requested " + std::to_string(layer_count) + " layers; at most 32 are supported");
    }
    if (layer_count < kMinCityLayers) {
      throw std::invalid_argument("a city needs at least " + std::to_string(kMinCityLayers) + " layers");
    }
    if (blocks < 1) throw std::invalid_argument("blocks must be >= 1");
    if (!(block_size > 2 * sidewalk_width) || !(road_width > 0) || !(sidewalk_width >= 0)) {
      throw std::invalid_argument("inconsistent street dimensions");
    }
    for (double d : {building_density, vehicle_density, vegetation_density, pole_density}) {
      if (!(d >= 0.0)) throw std::invalid_argument("densities must be >= 0");
    }
  }
};

namespace detail {

class CityBuilder {
 public:
  CityBuilder(const CityConfig& cfg, const LayerMap& layers) : cfg_(cfg), layers_(layers), rng_(cfg.seed) {}

  std::vector<SceneObject> build() {
    const int terrain = id("terrain");
    objects_.push_back({Plane{Eigen::Vector3d::UnitY(), 0.0}, terrain, jitter(color(terrain), 10)});
    roads();
    for (int bx = 0; bx < cfg_.blocks; ++bx) {
      for (int bz = 0; bz < cfg_.blocks; ++bz) block(bx, bz);
    }
    return std::move(objects_);
  }

 private:
  int id(const char* name) const {
    const Layer* l = layers_.find(std::string_view(name));
    return l ? l->id : -1;
  }
  Rgb8 color(int layer) const { return layers_.find(layer)->color; }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }

  Rgb8 jitter(Rgb8 c, int amount) {
    const auto j = [&](std::uint8_t v) {
      return static_cast<std::uint8_t>(std::clamp(v + static_cast<int>(uniform(-amount, amount)), 0, 255));
    };
    return {j(c.r), j(c.g), j(c.b)};
  }

  void box(Eigen::Vector3d lo, Eigen::Vector3d hi, int layer, Rgb8 albedo) {
    objects_.push_back({Box{lo, hi}, layer, albedo});
  }

  void roads() {
    const int road = id("road");
    const double half = cfg_.road_width / 2.0;
    const double extent = cfg_.blocks * cfg_.pitch();
    const Rgb8 asphalt{90, 90, 96};
    for (int k = 0; k <= cfg_.blocks; ++k) {
      const double c = k * cfg_.pitch();
      box({-half, 0.0, c - half}, {extent + half, 0.02, c + half}, road, asphalt);
      box({c - half, 0.0, -half}, {c + half, 0.021, extent + half}, road, asphalt);
    }
    const int rail = id("rail_track");
    if (rail >= 0 && cfg_.blocks >= 2) {
      // Tram line down the middle of one interior avenue.
      const double c = (cfg_.blocks / 2) * cfg_.pitch();
      box({c - 0.75, 0.0, -half}, {c + 0.75, 0.04, extent + half}, rail, {110, 95, 80});
    }
  }

  void block(int bx, int bz) {
    const double half = cfg_.road_width / 2.0;
    const double x0 = bx * cfg_.pitch() + half, x1 = (bx + 1) * cfg_.pitch() - half;
    const double z0 = bz * cfg_.pitch() + half, z1 = (bz + 1) * cfg_.pitch() - half;
    const double sw = cfg_.sidewalk_width;
    const int sidewalk = id("sidewalk");
    box({x0, 0.0, z0}, {x1, 0.15, z1}, sidewalk, jitter({185, 180, 170}, 6));

    const int parking = id("parking");
    const bool is_lot = parking >= 0 && chance(0.15);
    const int lot_layer = is_lot ? parking : id("terrain");
    const Rgb8 lot_albedo = is_lot ? jitter({120, 118, 115}, 6) : jitter({95, 150, 70}, 12);
    box({x0 + sw, 0.0, z0 + sw}, {x1 - sw, 0.16, z1 - sw}, lot_layer, lot_albedo);

    if (is_lot) {
      parked_rows(x0 + sw, x1 - sw, z0 + sw, z1 - sw);
    } else {
      buildings(x0 + sw, x1 - sw, z0 + sw, z1 - sw);
    }
    curbside(x0, x1, z0, z1);
  }

  void buildings(double x0, double x1, double z0, double z1) {
    const int building = id("building");
    const double p = std::min(1.0, 0.8 * cfg_.building_density);
    const int cells = 3;
    const double cx = (x1 - x0) / cells, cz = (z1 - z0) / cells;
    for (int i = 0; i < cells; ++i) {
      for (int j = 0; j < cells; ++j) {
        if (i == 1 && j == 1) continue;  // courtyard
        if (!chance(p)) continue;
        const double inset_x = uniform(0.3, 2.0), inset_z = uniform(0.3, 2.0);
        const double height = uniform(6.0, 30.0);
        const double tone = uniform(-30.0, 30.0);
        const auto base = static_cast<std::uint8_t>(std::clamp(150.0 + tone, 0.0, 255.0));
        box({x0 + i * cx + inset_x, 0.0, z0 + j * cz + inset_z},
            {x0 + (i + 1) * cx - inset_x, height, z0 + (j + 1) * cz - inset_z}, building,
            jitter({base, static_cast<std::uint8_t>(base * 0.95), static_cast<std::uint8_t>(base * 0.85)}, 8));
      }
    }
  }

  void car(double cx, double cz, bool along_x) {
    const int vehicle = id("vehicle");
    const double hl = 2.1, hw = 0.9;
    const double ex = along_x ? hl : hw, ez = along_x ? hw : hl;
    const Rgb8 paint = jitter({static_cast<std::uint8_t>(uniform(20, 230)), static_cast<std::uint8_t>(uniform(20, 230)),
                               static_cast<std::uint8_t>(uniform(20, 230))},
                              0);
    box({cx - ex, 0.15, cz - ez}, {cx + ex, 1.5, cz + ez}, vehicle, paint);
  }

  void parked_rows(double x0, double x1, double z0, double z1) {
    const double p = std::min(1.0, 0.6 * cfg_.vehicle_density + 0.2 * (cfg_.vehicle_density > 0));
    for (double x = x0 + 2.0; x + 2.0 < x1; x += 3.0) {
      for (double z : {z0 + 4.0, z1 - 4.0}) {
        if (chance(p)) car(x, z, false);
      }
    }
  }

  /// Parked cars along the block edge plus trees and poles on the sidewalk.
  void curbside(double x0, double x1, double z0, double z1) {
    const double p_car = std::min(1.0, 0.5 * cfg_.vehicle_density);
    const double off = 1.3;  // car center distance from the curb
    for (double x = x0 + 3.0; x + 3.0 < x1; x += 6.5) {
      if (chance(p_car)) car(x, z0 - off, true);
      if (chance(p_car)) car(x, z1 + off, true);
    }
    for (double z = z0 + 3.0; z + 3.0 < z1; z += 6.5) {
      if (chance(p_car)) car(x0 - off, z, false);
      if (chance(p_car)) car(x1 + off, z, false);
    }

    const int vegetation = id("vegetation");
    const int pole = id("pole");
    const double sw = cfg_.sidewalk_width;
    const auto furniture = [&](double x, double z) {
      if (vegetation >= 0 && chance(std::min(1.0, 0.5 * cfg_.vegetation_density))) {
        const double r = uniform(1.2, 2.2);
        const double h = uniform(2.5, 4.0);
        box({x - 0.15, 0.15, z - 0.15}, {x + 0.15, h, z + 0.15}, vegetation, {90, 70, 50});
        objects_.push_back({Sphere{{x, h + r * 0.8, z}, r}, vegetation, jitter({70, 120, 45}, 15)});
      } else if (pole >= 0 && chance(std::min(1.0, 0.5 * cfg_.pole_density))) {
        box({x - 0.08, 0.15, z - 0.08}, {x + 0.08, 5.5, z + 0.08}, pole, {120, 120, 125});
      }
    };
    const double in = std::min(0.8, sw / 2.0);
    for (double x = x0 + 5.0; x + 2.0 < x1; x += 10.0) {
      furniture(x, z0 + in);
      furniture(x, z1 - in);
    }
    for (double z = z0 + 5.0; z + 2.0 < z1; z += 10.0) {
      furniture(x0 + in, z);
      furniture(x1 - in, z);
    }
  }

  const CityConfig& cfg_;
  const LayerMap& layers_;
  std::mt19937_64 rng_;
  std::vector<SceneObject> objects_;
};

}  // namespace detail

/// Deterministic city for `cfg`. The scene's layer map holds the first
/// cfg.layer_count canonical layers; sky is the background layer.
inline Scene generate_city(const CityConfig& cfg) {
  cfg.validate();
  LayerMap layers = canonical_layer_map(cfg.layer_count);
  auto objects = detail::CityBuilder(cfg, layers).build();
  const int sky = layers.find("sky")->id;
  return Scene(std::move(layers), std::move(objects), DirectionalLight{}, sky, cfg.seed);
}

struct TimedPose {
  double time = 0.0;  // seconds
  Pose pose;
};

struct DriveConfig {
  double speed = 8.0;      // m/s
  double rate_hz = 10.0;   // trajectory sample rate
  double camera_height = 1.6;
  double lane_offset = 2.0;  // right of the road centerline
  double pitch_deg = 0.0;    // downward tilt of the fisheye axis
};

/// Fisheye rig orientation for a vehicle heading `heading` (radians, 0 = +z,
/// pi/2 = +x) with the optical axis tilted down by `pitch`.
inline Eigen::Matrix3d vehicle_rotation(double heading, double pitch) {
  const Eigen::Vector3d flat(std::sin(heading), 0.0, std::cos(heading));
  const Eigen::Vector3d fwd = (std::cos(pitch) * flat - std::sin(pitch) * Eigen::Vector3d::UnitY()).normalized();
  return look_rotation(fwd, -Eigen::Vector3d::UnitY());
}

/// Scripted loop along the city's perimeter roads, sampled at cfg.rate_hz for `duration` seconds.
inline std::vector<TimedPose> scripted_drive(const CityConfig& city, const DriveConfig& cfg, double duration) {
  // Lane rectangle: right of the centerline is the outer side of the loop.
  const double lo = -cfg.lane_offset;
  const double hi = city.blocks * city.pitch() + cfg.lane_offset;
  struct Leg {
    Eigen::Vector2d from, to;
    double heading;
  };
  const double pi = std::numbers::pi;
  const std::vector<Leg> legs = {
      {{lo, lo}, {lo, hi}, 0.0},
      {{lo, hi}, {hi, hi}, pi / 2},
      {{hi, hi}, {hi, lo}, pi},
      {{hi, lo}, {lo, lo}, -pi / 2},
  };
  double loop = 0.0;
  for (const auto& l : legs) loop += (l.to - l.from).norm();

  std::vector<TimedPose> out;
  const double pitch = cfg.pitch_deg * pi / 180.0;
  const auto count = static_cast<long>(std::floor(duration * cfg.rate_hz + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / cfg.rate_hz;
    double s = std::fmod(t * cfg.speed, loop);
    for (const auto& l : legs) {
      const double len = (l.to - l.from).norm();
      if (s <= len) {
        const Eigen::Vector2d p = l.from + (l.to - l.from) * (s / len);
        out.push_back({t, {Eigen::Vector3d(p.x(), cfg.camera_height, p.y()), vehicle_rotation(l.heading, pitch)}});
        break;
      }
      s -= len;
    }
  }
  return out;
}

}  // namespace omnisynth
