#pragma once

// End-to-end synthetic dataset generation: city -> scripted drive -> capture
// sampling -> fisheye frames -> exported tree with layer map and manifest.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "omnisynth/city.hpp"
#include "omnisynth/composer.hpp"
#include "omnisynth/dataset_io.hpp"
#include "omnisynth/rig.hpp"

namespace omnisynth {

/// Bad user-supplied configuration (as opposed to a runtime failure).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FrameError : public std::runtime_error {
 public:
  FrameError(const std::string& frame_id, const std::string& what)
      : std::runtime_error(frame_id + ": " + what), frame_id_(frame_id) {}
  const std::string& frame_id() const { return frame_id_; }

 private:
  std::string frame_id_;
};

struct GenerateConfig {
  std::uint64_t seed = 1;
  int frames = 20;
  int size = 1024;
  RigPreset rig = RigPreset::quad45;
  ProjectionModel model = ProjectionModel::equidistant;
  std::optional<double> focal;  // unset: image circle fills the frame
  double theta_max = std::numbers::pi / 2;
  int face_resolution = 0;  // 0: matched to the fisheye's central sampling density
  int mesh_resolution = 128;
  ComposeMethod method = ComposeMethod::mesh;
  DepthRange range;
  double capture_rate_hz = 1.0;
  DepthFormat depth_format = DepthFormat::exr;
  double train_fraction = 0.8;
  bool sequential_split = false;
  CityConfig city;
  DriveConfig drive;
  unsigned threads = 0;  // not part of the echoed config

  double resolved_focal() const { return focal.value_or(focal_filling_frame(model, size, size, theta_max)); }

  int resolved_face_resolution() const {
    if (face_resolution > 0) return face_resolution;
    return std::max(16, static_cast<int>(std::ceil(2.0 * resolved_focal())));
  }

  FisheyeCameraSpec spec() const {
    return FisheyeCameraSpec::centered(model, resolved_focal(), size, size, theta_max);
  }

  void validate() const {
    if (frames < 0) throw ConfigError("frames must be >= 0");
    if (size < 1) throw ConfigError("size must be >= 1");
    if (mesh_resolution < 2) throw ConfigError("mesh resolution must be >= 2");
    if (face_resolution < 0) throw ConfigError("face resolution must be >= 0");
    if (!(capture_rate_hz > 0.0)) throw ConfigError("capture rate must be positive");
    if (!(drive.rate_hz >= capture_rate_hz)) throw ConfigError("trajectory rate must be >= capture rate");
    if (!(drive.speed > 0.0)) throw ConfigError("drive speed must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("fraction must lie in (0, 1)");
    if (focal && !(*focal > 0.0)) throw ConfigError("focal length must be positive");
    try {
      range.validate();
      city.validate();
      spec().validate();
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
};

/// Effective configuration, with defaults resolved. Threads are left out so
/// runs with different thread hints echo identical configs.
inline nlohmann::json to_json(const GenerateConfig& c) {
  return {{"seed", c.seed},
          {"frames", c.frames},
          {"size", c.size},
          {"rig", std::string(to_string(c.rig))},
          {"model", std::string(to_string(c.model))},
          {"focal", c.resolved_focal()},
          {"theta_max", c.theta_max},
          {"face_resolution", c.resolved_face_resolution()},
          {"mesh_resolution", c.mesh_resolution},
          {"method", std::string(to_string(c.method))},
          {"near", c.range.near},
          {"far", c.range.far},
          {"capture_rate_hz", c.capture_rate_hz},
          {"depth_format", std::string(to_string(c.depth_format))},
          {"fraction", c.train_fraction},
          {"sequential", c.sequential_split},
          {"city",
           {{"blocks", c.city.blocks},
            {"block_size", c.city.block_size},
            {"road_width", c.city.road_width},
            {"sidewalk_width", c.city.sidewalk_width},
            {"building_density", c.city.building_density},
            {"vehicle_density", c.city.vehicle_density},
            {"vegetation_density", c.city.vegetation_density},
            {"pole_density", c.city.pole_density},
            {"layer_count", c.city.layer_count}}},
          {"drive",
           {{"speed", c.drive.speed},
            {"rate_hz", c.drive.rate_hz},
            {"camera_height", c.drive.camera_height},
            {"lane_offset", c.drive.lane_offset},
            {"pitch_deg", c.drive.pitch_deg}}}};
}

/// Overlays the keys present in `j` onto `c`.
inline void apply_json(GenerateConfig& c, const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    const auto get = [&](const nlohmann::json& obj, const char* key, auto& field) {
      if (obj.contains(key)) field = obj.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get(j, "seed", c.seed);
    get(j, "frames", c.frames);
    get(j, "size", c.size);
    if (j.contains("rig")) {
      const auto r = parse_rig_preset(j["rig"].get<std::string>());
      if (!r) throw ConfigError("unknown rig preset");
      c.rig = *r;
    }
    if (j.contains("model")) {
      const auto m = parse_projection_model(j["model"].get<std::string>());
      if (!m) throw ConfigError("unknown projection model");
      c.model = *m;
    }
    if (j.contains("focal") && !j["focal"].is_null()) c.focal = j["focal"].get<double>();
    get(j, "theta_max", c.theta_max);
    get(j, "face_resolution", c.face_resolution);
    get(j, "mesh_resolution", c.mesh_resolution);
    if (j.contains("method")) {
      const auto m = j["method"].get<std::string>();
      if (m == "mesh") {
        c.method = ComposeMethod::mesh;
      } else if (m == "per_pixel") {
        c.method = ComposeMethod::per_pixel;
      } else {
        throw ConfigError("unknown method " + m);
      }
    }
    get(j, "near", c.range.near);
    get(j, "far", c.range.far);
    get(j, "capture_rate_hz", c.capture_rate_hz);
    if (j.contains("depth_format")) {
      const auto f = parse_depth_format(j["depth_format"].get<std::string>());
      if (!f) throw ConfigError("unknown depth format");
      c.depth_format = *f;
    }
    get(j, "fraction", c.train_fraction);
    get(j, "sequential", c.sequential_split);
    if (j.contains("city")) {
      const auto& k = j["city"];
      get(k, "blocks", c.city.blocks);
      get(k, "block_size", c.city.block_size);
      get(k, "road_width", c.city.road_width);
      get(k, "sidewalk_width", c.city.sidewalk_width);
      get(k, "building_density", c.city.building_density);
      get(k, "vehicle_density", c.city.vehicle_density);
      get(k, "vegetation_density", c.city.vegetation_density);
      get(k, "pole_density", c.city.pole_density);
      get(k, "layer_count", c.city.layer_count);
    }
    if (j.contains("drive")) {
      const auto& k = j["drive"];
      get(k, "speed", c.drive.speed);
      get(k, "rate_hz", c.drive.rate_hz);
      get(k, "camera_height", c.drive.camera_height);
      get(k, "lane_offset", c.drive.lane_offset);
      get(k, "pitch_deg", c.drive.pitch_deg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

/// Capture poses: the scripted drive thinned to the capture rate, first
/// `cfg.frames` of them.
inline std::vector<TimedPose> capture_poses(const GenerateConfig& cfg) {
  if (cfg.frames == 0) return {};
  const double duration = (cfg.frames - 1) / cfg.capture_rate_hz;
  auto poses = sample_frames(scripted_drive(cfg.city, cfg.drive, duration), cfg.capture_rate_hz);
  if (poses.size() > static_cast<std::size_t>(cfg.frames)) poses.resize(static_cast<std::size_t>(cfg.frames));
  return poses;
}

inline bool directory_has_entries(const fs::path& p) {
  return fs::is_directory(p) && fs::directory_iterator(p) != fs::directory_iterator();
}

using ProgressFn = std::function<void(int done, int total, const std::string& frame_id)>;

/// Renders the dataset tree under `root`:
///   manifest.json, layers.json, config_used.json, frames/<id>_{rgb,label,void}.png, frames/<id>_depth.exr
inline DatasetManifest generate_dataset(const GenerateConfig& cfg, const fs::path& root, bool force = false,
                                        const ProgressFn& progress = {}) {
  cfg.validate();
  if (fs::exists(root) && !fs::is_directory(root)) throw ConfigError(root.string() + " is not a directory");
  if (directory_has_entries(root)) {
    if (!force) throw ConfigError(root.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(root / "frames");
    for (const char* f : {"manifest.json", "layers.json", "config_used.json"}) fs::remove(root / f);
  }
  fs::create_directories(root / "frames");

  const nlohmann::json echoed = to_json(cfg);
  write_json(root / "config_used.json", echoed);

  CityConfig city = cfg.city;
  city.seed = cfg.seed;
  const Scene scene = generate_city(city);
  export_layer_map(scene.layers(), root / "layers.json");

  const FisheyeCameraSpec spec = cfg.spec();
  const auto poses = capture_poses(cfg);
  DatasetManifest manifest;
  manifest.generator_config_hash = fnv1a_hex(echoed.dump());
  manifest.depth_format = cfg.depth_format;
  manifest.camera = spec;

  if (!poses.empty()) {
    const FisheyeComposer composer(spec, make_rig(cfg.rig, cfg.resolved_face_resolution()),
                                   {cfg.method, cfg.mesh_resolution, cfg.range, resolve_threads(cfg.threads)});
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const std::string id = frame_id_for(static_cast<long>(i));
      try {
        const FisheyeFrame frame = composer.compose(scene, poses[i].pose, id);
        export_frame(frame, scene.layers(), root / manifest.frames_dir, cfg.depth_format);
      } catch (const IoError&) {
        throw;
      } catch (const std::exception& e) {
        throw FrameError(id, e.what());
      }
      manifest.frames.push_back(id);
      if (progress) progress(static_cast<int>(i) + 1, static_cast<int>(poses.size()), id);
    }
    apply_split(manifest, {cfg.train_fraction, cfg.seed, !cfg.sequential_split});
  }
  write_manifest(manifest, root / "manifest.json");
  return manifest;
}

}  // namespace omnisynth
