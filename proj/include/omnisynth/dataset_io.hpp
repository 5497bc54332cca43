#pragma once

// Frame export/import, layer-map and manifest files, capture-rate sampling,
// train/validation splitting and dataset verification.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnisynth/camera_models.hpp"
#include "omnisynth/city.hpp"
#include "omnisynth/composer.hpp"
#include "omnisynth/image_io.hpp"
#include "omnisynth/layer_map.hpp"

namespace omnisynth {

namespace fs = std::filesystem;

class FrameInvariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SplitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DepthFormat { exr, raw };

inline std::string_view to_string(DepthFormat f) { return f == DepthFormat::exr ? "exr" : "raw"; }
inline std::optional<DepthFormat> parse_depth_format(std::string_view s) {
  if (s == "exr") return DepthFormat::exr;
  if (s == "raw") return DepthFormat::raw;
  return std::nullopt;
}

/// Zero-padded sequence id, e.g. frame_000042.
inline std::string frame_id_for(long index) {
  std::ostringstream os;
  os << "frame_" << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

struct FramePaths {
  fs::path rgb, label, depth, void_mask;

  static FramePaths in(const fs::path& dir, const std::string& id, DepthFormat depth_format) {
    return {dir / (id + "_rgb.png"), dir / (id + "_label.png"),
            dir / (id + (depth_format == DepthFormat::exr ? "_depth.exr" : "_depth.f32")), dir / (id + "_void.png")};
  }
  std::vector<fs::path> all() const { return {rgb, label, depth, void_mask}; }
};

/// Problems with a frame's channels; empty when every invariant holds.
inline std::vector<std::string> frame_invariant_violations(const ColorImage& rgb, const ColorImage& label,
                                                           const DepthImage& depth, const MaskImage& void_mask,
                                                           const LayerMap& layers) {
  std::vector<std::string> problems;
  const int w = void_mask.width(), h = void_mask.height();
  if (!rgb.same_shape(w, h) || !label.same_shape(w, h) || !depth.same_shape(w, h)) {
    problems.push_back("dimensions: channels and void mask differ in size");
    return problems;
  }
  const auto colors = layers.color_index();
  long impure = 0, out_of_range = 0, void_mismatch = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Rgb8 l = label(x, y);
      const float d = depth(x, y);
      const bool is_void = void_mask(x, y) != 0;
      if (l != kVoidColor && !colors.contains(pack(l))) ++impure;
      if (!(d >= 0.0f && d <= 1.0f)) ++out_of_range;
      if (is_void) {
        if (l != void_value_label() || rgb(x, y) != void_value_rgb() || d != void_value_depth()) ++void_mismatch;
      } else if (l == kVoidColor) {
        ++void_mismatch;
      }
    }
  }
  if (impure) problems.push_back("label_purity: " + std::to_string(impure) + " pixels with unmapped colors");
  if (out_of_range) problems.push_back("depth_range: " + std::to_string(out_of_range) + " pixels outside [0, 1]");
  if (void_mismatch) {
    problems.push_back("void_consistency: " + std::to_string(void_mismatch) + " pixels disagree with the void mask");
  }
  return problems;
}

/// Writes <id>_rgb.png, <id>_label.png, <id>_depth.exr (or .f32) and
/// <id>_void.png into `dir`. Refuses frames that break their invariants.
inline FramePaths export_frame(const FisheyeFrame& frame, const LayerMap& layers, const fs::path& dir,
                               DepthFormat depth_format = DepthFormat::exr) {
  const auto problems = frame_invariant_violations(frame.rgb.color(), frame.label.color(), frame.depth.depth(),
                                                   frame.void_mask, layers);
  if (!problems.empty()) throw FrameInvariantError("frame " + frame.frame_id + ": " + problems.front());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
  const FramePaths paths = FramePaths::in(dir, frame.frame_id, depth_format);
  write_png(paths.rgb, frame.rgb.color());
  write_png(paths.label, frame.label.color());
  if (depth_format == DepthFormat::exr) {
    write_exr(paths.depth, frame.depth.depth());
  } else {
    write_raw_depth(paths.depth, frame.depth.depth());
  }
  MaskImage v(frame.void_mask.width(), frame.void_mask.height());
  std::ranges::transform(frame.void_mask.pixels(), v.pixels().begin(),
                         [](std::uint8_t m) { return static_cast<std::uint8_t>(m ? 255 : 0); });
  write_png_gray(paths.void_mask, v);
  return paths;
}

inline DepthImage read_depth(const fs::path& path, DepthFormat format) {
  return format == DepthFormat::exr ? read_exr(path) : read_raw_depth(path);
}

/// Reads a frame written by export_frame.
inline FisheyeFrame import_frame(const fs::path& dir, const std::string& id, const FisheyeCameraSpec& spec,
                                 DepthFormat depth_format = DepthFormat::exr) {
  const FramePaths paths = FramePaths::in(dir, id, depth_format);
  FisheyeFrame frame;
  frame.frame_id = id;
  frame.spec = spec;
  frame.rgb = ChannelImage(ChannelKind::rgb, read_png_rgb(paths.rgb));
  frame.label = ChannelImage(ChannelKind::label, read_png_rgb(paths.label));
  frame.depth = ChannelImage(read_depth(paths.depth, depth_format));
  MaskImage v = read_png_gray(paths.void_mask);
  for (auto& m : v.pixels()) m = m ? 1 : 0;
  frame.void_mask = std::move(v);
  return frame;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path, "cannot open for writing");
  os << text;
  if (!os) throw IoError(path, "write failed");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline void export_layer_map(const LayerMap& map, const fs::path& path) { write_json(path, to_json(map)); }

inline LayerMap import_layer_map(const fs::path& path) { return layer_map_from_json(read_json(path)); }

// --- manifest -------------------------------------------------------------

struct SplitRecord {
  std::vector<std::string> train;
  std::vector<std::string> val;
  double ratio = 0.8;
  std::uint64_t seed = 0;
  bool shuffled = true;
};

struct DatasetManifest {
  std::vector<std::string> frames;
  std::string layer_map_path = "layers.json";
  std::string frames_dir = "frames";
  std::optional<SplitRecord> split;
  std::string generator_config_hash;
  DepthFormat depth_format = DepthFormat::exr;
  std::optional<FisheyeCameraSpec> camera;

  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& f : frames) {
      if (!seen.insert(f).second) throw SplitError("duplicate frame id " + f);
    }
    if (split) {
      std::unordered_set<std::string> parts;
      for (const auto* list : {&split->train, &split->val}) {
        for (const auto& id : *list) {
          if (!seen.contains(id)) throw SplitError("split lists unknown frame " + id);
          if (!parts.insert(id).second) throw SplitError("frame " + id + " appears twice in the split");
        }
      }
      if (parts.size() != seen.size()) throw SplitError("split does not cover every frame");
    }
  }
};

inline nlohmann::json to_json(const FisheyeCameraSpec& s) {
  return {{"model", std::string(to_string(s.model))},
          {"focal_length_px", s.focal_length_px},
          {"width_px", s.width_px},
          {"height_px", s.height_px},
          {"principal_point", {s.principal_point.u, s.principal_point.v}},
          {"theta_max", s.theta_max}};
}

inline FisheyeCameraSpec camera_spec_from_json(const nlohmann::json& j) {
  FisheyeCameraSpec s;
  const auto model = parse_projection_model(j.at("model").get<std::string>());
  if (!model) throw InvalidCameraError("unknown projection model");
  s.model = *model;
  s.focal_length_px = j.at("focal_length_px").get<double>();
  s.width_px = j.at("width_px").get<int>();
  s.height_px = j.at("height_px").get<int>();
  s.principal_point = {j.at("principal_point").at(0).get<double>(), j.at("principal_point").at(1).get<double>()};
  s.theta_max = j.at("theta_max").get<double>();
  s.validate();
  return s;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j = {{"frames", m.frames},
                      {"layer_map_path", m.layer_map_path},
                      {"frames_dir", m.frames_dir},
                      {"generator_config_hash", m.generator_config_hash},
                      {"depth_format", std::string(to_string(m.depth_format))}};
  if (m.split) {
    j["split"] = {{"train", m.split->train},
                  {"val", m.split->val},
                  {"ratio", m.split->ratio},
                  {"seed", m.split->seed},
                  {"shuffled", m.split->shuffled}};
  } else {
    j["split"] = nullptr;
  }
  if (m.camera) j["camera"] = to_json(*m.camera);
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.frames = j.at("frames").get<std::vector<std::string>>();
  m.layer_map_path = j.value("layer_map_path", "layers.json");
  m.frames_dir = j.value("frames_dir", "frames");
  m.generator_config_hash = j.value("generator_config_hash", "");
  const auto df = parse_depth_format(j.value("depth_format", "exr"));
  if (!df) throw SplitError("unknown depth_format");
  m.depth_format = *df;
  if (j.contains("split") && !j["split"].is_null()) {
    const auto& s = j["split"];
    m.split = SplitRecord{s.at("train").get<std::vector<std::string>>(), s.at("val").get<std::vector<std::string>>(),
                          s.value("ratio", 0.8), s.value("seed", std::uint64_t{0}), s.value("shuffled", true)};
  }
  if (j.contains("camera")) m.camera = camera_spec_from_json(j["camera"]);
  m.validate();
  return m;
}

inline void write_manifest(const DatasetManifest& m, const fs::path& path) {
  m.validate();
  write_json(path, to_json(m));
}

inline DatasetManifest read_manifest(const fs::path& path) {
  try {
    return manifest_from_json(read_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::string("malformed manifest: ") + e.what());
  }
}

/// FNV-1a 64-bit of `text`, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// --- sampling and splitting ----------------------------------------------

/// Greedy capture-rate thinning: keep the first pose, then every pose at
/// least 1 / rate_hz after the last kept one.
inline std::vector<TimedPose> sample_frames(const std::vector<TimedPose>& trajectory, double rate_hz) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("sampling rate must be positive");
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (!(trajectory[i].time > trajectory[i - 1].time)) {
      throw std::invalid_argument("trajectory timestamps must be strictly increasing");
    }
  }
  std::vector<TimedPose> kept;
  const double period = 1.0 / rate_hz;
  // Absorbs rounding in timestamps built from repeated additions.
  constexpr double slack = 1e-9;
  for (const auto& p : trajectory) {
    if (kept.empty() || p.time >= kept.back().time + period - slack) kept.push_back(p);
  }
  return kept;
}

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw SplitError("train_fraction must lie in (0, 1)");
  }
};

struct SplitResult {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Number of training items: ceil(fraction * n). 0.8 * 12028 = 9622.4 -> 9623.
inline std::size_t train_count(std::size_t n, double fraction) {
  const double exact = fraction * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact))));
}

/// Optional seeded shuffle, then the first ceil(fraction * N) ids train.
inline SplitResult split_dataset(const std::vector<std::string>& ids, const SplitSpec& spec) {
  spec.validate();
  if (ids.empty()) throw SplitError("cannot split an empty id list");
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw SplitError("duplicate id " + id);
  }
  std::vector<std::string> order = ids;
  if (spec.shuffle) {
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  const std::size_t n_train = train_count(order.size(), spec.train_fraction);
  SplitResult r;
  r.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  r.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return r;
}

/// Splits the manifest's frames and records the split.
inline void apply_split(DatasetManifest& m, const SplitSpec& spec) {
  auto r = split_dataset(m.frames, spec);
  m.split = SplitRecord{std::move(r.train), std::move(r.val), spec.train_fraction, spec.seed, spec.shuffle};
}

// --- verification --------------------------------------------------------

struct Violation {
  std::string frame_id;  // empty for dataset-level problems
  std::string rule;
  std::string detail;
};

struct VerifyReport {
  std::vector<Violation> violations;
  std::size_t frames_checked = 0;
  bool clean() const { return violations.empty(); }
};

/// Checks manifest integrity, file presence, decodability, label purity,
/// depth range and void consistency for every frame under `root`.
inline VerifyReport verify_dataset(const fs::path& root) {
  VerifyReport report;
  const auto add = [&](std::string id, std::string rule, std::string detail) {
    report.violations.push_back({std::move(id), std::move(rule), std::move(detail)});
  };
  DatasetManifest manifest;
  try {
    manifest = read_manifest(root / "manifest.json");
  } catch (const std::exception& e) {
    add("", "manifest", e.what());
    return report;
  }
  LayerMap layers;
  try {
    layers = import_layer_map(root / manifest.layer_map_path);
  } catch (const std::exception& e) {
    add("", "layer_map", e.what());
    return report;
  }
  const fs::path dir = root / manifest.frames_dir;
  const auto colors = layers.color_index();
  for (const auto& id : manifest.frames) {
    ++report.frames_checked;
    const FramePaths paths = FramePaths::in(dir, id, manifest.depth_format);
    bool missing = false;
    for (const auto& p : paths.all()) {
      if (!fs::exists(p)) {
        add(id, "file_presence", p.filename().string() + " is missing");
        missing = true;
      }
    }
    if (missing) continue;

    std::optional<ColorImage> rgb, label;
    std::optional<DepthImage> depth;
    std::optional<MaskImage> void_mask;
    const auto decode = [&](auto& slot, auto&& reader, const fs::path& p) {
      try {
        slot = reader();
      } catch (const std::exception& e) {
        add(id, "decodable", p.filename().string() + ": " + e.what());
      }
    };
    decode(rgb, [&] { return read_png_rgb(paths.rgb); }, paths.rgb);
    decode(label, [&] { return read_png_rgb(paths.label); }, paths.label);
    decode(depth, [&] { return read_depth(paths.depth, manifest.depth_format); }, paths.depth);
    decode(void_mask, [&] { return read_png_gray(paths.void_mask); }, paths.void_mask);

    if (label) {
      std::set<std::uint32_t> bad;
      for (Rgb8 c : label->pixels()) {
        if (c != kVoidColor && !colors.contains(pack(c))) bad.insert(pack(c));
      }
      if (!bad.empty()) {
        std::ostringstream os;
        os << bad.size() << " unmapped label colors, e.g. #" << std::hex << std::setw(6) << std::setfill('0')
           << *bad.begin();
        add(id, "label_purity", os.str());
      }
    }
    if (depth) {
      const auto n = std::ranges::count_if(depth->pixels(), [](float d) { return !(d >= 0.0f && d <= 1.0f); });
      if (n) add(id, "depth_range", std::to_string(n) + " depth values outside [0, 1]");
    }
    if (rgb && label && depth && void_mask) {
      const int w = void_mask->width(), h = void_mask->height();
      if (!rgb->same_shape(w, h) || !label->same_shape(w, h) || !depth->same_shape(w, h)) {
        add(id, "dimensions", "channel sizes differ");
        continue;
      }
      long mismatched = 0;
      for (std::size_t i = 0; i < void_mask->size(); ++i) {
        const bool v = void_mask->pixels()[i] != 0;
        const Rgb8 l = label->pixels()[i];
        if (v ? (l != kVoidColor || rgb->pixels()[i] != void_value_rgb() || depth->pixels()[i] != 1.0f)
              : l == kVoidColor) {
          ++mismatched;
        }
      }
      if (mismatched) add(id, "void_consistency", std::to_string(mismatched) + " pixels disagree with the void mask");
      if (manifest.camera && !void_mask->same_shape(manifest.camera->width_px, manifest.camera->height_px)) {
        add(id, "dimensions", "frame size differs from the manifest camera");
      }
    }
  }
  return report;
}

}  // namespace omnisynth
