// omnisynth: synthetic fisheye dataset generation, perspective warping,
// augmentation, splitting, evaluation and inspection.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
// Log level comes from SPDLOG_LEVEL (e.g. SPDLOG_LEVEL=debug).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "omnisynth/dataset_io.hpp"
#include "omnisynth/evaluation.hpp"
#include "omnisynth/pipeline.hpp"
#include "omnisynth/transform.hpp"
#include "omnisynth/warp_mesh.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace omnisynth;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return read_json(path);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
}

void prepare_output(const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_directory(out)) throw UsageError(out.string() + " is not a directory");
  if (directory_has_entries(out)) {
    if (!force) throw UsageError(out.string() + " is not empty (use --force to overwrite)");
    for (const char* sub : {"images", "labels", "void"}) fs::remove_all(out / sub);
    fs::remove(out / "config_used.json");
  }
  fs::create_directories(out);
}

// --- paired image/label trees ---------------------------------------------

struct PairSet {
  std::vector<std::pair<fs::path, fs::path>> pairs;  // relative paths under images/ and labels/
  std::vector<std::string> unpaired;
};

std::map<std::string, fs::path> png_stems(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) throw UsageError(dir.string() + " is not a directory");
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    const fs::path rel = fs::relative(e.path(), dir);
    out.emplace((rel.parent_path() / rel.stem()).generic_string(), rel);
  }
  return out;
}

/// Pairs <in>/images/<stem>.png with <in>/labels/<stem>.png.
PairSet find_pairs(const fs::path& in) {
  const auto images = png_stems(in / "images");
  const auto labels = png_stems(in / "labels");
  PairSet s;
  for (const auto& [stem, rel] : images) {
    auto it = labels.find(stem);
    if (it == labels.end()) {
      s.unpaired.push_back("images/" + rel.generic_string());
    } else {
      s.pairs.emplace_back(rel, it->second);
    }
  }
  for (const auto& [stem, rel] : labels) {
    if (!images.contains(stem)) s.unpaired.push_back("labels/" + rel.generic_string());
  }
  return s;
}

void write_into(const fs::path& root, const fs::path& rel, const ColorImage& img) {
  fs::create_directories((root / rel).parent_path());
  write_png(root / rel, img);
}

void write_mask_into(const fs::path& root, const fs::path& rel, const MaskImage& mask) {
  fs::create_directories((root / rel).parent_path());
  MaskImage v(mask.width(), mask.height());
  std::ranges::transform(mask.pixels(), v.pixels().begin(),
                         [](std::uint8_t m) { return static_cast<std::uint8_t>(m ? 255 : 0); });
  write_png_gray(root / rel, v);
}

int report_unpaired(const PairSet& s) {
  for (const auto& u : s.unpaired) spdlog::warn("unpaired file skipped: {}", u);
  return s.unpaired.empty() ? kOk : kFailure;
}

// --- subcommands ----------------------------------------------------------

struct GenerateArgs {
  std::string out, config;
  std::uint64_t seed = 1;
  int frames = 20, size = 1024, mesh_res = 128, face_res = 0, layers = 10;
  std::string rig = "quad45", model = "equidistant", method = "mesh", depth_format = "exr";
  double focal = 0, fraction = 0.8, capture_rate = 1.0;
  bool force = false, sequential = false;
};

int run_generate(const GenerateArgs& a, const CLI::App& cmd, unsigned threads) {
  GenerateConfig cfg;
  apply_json(cfg, load_config(a.config));
  json flags = json::object();
  const auto given = [&](const char* name) { return cmd.get_option(name)->count() > 0; };
  if (given("--seed")) flags["seed"] = a.seed;
  if (given("--frames")) flags["frames"] = a.frames;
  if (given("--size")) flags["size"] = a.size;
  if (given("--rig")) flags["rig"] = a.rig;
  if (given("--model")) flags["model"] = a.model;
  if (given("--focal")) flags["focal"] = a.focal;
  if (given("--fraction")) flags["fraction"] = a.fraction;
  if (given("--sequential")) flags["sequential"] = a.sequential;
  if (given("--mesh-res")) flags["mesh_resolution"] = a.mesh_res;
  if (given("--face-res")) flags["face_resolution"] = a.face_res;
  if (given("--method")) flags["method"] = a.method;
  if (given("--depth-format")) flags["depth_format"] = a.depth_format;
  if (given("--capture-rate")) flags["capture_rate_hz"] = a.capture_rate;
  if (given("--layers")) flags["city"] = {{"layer_count", a.layers}};
  apply_json(cfg, flags);
  cfg.threads = threads;
  cfg.validate();
  spdlog::info("generating {} frames of {}x{} ({} rig, {} model, f = {:.3f} px) into {}", cfg.frames, cfg.size,
               cfg.size, to_string(cfg.rig), to_string(cfg.model), cfg.resolved_focal(), a.out);
  const auto manifest = generate_dataset(cfg, a.out, a.force, [](int done, int total, const std::string& id) {
    spdlog::debug("{}/{} {}", done, total, id);
  });
  std::cout << "generated " << manifest.frames.size() << " frames";
  if (manifest.split) std::cout << " (" << manifest.split->train.size() << " train / " << manifest.split->val.size()
                                << " val)";
  std::cout << " in " << a.out << "\n";
  return kOk;
}

struct WarpArgs {
  std::string in, out, config;
  double focal = 159.0, source_focal = 0.0;
  bool force = false;
};

int run_warp(const WarpArgs& a, const CLI::App& cmd, unsigned threads) {
  json cfg = load_config(a.config);
  if (cmd.get_option("--focal")->count() || !cfg.contains("focal")) cfg["focal"] = a.focal;
  if (cmd.get_option("--source-focal")->count()) cfg["source_focal"] = a.source_focal;
  double focal = 0.0;
  std::optional<double> source_focal;
  try {
    focal = cfg.at("focal").get<double>();
    if (cfg.contains("source_focal") && !cfg["source_focal"].is_null()) {
      source_focal = cfg["source_focal"].get<double>();
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  if (!(focal > 0.0) || (source_focal && !(*source_focal > 0.0))) throw UsageError("focal lengths must be positive");
  cfg["source_focal"] = source_focal ? json(*source_focal) : json(nullptr);
  cfg["model"] = "equidistant";

  const PairSet set = find_pairs(a.in);
  prepare_output(a.out, a.force);
  write_json(fs::path(a.out) / "config_used.json", cfg);
  long void_pixels = 0, total_pixels = 0;
  for (const auto& [img_rel, label_rel] : set.pairs) {
    const ColorImage rgb = read_png_rgb(fs::path(a.in) / "images" / img_rel);
    const ColorImage label = read_png_rgb(fs::path(a.in) / "labels" / label_rel);
    if (!rgb.same_shape(label.width(), label.height())) {
      spdlog::warn("size mismatch, skipped: {}", img_rel.generic_string());
      return kFailure;
    }
    const auto w_rgb = perspective_to_fisheye({rgb, source_focal}, focal, ChannelKind::rgb, threads);
    const auto w_label = perspective_to_fisheye({label, source_focal}, focal, ChannelKind::label, threads);
    write_into(fs::path(a.out) / "images", img_rel, w_rgb.image);
    write_into(fs::path(a.out) / "labels", label_rel, w_label.image);
    fs::path void_rel = img_rel;
    write_mask_into(fs::path(a.out) / "void", void_rel, w_rgb.void_mask);
    void_pixels += std::ranges::count(w_rgb.void_mask.pixels(), std::uint8_t{1});
    total_pixels += static_cast<long>(w_rgb.void_mask.size());
    spdlog::debug("warped {}", img_rel.generic_string());
  }
  std::cout << "warped " << set.pairs.size() << " pairs, skipped " << set.unpaired.size() << " unpaired files, "
            << void_pixels << " of " << total_pixels << " pixels void\n";
  return report_unpaired(set);
}

struct AugmentArgs {
  std::string in, out, config;
  std::uint64_t seed = 0;
  AugmentConfig aug;
  double sat_lo = 0.8, sat_hi = 1.2;
  bool force = false;
};

int run_augment(const AugmentArgs& a, const CLI::App& cmd, unsigned threads) {
  json file = load_config(a.config);
  AugmentConfig cfg;
  const auto pick = [&](const char* flag, const char* key, double& field, double flag_value) {
    if (cmd.get_option(flag)->count()) {
      field = flag_value;
    } else if (file.contains(key)) {
      field = file.at(key).get<double>();
    }
  };
  try {
    pick("--flip-prob", "flip_probability", cfg.flip_probability, a.aug.flip_probability);
    pick("--brightness-prob", "brightness_probability", cfg.brightness_probability, a.aug.brightness_probability);
    pick("--brightness-max-delta", "brightness_max_delta", cfg.brightness_max_delta, a.aug.brightness_max_delta);
    pick("--hue-prob", "hue_probability", cfg.hue_probability, a.aug.hue_probability);
    pick("--hue-max-delta", "hue_max_delta", cfg.hue_max_delta, a.aug.hue_max_delta);
    pick("--saturation-prob", "saturation_probability", cfg.saturation_probability, a.aug.saturation_probability);
    pick("--saturation-lo", "saturation_lo", cfg.saturation_range.first, a.sat_lo);
    pick("--saturation-hi", "saturation_hi", cfg.saturation_range.second, a.sat_hi);
    pick("--noise-prob", "noise_probability", cfg.noise_probability, a.aug.noise_probability);
    pick("--noise-mean", "noise_mean", cfg.noise_mean, a.aug.noise_mean);
    pick("--noise-std", "noise_std", cfg.noise_std, a.aug.noise_std);
    cfg.seed = cmd.get_option("--seed")->count() ? a.seed : file.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  const json echoed = {{"seed", cfg.seed},
                       {"flip_probability", cfg.flip_probability},
                       {"brightness_probability", cfg.brightness_probability},
                       {"brightness_max_delta", cfg.brightness_max_delta},
                       {"hue_probability", cfg.hue_probability},
                       {"hue_max_delta", cfg.hue_max_delta},
                       {"saturation_probability", cfg.saturation_probability},
                       {"saturation_lo", cfg.saturation_range.first},
                       {"saturation_hi", cfg.saturation_range.second},
                       {"noise_probability", cfg.noise_probability},
                       {"noise_mean", cfg.noise_mean},
                       {"noise_std", cfg.noise_std}};

  const PairSet set = find_pairs(a.in);
  prepare_output(a.out, a.force);
  write_json(fs::path(a.out) / "config_used.json", echoed);
  std::vector<std::string> errors(set.pairs.size());
  // Sample index = position in the sorted pair list, so output is independent of scheduling.
  parallel_for(static_cast<int>(set.pairs.size()), threads, [&](int i) {
    const auto& [img_rel, label_rel] = set.pairs[i];
    try {
      const ColorImage rgb = read_png_rgb(fs::path(a.in) / "images" / img_rel);
      const ColorImage label = read_png_rgb(fs::path(a.in) / "labels" / label_rel);
      const auto out = augment_pair(rgb, label, cfg, static_cast<std::uint64_t>(i));
      write_into(fs::path(a.out) / "images", img_rel, out.rgb);
      write_into(fs::path(a.out) / "labels", label_rel, out.label);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  int rc = report_unpaired(set);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      spdlog::error("{}: {}", set.pairs[i].first.generic_string(), errors[i]);
      rc = kFailure;
    }
  }
  std::cout << "augmented " << set.pairs.size() << " pairs, skipped " << set.unpaired.size() << " unpaired files\n";
  return rc;
}

struct SplitArgs {
  std::string manifest, output;
  double fraction = 0.8;
  std::uint64_t seed = 0;
  bool sequential = false;
};

int run_split(const SplitArgs& a) {
  DatasetManifest m;
  try {
    m = read_manifest(a.manifest);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  if (m.frames.empty()) throw UsageError("manifest lists no frames");
  apply_split(m, {a.fraction, a.seed, !a.sequential});
  write_manifest(m, a.output.empty() ? a.manifest : a.output);
  std::cout << "train " << m.split->train.size() << "\nval " << m.split->val.size() << "\n";
  return kOk;
}

struct EvalArgs {
  std::string pred, gt, layers, output;
  std::vector<std::string> classes;
};

int run_eval(const EvalArgs& a, unsigned threads) {
  LayerMap layers = canonical_layer_map(kMaxLayers);
  if (!a.layers.empty()) {
    try {
      layers = import_layer_map(a.layers);
    } catch (const IoError& e) {
      throw UsageError(e.what());
    }
  }
  const ClassMappingRule rule = a.classes.empty() ? ClassMappingRule() : ClassMappingRule(a.classes);
  rule.free_colors(layers);
  const IoUReport report = evaluate_batch(a.pred, a.gt, rule, layers, threads);
  const std::string table = to_table(report);
  std::cout << table;
  if (!a.output.empty()) {
    fs::create_directories(a.output);
    write_json(fs::path(a.output) / "report.json", to_json(report));
    write_text(fs::path(a.output) / "report.txt", table);
    write_json(fs::path(a.output) / "config_used.json",
               {{"pred_dir", a.pred},
                {"gt_dir", a.gt},
                {"layers", a.layers},
                {"classes", std::vector<std::string>(rule.classes().begin(), rule.classes().end())}});
  }
  for (const auto& s : report.skipped) spdlog::warn("skipped {}: {}", s.frame_id, s.reason);
  return report.skipped.empty() ? kOk : kFailure;
}

int run_verify(const std::string& root) {
  if (!fs::exists(fs::path(root) / "manifest.json")) throw UsageError(root + " has no manifest.json");
  const VerifyReport r = verify_dataset(root);
  for (const auto& v : r.violations) {
    std::cout << (v.frame_id.empty() ? "<dataset>" : v.frame_id) << "  " << v.rule << "  " << v.detail << "\n";
  }
  std::cout << r.frames_checked << " frames checked, " << r.violations.size() << " violations\n";
  return r.clean() ? kOk : kFailure;
}

struct MeshDumpArgs {
  std::string out = "-";
  int size = 1024, mesh_res = 16, face_res = 256;
  std::string rig = "quad45", model = "equidistant";
  double focal = 0;
};

int run_mesh_dump(const MeshDumpArgs& a, const CLI::App& cmd) {
  GenerateConfig g;
  json flags = {{"size", a.size}, {"rig", a.rig}, {"model", a.model}};
  if (cmd.get_option("--focal")->count()) flags["focal"] = a.focal;
  apply_json(g, flags);
  const FisheyeCameraSpec spec = g.spec();
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const WarpMesh mesh = build_warp_mesh(spec, make_rig(g.rig, a.face_res), a.mesh_res);
  if (a.out == "-") {
    dump_mesh(mesh, std::cout);
  } else {
    std::ofstream os(a.out);
    if (!os) throw IoError(a.out, "cannot open for writing");
    dump_mesh(mesh, os);
  }
  spdlog::info("{} vertices, {} triangles", mesh.vertices.size(), mesh.triangles.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("omnisynth");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::cfg::load_env_levels();

  CLI::App app{"Synthetic fisheye dataset toolkit"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);

  const auto models = CLI::IsMember({"equidistant", "stereographic", "equisolid", "orthographic"});
  const auto rigs = CLI::IsMember({"quad45", "cube5"});

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "render a synthetic fisheye dataset");
  generate->add_option("output", gen.out, "dataset root")->required();
  generate->add_option("--config", gen.config, "JSON config; flags override it");
  generate->add_option("--seed", gen.seed, "scene and split seed");
  generate->add_option("--frames", gen.frames, "number of frames")->check(CLI::NonNegativeNumber);
  generate->add_option("--size", gen.size, "square output size in pixels")->check(CLI::PositiveNumber);
  generate->add_option("--rig", gen.rig, "rig preset")->check(rigs);
  generate->add_option("--model", gen.model, "projection model")->check(models);
  generate->add_option("--focal", gen.focal, "fisheye focal length in pixels (default: circle fills the frame)");
  generate->add_option("--fraction", gen.fraction, "training fraction");
  generate->add_flag("--sequential", gen.sequential, "split without shuffling");
  generate->add_option("--mesh-res", gen.mesh_res, "warp mesh grid vertices per side");
  generate->add_option("--face-res", gen.face_res, "rig face resolution (0 = auto)");
  generate->add_option("--method", gen.method, "composition method")->check(CLI::IsMember({"mesh", "per_pixel"}));
  generate->add_option("--depth-format", gen.depth_format, "depth file format")->check(CLI::IsMember({"exr", "raw"}));
  generate->add_option("--capture-rate", gen.capture_rate, "frames saved per second of driving");
  generate->add_option("--layers", gen.layers, "layer count of the generated city");
  generate->add_flag("--force", gen.force, "overwrite a non-empty output directory");
  generate->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

  WarpArgs warp;
  auto* warp_cmd = app.add_subcommand("warp", "warp a perspective dataset (images/, labels/) into fisheye geometry");
  warp_cmd->add_option("input", warp.in, "input root with images/ and labels/")->required();
  warp_cmd->add_option("output", warp.out, "output root")->required();
  warp_cmd->add_option("--config", warp.config, "JSON config; flags override it");
  warp_cmd->add_option("--focal", warp.focal, "equidistant fisheye focal length in pixels");
  warp_cmd->add_option("--source-focal", warp.source_focal, "pinhole focal of the input (default: --focal)");
  warp_cmd->add_flag("--force", warp.force, "overwrite a non-empty output directory");
  warp_cmd->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

  AugmentArgs aug;
  auto* augment = app.add_subcommand("augment", "augment a dataset (images/, labels/)");
  augment->add_option("input", aug.in, "input root with images/ and labels/")->required();
  augment->add_option("output", aug.out, "output root")->required();
  augment->add_option("--config", aug.config, "JSON config; flags override it");
  augment->add_option("--seed", aug.seed, "augmentation seed");
  augment->add_option("--flip-prob", aug.aug.flip_probability);
  augment->add_option("--brightness-prob", aug.aug.brightness_probability);
  augment->add_option("--brightness-max-delta", aug.aug.brightness_max_delta, "fraction of full scale");
  augment->add_option("--hue-prob", aug.aug.hue_probability);
  augment->add_option("--hue-max-delta", aug.aug.hue_max_delta, "turns");
  augment->add_option("--saturation-prob", aug.aug.saturation_probability);
  augment->add_option("--saturation-lo", aug.sat_lo);
  augment->add_option("--saturation-hi", aug.sat_hi);
  augment->add_option("--noise-prob", aug.aug.noise_probability);
  augment->add_option("--noise-mean", aug.aug.noise_mean);
  augment->add_option("--noise-std", aug.aug.noise_std, "intensity levels");
  augment->add_flag("--force", aug.force, "overwrite a non-empty output directory");
  augment->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "assign a manifest's frames to train / val");
  split_cmd->add_option("manifest", split.manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--fraction", split.fraction, "training fraction");
  split_cmd->add_option("--seed", split.seed, "shuffle seed");
  split_cmd->add_flag("--sequential", split.sequential, "keep manifest order");
  split_cmd->add_option("-o,--output", split.output, "write here instead of updating in place");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "free-space IoU of predicted masks against ground truth");
  eval->add_option("pred", ev.pred, "prediction directory")->required();
  eval->add_option("gt", ev.gt, "ground-truth directory")->required();
  eval->add_option("--layers", ev.layers, "layer map JSON (default: canonical layers)");
  eval->add_option("--classes", ev.classes, "free-space classes")->delimiter(',');
  eval->add_option("-o,--output", ev.output, "directory for report.json / report.txt");
  eval->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

  std::string verify_root;
  auto* verify = app.add_subcommand("verify", "check a dataset tree");
  verify->add_option("root", verify_root, "dataset root")->required();

  MeshDumpArgs md;
  auto* mesh_dump = app.add_subcommand("mesh-dump", "write a warp mesh as text");
  mesh_dump->add_option("output", md.out, "output file, - for stdout");
  mesh_dump->add_option("--size", md.size)->check(CLI::PositiveNumber);
  mesh_dump->add_option("--rig", md.rig)->check(rigs);
  mesh_dump->add_option("--model", md.model)->check(models);
  mesh_dump->add_option("--focal", md.focal);
  mesh_dump->add_option("--mesh-res", md.mesh_res)->check(CLI::Range(2, 4096));
  mesh_dump->add_option("--face-res", md.face_res)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) return run_generate(gen, *generate, threads);
    if (*warp_cmd) return run_warp(warp, *warp_cmd, threads);
    if (*augment) return run_augment(aug, *augment, threads);
    if (*split_cmd) return run_split(split);
    if (*eval) return run_eval(ev, threads);
    if (*verify) return run_verify(verify_root);
    if (*mesh_dump) return run_mesh_dump(md, *mesh_dump);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const SplitError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const MappingRuleError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const FrameError& e) {
    spdlog::error("frame {} failed: {}", e.frame_id(), e.what());
    return kFailure;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
  return kUsage;
}
