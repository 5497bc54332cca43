#pragma once

// Free-space class mapping and void-aware IoU scoring.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnisynth/image.hpp"
#include "omnisynth/image_io.hpp"
#include "omnisynth/layer_map.hpp"
#include "omnisynth/parallel.hpp"

namespace omnisynth {

class UnmappedColorError : public std::invalid_argument {
 public:
  UnmappedColorError(const std::string& what, std::vector<Rgb8> colors)
      : std::invalid_argument(what), colors_(std::move(colors)) {}
  const std::vector<Rgb8>& colors() const { return colors_; }

 private:
  std::vector<Rgb8> colors_;
};

class MappingRuleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 1 = free space, 0 = background.
using BinaryMask = MaskImage;

inline std::string normalize_class_name(std::string name) {
  for (char& c : name) {
    if (c == ' ' || c == '-') c = '_';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return name;
}

/// Set of layer names merged into the free-space class.
class ClassMappingRule {
 public:
  ClassMappingRule() : ClassMappingRule({"road", "sidewalk", "parking", "rail track", "terrain"}) {}
  explicit ClassMappingRule(const std::vector<std::string>& classes) {
    for (const auto& c : classes) classes_.insert(normalize_class_name(c));
    if (classes_.empty()) throw MappingRuleError("free-space class set must not be empty");
  }

  const std::set<std::string>& classes() const { return classes_; }

  /// Colors of the free-space layers present in `layers`. Classes absent
  /// from the map are ignored, but at least one must be present.
  std::unordered_set<std::uint32_t> free_colors(const LayerMap& layers) const {
    std::unordered_set<std::uint32_t> out;
    for (const auto& l : layers.layers()) {
      if (classes_.contains(normalize_class_name(l.name))) out.insert(pack(l.color));
    }
    if (out.empty()) throw MappingRuleError("no free-space class exists in the layer map");
    return out;
  }

 private:
  std::set<std::string> classes_;
};

/// Label colors -> free space / background. The void color maps to
/// background; unknown colors are an error.
inline BinaryMask map_to_binary(const ColorImage& label, const ClassMappingRule& rule, const LayerMap& layers) {
  const auto free = rule.free_colors(layers);
  const auto known = layers.color_index();
  BinaryMask out(label.width(), label.height());
  std::set<std::uint32_t> unknown;
  for (std::size_t i = 0; i < label.size(); ++i) {
    const Rgb8 c = label.pixels()[i];
    const auto key = pack(c);
    if (c != kVoidColor && !known.contains(key)) {
      unknown.insert(key);
      continue;
    }
    out.pixels()[i] = free.contains(key) ? 1 : 0;
  }
  if (!unknown.empty()) {
    std::vector<Rgb8> colors;
    std::ostringstream os;
    os << unknown.size() << " unmapped label colors:";
    for (auto k : unknown) {
      colors.push_back({static_cast<std::uint8_t>(k >> 16), static_cast<std::uint8_t>(k >> 8),
                        static_cast<std::uint8_t>(k)});
      if (colors.size() <= 8) os << " #" << std::hex << std::setw(6) << std::setfill('0') << k << std::dec;
    }
    throw UnmappedColorError(os.str(), std::move(colors));
  }
  return out;
}

struct IoUCounts {
  long intersection = 0;
  long union_ = 0;
  long counted = 0;  // non-void pixels
  long void_ = 0;

  std::optional<double> iou() const {
    if (union_ == 0) return std::nullopt;
    return static_cast<double>(intersection) / static_cast<double>(union_);
  }
};

inline IoUCounts iou_counts(const BinaryMask& pred, const BinaryMask& gt, const MaskImage& void_mask) {
  if (pred.width() < 1 || pred.height() < 1) throw PairingError("masks must be at least 1x1");
  if (!pred.same_shape(gt.width(), gt.height()) || !pred.same_shape(void_mask.width(), void_mask.height())) {
    throw PairingError("pred, gt and void masks differ in size");
  }
  IoUCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (void_mask.pixels()[i]) {
      ++c.void_;
      continue;
    }
    ++c.counted;
    const bool p = pred.pixels()[i] != 0, g = gt.pixels()[i] != 0;
    c.intersection += p && g;
    c.union_ += p || g;
  }
  return c;
}

/// Free-space IoU over non-void pixels; absent when the union is empty.
inline std::optional<double> compute_iou(const BinaryMask& pred, const BinaryMask& gt, const MaskImage& void_mask) {
  return iou_counts(pred, gt, void_mask).iou();
}

struct FrameScore {
  std::string frame_id;
  IoUCounts counts;
};

struct SkippedFrame {
  std::string frame_id;
  std::string reason;
};

struct IoUReport {
  std::vector<FrameScore> per_frame;
  std::vector<SkippedFrame> skipped;

  /// Mean over frames with a defined IoU.
  std::optional<double> mean_iou() const {
    double sum = 0.0;
    int n = 0;
    for (const auto& f : per_frame) {
      if (auto v = f.counts.iou()) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
  }
  /// Summed intersections over summed unions.
  std::optional<double> pooled_iou() const {
    IoUCounts total = totals();
    return total.iou();
  }
  IoUCounts totals() const {
    IoUCounts t;
    for (const auto& f : per_frame) {
      t.intersection += f.counts.intersection;
      t.union_ += f.counts.union_;
      t.counted += f.counts.counted;
      t.void_ += f.counts.void_;
    }
    return t;
  }
  long defined_frames() const {
    return std::ranges::count_if(per_frame, [](const FrameScore& f) { return f.counts.iou().has_value(); });
  }
};

inline nlohmann::json to_json(const IoUReport& r) {
  const auto opt = [](std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : r.per_frame) {
    frames.push_back({{"frame_id", f.frame_id},
                      {"iou", opt(f.counts.iou())},
                      {"defined", f.counts.iou().has_value()},
                      {"intersection", f.counts.intersection},
                      {"union", f.counts.union_},
                      {"counted_pixels", f.counts.counted},
                      {"void_pixels", f.counts.void_}});
  }
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"frame_id", s.frame_id}, {"reason", s.reason}});
  const IoUCounts t = r.totals();
  return {{"per_frame", frames},
          {"mean_iou", opt(r.mean_iou())},
          {"pooled_iou", opt(r.pooled_iou())},
          {"defined_frames", r.defined_frames()},
          {"counted_pixels", t.counted},
          {"void_pixels", t.void_},
          {"skipped", skipped}};
}

inline std::string to_table(const IoUReport& r) {
  std::size_t id_w = 8;
  for (const auto& f : r.per_frame) id_w = std::max(id_w, f.frame_id.size());
  std::ostringstream os;
  const auto fmt = [](std::optional<double> v) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(4) << *v;
    } else {
      s << "undef";
    }
    return s.str();
  };
  os << std::left << std::setw(static_cast<int>(id_w)) << "frame" << "  " << std::right << std::setw(8) << "iou"
     << std::setw(12) << "inter" << std::setw(12) << "union" << std::setw(12) << "counted" << std::setw(12)
     << "void" << '\n';
  for (const auto& f : r.per_frame) {
    os << std::left << std::setw(static_cast<int>(id_w)) << f.frame_id << "  " << std::right << std::setw(8)
       << fmt(f.counts.iou()) << std::setw(12) << f.counts.intersection << std::setw(12) << f.counts.union_
       << std::setw(12) << f.counts.counted << std::setw(12) << f.counts.void_ << '\n';
  }
  const IoUCounts t = r.totals();
  os << std::left << std::setw(static_cast<int>(id_w)) << "mean" << "  " << std::right << std::setw(8)
     << fmt(r.mean_iou()) << '\n';
  os << std::left << std::setw(static_cast<int>(id_w)) << "pooled" << "  " << std::right << std::setw(8)
     << fmt(r.pooled_iou()) << std::setw(12) << t.intersection << std::setw(12) << t.union_ << std::setw(12)
     << t.counted << std::setw(12) << t.void_ << '\n';
  for (const auto& s : r.skipped) os << "skipped " << s.frame_id << ": " << s.reason << '\n';
  return os.str();
}

namespace detail {

inline bool has_suffix(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Frame id of a mask file, or empty for files that are not masks.
inline std::string mask_frame_id(const std::filesystem::path& p) {
  if (p.extension() != ".png") return {};
  std::string stem = p.stem().string();
  for (std::string_view skip : {"_rgb", "_void", "_depth"}) {
    if (has_suffix(stem, skip)) return {};
  }
  for (std::string_view strip : {"_label", "_pred", "_mask"}) {
    if (has_suffix(stem, strip)) return stem.substr(0, stem.size() - strip.size());
  }
  return stem;
}

inline std::map<std::string, std::filesystem::path> index_masks(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) throw IoError(dir, "not a directory");
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string id = mask_frame_id(e.path());
    if (id.empty()) continue;
    // Prefer the plainest name when several variants exist.
    auto [it, inserted] = out.emplace(id, e.path());
    if (!inserted && e.path().filename().string().size() < it->second.filename().string().size()) {
      it->second = e.path();
    }
  }
  return out;
}

/// Gray PNGs are binary masks (nonzero = free space); color PNGs are label
/// images run through map_to_binary.
inline BinaryMask load_binary(const PngImage& png, const ClassMappingRule& rule, const LayerMap& layers) {
  if (png.channels == 1) {
    BinaryMask m(png.gray.width(), png.gray.height());
    std::ranges::transform(png.gray.pixels(), m.pixels().begin(),
                           [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 1 : 0); });
    return m;
  }
  return map_to_binary(png.color, rule, layers);
}

}  // namespace detail

/// Scores every ground-truth frame in `gt_dir` against its counterpart in
/// `pred_dir`. Void comes from `<id>_void.png` next to the ground truth when
/// present, otherwise from void-colored ground-truth label pixels.
inline IoUReport evaluate_batch(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                const ClassMappingRule& rule, const LayerMap& layers, unsigned threads = 1) {
  const auto gt = detail::index_masks(gt_dir);
  const auto pred = detail::index_masks(pred_dir);
  std::vector<std::string> ids;
  IoUReport report;
  for (const auto& [id, path] : gt) {
    if (pred.contains(id)) {
      ids.push_back(id);
    } else {
      report.skipped.push_back({id, "no prediction for " + path.filename().string()});
    }
  }
  for (const auto& [id, path] : pred) {
    if (!gt.contains(id)) report.skipped.push_back({id, "no ground truth for " + path.filename().string()});
  }

  std::vector<std::optional<FrameScore>> scores(ids.size());
  std::vector<std::string> errors(ids.size());
  parallel_for(static_cast<int>(ids.size()), threads, [&](int i) {
    const std::string& id = ids[i];
    try {
      const PngImage gt_png = read_png(gt.at(id));
      const PngImage pred_png = read_png(pred.at(id));
      const BinaryMask g = detail::load_binary(gt_png, rule, layers);
      const BinaryMask p = detail::load_binary(pred_png, rule, layers);
      MaskImage void_mask(g.width(), g.height());
      const auto void_path = gt_dir / (id + "_void.png");
      if (std::filesystem::exists(void_path)) {
        void_mask = read_png_gray(void_path);
        for (auto& v : void_mask.pixels()) v = v ? 1 : 0;
      } else if (gt_png.channels == 3) {
        for (std::size_t k = 0; k < void_mask.size(); ++k) {
          void_mask.pixels()[k] = gt_png.color.pixels()[k] == kVoidColor ? 1 : 0;
        }
      }
      scores[i] = FrameScore{id, iou_counts(p, g, void_mask)};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (scores[i]) {
      report.per_frame.push_back(std::move(*scores[i]));
    } else {
      report.skipped.push_back({ids[i], errors[i]});
    }
  }
  std::ranges::sort(report.skipped, {}, &SkippedFrame::frame_id);
  return report;
}

}  // namespace omnisynth
