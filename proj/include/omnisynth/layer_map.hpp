#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnisynth/image.hpp"

namespace omnisynth {

inline constexpr int kMaxLayers = 32;

/// Label color of pixels outside the fisheye field of view. No layer may use it.
inline constexpr Rgb8 kVoidColor{0, 0, 0};

class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class LayerMapError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Layer {
  int id = 0;
  std::string name;
  Rgb8 color;

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Layer id -> (name, color) table. At most 32 entries, unique ids and
/// pairwise distinct colors so label images invert to ids.
class LayerMap {
 public:
  LayerMap() = default;
  explicit LayerMap(std::vector<Layer> layers) : layers_(std::move(layers)) {
    std::ranges::sort(layers_, {}, &Layer::id);
    validate();
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

  void add(Layer layer) {
    auto layers = layers_;
    layers.push_back(std::move(layer));
    *this = LayerMap(std::move(layers));
  }

  const Layer* find(int id) const {
    auto it = std::ranges::find(layers_, id, &Layer::id);
    return it == layers_.end() ? nullptr : &*it;
  }
  const Layer* find(std::string_view name) const {
    auto it = std::ranges::find(layers_, name, &Layer::name);
    return it == layers_.end() ? nullptr : &*it;
  }
  const Layer* find(Rgb8 color) const {
    auto it = std::ranges::find(layers_, color, &Layer::color);
    return it == layers_.end() ? nullptr : &*it;
  }
  bool contains_color(Rgb8 color) const { return find(color) != nullptr; }

  /// packed color -> layer id
  std::unordered_map<std::uint32_t, int> color_index() const {
    std::unordered_map<std::uint32_t, int> index;
    for (const auto& l : layers_) index.emplace(pack(l.color), l.id);
    return index;
  }

  void validate() const {
    if (layers_.size() > static_cast<std::size_t>(kMaxLayers)) {
      throw CapacityError("layer map holds " + std::to_string(layers_.size()) + " layers; at most " +
                          std::to_string(kMaxLayers) + " are supported");
    }
    std::set<int> ids;
    std::set<std::uint32_t> colors;
    std::set<std::string> names;
    for (const auto& l : layers_) {
      if (l.id < 0 || l.id >= kMaxLayers) {
        throw LayerMapError("layer id " + std::to_string(l.id) + " outside [0, 31]");
      }
      if (!ids.insert(l.id).second) throw LayerMapError("duplicate layer id " + std::to_string(l.id));
      if (l.color == kVoidColor) {
        throw LayerMapError("layer '" + l.name + "' uses the reserved void color");
      }
      if (!colors.insert(pack(l.color)).second) {
        throw LayerMapError("duplicate layer color on layer '" + l.name + "'");
      }
      if (l.name.empty()) throw LayerMapError("layer " + std::to_string(l.id) + " has an empty name");
      if (!names.insert(l.name).second) throw LayerMapError("duplicate layer name '" + l.name + "'");
    }
  }

  friend bool operator==(const LayerMap&, const LayerMap&) = default;

 private:
  std::vector<Layer> layers_;
};

// JSON schema: [{"id": int, "name": string, "color": [r, g, b]}, ...] sorted by id.

inline nlohmann::json to_json(const LayerMap& map) {
  map.validate();
  auto arr = nlohmann::json::array();
  for (const auto& l : map.layers()) {
    arr.push_back({{"id", l.id}, {"name", l.name}, {"color", {l.color.r, l.color.g, l.color.b}}});
  }
  return arr;
}

inline LayerMap layer_map_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw LayerMapError("layer map JSON must be an array");
  if (j.size() > static_cast<std::size_t>(kMaxLayers)) {
    throw CapacityError("layer map JSON holds " + std::to_string(j.size()) + " layers");
  }
  std::vector<Layer> layers;
  for (const auto& e : j) {
    const auto& c = e.at("color");
    if (!c.is_array() || c.size() != 3) throw LayerMapError("layer color must be [r, g, b]");
    const auto channel = [](const nlohmann::json& v) {
      const int x = v.get<int>();
      if (x < 0 || x > 255) throw LayerMapError("color channel out of [0, 255]");
      return static_cast<std::uint8_t>(x);
    };
    layers.push_back({e.at("id").get<int>(), e.at("name").get<std::string>(),
                      Rgb8{channel(c[0]), channel(c[1]), channel(c[2])}});
  }
  return LayerMap(std::move(layers));
}

/// Canonical layer vocabulary for generated scenes. The first six are always
/// present; colors follow the common street-scene palette where one exists.
inline const std::array<Layer, kMaxLayers>& canonical_layers() {
  static const std::array<Layer, kMaxLayers> table = [] {
    std::array<Layer, kMaxLayers> t{};
    const std::array<std::pair<const char*, Rgb8>, 19> named{{
        {"sky", {70, 130, 180}},
        {"road", {128, 64, 128}},
        {"sidewalk", {244, 35, 232}},
        {"terrain", {152, 251, 152}},
        {"building", {70, 70, 70}},
        {"vehicle", {0, 0, 142}},
        {"vegetation", {107, 142, 35}},
        {"pole", {153, 153, 153}},
        {"parking", {250, 170, 160}},
        {"rail_track", {230, 150, 140}},
        {"person", {220, 20, 60}},
        {"fence", {190, 153, 153}},
        {"wall", {102, 102, 156}},
        {"traffic_sign", {220, 220, 0}},
        {"traffic_light", {250, 170, 30}},
        {"bicycle", {119, 11, 32}},
        {"bridge", {150, 100, 100}},
        {"guard_rail", {180, 165, 180}},
        {"tunnel", {150, 120, 90}},
    }};
    for (int i = 0; i < kMaxLayers; ++i) {
      if (i < static_cast<int>(named.size())) {
        t[i] = {i, named[i].first, named[i].second};
      } else {
        // Distinct filler colors that avoid the named palette and void.
        const auto k = static_cast<std::uint8_t>(i);
        t[i] = {i, "layer_" + std::to_string(i),
                Rgb8{static_cast<std::uint8_t>(17 * k % 251 + 1), static_cast<std::uint8_t>(37 * k % 241 + 3),
                     static_cast<std::uint8_t>(255 - 5 * k)}};
      }
    }
    return t;
  }();
  return table;
}

/// First `count` canonical layers.
inline LayerMap canonical_layer_map(int count) {
  if (count > kMaxLayers) {
    throw CapacityError("requested " + std::to_string(count) + " layers; at most 32 are supported");
  }
  if (count < 0) throw LayerMapError("layer count must be nonnegative");
  const auto& table = canonical_layers();
  return LayerMap(std::vector<Layer>(table.begin(), table.begin() + count));
}

}  // namespace omnisynth
