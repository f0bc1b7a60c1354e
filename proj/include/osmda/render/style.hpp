#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "osmda/osm.hpp"

namespace osmda::render {

using Rgba = std::array<std::uint8_t, 4>;

enum class Layer { kOther, kLanduse, kNatural, kWater, kRoads, kBuildings, kAmenities };

inline constexpr std::array<Layer, 7> kLayers = {Layer::kOther, Layer::kLanduse, Layer::kNatural,
                                                 Layer::kWater, Layer::kRoads, Layer::kBuildings,
                                                 Layer::kAmenities};

std::string_view to_string(Layer layer);
std::optional<Layer> layer_from_string(std::string_view s);

// Resolved style of one object.
struct LayerStyle {
  Layer layer = Layer::kOther;
  int z_order = 0;
  Rgba fill{};
  Rgba stroke{};
  double stroke_width_px = 1.0;
  std::string glyph;  // empty, "dot" or "circle"
  Rgba glyph_color{};
  int label_priority = 0;
  // Tag value that picked a fill or a stroke class, empty for the layer default.
  std::string style_key;
  double min_polygon_px = 4.0;
  double min_line_px = 8.0;
};

struct StrokeClass {
  Rgba color{};
  double width = 1.0;
  std::optional<int> label_priority;
};

struct LayerDef {
  int z_order = 0;
  int label_priority = 0;
  Rgba fill{};
  Rgba stroke{};
  double stroke_width_px = 1.0;
  std::string glyph;
  Rgba glyph_color{};
  std::map<std::string, Rgba> fills;
  std::map<std::string, StrokeClass> classes;
  std::optional<double> min_polygon_px;
  std::optional<double> min_line_px;
};

struct StyleTable {
  int version = 1;
  Rgba background{};
  Rgba text_color{};
  int label_font_px = 12;
  double min_polygon_px = 4.0;
  double min_line_px = 8.0;
  std::map<Layer, LayerDef> layers;

  // Throws kInvalidArgument on duplicate z_order, non-positive line stroke
  // widths, or a missing layer.
  void validate() const;
};

StyleTable parse_style_table(const nlohmann::json& j);
StyleTable load_style_table(const std::filesystem::path& path);
// The table compiled into the library.
const StyleTable& default_style_table();

LayerStyle assign_layer(const osm::OsmObject& obj, const StyleTable& table = default_style_table());

// Pixel extent used for zoom filtering: sqrt(area)/res for polygons,
// length/res for lines, +inf for points.
double pixel_extent(const osm::OsmObject& obj, double resolution_m);

// Inclusive at the threshold.
bool zoom_visible(geo::GeometryKind kind, double extent_px, const LayerStyle& style);
bool zoom_visible(const osm::OsmObject& obj, double resolution_m, const LayerStyle& style);

}  // namespace osmda::render
