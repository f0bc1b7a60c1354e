#include "osmda/render/style.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "osmda/embedded.hpp"
#include "osmda/error.hpp"
#include "osmda/object_filter.hpp"

namespace osmda::render {

namespace {

constexpr std::array<std::string_view, 7> kLayerNames = {"other",  "landuse",   "natural",  "water",
                                                         "roads", "buildings", "amenities"};

Rgba parse_rgba(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::kInvalidArgument, "color must be [r, g, b, a]");
  Rgba c{};
  for (std::size_t i = 0; i < 4; ++i) {
    const int v = j[i].get<int>();
    if (v < 0 || v > 255) throw Error(ErrorCode::kInvalidArgument, "color component out of range");
    c[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

std::string value_of(const osm::Tags& tags, std::string_view key) {
  const auto* v = osm::find_tag(tags, key);
  return v ? *v : std::string();
}

}  // namespace

std::string_view to_string(Layer layer) { return kLayerNames[static_cast<std::size_t>(layer)]; }

std::optional<Layer> layer_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kLayerNames.size(); ++i)
    if (kLayerNames[i] == s) return static_cast<Layer>(i);
  return std::nullopt;
}

void StyleTable::validate() const {
  std::set<int> z;
  for (Layer l : kLayers) {
    auto it = layers.find(l);
    if (it == layers.end()) {
      throw Error(ErrorCode::kInvalidArgument, "style table lacks layer " + std::string(to_string(l)));
    }
    if (!z.insert(it->second.z_order).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate z_order in style table");
    }
    if (!(it->second.stroke_width_px > 0)) {
      throw Error(ErrorCode::kInvalidArgument, "layer " + std::string(to_string(l)) + ": stroke width must be > 0");
    }
    for (const auto& [name, cls] : it->second.classes) {
      if (!(cls.width > 0)) throw Error(ErrorCode::kInvalidArgument, "stroke class " + name + ": width must be > 0");
    }
  }
  if (label_font_px <= 0) throw Error(ErrorCode::kInvalidArgument, "label font size must be > 0");
}

StyleTable parse_style_table(const nlohmann::json& j) {
  try {
    StyleTable t;
    t.version = j.value("version", 1);
    t.background = parse_rgba(j.at("background"));
    t.text_color = parse_rgba(j.at("text_color"));
    t.label_font_px = j.value("label_font_px", 12);
    if (j.contains("min_pixels")) {
      t.min_polygon_px = j["min_pixels"].value("polygon", 4.0);
      t.min_line_px = j["min_pixels"].value("line", 8.0);
    }
    for (const auto& [name, def] : j.at("layers").items()) {
      const auto layer = layer_from_string(name);
      if (!layer) throw Error(ErrorCode::kInvalidArgument, "unknown style layer " + name);
      LayerDef d;
      d.z_order = def.at("z_order").get<int>();
      d.label_priority = def.at("label_priority").get<int>();
      d.fill = parse_rgba(def.at("fill"));
      d.stroke = parse_rgba(def.at("stroke"));
      d.stroke_width_px = def.at("stroke_width_px").get<double>();
      d.glyph = def.value("glyph", "");
      d.glyph_color = def.contains("glyph_color") ? parse_rgba(def["glyph_color"]) : d.stroke;
      if (def.contains("fills"))
        for (const auto& [k, c] : def["fills"].items()) d.fills[k] = parse_rgba(c);
      if (def.contains("classes")) {
        for (const auto& [k, c] : def["classes"].items()) {
          StrokeClass sc{parse_rgba(c.at("color")), c.at("width").get<double>(), std::nullopt};
          if (c.contains("label_priority")) sc.label_priority = c["label_priority"].get<int>();
          d.classes[k] = sc;
        }
      }
      if (def.contains("min_polygon_px")) d.min_polygon_px = def["min_polygon_px"].get<double>();
      if (def.contains("min_line_px")) d.min_line_px = def["min_line_px"].get<double>();
      t.layers[*layer] = std::move(d);
    }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed style table: ") + e.what());
  }
}

StyleTable load_style_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read style table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  return parse_style_table(j);
}

const StyleTable& default_style_table() {
  static const StyleTable table = parse_style_table(nlohmann::json::parse(embedded_file("style_table.json")));
  return table;
}

LayerStyle assign_layer(const osm::OsmObject& obj, const StyleTable& table) {
  const ObjectClass cls = obj.object_class.value_or(filter::classify_object(obj.tags));
  Layer layer = Layer::kOther;
  std::string key;
  switch (cls) {
    case ObjectClass::kLanduse:
      key = value_of(obj.tags, "landuse");
      layer = (key == "reservoir" || key == "basin") ? Layer::kWater : Layer::kLanduse;
      break;
    case ObjectClass::kLeisure:
      key = value_of(obj.tags, "leisure");
      layer = Layer::kLanduse;
      break;
    case ObjectClass::kNatural:
      key = value_of(obj.tags, "natural");
      layer = (key == "water" || key == "bay") ? Layer::kWater : Layer::kNatural;
      break;
    case ObjectClass::kWaterway:
      key = value_of(obj.tags, "waterway");
      layer = Layer::kWater;
      break;
    case ObjectClass::kHighway:
      key = value_of(obj.tags, "highway");
      if (key.ends_with("_link")) key.resize(key.size() - 5);
      layer = Layer::kRoads;
      break;
    case ObjectClass::kTrafficCalming:
      layer = Layer::kRoads;
      break;
    case ObjectClass::kBuilding:
      layer = Layer::kBuildings;
      break;
    case ObjectClass::kAmenity:
    case ObjectClass::kEmergency:
      layer = Layer::kAmenities;
      break;
    default:
      if (osm::find_tag(obj.tags, "water")) layer = Layer::kWater;
      break;
  }

  const LayerDef& def = table.layers.at(layer);
  LayerStyle s;
  s.layer = layer;
  s.z_order = def.z_order;
  s.fill = def.fill;
  s.stroke = def.stroke;
  s.stroke_width_px = def.stroke_width_px;
  s.glyph = def.glyph;
  s.glyph_color = def.glyph_color;
  s.label_priority = def.label_priority;
  s.min_polygon_px = def.min_polygon_px.value_or(table.min_polygon_px);
  s.min_line_px = def.min_line_px.value_or(table.min_line_px);
  if (auto f = def.fills.find(key); !key.empty() && f != def.fills.end()) {
    s.fill = f->second;
    s.style_key = key;
  }
  if (auto c = def.classes.find(key); !key.empty() && c != def.classes.end()) {
    s.stroke = c->second.color;
    s.stroke_width_px = c->second.width;
    if (c->second.label_priority) s.label_priority = *c->second.label_priority;
    s.style_key = key;
  }
  return s;
}

double pixel_extent(const osm::OsmObject& obj, double resolution_m) {
  if (!(resolution_m > 0)) throw Error(ErrorCode::kInvalidArgument, "resolution must be positive");
  switch (obj.geometry.kind) {
    case geo::GeometryKind::kPolygon:
      return std::sqrt(geo::polygon_area(obj.geometry)) / resolution_m;
    case geo::GeometryKind::kLineString:
      return geo::linestring_length(obj.geometry) / resolution_m;
    case geo::GeometryKind::kPoint:
      break;
  }
  return std::numeric_limits<double>::infinity();
}

bool zoom_visible(geo::GeometryKind kind, double extent_px, const LayerStyle& style) {
  switch (kind) {
    case geo::GeometryKind::kPolygon:
      return extent_px >= style.min_polygon_px;
    case geo::GeometryKind::kLineString:
      return extent_px >= style.min_line_px;
    case geo::GeometryKind::kPoint:
      break;
  }
  return true;
}

bool zoom_visible(const osm::OsmObject& obj, double resolution_m, const LayerStyle& style) {
  return zoom_visible(obj.geometry.kind, pixel_extent(obj, resolution_m), style);
}

}  // namespace osmda::render
