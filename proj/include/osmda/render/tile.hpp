#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmda/geo.hpp"
#include "osmda/osm.hpp"
#include "osmda/render/labels.hpp"
#include "osmda/render/style.hpp"

namespace osmda::render {

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;  // row-major, 4 bytes per pixel

  Raster() = default;
  Raster(int w, int h, const Rgba& fill);

  Rgba at(int x, int y) const;
  // Source-over blend with integer rounding.
  void blend(int x, int y, const Rgba& c);
};

struct PlacedLabel {
  std::string text;
  std::int64_t osm_id = 0;
  Layer layer = Layer::kOther;
  int priority = 0;
  Box box;
};

struct RenderedTile {
  std::string image_id;
  Raster raster;
  std::vector<PlacedLabel> labels;
  std::size_t painted_objects = 0;
  std::size_t zoom_hidden = 0;
  bool blank = false;  // nothing visible; raster is the background only

  nlohmann::json manifest_line() const;
};

// Paints visible objects in ascending z_order, then labels. Objects use
// their `label` (falling back to no text). Pure function of its inputs.
RenderedTile render_tile(const geo::ImageRecord& rec, const std::vector<osm::OsmObject>& objects,
                         const StyleTable& style = default_style_table());

std::string encode_png(const Raster& raster);
void write_png(const std::filesystem::path& path, const Raster& raster);

// Debug view of the same scene (geometry and placed label boxes).
std::string render_svg(const geo::ImageRecord& rec, const std::vector<osm::OsmObject>& objects,
                       const StyleTable& style = default_style_table());

// 5x7 bitmap glyph rows for a character (low 5 bits used, MSB = left).
// Unknown characters map to a hollow box.
const std::array<std::uint8_t, 7>& glyph_rows(char c);

}  // namespace osmda::render
