#include "osmda/render/tile.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "osmda/error.hpp"

namespace osmda::render {

Raster::Raster(int w, int h, const Rgba& fill) : width(w), height(h), rgba(static_cast<std::size_t>(w) * h * 4) {
  for (std::size_t i = 0; i < rgba.size(); i += 4) std::copy(fill.begin(), fill.end(), rgba.begin() + i);
}

Rgba Raster::at(int x, int y) const {
  const auto* p = rgba.data() + (static_cast<std::size_t>(y) * width + x) * 4;
  return {p[0], p[1], p[2], p[3]};
}

void Raster::blend(int x, int y, const Rgba& c) {
  auto* p = rgba.data() + (static_cast<std::size_t>(y) * width + x) * 4;
  const unsigned a = c[3];
  if (a == 255) {
    std::copy(c.begin(), c.end(), p);
    return;
  }
  for (int i = 0; i < 3; ++i) p[i] = static_cast<std::uint8_t>((c[i] * a + p[i] * (255 - a) + 127) / 255);
  p[3] = static_cast<std::uint8_t>(a + (p[3] * (255 - a) + 127) / 255);
}

namespace {

using Path = std::vector<geo::Pixel>;

// Pixel mask collecting one shape so overlapping strokes blend once.
class Mask {
 public:
  Mask(int w, int h) : w_(w), h_(h), bits_(static_cast<std::size_t>(w) * h, 0) {}

  void set(int x, int y) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto& b = bits_[static_cast<std::size_t>(y) * w_ + x];
    if (!b) {
      b = 1;
      touched_.push_back(static_cast<std::size_t>(y) * w_ + x);
    }
  }

  void paint(Raster& r, const Rgba& c) {
    std::sort(touched_.begin(), touched_.end());
    for (auto idx : touched_) {
      r.blend(static_cast<int>(idx % w_), static_cast<int>(idx / w_), c);
      bits_[idx] = 0;
    }
    touched_.clear();
  }

  int width() const { return w_; }
  int height() const { return h_; }

 private:
  int w_, h_;
  std::vector<std::uint8_t> bits_;
  std::vector<std::size_t> touched_;
};

// Even-odd scanline fill sampled at pixel centres.
void fill_polygon(const Path& ring, Mask& m) {
  if (ring.size() < 3) return;
  double miny = ring[0].y, maxy = ring[0].y;
  for (const auto& p : ring) {
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const int y0 = std::max(0, static_cast<int>(std::floor(miny)));
  const int y1 = std::min(m.height() - 1, static_cast<int>(std::ceil(maxy)));
  std::vector<double> xs;
  for (int y = y0; y <= y1; ++y) {
    const double yc = y + 0.5;
    xs.clear();
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      const auto& a = ring[i];
      const auto& b = ring[i + 1];
      if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y)) {
        xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      const int xa = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
      const int xb = std::min(m.width(), static_cast<int>(std::ceil(xs[i + 1] - 0.5)));
      for (int x = xa; x < xb; ++x) m.set(x, y);
    }
  }
}

double segment_distance2(double px, double py, const geo::Pixel& a, const geo::Pixel& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - px, ey = a.y + t * dy - py;
  return ex * ex + ey * ey;
}

void stroke_path(const Path& path, double width, Mask& m) {
  const double r = std::max(width, 1.0) / 2.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto& a = path[i];
    const auto& b = path[i + 1];
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
    const int x1 = std::min(m.width() - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
    const int y1 = std::min(m.height() - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (segment_distance2(x + 0.5, y + 0.5, a, b) <= r * r) m.set(x, y);
  }
}

void fill_disc(const geo::Pixel& c, double radius, Mask& m) {
  const int x0 = static_cast<int>(std::floor(c.x - radius)), x1 = static_cast<int>(std::ceil(c.x + radius));
  const int y0 = static_cast<int>(std::floor(c.y - radius)), y1 = static_cast<int>(std::ceil(c.y + radius));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - c.x, dy = y + 0.5 - c.y;
      if (dx * dx + dy * dy <= radius * radius) m.set(x, y);
    }
}

geo::Pixel polyline_midpoint(const Path& path) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) total += std::hypot(path[i + 1].x - path[i].x, path[i + 1].y - path[i].y);
  double remaining = total / 2;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double seg = std::hypot(path[i + 1].x - path[i].x, path[i + 1].y - path[i].y);
    if (seg > 0 && remaining <= seg) {
      const double t = remaining / seg;
      return {path[i].x + t * (path[i + 1].x - path[i].x), path[i].y + t * (path[i + 1].y - path[i].y)};
    }
    remaining -= seg;
  }
  return path.front();
}

geo::Pixel ring_centroid(const Path& ring) {
  double a2 = 0.0, cx = 0.0, cy = 0.0;
  const auto& o = ring.front();
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const double x0 = ring[i].x - o.x, y0 = ring[i].y - o.y;
    const double x1 = ring[i + 1].x - o.x, y1 = ring[i + 1].y - o.y;
    const double cross = x0 * y1 - x1 * y0;
    a2 += cross;
    cx += (x0 + x1) * cross;
    cy += (y0 + y1) * cross;
  }
  if (std::abs(a2) < 1e-12) return polyline_midpoint(ring);
  return {o.x + cx / (3 * a2), o.y + cy / (3 * a2)};
}

struct SceneItem {
  const osm::OsmObject* obj;
  LayerStyle style;
  Path path;
};

struct Scene {
  std::vector<SceneItem> items;  // paint order
  std::vector<LabelCandidate> candidates;
  std::vector<std::size_t> candidate_item;
  std::vector<std::size_t> placed;
  std::size_t zoom_hidden = 0;
};

int kind_order(geo::GeometryKind k) {
  switch (k) {
    case geo::GeometryKind::kPolygon: return 0;
    case geo::GeometryKind::kLineString: return 1;
    case geo::GeometryKind::kPoint: return 2;
  }
  return 3;
}

Scene build_scene(const geo::ImageRecord& rec, const std::vector<osm::OsmObject>& objects, const StyleTable& style) {
  rec.validate();
  const geo::FootprintTransform tf(rec);
  Scene s;
  for (const auto& obj : objects) {
    auto st = assign_layer(obj, style);
    if (!zoom_visible(obj, rec.resolution_m, st)) {
      ++s.zoom_hidden;
      continue;
    }
    Path path;
    path.reserve(obj.geometry.coords.size());
    for (const auto& c : obj.geometry.coords) path.push_back(tf.to_pixel(c));
    s.items.push_back({&obj, std::move(st), std::move(path)});
  }
  std::stable_sort(s.items.begin(), s.items.end(), [](const SceneItem& a, const SceneItem& b) {
    if (a.style.z_order != b.style.z_order) return a.style.z_order < b.style.z_order;
    const int ka = kind_order(a.obj->geometry.kind), kb = kind_order(b.obj->geometry.kind);
    if (ka != kb) return ka < kb;
    if (a.style.stroke_width_px != b.style.stroke_width_px) return a.style.stroke_width_px < b.style.stroke_width_px;
    return osm::id_less(*a.obj, *b.obj);
  });

  for (std::size_t i = 0; i < s.items.size(); ++i) {
    const auto& it = s.items[i];
    if (!it.obj->label || it.obj->label->empty()) continue;
    geo::Pixel anchor;
    switch (it.obj->geometry.kind) {
      case geo::GeometryKind::kPoint: anchor = it.path.front(); break;
      case geo::GeometryKind::kLineString: anchor = polyline_midpoint(it.path); break;
      case geo::GeometryKind::kPolygon: anchor = ring_centroid(it.path); break;
    }
    s.candidates.push_back(make_candidate(*it.obj->label, anchor, it.style.label_priority, style.label_font_px));
    s.candidate_item.push_back(i);
  }
  s.placed = place_labels(s.candidates, rec.width_px, rec.height_px);
  return s;
}

void draw_text(Raster& r, const LabelCandidate& c, const Rgba& color, int font_px) {
  const double cell = kCharWidthRatio * font_px;
  const int scale = std::max(1, font_px / 12);
  const int top = static_cast<int>(std::lround(c.box.y0 + (font_px - 7 * scale) / 2.0));
  std::size_t i = 0;
  for (std::size_t pos = 0; pos < c.text.size(); ++i) {
    const auto lead = static_cast<unsigned char>(c.text[pos]);
    const std::size_t len = lead < 0x80 ? 1 : lead < 0xE0 ? 2 : lead < 0xF0 ? 3 : 4;
    const char ch = len == 1 ? c.text[pos] : '\x01';
    pos += len;
    const auto& rows = glyph_rows(ch);
    const int left = static_cast<int>(std::lround(c.box.x0 + i * cell + (cell - 5 * scale) / 2.0));
    for (int gy = 0; gy < 7; ++gy)
      for (int gx = 0; gx < 5; ++gx) {
        if (!(rows[gy] & (0x10 >> gx))) continue;
        for (int sy = 0; sy < scale; ++sy)
          for (int sx = 0; sx < scale; ++sx) {
            const int x = left + gx * scale + sx, y = top + gy * scale + sy;
            if (x >= 0 && y >= 0 && x < r.width && y < r.height) r.blend(x, y, color);
          }
      }
  }
}

}  // namespace

nlohmann::json RenderedTile::manifest_line() const {
  nlohmann::json labels_json = nlohmann::json::array();
  for (const auto& l : labels) {
    labels_json.push_back({{"text", l.text},
                           {"osm_id", l.osm_id},
                           {"layer", to_string(l.layer)},
                           {"priority", l.priority},
                           {"box", {l.box.x0, l.box.y0, l.box.x1, l.box.y1}}});
  }
  return {{"image_id", image_id},           {"width", raster.width}, {"height", raster.height},
          {"blank", blank},                 {"painted_objects", painted_objects},
          {"zoom_hidden", zoom_hidden},     {"labels", std::move(labels_json)}};
}

RenderedTile render_tile(const geo::ImageRecord& rec, const std::vector<osm::OsmObject>& objects,
                         const StyleTable& style) {
  const Scene scene = build_scene(rec, objects, style);
  RenderedTile tile;
  tile.image_id = rec.id;
  tile.raster = Raster(rec.width_px, rec.height_px, style.background);
  tile.zoom_hidden = scene.zoom_hidden;
  tile.painted_objects = scene.items.size();
  tile.blank = scene.items.empty();

  Mask mask(rec.width_px, rec.height_px);
  for (const auto& it : scene.items) {
    switch (it.obj->geometry.kind) {
      case geo::GeometryKind::kPolygon:
        fill_polygon(it.path, mask);
        mask.paint(tile.raster, it.style.fill);
        if (it.style.stroke != it.style.fill) {
          stroke_path(it.path, it.style.stroke_width_px, mask);
          mask.paint(tile.raster, it.style.stroke);
        }
        break;
      case geo::GeometryKind::kLineString:
        stroke_path(it.path, it.style.stroke_width_px, mask);
        mask.paint(tile.raster, it.style.stroke);
        break;
      case geo::GeometryKind::kPoint:
        if (it.style.glyph == "circle") {
          fill_disc(it.path.front(), 4.0, mask);
          mask.paint(tile.raster, it.style.fill);
          fill_disc(it.path.front(), 2.5, mask);
          mask.paint(tile.raster, it.style.glyph_color);
        } else {
          fill_disc(it.path.front(), 2.0, mask);
          mask.paint(tile.raster, it.style.glyph.empty() ? it.style.stroke : it.style.glyph_color);
        }
        break;
    }
  }
  for (std::size_t idx : scene.placed) {
    const auto& c = scene.candidates[idx];
    const auto& it = scene.items[scene.candidate_item[idx]];
    draw_text(tile.raster, c, style.text_color, style.label_font_px);
    tile.labels.push_back({c.text, it.obj->osm_id, it.style.layer, c.priority, c.box});
  }
  return tile;
}

namespace {

void png_to_string(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void png_flush_noop(png_structp) {}

}  // namespace

std::string encode_png(const Raster& raster) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::kIoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::kIoError, "png_create_info_struct failed");
  }
  std::string out;
  std::vector<png_bytep> rows(static_cast<std::size_t>(raster.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "png encoding failed");
  }
  png_set_write_fn(png, &out, png_to_string, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
               PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < raster.height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(raster.rgba.data() + static_cast<std::size_t>(y) * raster.width * 4);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const Raster& raster) {
  const std::string bytes = encode_png(raster);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

namespace {

std::string css(const Rgba& c) {
  std::ostringstream s;
  s << "rgba(" << int(c[0]) << ',' << int(c[1]) << ',' << int(c[2]) << ',' << c[3] / 255.0 << ')';
  return s.str();
}

std::string points_attr(const Path& p) {
  std::ostringstream s;
  s.precision(6);
  for (std::size_t i = 0; i < p.size(); ++i) s << (i ? " " : "") << p[i].x << ',' << p[i].y;
  return s.str();
}

std::string xml_escape(const std::string& in) {
  std::string out;
  for (char c : in) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const geo::ImageRecord& rec, const std::vector<osm::OsmObject>& objects,
                       const StyleTable& style) {
  const Scene scene = build_scene(rec, objects, style);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << rec.width_px << "\" height=\"" << rec.height_px
    << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"" << css(style.background) << "\"/>\n";
  for (const auto& it : scene.items) {
    switch (it.obj->geometry.kind) {
      case geo::GeometryKind::kPolygon:
        s << "<polygon points=\"" << points_attr(it.path) << "\" fill=\"" << css(it.style.fill) << "\" stroke=\""
          << css(it.style.stroke) << "\" stroke-width=\"" << it.style.stroke_width_px << "\"/>\n";
        break;
      case geo::GeometryKind::kLineString:
        s << "<polyline points=\"" << points_attr(it.path) << "\" fill=\"none\" stroke=\"" << css(it.style.stroke)
          << "\" stroke-width=\"" << it.style.stroke_width_px << "\"/>\n";
        break;
      case geo::GeometryKind::kPoint:
        s << "<circle cx=\"" << it.path.front().x << "\" cy=\"" << it.path.front().y << "\" r=\"4\" fill=\""
          << css(it.style.glyph_color) << "\"/>\n";
        break;
    }
  }
  for (std::size_t idx : scene.placed) {
    const auto& c = scene.candidates[idx];
    s << "<rect x=\"" << c.box.x0 << "\" y=\"" << c.box.y0 << "\" width=\"" << c.box.x1 - c.box.x0
      << "\" height=\"" << c.box.y1 - c.box.y0 << "\" fill=\"none\" stroke=\"red\" stroke-width=\"0.5\"/>\n"
      << "<text x=\"" << c.anchor.x << "\" y=\"" << c.box.y1 - 2 << "\" font-family=\"monospace\" font-size=\""
      << style.label_font_px << "\" text-anchor=\"middle\">" << xml_escape(c.text) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace osmda::render
