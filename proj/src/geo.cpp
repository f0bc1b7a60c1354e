#include "osmda/geo.hpp"

#include <cmath>
#include <numbers>

#include "osmda/error.hpp"

namespace osmda::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

[[noreturn]] void bad_geometry(const std::string& why) {
  throw Error(ErrorCode::kInvalidGeometry, why);
}

}  // namespace

void BBox::validate() const {
  const bool finite = std::isfinite(min_lon) && std::isfinite(min_lat) &&
                      std::isfinite(max_lon) && std::isfinite(max_lat);
  if (!finite || !(min_lon < max_lon) || !(min_lat < max_lat) || min_lat < -90.0 ||
      max_lat > 90.0 || min_lon < -180.0 || max_lon > 180.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid bounding box");
  }
}

bool BBox::intersects(const BBox& other) const noexcept {
  return min_lon <= other.max_lon && other.min_lon <= max_lon && min_lat <= other.max_lat &&
         other.min_lat <= max_lat;
}

bool BBox::contains(const LonLat& p) const noexcept {
  return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
}

const char* to_string(GeometryKind kind) {
  switch (kind) {
    case GeometryKind::kPoint: return "Point";
    case GeometryKind::kLineString: return "LineString";
    case GeometryKind::kPolygon: return "Polygon";
  }
  return "Point";
}

void Geometry::validate() const {
  for (const auto& c : coords) {
    if (!std::isfinite(c.lon) || !std::isfinite(c.lat)) bad_geometry("non-finite coordinate");
  }
  switch (kind) {
    case GeometryKind::kPoint:
      if (coords.size() != 1) bad_geometry("point needs exactly one coordinate");
      break;
    case GeometryKind::kLineString:
      if (coords.size() < 2) bad_geometry("linestring needs at least 2 vertices");
      break;
    case GeometryKind::kPolygon:
      if (coords.size() < 4) bad_geometry("polygon needs at least 4 vertices");
      if (!(coords.front() == coords.back())) bad_geometry("polygon ring is not closed");
      break;
  }
}

BBox Geometry::bounds() const {
  BBox b{coords.at(0).lon, coords.at(0).lat, coords.at(0).lon, coords.at(0).lat};
  for (const auto& c : coords) {
    b.min_lon = std::min(b.min_lon, c.lon);
    b.max_lon = std::max(b.max_lon, c.lon);
    b.min_lat = std::min(b.min_lat, c.lat);
    b.max_lat = std::max(b.max_lat, c.lat);
  }
  return b;
}

std::array<double, 2> ground_extent_m(const BBox& box) {
  const double lat0 = box.center().lat * kDegToRad;
  const double w = (box.max_lon - box.min_lon) * kDegToRad * kEarthRadiusM * std::cos(lat0);
  const double h = (box.max_lat - box.min_lat) * kDegToRad * kEarthRadiusM;
  return {w, h};
}

void ImageRecord::validate() const {
  if (width_px <= 0 || height_px <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image " + id + ": pixel dims must be positive");
  }
  if (!(resolution_m > 0.0) || !std::isfinite(resolution_m)) {
    throw Error(ErrorCode::kInvalidArgument, "image " + id + ": resolution must be positive");
  }
  footprint.validate();
  const auto [gw, gh] = ground_extent_m(footprint);
  const double rx = gw / width_px;
  const double ry = gh / height_px;
  if (std::abs(rx - resolution_m) > 0.05 * resolution_m ||
      std::abs(ry - resolution_m) > 0.05 * resolution_m) {
    throw Error(ErrorCode::kInvalidArgument,
                "image " + id + ": footprint extent inconsistent with resolution_m");
  }
}

double pixel_ground_area(double resolution_m) {
  if (!(resolution_m > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "resolution must be positive");
  }
  return resolution_m * resolution_m;
}

double polygon_area(const Geometry& polygon) {
  if (polygon.kind != GeometryKind::kPolygon) bad_geometry("polygon_area on non-polygon");
  polygon.validate();
  const auto& ring = polygon.coords;
  const std::size_t n = ring.size() - 1;  // closing vertex repeats the first
  double lon0 = 0.0, lat0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lon0 += ring[i].lon;
    lat0 += ring[i].lat;
  }
  lon0 /= static_cast<double>(n);
  lat0 /= static_cast<double>(n);
  const double kx = kDegToRad * kEarthRadiusM * std::cos(lat0 * kDegToRad);
  const double ky = kDegToRad * kEarthRadiusM;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = (ring[i].lon - lon0) * kx, y0 = (ring[i].lat - lat0) * ky;
    const double x1 = (ring[i + 1].lon - lon0) * kx, y1 = (ring[i + 1].lat - lat0) * ky;
    twice += x0 * y1 - x1 * y0;
  }
  return std::abs(twice) / 2.0;
}

double haversine_m(const LonLat& a, const LonLat& b) {
  const double phi1 = a.lat * kDegToRad, phi2 = b.lat * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s = std::sin(dphi / 2), t = std::sin(dlambda / 2);
  const double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double linestring_length(const Geometry& line) {
  if (line.kind != GeometryKind::kLineString) bad_geometry("linestring_length on non-linestring");
  line.validate();
  double total = 0.0;
  for (std::size_t i = 1; i < line.coords.size(); ++i) {
    total += haversine_m(line.coords[i - 1], line.coords[i]);
  }
  return total;
}

FootprintTransform::FootprintTransform(const ImageRecord& rec)
    : box_(rec.footprint),
      sx_(rec.width_px / (rec.footprint.max_lon - rec.footprint.min_lon)),
      sy_(rec.height_px / (rec.footprint.max_lat - rec.footprint.min_lat)) {}

Pixel FootprintTransform::to_pixel(const LonLat& p) const noexcept {
  return {(p.lon - box_.min_lon) * sx_, (box_.max_lat - p.lat) * sy_};
}

LonLat FootprintTransform::to_lonlat(const Pixel& px) const noexcept {
  return {box_.min_lon + px.x / sx_, box_.max_lat - px.y / sy_};
}

}  // namespace osmda::geo
