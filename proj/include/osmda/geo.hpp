#pragma once

#include <array>
#include <string>
#include <vector>

namespace osmda::geo {

// Mean Earth radius (IUGG), meters.
inline constexpr double kEarthRadiusM = 6371008.8;

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const LonLat&, const LonLat&) = default;
};

struct BBox {
  double min_lon = 0.0;
  double min_lat = 0.0;
  double max_lon = 0.0;
  double max_lat = 0.0;

  // Throws kInvalidArgument when the box violates its invariants.
  void validate() const;
  bool intersects(const BBox& other) const noexcept;
  bool contains(const LonLat& p) const noexcept;
  LonLat center() const noexcept { return {(min_lon + max_lon) / 2, (min_lat + max_lat) / 2}; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

enum class GeometryKind { kPoint, kLineString, kPolygon };

const char* to_string(GeometryKind kind);

// Polygons are a single closed outer ring (first vertex == last vertex).
struct Geometry {
  GeometryKind kind = GeometryKind::kPoint;
  std::vector<LonLat> coords;

  // Throws kInvalidGeometry.
  void validate() const;
  BBox bounds() const;

  friend bool operator==(const Geometry&, const Geometry&) = default;
};

struct ImageRecord {
  std::string id;
  BBox footprint;
  int width_px = 0;
  int height_px = 0;
  double resolution_m = 0.0;
  std::string image_path;

  // Checks pixel dims, resolution, and that the footprint's ground extent
  // matches width/height x resolution within 5%.
  void validate() const;
};

double pixel_ground_area(double resolution_m);

// Planar area (m^2) after a local equirectangular projection about the
// ring's vertex centroid.
double polygon_area(const Geometry& polygon);

// Sum of haversine segment lengths, meters.
double linestring_length(const Geometry& line);

double haversine_m(const LonLat& a, const LonLat& b);

// Ground size (m) of a footprint along x (at the center latitude) and y.
std::array<double, 2> ground_extent_m(const BBox& box);

struct Pixel {
  double x = 0.0;
  double y = 0.0;
};

// Affine lon/lat -> pixel map anchored on the footprint corners; row 0 is
// the northern edge.
class FootprintTransform {
 public:
  explicit FootprintTransform(const ImageRecord& rec);

  Pixel to_pixel(const LonLat& p) const noexcept;
  LonLat to_lonlat(const Pixel& px) const noexcept;

  double sx() const noexcept { return sx_; }
  double sy() const noexcept { return sy_; }

 private:
  BBox box_;
  double sx_;
  double sy_;
};

}  // namespace osmda::geo
