#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>

#include "osmda/geo.hpp"

namespace osmda::test {

inline std::filesystem::path fixture_dir() { return OSMDA_FIXTURE_DIR; }
inline std::filesystem::path golden_dir() { return OSMDA_GOLDEN_DIR; }
inline std::filesystem::path data_dir() { return OSMDA_DATA_DIR; }

// Fresh directory under the build tree, removed when the object dies.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::path(OSMDA_SCRATCH_DIR) / (tag + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Offsets in meters from an origin, using the same spherical model as the
// library (small-distance approximation).
inline geo::LonLat offset_m(const geo::LonLat& origin, double east_m, double north_m) {
  constexpr double kPi = 3.14159265358979323846;
  const double m_per_deg_lat = kPi * geo::kEarthRadiusM / 180.0;
  const double m_per_deg_lon = m_per_deg_lat * std::cos(origin.lat * kPi / 180.0);
  return {origin.lon + east_m / m_per_deg_lon, origin.lat + north_m / m_per_deg_lat};
}

inline geo::ImageRecord square_image(const std::string& id, const geo::LonLat& sw, int px, double res) {
  const auto ne = offset_m(sw, px * res, px * res);
  geo::ImageRecord rec;
  rec.id = id;
  rec.footprint = {sw.lon, sw.lat, ne.lon, ne.lat};
  rec.width_px = px;
  rec.height_px = px;
  rec.resolution_m = res;
  rec.image_path = id + ".png";
  return rec;
}

}  // namespace osmda::test
