#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "osmda/geo.hpp"
#include "osmda/net/http.hpp"
#include "osmda/object_class.hpp"

namespace osmda::osm {

struct Tag {
  std::string key;
  std::string value;

  friend bool operator==(const Tag&, const Tag&) = default;
};

// Insertion-ordered; keys are unique within one object.
using Tags = std::vector<Tag>;

const std::string* find_tag(const Tags& tags, std::string_view key);

enum class ElementType { kNode, kWay, kRelation };

struct OsmObject {
  std::int64_t osm_id = 0;
  ElementType element = ElementType::kWay;
  Tags tags;
  geo::Geometry geometry;
  std::optional<ObjectClass> object_class;
  std::optional<std::string> label;

  friend bool operator==(const OsmObject&, const OsmObject&) = default;
};

// Deterministic order used for every object list: (osm_id, element type).
bool id_less(const OsmObject& a, const OsmObject& b);

struct LoadStats {
  std::size_t objects = 0;
  std::size_t untagged = 0;
  // Malformed or unresolvable elements (bad geometry, missing node refs,
  // relations other than single-outer multipolygons).
  std::size_t skipped = 0;
  std::size_t holes_dropped = 0;
  std::vector<std::string> warnings;
};

struct Extract {
  std::vector<OsmObject> objects;
  LoadStats stats;
};

// Detects OSM XML vs. JSON-lines by the first non-blank character.
// Throws kIoError when the file cannot be read.
Extract load_extract(const std::filesystem::path& path);
Extract parse_osm_xml(std::istream& in);
Extract parse_jsonl_dump(std::istream& in);

// JSON-lines object schema: {"id", "tags": {...}, "geometry": {"type",
// "coordinates"}} with optional "element", "class" and "label".
nlohmann::json to_json(const OsmObject& obj);
OsmObject object_from_json(const nlohmann::json& j);

nlohmann::json tags_to_json(const Tags& tags);
Tags tags_from_json(const nlohmann::json& j);

// Exact test against a footprint: vertex containment, edge crossing, or the
// footprint lying inside a polygon.
bool geometry_intersects(const geo::Geometry& g, const geo::BBox& box);

// Static packed R-tree (sort-tile-recursive bulk load) over object bounds.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::vector<OsmObject> objects, std::size_t node_capacity = 16);

  // Indices of objects whose bounding box intersects `box`, ascending.
  std::vector<std::size_t> candidates(const geo::BBox& box) const;

  const std::vector<OsmObject>& objects() const noexcept { return objects_; }
  std::size_t size() const noexcept { return objects_.size(); }

 private:
  struct Node {
    geo::BBox box;
    std::uint32_t first = 0;  // into the level below, or into items at leaves
    std::uint32_t count = 0;
  };

  std::vector<OsmObject> objects_;
  std::vector<geo::BBox> item_boxes_;
  std::vector<std::uint32_t> leaf_items_;
  // levels_[0] are leaves, levels_.back() holds the root.
  std::vector<std::vector<Node>> levels_;
};

// Objects whose geometry intersects the footprint, sorted by id_less.
std::vector<OsmObject> query_objects(const SpatialIndex& index, const geo::BBox& footprint);

// POSTs {"bbox": [min_lon, min_lat, max_lon, max_lat]} and parses the
// JSON-lines reply. Throws RemoteError after exhausting retries.
std::vector<OsmObject> fetch_remote(const std::string& endpoint_url, const geo::BBox& footprint,
                                    const net::RetryPolicy& policy = {});

// One fetch per footprint with at most `max_in_flight` concurrent requests.
std::vector<std::vector<OsmObject>> fetch_remote_many(const std::string& endpoint_url,
                                                      const std::vector<geo::BBox>& footprints,
                                                      const net::RetryPolicy& policy = {},
                                                      std::size_t max_in_flight = 8);

}  // namespace osmda::osm
