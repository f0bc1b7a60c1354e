#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "osmda/geo.hpp"
#include "osmda/object_class.hpp"
#include "osmda/osm.hpp"

namespace osmda::filter {

// Stable rule names, emitted in audit logs.
inline constexpr std::string_view kPolygonSubpixel = "polygon-subpixel";
inline constexpr std::string_view kLinestringSubpixel = "linestring-subpixel";
inline constexpr std::string_view kTagBlacklist = "tag-blacklist";
inline constexpr std::string_view kTypeBlacklist = "type-blacklist";
inline constexpr std::string_view kEmptyAfterAnonymize = "empty-after-anonymize";

// Values that mark underground or otherwise hidden infrastructure.
inline constexpr std::string_view kBlacklistedTypeValues[] = {
    "subway", "pipeline", "cable", "power cable", "sewer", "culvert", "manhole"};

struct BlacklistedTag {
  std::string_view key;
  std::string_view value;
};
inline constexpr BlacklistedTag kBlacklistedTags[] = {
    {"location", "underground"}, {"tunnel", "yes"},  {"tunnel", "culvert"},
    {"covered", "yes"},          {"indoor", "yes"},  {"parking", "underground"}};

// Key families removed by anonymize_tags; each also removes "family:*".
inline constexpr std::string_view kAnonymizedKeyFamilies[] = {
    "name", "addr", "phone", "contact", "brand", "operator",
    "opening_hours", "owner", "website", "email", "ref"};

// First typing key present (in priority order) wins.
ObjectClass classify_object(const osm::Tags& tags);

struct Visibility {
  bool visible = true;
  std::optional<std::string_view> rule;  // set when !visible
};

Visibility is_visible(const osm::OsmObject& obj, double resolution_m);

bool is_anonymized_key(std::string_view key);
osm::Tags anonymize_tags(const osm::Tags& tags);

struct FilterReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> dropped_by_rule;
  std::size_t anonymized_keys_removed = 0;

  std::size_t dropped() const;
  FilterReport& operator+=(const FilterReport& other);
  nlohmann::json to_json() const;
};

struct AuditEntry {
  std::int64_t osm_id = 0;
  std::string rule;
};

struct FilterResult {
  std::vector<osm::OsmObject> kept;
  FilterReport report;
  std::vector<AuditEntry> audit;
};

// classify -> is_visible -> anonymize. Kept objects carry their class and
// the anonymized tag set.
FilterResult filter_for_image(const std::vector<osm::OsmObject>& objects,
                              const geo::ImageRecord& rec);

}  // namespace osmda::filter
