#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace osmda {

// Typing keys in priority order, followed by the catch-all.
enum class ObjectClass {
  kAmenity,
  kHighway,
  kBarrier,
  kWaterway,
  kTrafficCalming,
  kBuilding,
  kManMade,
  kNatural,
  kEmergency,
  kLeisure,
  kLanduse,
  kSurface,
  kRoute,
  kOther,
};

inline constexpr std::array<std::string_view, 13> kTypingKeys = {
    "amenity",  "highway", "barrier",   "waterway", "traffic_calming", "building", "man_made",
    "natural",  "emergency", "leisure", "landuse",  "surface",         "route"};

std::string_view to_string(ObjectClass c);
std::optional<ObjectClass> object_class_from_string(std::string_view s);

}  // namespace osmda
