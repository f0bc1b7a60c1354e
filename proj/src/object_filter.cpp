#include "osmda/object_filter.hpp"

#include "osmda/util/text.hpp"

namespace osmda::filter {

ObjectClass classify_object(const osm::Tags& tags) {
  for (std::size_t i = 0; i < kTypingKeys.size(); ++i) {
    if (osm::find_tag(tags, kTypingKeys[i])) return static_cast<ObjectClass>(i);
  }
  return ObjectClass::kOther;
}

namespace {

std::string normalize_value(std::string_view v) {
  std::string s = util::to_lower_ascii(util::trim(v));
  for (char& c : s) {
    if (c == '_') c = ' ';
  }
  return s;
}

bool is_blacklisted_type_value(std::string_view raw) {
  for (const auto& part : util::split(raw, ';')) {
    const auto v = normalize_value(part);
    for (auto bad : kBlacklistedTypeValues) {
      if (v == bad) return true;
    }
  }
  return false;
}

bool has_type_blacklist(const osm::Tags& tags) {
  for (const auto& t : tags) {
    bool typed = t.key == "type" || t.key == "man_made";
    for (auto k : kTypingKeys) typed = typed || t.key == k;
    if (typed && is_blacklisted_type_value(t.value)) return true;
  }
  return false;
}

bool has_tag_blacklist(const osm::Tags& tags) {
  for (const auto& t : tags) {
    if (t.key == "boundary") return true;
    const auto v = util::to_lower_ascii(util::trim(t.value));
    for (const auto& bad : kBlacklistedTags) {
      if (t.key == bad.key && v == bad.value) return true;
    }
  }
  return false;
}

}  // namespace

Visibility is_visible(const osm::OsmObject& obj, double resolution_m) {
  if (has_tag_blacklist(obj.tags)) return {false, kTagBlacklist};
  if (has_type_blacklist(obj.tags)) return {false, kTypeBlacklist};
  switch (obj.geometry.kind) {
    case geo::GeometryKind::kPolygon:
      if (geo::polygon_area(obj.geometry) < geo::pixel_ground_area(resolution_m)) {
        return {false, kPolygonSubpixel};
      }
      break;
    case geo::GeometryKind::kLineString:
      if (geo::linestring_length(obj.geometry) < resolution_m) return {false, kLinestringSubpixel};
      break;
    case geo::GeometryKind::kPoint:
      break;
  }
  return {};
}

bool is_anonymized_key(std::string_view key) {
  for (auto family : kAnonymizedKeyFamilies) {
    if (key == family) return true;
    if (key.size() > family.size() && util::starts_with(key, family) && key[family.size()] == ':') {
      return true;
    }
  }
  // Name variants: alt_name, old_name, official_name, short_name:en, ...
  const auto colon = key.find(':');
  const auto base = key.substr(0, colon);
  return base.size() > 5 && base.substr(base.size() - 5) == "_name";
}

osm::Tags anonymize_tags(const osm::Tags& tags) {
  osm::Tags out;
  for (const auto& t : tags) {
    if (!is_anonymized_key(t.key)) out.push_back(t);
  }
  return out;
}

std::size_t FilterReport::dropped() const {
  std::size_t n = 0;
  for (const auto& [rule, count] : dropped_by_rule) n += count;
  return n;
}

FilterReport& FilterReport::operator+=(const FilterReport& other) {
  input += other.input;
  kept += other.kept;
  for (const auto& [rule, count] : other.dropped_by_rule) dropped_by_rule[rule] += count;
  anonymized_keys_removed += other.anonymized_keys_removed;
  return *this;
}

nlohmann::json FilterReport::to_json() const {
  return {{"input", input},
          {"kept", kept},
          {"dropped_by_rule", dropped_by_rule},
          {"anonymized_keys_removed", anonymized_keys_removed}};
}

FilterResult filter_for_image(const std::vector<osm::OsmObject>& objects,
                              const geo::ImageRecord& rec) {
  FilterResult result;
  result.report.input = objects.size();
  auto drop = [&](const osm::OsmObject& obj, std::string_view rule) {
    ++result.report.dropped_by_rule[std::string(rule)];
    result.audit.push_back({obj.osm_id, std::string(rule)});
  };
  for (const auto& obj : objects) {
    const auto vis = is_visible(obj, rec.resolution_m);
    if (!vis.visible) {
      drop(obj, *vis.rule);
      continue;
    }
    osm::OsmObject kept = obj;
    kept.object_class = classify_object(obj.tags);
    kept.tags = anonymize_tags(obj.tags);
    result.report.anonymized_keys_removed += obj.tags.size() - kept.tags.size();
    if (kept.tags.empty()) {
      drop(obj, kEmptyAfterAnonymize);
      continue;
    }
    result.kept.push_back(std::move(kept));
  }
  result.report.kept = result.kept.size();
  return result;
}

}  // namespace osmda::filter
