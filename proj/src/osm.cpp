#include "osmda/osm.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "osmda/error.hpp"
#include "osmda/util/log.hpp"
#include "osmda/util/parallel.hpp"

namespace osmda {

std::string_view to_string(ObjectClass c) {
  const auto i = static_cast<std::size_t>(c);
  return i < kTypingKeys.size() ? kTypingKeys[i] : std::string_view("other");
}

std::optional<ObjectClass> object_class_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kTypingKeys.size(); ++i) {
    if (kTypingKeys[i] == s) return static_cast<ObjectClass>(i);
  }
  if (s == "other") return ObjectClass::kOther;
  return std::nullopt;
}

}  // namespace osmda

namespace osmda::osm {

using nlohmann::json;
namespace pt = boost::property_tree;

const std::string* find_tag(const Tags& tags, std::string_view key) {
  for (const auto& t : tags) {
    if (t.key == key) return &t.value;
  }
  return nullptr;
}

bool id_less(const OsmObject& a, const OsmObject& b) {
  if (a.osm_id != b.osm_id) return a.osm_id < b.osm_id;
  return static_cast<int>(a.element) < static_cast<int>(b.element);
}

namespace {

const char* element_name(ElementType t) {
  switch (t) {
    case ElementType::kNode: return "node";
    case ElementType::kWay: return "way";
    case ElementType::kRelation: return "relation";
  }
  return "way";
}

ElementType element_from_name(const std::string& s) {
  if (s == "node") return ElementType::kNode;
  if (s == "relation") return ElementType::kRelation;
  return ElementType::kWay;
}

bool finish_object(OsmObject obj, Extract& out) {
  try {
    obj.geometry.validate();
  } catch (const Error&) {
    ++out.stats.skipped;
    return false;
  }
  out.objects.push_back(std::move(obj));
  return true;
}

void finalize(Extract& out) {
  std::stable_sort(out.objects.begin(), out.objects.end(), id_less);
  out.stats.objects = out.objects.size();
  if (out.objects.empty()) out.stats.warnings.emplace_back("empty-extract");
  if (out.stats.holes_dropped > 0) {
    out.stats.warnings.push_back("dropped " + std::to_string(out.stats.holes_dropped) +
                                 " polygon holes");
  }
}

// Closed ways become polygons unless they carry a linear feature key
// without area=yes.
bool closed_way_is_area(const Tags& tags) {
  if (const auto* area = find_tag(tags, "area")) {
    if (*area == "yes") return true;
    if (*area == "no") return false;
  }
  static constexpr std::string_view kLinear[] = {"highway", "barrier", "railway",
                                                 "waterway", "route",  "power"};
  for (auto key : kLinear) {
    if (find_tag(tags, key)) return false;
  }
  if (const auto* nat = find_tag(tags, "natural")) {
    if (*nat == "coastline" || *nat == "tree_row" || *nat == "cliff") return false;
  }
  return true;
}

Tags read_xml_tags(const pt::ptree& element) {
  Tags tags;
  for (const auto& [name, child] : element) {
    if (name != "tag") continue;
    tags.push_back({child.get<std::string>("<xmlattr>.k"), child.get<std::string>("<xmlattr>.v", "")});
  }
  return tags;
}

}  // namespace

Extract parse_osm_xml(std::istream& in) {
  Extract out;
  pt::ptree doc;
  try {
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::kLoadError, std::string("OSM XML parse error: ") + e.what());
  }
  const auto root_it = doc.find("osm");
  if (root_it == doc.not_found()) {
    throw Error(ErrorCode::kLoadError, "OSM XML without <osm> root");
  }
  const pt::ptree& root = root_it->second;

  std::unordered_map<std::int64_t, geo::LonLat> nodes;
  for (const auto& [name, el] : root) {
    if (name != "node") continue;
    try {
      nodes[el.get<std::int64_t>("<xmlattr>.id")] = {el.get<double>("<xmlattr>.lon"),
                                                    el.get<double>("<xmlattr>.lat")};
    } catch (const pt::ptree_error&) {
    }
  }

  struct WayRefs {
    std::vector<std::int64_t> refs;
  };
  std::unordered_map<std::int64_t, WayRefs> ways;
  for (const auto& [name, el] : root) {
    if (name != "way") continue;
    const auto id = el.get_optional<std::int64_t>("<xmlattr>.id");
    if (!id) continue;
    WayRefs w;
    for (const auto& [cname, child] : el) {
      if (cname == "nd") w.refs.push_back(child.get<std::int64_t>("<xmlattr>.ref", 0));
    }
    ways[*id] = std::move(w);
  }

  auto resolve = [&](const std::vector<std::int64_t>& refs,
                     std::vector<geo::LonLat>& coords) -> bool {
    coords.clear();
    for (auto ref : refs) {
      const auto it = nodes.find(ref);
      if (it == nodes.end()) return false;
      coords.push_back(it->second);
    }
    return true;
  };

  for (const auto& [name, el] : root) {
    if (name != "node" && name != "way" && name != "relation") continue;
    Tags tags = read_xml_tags(el);
    if (tags.empty()) {
      ++out.stats.untagged;
      continue;
    }
    const auto id = el.get_optional<std::int64_t>("<xmlattr>.id");
    if (!id) {
      ++out.stats.skipped;
      continue;
    }
    OsmObject obj;
    obj.osm_id = *id;
    obj.element = element_from_name(name);
    if (name == "node") {
      const auto it = nodes.find(*id);
      if (it == nodes.end()) {
        ++out.stats.skipped;
        continue;
      }
      obj.geometry = {geo::GeometryKind::kPoint, {it->second}};
    } else if (name == "way") {
      const auto& refs = ways[*id].refs;
      std::vector<geo::LonLat> coords;
      if (!resolve(refs, coords)) {
        ++out.stats.skipped;
        continue;
      }
      const bool closed = refs.size() >= 4 && refs.front() == refs.back();
      const auto kind = closed && closed_way_is_area(tags) ? geo::GeometryKind::kPolygon
                                                           : geo::GeometryKind::kLineString;
      obj.geometry = {kind, std::move(coords)};
    } else {
      const auto* type = find_tag(tags, "type");
      std::vector<std::int64_t> outers;
      std::size_t inners = 0;
      bool other_members = false;
      for (const auto& [cname, member] : el) {
        if (cname != "member") continue;
        const auto mtype = member.get<std::string>("<xmlattr>.type", "");
        const auto role = member.get<std::string>("<xmlattr>.role", "");
        if (mtype != "way") {
          other_members = true;
          continue;
        }
        if (role == "inner") ++inners;
        else outers.push_back(member.get<std::int64_t>("<xmlattr>.ref", 0));
      }
      std::vector<geo::LonLat> coords;
      const bool resolvable = type && *type == "multipolygon" && outers.size() == 1 &&
                              !other_members && ways.count(outers[0]) &&
                              resolve(ways[outers[0]].refs, coords) && coords.size() >= 4 &&
                              coords.front() == coords.back();
      if (!resolvable) {
        ++out.stats.skipped;
        continue;
      }
      out.stats.holes_dropped += inners;
      obj.geometry = {geo::GeometryKind::kPolygon, std::move(coords)};
    }
    obj.tags = std::move(tags);
    finish_object(std::move(obj), out);
  }
  finalize(out);
  return out;
}

json tags_to_json(const Tags& tags) {
  // Key order is not kept here; to_json records it under "tag_order".
  json obj = json::object();
  for (const auto& t : tags) obj[t.key] = t.value;
  return obj;
}

Tags tags_from_json(const json& j) {
  Tags tags;
  for (const auto& [k, v] : j.items()) {
    tags.push_back({k, v.is_string() ? v.get<std::string>() : v.dump()});
  }
  return tags;
}

json to_json(const OsmObject& obj) {
  json coords = json::array();
  for (const auto& c : obj.geometry.coords) coords.push_back({c.lon, c.lat});
  json geometry = {{"type", geo::to_string(obj.geometry.kind)}};
  switch (obj.geometry.kind) {
    case geo::GeometryKind::kPoint: geometry["coordinates"] = coords.at(0); break;
    case geo::GeometryKind::kLineString: geometry["coordinates"] = coords; break;
    case geo::GeometryKind::kPolygon: geometry["coordinates"] = json::array({coords}); break;
  }
  json order = json::array();
  for (const auto& t : obj.tags) order.push_back(t.key);
  json j = {{"id", obj.osm_id},
            {"element", element_name(obj.element)},
            {"tags", tags_to_json(obj.tags)},
            {"tag_order", order},
            {"geometry", geometry}};
  if (obj.object_class) j["class"] = std::string(to_string(*obj.object_class));
  if (obj.label) j["label"] = *obj.label;
  return j;
}

namespace {

geo::LonLat read_position(const json& p) {
  return {p.at(0).get<double>(), p.at(1).get<double>()};
}

}  // namespace

OsmObject object_from_json(const json& j) {
  OsmObject obj;
  obj.osm_id = j.at("id").get<std::int64_t>();
  if (j.contains("element")) obj.element = element_from_name(j["element"].get<std::string>());
  const Tags unordered = tags_from_json(j.at("tags"));
  if (j.contains("tag_order")) {
    for (const auto& key : j["tag_order"]) {
      const auto k = key.get<std::string>();
      if (const auto* v = find_tag(unordered, k)) obj.tags.push_back({k, *v});
    }
    if (obj.tags.size() != unordered.size()) obj.tags = unordered;
  } else {
    obj.tags = unordered;
  }
  const auto& g = j.at("geometry");
  const auto type = g.at("type").get<std::string>();
  const auto& coords = g.at("coordinates");
  if (type == "Point") {
    obj.geometry = {geo::GeometryKind::kPoint, {read_position(coords)}};
  } else if (type == "LineString") {
    obj.geometry.kind = geo::GeometryKind::kLineString;
    for (const auto& p : coords) obj.geometry.coords.push_back(read_position(p));
  } else if (type == "Polygon") {
    obj.geometry.kind = geo::GeometryKind::kPolygon;
    for (const auto& p : coords.at(0)) obj.geometry.coords.push_back(read_position(p));
  } else {
    throw Error(ErrorCode::kInvalidGeometry, "unsupported geometry type " + type);
  }
  if (j.contains("class")) obj.object_class = object_class_from_string(j["class"].get<std::string>());
  if (j.contains("label")) obj.label = j["label"].get<std::string>();
  return obj;
}

Extract parse_jsonl_dump(std::istream& in) {
  Extract out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      OsmObject obj = object_from_json(j);
      if (j.at("geometry").at("type") == "Polygon") {
        out.stats.holes_dropped += j["geometry"]["coordinates"].size() - 1;
      }
      if (obj.tags.empty()) {
        ++out.stats.untagged;
        continue;
      }
      finish_object(std::move(obj), out);
    } catch (const std::exception&) {
      ++out.stats.skipped;
    }
  }
  finalize(out);
  return out;
}

Extract load_extract(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read OSM extract " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  const auto first = content.find_first_not_of(" \t\r\n");
  Extract out;
  if (first == std::string::npos) {
    finalize(out);
  } else {
    std::istringstream body(content);
    out = content[first] == '<' ? parse_osm_xml(body) : parse_jsonl_dump(body);
  }
  for (const auto& w : out.stats.warnings) {
    log::warn("ingest", w, {{"path", path.string()}, {"skipped", out.stats.skipped}});
  }
  return out;
}

// --- intersection ---------------------------------------------------------

namespace {

// Liang-Barsky clip of segment a-b against the box.
bool segment_intersects_box(const geo::LonLat& a, const geo::LonLat& b, const geo::BBox& box) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.lon - a.lon, dy = b.lat - a.lat;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.lon - box.min_lon, box.max_lon - a.lon, a.lat - box.min_lat,
                       box.max_lat - a.lat};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) t0 = std::max(t0, r);
    else t1 = std::min(t1, r);
    if (t0 > t1) return false;
  }
  return true;
}

bool ring_contains(const std::vector<geo::LonLat>& ring, const geo::LonLat& p) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if ((a.lat > p.lat) != (b.lat > p.lat) &&
        p.lon < (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon) {
      inside = !inside;
    }
  }
  return inside;
}

}  // namespace

bool geometry_intersects(const geo::Geometry& g, const geo::BBox& box) {
  if (g.coords.empty()) return false;
  for (const auto& c : g.coords) {
    if (box.contains(c)) return true;
  }
  if (g.kind == geo::GeometryKind::kPoint) return false;
  for (std::size_t i = 1; i < g.coords.size(); ++i) {
    if (segment_intersects_box(g.coords[i - 1], g.coords[i], box)) return true;
  }
  return g.kind == geo::GeometryKind::kPolygon && ring_contains(g.coords, box.center());
}

// --- packed R-tree -------------------------------------------------------

namespace {

geo::BBox merge(const geo::BBox& a, const geo::BBox& b) {
  return {std::min(a.min_lon, b.min_lon), std::min(a.min_lat, b.min_lat),
          std::max(a.max_lon, b.max_lon), std::max(a.max_lat, b.max_lat)};
}

// Sort-tile-recursive ordering of `ids` by the centers of `boxes`.
void str_order(std::vector<std::uint32_t>& ids, const std::vector<geo::BBox>& boxes,
               std::size_t capacity) {
  auto cx = [&](std::uint32_t i) { return boxes[i].min_lon + boxes[i].max_lon; };
  auto cy = [&](std::uint32_t i) { return boxes[i].min_lat + boxes[i].max_lat; };
  std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) { return cx(a) < cx(b); });
  const std::size_t pages = (ids.size() + capacity - 1) / capacity;
  const auto slices = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(pages))));
  const std::size_t per_slice = slices * capacity;
  for (std::size_t s = 0; s < ids.size(); s += per_slice) {
    const auto end = ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), s + per_slice));
    std::stable_sort(ids.begin() + static_cast<std::ptrdiff_t>(s), end,
                     [&](auto a, auto b) { return cy(a) < cy(b); });
  }
}

}  // namespace

SpatialIndex::SpatialIndex(std::vector<OsmObject> objects, std::size_t node_capacity)
    : objects_(std::move(objects)) {
  const std::size_t cap = std::max<std::size_t>(2, node_capacity);
  item_boxes_.reserve(objects_.size());
  for (const auto& o : objects_) item_boxes_.push_back(o.geometry.bounds());
  if (objects_.empty()) return;

  leaf_items_.resize(objects_.size());
  std::iota(leaf_items_.begin(), leaf_items_.end(), 0u);
  str_order(leaf_items_, item_boxes_, cap);

  std::vector<Node> level;
  for (std::size_t i = 0; i < leaf_items_.size(); i += cap) {
    Node n{item_boxes_[leaf_items_[i]], static_cast<std::uint32_t>(i), 0};
    for (std::size_t j = i; j < std::min(leaf_items_.size(), i + cap); ++j) {
      n.box = merge(n.box, item_boxes_[leaf_items_[j]]);
      ++n.count;
    }
    level.push_back(n);
  }
  levels_.push_back(std::move(level));

  while (levels_.back().size() > 1) {
    auto& below = levels_.back();
    std::vector<geo::BBox> boxes;
    for (const auto& n : below) boxes.push_back(n.box);
    std::vector<std::uint32_t> order(below.size());
    std::iota(order.begin(), order.end(), 0u);
    str_order(order, boxes, cap);
    std::vector<Node> reordered;
    for (auto i : order) reordered.push_back(below[i]);
    below = std::move(reordered);

    std::vector<Node> parents;
    for (std::size_t i = 0; i < below.size(); i += cap) {
      Node n{below[i].box, static_cast<std::uint32_t>(i), 0};
      for (std::size_t j = i; j < std::min(below.size(), i + cap); ++j) {
        n.box = merge(n.box, below[j].box);
        ++n.count;
      }
      parents.push_back(n);
    }
    levels_.push_back(std::move(parents));
  }
}

std::vector<std::size_t> SpatialIndex::candidates(const geo::BBox& box) const {
  std::vector<std::size_t> hits;
  if (levels_.empty()) return hits;
  struct Frame {
    std::size_t level;
    std::size_t node;
  };
  std::vector<Frame> stack{{levels_.size() - 1, 0}};
  while (!stack.empty()) {
    const auto [lvl, idx] = stack.back();
    stack.pop_back();
    const Node& n = levels_[lvl][idx];
    if (!n.box.intersects(box)) continue;
    for (std::uint32_t k = 0; k < n.count; ++k) {
      if (lvl == 0) {
        const auto item = leaf_items_[n.first + k];
        if (item_boxes_[item].intersects(box)) hits.push_back(item);
      } else {
        stack.push_back({lvl - 1, n.first + k});
      }
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

std::vector<OsmObject> query_objects(const SpatialIndex& index, const geo::BBox& footprint) {
  std::vector<OsmObject> out;
  for (auto i : index.candidates(footprint)) {
    const auto& obj = index.objects()[i];
    if (geometry_intersects(obj.geometry, footprint)) out.push_back(obj);
  }
  std::stable_sort(out.begin(), out.end(), id_less);
  return out;
}

std::vector<OsmObject> fetch_remote(const std::string& endpoint_url, const geo::BBox& footprint,
                                    const net::RetryPolicy& policy) {
  const json body = {{"bbox", {footprint.min_lon, footprint.min_lat, footprint.max_lon,
                              footprint.max_lat}}};
  const auto res = net::post_with_retry(endpoint_url, body.dump(), "application/json", policy);
  std::istringstream in(res.body);
  Extract ex = parse_jsonl_dump(in);
  return std::move(ex.objects);
}

std::vector<std::vector<OsmObject>> fetch_remote_many(const std::string& endpoint_url,
                                                      const std::vector<geo::BBox>& footprints,
                                                      const net::RetryPolicy& policy,
                                                      std::size_t max_in_flight) {
  std::vector<std::vector<OsmObject>> out(footprints.size());
  util::parallel_for(footprints.size(), max_in_flight, [&](std::size_t i) {
    out[i] = fetch_remote(endpoint_url, footprints[i], policy);
  });
  return out;
}

}  // namespace osmda::osm
