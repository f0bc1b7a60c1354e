#include "mock_endpoints.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "osmda/error.hpp"
#include "osmda/osm.hpp"
#include "osmda/util/hash.hpp"
#include "osmda/util/jsonl.hpp"
#include "osmda/util/text.hpp"

namespace osmda::mock {

using nlohmann::json;

namespace {

const std::vector<std::string> kTypingKeys{"building", "highway", "landuse", "natural", "amenity",
                                           "leisure",  "waterway", "railway", "man_made", "emergency"};

struct KeyEntry {
  std::string id;
  std::string task;
  std::string question;
  json gold;
  std::vector<std::string> options;
};

std::string lower_words(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : ' ';
  return util::collapse_whitespace(out);
}

std::set<std::string> word_set(const std::string& s) {
  std::set<std::string> out;
  for (const auto& w : util::split(lower_words(s), ' '))
    if (!w.empty()) out.insert(w);
  return out;
}

// Text following `marker` up to the end of its line.
std::string field_after(const std::string& prompt, const std::string& marker) {
  auto pos = prompt.rfind(marker);
  if (pos == std::string::npos) return "";
  pos += marker.size();
  auto end = prompt.find('\n', pos);
  return util::trim(prompt.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
}

struct Parsed {
  std::string prompt;
  std::vector<std::string> images_b64;
};

Parsed parse_request(const std::string& body) {
  Parsed p;
  const json req = json::parse(body);
  const auto& content = req.at("messages").at(0).at("content");
  if (content.is_string()) {
    p.prompt = content.get<std::string>();
    return p;
  }
  for (const auto& part : content) {
    if (part.at("type") == "text") {
      p.prompt = part.at("text").get<std::string>();
    } else {
      const std::string url = part.at("image_url").at("url").get<std::string>();
      auto comma = url.find(',');
      p.images_b64.push_back(comma == std::string::npos ? url : url.substr(comma + 1));
    }
  }
  return p;
}

json completion(const std::string& model, const std::string& text, const json& logprobs = nullptr) {
  json choice{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}, {"finish_reason", "stop"}};
  if (!logprobs.is_null()) choice["logprobs"] = logprobs;
  return {{"object", "chat.completion"}, {"model", model}, {"choices", json::array({choice})}};
}

std::string format_answer(const KeyEntry& k, bool wrong) {
  const auto& g = k.gold;
  if (k.task == "presence" || k.task == "comparison" || k.task == "rural_urban") {
    std::string v = util::to_lower_ascii(g.get<std::string>());
    if (!wrong) return v;
    if (v == "yes") return "no";
    if (v == "no") return "yes";
    return v == "rural" ? "urban" : "rural";
  }
  if (k.task == "count") {
    const long n = std::lround(g.get<double>());
    return std::to_string(wrong ? n + 2 : n);
  }
  if (k.task == "area") {
    const double a = g.get<double>();
    return std::to_string(std::lround(wrong ? a * 1.5 + 10 : a)) + " m2";
  }
  if (k.task == "classify") {
    const std::string v = g.get<std::string>();
    if (!wrong) return v;
    for (const auto& o : k.options)
      if (o != v) return o;
    return v == "forest" ? "desert" : "forest";
  }
  if (k.task == "mc_multi") {
    std::string v = g.is_array() ? util::join(g.get<std::vector<std::string>>(), ", ") : g.get<std::string>();
    return wrong ? (v == "A" ? "B" : "A") : v;
  }
  // caption / open_vqa
  const std::string v = g.get<std::string>();
  return wrong ? "a satellite picture" : v;
}

}  // namespace

std::string mock_label(const std::string& relabel_prompt) {
  const std::string props = field_after(relabel_prompt, "Known object properties:");
  std::map<std::string, std::string> tags;
  for (const auto& part : util::split(props, ',')) {
    auto colon = part.find(':');
    if (colon == std::string::npos) continue;
    tags[util::trim(part.substr(0, colon))] = util::trim(part.substr(colon + 1));
  }
  if (auto m = tags.find("mock"); m != tags.end() && m->second == "empty") return "";
  for (const auto& key : kTypingKeys) {
    auto it = tags.find(key);
    if (it == tags.end()) continue;
    std::string value = it->second;
    std::replace(value.begin(), value.end(), '_', ' ');
    const std::string noun = key == "man_made" ? "structure" : key == "highway" ? "road" : key;
    if (value == "yes" || value == noun) return noun;
    return value + " " + noun;
  }
  return "object";
}

std::string mock_caption(const std::string& image_bytes_b64) {
  static const std::vector<std::string> scenes{"residential", "agricultural", "industrial", "wooded", "mixed"};
  static const std::vector<std::string> features{"a road network", "several buildings", "open fields",
                                                 "a small river", "parking areas"};
  const std::uint64_t h = util::fnv1a64(image_bytes_b64);
  std::ostringstream out;
  out << "The image shows a " << scenes[h % scenes.size()] << " area with " << features[(h >> 8) % features.size()]
      << " and " << features[(h >> 16) % features.size()] << ", roughly " << 2 + (h >> 24) % 9
      << " distinct structures are visible.";
  return out.str();
}

struct MockServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::optional<osm::SpatialIndex> index;
  std::multimap<std::string, KeyEntry> key_by_image;  // sha of base64 image -> entries
  std::vector<KeyEntry> imageless;
  mutable std::mutex mutex;
  std::map<std::string, std::size_t> counts;

  void count(const std::string& route) {
    std::lock_guard lock(mutex);
    ++counts[route];
  }

  void load_keys(const std::filesystem::path& dataset) {
    const auto base = dataset.parent_path();
    for (const auto& row : util::read_jsonl(dataset)) {
      KeyEntry k;
      k.id = row.at("id").get<std::string>();
      k.task = row.at("task").get<std::string>();
      k.question = row.value("question", "");
      k.gold = row.at("gold");
      if (row.contains("options")) k.options = row["options"].get<std::vector<std::string>>();
      const std::string img = row.value("image_path", "");
      if (img.empty()) {
        imageless.push_back(std::move(k));
        continue;
      }
      std::filesystem::path p(img);
      if (p.is_relative()) p = base / p;
      key_by_image.emplace(util::sha256_hex(util::base64_encode(util::read_text(p))), std::move(k));
    }
  }

  const KeyEntry* lookup(const Parsed& req) const {
    std::vector<const KeyEntry*> candidates;
    if (!req.images_b64.empty()) {
      auto [lo, hi] = key_by_image.equal_range(util::sha256_hex(req.images_b64.front()));
      for (auto it = lo; it != hi; ++it) candidates.push_back(&it->second);
    } else {
      for (const auto& k : imageless) candidates.push_back(&k);
    }
    const KeyEntry* best = nullptr;
    for (const auto* k : candidates) {
      if (!k->question.empty() && req.prompt.find(k->question) == std::string::npos) continue;
      if (!best || k->question.size() > best->question.size()) best = k;
    }
    return best;
  }

  void handle_osm(const httplib::Request& req, httplib::Response& res) {
    count("/osm");
    if (!index) {
      res.status = 404;
      return;
    }
    const json body = json::parse(req.body);
    const auto& b = body.at("bbox");
    const geo::BBox box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    std::string out;
    for (const auto& o : osm::query_objects(*index, box)) out += osm::to_json(o).dump() + "\n";
    res.set_content(out, "application/x-ndjson");
  }

  void handle_model(const std::string& variant, const httplib::Request& req, httplib::Response& res) {
    count("/model-" + variant);
    const Parsed p = parse_request(req.body);
    const KeyEntry* k = lookup(p);
    if (!k) {
      res.set_content(completion("model-" + variant, "unknown").dump(), "application/json");
      return;
    }
    const bool wrong = variant == "b" && util::fnv1a64(k->id) % 3 == 0;
    res.set_content(completion("model-" + variant, format_answer(*k, wrong)).dump(), "application/json");
  }

  void handle_judge(const httplib::Request& req, httplib::Response& res) {
    count("/judge");
    const Parsed p = parse_request(req.body);
    std::string gt = field_after(p.prompt, "Ground Truth Answer:");
    if (gt.empty()) gt = field_after(p.prompt, "Ground Truth:");
    std::string pred = field_after(p.prompt, "Predicted Answer:");
    if (pred.empty()) pred = field_after(p.prompt, "Predicted:");
    const auto a = word_set(gt), b = word_set(pred);
    std::size_t inter = 0;
    for (const auto& w : a) inter += b.count(w);
    const std::size_t uni = a.size() + b.size() - inter;
    const double overlap = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
    const double centre = 1.0 + 4.0 * overlap;
    json top = json::array();
    int best = 1;
    for (int s = 1; s <= 5; ++s) {
      top.push_back({{"token", std::to_string(s)}, {"logprob", -1.5 * std::abs(s - centre) - 0.1}});
      if (std::abs(s - centre) < std::abs(best - centre)) best = s;
    }
    top.push_back({{"token", " "}, {"logprob", -9.0}});
    const json logprobs{{"content", json::array({{{"token", std::to_string(best)}, {"logprob", -0.1},
                                                  {"top_logprobs", top}}})}};
    res.set_content(completion("judge", std::to_string(best), logprobs).dump(), "application/json");
  }
};

MockServer::MockServer(const MockOptions& options, int port) : impl_(std::make_unique<Impl>()) {
  if (options.osm_extract) impl_->index.emplace(osm::load_extract(*options.osm_extract).objects);
  for (const auto& k : options.answer_keys) impl_->load_keys(k);

  auto& srv = impl_->server;
  auto* impl = impl_.get();
  auto guarded = [](auto fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(e.what(), "text/plain");
      }
    };
  };
  srv.Post("/osm", guarded([impl](const auto& req, auto& res) { impl->handle_osm(req, res); }));
  srv.Post("/llm/v1/chat/completions", guarded([impl](const auto& req, auto& res) {
             impl->count("/llm");
             const Parsed p = parse_request(req.body);
             res.set_content(completion("mock-llm", mock_label(p.prompt)).dump(), "application/json");
           }));
  srv.Post("/vlm/v1/chat/completions", guarded([impl](const auto& req, auto& res) {
             impl->count("/vlm");
             const Parsed p = parse_request(req.body);
             std::string all;
             for (const auto& img : p.images_b64) all += img;
             res.set_content(completion("mock-vlm", mock_caption(all)).dump(), "application/json");
           }));
  srv.Post("/model-a/v1/chat/completions",
           guarded([impl](const auto& req, auto& res) { impl->handle_model("a", req, res); }));
  srv.Post("/model-b/v1/chat/completions",
           guarded([impl](const auto& req, auto& res) { impl->handle_model("b", req, res); }));
  srv.Post("/judge/v1/chat/completions", guarded([impl](const auto& req, auto& res) { impl->handle_judge(req, res); }));
  srv.Post(R"(/down/.*)", [impl](const httplib::Request&, httplib::Response& res) {
    impl->count("/down");
    res.status = 503;
  });

  impl_->port = port > 0 ? (srv.bind_to_port("127.0.0.1", port) ? port : -1) : srv.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw Error(ErrorCode::kIoError, "mock server: cannot bind a port");
  impl_->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockServer::~MockServer() { stop(); }

int MockServer::port() const { return impl_->port; }

std::string MockServer::url(const std::string& route) const {
  return "http://127.0.0.1:" + std::to_string(impl_->port) + route;
}

std::size_t MockServer::requests(const std::string& route_prefix) const {
  std::lock_guard lock(impl_->mutex);
  auto it = impl_->counts.find(route_prefix);
  return it == impl_->counts.end() ? 0 : it->second;
}

void MockServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace osmda::mock
