#include <doctest.h>

#include <atomic>
#include <functional>
#include <mutex>

#include "osmda/error.hpp"
#include "osmda/relabeler.hpp"
#include "osmda/util/jsonl.hpp"
#include "scripted_server.hpp"
#include "test_support.hpp"

using namespace osmda;
using osm::Tags;

namespace {

class FakeBackend final : public net::ChatBackend {
 public:
  explicit FakeBackend(std::function<std::string(const net::ChatRequest&, int)> fn) : fn_(std::move(fn)) {}
  net::ChatResponse complete(const net::ChatRequest& req) override {
    const int n = calls++;
    {
      std::lock_guard lock(m);
      prompts.push_back(req.prompt);
    }
    return {fn_(req, n), req.model, {}};
  }
  std::atomic<int> calls{0};
  std::mutex m;
  std::vector<std::string> prompts;

 private:
  std::function<std::string(const net::ChatRequest&, int)> fn_;
};

class DownBackend final : public net::ChatBackend {
 public:
  net::ChatResponse complete(const net::ChatRequest&) override {
    ++calls;
    throw Error(ErrorCode::kTransportError, "connection refused");
  }
  std::atomic<int> calls{0};
};

osm::OsmObject obj(std::int64_t id, Tags tags, ObjectClass cls) {
  osm::OsmObject o;
  o.osm_id = id;
  o.tags = std::move(tags);
  o.object_class = cls;
  o.element = osm::ElementType::kNode;
  o.geometry = {geo::GeometryKind::kPoint, {{11.0, 48.0}}};
  return o;
}

}  // namespace

TEST_CASE("canonical tagset is order independent") {
  const auto a = relabel::canonicalize_tagset({{"building", "yes"}, {"amenity", "school"}});
  const auto b = relabel::canonicalize_tagset({{"amenity", "school"}, {"building", "yes"}});
  CHECK(a.text == "amenity=school;building=yes;");
  CHECK(a.hash == b.hash);
  CHECK(a.hash != relabel::canonicalize_tagset({{"amenity", "college"}, {"building", "yes"}}).hash);
  CHECK_THROWS_AS(relabel::canonicalize_tagset({}), Error);
}

TEST_CASE("prompt lists the tags in canonical order") {
  const auto p = relabel::build_label_prompt({{"landuse", "farmland"}, {"crop", "wheat"}});
  CHECK(p.find("crop: wheat, landuse: farmland") != std::string::npos);
  CHECK(p.find("<key>: <value>") == std::string::npos);
}

TEST_CASE("label normalization") {
  CHECK(relabel::normalize_label("Parking Lot").text == "parking lot");
  CHECK(relabel::normalize_label("  \"Farm field.\"  ").text == "farm field");
  CHECK(relabel::normalize_label("Label: school building").text == "school building");
  CHECK(relabel::normalize_label("road\nThis is a road because highway").text == "road");
  CHECK(relabel::normalize_label("building 12").text == "building");
  CHECK(relabel::normalize_label("").text.empty());
  CHECK(relabel::normalize_label("42 !!").text.empty());
  const auto t = relabel::normalize_label("large open green public park");
  CHECK(t.text == "large open green");
  CHECK(t.truncated);
  CHECK_FALSE(relabel::normalize_label("small green park").truncated);
}

TEST_CASE("request_label retries empty output then falls back to the class") {
  FakeBackend empty([](const net::ChatRequest&, int) { return std::string("  "); });
  relabel::LabelParams params;
  const auto out = relabel::request_label({{"building", "yes"}}, ObjectClass::kBuilding, empty, params);
  CHECK(out.fallback);
  CHECK_FALSE(out.transport_failure);
  CHECK(out.label.text == "building");
  CHECK(out.attempts == 3);
  CHECK(empty.calls == 3);

  FakeBackend second([](const net::ChatRequest&, int n) { return n == 0 ? std::string("") : std::string("shed"); });
  const auto ok = relabel::request_label({{"building", "shed"}}, ObjectClass::kBuilding, second, params);
  CHECK_FALSE(ok.fallback);
  CHECK(ok.label.text == "shed");
  CHECK(ok.attempts == 2);
}

TEST_CASE("request_label stops on transport failure") {
  DownBackend down;
  const auto out = relabel::request_label({{"highway", "track"}}, ObjectClass::kHighway, down, {});
  CHECK(out.fallback);
  CHECK(out.transport_failure);
  CHECK(out.label.text == "highway");
  CHECK(down.calls == 1);
}

TEST_CASE("relabel_corpus asks once per unique tagset and reuses the cache") {
  test::ScratchDir dir("relabel");
  std::vector<osm::OsmObject> objs{
      obj(1, {{"building", "house"}}, ObjectClass::kBuilding),
      obj(2, {{"building", "house"}}, ObjectClass::kBuilding),
      obj(3, {{"highway", "service"}, {"surface", "asphalt"}}, ObjectClass::kHighway),
      obj(4, {{"surface", "asphalt"}, {"highway", "service"}}, ObjectClass::kHighway),
      obj(5, {{"amenity", "bench"}}, ObjectClass::kAmenity),
  };
  auto label_for = [](const net::ChatRequest& r, int) -> std::string {
    if (r.prompt.find("building: house") != std::string::npos) return "House.";
    if (r.prompt.find("highway: service") != std::string::npos) return "Service road";
    return "bench";
  };
  relabel::LabelParams params;
  params.model = "m";
  {
    FakeBackend be(label_for);
    relabel::LabelCache cache(dir / "cache.jsonl");
    const auto res = relabel::relabel_corpus(objs, be, cache, params, 4);
    CHECK(be.calls == 3);
    CHECK(res.stats.unique_tagsets == 3);
    CHECK(res.stats.endpoint_requests == 3);
    CHECK(res.stats.cache_hits == 0);
    CHECK(res.stats.unique_labels == 3);
    CHECK(res.objects[0].label == "house");
    CHECK(res.objects[1].label == "house");
    CHECK(res.objects[2].label == "service road");
    CHECK(res.objects[3].label == "service road");
    CHECK(res.objects[4].label == "bench");
    CHECK(util::read_jsonl(dir / "cache.jsonl").size() == 3);
  }
  FakeBackend be2(label_for);
  relabel::LabelCache reloaded(dir / "cache.jsonl");
  CHECK(reloaded.size() == 3);
  const auto again = relabel::relabel_corpus(objs, be2, reloaded, params, 4);
  CHECK(be2.calls == 0);
  CHECK(again.stats.cache_hits == 3);
  CHECK(again.objects == relabel::relabel_corpus(objs, be2, reloaded, params, 1).objects);
}

TEST_CASE("fallback labels are not cached") {
  DownBackend down;
  relabel::LabelCache cache;
  std::vector<osm::OsmObject> objs{obj(1, {{"waterway", "stream"}}, ObjectClass::kWaterway)};
  const auto res = relabel::relabel_corpus(objs, down, cache, {});
  CHECK(res.objects[0].label == "waterway");
  CHECK(res.stats.fallbacks == 1);
  CHECK(res.stats.transport_failures == 1);
  CHECK(cache.size() == 0);
}

TEST_CASE("OpenAI-compatible backend round trip") {
  const std::string reply =
      R"({"model":"labeler","choices":[{"message":{"role":"assistant","content":"parking lot"},)"
      R"("logprobs":{"content":[{"token":"lot","logprob":-0.1,"top_logprobs":[{"token":"lot","logprob":-0.1},)"
      R"({"token":"area","logprob":-2.5}]}]}}]})";
  test::ScriptedServer srv({{503, ""}, {200, reply}});
  net::RetryPolicy policy;
  policy.initial_backoff = std::chrono::milliseconds(1);
  net::OpenAiChatBackend be(srv.url("/v1/chat/completions"), policy);
  net::ChatRequest req;
  req.model = "labeler";
  req.prompt = "hi";
  req.images.push_back({"image/png", "AAAA"});
  req.top_logprobs = 5;
  const auto resp = be.complete(req);
  CHECK(resp.text == "parking lot");
  REQUIRE(resp.final_top_logprobs.size() == 2);
  CHECK(resp.final_top_logprobs[1].token == "area");
  CHECK(resp.final_top_logprobs[1].logprob == -2.5);
  CHECK(srv.requests() == 2);
  const auto sent = nlohmann::json::parse(srv.bodies().back());
  CHECK(sent["model"] == "labeler");
  CHECK(sent["top_logprobs"] == 5);
  CHECK(sent["messages"][0]["content"].size() == 2);

  CHECK_THROWS_AS(net::parse_openai_response("{}"), Error);
  CHECK_THROWS_AS(net::parse_openai_response("not json"), Error);
}
