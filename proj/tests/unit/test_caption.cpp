#include <doctest.h>

#include <atomic>
#include <functional>
#include <mutex>

#include "osmda/caption.hpp"
#include "osmda/error.hpp"
#include "osmda/util/jsonl.hpp"
#include "test_support.hpp"

using namespace osmda;

namespace {

class RecordingBackend final : public net::ChatBackend {
 public:
  explicit RecordingBackend(std::function<std::string(const net::ChatRequest&, int)> fn) : fn_(std::move(fn)) {}
  net::ChatResponse complete(const net::ChatRequest& req) override {
    const int n = calls++;
    {
      std::lock_guard lock(m);
      requests.push_back(req);
    }
    return {fn_(req, n), "vlm-test", {}};
  }
  std::atomic<int> calls{0};
  std::mutex m;
  std::vector<net::ChatRequest> requests;

 private:
  std::function<std::string(const net::ChatRequest&, int)> fn_;
};

class FlakyBackend final : public net::ChatBackend {
 public:
  explicit FlakyBackend(int failures) : failures_(failures) {}
  net::ChatResponse complete(const net::ChatRequest&) override {
    if (calls++ < failures_) throw Error(ErrorCode::kTransportError, "reset by peer");
    return {"Fields.", "vlm-test", {}};
  }
  std::atomic<int> calls{0};

 private:
  int failures_;
};

geo::ImageRecord fixture_image(int idx) {
  char id[16];
  std::snprintf(id, sizeof id, "img_%02d", idx);
  auto rec = test::square_image(id, {11.57, 48.14}, 128, 1.0);
  rec.image_path = std::string("images/") + id + ".png";
  return rec;
}

caption::CaptionParams fixture_params() {
  caption::CaptionParams p;
  p.model = "captioner";
  p.image_root = test::fixture_dir();
  p.map_root = test::fixture_dir();
  return p;
}

void write_rows(const std::filesystem::path& path, const std::string& prefix, std::size_t n) {
  std::string text;
  for (std::size_t i = 0; i < n; ++i)
    text += nlohmann::json{{"image_id", prefix + std::to_string(i)}, {"caption", "c"}}.dump() + "\n";
  util::write_text(path, text);
}

}  // namespace

TEST_CASE("caption prompt substitutes the resolution") {
  const auto p = caption::build_caption_prompt(0.5);
  CHECK(p.find("given the 0.50 m resolution") != std::string::npos);
  CHECK(p.find("Do NOT reference the map, overlay, outlines") != std::string::npos);
  CHECK(p.find("Write one single paragraph only.") != std::string::npos);
  CHECK(p.find("<res>") == std::string::npos);
  CHECK(caption::build_caption_prompt(0.3).find("given the 0.30 m resolution") != std::string::npos);
  CHECK(caption::build_caption_prompt(12.345).find("given the 12.35 m resolution") != std::string::npos);
  CHECK_THROWS_AS(caption::build_caption_prompt(0.0), Error);
}

TEST_CASE("single paragraph normalization") {
  CHECK(caption::single_paragraph("A farm.") == "A farm.");
  CHECK(caption::single_paragraph("First part.\n\nSecond part.") == "First part. Second part.");
  CHECK(caption::single_paragraph("  a\tb \r\n c  ") == "a b c");
}

TEST_CASE("generate_caption sends satellite then map at T = 1.0") {
  RecordingBackend be([](const net::ChatRequest&, int) { return std::string("A farm."); });
  const auto rec = fixture_image(3);
  const auto out = caption::generate_caption(rec, "images/img_04.png", be, fixture_params());
  REQUIRE(out.sample);
  CHECK(out.sample->caption == "A farm.");
  CHECK(out.sample->image_path == "images/img_03.png");
  CHECK(out.sample->map_path == "images/img_04.png");
  CHECK(out.sample->temperature == 1.0);
  CHECK(out.sample->model == "vlm-test");
  CHECK(out.sample->caption.find("img_04") == std::string::npos);
  REQUIRE(be.requests.size() == 1);
  const auto& req = be.requests[0];
  REQUIRE(req.images.size() == 2);
  CHECK(req.images[0].base64 == net::load_image((test::fixture_dir() / "images/img_03.png").string()).base64);
  CHECK(req.images[1].base64 == net::load_image((test::fixture_dir() / "images/img_04.png").string()).base64);
  CHECK(req.temperature == 1.0);
  CHECK(req.max_tokens == 768);
  CHECK(req.prompt == caption::build_caption_prompt(1.0));
  const auto payload = net::to_openai_payload(req);
  CHECK(payload["temperature"] == 1.0);
  CHECK(payload["messages"][0]["content"][0]["type"] == "image_url");
  CHECK(payload["messages"][0]["content"][2]["type"] == "text");
}

TEST_CASE("generate_caption collapses paragraphs and handles the map-less variant") {
  RecordingBackend be([](const net::ChatRequest&, int) { return std::string("Para one.\n\nPara two."); });
  auto params = fixture_params();
  params.with_map = false;
  const auto out = caption::generate_caption(fixture_image(1), "images/img_02.png", be, params);
  REQUIRE(out.sample);
  CHECK(out.sample->caption == "Para one. Para two.");
  CHECK(out.sample->map_path.empty());
  CHECK(be.requests[0].images.size() == 1);
}

TEST_CASE("empty captions fail after retries, transport errors are retried") {
  RecordingBackend empty([](const net::ChatRequest&, int) { return std::string("\n \n"); });
  const auto out = caption::generate_caption(fixture_image(0), "images/img_00.png", empty, fixture_params());
  CHECK_FALSE(out.sample);
  CHECK_FALSE(out.failure.empty());
  CHECK(empty.calls == 3);

  FlakyBackend flaky(2);
  CHECK(caption::generate_caption(fixture_image(0), "images/img_00.png", flaky, fixture_params()).sample);
  CHECK(flaky.calls == 3);

  FlakyBackend down(100);
  CHECK_THROWS_AS(caption::generate_caption(fixture_image(0), "images/img_00.png", down, fixture_params()), Error);
}

TEST_CASE("corpus emission sorts, round-trips and refuses empties") {
  test::ScratchDir dir("corpus");
  std::vector<caption::CaptionSample> samples;
  for (const char* id : {"c", "a", "b"}) {
    caption::CaptionSample s;
    s.image_id = id;
    s.image_path = std::string(id) + ".png";
    s.caption = std::string("Caption ") + id + ".";
    s.resolution_m = 0.5;
    s.prompt_hash = "abc";
    s.model = "m";
    samples.push_back(s);
  }
  caption::emit_corpus(samples, dir / "corpus.jsonl");
  const auto back = caption::read_corpus(dir / "corpus.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back[0].image_id == "a");
  CHECK(back[2].image_id == "c");
  CHECK(back[1] == samples[2]);
  CHECK_THROWS_AS(caption::emit_corpus({}, dir / "none.jsonl"), Error);

  auto bad = samples[0];
  bad.caption = "one\n\ntwo";
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.caption = "";
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("caption_corpus summarizes failures and resumes from the checkpoint") {
  test::ScratchDir dir("caprun");
  std::vector<caption::CaptionJob> jobs;
  for (int i = 0; i < 6; ++i) jobs.push_back({fixture_image(i), "images/img_00.png"});
  auto reply = [](const net::ChatRequest& r, int) {
    // the third fixture image gets nothing useful
    return r.images[0].base64 == net::load_image((test::fixture_dir() / "images/img_02.png").string()).base64
               ? std::string("")
               : std::string("Roads and houses.");
  };
  RecordingBackend first(reply);
  const auto run = caption::caption_corpus(jobs, first, fixture_params(), dir / "ckpt.jsonl", 3);
  CHECK(run.samples.size() == 5);
  CHECK(run.summary.ok == 5);
  CHECK(run.summary.failed == 1);
  CHECK(run.summary.failures.count("img_02") == 1);
  CHECK(util::read_jsonl(dir / "ckpt.jsonl").size() == 5);

  RecordingBackend second(reply);
  const auto resumed = caption::caption_corpus(jobs, second, fixture_params(), dir / "ckpt.jsonl", 3);
  CHECK(second.calls == 3);  // only img_02 is asked again, three attempts
  CHECK(resumed.samples.size() == 5);
}

TEST_CASE("mixture indices repeat or subsample to the target") {
  const auto sub = caption::mixture_indices(100, 50, 1);
  CHECK(sub.size() == 50);
  CHECK(std::set<std::size_t>(sub.begin(), sub.end()).size() == 50);

  const auto rep = caption::mixture_indices(10, 50, 1);
  std::map<std::size_t, int> times;
  for (auto i : rep) times[i]++;
  CHECK(rep.size() == 50);
  for (const auto& [i, n] : times) CHECK(n == 5);

  const auto rem = caption::mixture_indices(10, 25, 4);
  times.clear();
  for (auto i : rem) times[i]++;
  int threes = 0;
  for (const auto& [i, n] : times) {
    CHECK((n == 2 || n == 3));
    threes += n == 3;
  }
  CHECK(threes == 5);
  CHECK(caption::mixture_indices(10, 25, 4) == rem);
}

TEST_CASE("mix_corpora gives every component the same weight") {
  test::ScratchDir dir("mix");
  write_rows(dir / "big.jsonl", "b", 100);
  write_rows(dir / "small.jsonl", "s", 10);
  caption::MixtureSpec spec;
  spec.components = {{"big", dir / "big.jsonl"}, {"small", dir / "small.jsonl"}};
  spec.target = 50;
  spec.seed = 3;
  const auto mix = caption::mix_corpora(spec);
  CHECK(mix.rows.size() == 100);
  CHECK(mix.contributed.at("big") == 50);
  CHECK(mix.contributed.at("small") == 50);
  std::map<std::string, std::size_t> counted;
  for (const auto& r : mix.rows) counted[r.at("mix_component").get<std::string>()]++;
  CHECK(counted == mix.contributed);
  const auto again = caption::mix_corpora(spec);
  CHECK(again.rows == mix.rows);
  CHECK(again.manifest == mix.manifest);

  spec.target = 0;
  CHECK(caption::mix_corpora(spec).contributed.at("small") == 100);

  util::write_text(dir / "empty.jsonl", "");
  spec.components.push_back({"empty", dir / "empty.jsonl"});
  CHECK_THROWS_AS(caption::mix_corpora(spec), Error);
}
