#include <doctest.h>

#include <fcntl.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mock/mock_endpoints.hpp"
#include "oracles.hpp"
#include "osmda/cli/cli.hpp"
#include "osmda/eval/metrics.hpp"
#include "osmda/eval/tasks.hpp"
#include "osmda/util/jsonl.hpp"
#include "test_support.hpp"

using namespace osmda;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Runs the CLI with stderr captured into `err`.
int run(const std::vector<std::string>& args, std::string* err = nullptr) {
  std::vector<std::string> full{"osmda", "--quiet"};
  full.insert(full.end(), args.begin(), args.end());
  const fs::path capture = fs::path(OSMDA_SCRATCH_DIR) / ("stderr-" + std::to_string(::getpid()) + ".txt");
  std::fflush(stderr);
  const int saved = ::dup(2);
  const int fd = ::open(capture.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  ::dup2(fd, 2);
  ::close(fd);
  const int code = cli::run_cli(full);
  std::fflush(stderr);
  ::dup2(saved, 2);
  ::close(saved);
  if (err) *err = util::read_text(capture);
  return code;
}

std::string fixture(const std::string& rel) { return (test::fixture_dir() / rel).string(); }

class EnvVar {
 public:
  EnvVar(const char* name, const std::string& value) : name_(name) { ::setenv(name, value.c_str(), 1); }
  ~EnvVar() { ::unsetenv(name_); }

 private:
  const char* name_;
};

mock::MockOptions mock_options() {
  mock::MockOptions o;
  o.osm_extract = test::fixture_dir() / "extract.osm";
  for (const char* b : {"rsvqa_hr", "aid", "vrsbench_cap"}) o.answer_keys.push_back(test::fixture_dir() / "eval" / (std::string(b) + ".jsonl"));
  return o;
}

json read_json(const fs::path& p) { return json::parse(util::read_text(p)); }

}  // namespace

TEST_CASE("stages refuse to run before their producer") {
  test::ScratchDir dir("cli-order");
  std::string err;
  CHECK(run({"filter", "--workdir", dir.path().string()}, &err) == cli::kExitValidation);
  CHECK(err.find("osmda ingest") != std::string::npos);
  CHECK(run({"curate", "--workdir", dir.path().string()}, &err) == cli::kExitValidation);
  CHECK(err.find("osmda ingest") != std::string::npos);
  CHECK(run({"report", "--workdir", dir.path().string()}, &err) == cli::kExitValidation);
  CHECK(err.find("osmda evaluate") != std::string::npos);
  CHECK(run({"bogus"}) == cli::kExitValidation);
  CHECK(run({"ingest", "--workdir", dir.path().string()}, &err) == cli::kExitValidation);
  CHECK(err.find("--images") != std::string::npos);
}

TEST_CASE("config precedence is file, then environment, then flags") {
  mock::MockServer srv(mock_options());
  test::ScratchDir dir("cli-config");
  const std::string good = srv.url("/llm/v1/chat/completions");
  const std::string down = srv.url("/down/v1/chat/completions");
  {
    std::ofstream ini(dir / "run.ini");
    ini << "[paths]\nimages = " << fixture("images.jsonl") << "\nosm_extract = " << fixture("extract.osm")
        << "\nworkdir = work\n\n[endpoints]\nllm = " << down << "\nretries = 1\n\n[run]\nseed = 7\n";
  }
  const std::string cfg = (dir / "run.ini").string();
  REQUIRE(run({"--config", cfg, "ingest"}) == cli::kExitOk);
  CHECK(fs::exists(dir / "work/ingest/objects.jsonl"));  // workdir relative to the file
  REQUIRE(run({"--config", cfg, "filter"}) == cli::kExitOk);
  CHECK(read_json(dir / "work/filter/report.json.manifest.json")["seed"] == 7);
  REQUIRE(run({"--config", cfg, "--seed", "9", "filter"}) == cli::kExitOk);
  CHECK(read_json(dir / "work/filter/report.json.manifest.json")["seed"] == 9);

  CHECK(run({"--config", cfg, "relabel"}) == cli::kExitEndpoint);
  {
    EnvVar env("OSMDA_LLM_ENDPOINT", good);
    CHECK(run({"--config", cfg, "relabel"}) == cli::kExitOk);
    fs::remove(dir / "work/relabel/label_cache.jsonl");  // otherwise nothing is asked
    CHECK(run({"--config", cfg, "relabel", "--llm-endpoint", down}) == cli::kExitEndpoint);
  }
  CHECK(srv.requests("/down") > 0);

  std::ofstream(dir / "bad.ini") << "[curation]\nt9 = 1\n";
  std::string err;
  CHECK(run({"--config", (dir / "bad.ini").string(), "filter"}, &err) == cli::kExitValidation);
  CHECK(err.find("curation.t9") != std::string::npos);
  CHECK(run({"--config", (dir / "missing.ini").string(), "filter"}) == cli::kExitValidation);
}

TEST_CASE("an unreachable OSM endpoint exits 3") {
  mock::MockServer srv(mock_options());
  test::ScratchDir dir("cli-down");
  CHECK(run({"--workdir", dir.path().string(), "--retries", "2", "--retry-backoff-ms", "1", "ingest", "--images",
             fixture("images.jsonl"), "--osm-endpoint", srv.url("/down/osm")}) == cli::kExitEndpoint);
  CHECK_FALSE(fs::exists(dir / "ingest/objects.jsonl"));
  CHECK(run({"--workdir", dir.path().string(), "ingest", "--images", fixture("images.jsonl"), "--osm-endpoint",
             srv.url("/osm")}) == cli::kExitOk);
  CHECK(srv.requests("/osm") > 0);
}

TEST_CASE("report ranks match the brute-force oracle and refuse mixed digests") {
  mock::MockServer srv(mock_options());
  test::ScratchDir dir("cli-report");
  const std::string w = dir.path().string();
  const std::vector<std::string> benches{"rsvqa_hr", "aid", "vrsbench_cap"};
  for (const char* m : {"model-a", "model-b"}) {
    for (const auto& b : benches) {
      REQUIRE(run({"--workdir", w, "evaluate", "--benchmark", b, "--dataset", fixture("eval/" + b + ".jsonl"),
                   "--model-endpoint", srv.url(std::string("/") + m + "/v1/chat/completions"), "--model-name", m,
                   "--judge-endpoint", srv.url("/judge/v1/chat/completions")}) == cli::kExitOk);
    }
  }
  REQUIRE(run({"--workdir", w, "report"}) == cli::kExitOk);
  const auto rep = read_json(dir / "report/report.json");

  std::vector<eval::RankCell> cells;
  for (const auto& c : rep["cells"]) {
    const auto bench = eval::benchmark_from_string(c["benchmark"].get<std::string>());
    REQUIRE(bench);
    cells.push_back({c["benchmark"].get<std::string>(), c["metric"].get<std::string>(), eval::split_of(*bench), true});
  }
  CHECK(cells.size() == benches.size());
  std::map<std::string, eval::ModelScores> models;
  for (const char* m : {"model-a", "model-b"}) {
    for (const auto& b : benches) {
      const auto r = read_json(dir / "evaluate" / m / (b + ".json"));
      const auto& primary = r["metrics"]["primary"];
      const eval::RankCell key{b, primary["metric"].get<std::string>(), eval::split_of(*eval::benchmark_from_string(b)), true};
      models[m].model = m;
      models[m].values[eval::cell_key(key)] = primary["value"].get<double>();
    }
  }
  std::vector<eval::ModelScores> list;
  for (const auto& [_, s] : models) list.push_back(s);
  const auto expect = oracle::brute_force_average_rank(cells, list);
  REQUIRE(rep["rows"].size() == expect.size());
  std::map<std::string, const json*> rows;
  for (const auto& r : rep["rows"]) rows[r["model"].get<std::string>()] = &r;
  for (const auto& e : expect) {
    CAPTURE(e.model);
    REQUIRE(rows.count(e.model) == 1);
    CHECK((*rows[e.model])["overall"].get<double>() == doctest::Approx(e.overall).epsilon(1e-12));
    CHECK((*rows[e.model])["fine_tuning"].get<double>() == doctest::Approx(e.fine_tuning).epsilon(1e-12));
    CHECK((*rows[e.model])["generalization"].get<double>() == doctest::Approx(e.generalization).epsilon(1e-12));
  }
  // model-b is wrong on every third sample, so it cannot rank ahead
  CHECK((*rows["model-a"])["overall"].get<double>() <= (*rows["model-b"])["overall"].get<double>());
  CHECK(fs::exists(dir / "report/ranks.csv"));

  REQUIRE(run({"--workdir", w, "evaluate", "--benchmark", "rsvqa_hr", "--dataset", fixture("eval/rsvqa_hr.jsonl"),
               "--model-endpoint", srv.url("/model-a/v1/chat/completions"), "--model-name", "model-c",
               "--rural-urban-literal"}) == cli::kExitOk);
  std::string err;
  CHECK(run({"--workdir", w, "report"}, &err) == cli::kExitValidation);
  CHECK(err.find("conflicting config digests") != std::string::npos);

  CHECK(run({"--workdir", w, "evaluate", "--benchmark", "aid", "--dataset", fixture("eval/aid.jsonl"), "--retries",
             "1", "--model-endpoint", srv.url("/down/v1/chat/completions"), "--model-name", "model-d"}) ==
        cli::kExitEndpoint);
  CHECK(run({"--workdir", w, "evaluate", "--benchmark", "nope", "--dataset", fixture("eval/aid.jsonl"),
             "--model-endpoint", srv.url("/model-a/v1/chat/completions")}) == cli::kExitValidation);
}
