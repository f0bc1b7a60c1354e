#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace osmda::mock {

// Deterministic stand-ins for every remote endpoint the pipeline talks to.
//
//   POST /osm                        bbox query over a local extract
//   POST /llm/v1/chat/completions    label = typing tag value + key
//   POST /vlm/v1/chat/completions    caption derived from the image bytes
//   POST /model-a/v1/chat/completions, /model-b/...
//                                    benchmark answers from an answer key;
//                                    model-b gets every third sample wrong
//   POST /judge/v1/chat/completions  G-Eval logprobs
//   POST /down/...                   always 503
struct MockOptions {
  std::optional<std::filesystem::path> osm_extract;
  std::vector<std::filesystem::path> answer_keys;  // benchmark datasets (JSONL)
};

class MockServer {
 public:
  explicit MockServer(const MockOptions& options, int port = 0);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const;
  std::string url(const std::string& route) const;  // e.g. url("/osm")
  std::size_t requests(const std::string& route_prefix) const;

  // Blocks until stop() is called from another thread.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Exposed for tests that need the mock's reasoning without HTTP.
std::string mock_label(const std::string& relabel_prompt);
std::string mock_caption(const std::string& image_bytes_b64);

}  // namespace osmda::mock
