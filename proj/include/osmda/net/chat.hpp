#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmda/net/http.hpp"

namespace osmda::net {

struct ChatImage {
  std::string mime_type = "image/png";
  std::string base64;
};

ChatImage load_image(const std::string& path);

struct ChatRequest {
  std::string model;
  // Attached ahead of the text part, in order.
  std::vector<ChatImage> images;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 16;
  // When set, ask for logprobs of the top-N candidates at each position.
  std::optional<int> top_logprobs;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct ChatResponse {
  std::string text;
  std::string model;
  // Top candidates at the final generated position (empty unless requested).
  std::vector<TokenLogprob> final_top_logprobs;
};

// Abstract chat-completion endpoint. Implementations must be safe to call
// from several threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// OpenAI-compatible /v1/chat/completions wire format.
nlohmann::json to_openai_payload(const ChatRequest& request);
// Throws kTransportError on malformed JSON or a missing choices array.
ChatResponse parse_openai_response(const std::string& body);

class OpenAiChatBackend final : public ChatBackend {
 public:
  OpenAiChatBackend(std::string url, RetryPolicy policy = {},
                    std::optional<std::string> api_key = std::nullopt);

  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::string url_;
  RetryPolicy policy_;
  std::optional<std::string> api_key_;
};

// Picks up OSMDA_API_KEY from the environment when present.
std::unique_ptr<ChatBackend> make_chat_backend(const std::string& url, RetryPolicy policy = {});

}  // namespace osmda::net
