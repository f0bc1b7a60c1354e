#include "osmda/net/chat.hpp"

#include <cstdlib>
#include <filesystem>

#include "osmda/error.hpp"
#include "osmda/util/hash.hpp"
#include "osmda/util/jsonl.hpp"
#include "osmda/util/text.hpp"

namespace osmda::net {

using nlohmann::json;

ChatImage load_image(const std::string& path) {
  const auto ext = util::to_lower_ascii(std::filesystem::path(path).extension().string());
  ChatImage img;
  if (ext == ".jpg" || ext == ".jpeg") img.mime_type = "image/jpeg";
  else if (ext == ".tif" || ext == ".tiff") img.mime_type = "image/tiff";
  img.base64 = util::base64_encode(util::read_text(path));
  return img;
}

json to_openai_payload(const ChatRequest& request) {
  json message = {{"role", "user"}};
  if (request.images.empty()) {
    message["content"] = request.prompt;
  } else {
    json parts = json::array();
    for (const auto& img : request.images) {
      parts.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:" + img.mime_type + ";base64," + img.base64}}}});
    }
    parts.push_back({{"type", "text"}, {"text", request.prompt}});
    message["content"] = std::move(parts);
  }
  json payload = {{"model", request.model},
                  {"messages", json::array({message})},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_tokens}};
  if (request.top_logprobs) {
    payload["logprobs"] = true;
    payload["top_logprobs"] = *request.top_logprobs;
  }
  return payload;
}

ChatResponse parse_openai_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kTransportError, std::string("malformed endpoint JSON: ") + e.what());
  }
  try {
    const auto& choice = doc.at("choices").at(0);
    ChatResponse out;
    const auto& content = choice.at("message").at("content");
    out.text = content.is_null() ? std::string() : content.get<std::string>();
    if (doc.contains("model") && doc["model"].is_string()) out.model = doc["model"];
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array() &&
        !choice["logprobs"]["content"].empty()) {
      const auto& last = choice["logprobs"]["content"].back();
      if (last.contains("top_logprobs")) {
        for (const auto& cand : last["top_logprobs"]) {
          out.final_top_logprobs.push_back({cand.at("token").get<std::string>(),
                                            cand.at("logprob").get<double>()});
        }
      } else {
        out.final_top_logprobs.push_back({last.at("token").get<std::string>(),
                                          last.at("logprob").get<double>()});
      }
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kTransportError, std::string("unexpected endpoint response: ") + e.what());
  }
}

OpenAiChatBackend::OpenAiChatBackend(std::string url, RetryPolicy policy,
                                     std::optional<std::string> api_key)
    : url_(std::move(url)), policy_(policy), api_key_(std::move(api_key)) {
  parse_url(url_);
}

ChatResponse OpenAiChatBackend::complete(const ChatRequest& request) {
  std::map<std::string, std::string> headers;
  if (api_key_) headers["Authorization"] = "Bearer " + *api_key_;
  const auto res =
      post_with_retry(url_, to_openai_payload(request).dump(), "application/json", policy_, headers);
  return parse_openai_response(res.body);
}

std::unique_ptr<ChatBackend> make_chat_backend(const std::string& url, RetryPolicy policy) {
  std::optional<std::string> key;
  if (const char* env = std::getenv("OSMDA_API_KEY"); env && *env) key = env;
  return std::make_unique<OpenAiChatBackend>(url, policy, key);
}

}  // namespace osmda::net
