#include "osmda/net/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <regex>
#include <thread>

#include "osmda/error.hpp"
#include "osmda/util/log.hpp"

namespace osmda::net {

std::chrono::milliseconds RetryPolicy::backoff_for(int attempt) const {
  double ms = static_cast<double>(initial_backoff.count());
  for (int i = 1; i < attempt; ++i) ms *= backoff_factor;
  ms = std::min(ms, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

Url parse_url(const std::string& url) {
  static const std::regex kPattern(R"(^(https?://[^/\s]+)(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kPattern)) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported endpoint URL: " + url);
  }
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

bool is_retryable_status(int status) noexcept {
  return status == 0 || status == 429 || (status >= 500 && status <= 599);
}

HttpResponse post_with_retry(const std::string& url, const std::string& body,
                             const std::string& content_type, const RetryPolicy& policy,
                             const std::map<std::string, std::string>& headers) {
  const Url parsed = parse_url(url);
  httplib::Client client(parsed.origin);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(
      std::min<std::chrono::seconds>(policy.timeout, std::chrono::seconds(30))));
  client.set_read_timeout(policy.timeout);
  client.set_write_timeout(policy.timeout);
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  int last_status = 0;
  std::string last_detail;
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto res = client.Post(parsed.path, hdrs, body, content_type);
    if (res) {
      last_status = res->status;
      if (res->status >= 200 && res->status < 300) return {res->status, res->body};
      last_detail = res->body.substr(0, 200);
      if (!is_retryable_status(res->status)) break;
    } else {
      last_status = 0;
      last_detail = httplib::to_string(res.error());
    }
    if (attempt < attempts) {
      log::warn("http", "retrying request",
                {{"url", url}, {"attempt", attempt}, {"status", last_status}});
      std::this_thread::sleep_for(policy.backoff_for(attempt));
    }
  }
  throw RemoteError("request to " + url + " failed (status " + std::to_string(last_status) +
                        "): " + last_detail,
                    last_status);
}

}  // namespace osmda::net
