#pragma once

#include <chrono>
#include <map>
#include <string>

namespace osmda::net {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  std::chrono::milliseconds max_backoff{10000};
  std::chrono::seconds timeout{300};

  std::chrono::milliseconds backoff_for(int attempt) const;  // attempt >= 1
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/'
};

// Throws kInvalidArgument for anything other than http(s)://host[:port][/path].
Url parse_url(const std::string& url);

// 5xx, 429 and transport failures (no response, timeout) are retried with
// exponential backoff; other non-2xx statuses fail immediately. Throws
// RemoteError carrying the last status once attempts are exhausted.
HttpResponse post_with_retry(const std::string& url, const std::string& body,
                             const std::string& content_type, const RetryPolicy& policy,
                             const std::map<std::string, std::string>& headers = {});

bool is_retryable_status(int status) noexcept;

}  // namespace osmda::net
