#include "http_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#ifdef REPSHARP_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include "repsharp/error.hpp"

namespace repsharp::detail {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::InvalidConfig, "endpoint must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string resolve_token(const std::string& env_name) {
  if (env_name.empty()) return {};
  const char* value = std::getenv(env_name.c_str());
  if (value == nullptr) {
    throw Error(Errc::InvalidConfig, "environment variable " + env_name + " is not set");
  }
  return value;
}

std::string post_json_with_retry(const std::string& url, const std::string& body,
                                 const std::string& bearer_token, const RetryPolicy& policy) {
  const SplitUrl target = split_url(url);
  httplib::Client client(target.origin);
  const auto timeout = std::chrono::milliseconds(policy.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  std::string last_failure;
  for (int attempt = 0;; ++attempt) {
    auto result = client.Post(target.path, headers, body, "application/json");
    if (result) {
      const int status = result->status;
      if (status >= 200 && status < 300) return result->body;
      last_failure = "HTTP " + std::to_string(status);
      if (!retryable_status(status)) {
        throw Error(Errc::RemoteUnavailable, url + " answered " + last_failure + " (not retried)");
      }
    } else {
      last_failure = httplib::to_string(result.error());
    }
    if (attempt >= policy.max_retries) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(policy.backoff_initial_ms) * (1LL << attempt));
  }
  throw Error(Errc::RemoteUnavailable, url + " failed after " + std::to_string(policy.max_retries) +
                                           " retries: " + last_failure);
}

}  // namespace repsharp::detail
