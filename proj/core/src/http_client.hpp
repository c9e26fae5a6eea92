#pragma once

#include <string>
#include <string_view>

namespace repsharp::detail {

struct RetryPolicy {
  int max_retries = 3;
  int backoff_initial_ms = 1000;
  int timeout_ms = 30000;
};

/// POSTs a JSON body and returns the response body of the first 2xx reply.
/// Retries connection failures, timeouts, 429 and 5xx with exponential
/// backoff; any other status is fatal. Throws RemoteUnavailable.
std::string post_json_with_retry(const std::string& url, const std::string& body,
                                 const std::string& bearer_token, const RetryPolicy& policy);

/// Resolves the token named by `env_name`; empty name means no auth.
/// Throws InvalidConfig if the variable is named but unset.
std::string resolve_token(const std::string& env_name);

}  // namespace repsharp::detail
