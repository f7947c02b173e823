#pragma once

#include <string>

#include <json.hpp>

namespace oncobench::detail {

struct HttpOptions {
  int timeout_ms = 60000;
  int max_retries = 3;
  int backoff_base_ms = 500;
  std::string auth_token;  // sent as a bearer token when non-empty
};

struct HttpJsonResponse {
  nlohmann::json body;
  int attempts = 0;
};

/// POSTs a JSON body, retrying on transport errors, timeouts and 5xx with
/// exponential backoff (base, x2, up to +25% jitter). 4xx fails at once.
/// Throws BackendError carrying the last HTTP status.
HttpJsonResponse post_json(const std::string& url, const nlohmann::json& body,
                           const HttpOptions& options);

/// True when something answers HTTP at the URL's host and port.
bool probe(const std::string& url, int timeout_ms);

/// Reads ONCOBENCH_API_TOKEN, empty when unset.
std::string token_from_env();

}  // namespace oncobench::detail
