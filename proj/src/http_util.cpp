#include "http_util.hpp"

#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>

#include "oncobench/error.hpp"

namespace oncobench::detail {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL must include a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http") throw ConfigError("only http:// endpoints are supported: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

void configure(httplib::Client& client, int timeout_ms) {
  const auto timeout = std::chrono::milliseconds(timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
}

int backoff_ms(int base, int attempt) {
  thread_local std::mt19937 jitter_rng{std::random_device{}()};
  const long delay = static_cast<long>(base) << std::min(attempt, 16);
  std::uniform_int_distribution<long> jitter(0, delay / 4);
  return static_cast<int>(delay + jitter(jitter_rng));
}

}  // namespace

HttpJsonResponse post_json(const std::string& url, const nlohmann::json& body,
                           const HttpOptions& options) {
  const ParsedUrl parsed = parse_url(url);
  httplib::Client client(parsed.origin);
  configure(client, options.timeout_ms);
  httplib::Headers headers;
  if (!options.auth_token.empty()) {
    headers.emplace("Authorization", "Bearer " + options.auth_token);
  }
  const std::string payload = body.dump();

  int last_status = 0;
  std::string last_error;
  const int max_attempts = 1 + std::max(0, options.max_retries);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    auto res = client.Post(parsed.path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status >= 500) {
      last_status = res->status;
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status >= 400) {
      throw BackendError(url + " returned HTTP " + std::to_string(res->status), res->status);
    } else {
      try {
        return {nlohmann::json::parse(res->body), attempt};
      } catch (const nlohmann::json::parse_error& e) {
        throw BackendError(url + " returned invalid JSON: " + e.what(), res->status);
      }
    }
    if (attempt < max_attempts) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(backoff_ms(options.backoff_base_ms, attempt - 1)));
    }
  }
  throw BackendError(url + " failed after " + std::to_string(max_attempts) +
                         " attempts (last: " + last_error + ")",
                     last_status);
}

bool probe(const std::string& url, int timeout_ms) {
  const ParsedUrl parsed = parse_url(url);
  httplib::Client client(parsed.origin);
  configure(client, timeout_ms);
  auto res = client.Get(parsed.path);
  return static_cast<bool>(res);
}

std::string token_from_env() {
  const char* token = std::getenv("ONCOBENCH_API_TOKEN");
  return token ? std::string(token) : std::string();
}

}  // namespace oncobench::detail
