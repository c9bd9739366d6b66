#include "http.hpp"

#include <httplib.h>

#include "mspa/error.hpp"

namespace mspa::detail {

HttpTarget split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw UsageError("endpoint must be an http URL: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_s,
                         int attempts, const std::string& api_key) {
  const auto target = split_url(url);
  httplib::Client client(target.base);
  client.set_connection_timeout(timeout_s, 0);
  client.set_read_timeout(timeout_s, 0);
  client.set_write_timeout(timeout_s, 0);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  const std::string payload = body.dump();
  std::string last_error;
  const int max_attempts = std::max(attempts, 1);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    auto res = client.Post(target.path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400) {
      throw BackendError(url + ": HTTP " + std::to_string(res->status), false, attempt);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw BackendError(url + ": response is not JSON", false, attempt);
    }
  }
  throw BackendError(url + ": " + last_error + " after " + std::to_string(max_attempts) +
                         " attempts",
                     true, max_attempts);
}

}  // namespace mspa::detail
