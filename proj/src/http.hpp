#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace mspa::detail {

struct HttpTarget {
  std::string base;  // scheme://host[:port]
  std::string path;
};

HttpTarget split_url(const std::string& url);

// POSTs `body` and parses the JSON reply. Transport failures and 5xx replies
// are retried up to `attempts` times, then surface as a retryable
// BackendError carrying the attempt count. 4xx and malformed bodies fail
// immediately.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_s,
                         int attempts, const std::string& api_key);

}  // namespace mspa::detail
