// Copyright 2026 The PALP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PALP_HTTP_HPP_
#define PALP_HTTP_HPP_

#include <httplib.h>
// <resolv.h> (via httplib) defines _res, which clashes with Eigen parameter names
#undef _res
#include <nlohmann/json.hpp>

#include <chrono>
#include <string>
#include <thread>

#include "palp/error.hpp"

namespace palp
{

struct RetryPolicy
{
  int max_retries = 3;
  std::chrono::milliseconds base_delay{200};
  std::chrono::seconds timeout{60};
};

/// Endpoint split into "scheme://host[:port]" and a path prefix.
struct Endpoint
{
  std::string origin;
  std::string path_prefix;

  static Endpoint parse(const std::string & url)
  {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) {
      throw user_error("endpoint URL needs a scheme (http://...): '" + url + "'");
    }
    const auto slash = url.find('/', scheme + 3);
    Endpoint e;
    e.origin = url.substr(0, slash);
    if (slash != std::string::npos) {
      e.path_prefix = url.substr(slash);
      while (!e.path_prefix.empty() && e.path_prefix.back() == '/') {
        e.path_prefix.pop_back();
      }
    }
    return e;
  }
};

/// POST a JSON body and return the parsed JSON response. Connection
/// failures, 429 and 5xx are retried with exponential backoff and end in a
/// transient error; other non-200 statuses fail immediately.
inline nlohmann::json post_json(
  const Endpoint & endpoint, const std::string & route, const nlohmann::json & body, const std::string & api_key,
  const RetryPolicy & retry)
{
  const std::string path = endpoint.path_prefix + route;
  const std::string payload = body.dump();
  std::string last_failure;
  for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(retry.base_delay * (1 << (attempt - 1)));
    }
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(retry.timeout);
    client.set_read_timeout(retry.timeout);
    client.set_write_timeout(retry.timeout);
    httplib::Headers headers;
    if (!api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key);
    }
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_failure = "connection failed (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status == 200) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error & e) {
        throw runtime_error(endpoint.origin + path + ": malformed JSON response (" + e.what() + ")");
      }
    }
    last_failure = "HTTP " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) {
      throw runtime_error(endpoint.origin + path + ": " + last_failure + ": " + res->body.substr(0, 200));
    }
  }
  throw Error(
    ErrorKind::transient, endpoint.origin + path + ": " + last_failure + " after " +
                            std::to_string(retry.max_retries + 1) + " attempts");
}

}  // namespace palp

#endif  // PALP_HTTP_HPP_
