// Copyright 2026 The embgrader Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// Small HTTP helpers shared by the server, the coordinator and the bench.

#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace httplib {
class Client;
class Server;
}  // namespace httplib

namespace embgrader::net {

struct Endpoint {
  std::string scheme = "http";
  std::string host = "127.0.0.1";
  int port = 80;

  std::string base() const { return scheme + "://" + host + ":" + std::to_string(port); }
};

// Accepts "http://host:port" with an optional trailing slash.
Endpoint parse_url(std::string_view url);

// Transport-level failure: refused, reset, timed out.
class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HttpResult {
  int status = 0;
  std::string body;

  nlohmann::json json() const;
  bool ok() const { return status >= 200 && status < 300; }
};

// One-request-at-a-time JSON client with bearer auth. Not thread-safe.
class JsonClient {
 public:
  JsonClient(std::string_view base_url, std::string token = {},
             std::chrono::milliseconds timeout = std::chrono::seconds(10));
  ~JsonClient();
  JsonClient(JsonClient&&) noexcept;
  JsonClient& operator=(JsonClient&&) noexcept;

  HttpResult get(const std::string& path);
  HttpResult post(const std::string& path, const nlohmann::json& body);
  HttpResult patch(const std::string& path, const nlohmann::json& body);
  HttpResult del(const std::string& path);

  void set_token(std::string token) { token_ = std::move(token); }

 private:
  std::unique_ptr<httplib::Client> client_;
  std::string token_;
};

// "Authorization: Bearer <t>" -> t.
std::optional<std::string> bearer_token(std::string_view header_value);

// Splits "/a/b/c" into {"a","b","c"}; no percent-decoding.
std::vector<std::string> split_path(std::string_view path);

// Binds to port 0 when `port` is 0; returns the bound port.
int bind_server(httplib::Server& server, const std::string& host, int port);

}  // namespace embgrader::net
