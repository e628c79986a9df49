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
#include "embgrader/http_util.hpp"

#include <httplib.h>

namespace embgrader::net {

Endpoint parse_url(std::string_view url) {
  Endpoint e;
  std::string_view rest = url;
  if (const auto p = rest.find("://"); p != std::string_view::npos) {
    e.scheme = std::string(rest.substr(0, p));
    rest.remove_prefix(p + 3);
  }
  if (e.scheme != "http") throw std::invalid_argument("only http:// URLs are supported");
  while (!rest.empty() && rest.back() == '/') rest.remove_suffix(1);
  if (rest.find('/') != std::string_view::npos) {
    throw std::invalid_argument("URL must not carry a path: " + std::string(url));
  }
  const auto colon = rest.rfind(':');
  if (colon == std::string_view::npos) {
    e.host = std::string(rest);
    e.port = 80;
  } else {
    e.host = std::string(rest.substr(0, colon));
    e.port = std::stoi(std::string(rest.substr(colon + 1)));
  }
  if (e.host.empty() || e.port <= 0 || e.port > 65535) {
    throw std::invalid_argument("bad URL: " + std::string(url));
  }
  return e;
}

nlohmann::json HttpResult::json() const {
  return body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
}

JsonClient::JsonClient(std::string_view base_url, std::string token,
                       std::chrono::milliseconds timeout)
    : token_(std::move(token)) {
  const Endpoint e = parse_url(base_url);
  client_ = std::make_unique<httplib::Client>(e.host, e.port);
  client_->set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                  0);
  client_->set_read_timeout(timeout);
  client_->set_write_timeout(timeout);
  client_->set_keep_alive(true);
  client_->set_tcp_nodelay(true);
}

JsonClient::~JsonClient() = default;
JsonClient::JsonClient(JsonClient&&) noexcept = default;
JsonClient& JsonClient::operator=(JsonClient&&) noexcept = default;

namespace {

httplib::Headers auth_headers(const std::string& token) {
  httplib::Headers h;
  if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
  return h;
}

HttpResult convert(const httplib::Result& r, const char* method, const std::string& path) {
  if (!r) {
    throw Unreachable(std::string(method) + " " + path + ": " + httplib::to_string(r.error()));
  }
  return {r->status, r->body};
}

}  // namespace

HttpResult JsonClient::get(const std::string& path) {
  return convert(client_->Get(path, auth_headers(token_)), "GET", path);
}

HttpResult JsonClient::post(const std::string& path, const nlohmann::json& body) {
  return convert(client_->Post(path, auth_headers(token_), body.dump(), "application/json"), "POST",
                 path);
}

HttpResult JsonClient::patch(const std::string& path, const nlohmann::json& body) {
  return convert(client_->Patch(path, auth_headers(token_), body.dump(), "application/json"),
                 "PATCH", path);
}

HttpResult JsonClient::del(const std::string& path) {
  return convert(client_->Delete(path, auth_headers(token_)), "DELETE", path);
}

std::optional<std::string> bearer_token(std::string_view v) {
  constexpr std::string_view kPrefix = "Bearer ";
  if (v.size() <= kPrefix.size() || v.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  return std::string(v.substr(kPrefix.size()));
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const std::size_t j = path.find('/', i);
    const std::size_t end = j == std::string_view::npos ? path.size() : j;
    if (end > i) out.emplace_back(path.substr(i, end - i));
    i = end;
  }
  return out;
}

int bind_server(httplib::Server& server, const std::string& host, int port) {
  server.set_tcp_nodelay(true);
  if (port == 0) {
    const int bound = server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

}  // namespace embgrader::net
