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

// Primary server: REST API over the store plus the scheduler and the
// testbed registry. `Api` is socket-free so tests can drive every route
// directly; `Server` wires it to HTTP and runs the maintenance loop.

#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "embgrader/clock.hpp"
#include "embgrader/scheduler.hpp"
#include "embgrader/store.hpp"

namespace httplib {
class Server;
}

namespace embgrader::server {

inline constexpr std::size_t kMaxSourceBytes = 64 * 1024;

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string authorization;  // raw header value
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

struct Endpoint {
  std::string method;
  std::string pattern;  // "{}" marks a path parameter
};

struct ApiOptions {
  std::chrono::milliseconds session_ttl{12 * 3600 * 1000};
  // Called after every accepted heartbeat.
  std::function<void()> on_heartbeat;
};

class Api {
 public:
  Api(store::Store& store, std::shared_ptr<const Clock> clock, ApiOptions opts = {});
  ~Api();

  Response handle(const Request& req);

  // Every route, for docs and the RBAC harness.
  std::vector<Endpoint> endpoints() const;

  // Testbeds with a heartbeat within 3 intervals of now.
  std::vector<sched::TestbedTarget> online_testbeds();

 private:
  struct Principal;
  struct Route;
  struct Access;
  using Params = std::vector<std::string>;
  using Handler = std::function<Response(const Principal&, const Params&, const Request&)>;

  void add(std::string method, std::string pattern, Handler h);

  Response login(const Request& req);
  Response create_user(const Principal& p, const Request& req);
  Response create_course(const Principal& p, const Request& req);
  Response get_course(const Principal& p, const std::string& id);
  Response add_roster(const Principal& p, const std::string& id, const Request& req);
  Response create_assignment(const Principal& p, const std::string& course, const Request& req);
  Response get_assignment(const Principal& p, const std::string& id);
  Response patch_assignment(const Principal& p, const std::string& id, const Request& req);
  Response add_test_case(const Principal& p, const std::string& id, const Request& req);
  Response submit(const Principal& p, const std::string& id, const Request& req);
  Response list_submissions(const Principal& p, const std::string& id);
  Response overview(const Principal& p, const std::string& id, const Request& req);
  Response get_submission(const Principal& p, const std::string& id);
  Response submission_status(const Principal& p, const std::string& id);
  Response get_artifact(const Principal& p, const Params& params);
  Response issue_testbed(const Principal& p, const Request& req);
  Response heartbeat(const Principal& p, const Request& req);
  Response list_testbeds(const Principal& p);

  Principal resolve(const Request& req);
  // Owner or course instructor; throws the matching API error otherwise.
  Access load_submission(const Principal& p, const std::string& id);

  store::Store& store_;
  std::shared_ptr<const Clock> clock_;
  ApiOptions opts_;
  std::vector<Route> routes_;
};

struct ServerConfig {
  std::string db_path = ":memory:";
  std::string host = "127.0.0.1";
  int port = 0;
  // Creates this admin account at startup when it does not exist yet.
  std::string admin_user = "admin";
  std::string admin_password;
  int pbkdf2_iterations = 20'000;
  std::chrono::milliseconds maintenance_interval{200};
  int http_threads = 32;
  sched::SchedulerConfig scheduler;
};

class Server {
 public:
  explicit Server(ServerConfig cfg,
                  std::shared_ptr<const Clock> clock = std::make_shared<SystemClock>());
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds, starts HTTP, the maintenance loop and the workers.
  int start();
  void stop();

  // One maintenance pass: reap expired leases, match workers to the
  // online testbeds.
  void maintain();

  int port() const { return port_; }
  std::string url() const;
  store::Store& store() { return *store_; }
  sched::Scheduler& scheduler() { return *scheduler_; }
  Api& api() { return *api_; }

 private:
  void sync_workers();

  ServerConfig cfg_;
  std::shared_ptr<const Clock> clock_;
  std::unique_ptr<store::Store> store_;
  std::unique_ptr<sched::Scheduler> scheduler_;
  std::unique_ptr<Api> api_;
  std::unique_ptr<httplib::Server> http_;
  std::thread http_thread_;
  std::thread maintenance_thread_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  bool started_ = false;
  int port_ = 0;
};

}  // namespace embgrader::server
