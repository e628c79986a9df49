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
// Testbed coordinator: one simulated DUT + engine behind a small HTTP API.
//
//   POST   /jobs                 GradingJob -> 202 {"job_id"} | 409 busy
//   GET    /jobs/{id}            {"status": running|done|failed, "error"?}
//   GET    /jobs/{id}/artifacts  {"compile", "test_cases": [{"id", "files"}]}
//   DELETE /jobs/{id}            releases the artifacts
//   GET    /health               descriptor, unauthenticated
//
// /jobs* require "Authorization: Bearer <testbed token>".

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "embgrader/dut.hpp"
#include "embgrader/job.hpp"

namespace httplib {
class Server;
}

namespace embgrader::coordinator {

// INI file:
//
//   [testbed]  id, profile, token
//   [server]   url, heartbeat_interval_s
//   [listen]   host, port, advertise
//   [engine]   max_sample_rate_hz, service_delay_s
//   [wiring]   <engine channel> = <DUT pin>
struct Config {
  std::string testbed_id;
  std::string dut_profile = "dut-v1";
  std::string token;
  std::string server_url;  // empty: no heartbeats
  double heartbeat_interval_s = 10.0;
  std::string host = "127.0.0.1";
  int port = 0;
  std::string advertise_url;  // defaults to http://host:port
  uint32_t max_sample_rate_hz = 1'000'000;
  double service_delay_s = 0.0;
  std::map<std::string, std::string> wiring{{"CH0", "P0"}};
};

Config parse_config(std::string_view ini_text);
Config load_config(const std::filesystem::path& path);

// Sorted `section.key=value` lines; comments and layout do not matter.
std::string canonical_config(const Config& c);
std::string config_hash(const Config& c);

// Throws InvalidArgument when the wiring names pins the profile lacks.
void validate(const Config& c);

enum class Status { Idle, Busy, Fault };
std::string_view to_string(Status s);

struct Descriptor {
  std::string testbed_id;
  std::string dut_profile;
  uint32_t max_sample_rate_hz = 0;
  int pins = 0;
  std::map<std::string, std::string> wiring;
  Status status = Status::Idle;
  std::string config_hash;
  std::string endpoint;
  double heartbeat_interval_s = 10.0;
};

nlohmann::json to_json(const Descriptor& d);

// Job is not runnable on this testbed (profile, pin, rate).
class JobRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The DUT and engine. Not thread-safe; the service serializes access.
class Testbed {
 public:
  explicit Testbed(const Config& cfg);

  // Adopts a reloaded config; a new profile gets a new machine.
  void configure(const Config& cfg);

  void check(const job::GradingJob& job) const;

  // Per test case: reset, blank firmware, student firmware (blank again on
  // compile error), capture.
  job::JobArtifacts execute(const job::GradingJob& job);

 private:
  Config cfg_;
  dut::Machine machine_;
};

class Service {
 public:
  explicit Service(Config cfg, std::optional<std::filesystem::path> config_path = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds (port 0 picks one), starts the HTTP and heartbeat threads.
  int start();
  void stop();

  int port() const { return port_; }
  Status status() const;
  Descriptor descriptor() const;

  // One heartbeat now; false on delivery failure.
  bool send_heartbeat();

  // How long finished jobs keep their artifacts without a DELETE.
  static constexpr std::chrono::hours kRetention{24};

 private:
  struct JobRecord {
    job::JobState state = job::JobState::Running;
    std::string error;
    std::optional<job::JobArtifacts> artifacts;
    std::chrono::steady_clock::time_point finished;
  };

  void install_routes();
  void run_job(job::GradingJob job);
  void heartbeat_loop();
  void reload_config();
  void prune_locked();

  mutable std::mutex mu_;
  std::mutex exec_mu_;  // guards job_thread_
  Config cfg_;
  std::optional<std::filesystem::path> config_path_;
  std::string hash_;
  bool config_fault_ = false;
  Testbed testbed_;
  std::map<std::string, JobRecord> jobs_;
  std::atomic<bool> busy_{false};

  std::unique_ptr<httplib::Server> http_;
  std::thread http_thread_;
  std::thread job_thread_;
  std::thread heartbeat_thread_;
  std::condition_variable stop_cv_;
  bool stopping_ = false;
  int port_ = 0;
};

}  // namespace embgrader::coordinator
