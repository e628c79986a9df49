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

// A primary server plus T testbed coordinators on loopback, for the bench
// and the end-to-end tests. Coordinators run in-process or, when a binary
// is given, as `<binary> coordinator --config <file>` child processes that
// can be SIGKILLed.

#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "embgrader/coordinator.hpp"
#include "embgrader/server.hpp"

namespace embgrader::cluster {

// A child process; killed with SIGKILL on destruction.
class ChildProcess {
 public:
  ChildProcess(const std::vector<std::string>& argv, const std::filesystem::path& log);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  int pid() const { return pid_; }
  bool alive();
  void kill();
  // Returns the exit status, or -1 when it has not exited within `timeout`.
  int wait(std::chrono::milliseconds timeout);

 private:
  int pid_ = -1;
  bool reaped_ = false;
};

struct ClusterConfig {
  int testbeds = 1;
  std::string dut_profile = "dut-v1";
  double service_delay_s = 0.3;
  double heartbeat_interval_s = 0.5;
  std::string admin_password = "admin-password";
  int pbkdf2_iterations = 2'000;
  sched::SchedulerConfig scheduler;
  // Empty: in-process coordinators.
  std::filesystem::path coordinator_binary;
  std::filesystem::path work_dir = std::filesystem::temp_directory_path() / "embgrader-cluster";
};

class LocalCluster {
 public:
  explicit LocalCluster(ClusterConfig cfg);
  ~LocalCluster();

  // Starts everything and waits until every testbed has a worker.
  void start(std::chrono::milliseconds timeout = std::chrono::seconds(20));
  void stop();

  server::Server& server() { return *server_; }
  std::string server_url() const { return server_->url(); }
  std::string admin_token();

  void kill_testbed(int i);
  void restart_testbed(int i);

  // True once `count` testbeds are online and have a running worker.
  bool wait_workers(std::size_t count, std::chrono::milliseconds timeout);

  std::string testbed_id(int i) const { return "tb-" + std::to_string(i); }

 private:
  void launch(int i);

  ClusterConfig cfg_;
  std::unique_ptr<server::Server> server_;
  std::vector<std::string> tokens_;
  std::vector<std::unique_ptr<coordinator::Service>> services_;
  std::vector<std::unique_ptr<ChildProcess>> children_;
};

}  // namespace embgrader::cluster
