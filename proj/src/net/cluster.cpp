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

#include "embgrader/cluster.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <stdexcept>
#include <thread>

#include "embgrader/digest.hpp"

namespace embgrader::cluster {

ChildProcess::ChildProcess(const std::vector<std::string>& argv,
                           const std::filesystem::path& log) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const std::string log_path = log.string();
  pid_ = ::fork();
  if (pid_ < 0) throw std::runtime_error("fork failed");
  if (pid_ == 0) {
    const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd >= 0) {
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    ::execv(args[0], args.data());
    ::_exit(127);
  }
}

ChildProcess::~ChildProcess() { kill(); }

bool ChildProcess::alive() { return !reaped_ && wait(std::chrono::milliseconds(0)) == -1; }

void ChildProcess::kill() {
  if (pid_ <= 0 || reaped_) return;
  ::kill(pid_, SIGKILL);
  wait(std::chrono::seconds(5));
}

int ChildProcess::wait(std::chrono::milliseconds timeout) {
  if (reaped_) return 0;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    int status = 0;
    const int r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      reaped_ = true;
      return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    }
    if (r < 0) {
      reaped_ = true;
      return -1;
    }
    if (std::chrono::steady_clock::now() >= deadline) return -1;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

// ---------------------------------------------------------------------------

LocalCluster::LocalCluster(ClusterConfig cfg) : cfg_(std::move(cfg)) {}

LocalCluster::~LocalCluster() { stop(); }

void LocalCluster::start(std::chrono::milliseconds timeout) {
  std::filesystem::create_directories(cfg_.work_dir);
  server::ServerConfig sc;
  sc.db_path = ":memory:";
  sc.admin_password = cfg_.admin_password;
  sc.pbkdf2_iterations = cfg_.pbkdf2_iterations;
  sc.scheduler = cfg_.scheduler;
  sc.scheduler.work_dir = cfg_.work_dir / "grading";
  server_ = std::make_unique<server::Server>(sc);
  server_->start();

  services_.resize(static_cast<std::size_t>(cfg_.testbeds));
  children_.resize(static_cast<std::size_t>(cfg_.testbeds));
  for (int i = 0; i < cfg_.testbeds; ++i) {
    tokens_.push_back(server_->store().issue_testbed(testbed_id(i)));
    launch(i);
  }
  if (!wait_workers(static_cast<std::size_t>(cfg_.testbeds), timeout)) {
    throw std::runtime_error("testbeds did not come online");
  }
}

void LocalCluster::launch(int i) {
  coordinator::Config c;
  c.testbed_id = testbed_id(i);
  c.dut_profile = cfg_.dut_profile;
  c.token = tokens_[static_cast<std::size_t>(i)];
  c.server_url = server_->url();
  c.heartbeat_interval_s = cfg_.heartbeat_interval_s;
  c.service_delay_s = cfg_.service_delay_s;
  if (cfg_.coordinator_binary.empty()) {
    auto svc = std::make_unique<coordinator::Service>(c);
    svc->start();
    services_[static_cast<std::size_t>(i)] = std::move(svc);
    return;
  }
  const auto ini = cfg_.work_dir / (c.testbed_id + ".ini");
  std::ofstream out(ini);
  out << "[testbed]\nid = " << c.testbed_id << "\nprofile = " << c.dut_profile
      << "\ntoken = " << c.token << "\n\n[server]\nurl = " << c.server_url
      << "\nheartbeat_interval_s = " << c.heartbeat_interval_s
      << "\n\n[listen]\nhost = 127.0.0.1\nport = 0\n\n[engine]\nservice_delay_s = "
      << c.service_delay_s << "\n\n[wiring]\nCH0 = P0\n";
  out.close();
  children_[static_cast<std::size_t>(i)] = std::make_unique<ChildProcess>(
      std::vector<std::string>{cfg_.coordinator_binary.string(), "coordinator", "--config",
                               ini.string()},
      cfg_.work_dir / (c.testbed_id + ".log"));
}

void LocalCluster::stop() {
  for (auto& s : services_) {
    if (s) s->stop();
  }
  services_.clear();
  children_.clear();
  if (server_) server_->stop();
}

std::string LocalCluster::admin_token() {
  const auto res = server_->api().handle(
      {"POST", "/auth/login", {}, {},
       nlohmann::json{{"user", "admin"}, {"password", cfg_.admin_password}}.dump()});
  if (res.status != 200) throw std::runtime_error("admin login failed");
  return res.json().at("token").get<std::string>();
}

void LocalCluster::kill_testbed(int i) {
  const auto k = static_cast<std::size_t>(i);
  if (children_[k]) {
    children_[k]->kill();
    children_[k].reset();
  } else if (services_[k]) {
    services_[k]->stop();
    services_[k].reset();
  }
}

void LocalCluster::restart_testbed(int i) {
  kill_testbed(i);
  launch(i);
}

bool LocalCluster::wait_workers(std::size_t count, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    server_->maintain();
    if (server_->scheduler().running_workers().size() >= count) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return false;
}

}  // namespace embgrader::cluster
