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

// Dispatch workers: one per online testbed. Each worker claims pending
// submissions through the store's compare-and-set, drives them through its
// coordinator, grades the artifacts and persists the report. Workers share
// no in-memory state; a worker whose claim was taken over (lease expiry)
// finds out when its next conditional write fails and drops the job.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "embgrader/clock.hpp"
#include "embgrader/job.hpp"
#include "embgrader/store.hpp"

namespace embgrader::sched {

struct SchedulerConfig {
  std::chrono::milliseconds poll_min{500};
  std::chrono::milliseconds poll_max{1500};
  std::chrono::milliseconds lease{120'000};
  std::chrono::milliseconds status_poll{25};
  int max_retries = 2;
  std::chrono::milliseconds grading_timeout{30'000};
  // Upper bound on one coordinator job before the attempt counts as failed.
  std::chrono::milliseconds job_timeout{600'000};
  std::chrono::milliseconds http_timeout{10'000};
  std::filesystem::path work_dir = std::filesystem::temp_directory_path() / "embgrader-grading";
};

struct TestbedTarget {
  std::string id;
  std::string dut_profile;
  std::string endpoint;
  std::string token;

  bool operator==(const TestbedTarget&) const = default;
};

// Picks the next submission for a testbed. Must claim atomically.
using ClaimPolicy = std::function<std::optional<store::SubmissionRecord>(
    store::Store&, const std::string& testbed, const std::string& dut_profile, Instant lease)>;

// Oldest compatible pending submission first.
ClaimPolicy fifo_policy();

// Runs every test case's artifacts through its grader and assembles the
// report. Grader faults score 0 with grader_error set.
GradeReport grade_artifacts(const job::JobArtifacts& artifacts,
                            const std::vector<TestCase>& test_cases,
                            const std::filesystem::path& work_dir,
                            std::chrono::milliseconds timeout);

std::vector<store::ArtifactSet> artifact_sets(const job::JobArtifacts& artifacts);

enum class PollResult {
  Worked,  // a submission was handled (whatever its outcome)
  Idle,    // nothing pending for this testbed
  Busy,    // testbed unreachable, busy or faulted
};

class DispatchWorker {
 public:
  DispatchWorker(store::Store& store, std::shared_ptr<const Clock> clock, SchedulerConfig cfg,
                 TestbedTarget target, ClaimPolicy policy = fifo_policy());
  ~DispatchWorker();
  DispatchWorker(const DispatchWorker&) = delete;
  DispatchWorker& operator=(const DispatchWorker&) = delete;

  // One poll: claim, dispatch, grade, persist.
  PollResult run_once();

  void start();
  // Asks the loop to exit after the current poll; does not wait.
  void request_stop();
  void join();
  bool finished() const { return finished_; }

  const TestbedTarget& target() const { return target_; }

 private:
  void loop();
  void drive(const store::SubmissionRecord& rec);

  store::Store& store_;
  std::shared_ptr<const Clock> clock_;
  SchedulerConfig cfg_;
  TestbedTarget target_;
  ClaimPolicy policy_;

  std::thread thread_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::atomic<bool> finished_{false};
};

class Scheduler {
 public:
  Scheduler(store::Store& store, std::shared_ptr<const Clock> clock, SchedulerConfig cfg);
  ~Scheduler();

  // Makes the running workers match `online`: new testbeds get a worker,
  // vanished or changed ones are stopped.
  void sync(const std::vector<TestbedTarget>& online);

  std::vector<std::string> running_workers() const;

  // Returns the number of submissions put back to pending.
  int reap();

  void stop_all();

  const SchedulerConfig& config() const { return cfg_; }

 private:
  void collect_retired_locked();

  store::Store& store_;
  std::shared_ptr<const Clock> clock_;
  SchedulerConfig cfg_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<DispatchWorker>> workers_;
  std::vector<std::unique_ptr<DispatchWorker>> retired_;
};

}  // namespace embgrader::sched
