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

#include "embgrader/scheduler.hpp"

#include <iostream>
#include <random>

#include "embgrader/digest.hpp"
#include "embgrader/grading.hpp"
#include "embgrader/http_util.hpp"

namespace embgrader::sched {

namespace {

using Ms = std::chrono::milliseconds;

std::string describe(const net::HttpResult& r) {
  std::string detail = "HTTP " + std::to_string(r.status);
  try {
    const auto j = r.json();
    if (j.contains("detail")) detail += ": " + j["detail"].get<std::string>();
  } catch (const std::exception&) {
  }
  return detail;
}

// Removes a directory tree on scope exit.
struct ScratchDir {
  std::filesystem::path path;
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace

ClaimPolicy fifo_policy() {
  return [](store::Store& s, const std::string& testbed, const std::string& profile,
            Instant lease) { return s.claim_next_pending(testbed, profile, lease); };
}

GradeReport grade_artifacts(const job::JobArtifacts& artifacts,
                            const std::vector<TestCase>& test_cases,
                            const std::filesystem::path& work_dir, Ms timeout) {
  if (artifacts.test_cases.size() != test_cases.size()) {
    throw std::runtime_error("artifact count does not match test cases");
  }
  ScratchDir scratch{work_dir / random_hex(8)};
  std::vector<TestCaseResult> entries;
  std::vector<double> weights;
  for (std::size_t i = 0; i < test_cases.size(); ++i) {
    const auto& tc = test_cases[i];
    const auto& a = artifacts.test_cases[i];
    if (a.test_case_id != tc.id) throw std::runtime_error("artifact order mismatch at " + tc.id);
    const auto dir = scratch.path / std::to_string(i);
    grading::write_artifacts(dir, a.schedule_csv, a.capture_rle, a.print_log);

    TestCaseResult r;
    r.test_case_id = tc.id;
    r.artifacts = artifact_refs_for(tc.id);
    try {
      const auto out = grading::run_grading({tc.grader, dir, timeout});
      r.session_scores = out.sessions;
      r.score = out.score;
      r.feedback = out.feedback;
    } catch (const grading::GraderFault& e) {
      r.grader_error = e.what();
    }
    entries.push_back(std::move(r));
    weights.push_back(tc.weight);
  }
  return make_report(std::move(entries), weights, artifacts.compile);
}

std::vector<store::ArtifactSet> artifact_sets(const job::JobArtifacts& artifacts) {
  std::vector<store::ArtifactSet> out;
  for (const auto& a : artifacts.test_cases) {
    out.push_back({a.test_case_id,
                   {{std::string(grading::kScheduleFile), a.schedule_csv},
                    {std::string(grading::kCaptureFile), a.capture_rle},
                    {std::string(grading::kPrintLogFile), a.print_log}}});
  }
  return out;
}

// ---------------------------------------------------------------------------

DispatchWorker::DispatchWorker(store::Store& store, std::shared_ptr<const Clock> clock,
                               SchedulerConfig cfg, TestbedTarget target, ClaimPolicy policy)
    : store_(store),
      clock_(std::move(clock)),
      cfg_(std::move(cfg)),
      target_(std::move(target)),
      policy_(std::move(policy)) {}

DispatchWorker::~DispatchWorker() {
  request_stop();
  join();
}

void DispatchWorker::start() { thread_ = std::thread([this] { loop(); }); }

void DispatchWorker::request_stop() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
}

void DispatchWorker::join() {
  if (thread_.joinable()) thread_.join();
}

void DispatchWorker::loop() {
  std::mt19937_64 rng(std::random_device{}());
  std::uniform_int_distribution<int64_t> wait(cfg_.poll_min.count(), cfg_.poll_max.count());
  for (;;) {
    {
      std::lock_guard lock(mu_);
      if (stop_) break;
    }
    PollResult r = PollResult::Busy;
    try {
      r = run_once();
    } catch (const std::exception& e) {
      std::cerr << "worker " << target_.id << ": " << e.what() << "\n";
    }
    // Work-conserving: look for the next submission right away.
    if (r == PollResult::Worked) continue;
    std::unique_lock lock(mu_);
    if (cv_.wait_for(lock, Ms(wait(rng)), [this] { return stop_; })) break;
  }
  finished_ = true;
}

PollResult DispatchWorker::run_once() {
  try {
    net::JsonClient health(target_.endpoint, {}, cfg_.http_timeout);
    const auto h = health.get("/health");
    if (!h.ok() || h.json().value("status", "") != "idle") return PollResult::Busy;
  } catch (const std::exception&) {
    return PollResult::Busy;
  }
  const auto lease_until = [this] { return clock_->now() + cfg_.lease; };
  auto rec = policy_(store_, target_.id, target_.dut_profile, lease_until());
  if (!rec) return PollResult::Idle;
  drive(*rec);
  return PollResult::Worked;
}

void DispatchWorker::drive(const store::SubmissionRecord& rec) {
  const std::string& id = rec.sub.id;
  const uint64_t epoch = rec.claim_epoch;
  const auto requeue = [&](const std::string& reason, bool counted) {
    store_.requeue_or_fail(id, target_.id, epoch, reason, cfg_.max_retries, counted);
  };

  const auto assignment = store_.assignment(rec.sub.assignment_id);
  if (!assignment) {
    requeue("assignment vanished", true);
    return;
  }
  const auto test_cases = store_.test_cases(assignment->id);
  if (!store_.apply(id, epoch, event::StartExecution{target_.id})) return;

  net::JsonClient client(target_.endpoint, target_.token, cfg_.http_timeout);
  std::string job_id;
  try {
    const auto posted =
        client.post("/jobs", job::make_job(rec.sub, assignment->dut_profile, test_cases));
    if (posted.status == 409 || posted.status == 503) {
      // Someone else's job or a config fault; not this submission's fault.
      requeue("testbed busy", false);
      return;
    }
    if (!posted.ok()) {
      requeue("coordinator rejected job: " + describe(posted), true);
      return;
    }
    job_id = posted.json().at("job_id").get<std::string>();
  } catch (const std::exception& e) {
    requeue(std::string("coordinator unreachable: ") + e.what(), true);
    return;
  }

  const auto started = std::chrono::steady_clock::now();
  auto renewed = started;
  for (;;) {
    std::this_thread::sleep_for(cfg_.status_poll);
    const auto now = std::chrono::steady_clock::now();
    if (now - renewed >= cfg_.lease / 3) {
      if (!store_.renew_lease(id, target_.id, epoch, clock_->now() + cfg_.lease)) return;
      renewed = now;
    }
    if (now - started > cfg_.job_timeout) {
      requeue("coordinator job timed out", true);
      return;
    }
    net::HttpResult st;
    try {
      st = client.get("/jobs/" + job_id);
    } catch (const std::exception& e) {
      requeue(std::string("coordinator unreachable: ") + e.what(), true);
      return;
    }
    if (!st.ok()) {
      requeue("job status lost: " + describe(st), true);
      return;
    }
    const auto body = st.json();
    const auto state = job::parse_job_state(body.at("status").get<std::string>());
    if (state == job::JobState::Running) continue;
    if (state == job::JobState::Failed) {
      client.del("/jobs/" + job_id);
      requeue("job failed: " + body.value("error", std::string()), true);
      return;
    }
    break;
  }

  job::JobArtifacts artifacts;
  GradeReport report;
  try {
    const auto fetched = client.get("/jobs/" + job_id + "/artifacts");
    if (!fetched.ok()) throw std::runtime_error("artifact fetch: " + describe(fetched));
    artifacts = fetched.json().get<job::JobArtifacts>();
    report = grade_artifacts(artifacts, test_cases, cfg_.work_dir, cfg_.grading_timeout);
  } catch (const std::exception& e) {
    requeue(std::string("artifacts unusable: ") + e.what(), true);
    return;
  }
  // A false return means the lease moved on; the new holder grades instead.
  store_.apply(id, epoch, event::Complete{target_.id, std::move(report)}, artifact_sets(artifacts),
               clock_->now());
  try {
    client.del("/jobs/" + job_id);
  } catch (const std::exception&) {
  }
}

// ---------------------------------------------------------------------------

Scheduler::Scheduler(store::Store& store, std::shared_ptr<const Clock> clock, SchedulerConfig cfg)
    : store_(store), clock_(std::move(clock)), cfg_(std::move(cfg)) {}

Scheduler::~Scheduler() { stop_all(); }

void Scheduler::collect_retired_locked() {
  for (auto it = retired_.begin(); it != retired_.end();) {
    if ((*it)->finished()) {
      (*it)->join();
      it = retired_.erase(it);
    } else {
      ++it;
    }
  }
}

void Scheduler::sync(const std::vector<TestbedTarget>& online) {
  std::lock_guard lock(mu_);
  std::map<std::string, const TestbedTarget*> want;
  for (const auto& t : online) want[t.id] = &t;
  for (auto it = workers_.begin(); it != workers_.end();) {
    const auto w = want.find(it->first);
    if (w == want.end() || !(*w->second == it->second->target())) {
      it->second->request_stop();
      retired_.push_back(std::move(it->second));
      it = workers_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [id, target] : want) {
    if (workers_.count(id)) continue;
    auto worker = std::make_unique<DispatchWorker>(store_, clock_, cfg_, *target);
    worker->start();
    workers_.emplace(id, std::move(worker));
  }
  collect_retired_locked();
}

std::vector<std::string> Scheduler::running_workers() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, w] : workers_) ids.push_back(id);
  return ids;
}

int Scheduler::reap() { return store_.reap_expired(clock_->now()); }

void Scheduler::stop_all() {
  std::lock_guard lock(mu_);
  for (auto& [id, w] : workers_) w->request_stop();
  for (auto& w : retired_) w->request_stop();
  for (auto& [id, w] : workers_) w->join();
  for (auto& w : retired_) w->join();
  workers_.clear();
  retired_.clear();
}

}  // namespace embgrader::sched
