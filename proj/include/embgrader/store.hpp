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
// Persistence for the primary server. One SQLite connection serialized by a
// mutex; every submission state change runs `transition` on the stored row
// and writes back with an UPDATE conditioned on the (state, claim_epoch) it
// read, so a writer holding an outdated claim loses.

#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "embgrader/domain.hpp"

struct sqlite3;

namespace embgrader::store {

class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UserRecord {
  std::string id;
  std::string name;
  bool admin = false;
};

struct SubmissionRecord {
  Submission sub;
  uint64_t claim_epoch = 0;  // bumped by every claim and requeue
  int attempts = 0;          // failed executions so far
  std::optional<Instant> graded_at;
};

// Artifact files of one test case, keyed by file name.
struct ArtifactSet {
  std::string test_case_id;
  std::map<std::string, std::string> files;
};

struct TestbedRecord {
  std::string id;
  std::string token;
  std::string descriptor_json;  // empty until the first heartbeat
  std::string config_hash;
  std::optional<Instant> last_heartbeat;
};

enum class RequeueOutcome { Requeued, Failed, Lost };

class Store {
 public:
  // `path` may be ":memory:".
  explicit Store(const std::string& path, int pbkdf2_iterations = 20'000);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  // Users and sessions.
  void create_user(const std::string& id, const std::string& name, const std::string& password,
                   bool admin);
  std::optional<UserRecord> user(const std::string& id);
  bool verify_password(const std::string& id, const std::string& password);
  std::string create_session(const std::string& user_id, Instant expires);
  std::optional<std::string> session_user(const std::string& token, Instant now);

  // Courses.
  void create_course(const Course& c);
  std::optional<Course> course(const std::string& id);
  void set_role(const std::string& course_id, const std::string& user_id, Role role);
  std::optional<Role> role_in(const std::string& course_id, const std::string& user_id);

  // Assignments and test cases.
  std::string create_assignment(Assignment a);
  std::optional<Assignment> assignment(const std::string& id);
  void set_deadline(const std::string& assignment_id, Instant deadline);
  void add_test_case(const std::string& assignment_id, const TestCase& tc);
  std::vector<TestCase> test_cases(const std::string& assignment_id);

  // Submissions.
  std::string insert_submission(const Submission& s);
  std::optional<SubmissionRecord> submission(const std::string& id);
  // Ordered by submitted-at; without reports the `result` fields stay empty.
  std::vector<SubmissionRecord> submissions(const std::string& assignment_id,
                                            const std::optional<std::string>& student = {},
                                            bool with_reports = true);

  // Atomically claims the oldest pending submission whose assignment targets
  // `dut_profile`. FIFO by submitted-at, then id.
  std::optional<SubmissionRecord> claim_next_pending(const std::string& testbed,
                                                     const std::string& dut_profile,
                                                     Instant lease_expiry);

  // Applies `event` if the row still has `epoch`; false when the claim is
  // gone. Complete events also persist the report and the artifacts.
  bool apply(const std::string& id, uint64_t epoch, const LifecycleEvent& event,
             const std::vector<ArtifactSet>& artifacts = {}, Instant at = {});

  bool renew_lease(const std::string& id, const std::string& testbed, uint64_t epoch,
                   Instant lease_expiry);

  // Back to pending. A counted attempt on an executing submission bumps
  // attempts and fails it instead once attempts exceed max_retries.
  RequeueOutcome requeue_or_fail(const std::string& id, const std::string& testbed,
                                 uint64_t epoch, const std::string& reason, int max_retries,
                                 bool count_attempt = true);

  // Returns claimed/executing submissions with an expired lease to pending.
  int reap_expired(Instant now);

  std::optional<std::string> artifact(const std::string& submission_id,
                                      const std::string& test_case_id, const std::string& file);

  // Rows in the report table for one submission; 1 for a graded submission.
  int report_rows(const std::string& submission_id);
  int total_report_rows();

  // Testbeds.
  std::string issue_testbed(const std::string& id);
  std::optional<std::string> testbed_for_token(const std::string& token);
  // Returns true when the config hash differs from the stored one.
  bool record_heartbeat(const std::string& id, const std::string& descriptor_json,
                        const std::string& config_hash, Instant at);
  std::vector<TestbedRecord> testbeds();

 private:
  class Tx;
  std::optional<SubmissionRecord> load_submission(const std::string& id);
  void write_submission(const SubmissionRecord& before, const SubmissionRecord& after);
  void exec(const char* sql);

  std::recursive_mutex mu_;
  sqlite3* db_ = nullptr;
  int iterations_;
};

}  // namespace embgrader::store
