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

// Shared setup for the networked-module tests.

#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <thread>

#include "embgrader/domain.hpp"
#include "embgrader/fixtures.hpp"
#include "embgrader/store.hpp"

namespace embgrader::testing {

inline Instant t0() { return parse_rfc3339("2026-03-02T09:00:00Z"); }

inline Instant at(int64_t ms) { return t0() + std::chrono::milliseconds(ms); }

inline Instant world_deadline() { return t0() + std::chrono::hours(24); }

// A course "c1" with instructor "prof", students "alice" and "bob", and a
// second course "c2" taught by "other-prof" with student "carol". Passwords
// are "<user>-pw". Returns the id of a c1 assignment with the PWM fixture
// test cases, due at world_deadline().
inline std::string seed_world(store::Store& store, Instant deadline = world_deadline()) {
  if (!store.user("admin")) store.create_user("admin", "Admin", "admin-pw", true);
  for (const char* u : {"prof", "alice", "bob", "other-prof", "carol"}) {
    store.create_user(u, u, std::string(u) + "-pw", false);
  }
  store.create_course({"c1", "Embedded Systems", {}});
  store.create_course({"c2", "Other Course", {}});
  store.set_role("c1", "prof", Role::Instructor);
  store.set_role("c1", "alice", Role::Student);
  store.set_role("c1", "bob", Role::Student);
  store.set_role("c2", "other-prof", Role::Instructor);
  store.set_role("c2", "carol", Role::Student);
  const auto fx = fixtures::pwm_assignment();
  Assignment a;
  a.course_id = "c1";
  a.statement = fx.statement;
  a.dut_profile = fx.dut_profile;
  a.deadline = deadline;
  const auto asg = store.create_assignment(a);
  for (const auto& tc : fx.test_cases) store.add_test_case(asg, tc);
  return asg;
}

inline Submission make_submission(const std::string& asg, const std::string& student, Instant when,
                                  std::string_view source) {
  Submission s;
  s.assignment_id = asg;
  s.student_id = student;
  s.source = std::string(source);
  s.submitted_at = when;
  return s;
}

struct World {
  store::Store store{":memory:", 1000};
  std::string asg = seed_world(store);

  static Instant deadline() { return world_deadline(); }

  std::string submit(const std::string& student, Instant when,
                     std::string_view source = fixtures::program("pwm_hw_reactive")) {
    return store.insert_submission(make_submission(asg, student, when, source));
  }
};

// A report whose entries follow the assignment's test cases, each scoring
// `score`.
inline GradeReport uniform_report(const std::vector<TestCase>& tcs, double score) {
  std::vector<TestCaseResult> entries;
  std::vector<double> weights;
  for (const auto& tc : tcs) {
    TestCaseResult r;
    r.test_case_id = tc.id;
    r.session_scores.assign(tc.sessions.size(), score / 100.0);
    r.score = score;
    r.feedback = "feedback for " + tc.id;
    r.artifacts = artifact_refs_for(tc.id);
    entries.push_back(std::move(r));
    weights.push_back(tc.weight);
  }
  return make_report(std::move(entries), weights, {});
}

// Waits for `pred` with a deadline; returns its last value.
template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds timeout = std::chrono::seconds(20)) {
  const auto end = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < end) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return pred();
}

}  // namespace embgrader::testing
