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

// Shared domain entities: courses, assignments, test cases, submissions and
// grade reports, plus the submission lifecycle and visibility rules.

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace embgrader {

using Instant = std::chrono::time_point<std::chrono::system_clock,
                                        std::chrono::milliseconds>;

inline Instant to_instant(std::chrono::system_clock::time_point tp) {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(tp);
}

// RFC 3339 UTC with millisecond precision, e.g. 2026-10-18T09:30:00.125Z.
std::string format_rfc3339(Instant t);
Instant parse_rfc3339(std::string_view text);

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Role { Instructor, Student };
enum class Visibility { Public, SemiPublic, Hidden };

std::string_view to_string(Role r);
std::string_view to_string(Visibility v);
Role parse_role(std::string_view s);
Visibility parse_visibility(std::string_view s);

struct RosterEntry {
  std::string user_id;
  Role role;
};

struct Course {
  std::string id;
  std::string title;
  std::vector<RosterEntry> roster;
};

// Constant commanded PWM over [start_us, next session start).
struct Session {
  int64_t start_us = 0;
  int64_t period_us = 0;
  double duty = 0.0;  // in [0, 1]

  bool operator==(const Session&) const = default;
};

struct CaptureConfig {
  uint32_t sample_rate_hz = 5000;
  int64_t duration_us = 0;
  std::string pin = "P0";

  bool operator==(const CaptureConfig&) const = default;
};

inline constexpr uint32_t kMaxSampleRateHz = 1'000'000;

// Throws InvalidArgument when the capture config or the session schedule
// break their invariants.
void validate(const CaptureConfig& cfg);
void validate_session(const Session& s);
void validate_schedule(std::span<const Session> sessions, int64_t duration_us);

inline constexpr std::string_view kBuiltinPwmGrader = "builtin:pwm";

struct TestCase {
  std::string id;
  Visibility visibility = Visibility::Public;
  std::vector<Session> sessions;
  CaptureConfig capture;
  std::string grader{kBuiltinPwmGrader};
  double weight = 1.0;
};

void validate(const TestCase& tc);

struct Assignment {
  std::string id;
  std::string course_id;
  std::string statement;
  std::string dut_profile = "dut-v1";
  Instant deadline;
  std::vector<std::string> test_case_ids;
};

// ---------------------------------------------------------------------------
// Grade reports

enum class CompileState { Ok, CompileError };

struct CompileStatus {
  CompileState state = CompileState::Ok;
  std::string message;

  bool ok() const { return state == CompileState::Ok; }
  bool operator==(const CompileStatus&) const = default;
};

struct ArtifactRefs {
  std::string schedule;
  std::string capture;
  std::string print_log;

  bool operator==(const ArtifactRefs&) const = default;
};

ArtifactRefs artifact_refs_for(std::string_view test_case_id);

struct TestCaseResult {
  std::string test_case_id;
  std::vector<double> session_scores;
  double score = 0.0;  // 0..100
  std::string feedback;
  ArtifactRefs artifacts;
  // Set when the grading script itself failed (timeout, crash, bad output).
  std::optional<std::string> grader_error;

  bool operator==(const TestCaseResult&) const = default;
};

struct GradeReport {
  std::vector<TestCaseResult> entries;
  double total = 0.0;  // weighted 0..100
  CompileStatus compile;

  bool operator==(const GradeReport&) const = default;
};

// 100 x mean of the per-session ratios; 0 for an empty list.
double test_case_score(std::span<const double> session_scores);

// Weighted mean of entry scores; entries and weights are index-aligned.
double weighted_total(std::span<const TestCaseResult> entries,
                      std::span<const double> weights);

// Builds a report and enforces the compile-error-implies-zero rule.
GradeReport make_report(std::vector<TestCaseResult> entries,
                        std::span<const double> weights, CompileStatus compile);

// ---------------------------------------------------------------------------
// Submission lifecycle

enum class SubmissionState { Pending, Claimed, Executing, Graded, Failed };

std::string_view to_string(SubmissionState s);
SubmissionState parse_submission_state(std::string_view s);

struct Claim {
  std::string testbed;
  Instant lease_expiry;

  bool operator==(const Claim&) const = default;
};

struct Submission {
  std::string id;
  std::string assignment_id;
  std::string student_id;
  std::string source;
  Instant submitted_at;
  SubmissionState state = SubmissionState::Pending;
  std::optional<Claim> claim;
  std::optional<GradeReport> result;
  std::optional<std::string> failure;
};

namespace event {
struct ClaimFor {
  std::string testbed;
  Instant lease_expiry;
};
struct StartExecution {
  std::string testbed;
};
struct Complete {
  std::string testbed;
  GradeReport report;
};
struct Fail {
  std::string testbed;
  std::string reason;
};
struct LeaseExpired {};
}  // namespace event

using LifecycleEvent =
    std::variant<event::ClaimFor, event::StartExecution, event::Complete,
                 event::Fail, event::LeaseExpired>;

std::string_view event_name(const LifecycleEvent& e);

class IllegalTransition : public std::logic_error {
 public:
  IllegalTransition(SubmissionState from, std::string_view event);
};

class StaleClaim : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Pure state-machine step. Legal edges:
//   pending -claim-> claimed -start-> executing -complete/fail-> graded/failed
//   claimed/executing -lease_expired-> pending
Submission transition(Submission s, const LifecycleEvent& e);

// ---------------------------------------------------------------------------
// Visibility

// What a viewer may see of one test-case entry.
struct EntryAccess {
  bool listed = false;   // entry appears at all
  bool score = false;    // final score
  bool details = false;  // per-session scores, feedback, artifacts
};

EntryAccess entry_access(Role viewer, Visibility v, bool after_deadline);

struct FilteredEntry {
  std::string test_case_id;
  Visibility visibility = Visibility::Public;
  std::optional<double> score;
  std::optional<std::vector<double>> session_scores;
  std::optional<std::string> feedback;
  std::optional<ArtifactRefs> artifacts;
  bool grading_error = false;
  std::optional<std::string> grader_error_detail;  // instructors only

  bool operator==(const FilteredEntry&) const = default;
};

struct FilteredReport {
  std::vector<FilteredEntry> entries;
  double total = 0.0;  // over listed entries only
  CompileStatus compile;

  bool operator==(const FilteredReport&) const = default;
};

inline constexpr std::string_view kGraderFaultNotice =
    "grading error, instructor notified";

// test_cases must contain every test case referenced by the report.
FilteredReport visible_view(const GradeReport& report,
                            std::span<const TestCase> test_cases, Role viewer,
                            Instant now, Instant deadline);

}  // namespace embgrader
