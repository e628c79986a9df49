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

#include <doctest.h>

#include <chrono>
#include <random>

#include "embgrader/domain.hpp"
#include "embgrader/json_io.hpp"

using namespace embgrader;
using namespace std::chrono_literals;

namespace {

constexpr SubmissionState kStates[] = {SubmissionState::Pending, SubmissionState::Claimed,
                                       SubmissionState::Executing, SubmissionState::Graded,
                                       SubmissionState::Failed};

const Instant kT0 = to_instant(std::chrono::system_clock::time_point{} + 1'700'000'000s);

Submission in_state(SubmissionState st, const std::string& holder = "tb1") {
  Submission s;
  s.id = "s1";
  s.assignment_id = "a1";
  s.student_id = "u1";
  s.source = "HALT";
  s.submitted_at = kT0;
  s.state = st;
  if (st == SubmissionState::Claimed || st == SubmissionState::Executing) {
    s.claim = Claim{holder, kT0 + 60s};
  }
  if (st == SubmissionState::Graded) s.result = GradeReport{};
  return s;
}

std::vector<LifecycleEvent> all_events() {
  return {event::ClaimFor{"tb1", kT0 + 60s}, event::StartExecution{"tb1"},
          event::Complete{"tb1", GradeReport{}}, event::Fail{"tb1", "boom"},
          event::LeaseExpired{}};
}

// Legal edges, written out independently of the implementation.
std::optional<SubmissionState> legal_target(SubmissionState from, std::string_view ev) {
  using SS = SubmissionState;
  if (from == SS::Pending && ev == "claim") return SS::Claimed;
  if (from == SS::Claimed && ev == "start_execution") return SS::Executing;
  if (from == SS::Executing && ev == "complete") return SS::Graded;
  if (from == SS::Executing && ev == "fail") return SS::Failed;
  if (from == SS::Claimed && ev == "lease_expired") return SS::Pending;
  if (from == SS::Executing && ev == "lease_expired") return SS::Pending;
  return std::nullopt;
}

}  // namespace

TEST_CASE("transition: pending claim sets the claim") {
  const auto s = transition(in_state(SubmissionState::Pending), event::ClaimFor{"tb1", kT0 + 60s});
  CHECK(s.state == SubmissionState::Claimed);
  REQUIRE(s.claim);
  CHECK(*s.claim == Claim{"tb1", kT0 + 60s});
}

TEST_CASE("transition: a second claim is illegal") {
  CHECK_THROWS_AS(transition(in_state(SubmissionState::Claimed), event::ClaimFor{"tb2", kT0}),
                  IllegalTransition);
}

TEST_CASE("transition: lease expiry while executing returns to pending") {
  const auto s = transition(in_state(SubmissionState::Executing), event::LeaseExpired{});
  CHECK(s.state == SubmissionState::Pending);
  CHECK_FALSE(s.claim);
}

TEST_CASE("transition: all 25 state/event pairs match the legal edge table") {
  int legal = 0;
  for (auto st : kStates) {
    for (const auto& ev : all_events()) {
      const auto name = event_name(ev);
      CAPTURE(to_string(st));
      CAPTURE(name);
      const auto want = legal_target(st, name);
      if (want) {
        ++legal;
        const auto before = in_state(st);
        const auto after = transition(before, ev);
        CHECK(after.state == *want);
        CHECK(after.id == before.id);
        CHECK(after.source == before.source);
        CHECK(after.submitted_at == before.submitted_at);
        CHECK(after.claim.has_value() == (*want == SubmissionState::Claimed ||
                                          *want == SubmissionState::Executing));
        CHECK(after.result.has_value() == (*want == SubmissionState::Graded));
      } else {
        CHECK_THROWS_AS(transition(in_state(st), ev), IllegalTransition);
      }
    }
  }
  CHECK(legal == 6);
}

TEST_CASE("transition: events from a non-holder are stale") {
  CHECK_THROWS_AS(transition(in_state(SubmissionState::Claimed, "tb2"), event::StartExecution{"tb1"}),
                  StaleClaim);
  CHECK_THROWS_AS(
      transition(in_state(SubmissionState::Executing, "tb2"), event::Complete{"tb1", {}}),
      StaleClaim);
  CHECK_THROWS_AS(transition(in_state(SubmissionState::Executing, "tb2"), event::Fail{"tb1", "x"}),
                  StaleClaim);
}

TEST_CASE("session and schedule validation") {
  CHECK_NOTHROW(validate_session({0, 2, 0.5}));
  CHECK_THROWS_AS(validate_session({0, 1, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(validate_session({0, 10, 1.5}), InvalidArgument);
  CHECK_THROWS_AS(validate_session({0, 10, 0.05}), InvalidArgument);
  CHECK_NOTHROW(validate_session({0, 10, 0.0}));
  CHECK_NOTHROW(validate_session({0, 10, 1.0}));

  const std::vector<Session> ok{{0, 1000, 0.5}, {5000, 2000, 0.25}};
  CHECK_NOTHROW(validate_schedule(ok, 10000));
  CHECK_THROWS_AS(validate_schedule(std::vector<Session>{{100, 1000, 0.5}}, 10000), InvalidArgument);
  CHECK_THROWS_AS(validate_schedule(std::vector<Session>{{0, 1000, 0.5}, {0, 10, 0.5}}, 10000),
                  InvalidArgument);
  CHECK_THROWS_AS(validate_schedule(std::vector<Session>{{0, 1000, 0.5}, {10000, 10, 0.5}}, 10000),
                  InvalidArgument);

  CHECK_THROWS_AS(validate(CaptureConfig{0, 1000, "P0"}), InvalidArgument);
  CHECK_THROWS_AS(validate(CaptureConfig{2'000'000, 1000, "P0"}), InvalidArgument);
  CHECK_THROWS_AS(validate(CaptureConfig{5000, 100, "P0"}), InvalidArgument);
  CHECK_NOTHROW(validate(CaptureConfig{5000, 200, "P0"}));
}

TEST_CASE("score arithmetic matches a brute-force weighted sum") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 7;
    std::vector<TestCaseResult> entries(n);
    std::vector<double> weights(n);
    std::vector<double> equal(n, 1.0);
    double num = 0, den = 0, plain = 0;
    for (int i = 0; i < n; ++i) {
      std::vector<double> ss(1 + i % 3);
      for (auto& x : ss) x = u(rng);
      entries[i].session_scores = ss;
      entries[i].score = test_case_score(ss);
      double mean = 0;
      for (double x : ss) mean += x;
      CHECK(entries[i].score == doctest::Approx(100.0 * mean / ss.size()));
      weights[i] = std::floor(u(rng) * 4);
      num += weights[i] * entries[i].score;
      den += weights[i];
      plain += entries[i].score;
    }
    const double total = weighted_total(entries, weights);
    CHECK(total >= 0.0);
    CHECK(total <= 100.0);
    if (den > 0) CHECK(total == doctest::Approx(num / den));
    CHECK(weighted_total(entries, equal) == doctest::Approx(plain / n));
  }
}

TEST_CASE("compile errors zero every score") {
  std::vector<TestCaseResult> e(2);
  e[0].session_scores = {1.0, 1.0};
  e[0].score = 100;
  e[1].session_scores = {0.5};
  e[1].score = 50;
  const std::vector<double> w{1, 1};
  const auto r = make_report(e, w, {CompileState::CompileError, "line 1: unresolved label"});
  CHECK(r.total == 0.0);
  for (const auto& x : r.entries) {
    CHECK(x.score == 0.0);
    for (double s : x.session_scores) CHECK(s == 0.0);
  }
}

namespace {

// Role x visibility x deadline, enumerated by hand.
struct Cell {
  Role role;
  Visibility vis;
  bool after;
  EntryAccess want;
};

const Cell kTable[] = {
    {Role::Instructor, Visibility::Public, false, {true, true, true}},
    {Role::Instructor, Visibility::SemiPublic, false, {true, true, true}},
    {Role::Instructor, Visibility::Hidden, false, {true, true, true}},
    {Role::Instructor, Visibility::Public, true, {true, true, true}},
    {Role::Instructor, Visibility::SemiPublic, true, {true, true, true}},
    {Role::Instructor, Visibility::Hidden, true, {true, true, true}},
    {Role::Student, Visibility::Public, false, {true, true, true}},
    {Role::Student, Visibility::SemiPublic, false, {true, true, false}},
    {Role::Student, Visibility::Hidden, false, {false, false, false}},
    {Role::Student, Visibility::Public, true, {true, true, true}},
    {Role::Student, Visibility::SemiPublic, true, {true, true, true}},
    {Role::Student, Visibility::Hidden, true, {true, true, true}},
};

std::vector<TestCase> three_cases() {
  std::vector<TestCase> tcs(3);
  tcs[0].id = "pub";
  tcs[0].visibility = Visibility::Public;
  tcs[1].id = "semi";
  tcs[1].visibility = Visibility::SemiPublic;
  tcs[2].id = "hid";
  tcs[2].visibility = Visibility::Hidden;
  return tcs;
}

GradeReport three_entry_report() {
  GradeReport r;
  for (auto [id, score] : {std::pair{"pub", 90.0}, {"semi", 73.0}, {"hid", 40.0}}) {
    TestCaseResult e;
    e.test_case_id = id;
    e.score = score;
    e.session_scores = {score / 100};
    e.feedback = std::string(id) == "semi" ? "duty off by 4%" : "fine";
    e.artifacts = artifact_refs_for(id);
    r.entries.push_back(e);
  }
  r.total = (90.0 + 73.0 + 40.0) / 3;
  return r;
}

}  // namespace

TEST_CASE("visibility rule table, 12 cells") {
  for (const auto& c : kTable) {
    const auto got = entry_access(c.role, c.vis, c.after);
    CAPTURE(to_string(c.role));
    CAPTURE(to_string(c.vis));
    CAPTURE(c.after);
    CHECK(got.listed == c.want.listed);
    CHECK(got.score == c.want.score);
    CHECK(got.details == c.want.details);
  }
}

TEST_CASE("visible_view: instructor sees the report unchanged") {
  const auto r = three_entry_report();
  const auto v = visible_view(r, three_cases(), Role::Instructor, kT0, kT0 + 1h);
  REQUIRE(v.entries.size() == 3);
  CHECK(v.total == r.total);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(*v.entries[i].score == r.entries[i].score);
    CHECK(*v.entries[i].feedback == r.entries[i].feedback);
    CHECK(*v.entries[i].artifacts == r.entries[i].artifacts);
  }
}

TEST_CASE("visible_view: student before the deadline") {
  const auto v =
      visible_view(three_entry_report(), three_cases(), Role::Student, kT0, kT0 + 1h);
  REQUIRE(v.entries.size() == 2);
  CHECK(v.entries[0].test_case_id == "pub");
  CHECK(v.entries[0].feedback);
  const auto& semi = v.entries[1];
  CHECK(semi.test_case_id == "semi");
  CHECK(*semi.score == 73.0);
  CHECK_FALSE(semi.feedback);
  CHECK_FALSE(semi.artifacts);
  CHECK_FALSE(semi.session_scores);
  CHECK(v.total == doctest::Approx((90.0 + 73.0) / 2));
  const auto text = nlohmann::json(v).dump();
  CHECK(text.find("hid") == std::string::npos);
}

TEST_CASE("visible_view: fields never shrink across the deadline") {
  const auto r = three_entry_report();
  for (auto role : {Role::Student, Role::Instructor}) {
    const auto before = visible_view(r, three_cases(), role, kT0, kT0 + 1s);
    const auto after = visible_view(r, three_cases(), role, kT0 + 1s, kT0 + 1s);
    for (const auto& b : before.entries) {
      const auto a = std::find_if(after.entries.begin(), after.entries.end(),
                                  [&](const auto& x) { return x.test_case_id == b.test_case_id; });
      REQUIRE(a != after.entries.end());
      CHECK((!b.score || a->score));
      CHECK((!b.feedback || a->feedback));
      CHECK((!b.artifacts || a->artifacts));
    }
  }
}

TEST_CASE("visible_view: grader faults are hidden from students") {
  auto r = three_entry_report();
  r.entries[0].grader_error = "grading script exceeded 30000 ms";
  r.entries[0].score = 0;
  const auto s = visible_view(r, three_cases(), Role::Student, kT0, kT0 + 1h);
  CHECK(s.entries[0].grading_error);
  CHECK_FALSE(s.entries[0].score);
  CHECK(*s.entries[0].feedback == kGraderFaultNotice);
  CHECK_FALSE(s.entries[0].grader_error_detail);
  const auto i = visible_view(r, three_cases(), Role::Instructor, kT0, kT0 + 1h);
  CHECK(*i.entries[0].grader_error_detail == "grading script exceeded 30000 ms");
}

TEST_CASE("RFC 3339 round trip") {
  const Instant t = kT0 + 123ms;
  const auto text = format_rfc3339(t);
  CHECK(text == "2023-11-14T22:13:20.123Z");
  CHECK(parse_rfc3339(text) == t);
  CHECK(parse_rfc3339("2023-11-14T22:13:20Z") == kT0);
  CHECK_THROWS_AS(parse_rfc3339("yesterday"), InvalidArgument);
}

TEST_CASE("grade report json round trip") {
  auto r = three_entry_report();
  r.entries[1].grader_error = "crashed";
  r.compile = {CompileState::CompileError, "line 3: bad register"};
  const auto text = canonical(r);
  CHECK(nlohmann::json::parse(text).get<GradeReport>() == r);
  CHECK(canonical(nlohmann::json::parse(text).get<GradeReport>()) == text);
}
