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

#include "embgrader/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <numeric>

namespace embgrader {

std::string format_rfc3339(Instant t) {
  const auto ms = t.time_since_epoch().count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  long frac = static_cast<long>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, frac);
  return buf;
}

Instant parse_rfc3339(std::string_view text) {
  std::string s(text);
  std::tm tm{};
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year,
                  &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec,
                  &consumed) != 6) {
    throw InvalidArgument("bad RFC 3339 timestamp: " + s);
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  long ms = 0;
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    long scale = 100;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      ms += (s[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
  }
  long offset_s = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    int hh = 0, mm = 0;
    if (std::sscanf(s.c_str() + pos + 1, "%2d:%2d", &hh, &mm) != 2) {
      throw InvalidArgument("bad RFC 3339 offset: " + s);
    }
    offset_s = (hh * 3600L + mm * 60L) * (s[pos] == '+' ? 1 : -1);
    pos += 6;
  } else {
    throw InvalidArgument("RFC 3339 timestamp needs a zone: " + s);
  }
  if (pos != s.size()) throw InvalidArgument("trailing text in timestamp: " + s);
  const std::time_t secs = timegm(&tm) - offset_s;
  return Instant(std::chrono::milliseconds(secs * 1000LL + ms));
}

std::string_view to_string(Role r) {
  return r == Role::Instructor ? "instructor" : "student";
}

std::string_view to_string(Visibility v) {
  switch (v) {
    case Visibility::Public:
      return "public";
    case Visibility::SemiPublic:
      return "semi_public";
    case Visibility::Hidden:
      return "hidden";
  }
  return "?";
}

Role parse_role(std::string_view s) {
  if (s == "instructor") return Role::Instructor;
  if (s == "student") return Role::Student;
  throw InvalidArgument("unknown role: " + std::string(s));
}

Visibility parse_visibility(std::string_view s) {
  if (s == "public") return Visibility::Public;
  if (s == "semi_public") return Visibility::SemiPublic;
  if (s == "hidden") return Visibility::Hidden;
  throw InvalidArgument("unknown visibility: " + std::string(s));
}

void validate(const CaptureConfig& cfg) {
  if (cfg.sample_rate_hz < 1 || cfg.sample_rate_hz > kMaxSampleRateHz) {
    throw InvalidArgument("sample rate must be in [1, 1000000] Hz");
  }
  // duration must cover at least one sample interval: duration*rate >= 1e6
  if (cfg.duration_us <= 0 ||
      static_cast<long double>(cfg.duration_us) * cfg.sample_rate_hz < 1e6L) {
    throw InvalidArgument("capture duration shorter than one sample interval");
  }
  if (cfg.pin.empty()) throw InvalidArgument("capture pin missing");
}

void validate_session(const Session& s) {
  if (s.start_us < 0) throw InvalidArgument("session start is negative");
  if (s.period_us < 2) throw InvalidArgument("session period must be >= 2 us");
  if (!(s.duty >= 0.0 && s.duty <= 1.0)) {
    throw InvalidArgument("session duty must be in [0, 1]");
  }
  if (s.duty != 0.0 && s.duty != 1.0) {
    const double high = s.duty * static_cast<double>(s.period_us);
    const double low = static_cast<double>(s.period_us) - high;
    if (high < 1.0 - 1e-9 || low < 1.0 - 1e-9) {
      throw InvalidArgument("session high and low times must be >= 1 us");
    }
  }
}

void validate_schedule(std::span<const Session> sessions, int64_t duration_us) {
  if (sessions.empty()) throw InvalidArgument("schedule has no sessions");
  if (sessions.front().start_us != 0) {
    throw InvalidArgument("first session must start at t=0");
  }
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    validate_session(sessions[i]);
    if (i > 0 && sessions[i].start_us <= sessions[i - 1].start_us) {
      throw InvalidArgument("session starts must be strictly increasing");
    }
    if (sessions[i].start_us >= duration_us) {
      throw InvalidArgument("session starts after the end of the capture");
    }
  }
}

void validate(const TestCase& tc) {
  if (tc.id.empty()) throw InvalidArgument("test case id missing");
  if (!(tc.weight >= 0.0) || !std::isfinite(tc.weight)) {
    throw InvalidArgument("test case weight must be nonnegative");
  }
  if (tc.grader.empty()) throw InvalidArgument("grading script ref missing");
  validate(tc.capture);
  validate_schedule(tc.sessions, tc.capture.duration_us);
}

ArtifactRefs artifact_refs_for(std::string_view test_case_id) {
  const std::string base(test_case_id);
  return {base + "/schedule.csv", base + "/capture.rle", base + "/print.log"};
}

double test_case_score(std::span<const double> session_scores) {
  if (session_scores.empty()) return 0.0;
  const double sum =
      std::accumulate(session_scores.begin(), session_scores.end(), 0.0);
  return 100.0 * sum / static_cast<double>(session_scores.size());
}

double weighted_total(std::span<const TestCaseResult> entries,
                      std::span<const double> weights) {
  if (entries.size() != weights.size()) {
    throw InvalidArgument("entries and weights differ in length");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    num += weights[i] * entries[i].score;
    den += weights[i];
  }
  if (den <= 0.0) return 0.0;
  return std::clamp(num / den, 0.0, 100.0);
}

GradeReport make_report(std::vector<TestCaseResult> entries,
                        std::span<const double> weights, CompileStatus compile) {
  if (!compile.ok()) {
    for (auto& e : entries) {
      std::fill(e.session_scores.begin(), e.session_scores.end(), 0.0);
      e.score = 0.0;
    }
  }
  GradeReport r;
  r.total = weighted_total(entries, weights);
  r.entries = std::move(entries);
  r.compile = std::move(compile);
  return r;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SubmissionState s) {
  switch (s) {
    case SubmissionState::Pending:
      return "pending";
    case SubmissionState::Claimed:
      return "claimed";
    case SubmissionState::Executing:
      return "executing";
    case SubmissionState::Graded:
      return "graded";
    case SubmissionState::Failed:
      return "failed";
  }
  return "?";
}

SubmissionState parse_submission_state(std::string_view s) {
  for (auto st : {SubmissionState::Pending, SubmissionState::Claimed,
                  SubmissionState::Executing, SubmissionState::Graded,
                  SubmissionState::Failed}) {
    if (to_string(st) == s) return st;
  }
  throw InvalidArgument("unknown submission state: " + std::string(s));
}

std::string_view event_name(const LifecycleEvent& e) {
  struct Namer {
    std::string_view operator()(const event::ClaimFor&) const { return "claim"; }
    std::string_view operator()(const event::StartExecution&) const {
      return "start_execution";
    }
    std::string_view operator()(const event::Complete&) const {
      return "complete";
    }
    std::string_view operator()(const event::Fail&) const { return "fail"; }
    std::string_view operator()(const event::LeaseExpired&) const {
      return "lease_expired";
    }
  };
  return std::visit(Namer{}, e);
}

IllegalTransition::IllegalTransition(SubmissionState from,
                                     std::string_view event)
    : std::logic_error("illegal transition: " + std::string(event) + " in " +
                       std::string(to_string(from))) {}

namespace {

void require_holder(const Submission& s, const std::string& testbed) {
  if (!s.claim || s.claim->testbed != testbed) {
    throw StaleClaim("testbed " + testbed + " does not hold the claim on " +
                     s.id);
  }
}

}  // namespace

Submission transition(Submission s, const LifecycleEvent& e) {
  const auto illegal = [&] { return IllegalTransition(s.state, event_name(e)); };
  using SS = SubmissionState;

  if (const auto* c = std::get_if<event::ClaimFor>(&e)) {
    if (s.state != SS::Pending) throw illegal();
    s.state = SS::Claimed;
    s.claim = Claim{c->testbed, c->lease_expiry};
  } else if (const auto* st = std::get_if<event::StartExecution>(&e)) {
    if (s.state != SS::Claimed) throw illegal();
    require_holder(s, st->testbed);
    s.state = SS::Executing;
  } else if (const auto* done = std::get_if<event::Complete>(&e)) {
    if (s.state != SS::Executing) throw illegal();
    require_holder(s, done->testbed);
    s.state = SS::Graded;
    s.claim.reset();
    s.result = done->report;
  } else if (const auto* f = std::get_if<event::Fail>(&e)) {
    if (s.state != SS::Executing) throw illegal();
    require_holder(s, f->testbed);
    s.state = SS::Failed;
    s.claim.reset();
    s.failure = f->reason;
  } else {
    if (s.state != SS::Claimed && s.state != SS::Executing) throw illegal();
    s.state = SS::Pending;
    s.claim.reset();
  }
  return s;
}

// ---------------------------------------------------------------------------

EntryAccess entry_access(Role viewer, Visibility v, bool after_deadline) {
  if (viewer == Role::Instructor || after_deadline) return {true, true, true};
  switch (v) {
    case Visibility::Public:
      return {true, true, true};
    case Visibility::SemiPublic:
      return {true, true, false};
    case Visibility::Hidden:
      return {false, false, false};
  }
  return {};
}

FilteredReport visible_view(const GradeReport& report,
                            std::span<const TestCase> test_cases, Role viewer,
                            Instant now, Instant deadline) {
  const bool after_deadline = now >= deadline;
  FilteredReport out;
  out.compile = report.compile;

  double num = 0.0;
  double den = 0.0;
  for (const auto& entry : report.entries) {
    const auto tc = std::find_if(
        test_cases.begin(), test_cases.end(),
        [&](const TestCase& t) { return t.id == entry.test_case_id; });
    if (tc == test_cases.end()) {
      throw InvalidArgument("report references unknown test case " +
                            entry.test_case_id);
    }
    const EntryAccess access = entry_access(viewer, tc->visibility, after_deadline);
    if (!access.listed) continue;

    FilteredEntry f;
    f.test_case_id = entry.test_case_id;
    f.visibility = tc->visibility;
    f.grading_error = entry.grader_error.has_value();
    const bool instructor = viewer == Role::Instructor;

    if (f.grading_error && !instructor) {
      // A grader fault is not the student's score.
      if (access.details) f.feedback = std::string(kGraderFaultNotice);
    } else {
      if (access.score) f.score = entry.score;
      if (access.details) {
        f.session_scores = entry.session_scores;
        f.feedback = entry.feedback;
        f.artifacts = entry.artifacts;
      }
      if (f.score) {
        num += tc->weight * entry.score;
        den += tc->weight;
      }
    }
    if (instructor) f.grader_error_detail = entry.grader_error;
    out.entries.push_back(std::move(f));
  }
  if (viewer == Role::Instructor) {
    out.total = report.total;
  } else {
    out.total = den > 0.0 ? std::clamp(num / den, 0.0, 100.0) : 0.0;
  }
  return out;
}

}  // namespace embgrader
