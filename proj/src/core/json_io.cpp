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

#include "embgrader/json_io.hpp"

namespace embgrader {

using nlohmann::json;

void to_json(json& j, const Session& s) {
  j = json{{"start_us", s.start_us}, {"period_us", s.period_us}, {"duty", s.duty}};
}

void from_json(const json& j, Session& s) {
  s.start_us = j.at("start_us").get<int64_t>();
  s.period_us = j.at("period_us").get<int64_t>();
  s.duty = j.at("duty").get<double>();
}

void to_json(json& j, const CaptureConfig& c) {
  j = json{{"sample_rate_hz", c.sample_rate_hz}, {"duration_us", c.duration_us}, {"pin", c.pin}};
}

void from_json(const json& j, CaptureConfig& c) {
  c.sample_rate_hz = j.value("sample_rate_hz", 5000u);
  c.duration_us = j.at("duration_us").get<int64_t>();
  c.pin = j.value("pin", std::string("P0"));
}

void to_json(json& j, const TestCase& t) {
  j = json{{"id", t.id},
           {"visibility", std::string(to_string(t.visibility))},
           {"sessions", t.sessions},
           {"capture", t.capture},
           {"grader", t.grader},
           {"weight", t.weight}};
}

void from_json(const json& j, TestCase& t) {
  t.id = j.at("id").get<std::string>();
  t.visibility = parse_visibility(j.value("visibility", std::string("public")));
  t.sessions = j.at("sessions").get<std::vector<Session>>();
  t.capture = j.at("capture").get<CaptureConfig>();
  t.grader = j.value("grader", std::string(kBuiltinPwmGrader));
  t.weight = j.value("weight", 1.0);
}

void to_json(json& j, const CompileStatus& c) {
  if (c.ok()) {
    j = json{{"status", "ok"}};
  } else {
    j = json{{"status", "compile_error"}, {"message", c.message}};
  }
}

void from_json(const json& j, CompileStatus& c) {
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") {
    c = CompileStatus{};
  } else if (status == "compile_error") {
    c = CompileStatus{CompileState::CompileError, j.value("message", std::string())};
  } else {
    throw InvalidArgument("unknown compile status " + status);
  }
}

void to_json(json& j, const ArtifactRefs& a) {
  j = json{{"schedule", a.schedule}, {"capture", a.capture}, {"print_log", a.print_log}};
}

void from_json(const json& j, ArtifactRefs& a) {
  a.schedule = j.at("schedule").get<std::string>();
  a.capture = j.at("capture").get<std::string>();
  a.print_log = j.at("print_log").get<std::string>();
}

void to_json(json& j, const TestCaseResult& r) {
  j = json{{"test_case_id", r.test_case_id},
           {"session_scores", r.session_scores},
           {"score", r.score},
           {"feedback", r.feedback},
           {"artifacts", r.artifacts}};
  if (r.grader_error) j["grader_error"] = *r.grader_error;
}

void from_json(const json& j, TestCaseResult& r) {
  r.test_case_id = j.at("test_case_id").get<std::string>();
  r.session_scores = j.at("session_scores").get<std::vector<double>>();
  r.score = j.at("score").get<double>();
  r.feedback = j.at("feedback").get<std::string>();
  r.artifacts = j.at("artifacts").get<ArtifactRefs>();
  if (j.contains("grader_error")) r.grader_error = j["grader_error"].get<std::string>();
}

void to_json(json& j, const GradeReport& r) {
  j = json{{"entries", r.entries}, {"total", r.total}, {"compile", r.compile}};
}

void from_json(const json& j, GradeReport& r) {
  r.entries = j.at("entries").get<std::vector<TestCaseResult>>();
  r.total = j.at("total").get<double>();
  r.compile = j.at("compile").get<CompileStatus>();
}

void to_json(json& j, const FilteredEntry& e) {
  j = json{{"test_case_id", e.test_case_id},
           {"visibility", std::string(to_string(e.visibility))}};
  if (e.score) j["score"] = *e.score;
  if (e.session_scores) j["session_scores"] = *e.session_scores;
  if (e.feedback) j["feedback"] = *e.feedback;
  if (e.artifacts) j["artifacts"] = *e.artifacts;
  if (e.grading_error) j["grading_error"] = true;
  if (e.grader_error_detail) j["grader_error"] = *e.grader_error_detail;
}

void to_json(json& j, const FilteredReport& r) {
  j = json{{"entries", r.entries}, {"total", r.total}, {"compile", r.compile}};
}

std::string canonical(const GradeReport& r) { return json(r).dump(); }

}  // namespace embgrader
