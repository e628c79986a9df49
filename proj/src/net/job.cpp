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
#include "embgrader/job.hpp"

#include "embgrader/grading.hpp"
#include "embgrader/json_io.hpp"

namespace embgrader::job {

using nlohmann::json;

GradingJob make_job(const Submission& s, const std::string& dut_profile,
                    const std::vector<TestCase>& test_cases) {
  GradingJob g;
  g.submission_id = s.id;
  g.dut_profile = dut_profile;
  g.source = s.source;
  for (const auto& tc : test_cases) g.test_cases.push_back({tc.id, tc.sessions, tc.capture});
  return g;
}

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Running:
      return "running";
    case JobState::Done:
      return "done";
    case JobState::Failed:
      return "failed";
  }
  return "?";
}

JobState parse_job_state(std::string_view s) {
  if (s == "running") return JobState::Running;
  if (s == "done") return JobState::Done;
  if (s == "failed") return JobState::Failed;
  throw InvalidArgument("unknown job state: " + std::string(s));
}

void to_json(json& j, const JobTestCase& t) {
  j = json{{"id", t.id}, {"sessions", t.sessions}, {"capture", t.capture}};
}

void from_json(const json& j, JobTestCase& t) {
  t.id = j.at("id").get<std::string>();
  t.sessions = j.at("sessions").get<std::vector<Session>>();
  t.capture = j.at("capture").get<CaptureConfig>();
}

void to_json(json& j, const GradingJob& g) {
  j = json{{"job_id", g.job_id},
           {"submission_id", g.submission_id},
           {"dut_profile", g.dut_profile},
           {"source", g.source},
           {"test_cases", g.test_cases}};
}

void from_json(const json& j, GradingJob& g) {
  g.job_id = j.value("job_id", std::string());
  g.submission_id = j.at("submission_id").get<std::string>();
  g.dut_profile = j.at("dut_profile").get<std::string>();
  g.source = j.at("source").get<std::string>();
  g.test_cases = j.at("test_cases").get<std::vector<JobTestCase>>();
}

void to_json(json& j, const TestCaseArtifacts& a) {
  j = json{{"id", a.test_case_id},
           {"files",
            {{std::string(grading::kScheduleFile), a.schedule_csv},
             {std::string(grading::kCaptureFile), a.capture_rle},
             {std::string(grading::kPrintLogFile), a.print_log}}}};
}

void from_json(const json& j, TestCaseArtifacts& a) {
  a.test_case_id = j.at("id").get<std::string>();
  const auto& f = j.at("files");
  a.schedule_csv = f.at(std::string(grading::kScheduleFile)).get<std::string>();
  a.capture_rle = f.at(std::string(grading::kCaptureFile)).get<std::string>();
  a.print_log = f.at(std::string(grading::kPrintLogFile)).get<std::string>();
}

void to_json(json& j, const JobArtifacts& a) {
  j = json{{"compile", a.compile}, {"test_cases", a.test_cases}};
}

void from_json(const json& j, JobArtifacts& a) {
  a.compile = j.at("compile").get<CompileStatus>();
  a.test_cases = j.at("test_cases").get<std::vector<TestCaseArtifacts>>();
}

}  // namespace embgrader::job
