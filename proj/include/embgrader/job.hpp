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
// Wire types exchanged between the scheduler and a testbed coordinator.

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "embgrader/domain.hpp"

namespace embgrader::job {

struct JobTestCase {
  std::string id;
  std::vector<Session> sessions;
  CaptureConfig capture;
};

struct GradingJob {
  std::string job_id;  // assigned by the coordinator when empty
  std::string submission_id;
  std::string dut_profile;
  std::string source;
  std::vector<JobTestCase> test_cases;
};

GradingJob make_job(const Submission& s, const std::string& dut_profile,
                    const std::vector<TestCase>& test_cases);

struct TestCaseArtifacts {
  std::string test_case_id;
  std::string schedule_csv;
  std::string capture_rle;
  std::string print_log;
};

struct JobArtifacts {
  CompileStatus compile;
  std::vector<TestCaseArtifacts> test_cases;
};

enum class JobState { Running, Done, Failed };

std::string_view to_string(JobState s);
JobState parse_job_state(std::string_view s);

void to_json(nlohmann::json& j, const JobTestCase& t);
void from_json(const nlohmann::json& j, JobTestCase& t);
void to_json(nlohmann::json& j, const GradingJob& g);
void from_json(const nlohmann::json& j, GradingJob& g);
void to_json(nlohmann::json& j, const TestCaseArtifacts& a);
void from_json(const nlohmann::json& j, TestCaseArtifacts& a);
void to_json(nlohmann::json& j, const JobArtifacts& a);
void from_json(const nlohmann::json& j, JobArtifacts& a);

}  // namespace embgrader::job
