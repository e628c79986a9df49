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

// Grading scripts. A grading script turns one test case's artifacts
// (schedule.csv, capture.rle, print.log) into a score and feedback.
//
// "builtin:pwm" runs in process. Anything else is a path to an executable
// invoked as `script <artifact_dir>` with the artifact dir as working
// directory; it must write result.json there:
//
//   {"score": <0..100>, "feedback": "<text>", "sessions": [<0..1>, ...]}
//
// and exit 0. External scripts run under Landlock (when the kernel has it)
// with write access only to the artifact dir and read access only to the
// artifact dir, the script itself and the system directories an interpreter
// needs.

#pragma once

#include <chrono>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "embgrader/analysis.hpp"
#include "embgrader/domain.hpp"
#include "embgrader/engine.hpp"

namespace embgrader::grading {

inline constexpr std::string_view kScheduleFile = "schedule.csv";
inline constexpr std::string_view kCaptureFile = "capture.rle";
inline constexpr std::string_view kPrintLogFile = "print.log";
inline constexpr std::string_view kResultFile = "result.json";

struct GradingInvocation {
  std::string script{kBuiltinPwmGrader};
  std::filesystem::path artifact_dir;
  std::chrono::milliseconds timeout{30'000};
  std::size_t max_output_bytes = 64 * 1024;
};

struct GradingOutcome {
  double score = 0.0;  // 0..100
  std::string feedback;
  std::vector<double> sessions;

  bool operator==(const GradingOutcome&) const = default;
};

// Faults of the grader, not of the student.
class GraderFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScriptTimeout : public GraderFault {
 public:
  using GraderFault::GraderFault;
};

class ScriptMalformedOutput : public GraderFault {
 public:
  using GraderFault::GraderFault;
};

class ScriptCrashed : public GraderFault {
 public:
  ScriptCrashed(int exit_code, const std::string& detail);
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

// Writes the three artifact files, replacing any previous content.
void write_artifacts(const std::filesystem::path& dir, std::string_view schedule_csv,
                     std::string_view capture_rle, std::string_view print_log);

GradingOutcome run_grading(const GradingInvocation& inv);

// The builtin PWM grader on already-parsed artifacts.
GradingOutcome grade_pwm(std::span<const Session> schedule, const engine::SignalCapture& capture,
                         const analysis::AnalysisConfig& cfg = {});

// True when external scripts can be filesystem-confined on this kernel.
bool confinement_available();

}  // namespace embgrader::grading
