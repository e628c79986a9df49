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

#include "embgrader/fixtures.hpp"

#include "embgrader/json_io.hpp"

namespace embgrader::fixtures {

std::string_view program(std::string_view name) {
  for (const auto& [n, body] : data::programs()) {
    if (n == name) return body;
  }
  throw std::invalid_argument("no fixture program named " + std::string(name));
}

std::vector<std::string> program_names() {
  std::vector<std::string> out;
  for (const auto& p : data::programs()) out.emplace_back(p.first);
  return out;
}

AssignmentFixture pwm_assignment() {
  const auto j = nlohmann::json::parse(data::pwm_assignment_json());
  AssignmentFixture a;
  a.statement = j.at("statement").get<std::string>();
  a.dut_profile = j.at("dut_profile").get<std::string>();
  a.test_cases = j.at("test_cases").get<std::vector<TestCase>>();
  return a;
}

TestCase hires_test_case() {
  return nlohmann::json::parse(data::hires_test_case_json()).get<TestCase>();
}

}  // namespace embgrader::fixtures
