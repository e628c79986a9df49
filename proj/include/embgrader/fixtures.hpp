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

// Reference programs and test cases from fixtures/, compiled in.

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "embgrader/domain.hpp"

namespace embgrader::fixtures {

namespace data {
const std::vector<std::pair<std::string_view, std::string_view>>& programs();
std::string_view pwm_assignment_json();
std::string_view hires_test_case_json();
}  // namespace data

// Source text of fixtures/programs/<name>.asm; throws on unknown names.
std::string_view program(std::string_view name);
std::vector<std::string> program_names();

struct AssignmentFixture {
  std::string statement;
  std::string dut_profile;
  std::vector<TestCase> test_cases;
};

// Three public, one semi-public and two hidden test cases at 5 kHz.
AssignmentFixture pwm_assignment();

// One public test case sampled at 1 MHz.
TestCase hires_test_case();

}  // namespace embgrader::fixtures
