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

// nlohmann::json bindings for the domain types. Object keys serialize in
// sorted order, so dump() of equal values is byte-identical.

#pragma once

#include <json.hpp>

#include "embgrader/domain.hpp"
#include "embgrader/engine.hpp"

namespace embgrader {

void to_json(nlohmann::json& j, const Session& s);
void from_json(const nlohmann::json& j, Session& s);
void to_json(nlohmann::json& j, const CaptureConfig& c);
void from_json(const nlohmann::json& j, CaptureConfig& c);
void to_json(nlohmann::json& j, const TestCase& t);
void from_json(const nlohmann::json& j, TestCase& t);
void to_json(nlohmann::json& j, const CompileStatus& c);
void from_json(const nlohmann::json& j, CompileStatus& c);
void to_json(nlohmann::json& j, const ArtifactRefs& a);
void from_json(const nlohmann::json& j, ArtifactRefs& a);
void to_json(nlohmann::json& j, const TestCaseResult& r);
void from_json(const nlohmann::json& j, TestCaseResult& r);
void to_json(nlohmann::json& j, const GradeReport& r);
void from_json(const nlohmann::json& j, GradeReport& r);
void to_json(nlohmann::json& j, const FilteredEntry& e);
void to_json(nlohmann::json& j, const FilteredReport& r);

// Canonical text form used for persistence and byte-level comparison.
std::string canonical(const GradeReport& r);

}  // namespace embgrader
