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

#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace embgrader {

std::string sha256_hex(std::string_view data);

// Hex string of n cryptographically random bytes.
std::string random_hex(std::size_t n);

// PBKDF2-HMAC-SHA256, hex encoded.
std::string pbkdf2_hex(std::string_view password, std::string_view salt_hex,
                       int iterations);

// Length-independent comparison for secrets.
bool constant_time_equal(std::string_view a, std::string_view b);

}  // namespace embgrader
