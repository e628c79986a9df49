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

// Capture hot path. Each kernel has a straightforward serial version, kept
// as the reference, and an OpenMP version used in production. The two must
// agree bit for bit; tests/unit/kernels_test.cpp and bench/kernel_bench.cpp
// hold them to that.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace embgrader {

struct Run {
  uint8_t level = 0;  // 0 or 1
  uint64_t length = 0;

  bool operator==(const Run&) const = default;
};

class MalformedCapture : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace kernels {

// Sample k lands on tick floor(k * clock_hz / rate_hz).
struct SampleGrid {
  uint64_t count = 0;
  uint64_t clock_hz = 1'000'000;
  uint64_t rate_hz = 5'000;

  int64_t tick(uint64_t k) const {
    return static_cast<int64_t>((static_cast<unsigned __int128>(k) * clock_hz) / rate_hz);
  }
};

// Throws MalformedCapture unless runs alternate and every length is >= 1.
void check_runs(std::span<const Run> runs);

namespace serial {

// toggles: strictly increasing ticks at which a pin that starts low flips.
// Level at a sample is the level at or immediately before its tick.
std::vector<uint8_t> sample_levels(std::span<const int64_t> toggles, const SampleGrid& grid);
std::vector<Run> encode_rle(std::span<const uint8_t> levels);
std::vector<uint8_t> decode_rle(std::span<const Run> runs);

}  // namespace serial

namespace parallel {

std::vector<uint8_t> sample_levels(std::span<const int64_t> toggles, const SampleGrid& grid);
std::vector<Run> encode_rle(std::span<const uint8_t> levels);
std::vector<uint8_t> decode_rle(std::span<const Run> runs);

}  // namespace parallel

}  // namespace kernels
}  // namespace embgrader
