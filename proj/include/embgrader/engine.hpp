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

// Simulated hardware engine: drives a test case's sessions into the DUT
// input ports, samples one output pin at a fixed rate for a fixed duration
// and run-length encodes the result.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "embgrader/domain.hpp"
#include "embgrader/dut.hpp"
#include "embgrader/kernels.hpp"

namespace embgrader::engine {

class ConfigMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EngineFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// floor(duration_us * rate_hz / 1e6)
uint64_t sample_count(uint32_t rate_hz, int64_t duration_us);

struct SignalCapture {
  uint32_t rate_hz = 5000;
  int64_t duration_us = 0;
  std::string pin = "P0";
  std::string profile = "dut-v1";
  std::vector<Run> runs;

  double sample_interval_us() const { return 1e6 / static_cast<double>(rate_hz); }
  uint64_t total_samples() const;
  std::size_t transitions() const { return runs.empty() ? 0 : runs.size() - 1; }

  bool operator==(const SignalCapture&) const = default;
};

std::vector<Run> encode_rle(std::span<const uint8_t> levels);
std::vector<uint8_t> decode_rle(std::span<const Run> runs);

// Decodes and checks that the run lengths add up to the header's sample
// count. Throws MalformedCapture otherwise.
std::vector<uint8_t> decode(const SignalCapture& c);

// At each session start: IN0 <- period in us, IN1 <- round(duty * 100).
std::vector<dut::PortSample> port_schedule(std::span<const Session> sessions);

struct CaptureResult {
  SignalCapture capture;
  std::string print_log;
};

// Samples an existing trace of `pin` on the capture grid.
SignalCapture sample_trace(const dut::Trace& trace, const CaptureConfig& cfg,
                           const dut::Profile& profile);

// Resets a private DUT, runs `program` against the sessions and captures
// cfg.pin. Throws ConfigMismatch if the pin does not exist on the profile.
// Runs whatever firmware `machine` holds against the schedule and samples
// the observed pin.
CaptureResult capture_on(dut::Machine& machine, std::span<const Session> sessions,
                         const CaptureConfig& cfg);

// capture_on with a fresh machine: reset, `program` loaded.
CaptureResult capture(const dut::Program& program, std::span<const Session> sessions,
                      const CaptureConfig& cfg, const dut::Profile& profile);

// Text capture file:
//   line 1:  <rate_hz>,<duration_us>,<pin>,<profile>
//   then:    <level>,<run_length>   (level in {0,1})
std::string write_capture_file(const SignalCapture& c);
SignalCapture parse_capture_file(std::string_view text);

// Session schedule CSV with header "start_us,period_us,duty_pct".
std::string write_schedule_csv(std::span<const Session> sessions);
std::vector<Session> parse_schedule_csv(std::string_view text);

// Compact binary run payload: [version=1][first level] then each run length
// as a 48-bit little-endian integer. Size is 2 + 6 * runs.
std::string to_compact(std::span<const Run> runs);
std::vector<Run> from_compact(std::string_view bytes);

}  // namespace embgrader::engine
