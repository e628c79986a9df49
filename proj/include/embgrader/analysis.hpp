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

// PWM measurement, per-session scoring and hardware/software PWM
// classification over sampled captures.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "embgrader/domain.hpp"
#include "embgrader/engine.hpp"

namespace embgrader::analysis {

struct AnalysisConfig {
  // Leading part of each session ignored as reaction time, in expected
  // periods.
  double settle_periods = 2.0;
};

struct SessionMeasurement {
  std::size_t index = 0;
  std::optional<double> period_us;  // present iff cycles >= 2
  double duty = 0.0;                // mean per-cycle duty; high fraction if no cycles
  std::size_t cycles = 0;
  bool settled = false;
  double high_fraction = 0.0;  // share of post-settle samples that are high
  std::vector<double> cycle_periods_us;
};

struct PwmMeasurement {
  std::vector<SessionMeasurement> sessions;
};

// Throws MalformedCapture if the capture does not decode.
PwmMeasurement measure_pwm(const engine::SignalCapture& capture,
                           std::span<const Session> schedule, const AnalysisConfig& cfg = {});

struct ScoreTolerances {
  double sample_interval_us = 200.0;
  double deadband_samples = 1.0;  // quantization allowance, in samples
};

// max(0, 1 - max(0, e_p - q_p) - max(0, e_d - q_d)); sessions commanding
// duty 0 or 1 score the fraction of samples at the commanded level.
double score_session(const SessionMeasurement& measured, const Session& expected,
                     const ScoreTolerances& tol);

enum class PwmClass { HardwarePwm, SoftwarePwm, Indeterminate };

std::string_view to_string(PwmClass c);

struct JitterThresholds {
  double max_stddev_samples = 1.0;
  double max_deviation_samples = 2.0;
  std::size_t min_cycles = 10;
  uint32_t min_rate_hz = 100'000;
};

struct JitterVerdict {
  PwmClass cls = PwmClass::Indeterminate;
  double max_deviation_us = 0.0;  // largest |period - median period|
  double stddev_us = 0.0;
  std::vector<double> periods_us;
};

class InsufficientResolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

JitterVerdict classify_jitter(const engine::SignalCapture& capture,
                              const JitterThresholds& thresholds = {});

}  // namespace embgrader::analysis
