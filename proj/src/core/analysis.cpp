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

#include "embgrader/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace embgrader::analysis {

namespace {

// Index of the first sample whose instant k*1e6/rate is >= t_us.
uint64_t first_sample_at_or_after(double t_us, uint32_t rate_hz) {
  if (t_us <= 0) return 0;
  const long double k = static_cast<long double>(t_us) * rate_hz / 1e6L;
  auto idx = static_cast<uint64_t>(std::ceil(k - 1e-9L));
  return idx;
}

struct Cycles {
  std::vector<double> periods;  // in samples
  std::vector<double> duties;
};

// Rising-edge to rising-edge cycles fully inside [begin, end).
Cycles find_cycles(std::span<const uint8_t> s, uint64_t begin, uint64_t end) {
  std::vector<uint64_t> rises;
  for (uint64_t k = begin + 1; k < end; ++k) {
    if (s[k - 1] == 0 && s[k] == 1) rises.push_back(k);
  }
  Cycles out;
  for (std::size_t j = 0; j + 1 < rises.size(); ++j) {
    const uint64_t rise = rises[j];
    const uint64_t next = rises[j + 1];
    uint64_t fall = rise;
    while (fall < next && s[fall] == 1) ++fall;
    const auto len = static_cast<double>(next - rise);
    out.periods.push_back(len);
    out.duties.push_back(static_cast<double>(fall - rise) / len);
  }
  return out;
}

double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

PwmMeasurement measure_pwm(const engine::SignalCapture& capture,
                           std::span<const Session> schedule, const AnalysisConfig& cfg) {
  const auto samples = engine::decode(capture);
  const double dt = capture.sample_interval_us();
  const auto n = static_cast<uint64_t>(samples.size());

  PwmMeasurement out;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const Session& s = schedule[i];
    const double end_us = i + 1 < schedule.size() ? static_cast<double>(schedule[i + 1].start_us)
                                                  : static_cast<double>(capture.duration_us);
    const uint64_t slice_end = std::min(n, first_sample_at_or_after(end_us, capture.rate_hz));
    const double settle_us =
        static_cast<double>(s.start_us) + cfg.settle_periods * static_cast<double>(s.period_us);
    const uint64_t begin =
        std::min(slice_end, first_sample_at_or_after(settle_us, capture.rate_hz));

    SessionMeasurement m;
    m.index = i;
    uint64_t high = 0;
    for (uint64_t k = begin; k < slice_end; ++k) high += samples[k];
    m.high_fraction =
        slice_end > begin ? static_cast<double>(high) / static_cast<double>(slice_end - begin) : 0.0;

    const Cycles cyc = find_cycles(samples, begin, slice_end);
    m.cycles = cyc.periods.size();
    m.settled = m.cycles >= 2;
    for (double p : cyc.periods) m.cycle_periods_us.push_back(p * dt);
    if (m.cycles >= 2) m.period_us = mean(cyc.periods) * dt;
    m.duty = m.cycles >= 1 ? mean(cyc.duties) : m.high_fraction;
    out.sessions.push_back(std::move(m));
  }
  return out;
}

double score_session(const SessionMeasurement& measured, const Session& expected,
                     const ScoreTolerances& tol) {
  if (expected.duty == 0.0) return 1.0 - measured.high_fraction;
  if (expected.duty == 1.0) return measured.high_fraction;
  if (!measured.period_us) return 0.0;

  const double period = static_cast<double>(expected.period_us);
  const double quantum = tol.deadband_samples * tol.sample_interval_us / period;
  const double e_p = std::abs(*measured.period_us - period) / period;
  const double e_d = std::abs(measured.duty - expected.duty);
  const double score = 1.0 - std::max(0.0, e_p - quantum) - std::max(0.0, e_d - quantum);
  return std::clamp(score, 0.0, 1.0);
}

std::string_view to_string(PwmClass c) {
  switch (c) {
    case PwmClass::HardwarePwm:
      return "hardware_pwm";
    case PwmClass::SoftwarePwm:
      return "software_pwm";
    case PwmClass::Indeterminate:
      return "indeterminate";
  }
  return "?";
}

JitterVerdict classify_jitter(const engine::SignalCapture& capture,
                              const JitterThresholds& thresholds) {
  if (capture.rate_hz < thresholds.min_rate_hz) {
    throw InsufficientResolution("jitter classification needs >= " +
                                 std::to_string(thresholds.min_rate_hz) + " Hz sampling, got " +
                                 std::to_string(capture.rate_hz) + " Hz");
  }
  const auto samples = engine::decode(capture);
  const double dt = capture.sample_interval_us();
  const Cycles cyc = find_cycles(samples, 0, samples.size());

  JitterVerdict v;
  for (double p : cyc.periods) v.periods_us.push_back(p * dt);
  if (v.periods_us.size() < thresholds.min_cycles) return v;

  std::vector<double> sorted = v.periods_us;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median =
      sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  const double mu = mean(v.periods_us);
  double var = 0.0;
  for (double p : v.periods_us) {
    var += (p - mu) * (p - mu);
    v.max_deviation_us = std::max(v.max_deviation_us, std::abs(p - median));
  }
  v.stddev_us = std::sqrt(var / static_cast<double>(v.periods_us.size()));

  const bool steady = v.stddev_us <= thresholds.max_stddev_samples * dt + 1e-9 &&
                      v.max_deviation_us <= thresholds.max_deviation_samples * dt + 1e-9;
  v.cls = steady ? PwmClass::HardwarePwm : PwmClass::SoftwarePwm;
  return v;
}

}  // namespace embgrader::analysis
