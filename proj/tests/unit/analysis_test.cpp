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

#include <doctest.h>

#include <cmath>
#include <random>

#include "embgrader/analysis.hpp"
#include "embgrader/fixtures.hpp"

using namespace embgrader;
using namespace embgrader::analysis;

namespace {

// Capture of level(t) sampled at k*1e6/rate.
template <typename F>
engine::SignalCapture synthesize(uint32_t rate, int64_t duration_us, F level) {
  const uint64_t n = engine::sample_count(rate, duration_us);
  std::vector<uint8_t> v(n);
  for (uint64_t k = 0; k < n; ++k) v[k] = level(static_cast<double>(k) * 1e6 / rate) ? 1 : 0;
  engine::SignalCapture c;
  c.rate_hz = rate;
  c.duration_us = duration_us;
  c.runs = engine::encode_rle(v);
  return c;
}

auto square(double period, double duty, double phase = 0.0) {
  return [=](double t) {
    const double x = std::fmod(t + phase, period);
    return x < duty * period;
  };
}

engine::SignalCapture dut_capture(std::string_view program, std::vector<Session> s, uint32_t rate,
                                  int64_t duration) {
  return engine::capture(dut::assemble(fixtures::program(program)), s, {rate, duration, "P0"},
                         dut::profile("dut-v1"))
      .capture;
}

}  // namespace

TEST_CASE("measure_pwm: constructed square wave") {
  const std::vector<Session> s{{0, 4000, 0.25}};
  const auto c = synthesize(5000, 100000, square(4000, 0.25));
  const auto m = measure_pwm(c, s);
  REQUIRE(m.sessions.size() == 1);
  const auto& x = m.sessions[0];
  REQUIRE(x.period_us);
  CHECK(*x.period_us == 4000.0);
  CHECK(x.duty == 0.25);
  CHECK(x.settled);
  CHECK(x.cycles >= 20);
}

TEST_CASE("measure_pwm: all-low capture") {
  const std::vector<Session> s{{0, 4000, 0.25}, {50000, 1000, 0.5}};
  const auto c = synthesize(5000, 100000, [](double) { return false; });
  for (const auto& x : measure_pwm(c, s).sessions) {
    CHECK(x.cycles == 0);
    CHECK_FALSE(x.settled);
    CHECK_FALSE(x.period_us);
    CHECK(x.duty == 0.0);
    CHECK(x.high_fraction == 0.0);
  }
}

TEST_CASE("measure_pwm: sessions are sliced and settled independently") {
  const std::vector<Session> s{{0, 4000, 0.25}, {60000, 1000, 0.6}};
  // Second wave starts late; the settle window hides its first 2 ms.
  const auto c = synthesize(100'000, 120000, [](double t) {
    if (t < 60000) return square(4000, 0.25)(t);
    if (t < 61500) return false;
    return square(1000, 0.6)(t);
  });
  const auto m = measure_pwm(c, s);
  REQUIRE(m.sessions.size() == 2);
  CHECK(*m.sessions[0].period_us == doctest::Approx(4000));
  CHECK(m.sessions[0].duty == doctest::Approx(0.25));
  CHECK(*m.sessions[1].period_us == doctest::Approx(1000));
  CHECK(m.sessions[1].duty == doctest::Approx(0.6));
}

TEST_CASE("measure_pwm: software reference loop at 1 MHz") {
  const auto tc = fixtures::hires_test_case();
  const auto c = dut_capture("pwm_sw_loop", tc.sessions, 1'000'000, tc.capture.duration_us);
  const auto m = measure_pwm(c, tc.sessions);
  for (const auto& x : m.sessions) {
    REQUIRE(x.period_us);
    // 1000 us of waits plus eight single-tick instructions per iteration.
    CHECK(*x.period_us == doctest::Approx(1008).epsilon(1.0 / 1008));
    CHECK(x.duty == doctest::Approx(250.0 / 1008).epsilon(0.02));
  }
}

TEST_CASE("score_session: examples") {
  const ScoreTolerances hires{1.0, 1.0};
  SessionMeasurement m;
  m.period_us = 1007;
  m.duty = 0.2483;
  m.cycles = 50;
  // 1 - (0.007 - 0.001) - (0.0017 - 0.001)
  CHECK(score_session(m, {0, 1000, 0.25}, hires) == doctest::Approx(0.9933).epsilon(1e-9));

  m.period_us = 1000;
  m.duty = 0.25;
  CHECK(score_session(m, {0, 1000, 0.25}, hires) == 1.0);

  SessionMeasurement none;
  CHECK(score_session(none, {0, 1000, 0.25}, hires) == 0.0);

  SessionMeasurement way_off;
  way_off.period_us = 5000;
  way_off.duty = 0.9;
  CHECK(score_session(way_off, {0, 1000, 0.25}, hires) == 0.0);
}

TEST_CASE("score_session: constant levels use the level fraction") {
  SessionMeasurement m;
  m.high_fraction = 0.1;
  CHECK(score_session(m, {0, 1000, 0.0}, {}) == doctest::Approx(0.9));
  CHECK(score_session(m, {0, 1000, 1.0}, {}) == doctest::Approx(0.1));
}

TEST_CASE("score_session: quantization inside the deadband costs nothing") {
  const ScoreTolerances lores{200.0, 1.0};
  SessionMeasurement m;
  m.period_us = 1000 + 200;
  m.duty = 0.25 + 0.2;
  CHECK(score_session(m, {0, 1000, 0.25}, lores) == 1.0);
}

TEST_CASE("score_session: scale invariance") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double p = 100 + 5000 * u(rng);
    const double d = 0.05 + 0.9 * u(rng);
    SessionMeasurement m;
    m.period_us = p * (0.8 + 0.4 * u(rng));
    m.duty = std::clamp(d + 0.2 * (u(rng) - 0.5), 0.0, 1.0);
    const ScoreTolerances tol{1.0 + 10 * u(rng), 1.0};
    const Session e{0, static_cast<int64_t>(std::llround(p)), d};
    const Session ek{0, static_cast<int64_t>(std::llround(p)) * 3, d};
    SessionMeasurement m3 = m;
    m3.period_us = *m.period_us * 3;
    const ScoreTolerances tol3{tol.sample_interval_us * 3, 1.0};
    CHECK(score_session(m, e, tol) == doctest::Approx(score_session(m3, ek, tol3)).epsilon(1e-12));
  }
}

TEST_CASE("score_session: monotone in both errors") {
  const ScoreTolerances tol{5.0, 1.0};
  const Session e{0, 1000, 0.4};
  double prev = 2.0;
  for (double ep = 0.0; ep < 0.5; ep += 0.01) {
    SessionMeasurement m;
    m.period_us = 1000 * (1 + ep);
    m.duty = 0.4;
    const double s = score_session(m, e, tol);
    CHECK(s <= prev);
    prev = s;
  }
  prev = 2.0;
  for (double ed = 0.0; ed < 0.5; ed += 0.01) {
    SessionMeasurement m;
    m.period_us = 1000;
    m.duty = 0.4 - ed;
    const double s = score_session(m, e, tol);
    CHECK(s <= prev);
    prev = s;
  }
}

TEST_CASE("measure_pwm: inverted levels give complementary duty") {
  std::mt19937 rng(3);
  for (int i = 0; i < 30; ++i) {
    const int64_t period = 200 * (2 + static_cast<int>(rng() % 30));
    const double duty = (5 + static_cast<int>(rng() % 90)) / 100.0;
    const std::vector<Session> s{{0, period, duty}};
    const auto wave = square(static_cast<double>(period), duty);
    const auto a = measure_pwm(synthesize(100'000, 40 * period, wave), s).sessions[0];
    const auto b =
        measure_pwm(synthesize(100'000, 40 * period, [&](double t) { return !wave(t); }), s)
            .sessions[0];
    CHECK(b.duty == doctest::Approx(1.0 - a.duty).epsilon(1e-9));
  }
}

TEST_CASE("measure_pwm: recovers analytic parameters within one sample interval") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const uint32_t rates[] = {5000, 20'000, 100'000, 1'000'000};
  for (int i = 0; i < 100; ++i) {
    const uint32_t rate = rates[i % 4];
    const double dt = 1e6 / rate;
    const auto period = static_cast<int64_t>(std::llround(std::max(4 * dt, 100.0) + 5000 * u(rng)));
    const double duty = std::round(100 * (0.1 + 0.8 * u(rng))) / 100;
    const double phase = period * u(rng);
    const std::vector<Session> s{{0, period, duty}};
    const auto c = synthesize(rate, 30 * period, square(static_cast<double>(period), duty, phase));
    const auto m = measure_pwm(c, s).sessions[0];
    CAPTURE(rate);
    CAPTURE(period);
    CAPTURE(duty);
    REQUIRE(m.period_us);
    CHECK(std::abs(*m.period_us - period) <= dt);
    CHECK(std::abs(m.duty - duty) <= dt / period + 1e-12);
  }
}

TEST_CASE("classify_jitter: hardware versus software at 1 MHz") {
  const std::vector<Session> s{{0, 1000, 0.25}};
  const auto hw = classify_jitter(dut_capture("pwm_hw_reactive", s, 1'000'000, 100000));
  CHECK(hw.cls == PwmClass::HardwarePwm);
  CHECK(hw.max_deviation_us == 0.0);
  CHECK(hw.periods_us.size() >= 10);
  const auto sw = classify_jitter(dut_capture("pwm_sw_loop", s, 1'000'000, 100000));
  CHECK(sw.cls == PwmClass::SoftwarePwm);
  CHECK(sw.max_deviation_us >= 7.0);
}

TEST_CASE("classify_jitter: preconditions") {
  const std::vector<Session> s{{0, 1000, 0.25}};
  CHECK_THROWS_AS(classify_jitter(dut_capture("pwm_hw_reactive", s, 5000, 100000)),
                  InsufficientResolution);
  CHECK_THROWS_AS(classify_jitter(dut_capture("pwm_sw_loop", s, 99'999, 100000)),
                  InsufficientResolution);
  const auto few = classify_jitter(dut_capture("pwm_hw_reactive", s, 1'000'000, 8000));
  CHECK(few.cls == PwmClass::Indeterminate);
  const auto flat = classify_jitter(dut_capture("stuck_high", s, 1'000'000, 100000));
  CHECK(flat.cls == PwmClass::Indeterminate);
  CHECK(to_string(PwmClass::HardwarePwm) == "hardware_pwm");
}
