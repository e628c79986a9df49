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
#include <omp.h>

#include <random>

#include "embgrader/engine.hpp"
#include "embgrader/fixtures.hpp"
#include "embgrader/kernels.hpp"

using namespace embgrader;
using namespace embgrader::engine;

namespace {

const dut::Profile& v1() { return dut::profile("dut-v1"); }

dut::Program prog(std::string_view name) { return dut::assemble(fixtures::program(name)); }

// Straightforward run-length encoding, independent of the kernels.
std::vector<Run> naive_rle(const std::vector<uint8_t>& v) {
  std::vector<Run> out;
  for (uint8_t x : v) {
    if (out.empty() || out.back().level != x) {
      out.push_back({x, 1});
    } else {
      ++out.back().length;
    }
  }
  return out;
}

std::vector<uint8_t> random_levels(std::mt19937_64& rng, std::size_t n, double flip) {
  std::bernoulli_distribution b(flip);
  std::vector<uint8_t> v(n);
  uint8_t cur = static_cast<uint8_t>(rng() & 1);
  for (auto& x : v) {
    if (b(rng)) cur ^= 1;
    x = cur;
  }
  return v;
}

}  // namespace

TEST_CASE("capture: blank firmware is one low run") {
  const std::vector<Session> s{{0, 1000, 0.5}};
  const auto r = capture(dut::blank_program(), s, {5000, 100000, "P0"}, v1());
  CHECK(r.capture.runs == std::vector<Run>{{0, 500}});
  CHECK(r.capture.transitions() == 0);
  CHECK(r.print_log.empty());
}

TEST_CASE("capture: reactive hardware PWM at 5 kHz") {
  const std::vector<Session> s{{0, 4000, 0.25}};
  const auto r = capture(prog("pwm_hw_reactive"), s, {5000, 100000, "P0"}, v1());
  // RDPORT, RDPORT, BNE, MOV, MOV, PWMHW at tick 5: the wave starts at tick 6.
  std::vector<uint8_t> want(500);
  for (int k = 0; k < 500; ++k) {
    const int t = 200 * k;
    want[k] = t >= 6 && (t - 6) % 4000 < 1000;
  }
  CHECK(r.capture.runs == naive_rle(want));
  REQUIRE(r.capture.runs.size() > 4);
  CHECK(r.capture.runs[1] == Run{1, 5});
  CHECK(r.capture.runs[2] == Run{0, 15});
  CHECK(r.capture.runs[3] == Run{1, 5});
}

TEST_CASE("capture: 1 MHz sampling reproduces the edges exactly") {
  const std::vector<Session> s{{0, 4000, 0.25}};
  const auto r = capture(prog("pwm_hw_reactive"), s, {1'000'000, 10000, "P0"}, v1());
  const std::vector<Run> want{{0, 6}, {1, 1000}, {0, 3000}, {1, 1000}, {0, 3000}, {1, 1000}, {0, 994}};
  CHECK(r.capture.runs == want);
}

TEST_CASE("capture: missing pin is a config mismatch") {
  const std::vector<Session> s{{0, 1000, 0.5}};
  CHECK_THROWS_AS(capture(dut::blank_program(), s, {5000, 1000, "P5"}, v1()), ConfigMismatch);
  CHECK_NOTHROW(capture(dut::blank_program(), s, {5000, 1000, "P5"}, dut::profile("dut-v2")));
}

TEST_CASE("capture: sessions drive the input ports") {
  const std::vector<Session> s{{0, 1000, 0.25}, {5000, 3000, 0.605}};
  const auto ports = port_schedule(s);
  CHECK(ports == std::vector<dut::PortSample>{{0, 1000, 25}, {5000, 3000, 61}});
  CHECK_THROWS(port_schedule(std::vector<Session>{{0, 70000, 0.5}}));
}

TEST_CASE("capture: point-sampled 1 MHz equals a direct 5 kHz capture") {
  const std::vector<Session> s{{0, 1000, 0.25}, {40000, 3000, 0.6}};
  for (const char* name : {"pwm_sw_loop", "pwm_hw_reactive", "stuck_high"}) {
    CAPTURE(name);
    const auto hi = decode(capture(prog(name), s, {1'000'000, 80000, "P0"}, v1()).capture);
    const auto lo = decode(capture(prog(name), s, {5000, 80000, "P0"}, v1()).capture);
    REQUIRE(lo.size() * 200 == hi.size());
    std::vector<uint8_t> down;
    for (std::size_t k = 0; k < hi.size(); k += 200) down.push_back(hi[k]);
    CHECK(down == lo);
  }
}

TEST_CASE("rle: examples") {
  const std::vector<uint8_t> x{0, 0, 0, 1, 1};
  CHECK(encode_rle(x) == std::vector<Run>{{0, 3}, {1, 2}});
  CHECK_THROWS_AS(decode_rle(std::vector<Run>{{0, 3}, {0, 2}}), MalformedCapture);
  CHECK_THROWS_AS(decode_rle(std::vector<Run>{{0, 3}, {1, 0}}), MalformedCapture);
  CHECK_THROWS_AS(decode_rle(std::vector<Run>{{2, 3}}), MalformedCapture);
}

TEST_CASE("rle: round trip on random sequences") {
  std::mt19937_64 rng(2026);
  for (int i = 0; i < 50; ++i) {
    const auto v = random_levels(rng, 100'000, i % 2 ? 0.01 : 0.5);
    const auto runs = encode_rle(v);
    CHECK(runs == naive_rle(v));
    CHECK(decode_rle(runs) == v);
  }
}

TEST_CASE("kernels: parallel matches serial") {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  std::mt19937_64 rng(99);
  for (std::size_t n : {std::size_t{1}, std::size_t{1000}, std::size_t{1} << 14,
                        (std::size_t{1} << 14) + 7, std::size_t{300'001}}) {
    CAPTURE(n);
    for (double flip : {0.0, 1e-4, 0.3, 1.0}) {
      const auto v = random_levels(rng, n, flip);
      const auto runs = kernels::serial::encode_rle(v);
      CHECK(kernels::parallel::encode_rle(v) == runs);
      CHECK(kernels::parallel::decode_rle(runs) == kernels::serial::decode_rle(runs));
    }
    std::vector<int64_t> toggles;
    int64_t t = 0;
    std::uniform_int_distribution<int64_t> gap(1, 3000);
    while (t < static_cast<int64_t>(n) * 7) toggles.push_back(t += gap(rng));
    for (uint64_t rate : {5000u, 333'333u, 1'000'000u}) {
      const kernels::SampleGrid g{n, 1'000'000, rate};
      CHECK(kernels::parallel::sample_levels(toggles, g) == kernels::serial::sample_levels(toggles, g));
    }
  }
  omp_set_num_threads(saved);
}

TEST_CASE("sampling grid and count") {
  CHECK(sample_count(5000, 100000) == 500);
  CHECK(sample_count(5000, 100199) == 500);
  CHECK(sample_count(3, 1'000'000) == 3);
  const kernels::SampleGrid g{10, 1'000'000, 3};
  CHECK(g.tick(1) == 333333);
  CHECK(g.tick(2) == 666666);
  CHECK(kernels::SampleGrid{10, 2'000'000, 5000}.tick(3) == 1200);
}

TEST_CASE("capture file format") {
  SignalCapture c;
  c.rate_hz = 5000;
  c.duration_us = 1000;
  c.runs = {{0, 2}, {1, 3}};
  const auto text = write_capture_file(c);
  CHECK(text == "5000,1000,P0,dut-v1\n0,2\n1,3\n");
  CHECK(parse_capture_file(text) == c);
  CHECK_THROWS_AS(parse_capture_file("5000,1000,P0,dut-v1\n0,2\n1,2\n"), MalformedCapture);
  CHECK_THROWS_AS(parse_capture_file("5000,1000,P0,dut-v1\n0,2\n0,3\n"), MalformedCapture);
  CHECK_THROWS_AS(parse_capture_file("5000,1000,P0\n0,5\n"), MalformedCapture);
  CHECK_THROWS_AS(parse_capture_file(""), MalformedCapture);
  c.runs = {{0, 3}, {1, 3}};
  CHECK_THROWS_AS(decode(c), MalformedCapture);
}

TEST_CASE("schedule file format") {
  const std::vector<Session> s{{0, 4000, 0.25}, {100000, 2000, 0.5}};
  const auto text = write_schedule_csv(s);
  CHECK(text == "start_us,period_us,duty_pct\n0,4000,25\n100000,2000,50\n");
  CHECK(parse_schedule_csv(text) == s);
  CHECK_THROWS(parse_schedule_csv("start,period,duty\n"));
}

TEST_CASE("compact format is bounded by the transition count") {
  const std::vector<Session> s{{0, 1000, 0.25}, {50000, 200, 0.5}};
  const auto toggler = dut::assemble("loop: SET P0\nCLR P0\nJMP loop");
  std::vector<dut::Program> programs{toggler};
  for (const auto& name : fixtures::program_names()) {
    if (name != "compile_error") programs.push_back(prog(name));
  }
  for (const auto& p : programs) {
    for (uint32_t rate : {5000u, 100'000u, 1'000'000u}) {
      const auto c = capture(p, s, {rate, 100000, "P0"}, v1()).capture;
      const auto bytes = to_compact(c.runs);
      CHECK(bytes.size() <= 2 + 6 * (c.transitions() + 1));
      CHECK(from_compact(bytes) == c.runs);
    }
  }
  CHECK_THROWS_AS(from_compact(std::string("\x02\x00", 2)), MalformedCapture);
  CHECK_THROWS_AS(from_compact(std::string("\x01\x00\x01", 3)), MalformedCapture);
}
