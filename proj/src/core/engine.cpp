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

#include "embgrader/engine.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace embgrader::engine {

uint64_t sample_count(uint32_t rate_hz, int64_t duration_us) {
  if (duration_us <= 0) return 0;
  return static_cast<uint64_t>(
      (static_cast<unsigned __int128>(duration_us) * rate_hz) / 1'000'000u);
}

uint64_t SignalCapture::total_samples() const {
  return std::accumulate(runs.begin(), runs.end(), uint64_t{0},
                         [](uint64_t acc, const Run& r) { return acc + r.length; });
}

std::vector<Run> encode_rle(std::span<const uint8_t> levels) {
  return kernels::parallel::encode_rle(levels);
}

std::vector<uint8_t> decode_rle(std::span<const Run> runs) {
  return kernels::parallel::decode_rle(runs);
}

std::vector<uint8_t> decode(const SignalCapture& c) {
  kernels::check_runs(c.runs);
  const uint64_t want = sample_count(c.rate_hz, c.duration_us);
  if (c.total_samples() != want) {
    throw MalformedCapture("run lengths sum to " + std::to_string(c.total_samples()) +
                           ", header implies " + std::to_string(want));
  }
  return decode_rle(c.runs);
}

std::vector<dut::PortSample> port_schedule(std::span<const Session> sessions) {
  std::vector<dut::PortSample> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) {
    if (s.period_us > 0xFFFF) {
      throw InvalidArgument("session period does not fit the 16-bit IN0 port");
    }
    const auto pct = static_cast<uint16_t>(std::lround(s.duty * 100.0));
    out.push_back({s.start_us, static_cast<uint16_t>(s.period_us), pct});
  }
  return out;
}

SignalCapture sample_trace(const dut::Trace& trace, const CaptureConfig& cfg,
                           const dut::Profile& profile) {
  const int pin = dut::parse_pin(cfg.pin, profile);
  std::vector<int64_t> toggles;
  for (const auto& e : trace.events) {
    if (e.pin == pin) toggles.push_back(e.tick);
  }
  kernels::SampleGrid grid{sample_count(cfg.sample_rate_hz, cfg.duration_us), profile.clock_hz,
                           cfg.sample_rate_hz};
  const auto levels = kernels::parallel::sample_levels(toggles, grid);

  SignalCapture c;
  c.rate_hz = cfg.sample_rate_hz;
  c.duration_us = cfg.duration_us;
  c.pin = dut::pin_name(pin);
  c.profile = profile.id;
  c.runs = encode_rle(levels);
  return c;
}

CaptureResult capture_on(dut::Machine& machine, std::span<const Session> sessions,
                         const CaptureConfig& cfg) {
  const dut::Profile& profile = machine.profile();
  validate(cfg);
  validate_schedule(sessions, cfg.duration_us);
  try {
    dut::parse_pin(cfg.pin, profile);
  } catch (const std::invalid_argument& e) {
    throw ConfigMismatch(e.what());
  }

  const auto ports = port_schedule(sessions);
  const dut::Trace trace = machine.run(ports, cfg.duration_us);

  CaptureResult result{sample_trace(trace, cfg, profile), trace.print_log};
  if (result.capture.total_samples() != sample_count(cfg.sample_rate_hz, cfg.duration_us)) {
    throw EngineFault("sampler produced the wrong number of samples");
  }
  return result;
}

CaptureResult capture(const dut::Program& program, std::span<const Session> sessions,
                      const CaptureConfig& cfg, const dut::Profile& profile) {
  dut::Machine machine(profile);
  machine.reset();
  machine.load(program);
  return capture_on(machine, sessions, cfg);
}

// ---------------------------------------------------------------------------

std::string write_capture_file(const SignalCapture& c) {
  std::string out = std::to_string(c.rate_hz) + "," + std::to_string(c.duration_us) + "," +
                    c.pin + "," + c.profile + "\n";
  for (const auto& r : c.runs) {
    out += std::to_string(static_cast<int>(r.level)) + "," + std::to_string(r.length) + "\n";
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

template <typename T>
T parse_number(const std::string& s, const char* what) {
  std::size_t used = 0;
  T v{};
  try {
    if constexpr (std::is_same_v<T, double>) {
      v = std::stod(s, &used);
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
      v = static_cast<T>(std::stoull(s, &used));
    } else {
      v = static_cast<T>(std::stoll(s, &used));
    }
  } catch (const std::exception&) {
    throw MalformedCapture(std::string("bad ") + what + ": '" + s + "'");
  }
  if (used != s.size()) throw MalformedCapture(std::string("bad ") + what + ": '" + s + "'");
  return v;
}

}  // namespace

SignalCapture parse_capture_file(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw MalformedCapture("empty capture file");
  const auto head = split_csv(line);
  if (head.size() != 4) throw MalformedCapture("capture header needs 4 fields");

  SignalCapture c;
  const auto rate = parse_number<uint64_t>(head[0], "rate");
  if (rate < 1 || rate > kMaxSampleRateHz) throw MalformedCapture("sample rate out of range");
  c.rate_hz = static_cast<uint32_t>(rate);
  c.duration_us = parse_number<int64_t>(head[1], "duration");
  c.pin = head[2];
  c.profile = head[3];

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw MalformedCapture("run line needs 2 fields: '" + line + "'");
    const auto level = parse_number<uint64_t>(f[0], "level");
    if (level > 1) throw MalformedCapture("level must be 0 or 1");
    c.runs.push_back({static_cast<uint8_t>(level), parse_number<uint64_t>(f[1], "run length")});
  }
  kernels::check_runs(c.runs);
  if (c.total_samples() != sample_count(c.rate_hz, c.duration_us)) {
    throw MalformedCapture("run lengths do not match header duration and rate");
  }
  return c;
}

std::string write_schedule_csv(std::span<const Session> sessions) {
  std::string out = "start_us,period_us,duty_pct\n";
  for (const auto& s : sessions) {
    char pct[32];
    const double v = s.duty * 100.0;
    if (std::abs(v - std::round(v)) < 1e-9) {
      std::snprintf(pct, sizeof pct, "%lld", static_cast<long long>(std::llround(v)));
    } else {
      std::snprintf(pct, sizeof pct, "%.10g", v);
    }
    out += std::to_string(s.start_us) + "," + std::to_string(s.period_us) + "," + pct + "\n";
  }
  return out;
}

std::vector<Session> parse_schedule_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "start_us,period_us,duty_pct") {
    throw InvalidArgument("schedule header must be 'start_us,period_us,duty_pct'");
  }
  std::vector<Session> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw InvalidArgument("schedule line needs 3 fields: '" + line + "'");
    try {
      Session s;
      s.start_us = parse_number<int64_t>(f[0], "start");
      s.period_us = parse_number<int64_t>(f[1], "period");
      s.duty = parse_number<double>(f[2], "duty") / 100.0;
      out.push_back(s);
    } catch (const MalformedCapture& e) {
      throw InvalidArgument(e.what());
    }
  }
  return out;
}

std::string to_compact(std::span<const Run> runs) {
  kernels::check_runs(runs);
  std::string out;
  out.reserve(2 + 6 * runs.size());
  out.push_back(1);
  out.push_back(static_cast<char>(runs.empty() ? 0 : runs.front().level));
  for (const auto& r : runs) {
    if (r.length >= (uint64_t{1} << 48)) throw MalformedCapture("run longer than 2^48");
    for (int b = 0; b < 6; ++b) out.push_back(static_cast<char>((r.length >> (8 * b)) & 0xff));
  }
  return out;
}

std::vector<Run> from_compact(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 1 || (bytes.size() - 2) % 6 != 0) {
    throw MalformedCapture("bad compact capture payload");
  }
  auto level = static_cast<uint8_t>(bytes[1]);
  if (level > 1) throw MalformedCapture("bad first level in compact payload");
  std::vector<Run> runs;
  for (std::size_t off = 2; off < bytes.size(); off += 6) {
    uint64_t len = 0;
    for (int b = 0; b < 6; ++b) {
      len |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[off + b])) << (8 * b);
    }
    runs.push_back({level, len});
    level ^= 1u;
  }
  kernels::check_runs(runs);
  return runs;
}

}  // namespace embgrader::engine
