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

// Virtual device under test: a small deterministic microcontroller with
// eight 16-bit registers, two input ports, a handful of GPIO pins and one
// hardware PWM peripheral.
//
// The machine is a black box. Callers load a program, provide a port
// schedule, and get back pin transitions and UART bytes; nothing else.
//
// Timing model (1 tick = one clock cycle; 1 us on dut-v1):
//   * every instruction costs 1 tick, except WAIT (max(1, n) ticks) and
//     PRINT (one UART slot per emitted byte, 10 us per byte).
//   * SET/CLR drive a GPIO through an output stage with a small,
//     deterministic per-write latency in [0, gpio_jitter_ticks]; writes on
//     one pin keep their order.
//   * PWMHW hands the pin to the peripheral, which produces an exact square
//     wave starting high on the tick after the instruction.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace embgrader::dut {

inline constexpr std::size_t kMaxSourceBytes = 64 * 1024;
inline constexpr int kRegisterCount = 8;

enum class Opcode : uint8_t {
  Ldi,
  Mov,
  Add,
  Sub,
  Mul,
  Div,
  Rdport,
  Set,
  Clr,
  Waiti,
  Wait,
  Jmp,
  Beq,
  Bne,
  Blt,
  Pwmhw,
  Print,
  Nop,
  Halt,
};

std::string_view mnemonic(Opcode op);

struct Instruction {
  Opcode op = Opcode::Nop;
  std::array<uint16_t, 3> args{};  // registers, pins, ports, immediates, targets
  int line = 0;
};

struct Program {
  std::vector<Instruction> code;
  std::map<std::string, std::size_t> labels;
  std::string source_hash;  // hex SHA-256 of the source text
};

class CompileError : public std::runtime_error {
 public:
  CompileError(int line, const std::string& message);
  int line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  int line_;
  std::string message_;
};

Program assemble(std::string_view source);

// The blank firmware: no instructions, halts immediately.
Program blank_program();

struct Profile {
  std::string id;
  uint32_t clock_hz = 1'000'000;
  int pins = 4;
  uint32_t gpio_jitter_ticks = 0;
  uint32_t uart_byte_ticks = 10;  // 10 us per byte at 1 Mbps

  int64_t ticks_from_us(int64_t us) const {
    return us * static_cast<int64_t>(clock_hz / 1'000'000);
  }
};

// Known profiles: "dut-v1" (1 MHz, P0-P3) and "dut-v2" (2 MHz, P0-P5).
const Profile& profile(std::string_view id);
std::vector<std::string> profile_ids();

// Parses "P0".."P<n-1>" against the profile; returns the pin index.
int parse_pin(std::string_view name, const Profile& p);
std::string pin_name(int pin);

// Input port values taking effect at at_us (virtual microseconds).
struct PortSample {
  int64_t at_us = 0;
  uint16_t in0 = 0;
  uint16_t in1 = 0;

  bool operator==(const PortSample&) const = default;
};

struct PinEvent {
  int64_t tick = 0;
  uint8_t pin = 0;
  bool level = false;

  bool operator==(const PinEvent&) const = default;
};

struct Trace {
  std::vector<PinEvent> events;  // ordered by (tick, pin)
  int64_t duration_ticks = 0;
  std::string print_log;
  std::vector<int64_t> print_ticks;  // completion tick of each byte
  int64_t end_tick = 0;              // clock value when execution stopped
  bool halted = false;

  bool operator==(const Trace&) const = default;

  // Events of one pin, in tick order.
  std::vector<PinEvent> pin_events(int pin) const;
};

// Called once per executed instruction with its program index and cost.
using ExecutionObserver = std::function<void(std::size_t pc, int64_t cost)>;

class Machine {
 public:
  explicit Machine(const Profile& profile);

  const Profile& profile() const { return profile_; }

  // Registers, pins and peripheral back to zero; blank firmware loaded.
  void reset();
  void load(Program program);

  // Runs the loaded program from reset state for duration_us of virtual
  // time. Port samples must have strictly increasing times.
  Trace run(std::span<const PortSample> ports, int64_t duration_us,
            const ExecutionObserver& observer = {});

 private:
  Profile profile_;
  Program program_;
};

// Convenience: reset + load + run on a fresh machine.
Trace run(const Program& program, std::span<const PortSample> ports,
          int64_t duration_us, const Profile& p = profile("dut-v1"),
          const ExecutionObserver& observer = {});

// Port schedule CSV: header "tick_us,in0,in1".
std::vector<PortSample> parse_port_schedule_csv(std::string_view text);
std::string write_port_schedule_csv(std::span<const PortSample> ports);

}  // namespace embgrader::dut
