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

#include "embgrader/dut.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <sstream>

#include "embgrader/digest.hpp"

namespace embgrader::dut {

namespace {

// Highest pin index the assembler accepts; pins beyond the profile's count
// are unconnected and writes to them are dropped.
constexpr int kMaxPinIndex = 15;

struct OpInfo {
  std::string_view name;
  Opcode op;
};

constexpr OpInfo kOps[] = {
    {"LDI", Opcode::Ldi},       {"MOV", Opcode::Mov},     {"ADD", Opcode::Add},
    {"SUB", Opcode::Sub},       {"MUL", Opcode::Mul},     {"DIV", Opcode::Div},
    {"RDPORT", Opcode::Rdport}, {"SET", Opcode::Set},     {"CLR", Opcode::Clr},
    {"WAITI", Opcode::Waiti},   {"WAIT", Opcode::Wait},   {"JMP", Opcode::Jmp},
    {"BEQ", Opcode::Beq},       {"BNE", Opcode::Bne},     {"BLT", Opcode::Blt},
    {"PWMHW", Opcode::Pwmhw},   {"PRINT", Opcode::Print}, {"NOP", Opcode::Nop},
    {"HALT", Opcode::Halt},
};

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

std::vector<std::string_view> split_operands(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ',' || std::isspace(static_cast<unsigned char>(s[i])))) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ',' && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

struct PendingLabel {
  std::size_t instruction;
  int slot;
  std::string name;
  int line;
};

class Assembler {
 public:
  Program run(std::string_view source) {
    if (source.size() > kMaxSourceBytes) {
      throw CompileError(0, "source exceeds 64 KiB");
    }
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
      std::size_t nl = source.find('\n', pos);
      if (nl == std::string_view::npos) nl = source.size();
      ++line_no;
      parse_line(source.substr(pos, nl - pos), line_no);
      pos = nl + 1;
    }
    for (const auto& p : pending_) {
      auto it = program_.labels.find(p.name);
      if (it == program_.labels.end()) {
        throw CompileError(p.line, "unresolved label '" + p.name + "'");
      }
      program_.code[p.instruction].args[p.slot] = static_cast<uint16_t>(it->second);
    }
    program_.source_hash = sha256_hex(source);
    return std::move(program_);
  }

 private:
  void parse_line(std::string_view raw, int line) {
    std::string_view text = raw;
    if (auto c = text.find(';'); c != std::string_view::npos) text = text.substr(0, c);
    text = trim(text);
    if (text.empty()) return;

    // leading "name:" label
    if (auto colon = text.find(':'); colon != std::string_view::npos) {
      const auto name = trim(text.substr(0, colon));
      if (!is_identifier(name)) throw CompileError(line, "bad label '" + std::string(name) + "'");
      if (!program_.labels.emplace(std::string(name), program_.code.size()).second) {
        throw CompileError(line, "duplicate label '" + std::string(name) + "'");
      }
      text = trim(text.substr(colon + 1));
      if (text.empty()) return;
    }

    std::size_t sp = 0;
    while (sp < text.size() && !std::isspace(static_cast<unsigned char>(text[sp]))) ++sp;
    const std::string mnem = upper(text.substr(0, sp));
    const auto ops = split_operands(text.substr(sp));

    const auto info = std::find_if(std::begin(kOps), std::end(kOps),
                                   [&](const OpInfo& o) { return o.name == mnem; });
    if (info == std::end(kOps)) throw CompileError(line, "unknown mnemonic '" + mnem + "'");

    Instruction ins;
    ins.op = info->op;
    ins.line = line;
    const auto expect = [&](std::size_t n) {
      if (ops.size() != n) {
        throw CompileError(line, mnem + " takes " + std::to_string(n) + " operand(s), got " +
                                     std::to_string(ops.size()));
      }
    };

    switch (ins.op) {
      case Opcode::Ldi:
        expect(2);
        ins.args[0] = reg(ops[0], line);
        ins.args[1] = imm(ops[1], line);
        break;
      case Opcode::Mov:
        expect(2);
        ins.args[0] = reg(ops[0], line);
        ins.args[1] = reg(ops[1], line);
        break;
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mul:
      case Opcode::Div:
        expect(3);
        for (int i = 0; i < 3; ++i) ins.args[i] = reg(ops[i], line);
        break;
      case Opcode::Rdport:
        expect(2);
        ins.args[0] = reg(ops[0], line);
        ins.args[1] = port(ops[1], line);
        break;
      case Opcode::Set:
      case Opcode::Clr:
        expect(1);
        ins.args[0] = pin(ops[0], line);
        break;
      case Opcode::Waiti:
        expect(1);
        ins.args[0] = imm(ops[0], line);
        break;
      case Opcode::Wait:
      case Opcode::Print:
        expect(1);
        ins.args[0] = reg(ops[0], line);
        break;
      case Opcode::Jmp:
        expect(1);
        label(ops[0], 0, line);
        break;
      case Opcode::Beq:
      case Opcode::Bne:
      case Opcode::Blt:
        expect(3);
        ins.args[0] = reg(ops[0], line);
        ins.args[1] = reg(ops[1], line);
        label(ops[2], 2, line);
        break;
      case Opcode::Pwmhw:
        expect(3);
        ins.args[0] = pin(ops[0], line);
        ins.args[1] = reg(ops[1], line);
        ins.args[2] = reg(ops[2], line);
        break;
      case Opcode::Nop:
      case Opcode::Halt:
        expect(0);
        break;
    }
    program_.code.push_back(ins);
  }

  static uint16_t reg(std::string_view s, int line) {
    if (s.size() == 2 && (s[0] == 'r' || s[0] == 'R') && s[1] >= '0' && s[1] < '0' + kRegisterCount) {
      return static_cast<uint16_t>(s[1] - '0');
    }
    throw CompileError(line, "bad register '" + std::string(s) + "'");
  }

  static uint16_t port(std::string_view s, int line) {
    const auto u = upper(s);
    if (u == "IN0") return 0;
    if (u == "IN1") return 1;
    throw CompileError(line, "bad input port '" + std::string(s) + "'");
  }

  static uint16_t pin(std::string_view s, int line) {
    if (s.size() >= 2 && (s[0] == 'P' || s[0] == 'p')) {
      int v = -1;
      auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), v);
      if (ec == std::errc() && p == s.data() + s.size() && v >= 0 && v <= kMaxPinIndex) {
        return static_cast<uint16_t>(v);
      }
    }
    throw CompileError(line, "bad pin '" + std::string(s) + "'");
  }

  static uint16_t imm(std::string_view s, int line) {
    uint64_t v = 0;
    int base = 10;
    std::string_view digits = s;
    if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) {
      base = 16;
      digits.remove_prefix(2);
    }
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
    if (ec == std::errc::result_out_of_range || (ec == std::errc() && v > 0xFFFF)) {
      throw CompileError(line, "immediate '" + std::string(s) + "' does not fit 16 bits");
    }
    if (ec != std::errc() || p != digits.data() + digits.size() || digits.empty()) {
      throw CompileError(line, "bad immediate '" + std::string(s) + "'");
    }
    return static_cast<uint16_t>(v);
  }

  void label(std::string_view s, int slot, int line) {
    if (!is_identifier(s)) throw CompileError(line, "bad label '" + std::string(s) + "'");
    pending_.push_back({program_.code.size(), slot, std::string(s), line});
  }

  Program program_;
  std::vector<PendingLabel> pending_;
};

}  // namespace

std::string_view mnemonic(Opcode op) {
  for (const auto& o : kOps) {
    if (o.op == op) return o.name;
  }
  return "?";
}

CompileError::CompileError(int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message),
      line_(line),
      message_(message) {}

Program assemble(std::string_view source) { return Assembler().run(source); }

Program blank_program() {
  Program p;
  p.source_hash = sha256_hex("");
  return p;
}

// ---------------------------------------------------------------------------
// Profiles

namespace {

const std::vector<Profile>& profiles() {
  static const std::vector<Profile> kProfiles = {
      {"dut-v1", 1'000'000, 4, 40, 10},
      {"dut-v2", 2'000'000, 6, 80, 20},
  };
  return kProfiles;
}

}  // namespace

const Profile& profile(std::string_view id) {
  for (const auto& p : profiles()) {
    if (p.id == id) return p;
  }
  throw std::invalid_argument("unknown DUT profile: " + std::string(id));
}

std::vector<std::string> profile_ids() {
  std::vector<std::string> ids;
  for (const auto& p : profiles()) ids.push_back(p.id);
  return ids;
}

int parse_pin(std::string_view name, const Profile& p) {
  if (name.size() >= 2 && (name[0] == 'P' || name[0] == 'p')) {
    int v = -1;
    auto [end, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), v);
    if (ec == std::errc() && end == name.data() + name.size() && v >= 0 && v < p.pins) return v;
  }
  throw std::invalid_argument("pin " + std::string(name) + " does not exist on " + p.id);
}

std::string pin_name(int pin) { return "P" + std::to_string(pin); }

std::vector<PinEvent> Trace::pin_events(int pin) const {
  std::vector<PinEvent> out;
  for (const auto& e : events) {
    if (e.pin == pin) out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

// Per-pin output timeline built during a run.
class PinBank {
 public:
  explicit PinBank(int pins) : events_(static_cast<std::size_t>(pins)) {}

  int size() const { return static_cast<int>(events_.size()); }

  bool level(int pin) const {
    const auto& v = events_[pin];
    return v.empty() ? false : v.back().level;
  }

  int64_t last_tick(int pin) const {
    const auto& v = events_[pin];
    return v.empty() ? -1 : v.back().tick;
  }

  // Appends a level change at `tick`; callers guarantee tick > last_tick.
  void drive(int pin, int64_t tick, bool level) {
    if (this->level(pin) != level) {
      events_[pin].push_back({tick, static_cast<uint8_t>(pin), level});
    }
  }

  void truncate_from(int pin, int64_t tick) {
    auto& v = events_[pin];
    while (!v.empty() && v.back().tick >= tick) v.pop_back();
  }

  std::vector<PinEvent> merged(int64_t duration) const {
    std::vector<PinEvent> out;
    for (const auto& v : events_) {
      for (const auto& e : v) {
        if (e.tick < duration) out.push_back(e);
      }
    }
    std::sort(out.begin(), out.end(), [](const PinEvent& a, const PinEvent& b) {
      return a.tick != b.tick ? a.tick < b.tick : a.pin < b.pin;
    });
    return out;
  }

 private:
  std::vector<std::vector<PinEvent>> events_;
};

struct Peripheral {
  bool active = false;
  int pin = 0;
  int64_t period = 0;
  int64_t high = 0;
  int64_t origin = 0;

  // Emits the square wave on [origin, end).
  void emit(PinBank& bank, int64_t end) const {
    if (!active || end <= origin) return;
    if (high <= 0) {
      bank.drive(pin, origin, false);
      return;
    }
    if (high >= period) {
      bank.drive(pin, origin, true);
      return;
    }
    for (int64_t start = origin; start < end; start += period) {
      bank.drive(pin, start, true);
      if (start + high < end) bank.drive(pin, start + high, false);
    }
  }
};

// xorshift32; the output-stage latency source, reseeded at every reset.
class LatencySource {
 public:
  explicit LatencySource(uint32_t max_ticks) : max_(max_ticks) {}

  int64_t next() {
    state_ ^= state_ << 13;
    state_ ^= state_ >> 17;
    state_ ^= state_ << 5;
    if (max_ == 0) return 0;
    return static_cast<int64_t>((state_ >> 8) % (max_ + 1));
  }

 private:
  uint32_t state_ = 0x9E3779B9u;
  uint32_t max_;
};

}  // namespace

Machine::Machine(const Profile& profile) : profile_(profile) { reset(); }

void Machine::reset() { program_ = blank_program(); }

void Machine::load(Program program) { program_ = std::move(program); }

Trace Machine::run(std::span<const PortSample> ports, int64_t duration_us,
                   const ExecutionObserver& observer) {
  for (std::size_t i = 1; i < ports.size(); ++i) {
    if (ports[i].at_us <= ports[i - 1].at_us) {
      throw std::invalid_argument("port schedule times must be strictly increasing");
    }
  }
  if (duration_us < 0) throw std::invalid_argument("negative duration");

  const int64_t duration = profile_.ticks_from_us(duration_us);
  const auto& code = program_.code;

  std::array<uint16_t, kRegisterCount> regs{};
  uint16_t in0 = 0;
  uint16_t in1 = 0;
  std::size_t next_port = 0;
  PinBank bank(profile_.pins);
  Peripheral pwm;
  LatencySource latency(profile_.gpio_jitter_ticks);

  Trace trace;
  trace.duration_ticks = duration;

  std::size_t pc = 0;
  int64_t tick = 0;

  const auto gpio_write = [&](int pin, bool level) {
    const int64_t lat = latency.next();
    if (pin >= bank.size()) return;
    if (pwm.active && pwm.pin == pin) return;
    const int64_t at = std::max(tick + 1 + lat, bank.last_tick(pin) + 1);
    bank.drive(pin, at, level);
  };

  while (tick < duration) {
    if (pc >= code.size()) {
      trace.halted = true;
      break;
    }
    while (next_port < ports.size() &&
           profile_.ticks_from_us(ports[next_port].at_us) <= tick) {
      in0 = ports[next_port].in0;
      in1 = ports[next_port].in1;
      ++next_port;
    }

    const Instruction& ins = code[pc];
    const auto& a = ins.args;
    std::size_t next = pc + 1;
    int64_t cost = 1;
    bool halt = false;

    switch (ins.op) {
      case Opcode::Ldi:
        regs[a[0]] = a[1];
        break;
      case Opcode::Mov:
        regs[a[0]] = regs[a[1]];
        break;
      case Opcode::Add:
        regs[a[0]] = static_cast<uint16_t>(regs[a[1]] + regs[a[2]]);
        break;
      case Opcode::Sub:
        regs[a[0]] = static_cast<uint16_t>(regs[a[1]] - regs[a[2]]);
        break;
      case Opcode::Mul:
        regs[a[0]] = static_cast<uint16_t>(static_cast<uint32_t>(regs[a[1]]) * regs[a[2]]);
        break;
      case Opcode::Div:
        regs[a[0]] = regs[a[2]] == 0 ? 0 : static_cast<uint16_t>(regs[a[1]] / regs[a[2]]);
        break;
      case Opcode::Rdport:
        regs[a[0]] = a[1] == 0 ? in0 : in1;
        break;
      case Opcode::Set:
        gpio_write(a[0], true);
        break;
      case Opcode::Clr:
        gpio_write(a[0], false);
        break;
      case Opcode::Waiti:
        cost = std::max<int64_t>(1, a[0]);
        break;
      case Opcode::Wait:
        cost = std::max<int64_t>(1, regs[a[0]]);
        break;
      case Opcode::Jmp:
        next = a[0];
        break;
      case Opcode::Beq:
        if (regs[a[0]] == regs[a[1]]) next = a[2];
        break;
      case Opcode::Bne:
        if (regs[a[0]] != regs[a[1]]) next = a[2];
        break;
      case Opcode::Blt:
        if (regs[a[0]] < regs[a[1]]) next = a[2];
        break;
      case Opcode::Pwmhw: {
        const int64_t start = tick + 1;
        pwm.emit(bank, start);
        const int pin = a[0];
        if (pwm.active && pwm.pin != pin) {
          bank.drive(pwm.pin, start, false);
          pwm.active = false;
        }
        const int64_t period = regs[a[1]];
        const int64_t duty = std::min<int64_t>(regs[a[2]], 100);
        if (pin >= bank.size()) {
          pwm.active = false;
        } else if (period == 0) {
          if (pwm.active) bank.drive(pin, start, false);
          pwm.active = false;
        } else {
          if (!(pwm.active && pwm.pin == pin)) {
            bank.truncate_from(pin, start);
          }
          pwm = Peripheral{true, pin, period, period * duty / 100, start};
        }
        break;
      }
      case Opcode::Print: {
        const std::string text = std::to_string(regs[a[0]]) + "\n";
        const int64_t slot = profile_.uart_byte_ticks;
        for (std::size_t i = 0; i < text.size(); ++i) {
          const int64_t done = tick + slot * static_cast<int64_t>(i + 1);
          if (done > duration) break;
          trace.print_log.push_back(text[i]);
          trace.print_ticks.push_back(done);
        }
        cost = slot * static_cast<int64_t>(text.size());
        break;
      }
      case Opcode::Nop:
        break;
      case Opcode::Halt:
        halt = true;
        break;
    }

    if (observer) observer(pc, cost);
    tick += cost;
    pc = next;
    if (halt) {
      trace.halted = true;
      break;
    }
  }

  pwm.emit(bank, duration);
  trace.events = bank.merged(duration);
  trace.end_tick = tick;
  return trace;
}

Trace run(const Program& program, std::span<const PortSample> ports,
          int64_t duration_us, const Profile& p, const ExecutionObserver& observer) {
  Machine m(p);
  m.reset();
  m.load(program);
  return m.run(ports, duration_us, observer);
}

// ---------------------------------------------------------------------------

std::vector<PortSample> parse_port_schedule_csv(std::string_view text) {
  std::vector<PortSample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "tick_us,in0,in1") {
        throw std::invalid_argument("port schedule header must be 'tick_us,in0,in1'");
      }
      continue;
    }
    if (trim(line).empty()) continue;
    long long t = 0;
    unsigned a = 0, b = 0;
    char extra = 0;
    if (std::sscanf(line.c_str(), "%lld,%u,%u%c", &t, &a, &b, &extra) != 3 || a > 0xFFFF ||
        b > 0xFFFF || t < 0) {
      throw std::invalid_argument("bad port schedule line " + std::to_string(line_no));
    }
    if (!out.empty() && t <= out.back().at_us) {
      throw std::invalid_argument("port schedule times must be strictly increasing (line " +
                                  std::to_string(line_no) + ")");
    }
    out.push_back({t, static_cast<uint16_t>(a), static_cast<uint16_t>(b)});
  }
  if (line_no == 0) throw std::invalid_argument("empty port schedule");
  return out;
}

std::string write_port_schedule_csv(std::span<const PortSample> ports) {
  std::string out = "tick_us,in0,in1\n";
  for (const auto& p : ports) {
    out += std::to_string(p.at_us) + "," + std::to_string(p.in0) + "," + std::to_string(p.in1) + "\n";
  }
  return out;
}

}  // namespace embgrader::dut
