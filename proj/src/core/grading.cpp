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

#include "embgrader/grading.hpp"

#include <fcntl.h>
#include <linux/landlock.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

namespace embgrader::grading {

namespace fs = std::filesystem;

ScriptCrashed::ScriptCrashed(int exit_code, const std::string& detail)
    : GraderFault("grading script exited with code " + std::to_string(exit_code) +
                  (detail.empty() ? "" : ": " + detail)),
      exit_code_(exit_code) {}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw GraderFault("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

void check_artifact_dir(const fs::path& dir) {
  for (auto name : {kScheduleFile, kCaptureFile, kPrintLogFile}) {
    if (!fs::is_regular_file(dir / name)) {
      throw GraderFault("artifact dir lacks " + std::string(name));
    }
  }
}

std::string format_us(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string format_ratio(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void write_artifacts(const fs::path& dir, std::string_view schedule_csv,
                     std::string_view capture_rle, std::string_view print_log) {
  fs::create_directories(dir);
  write_file(dir / kScheduleFile, schedule_csv);
  write_file(dir / kCaptureFile, capture_rle);
  write_file(dir / kPrintLogFile, print_log);
}

// ---------------------------------------------------------------------------
// builtin:pwm

GradingOutcome grade_pwm(std::span<const Session> schedule, const engine::SignalCapture& capture,
                         const analysis::AnalysisConfig& cfg) {
  const auto measured = analysis::measure_pwm(capture, schedule, cfg);
  const analysis::ScoreTolerances tol{capture.sample_interval_us(), 1.0};

  GradingOutcome out;
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& m = measured.sessions[i];
    const auto& want = schedule[i];
    const double score = analysis::score_session(m, want, tol);
    out.sessions.push_back(score);
    if (score >= 1.0) continue;

    std::string line = "session " + std::to_string(i + 1) + ": ";
    const bool level_only = want.duty == 0.0 || want.duty == 1.0;
    if (!level_only && m.cycles == 0) {
      line += "no output signal detected (expected period " +
              std::to_string(want.period_us) + " us, duty " + format_ratio(want.duty) + ")";
    } else if (level_only) {
      line += "expected constant " + std::string(want.duty == 0.0 ? "low" : "high") +
              ", measured high fraction " + format_ratio(m.high_fraction);
    } else if (!m.period_us) {
      line += "too few complete cycles to measure (expected period " +
              std::to_string(want.period_us) + " us)";
    } else {
      line += "expected period " + std::to_string(want.period_us) + " us, duty " +
              format_ratio(want.duty) + "; measured period " + format_us(*m.period_us) +
              " us, duty " + format_ratio(m.duty);
    }
    line += " (session score " + format_ratio(score) + ")";
    problems.push_back(std::move(line));
  }

  out.score = test_case_score(out.sessions);
  if (problems.empty()) {
    out.feedback = "all sessions within tolerance";
  } else {
    for (std::size_t i = 0; i < problems.size(); ++i) {
      if (i) out.feedback += "\n";
      out.feedback += problems[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// External scripts

namespace {


constexpr uint64_t kReadExec = LANDLOCK_ACCESS_FS_EXECUTE | LANDLOCK_ACCESS_FS_READ_FILE |
                               LANDLOCK_ACCESS_FS_READ_DIR;
constexpr uint64_t kAllFsAbi1 =
    LANDLOCK_ACCESS_FS_EXECUTE | LANDLOCK_ACCESS_FS_WRITE_FILE | LANDLOCK_ACCESS_FS_READ_FILE |
    LANDLOCK_ACCESS_FS_READ_DIR | LANDLOCK_ACCESS_FS_REMOVE_DIR | LANDLOCK_ACCESS_FS_REMOVE_FILE |
    LANDLOCK_ACCESS_FS_MAKE_CHAR | LANDLOCK_ACCESS_FS_MAKE_DIR | LANDLOCK_ACCESS_FS_MAKE_REG |
    LANDLOCK_ACCESS_FS_MAKE_SOCK | LANDLOCK_ACCESS_FS_MAKE_FIFO | LANDLOCK_ACCESS_FS_MAKE_BLOCK |
    LANDLOCK_ACCESS_FS_MAKE_SYM;
constexpr uint64_t kFileRights =
    LANDLOCK_ACCESS_FS_EXECUTE | LANDLOCK_ACCESS_FS_WRITE_FILE | LANDLOCK_ACCESS_FS_READ_FILE;

int landlock_abi() {
  static const int abi = [] {
    const long v = syscall(SYS_landlock_create_ruleset, nullptr, 0,
                           LANDLOCK_CREATE_RULESET_VERSION);
    return v < 0 ? 0 : static_cast<int>(v);
  }();
  return abi;
}

// Ruleset assembled in the parent; the child only has to enforce it.
class Confinement {
 public:
  Confinement(const fs::path& artifact_dir, const fs::path& script) {
    if (landlock_abi() < 1) return;
    landlock_ruleset_attr attr{};
    attr.handled_access_fs = kAllFsAbi1;
    ruleset_ = static_cast<int>(
        syscall(SYS_landlock_create_ruleset, &attr, sizeof attr, 0));
    if (ruleset_ < 0) return;
    for (const char* dir : {"/usr", "/bin", "/sbin", "/lib", "/lib32", "/lib64", "/etc", "/opt"}) {
      allow(dir, kReadExec);
    }
    allow("/proc", LANDLOCK_ACCESS_FS_READ_FILE | LANDLOCK_ACCESS_FS_READ_DIR);
    allow("/dev", LANDLOCK_ACCESS_FS_READ_FILE | LANDLOCK_ACCESS_FS_WRITE_FILE);
    allow(artifact_dir, kAllFsAbi1);
    allow(script, LANDLOCK_ACCESS_FS_EXECUTE | LANDLOCK_ACCESS_FS_READ_FILE);
  }

  ~Confinement() {
    if (ruleset_ >= 0) close(ruleset_);
  }

  Confinement(const Confinement&) = delete;
  Confinement& operator=(const Confinement&) = delete;

  // Async-signal-safe; runs in the forked child.
  bool enforce() const {
    if (ruleset_ < 0) return true;
    if (prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0) return false;
    return syscall(SYS_landlock_restrict_self, ruleset_, 0) == 0;
  }

 private:
  void allow(const fs::path& path, uint64_t rights) {
    const int fd = open(path.c_str(), O_PATH | O_CLOEXEC);
    if (fd < 0) return;
    if (!fs::is_directory(path)) rights &= kFileRights;
    landlock_path_beneath_attr rule{};
    rule.allowed_access = rights;
    rule.parent_fd = fd;
    syscall(SYS_landlock_add_rule, ruleset_, LANDLOCK_RULE_PATH_BENEATH, &rule, 0);
    close(fd);
  }

  int ruleset_ = -1;
};

GradingOutcome parse_result(const fs::path& file, std::size_t cap) {
  if (!fs::is_regular_file(file)) {
    throw ScriptMalformedOutput("grading script did not write result.json");
  }
  if (fs::file_size(file) > cap) throw ScriptMalformedOutput("result.json exceeds output cap");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw ScriptMalformedOutput(std::string("result.json is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("score") || !j["score"].is_number() ||
      !j.contains("feedback") || !j["feedback"].is_string() || !j.contains("sessions") ||
      !j["sessions"].is_array()) {
    throw ScriptMalformedOutput(
        "result.json must be {\"score\": number, \"feedback\": string, \"sessions\": [numbers]}");
  }
  GradingOutcome out;
  out.score = j["score"].get<double>();
  if (!std::isfinite(out.score) || out.score < 0.0 || out.score > 100.0) {
    throw ScriptMalformedOutput("score must be within [0, 100]");
  }
  out.feedback = j["feedback"].get<std::string>();
  for (const auto& s : j["sessions"]) {
    if (!s.is_number()) throw ScriptMalformedOutput("sessions must be numbers");
    const double v = s.get<double>();
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ScriptMalformedOutput("session scores must be within [0, 1]");
    }
    out.sessions.push_back(v);
  }
  return out;
}

GradingOutcome run_external(const GradingInvocation& inv) {
  const fs::path dir = fs::absolute(inv.artifact_dir);
  const fs::path script = fs::absolute(inv.script);
  if (!fs::is_regular_file(script) || access(script.c_str(), X_OK) != 0) {
    throw GraderFault("grading script " + script.string() + " is not an executable file");
  }
  fs::remove(dir / kResultFile);

  Confinement confinement(dir, script);
  const std::string script_s = script.string();
  const std::string dir_s = dir.string();
  const std::string home = "HOME=" + dir_s;
  char* const argv[] = {const_cast<char*>(script_s.c_str()), const_cast<char*>(dir_s.c_str()),
                        nullptr};
  char* const envp[] = {const_cast<char*>("PATH=/usr/local/bin:/usr/bin:/bin"),
                        const_cast<char*>("LANG=C.UTF-8"), const_cast<char*>(home.c_str()),
                        nullptr};
  const auto cpu_secs = static_cast<rlim_t>(
      std::chrono::duration_cast<std::chrono::seconds>(inv.timeout).count() + 1);
  const auto fsize = static_cast<rlim_t>(inv.max_output_bytes);

  int out_pipe[2];
  if (pipe2(out_pipe, O_CLOEXEC) != 0) throw GraderFault("pipe failed");

  const pid_t pid = fork();
  if (pid < 0) {
    close(out_pipe[0]);
    close(out_pipe[1]);
    throw GraderFault("fork failed");
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(out_pipe[1], STDERR_FILENO);
    const int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    if (chdir(dir_s.c_str()) != 0) _exit(126);
    rlimit cpu{cpu_secs, cpu_secs};
    setrlimit(RLIMIT_CPU, &cpu);
    rlimit fsz{fsize, fsize};
    setrlimit(RLIMIT_FSIZE, &fsz);
    rlimit core{0, 0};
    setrlimit(RLIMIT_CORE, &core);
    if (!confinement.enforce()) _exit(125);
    execve(argv[0], argv, envp);
    _exit(127);
  }
  close(out_pipe[1]);
  setpgid(pid, pid);

  const auto deadline = std::chrono::steady_clock::now() + inv.timeout;
  std::string output;
  bool overflow = false;
  bool timed_out = false;
  bool pipe_open = true;
  int status = 0;
  bool reaped = false;

  while (!reaped) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      timed_out = true;
      break;
    }
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    if (pipe_open) {
      pollfd pfd{out_pipe[0], POLLIN, 0};
      const int rc = poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 20)));
      if (rc > 0) {
        char buf[4096];
        const ssize_t n = read(out_pipe[0], buf, sizeof buf);
        if (n > 0) {
          output.append(buf, static_cast<std::size_t>(n));
          if (output.size() > inv.max_output_bytes) {
            overflow = true;
            break;
          }
        } else if (n == 0) {
          pipe_open = false;
        }
      }
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(std::min<long long>(left, 5)));
    }
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) reaped = true;
  }

  if (!reaped) {
    kill(-pid, SIGKILL);
    kill(pid, SIGKILL);
    waitpid(pid, &status, 0);
  } else {
    kill(-pid, SIGKILL);  // stray children of the script
  }
  close(out_pipe[0]);

  if (timed_out) {
    throw ScriptTimeout("grading script exceeded " + std::to_string(inv.timeout.count()) +
                        " ms");
  }
  if (overflow) {
    throw ScriptMalformedOutput("grading script output exceeds " +
                                std::to_string(inv.max_output_bytes) + " bytes");
  }
  const int code = WIFEXITED(status) ? WEXITSTATUS(status)
                                     : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  if (code != 0) {
    if (output.size() > 512) output.resize(512);
    throw ScriptCrashed(code, output);
  }
  return parse_result(dir / kResultFile, inv.max_output_bytes);
}

}  // namespace

bool confinement_available() { return landlock_abi() >= 1; }

GradingOutcome run_grading(const GradingInvocation& inv) {
  if (inv.timeout.count() <= 0) throw std::invalid_argument("grading timeout must be positive");
  check_artifact_dir(inv.artifact_dir);
  if (inv.script == kBuiltinPwmGrader) {
    const auto schedule = engine::parse_schedule_csv(read_file(inv.artifact_dir / kScheduleFile));
    const auto capture = engine::parse_capture_file(read_file(inv.artifact_dir / kCaptureFile));
    return grade_pwm(schedule, capture);
  }
  return run_external(inv);
}

}  // namespace embgrader::grading
