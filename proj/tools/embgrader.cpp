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

// embgrader: run the primary server or a testbed coordinator, and the
// offline tools (assemble, capture, grade, classify, fixtures).

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "embgrader/analysis.hpp"
#include "embgrader/coordinator.hpp"
#include "embgrader/dut.hpp"
#include "embgrader/engine.hpp"
#include "embgrader/fixtures.hpp"
#include "embgrader/grading.hpp"
#include "embgrader/json_io.hpp"
#include "embgrader/server.hpp"

namespace {

using namespace embgrader;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Blocks until SIGINT or SIGTERM.
void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

void block_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"embedded systems autograder"};
  app.require_subcommand(1);

  // server
  auto* srv = app.add_subcommand("server", "run the primary server");
  server::ServerConfig scfg;
  int poll_min_ms = 500;
  int poll_max_ms = 1500;
  int lease_s = 120;
  srv->add_option("--db", scfg.db_path, "SQLite database path")->capture_default_str();
  srv->add_option("--host", scfg.host)->capture_default_str();
  srv->add_option("--port", scfg.port)->capture_default_str();
  srv->add_option("--admin-user", scfg.admin_user)->capture_default_str();
  srv->add_option("--admin-password", scfg.admin_password,
                  "create the admin account with this password if missing");
  srv->add_option("--poll-min-ms", poll_min_ms)->capture_default_str();
  srv->add_option("--poll-max-ms", poll_max_ms)->capture_default_str();
  srv->add_option("--lease-s", lease_s)->capture_default_str();
  srv->add_option("--max-retries", scfg.scheduler.max_retries)->capture_default_str();

  // coordinator
  auto* coord = app.add_subcommand("coordinator", "run a testbed coordinator");
  std::string config_path;
  coord->add_option("--config", config_path, "INI config file")->required();

  // assemble
  auto* asmc = app.add_subcommand("assemble", "check a program and print its listing");
  std::string program_path;
  asmc->add_option("program", program_path)->required();

  // capture
  auto* cap = app.add_subcommand("capture", "run a program against a test case and capture");
  std::string testcase_path;
  std::string out_dir = ".";
  std::string profile_id = "dut-v1";
  cap->add_option("program", program_path)->required();
  cap->add_option("testcase", testcase_path, "test case JSON")->required();
  cap->add_option("--out", out_dir, "directory for the three artifact files")->capture_default_str();
  cap->add_option("--profile", profile_id)->capture_default_str();

  // grade
  auto* grd = app.add_subcommand("grade", "grade an artifact directory");
  std::string artifact_dir;
  std::string script{kBuiltinPwmGrader};
  grd->add_option("dir", artifact_dir)->required();
  grd->add_option("--script", script)->capture_default_str();

  // classify
  auto* cls = app.add_subcommand("classify", "hardware or software PWM from a capture");
  std::string capture_path;
  cls->add_option("capture", capture_path, "capture.rle")->required();

  // fixtures
  auto* fix = app.add_subcommand("fixtures", "list or print the built-in fixtures");
  std::string fixture_name;
  fix->add_option("name", fixture_name, "program name, or 'assignment'");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*srv) {
      block_signals();
      scfg.scheduler.poll_min = std::chrono::milliseconds(poll_min_ms);
      scfg.scheduler.poll_max = std::chrono::milliseconds(poll_max_ms);
      scfg.scheduler.lease = std::chrono::seconds(lease_s);
      server::Server s(scfg);
      const int port = s.start();
      std::cout << "listening on http://" << scfg.host << ":" << port << std::endl;
      wait_for_signal();
      s.stop();
    } else if (*coord) {
      block_signals();
      coordinator::Service svc(coordinator::load_config(config_path), config_path);
      const int port = svc.start();
      const auto d = svc.descriptor();
      std::cout << d.testbed_id << " listening on " << d.endpoint << " (port " << port
                << "), config " << d.config_hash << std::endl;
      wait_for_signal();
      svc.stop();
    } else if (*asmc) {
      const auto p = dut::assemble(read_file(program_path));
      for (std::size_t i = 0; i < p.code.size(); ++i) {
        const auto& ins = p.code[i];
        std::cout << i << "\t" << dut::mnemonic(ins.op) << "\t" << ins.args[0] << "," << ins.args[1]
                  << "," << ins.args[2] << "\t; line " << ins.line << "\n";
      }
      std::cout << p.code.size() << " instructions, sha256 " << p.source_hash << "\n";
    } else if (*cap) {
      const auto tc = nlohmann::json::parse(read_file(testcase_path)).get<TestCase>();
      const auto& prof = dut::profile(profile_id);
      dut::Program prog = dut::blank_program();
      try {
        prog = dut::assemble(read_file(program_path));
      } catch (const dut::CompileError& e) {
        std::cerr << "compile error: " << e.what() << " (capturing blank firmware)\n";
      }
      const auto r = engine::capture(prog, tc.sessions, tc.capture, prof);
      grading::write_artifacts(out_dir, engine::write_schedule_csv(tc.sessions),
                               engine::write_capture_file(r.capture), r.print_log);
      std::cout << r.capture.runs.size() << " runs, " << r.capture.transitions()
                << " transitions, " << r.print_log.size() << " print bytes\n";
    } else if (*grd) {
      const auto out = grading::run_grading({script, artifact_dir});
      std::cout << nlohmann::json{{"score", out.score},
                                  {"feedback", out.feedback},
                                  {"sessions", out.sessions}}
                       .dump(2)
                << "\n";
    } else if (*cls) {
      const auto capture = engine::parse_capture_file(read_file(capture_path));
      try {
        const auto v = analysis::classify_jitter(capture);
        std::cout << analysis::to_string(v.cls) << " stddev_us=" << v.stddev_us
                  << " max_deviation_us=" << v.max_deviation_us << "\n";
      } catch (const analysis::InsufficientResolution& e) {
        std::cout << "insufficient_resolution: " << e.what() << "\n";
        return 3;
      }
    } else if (*fix) {
      if (fixture_name.empty()) {
        for (const auto& n : fixtures::program_names()) std::cout << n << "\n";
        std::cout << "assignment\n";
      } else if (fixture_name == "assignment") {
        std::cout << fixtures::data::pwm_assignment_json();
      } else {
        std::cout << fixtures::program(fixture_name);
      }
    }
  } catch (const dut::CompileError& e) {
    std::cerr << "compile error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
