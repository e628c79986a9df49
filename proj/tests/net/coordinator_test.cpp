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

#include <fstream>

#include "embgrader/coordinator.hpp"
#include "embgrader/digest.hpp"
#include "embgrader/engine.hpp"
#include "embgrader/fixtures.hpp"
#include "embgrader/http_util.hpp"
#include "embgrader/json_io.hpp"
#include "support.hpp"

using namespace embgrader;
using namespace embgrader::coordinator;
using namespace embgrader::testing;
using nlohmann::json;

namespace {

constexpr std::string_view kIni = R"(
; bench 3, shelf B
[testbed]
id = tb-7
profile = dut-v1
token = s3cret

[server]
url = http://127.0.0.1:9
heartbeat_interval_s = 10

[engine]
max_sample_rate_hz = 1000000

[wiring]
CH0 = P0
CH1 = P2
)";

Config local_config(double delay_s = 0) {
  Config c;
  c.testbed_id = "tb-test";
  c.token = "tok";
  c.service_delay_s = delay_s;
  c.heartbeat_interval_s = 3600;
  return c;
}

job::GradingJob job_for(std::string_view program, std::size_t n_cases = 3) {
  const auto fx = fixtures::pwm_assignment();
  job::GradingJob g;
  g.submission_id = "sub-test";
  g.dut_profile = "dut-v1";
  g.source = std::string(program);
  for (std::size_t i = 0; i < n_cases; ++i) {
    const auto& tc = fx.test_cases[i];
    g.test_cases.push_back({tc.id, tc.sessions, tc.capture});
  }
  return g;
}

}  // namespace

TEST_CASE("config parsing, validation and hashing") {
  const auto c = parse_config(kIni);
  CHECK(c.testbed_id == "tb-7");
  CHECK(c.token == "s3cret");
  CHECK(c.heartbeat_interval_s == 10);
  CHECK(c.wiring == std::map<std::string, std::string>{{"CH0", "P0"}, {"CH1", "P2"}});

  SUBCASE("layout and comments do not change the hash") {
    const std::string shuffled =
        "[wiring]\nCH1=P2\nCH0=P0\n[engine]\nmax_sample_rate_hz=1000000\n"
        "[server]\nheartbeat_interval_s=10\nurl=http://127.0.0.1:9\n"
        "[testbed]\ntoken=s3cret\nprofile=dut-v1\nid=tb-7\n";
    CHECK(config_hash(parse_config(shuffled)) == config_hash(c));
  }
  SUBCASE("an edited value changes the hash to the digest of the edited config") {
    std::string edited(kIni);
    edited.replace(edited.find("CH1 = P2"), 8, "CH1 = P3");
    const auto e = parse_config(edited);
    CHECK(config_hash(e) != config_hash(c));
    CHECK(config_hash(e) == sha256_hex(canonical_config(e)));
    CHECK(canonical_config(e).find("wiring.CH1=P3\n") != std::string::npos);
  }
  SUBCASE("wiring must name pins of the profile") {
    std::string bad(kIni);
    bad.replace(bad.find("CH1 = P2"), 8, "CH1 = P4");
    CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
    bad.replace(bad.find("profile = dut-v1"), 16, "profile = dut-v2");
    CHECK_NOTHROW(parse_config(bad));
  }
  SUBCASE("missing id") { CHECK_THROWS_AS(parse_config("[testbed]\nprofile=dut-v1\n"), InvalidArgument); }
}

TEST_CASE("a correct submission yields complete, parseable artifacts") {
  Testbed tb(local_config());
  const auto g = job_for(fixtures::program("pwm_hw_reactive"));
  const auto out = tb.execute(g);
  CHECK(out.compile.ok());
  REQUIRE(out.test_cases.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& a = out.test_cases[i];
    const auto& tc = g.test_cases[i];
    CHECK(a.test_case_id == tc.id);
    CHECK(engine::parse_schedule_csv(a.schedule_csv) == tc.sessions);
    const auto cap = engine::parse_capture_file(a.capture_rle);
    CHECK(engine::decode(cap).size() == cap.total_samples());
    // Same bytes as a capture on a fresh private machine.
    const auto direct = engine::capture(dut::assemble(g.source), tc.sessions, tc.capture,
                                        dut::profile("dut-v1"));
    CHECK(a.capture_rle == engine::write_capture_file(direct.capture));
    CHECK(a.print_log == direct.print_log);
  }
}

TEST_CASE("a compile error records the error and captures blank firmware") {
  Testbed tb(local_config());
  const auto out = tb.execute(job_for("JMP nowhere\n"));
  CHECK(out.compile.state == CompileState::CompileError);
  CHECK(out.compile.message.find("nowhere") != std::string::npos);
  for (const auto& a : out.test_cases) {
    const auto cap = engine::parse_capture_file(a.capture_rle);
    REQUIRE(cap.runs.size() == 1);
    CHECK(cap.runs[0].level == 0);
    CHECK(a.print_log.empty());
  }
}

TEST_CASE("no stale firmware: B's artifacts do not depend on A having run") {
  const auto fx = fixtures::pwm_assignment();
  for (const auto& a_prog : fixtures::program_names()) {
    for (const auto& b_prog : {"compile_error", "blank", "pwm_sw_loop"}) {
      Testbed used(local_config());
      used.execute(job_for(fixtures::program(a_prog)));
      const auto after_a = used.execute(job_for(fixtures::program(b_prog)));
      Testbed fresh(local_config());
      const auto alone = fresh.execute(job_for(fixtures::program(b_prog)));
      CAPTURE(a_prog);
      CAPTURE(b_prog);
      CHECK(json(after_a).dump() == json(alone).dump());
    }
  }
}

TEST_CASE("jobs the testbed cannot run are rejected") {
  Testbed tb(local_config());
  auto g = job_for("HALT\n", 1);
  g.dut_profile = "dut-v2";
  CHECK_THROWS_AS(tb.check(g), JobRejected);
  g = job_for("HALT\n", 1);
  g.test_cases[0].capture.pin = "P1";
  CHECK_THROWS_AS(tb.check(g), JobRejected);
  auto cfg = local_config();
  cfg.max_sample_rate_hz = 1000;
  Testbed slow(cfg);
  CHECK_THROWS_AS(slow.check(job_for("HALT\n", 1)), JobRejected);
}

TEST_CASE("HTTP service: auth, single flight, status, artifacts, release") {
  Service svc(local_config(0.4));
  const int port = svc.start();
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  net::JsonClient anon(base);
  net::JsonClient client(base, "tok");
  net::JsonClient wrong(base, "nope");

  const auto health = anon.get("/health").json();
  CHECK(health["status"] == "idle");
  CHECK(health["testbed_id"] == "tb-test");
  CHECK(health["config_hash"] == config_hash(local_config(0.4)));
  CHECK(health["capabilities"]["pins"] == 4);

  const json body = job_for(fixtures::program("pwm_hw_reactive"));
  CHECK(anon.post("/jobs", body).status == 401);
  CHECK(wrong.post("/jobs", body).status == 401);
  CHECK(client.post("/jobs", json{{"nonsense", 1}}).status == 400);

  const auto first = client.post("/jobs", body);
  REQUIRE(first.status == 202);
  const auto id = first.json()["job_id"].get<std::string>();
  CHECK(client.post("/jobs", body).status == 409);
  CHECK(anon.get("/health").json()["status"] == "busy");
  CHECK(client.get("/jobs/" + id).json()["status"] == "running");
  CHECK(client.get("/jobs/" + id + "/artifacts").status == 409);
  CHECK(client.del("/jobs/" + id).status == 409);

  REQUIRE(eventually([&] { return client.get("/jobs/" + id).json()["status"] == "done"; }));
  CHECK(anon.get("/health").json()["status"] == "idle");
  const auto arts = client.get("/jobs/" + id + "/artifacts").json().get<job::JobArtifacts>();
  CHECK(arts.test_cases.size() == 3);
  CHECK(client.del("/jobs/" + id).status == 204);
  CHECK(client.get("/jobs/" + id).status == 404);
  CHECK(client.get("/jobs/" + id + "/artifacts").status == 404);

  // Idle again: the next job is accepted.
  const auto next = client.post("/jobs", body);
  CHECK(next.status == 202);
  svc.stop();
}

TEST_CASE("an unrunnable job is refused without occupying the testbed") {
  Service svc(local_config());
  const int port = svc.start();
  net::JsonClient client("http://127.0.0.1:" + std::to_string(port), "tok");
  auto g = job_for("HALT\n", 1);
  g.test_cases[0].capture.pin = "P3";
  CHECK(client.post("/jobs", json(g)).status == 400);
  CHECK(svc.status() == Status::Idle);
  svc.stop();
}

TEST_CASE("config edits reach the descriptor at the next heartbeat") {
  const auto path = std::filesystem::temp_directory_path() / "embg-coord-test.ini";
  std::ofstream(path) << kIni;
  auto cfg = load_config(path);
  cfg.server_url.clear();  // no server: delivery fails, nothing else does
  Service svc(cfg, path);
  svc.start();
  const auto before = svc.descriptor().config_hash;

  std::string edited(kIni);
  edited.replace(edited.find("CH1 = P2"), 8, "CH1 = P1");
  std::ofstream(path) << edited;
  CHECK_FALSE(svc.send_heartbeat());  // port 9 refuses
  const auto after = svc.descriptor();
  CHECK(after.config_hash != before);
  auto expect = parse_config(edited);
  expect.host = cfg.host;
  expect.port = cfg.port;
  CHECK(after.config_hash == config_hash(expect));
  CHECK(after.wiring.at("CH1") == "P1");

  std::ofstream(path) << "[testbed]\nid = tb-7\n[wiring]\nCH0 = P9\n";
  svc.send_heartbeat();
  CHECK(svc.status() == Status::Fault);
  CHECK(svc.descriptor().status == Status::Fault);
  svc.stop();
  std::filesystem::remove(path);
}
