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

#include "embgrader/coordinator.hpp"

#include <httplib.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>
#include <vector>

#include "embgrader/digest.hpp"
#include "embgrader/engine.hpp"
#include "embgrader/http_util.hpp"
#include "embgrader/json_io.hpp"

namespace embgrader::coordinator {

using nlohmann::json;
namespace pt = boost::property_tree;

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

json error_body(std::string_view code, std::string_view detail) {
  return json{{"error", code}, {"detail", detail}};
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

Config parse_config(std::string_view ini_text) {
  pt::ptree tree;
  std::istringstream in{std::string(ini_text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  Config c;
  try {
    c.testbed_id = tree.get<std::string>("testbed.id");
    c.dut_profile = tree.get<std::string>("testbed.profile", c.dut_profile);
    c.token = tree.get<std::string>("testbed.token", "");
    c.server_url = tree.get<std::string>("server.url", "");
    c.heartbeat_interval_s =
        tree.get<double>("server.heartbeat_interval_s", c.heartbeat_interval_s);
    c.host = tree.get<std::string>("listen.host", c.host);
    c.port = tree.get<int>("listen.port", c.port);
    c.advertise_url = tree.get<std::string>("listen.advertise", "");
    c.max_sample_rate_hz = tree.get<uint32_t>("engine.max_sample_rate_hz", c.max_sample_rate_hz);
    c.service_delay_s = tree.get<double>("engine.service_delay_s", c.service_delay_s);
  } catch (const pt::ptree_error& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (const auto wiring = tree.get_child_optional("wiring")) {
    c.wiring.clear();
    for (const auto& [channel, node] : *wiring) c.wiring[channel] = node.data();
  }
  validate(c);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const Config& c) {
  std::vector<std::string> lines = {
      "engine.max_sample_rate_hz=" + std::to_string(c.max_sample_rate_hz),
      "engine.service_delay_s=" + format_number(c.service_delay_s),
      "listen.advertise=" + c.advertise_url,
      "listen.host=" + c.host,
      "listen.port=" + std::to_string(c.port),
      "server.heartbeat_interval_s=" + format_number(c.heartbeat_interval_s),
      "server.url=" + c.server_url,
      "testbed.id=" + c.testbed_id,
      "testbed.profile=" + c.dut_profile,
      "testbed.token=" + c.token,
  };
  for (const auto& [channel, pin] : c.wiring) lines.push_back("wiring." + channel + "=" + pin);
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string config_hash(const Config& c) { return sha256_hex(canonical_config(c)); }

void validate(const Config& c) {
  if (c.testbed_id.empty()) throw InvalidArgument("config: testbed.id is empty");
  const auto& p = dut::profile(c.dut_profile);
  if (c.heartbeat_interval_s <= 0) throw InvalidArgument("config: heartbeat interval must be > 0");
  if (c.max_sample_rate_hz == 0 || c.max_sample_rate_hz > kMaxSampleRateHz) {
    throw InvalidArgument("config: max_sample_rate_hz out of range");
  }
  if (c.service_delay_s < 0) throw InvalidArgument("config: service_delay_s must be >= 0");
  for (const auto& [channel, pin] : c.wiring) {
    try {
      dut::parse_pin(pin, p);
    } catch (const std::exception&) {
      throw InvalidArgument("config: wiring " + channel + " -> " + pin + " is not a pin of " +
                            c.dut_profile);
    }
  }
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Idle:
      return "idle";
    case Status::Busy:
      return "busy";
    case Status::Fault:
      return "fault";
  }
  return "?";
}

json to_json(const Descriptor& d) {
  return json{{"testbed_id", d.testbed_id},
              {"dut_profile", d.dut_profile},
              {"capabilities", {{"max_sample_rate_hz", d.max_sample_rate_hz}, {"pins", d.pins}}},
              {"wiring", d.wiring},
              {"status", to_string(d.status)},
              {"config_hash", d.config_hash},
              {"endpoint", d.endpoint},
              {"heartbeat_interval_s", d.heartbeat_interval_s}};
}

// ---------------------------------------------------------------------------

Testbed::Testbed(const Config& cfg) : cfg_(cfg), machine_(dut::profile(cfg.dut_profile)) {}

void Testbed::configure(const Config& cfg) {
  if (cfg.dut_profile != cfg_.dut_profile) machine_ = dut::Machine(dut::profile(cfg.dut_profile));
  cfg_ = cfg;
}

void Testbed::check(const job::GradingJob& job) const {
  if (job.dut_profile != cfg_.dut_profile) {
    throw JobRejected("job targets " + job.dut_profile + ", testbed has " + cfg_.dut_profile);
  }
  for (const auto& tc : job.test_cases) {
    try {
      validate(tc.capture);
      validate_schedule(tc.sessions, tc.capture.duration_us);
    } catch (const std::exception& e) {
      throw JobRejected("test case " + tc.id + ": " + e.what());
    }
    if (tc.capture.sample_rate_hz > cfg_.max_sample_rate_hz) {
      throw JobRejected("test case " + tc.id + ": sample rate exceeds engine maximum");
    }
    bool wired = false;
    for (const auto& [channel, pin] : cfg_.wiring) wired = wired || pin == tc.capture.pin;
    if (!wired) throw JobRejected("test case " + tc.id + ": pin " + tc.capture.pin + " not wired");
  }
}

job::JobArtifacts Testbed::execute(const job::GradingJob& job) {
  check(job);
  job::JobArtifacts out;
  std::optional<dut::Program> student;
  try {
    student = dut::assemble(job.source);
  } catch (const dut::CompileError& e) {
    out.compile = {CompileState::CompileError, e.what()};
  }

  for (const auto& tc : job.test_cases) {
    machine_.reset();
    machine_.load(dut::blank_program());
    if (student) machine_.load(*student);
    auto result = engine::capture_on(machine_, tc.sessions, tc.capture);
    out.test_cases.push_back({tc.id, engine::write_schedule_csv(tc.sessions),
                              engine::write_capture_file(result.capture),
                              std::move(result.print_log)});
  }
  return out;
}

// ---------------------------------------------------------------------------

Service::Service(Config cfg, std::optional<std::filesystem::path> config_path)
    : cfg_(std::move(cfg)),
      config_path_(std::move(config_path)),
      hash_(config_hash(cfg_)),
      testbed_(cfg_) {
  validate(cfg_);
}

Service::~Service() { stop(); }

Status Service::status() const {
  std::lock_guard lock(mu_);
  if (config_fault_) return Status::Fault;
  return busy_.load() ? Status::Busy : Status::Idle;
}

Descriptor Service::descriptor() const {
  std::lock_guard lock(mu_);
  Descriptor d;
  d.testbed_id = cfg_.testbed_id;
  d.dut_profile = cfg_.dut_profile;
  d.max_sample_rate_hz = cfg_.max_sample_rate_hz;
  d.pins = dut::profile(cfg_.dut_profile).pins;
  d.wiring = cfg_.wiring;
  d.status = config_fault_ ? Status::Fault : (busy_.load() ? Status::Busy : Status::Idle);
  d.config_hash = hash_;
  d.endpoint = cfg_.advertise_url.empty()
                   ? "http://" + cfg_.host + ":" + std::to_string(port_)
                   : cfg_.advertise_url;
  d.heartbeat_interval_s = cfg_.heartbeat_interval_s;
  return d;
}

int Service::start() {
  http_ = std::make_unique<httplib::Server>();
  http_->new_task_queue = [] { return new httplib::ThreadPool(8); };
  http_->set_keep_alive_timeout(2);
  install_routes();
  {
    std::lock_guard lock(mu_);
    port_ = net::bind_server(*http_, cfg_.host, cfg_.port);
    stopping_ = false;
  }
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  heartbeat_thread_ = std::thread([this] { heartbeat_loop(); });
  return port_;
}

void Service::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_ && !http_) return;
    stopping_ = true;
  }
  stop_cv_.notify_all();
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  if (heartbeat_thread_.joinable()) heartbeat_thread_.join();
  std::lock_guard exec(exec_mu_);
  if (job_thread_.joinable()) job_thread_.join();
  http_.reset();
}

void Service::prune_locked() {
  const auto cutoff = std::chrono::steady_clock::now() - kRetention;
  for (auto it = jobs_.begin(); it != jobs_.end();) {
    if (it->second.state != job::JobState::Running && it->second.finished < cutoff) {
      it = jobs_.erase(it);
    } else {
      ++it;
    }
  }
}

void Service::install_routes() {
  auto authorized = [this](const httplib::Request& req, httplib::Response& res) {
    const auto token = net::bearer_token(req.get_header_value("Authorization"));
    std::string expected;
    {
      std::lock_guard lock(mu_);
      expected = cfg_.token;
    }
    if (!token || expected.empty() || !constant_time_equal(*token, expected)) {
      reply(res, 401, error_body("unauthorized", "bad or missing bearer token"));
      return false;
    }
    return true;
  };

  http_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, to_json(descriptor()));
  });

  http_->Post("/jobs", [this, authorized](const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req, res)) return;
    job::GradingJob g;
    try {
      g = json::parse(req.body).get<job::GradingJob>();
    } catch (const std::exception& e) {
      reply(res, 400, error_body("bad_request", e.what()));
      return;
    }
    std::lock_guard exec(exec_mu_);
    if (status() == Status::Fault) {
      reply(res, 503, error_body("fault", "testbed configuration is invalid"));
      return;
    }
    bool expected = false;
    if (!busy_.compare_exchange_strong(expected, true)) {
      reply(res, 409, error_body("busy", "a job is already running"));
      return;
    }
    if (job_thread_.joinable()) job_thread_.join();
    {
      std::lock_guard lock(mu_);
      testbed_.configure(cfg_);
      try {
        testbed_.check(g);
      } catch (const JobRejected& e) {
        busy_ = false;
        reply(res, 400, error_body("rejected", e.what()));
        return;
      }
      prune_locked();
      g.job_id = "job-" + random_hex(8);
      jobs_[g.job_id] = JobRecord{};
    }
    const std::string id = g.job_id;
    job_thread_ = std::thread([this, g = std::move(g)]() mutable { run_job(std::move(g)); });
    reply(res, 202, json{{"job_id", id}});
  });

  http_->Get(R"(/jobs/([A-Za-z0-9-]+))",
             [this, authorized](const httplib::Request& req, httplib::Response& res) {
               if (!authorized(req, res)) return;
               std::lock_guard lock(mu_);
               const auto it = jobs_.find(req.matches[1]);
               if (it == jobs_.end()) {
                 reply(res, 404, error_body("not_found", "unknown job"));
                 return;
               }
               json body{{"job_id", it->first}, {"status", job::to_string(it->second.state)}};
               if (!it->second.error.empty()) body["error"] = it->second.error;
               reply(res, 200, body);
             });

  http_->Get(R"(/jobs/([A-Za-z0-9-]+)/artifacts)",
             [this, authorized](const httplib::Request& req, httplib::Response& res) {
               if (!authorized(req, res)) return;
               std::lock_guard lock(mu_);
               const auto it = jobs_.find(req.matches[1]);
               if (it == jobs_.end()) {
                 reply(res, 404, error_body("not_found", "unknown job"));
                 return;
               }
               if (it->second.state != job::JobState::Done) {
                 reply(res, 409, error_body("not_done", "job has no artifacts"));
                 return;
               }
               reply(res, 200, json(*it->second.artifacts));
             });

  http_->Delete(R"(/jobs/([A-Za-z0-9-]+))",
                [this, authorized](const httplib::Request& req, httplib::Response& res) {
                  if (!authorized(req, res)) return;
                  std::lock_guard lock(mu_);
                  const auto it = jobs_.find(req.matches[1]);
                  if (it == jobs_.end()) {
                    reply(res, 404, error_body("not_found", "unknown job"));
                    return;
                  }
                  if (it->second.state == job::JobState::Running) {
                    reply(res, 409, error_body("running", "job is still running"));
                    return;
                  }
                  jobs_.erase(it);
                  res.status = 204;
                });
}

void Service::run_job(job::GradingJob g) {
  double delay_s = 0;
  {
    std::lock_guard lock(mu_);
    delay_s = cfg_.service_delay_s;
  }
  JobRecord done;
  try {
    // Testbed is owned by this thread while busy_ is set.
    done.artifacts = testbed_.execute(g);
    done.state = job::JobState::Done;
  } catch (const std::exception& e) {
    done.state = job::JobState::Failed;
    done.error = e.what();
  }
  if (delay_s > 0) {
    std::unique_lock lock(mu_);
    stop_cv_.wait_for(lock, std::chrono::duration<double>(delay_s), [this] { return stopping_; });
  }
  {
    std::lock_guard lock(mu_);
    done.finished = std::chrono::steady_clock::now();
    auto it = jobs_.find(g.job_id);
    if (it != jobs_.end()) it->second = std::move(done);
  }
  busy_ = false;
}

void Service::reload_config() {
  if (!config_path_) return;
  try {
    Config fresh = load_config(*config_path_);
    std::lock_guard lock(mu_);
    fresh.port = cfg_.port;
    fresh.host = cfg_.host;
    if (fresh.advertise_url.empty()) fresh.advertise_url = cfg_.advertise_url;
    hash_ = config_hash(fresh);
    cfg_ = std::move(fresh);
    config_fault_ = false;
  } catch (const std::exception&) {
    std::lock_guard lock(mu_);
    config_fault_ = true;
  }
}

bool Service::send_heartbeat() {
  reload_config();
  std::string url;
  std::string token;
  {
    std::lock_guard lock(mu_);
    url = cfg_.server_url;
    token = cfg_.token;
  }
  if (url.empty()) return false;
  try {
    net::JsonClient client(url, token, std::chrono::seconds(2));
    return client.post("/testbeds/heartbeat", to_json(descriptor())).ok();
  } catch (const std::exception&) {
    return false;
  }
}

void Service::heartbeat_loop() {
  for (;;) {
    send_heartbeat();
    std::unique_lock lock(mu_);
    const auto interval = std::chrono::duration<double>(cfg_.heartbeat_interval_s);
    if (stop_cv_.wait_for(lock, interval, [this] { return stopping_; })) return;
  }
}

}  // namespace embgrader::coordinator
