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

#include "embgrader/server.hpp"

#include <httplib.h>

#include <iostream>

#include "embgrader/dut.hpp"
#include "embgrader/http_util.hpp"
#include "embgrader/json_io.hpp"

namespace embgrader::server {

using nlohmann::json;

namespace {

struct ApiError {
  int status;
  std::string code;
  std::string detail;
};

[[noreturn]] void fail(int status, std::string code, std::string detail) {
  throw ApiError{status, std::move(code), std::move(detail)};
}

Response reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

Response error(int status, std::string_view code, std::string_view detail) {
  return reply(status, json{{"error", code}, {"detail", detail}});
}

json parse_body(const Request& req) {
  try {
    auto j = json::parse(req.body.empty() ? std::string("{}") : req.body);
    if (!j.is_object()) fail(400, "bad_request", "body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    fail(400, "bad_request", e.what());
  }
}

template <typename T>
T field(const json& body, const char* key) {
  if (!body.contains(key)) fail(400, "bad_request", std::string("missing field ") + key);
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    fail(400, "bad_request", std::string("bad field ") + key);
  }
}

bool matches(const std::vector<std::string>& pattern, const std::vector<std::string>& path,
             std::vector<std::string>& params) {
  if (pattern.size() != path.size()) return false;
  params.clear();
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == "{}") {
      params.push_back(path[i]);
    } else if (pattern[i] != path[i]) {
      return false;
    }
  }
  return true;
}

}  // namespace

struct Api::Principal {
  enum class Kind { Anonymous, User, Testbed } kind = Kind::Anonymous;
  std::string id;
  bool admin = false;

  bool user() const { return kind == Kind::User; }
};

struct Api::Route {
  std::string method;
  std::string pattern;
  std::vector<std::string> segments;
  Handler handler;
};

Api::Api(store::Store& store, std::shared_ptr<const Clock> clock, ApiOptions opts)
    : store_(store), clock_(std::move(clock)), opts_(std::move(opts)) {
  add("GET", "/health", [](const Principal&, const Params&, const Request&) {
    return reply(200, json{{"status", "ok"}});
  });
  add("POST", "/auth/login",
      [this](const Principal&, const Params&, const Request& r) { return login(r); });
  add("POST", "/users",
      [this](const Principal& p, const Params&, const Request& r) { return create_user(p, r); });
  add("POST", "/courses",
      [this](const Principal& p, const Params&, const Request& r) { return create_course(p, r); });
  add("GET", "/courses/{}",
      [this](const Principal& p, const Params& a, const Request&) { return get_course(p, a[0]); });
  add("POST", "/courses/{}/roster", [this](const Principal& p, const Params& a, const Request& r) {
    return add_roster(p, a[0], r);
  });
  add("POST", "/courses/{}/assignments",
      [this](const Principal& p, const Params& a, const Request& r) {
        return create_assignment(p, a[0], r);
      });
  add("GET", "/assignments/{}", [this](const Principal& p, const Params& a, const Request&) {
    return get_assignment(p, a[0]);
  });
  add("PATCH", "/assignments/{}", [this](const Principal& p, const Params& a, const Request& r) {
    return patch_assignment(p, a[0], r);
  });
  add("POST", "/assignments/{}/testcases",
      [this](const Principal& p, const Params& a, const Request& r) {
        return add_test_case(p, a[0], r);
      });
  add("POST", "/assignments/{}/submissions",
      [this](const Principal& p, const Params& a, const Request& r) { return submit(p, a[0], r); });
  add("GET", "/assignments/{}/submissions",
      [this](const Principal& p, const Params& a, const Request&) {
        return list_submissions(p, a[0]);
      });
  add("GET", "/assignments/{}/overview",
      [this](const Principal& p, const Params& a, const Request& r) {
        return overview(p, a[0], r);
      });
  add("GET", "/submissions/{}", [this](const Principal& p, const Params& a, const Request&) {
    return get_submission(p, a[0]);
  });
  add("GET", "/submissions/{}/status", [this](const Principal& p, const Params& a,
                                              const Request&) { return submission_status(p, a[0]); });
  add("GET", "/submissions/{}/artifacts/{}/{}",
      [this](const Principal& p, const Params& a, const Request&) { return get_artifact(p, a); });
  add("POST", "/testbeds",
      [this](const Principal& p, const Params&, const Request& r) { return issue_testbed(p, r); });
  add("POST", "/testbeds/heartbeat",
      [this](const Principal& p, const Params&, const Request& r) { return heartbeat(p, r); });
  add("GET", "/testbeds",
      [this](const Principal& p, const Params&, const Request&) { return list_testbeds(p); });
}

Api::~Api() = default;

void Api::add(std::string method, std::string pattern, Handler h) {
  auto segments = net::split_path(pattern);
  routes_.push_back({std::move(method), std::move(pattern), std::move(segments), std::move(h)});
}

std::vector<Endpoint> Api::endpoints() const {
  std::vector<Endpoint> out;
  for (const auto& r : routes_) out.push_back({r.method, r.pattern});
  return out;
}

Api::Principal Api::resolve(const Request& req) {
  Principal p;
  const auto token = net::bearer_token(req.authorization);
  if (!token) return p;
  if (const auto uid = store_.session_user(*token, clock_->now())) {
    if (const auto u = store_.user(*uid)) {
      p.kind = Principal::Kind::User;
      p.id = u->id;
      p.admin = u->admin;
      return p;
    }
  }
  if (const auto tb = store_.testbed_for_token(*token)) {
    p.kind = Principal::Kind::Testbed;
    p.id = *tb;
  }
  return p;
}

Response Api::handle(const Request& req) {
  const auto path = net::split_path(req.path);
  std::vector<std::string> params;
  bool path_known = false;
  for (const auto& route : routes_) {
    if (!matches(route.segments, path, params)) continue;
    path_known = true;
    if (route.method != req.method) continue;
    try {
      return route.handler(resolve(req), params, req);
    } catch (const ApiError& e) {
      return error(e.status, e.code, e.detail);
    } catch (const store::Conflict& e) {
      return error(409, "conflict", e.what());
    } catch (const InvalidArgument& e) {
      return error(400, "bad_request", e.what());
    } catch (const std::invalid_argument& e) {
      return error(400, "bad_request", e.what());
    } catch (const std::exception& e) {
      std::cerr << "server: " << req.method << " " << req.path << ": " << e.what() << "\n";
      return error(500, "internal", "internal error");
    }
  }
  if (path_known) return error(405, "method_not_allowed", req.method + " " + req.path);
  return error(404, "not_found", "no route for " + req.path);
}

// ---------------------------------------------------------------------------
// Access helpers

namespace {

void require_user(bool is_user) {
  if (!is_user) fail(401, "unauthorized", "login required");
}

}  // namespace

Response Api::login(const Request& req) {
  const auto body = parse_body(req);
  const auto user = field<std::string>(body, "user");
  const auto password = field<std::string>(body, "password");
  if (!store_.verify_password(user, password)) {
    return error(401, "invalid_credentials", "unknown user or wrong password");
  }
  const Instant expires = clock_->now() + opts_.session_ttl;
  const auto token = store_.create_session(user, expires);
  return reply(200, json{{"token", token}, {"user", user}, {"expires_at", format_rfc3339(expires)}});
}

Response Api::create_user(const Principal& p, const Request& req) {
  require_user(p.user());
  if (!p.admin) fail(403, "forbidden", "admin only");
  const auto body = parse_body(req);
  const auto id = field<std::string>(body, "id");
  const auto password = field<std::string>(body, "password");
  if (id.empty() || password.empty()) fail(400, "bad_request", "id and password required");
  store_.create_user(id, body.value("name", id), password, body.value("admin", false));
  return reply(201, json{{"id", id}});
}

Response Api::create_course(const Principal& p, const Request& req) {
  require_user(p.user());
  if (!p.admin) fail(403, "forbidden", "admin only");
  const auto body = parse_body(req);
  Course c;
  c.id = field<std::string>(body, "id");
  c.title = body.value("title", c.id);
  if (c.id.empty()) fail(400, "bad_request", "course id required");
  store_.create_course(c);
  return reply(201, json{{"id", c.id}});
}

Response Api::get_course(const Principal& p, const std::string& id) {
  require_user(p.user());
  const auto c = store_.course(id);
  if (!c) fail(404, "not_found", "unknown course");
  const auto role = store_.role_in(id, p.id);
  if (!p.admin && !role) fail(403, "forbidden", "not a member of this course");
  json body{{"id", c->id}, {"title", c->title}};
  if (p.admin || role == Role::Instructor) {
    json roster = json::array();
    for (const auto& r : c->roster) roster.push_back({{"user_id", r.user_id}, {"role", to_string(r.role)}});
    body["roster"] = roster;
  }
  return reply(200, body);
}

Response Api::add_roster(const Principal& p, const std::string& id, const Request& req) {
  require_user(p.user());
  if (!store_.course(id)) fail(404, "not_found", "unknown course");
  if (!p.admin && store_.role_in(id, p.id) != Role::Instructor) {
    fail(403, "forbidden", "instructor or admin only");
  }
  const auto body = parse_body(req);
  const auto user = field<std::string>(body, "user_id");
  const Role role = parse_role(field<std::string>(body, "role"));
  if (!store_.user(user)) fail(404, "not_found", "unknown user");
  store_.set_role(id, user, role);
  return reply(200, json{{"course_id", id}, {"user_id", user}, {"role", to_string(role)}});
}

Response Api::create_assignment(const Principal& p, const std::string& course,
                                const Request& req) {
  require_user(p.user());
  if (!store_.course(course)) fail(404, "not_found", "unknown course");
  if (store_.role_in(course, p.id) != Role::Instructor) fail(403, "forbidden", "instructor only");
  const auto body = parse_body(req);
  Assignment a;
  a.course_id = course;
  a.statement = body.value("statement", std::string());
  a.dut_profile = body.value("dut_profile", a.dut_profile);
  dut::profile(a.dut_profile);
  a.deadline = parse_rfc3339(field<std::string>(body, "deadline"));
  const auto id = store_.create_assignment(a);
  return reply(201, json{{"id", id}});
}

Response Api::get_assignment(const Principal& p, const std::string& id) {
  require_user(p.user());
  const auto a = store_.assignment(id);
  if (!a) fail(404, "not_found", "unknown assignment");
  const auto role = store_.role_in(a->course_id, p.id);
  if (!role) fail(403, "forbidden", "not a member of this course");
  const bool after = clock_->now() >= a->deadline;
  json tcs = json::array();
  for (const auto& tc : store_.test_cases(id)) {
    const auto access = entry_access(*role, tc.visibility, after);
    if (!access.listed) continue;
    if (access.details) {
      tcs.push_back(tc);
    } else {
      tcs.push_back({{"id", tc.id}, {"visibility", to_string(tc.visibility)}, {"weight", tc.weight}});
    }
  }
  return reply(200, json{{"id", a->id},
                         {"course_id", a->course_id},
                         {"statement", a->statement},
                         {"dut_profile", a->dut_profile},
                         {"deadline", format_rfc3339(a->deadline)},
                         {"test_cases", tcs}});
}

Response Api::patch_assignment(const Principal& p, const std::string& id, const Request& req) {
  require_user(p.user());
  const auto a = store_.assignment(id);
  if (!a) fail(404, "not_found", "unknown assignment");
  if (store_.role_in(a->course_id, p.id) != Role::Instructor) {
    fail(403, "forbidden", "instructor only");
  }
  const auto body = parse_body(req);
  const Instant deadline = parse_rfc3339(field<std::string>(body, "deadline"));
  store_.set_deadline(id, deadline);
  return reply(200, json{{"id", id}, {"deadline", format_rfc3339(deadline)}});
}

Response Api::add_test_case(const Principal& p, const std::string& id, const Request& req) {
  require_user(p.user());
  const auto a = store_.assignment(id);
  if (!a) fail(404, "not_found", "unknown assignment");
  if (store_.role_in(a->course_id, p.id) != Role::Instructor) {
    fail(403, "forbidden", "instructor only");
  }
  TestCase tc;
  try {
    tc = parse_body(req).get<TestCase>();
  } catch (const json::exception& e) {
    fail(400, "bad_request", e.what());
  }
  validate(tc);
  try {
    dut::parse_pin(tc.capture.pin, dut::profile(a->dut_profile));
  } catch (const std::exception&) {
    fail(400, "bad_request", "pin " + tc.capture.pin + " does not exist on " + a->dut_profile);
  }
  store_.add_test_case(id, tc);
  return reply(201, json{{"id", tc.id}});
}

Response Api::submit(const Principal& p, const std::string& id, const Request& req) {
  require_user(p.user());
  const auto a = store_.assignment(id);
  if (!a) fail(404, "not_found", "unknown assignment");
  if (store_.role_in(a->course_id, p.id) != Role::Student) fail(403, "forbidden", "student only");
  const Instant now = clock_->now();
  if (now >= a->deadline) fail(403, "deadline_passed", "deadline " + format_rfc3339(a->deadline));
  if (req.body.size() > kMaxSourceBytes + 4096) fail(413, "payload_too_large", "source too large");
  const auto body = parse_body(req);
  Submission s;
  s.assignment_id = id;
  s.student_id = p.id;
  s.source = field<std::string>(body, "source");
  s.submitted_at = now;
  if (s.source.size() > kMaxSourceBytes) fail(413, "payload_too_large", "source exceeds 64 KiB");
  if (a->test_case_ids.empty()) fail(409, "not_ready", "assignment has no test cases");
  const auto sid = store_.insert_submission(s);
  return reply(202, json{{"id", sid}, {"state", "pending"}, {"submitted_at", format_rfc3339(now)}});
}

Response Api::list_submissions(const Principal& p, const std::string& id) {
  require_user(p.user());
  const auto a = store_.assignment(id);
  if (!a) fail(404, "not_found", "unknown assignment");
  const auto role = store_.role_in(a->course_id, p.id);
  if (!role) fail(403, "forbidden", "not a member of this course");
  const auto tcs = store_.test_cases(id);
  const Instant now = clock_->now();
  const auto rows = role == Role::Instructor ? store_.submissions(id)
                                             : store_.submissions(id, p.id);
  json out = json::array();
  for (const auto& r : rows) {
    json item{{"id", r.sub.id},
              {"student_id", r.sub.student_id},
              {"submitted_at", format_rfc3339(r.sub.submitted_at)},
              {"state", to_string(r.sub.state)}};
    if (r.graded_at) item["graded_at"] = format_rfc3339(*r.graded_at);
    if (r.sub.result) {
      item["total"] = visible_view(*r.sub.result, tcs, *role, now, a->deadline).total;
    }
    out.push_back(std::move(item));
  }
  return reply(200, out);
}

Response Api::overview(const Principal& p, const std::string& id, const Request& req) {
  require_user(p.user());
  const auto a = store_.assignment(id);
  if (!a) fail(404, "not_found", "unknown assignment");
  if (store_.role_in(a->course_id, p.id) != Role::Instructor) {
    fail(403, "forbidden", "instructor only");
  }
  const auto q = req.query.find("include_hidden");
  const bool include_hidden = q != req.query.end() && (q->second == "1" || q->second == "true");
  const auto tcs = store_.test_cases(id);
  const Instant now = clock_->now();
  const Role scoring_role = include_hidden ? Role::Instructor : Role::Student;

  std::map<std::string, json> series;
  if (const auto c = store_.course(a->course_id)) {
    for (const auto& r : c->roster) {
      if (r.role == Role::Student) series[r.user_id] = json::array();
    }
  }
  for (const auto& r : store_.submissions(id)) {
    if (r.sub.state != SubmissionState::Graded || !r.sub.result) continue;
    const double score = visible_view(*r.sub.result, tcs, scoring_role, now, a->deadline).total;
    auto& points = series[r.sub.student_id];
    if (points.is_null()) points = json::array();
    points.push_back({{"submission_id", r.sub.id},
                      {"submitted_at", format_rfc3339(r.sub.submitted_at)},
                      {"score", score}});
  }
  json students = json::array();
  for (auto& [student, points] : series) {
    students.push_back({{"student_id", student}, {"points", std::move(points)}});
  }
  return reply(200, json{{"assignment_id", id},
                         {"include_hidden", include_hidden},
                         {"students", students}});
}

struct Api::Access {
  store::SubmissionRecord rec;
  Assignment assignment;
  Role role;
};

Api::Access Api::load_submission(const Principal& p, const std::string& id) {
  require_user(p.user());
  auto rec = store_.submission(id);
  if (!rec) fail(404, "not_found", "unknown submission");
  auto asg = store_.assignment(rec->sub.assignment_id);
  if (!asg) fail(404, "not_found", "unknown assignment");
  const auto role = store_.role_in(asg->course_id, p.id);
  const bool allowed = role == Role::Instructor ||
                       (role == Role::Student && rec->sub.student_id == p.id);
  if (!allowed) fail(403, "forbidden", "not your submission");
  return {std::move(*rec), std::move(*asg), *role};
}

Response Api::get_submission(const Principal& p, const std::string& id) {
  const auto s = load_submission(p, id);
  const auto& sub = s.rec.sub;
  if (sub.state == SubmissionState::Failed) {
    return error(409, "grading_failed",
                 s.role == Role::Instructor ? sub.failure.value_or("failed")
                                            : "grading failed, instructor notified");
  }
  if (sub.state != SubmissionState::Graded || !sub.result) {
    return error(409, "not_graded_yet", std::string(to_string(sub.state)));
  }
  const auto tcs = store_.test_cases(s.assignment.id);
  const auto view = visible_view(*sub.result, tcs, s.role, clock_->now(), s.assignment.deadline);
  json body{{"id", sub.id},
            {"assignment_id", sub.assignment_id},
            {"student_id", sub.student_id},
            {"submitted_at", format_rfc3339(sub.submitted_at)},
            {"state", to_string(sub.state)},
            {"report", view}};
  if (s.rec.graded_at) body["graded_at"] = format_rfc3339(*s.rec.graded_at);
  return reply(200, body);
}

Response Api::submission_status(const Principal& p, const std::string& id) {
  const auto s = load_submission(p, id);
  const auto& sub = s.rec.sub;
  json body{{"id", sub.id},
            {"state", to_string(sub.state)},
            {"submitted_at", format_rfc3339(sub.submitted_at)}};
  if (s.rec.graded_at) body["graded_at"] = format_rfc3339(*s.rec.graded_at);
  if (sub.state == SubmissionState::Failed && s.role == Role::Instructor) {
    body["failure"] = sub.failure.value_or("");
  }
  return reply(200, body);
}

Response Api::get_artifact(const Principal& p, const Params& params) {
  const auto s = load_submission(p, params[0]);
  const auto& tc_id = params[1];
  const auto& file = params[2];
  const auto tcs = store_.test_cases(s.assignment.id);
  const auto tc = std::find_if(tcs.begin(), tcs.end(), [&](const TestCase& t) { return t.id == tc_id; });
  // Unlisted cases look exactly like unknown ones.
  if (tc == tcs.end()) fail(404, "not_found", "no such artifact");
  const bool after = clock_->now() >= s.assignment.deadline;
  const auto access = entry_access(s.role, tc->visibility, after);
  if (!access.listed) fail(404, "not_found", "no such artifact");
  if (!access.details) fail(403, "forbidden", "artifacts of this test case are not visible");
  const auto content = store_.artifact(s.rec.sub.id, tc_id, file);
  if (!content) fail(404, "not_found", "no such artifact");
  return {200, *content, "text/plain; charset=utf-8"};
}

Response Api::issue_testbed(const Principal& p, const Request& req) {
  require_user(p.user());
  if (!p.admin) fail(403, "forbidden", "admin only");
  const auto body = parse_body(req);
  const auto id = field<std::string>(body, "id");
  const auto token = store_.issue_testbed(id);
  return reply(201, json{{"id", id}, {"token", token}});
}

Response Api::heartbeat(const Principal& p, const Request& req) {
  if (p.kind != Principal::Kind::Testbed) fail(401, "unauthorized", "testbed token required");
  const auto body = parse_body(req);
  const auto id = field<std::string>(body, "testbed_id");
  if (id != p.id) fail(403, "forbidden", "token belongs to another testbed");
  const auto hash = field<std::string>(body, "config_hash");
  field<std::string>(body, "endpoint");
  dut::profile(field<std::string>(body, "dut_profile"));
  const bool changed = store_.record_heartbeat(id, body.dump(), hash, clock_->now());
  if (changed) std::cerr << "testbed " << id << ": config hash now " << hash << "\n";
  if (opts_.on_heartbeat) opts_.on_heartbeat();
  return reply(200, json{{"ack", true}, {"config_changed", changed}});
}

Response Api::list_testbeds(const Principal& p) {
  if (p.kind == Principal::Kind::Anonymous) fail(401, "unauthorized", "login required");
  const Instant now = clock_->now();
  json out = json::array();
  for (const auto& tb : store_.testbeds()) {
    json item{{"id", tb.id}, {"online", false}};
    if (!tb.descriptor_json.empty()) {
      auto d = json::parse(tb.descriptor_json);
      const double h = d.value("heartbeat_interval_s", 10.0);
      item["online"] = now - *tb.last_heartbeat <= std::chrono::milliseconds(
                                                        static_cast<int64_t>(3000 * h));
      item["last_heartbeat"] = format_rfc3339(*tb.last_heartbeat);
      item["descriptor"] = std::move(d);
    }
    out.push_back(std::move(item));
  }
  return reply(200, out);
}

std::vector<sched::TestbedTarget> Api::online_testbeds() {
  const Instant now = clock_->now();
  std::vector<sched::TestbedTarget> out;
  for (const auto& tb : store_.testbeds()) {
    if (tb.descriptor_json.empty() || !tb.last_heartbeat) continue;
    const auto d = json::parse(tb.descriptor_json);
    const double h = d.value("heartbeat_interval_s", 10.0);
    if (now - *tb.last_heartbeat > std::chrono::milliseconds(static_cast<int64_t>(3000 * h))) {
      continue;
    }
    out.push_back({tb.id, d.value("dut_profile", ""), d.value("endpoint", ""), tb.token});
  }
  return out;
}

// ---------------------------------------------------------------------------

Server::Server(ServerConfig cfg, std::shared_ptr<const Clock> clock)
    : cfg_(std::move(cfg)), clock_(std::move(clock)) {
  store_ = std::make_unique<store::Store>(cfg_.db_path, cfg_.pbkdf2_iterations);
  if (!cfg_.admin_password.empty() && !store_->user(cfg_.admin_user)) {
    store_->create_user(cfg_.admin_user, cfg_.admin_user, cfg_.admin_password, true);
  }
  scheduler_ = std::make_unique<sched::Scheduler>(*store_, clock_, cfg_.scheduler);
  ApiOptions opts;
  opts.on_heartbeat = [this] { sync_workers(); };
  api_ = std::make_unique<Api>(*store_, clock_, std::move(opts));
}

Server::~Server() { stop(); }

std::string Server::url() const { return "http://" + cfg_.host + ":" + std::to_string(port_); }

void Server::sync_workers() {
  {
    std::lock_guard lock(mu_);
    if (stopping_ || !started_) return;
  }
  scheduler_->sync(api_->online_testbeds());
}

void Server::maintain() {
  scheduler_->reap();
  sync_workers();
}

int Server::start() {
  http_ = std::make_unique<httplib::Server>();
  const int threads = cfg_.http_threads;
  http_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  http_->set_keep_alive_timeout(2);
  http_->set_payload_max_length(kMaxSourceBytes * 4);
  const auto adapter = [this](const httplib::Request& hreq, httplib::Response& hres) {
    Request req;
    req.method = hreq.method;
    req.path = hreq.path;
    for (const auto& [k, v] : hreq.params) req.query[k] = v;
    req.authorization = hreq.get_header_value("Authorization");
    req.body = hreq.body;
    const auto res = api_->handle(req);
    hres.status = res.status;
    if (res.status != 204) hres.set_content(res.body, res.content_type);
  };
  const std::string any = R"(/.*)";
  http_->Get(any, adapter);
  http_->Post(any, adapter);
  http_->Patch(any, adapter);
  http_->Put(any, adapter);
  http_->Delete(any, adapter);
  http_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(json{{"error", "http_" + std::to_string(res.status)}, {"detail", ""}}.dump(),
                      "application/json");
    }
  });
  port_ = net::bind_server(*http_, cfg_.host, cfg_.port);
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  {
    std::lock_guard lock(mu_);
    started_ = true;
    stopping_ = false;
  }
  maintenance_thread_ = std::thread([this] {
    for (;;) {
      try {
        maintain();
      } catch (const std::exception& e) {
        std::cerr << "maintenance: " << e.what() << "\n";
      }
      std::unique_lock lock(mu_);
      if (cv_.wait_for(lock, cfg_.maintenance_interval, [this] { return stopping_; })) return;
    }
  });
  return port_;
}

void Server::stop() {
  {
    std::lock_guard lock(mu_);
    if (!started_) return;
    stopping_ = true;
    started_ = false;
  }
  cv_.notify_all();
  if (maintenance_thread_.joinable()) maintenance_thread_.join();
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  scheduler_->stop_all();
  http_.reset();
}

}  // namespace embgrader::server
