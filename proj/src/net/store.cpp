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
#include "embgrader/store.hpp"

#include <sqlite3.h>

#include <cstdio>

#include "embgrader/digest.hpp"
#include "embgrader/json_io.hpp"

namespace embgrader::store {

namespace {

constexpr const char* kSchema = R"SQL(
CREATE TABLE IF NOT EXISTS users (
  id TEXT PRIMARY KEY, name TEXT NOT NULL, salt TEXT NOT NULL, hash TEXT NOT NULL,
  iterations INTEGER NOT NULL, admin INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS sessions (
  token_hash TEXT PRIMARY KEY, user_id TEXT NOT NULL, expires_ms INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS courses (id TEXT PRIMARY KEY, title TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS roster (
  course_id TEXT NOT NULL, user_id TEXT NOT NULL, role TEXT NOT NULL,
  PRIMARY KEY (course_id, user_id));
CREATE TABLE IF NOT EXISTS assignments (
  seq INTEGER PRIMARY KEY, id TEXT UNIQUE NOT NULL, course_id TEXT NOT NULL,
  statement TEXT NOT NULL, dut_profile TEXT NOT NULL, deadline_ms INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS test_cases (
  assignment_id TEXT NOT NULL, position INTEGER NOT NULL, id TEXT NOT NULL, json TEXT NOT NULL,
  PRIMARY KEY (assignment_id, id));
CREATE TABLE IF NOT EXISTS submissions (
  seq INTEGER PRIMARY KEY, id TEXT UNIQUE NOT NULL, assignment_id TEXT NOT NULL,
  student_id TEXT NOT NULL, source TEXT NOT NULL, submitted_ms INTEGER NOT NULL,
  state TEXT NOT NULL, testbed TEXT, lease_ms INTEGER, epoch INTEGER NOT NULL,
  attempts INTEGER NOT NULL, failure TEXT, graded_ms INTEGER);
CREATE INDEX IF NOT EXISTS submissions_queue ON submissions (state, submitted_ms, id);
CREATE INDEX IF NOT EXISTS submissions_by_assignment ON submissions (assignment_id, student_id);
CREATE TABLE IF NOT EXISTS grade_reports (
  row INTEGER PRIMARY KEY, submission_id TEXT NOT NULL, json TEXT NOT NULL);
CREATE INDEX IF NOT EXISTS grade_reports_by_submission ON grade_reports (submission_id);
CREATE TABLE IF NOT EXISTS artifacts (
  submission_id TEXT NOT NULL, test_case_id TEXT NOT NULL, file TEXT NOT NULL,
  content BLOB NOT NULL, PRIMARY KEY (submission_id, test_case_id, file));
CREATE TABLE IF NOT EXISTS testbeds (
  id TEXT PRIMARY KEY, token TEXT UNIQUE NOT NULL, descriptor TEXT NOT NULL,
  config_hash TEXT NOT NULL, last_ms INTEGER);
)SQL";

int64_t ms(Instant t) { return t.time_since_epoch().count(); }
Instant instant(int64_t v) { return Instant(std::chrono::milliseconds(v)); }

class Stmt {
 public:
  Stmt(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &st_, nullptr) != SQLITE_OK) {
      throw StoreError(std::string("prepare: ") + sqlite3_errmsg(db));
    }
  }
  ~Stmt() { sqlite3_finalize(st_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int i, std::string_view v) {
    sqlite3_bind_text(st_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Stmt& bind(int i, const std::string& v) { return bind(i, std::string_view(v)); }
  Stmt& bind(int i, const char* v) { return bind(i, std::string_view(v)); }
  Stmt& bind(int i, int64_t v) {
    sqlite3_bind_int64(st_, i, v);
    return *this;
  }
  Stmt& bind(int i, int v) { return bind(i, static_cast<int64_t>(v)); }
  Stmt& bind(int i, uint64_t v) { return bind(i, static_cast<int64_t>(v)); }
  Stmt& bind_null(int i) {
    sqlite3_bind_null(st_, i);
    return *this;
  }
  Stmt& bind_blob(int i, std::string_view v) {
    sqlite3_bind_blob(st_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }

  template <typename... Args>
  Stmt& bind_all(const Args&... args) {
    int i = 0;
    (bind(++i, args), ...);
    return *this;
  }

  // True while a row is available.
  bool step() {
    const int rc = sqlite3_step(st_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    if (rc == SQLITE_CONSTRAINT) throw Conflict(sqlite3_errmsg(db_));
    throw StoreError(std::string("step: ") + sqlite3_errmsg(db_));
  }

  void run() {
    while (step()) {
    }
  }

  bool null(int c) const { return sqlite3_column_type(st_, c) == SQLITE_NULL; }
  int64_t i64(int c) const { return sqlite3_column_int64(st_, c); }
  std::string text(int c) const {
    const auto* p = sqlite3_column_blob(st_, c);
    const int n = sqlite3_column_bytes(st_, c);
    return p ? std::string(static_cast<const char*>(p), static_cast<std::size_t>(n)) : std::string();
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* st_ = nullptr;
};

int changes(sqlite3* db) { return sqlite3_changes(db); }

}  // namespace

class Store::Tx {
 public:
  explicit Tx(Store& s) : s_(s) { s_.exec("BEGIN IMMEDIATE"); }
  ~Tx() {
    if (!done_) {
      try {
        s_.exec("ROLLBACK");
      } catch (...) {
      }
    }
  }
  void commit() {
    s_.exec("COMMIT");
    done_ = true;
  }

 private:
  Store& s_;
  bool done_ = false;
};

Store::Store(const std::string& path, int pbkdf2_iterations) : iterations_(pbkdf2_iterations) {
  if (sqlite3_open_v2(path.c_str(), &db_,
                      SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw StoreError("cannot open " + path + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  exec("PRAGMA journal_mode=WAL");
  exec("PRAGMA synchronous=NORMAL");
  exec("PRAGMA foreign_keys=ON");
  exec(kSchema);
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw StoreError(msg);
  }
}

// ---------------------------------------------------------------------------
// Users and sessions

void Store::create_user(const std::string& id, const std::string& name,
                        const std::string& password, bool admin) {
  if (id.empty()) throw InvalidArgument("user id missing");
  if (password.empty()) throw InvalidArgument("password missing");
  const std::string salt = random_hex(16);
  const std::string hash = pbkdf2_hex(password, salt, iterations_);
  std::lock_guard lock(mu_);
  Stmt(db_, "INSERT INTO users (id, name, salt, hash, iterations, admin) VALUES (?,?,?,?,?,?)")
      .bind_all(id, name, salt, hash, iterations_, admin ? 1 : 0)
      .run();
}

std::optional<UserRecord> Store::user(const std::string& id) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT id, name, admin FROM users WHERE id = ?");
  q.bind_all(id);
  if (!q.step()) return std::nullopt;
  return UserRecord{q.text(0), q.text(1), q.i64(2) != 0};
}

bool Store::verify_password(const std::string& id, const std::string& password) {
  std::string salt, hash;
  int iterations = 0;
  {
    std::lock_guard lock(mu_);
    Stmt q(db_, "SELECT salt, hash, iterations FROM users WHERE id = ?");
    q.bind_all(id);
    if (!q.step()) {
      // Same work as a real check, so timing does not reveal unknown ids.
      pbkdf2_hex(password, "00", iterations_);
      return false;
    }
    salt = q.text(0);
    hash = q.text(1);
    iterations = static_cast<int>(q.i64(2));
  }
  return constant_time_equal(pbkdf2_hex(password, salt, iterations), hash);
}

std::string Store::create_session(const std::string& user_id, Instant expires) {
  const std::string token = random_hex(32);
  std::lock_guard lock(mu_);
  Stmt(db_, "INSERT INTO sessions (token_hash, user_id, expires_ms) VALUES (?,?,?)")
      .bind_all(sha256_hex(token), user_id, ms(expires))
      .run();
  return token;
}

std::optional<std::string> Store::session_user(const std::string& token, Instant now) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT user_id FROM sessions WHERE token_hash = ? AND expires_ms > ?");
  q.bind_all(sha256_hex(token), ms(now));
  if (!q.step()) return std::nullopt;
  return q.text(0);
}

// ---------------------------------------------------------------------------
// Courses

void Store::create_course(const Course& c) {
  std::lock_guard lock(mu_);
  Tx tx(*this);
  Stmt(db_, "INSERT INTO courses (id, title) VALUES (?,?)").bind_all(c.id, c.title).run();
  for (const auto& r : c.roster) {
    Stmt(db_, "INSERT OR REPLACE INTO roster (course_id, user_id, role) VALUES (?,?,?)")
        .bind_all(c.id, r.user_id, to_string(r.role))
        .run();
  }
  tx.commit();
}

std::optional<Course> Store::course(const std::string& id) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT title FROM courses WHERE id = ?");
  q.bind_all(id);
  if (!q.step()) return std::nullopt;
  Course c{id, q.text(0), {}};
  Stmt r(db_, "SELECT user_id, role FROM roster WHERE course_id = ? ORDER BY user_id");
  r.bind_all(id);
  while (r.step()) c.roster.push_back({r.text(0), parse_role(r.text(1))});
  return c;
}

void Store::set_role(const std::string& course_id, const std::string& user_id, Role role) {
  std::lock_guard lock(mu_);
  Stmt(db_, "INSERT OR REPLACE INTO roster (course_id, user_id, role) VALUES (?,?,?)")
      .bind_all(course_id, user_id, to_string(role))
      .run();
}

std::optional<Role> Store::role_in(const std::string& course_id, const std::string& user_id) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT role FROM roster WHERE course_id = ? AND user_id = ?");
  q.bind_all(course_id, user_id);
  if (!q.step()) return std::nullopt;
  return parse_role(q.text(0));
}

// ---------------------------------------------------------------------------
// Assignments and test cases

std::string Store::create_assignment(Assignment a) {
  std::lock_guard lock(mu_);
  Tx tx(*this);
  if (a.id.empty()) {
    Stmt q(db_, "SELECT IFNULL(MAX(seq), 0) + 1 FROM assignments");
    q.step();
    char buf[32];
    std::snprintf(buf, sizeof buf, "asg-%04lld", static_cast<long long>(q.i64(0)));
    a.id = buf;
  }
  Stmt(db_,
       "INSERT INTO assignments (id, course_id, statement, dut_profile, deadline_ms) "
       "VALUES (?,?,?,?,?)")
      .bind_all(a.id, a.course_id, a.statement, a.dut_profile, ms(a.deadline))
      .run();
  tx.commit();
  return a.id;
}

std::optional<Assignment> Store::assignment(const std::string& id) {
  std::lock_guard lock(mu_);
  Stmt q(db_,
         "SELECT course_id, statement, dut_profile, deadline_ms FROM assignments WHERE id = ?");
  q.bind_all(id);
  if (!q.step()) return std::nullopt;
  Assignment a;
  a.id = id;
  a.course_id = q.text(0);
  a.statement = q.text(1);
  a.dut_profile = q.text(2);
  a.deadline = instant(q.i64(3));
  Stmt t(db_, "SELECT id FROM test_cases WHERE assignment_id = ? ORDER BY position");
  t.bind_all(id);
  while (t.step()) a.test_case_ids.push_back(t.text(0));
  return a;
}

void Store::set_deadline(const std::string& assignment_id, Instant deadline) {
  std::lock_guard lock(mu_);
  Stmt(db_, "UPDATE assignments SET deadline_ms = ? WHERE id = ?")
      .bind_all(ms(deadline), assignment_id)
      .run();
}

void Store::add_test_case(const std::string& assignment_id, const TestCase& tc) {
  std::lock_guard lock(mu_);
  Tx tx(*this);
  Stmt q(db_, "SELECT IFNULL(MAX(position), -1) + 1 FROM test_cases WHERE assignment_id = ?");
  q.bind_all(assignment_id);
  q.step();
  const int64_t pos = q.i64(0);
  Stmt(db_, "INSERT INTO test_cases (assignment_id, position, id, json) VALUES (?,?,?,?)")
      .bind_all(assignment_id, pos, tc.id, nlohmann::json(tc).dump())
      .run();
  tx.commit();
}

std::vector<TestCase> Store::test_cases(const std::string& assignment_id) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT json FROM test_cases WHERE assignment_id = ? ORDER BY position");
  q.bind_all(assignment_id);
  std::vector<TestCase> out;
  while (q.step()) out.push_back(nlohmann::json::parse(q.text(0)).get<TestCase>());
  return out;
}

// ---------------------------------------------------------------------------
// Submissions

namespace {

constexpr const char* kSubmissionColumns =
    "id, assignment_id, student_id, source, submitted_ms, state, testbed, lease_ms, epoch, "
    "attempts, failure, graded_ms";

SubmissionRecord read_submission(const Stmt& q) {
  SubmissionRecord r;
  r.sub.id = q.text(0);
  r.sub.assignment_id = q.text(1);
  r.sub.student_id = q.text(2);
  r.sub.source = q.text(3);
  r.sub.submitted_at = instant(q.i64(4));
  r.sub.state = parse_submission_state(q.text(5));
  if (!q.null(6)) r.sub.claim = Claim{q.text(6), instant(q.i64(7))};
  r.claim_epoch = static_cast<uint64_t>(q.i64(8));
  r.attempts = static_cast<int>(q.i64(9));
  if (!q.null(10)) r.sub.failure = q.text(10);
  if (!q.null(11)) r.graded_at = instant(q.i64(11));
  return r;
}

}  // namespace

std::string Store::insert_submission(const Submission& s) {
  std::lock_guard lock(mu_);
  Tx tx(*this);
  Stmt q(db_, "SELECT IFNULL(MAX(seq), 0) + 1 FROM submissions");
  q.step();
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub-%06lld", static_cast<long long>(q.i64(0)));
  const std::string id = buf;
  Stmt(db_,
       "INSERT INTO submissions (id, assignment_id, student_id, source, submitted_ms, state, "
       "epoch, attempts) VALUES (?,?,?,?,?,'pending',0,0)")
      .bind_all(id, s.assignment_id, s.student_id, s.source, ms(s.submitted_at))
      .run();
  tx.commit();
  return id;
}

std::optional<SubmissionRecord> Store::load_submission(const std::string& id) {
  Stmt q(db_, (std::string("SELECT ") + kSubmissionColumns + " FROM submissions WHERE id = ?").c_str());
  q.bind_all(id);
  if (!q.step()) return std::nullopt;
  auto r = read_submission(q);
  if (r.sub.state == SubmissionState::Graded) {
    Stmt g(db_, "SELECT json FROM grade_reports WHERE submission_id = ? ORDER BY row LIMIT 1");
    g.bind_all(id);
    if (g.step()) r.sub.result = nlohmann::json::parse(g.text(0)).get<GradeReport>();
  }
  return r;
}

std::optional<SubmissionRecord> Store::submission(const std::string& id) {
  std::lock_guard lock(mu_);
  return load_submission(id);
}

std::vector<SubmissionRecord> Store::submissions(const std::string& assignment_id,
                                                 const std::optional<std::string>& student,
                                                 bool with_reports) {
  std::vector<std::string> ids;
  std::lock_guard lock(mu_);
  if (!with_reports) {
    std::string sql = std::string("SELECT ") + kSubmissionColumns +
                      " FROM submissions WHERE assignment_id = ?" +
                      (student ? " AND student_id = ?" : "") + " ORDER BY submitted_ms, id";
    Stmt q(db_, sql.c_str());
    q.bind(1, assignment_id);
    if (student) q.bind(2, *student);
    std::vector<SubmissionRecord> out;
    while (q.step()) out.push_back(read_submission(q));
    return out;
  }
  if (student) {
    Stmt q(db_,
           "SELECT id FROM submissions WHERE assignment_id = ? AND student_id = ? "
           "ORDER BY submitted_ms, id");
    q.bind_all(assignment_id, *student);
    while (q.step()) ids.push_back(q.text(0));
  } else {
    Stmt q(db_, "SELECT id FROM submissions WHERE assignment_id = ? ORDER BY submitted_ms, id");
    q.bind_all(assignment_id);
    while (q.step()) ids.push_back(q.text(0));
  }
  std::vector<SubmissionRecord> out;
  for (const auto& id : ids) out.push_back(*load_submission(id));
  return out;
}

void Store::write_submission(const SubmissionRecord& before, const SubmissionRecord& after) {
  Stmt u(db_,
         "UPDATE submissions SET state = ?, testbed = ?, lease_ms = ?, epoch = ?, attempts = ?, "
         "failure = ?, graded_ms = ? WHERE id = ? AND state = ? AND epoch = ?");
  u.bind(1, to_string(after.sub.state));
  if (after.sub.claim) {
    u.bind(2, after.sub.claim->testbed);
    u.bind(3, ms(after.sub.claim->lease_expiry));
  } else {
    u.bind_null(2);
    u.bind_null(3);
  }
  u.bind(4, after.claim_epoch);
  u.bind(5, after.attempts);
  if (after.sub.failure) {
    u.bind(6, *after.sub.failure);
  } else {
    u.bind_null(6);
  }
  if (after.graded_at) {
    u.bind(7, ms(*after.graded_at));
  } else {
    u.bind_null(7);
  }
  u.bind(8, before.sub.id);
  u.bind(9, to_string(before.sub.state));
  u.bind(10, before.claim_epoch);
  u.run();
  if (changes(db_) != 1) throw StoreError("conditional update of " + before.sub.id + " lost");
}

std::optional<SubmissionRecord> Store::claim_next_pending(const std::string& testbed,
                                                          const std::string& dut_profile,
                                                          Instant lease_expiry) {
  std::lock_guard lock(mu_);
  Tx tx(*this);
  Stmt q(db_,
         "SELECT s.id FROM submissions s JOIN assignments a ON a.id = s.assignment_id "
         "WHERE s.state = 'pending' AND a.dut_profile = ? ORDER BY s.submitted_ms, s.id LIMIT 1");
  q.bind_all(dut_profile);
  if (!q.step()) return std::nullopt;
  const auto before = load_submission(q.text(0));
  SubmissionRecord after = *before;
  after.sub = transition(before->sub, event::ClaimFor{testbed, lease_expiry});
  after.claim_epoch = before->claim_epoch + 1;
  write_submission(*before, after);
  tx.commit();
  return after;
}

bool Store::apply(const std::string& id, uint64_t epoch, const LifecycleEvent& ev,
                  const std::vector<ArtifactSet>& artifacts, Instant at) {
  std::lock_guard lock(mu_);
  Tx tx(*this);
  const auto before = load_submission(id);
  if (!before) throw InvalidArgument("no submission " + id);
  if (before->claim_epoch != epoch) return false;

  SubmissionRecord after = *before;
  try {
    after.sub = transition(before->sub, ev);
  } catch (const StaleClaim&) {
    return false;
  }
  if (std::holds_alternative<event::ClaimFor>(ev) ||
      std::holds_alternative<event::LeaseExpired>(ev)) {
    ++after.claim_epoch;
  }
  if (const auto* done = std::get_if<event::Complete>(&ev)) {
    after.graded_at = at;
    Stmt(db_, "INSERT INTO grade_reports (submission_id, json) VALUES (?,?)")
        .bind_all(id, canonical(done->report))
        .run();
    for (const auto& set : artifacts) {
      for (const auto& [file, content] : set.files) {
        Stmt ins(db_,
                 "INSERT OR REPLACE INTO artifacts (submission_id, test_case_id, file, content) "
                 "VALUES (?,?,?,?)");
        ins.bind_all(id, set.test_case_id, file);
        ins.bind_blob(4, content);
        ins.run();
      }
    }
  }
  write_submission(*before, after);
  tx.commit();
  return true;
}

bool Store::renew_lease(const std::string& id, const std::string& testbed, uint64_t epoch,
                        Instant lease_expiry) {
  std::lock_guard lock(mu_);
  Stmt(db_,
       "UPDATE submissions SET lease_ms = ? WHERE id = ? AND testbed = ? AND epoch = ? "
       "AND state IN ('claimed', 'executing')")
      .bind_all(ms(lease_expiry), id, testbed, epoch)
      .run();
  return changes(db_) == 1;
}

RequeueOutcome Store::requeue_or_fail(const std::string& id, const std::string& testbed,
                                      uint64_t epoch, const std::string& reason,
                                      int max_retries, bool count_attempt) {
  std::lock_guard lock(mu_);
  Tx tx(*this);
  const auto before = load_submission(id);
  if (!before || before->claim_epoch != epoch || !before->sub.claim ||
      before->sub.claim->testbed != testbed) {
    return RequeueOutcome::Lost;
  }
  SubmissionRecord after = *before;
  RequeueOutcome outcome = RequeueOutcome::Requeued;
  if (count_attempt && before->sub.state == SubmissionState::Executing) {
    after.attempts = before->attempts + 1;
    if (after.attempts > max_retries) {
      after.sub = transition(before->sub, event::Fail{testbed, reason});
      outcome = RequeueOutcome::Failed;
    }
  }
  if (outcome == RequeueOutcome::Requeued) {
    after.sub = transition(before->sub, event::LeaseExpired{});
    ++after.claim_epoch;
  }
  write_submission(*before, after);
  tx.commit();
  return outcome;
}

int Store::reap_expired(Instant now) {
  std::lock_guard lock(mu_);
  Tx tx(*this);
  std::vector<std::string> ids;
  {
    Stmt q(db_,
           "SELECT id FROM submissions WHERE state IN ('claimed', 'executing') AND lease_ms < ?");
    q.bind_all(ms(now));
    while (q.step()) ids.push_back(q.text(0));
  }
  for (const auto& id : ids) {
    const auto before = load_submission(id);
    SubmissionRecord after = *before;
    after.sub = transition(before->sub, event::LeaseExpired{});
    ++after.claim_epoch;
    write_submission(*before, after);
  }
  tx.commit();
  return static_cast<int>(ids.size());
}

std::optional<std::string> Store::artifact(const std::string& submission_id,
                                           const std::string& test_case_id,
                                           const std::string& file) {
  std::lock_guard lock(mu_);
  Stmt q(db_,
         "SELECT content FROM artifacts WHERE submission_id = ? AND test_case_id = ? AND file = ?");
  q.bind_all(submission_id, test_case_id, file);
  if (!q.step()) return std::nullopt;
  return q.text(0);
}

int Store::report_rows(const std::string& submission_id) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT COUNT(*) FROM grade_reports WHERE submission_id = ?");
  q.bind_all(submission_id);
  q.step();
  return static_cast<int>(q.i64(0));
}

int Store::total_report_rows() {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT COUNT(*) FROM grade_reports");
  q.step();
  return static_cast<int>(q.i64(0));
}

// ---------------------------------------------------------------------------
// Testbeds

std::string Store::issue_testbed(const std::string& id) {
  if (id.empty()) throw InvalidArgument("testbed id missing");
  const std::string token = random_hex(32);
  std::lock_guard lock(mu_);
  Stmt(db_, "INSERT INTO testbeds (id, token, descriptor, config_hash) VALUES (?,?,'','')")
      .bind_all(id, token)
      .run();
  return token;
}

std::optional<std::string> Store::testbed_for_token(const std::string& token) {
  std::vector<std::pair<std::string, std::string>> rows;
  {
    std::lock_guard lock(mu_);
    Stmt q(db_, "SELECT id, token FROM testbeds");
    while (q.step()) rows.emplace_back(q.text(0), q.text(1));
  }
  for (const auto& [id, t] : rows) {
    if (constant_time_equal(t, token)) return id;
  }
  return std::nullopt;
}

bool Store::record_heartbeat(const std::string& id, const std::string& descriptor_json,
                             const std::string& config_hash, Instant at) {
  std::lock_guard lock(mu_);
  Tx tx(*this);
  Stmt q(db_, "SELECT config_hash FROM testbeds WHERE id = ?");
  q.bind_all(id);
  if (!q.step()) throw InvalidArgument("unknown testbed " + id);
  const std::string old = q.text(0);
  Stmt(db_, "UPDATE testbeds SET descriptor = ?, config_hash = ?, last_ms = ? WHERE id = ?")
      .bind_all(descriptor_json, config_hash, ms(at), id)
      .run();
  tx.commit();
  return !old.empty() && old != config_hash;
}

std::vector<TestbedRecord> Store::testbeds() {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT id, token, descriptor, config_hash, last_ms FROM testbeds ORDER BY id");
  std::vector<TestbedRecord> out;
  while (q.step()) {
    TestbedRecord r{q.text(0), q.text(1), q.text(2), q.text(3), std::nullopt};
    if (!q.null(4)) r.last_heartbeat = instant(q.i64(4));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace embgrader::store
