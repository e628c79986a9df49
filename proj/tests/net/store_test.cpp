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

#include <atomic>
#include <barrier>
#include <fstream>
#include <sstream>
#include <thread>

#include "embgrader/store.hpp"
#include "support.hpp"

using namespace embgrader;
using namespace embgrader::testing;
using store::RequeueOutcome;

namespace {

Instant lease_at(int64_t ms) { return at(ms); }

}  // namespace

TEST_CASE("claim is FIFO by submitted-at with id as tiebreak") {
  World w;
  const auto s1 = w.submit("alice", at(1000));
  const auto s2 = w.submit("bob", at(2000));
  const auto s3 = w.submit("bob", at(1000));
  std::vector<std::string> order;
  while (auto r = w.store.claim_next_pending("tb", "dut-v1", lease_at(60'000))) {
    order.push_back(r->sub.id);
  }
  CHECK(order == std::vector<std::string>{s1, s3, s2});
}

TEST_CASE("empty queue and incompatible profile claim nothing") {
  World w;
  CHECK_FALSE(w.store.claim_next_pending("tb", "dut-v1", lease_at(1)).has_value());
  w.submit("alice", at(0));
  CHECK_FALSE(w.store.claim_next_pending("tb", "dut-v2", lease_at(1)).has_value());
  CHECK(w.store.claim_next_pending("tb", "dut-v1", lease_at(1)).has_value());
}

TEST_CASE("two racing workers: exactly one claims, over 1000 races") {
  World w;
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    w.submit("alice", at(i));
    std::atomic<int> wins{0};
    std::barrier sync(2);
    auto racer = [&](const char* tb) {
      sync.arrive_and_wait();
      if (w.store.claim_next_pending(tb, "dut-v1", lease_at(1'000'000))) ++wins;
    };
    std::thread a(racer, "tb-a");
    std::thread b(racer, "tb-b");
    a.join();
    b.join();
    bad += wins != 1;
  }
  CHECK(bad == 0);
}

TEST_CASE("a stale epoch cannot write") {
  World w;
  const auto id = w.submit("alice", at(0));
  const auto rec = w.store.claim_next_pending("tb", "dut-v1", lease_at(100));
  REQUIRE(rec);
  CHECK(w.store.apply(id, rec->claim_epoch, event::StartExecution{"tb"}));
  CHECK(w.store.reap_expired(at(200)) == 1);
  CHECK_FALSE(w.store.apply(id, rec->claim_epoch,
                            event::Complete{"tb", uniform_report(w.store.test_cases(w.asg), 100)}));
  CHECK(w.store.submission(id)->sub.state == SubmissionState::Pending);
  CHECK(w.store.report_rows(id) == 0);
}

TEST_CASE("another testbed's events are stale") {
  World w;
  const auto id = w.submit("alice", at(0));
  const auto rec = w.store.claim_next_pending("tb", "dut-v1", lease_at(100));
  CHECK_FALSE(w.store.apply(id, rec->claim_epoch, event::StartExecution{"intruder"}));
  CHECK(w.store.submission(id)->sub.state == SubmissionState::Claimed);
}

TEST_CASE("reaper") {
  World w;
  CHECK(w.store.reap_expired(at(0)) == 0);
  const auto id = w.submit("alice", at(0));
  w.store.claim_next_pending("tb", "dut-v1", lease_at(100));
  CHECK(w.store.reap_expired(at(50)) == 0);
  CHECK(w.store.reap_expired(at(101)) == 1);
  const auto rec = w.store.submission(id);
  CHECK(rec->sub.state == SubmissionState::Pending);
  CHECK_FALSE(rec->sub.claim.has_value());
}

TEST_CASE("renewed lease survives the reaper") {
  World w;
  const auto id = w.submit("alice", at(0));
  const auto rec = w.store.claim_next_pending("tb", "dut-v1", lease_at(100));
  CHECK(w.store.renew_lease(id, "tb", rec->claim_epoch, lease_at(500)));
  CHECK(w.store.reap_expired(at(200)) == 0);
  CHECK_FALSE(w.store.renew_lease(id, "other", rec->claim_epoch, lease_at(900)));
}

TEST_CASE("lease expiry racing completion: exactly one outcome persists") {
  World w;
  const auto report = uniform_report(w.store.test_cases(w.asg), 100);
  int graded = 0;
  int requeued = 0;
  int inconsistent = 0;
  for (int i = 0; i < 500; ++i) {
    const auto id = w.submit("alice", at(i));
    const auto rec = w.store.claim_next_pending("tb", "dut-v1", lease_at(i + 10));
    REQUIRE(rec);
    REQUIRE(w.store.apply(id, rec->claim_epoch, event::StartExecution{"tb"}));
    std::atomic<bool> completed{false};
    std::barrier sync(2);
    auto finish = [&] {
      sync.arrive_and_wait();
      completed = w.store.apply(id, rec->claim_epoch, event::Complete{"tb", report}, {}, at(i + 5));
    };
    auto reap = [&] {
      sync.arrive_and_wait();
      w.store.reap_expired(at(i + 1'000));
    };
    // Alternate start order so both interleavings occur.
    std::thread first = i % 2 ? std::thread(finish) : std::thread(reap);
    std::thread second = i % 2 ? std::thread(reap) : std::thread(finish);
    first.join();
    second.join();
    const auto after = w.store.submission(id);
    const int rows = w.store.report_rows(id);
    if (completed) {
      ++graded;
      inconsistent += after->sub.state != SubmissionState::Graded || rows != 1;
    } else {
      ++requeued;
      inconsistent += after->sub.state != SubmissionState::Pending || rows != 0;
      // Take it out of the queue for the next iteration.
      const auto again = w.store.claim_next_pending("tb", "dut-v1", lease_at(i + 1'000'000));
      REQUIRE(again);
      w.store.apply(id, again->claim_epoch, event::StartExecution{"tb"});
      w.store.apply(id, again->claim_epoch, event::Complete{"tb", report}, {}, at(i + 6));
    }
  }
  MESSAGE("graded first: " << graded << ", requeued first: " << requeued);
  CHECK(inconsistent == 0);
  CHECK(graded + requeued == 500);
}

TEST_CASE("a graded submission cannot be completed twice") {
  World w;
  const auto report = uniform_report(w.store.test_cases(w.asg), 100);
  const auto id = w.submit("alice", at(0));
  const auto rec = w.store.claim_next_pending("tb", "dut-v1", lease_at(100));
  w.store.apply(id, rec->claim_epoch, event::StartExecution{"tb"});
  CHECK(w.store.apply(id, rec->claim_epoch, event::Complete{"tb", report}, {}, at(1)));
  CHECK_THROWS_AS(w.store.apply(id, rec->claim_epoch, event::Complete{"tb", report}, {}, at(2)),
                  IllegalTransition);
  CHECK(w.store.report_rows(id) == 1);
  CHECK(w.store.submission(id)->sub.result == report);
  CHECK(*w.store.submission(id)->graded_at == at(1));
}

TEST_CASE("retry budget: R+1 counted failures end in failed") {
  World w;
  const int R = 2;
  const auto id = w.submit("alice", at(0));
  std::vector<RequeueOutcome> outcomes;
  for (int i = 0; i < R + 1; ++i) {
    const auto rec = w.store.claim_next_pending("tb", "dut-v1", lease_at(100));
    REQUIRE(rec);
    w.store.apply(id, rec->claim_epoch, event::StartExecution{"tb"});
    outcomes.push_back(w.store.requeue_or_fail(id, "tb", rec->claim_epoch, "boom", R));
  }
  CHECK(outcomes == std::vector{RequeueOutcome::Requeued, RequeueOutcome::Requeued,
                                RequeueOutcome::Failed});
  const auto rec = w.store.submission(id);
  CHECK(rec->sub.state == SubmissionState::Failed);
  CHECK(rec->sub.failure == std::optional<std::string>("boom"));
  CHECK_FALSE(w.store.claim_next_pending("tb", "dut-v1", lease_at(100)).has_value());
}

TEST_CASE("uncounted requeues do not consume the budget") {
  World w;
  const auto id = w.submit("alice", at(0));
  for (int i = 0; i < 10; ++i) {
    const auto rec = w.store.claim_next_pending("tb", "dut-v1", lease_at(100));
    REQUIRE(rec);
    w.store.apply(id, rec->claim_epoch, event::StartExecution{"tb"});
    CHECK(w.store.requeue_or_fail(id, "tb", rec->claim_epoch, "busy", 2, false) ==
          RequeueOutcome::Requeued);
  }
  CHECK(w.store.submission(id)->attempts == 0);
}

TEST_CASE("requeue with a lost claim is a no-op") {
  World w;
  const auto id = w.submit("alice", at(0));
  const auto rec = w.store.claim_next_pending("tb", "dut-v1", lease_at(100));
  w.store.reap_expired(at(200));
  CHECK(w.store.requeue_or_fail(id, "tb", rec->claim_epoch, "x", 2) == RequeueOutcome::Lost);
}

TEST_CASE("artifacts are stored with the report") {
  World w;
  const auto id = w.submit("alice", at(0));
  const auto rec = w.store.claim_next_pending("tb", "dut-v1", lease_at(100));
  w.store.apply(id, rec->claim_epoch, event::StartExecution{"tb"});
  w.store.apply(id, rec->claim_epoch,
                event::Complete{"tb", uniform_report(w.store.test_cases(w.asg), 50)},
                {{"public-1", {{"capture.rle", std::string("5000,1\n0,1\n\0x", 13)}}}}, at(1));
  CHECK(w.store.artifact(id, "public-1", "capture.rle") == std::string("5000,1\n0,1\n\0x", 13));
  CHECK_FALSE(w.store.artifact(id, "public-1", "print.log").has_value());
}

TEST_CASE("credentials are never stored in plaintext") {
  const auto path = std::filesystem::temp_directory_path() / "embg-cred-test.db";
  std::filesystem::remove(path);
  {
    store::Store s(path.string(), 1000);
    s.create_user("dave", "Dave", "correct horse battery staple", false);
    CHECK(s.verify_password("dave", "correct horse battery staple"));
    CHECK_FALSE(s.verify_password("dave", "wrong"));
    CHECK_FALSE(s.verify_password("nobody", "correct horse battery staple"));
    const auto token = s.create_session("dave", at(1000));
    CHECK(s.session_user(token, at(0)) == std::optional<std::string>("dave"));
    CHECK_FALSE(s.session_user(token, at(1000)).has_value());
  }
  std::string bytes;
  for (const auto& suffix : {"", "-wal"}) {
    std::ifstream in(path.string() + suffix, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    bytes += ss.str();
  }
  CHECK(bytes.find("correct horse") == std::string::npos);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + "-wal");
  std::filesystem::remove(path.string() + "-shm");
}

TEST_CASE("duplicate ids conflict") {
  World w;
  CHECK_THROWS_AS(w.store.create_user("alice", "x", "y", false), store::Conflict);
  CHECK_THROWS_AS(w.store.create_course({"c1", "dup", {}}), store::Conflict);
  w.store.issue_testbed("tb-1");
  CHECK_THROWS_AS(w.store.issue_testbed("tb-1"), store::Conflict);
}

TEST_CASE("testbed tokens and heartbeats") {
  World w;
  const auto token = w.store.issue_testbed("tb-1");
  CHECK(w.store.testbed_for_token(token) == std::optional<std::string>("tb-1"));
  CHECK_FALSE(w.store.testbed_for_token(token + "x").has_value());
  // The first heartbeat registers; it is not a change.
  CHECK_FALSE(w.store.record_heartbeat("tb-1", "{}", "h1", at(0)));
  CHECK_FALSE(w.store.record_heartbeat("tb-1", "{}", "h1", at(10)));
  CHECK(w.store.record_heartbeat("tb-1", "{}", "h2", at(20)));
  const auto tbs = w.store.testbeds();
  REQUIRE(tbs.size() == 1);
  CHECK(tbs[0].config_hash == "h2");
  CHECK(tbs[0].last_heartbeat == at(20));
}

TEST_CASE("submissions are listed in submission order, per student") {
  World w;
  const auto a1 = w.submit("alice", at(10));
  const auto b1 = w.submit("bob", at(5));
  const auto a2 = w.submit("alice", at(20));
  std::vector<std::string> all;
  for (const auto& r : w.store.submissions(w.asg)) all.push_back(r.sub.id);
  CHECK(all == std::vector<std::string>{b1, a1, a2});
  std::vector<std::string> mine;
  for (const auto& r : w.store.submissions(w.asg, "alice")) mine.push_back(r.sub.id);
  CHECK(mine == std::vector<std::string>{a1, a2});
}
