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

#include "embgrader/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include "embgrader/digest.hpp"
#include "embgrader/domain.hpp"
#include "embgrader/fixtures.hpp"
#include "embgrader/http_util.hpp"
#include "embgrader/json_io.hpp"

namespace embgrader::bench {

using nlohmann::json;

namespace {

json expect(const net::HttpResult& r, const std::string& what) {
  if (!r.ok()) throw std::runtime_error(what + ": HTTP " + std::to_string(r.status) + " " + r.body);
  return r.body.empty() ? json::object() : r.json();
}

std::string login(const std::string& url, const std::string& user, const std::string& password) {
  net::JsonClient c(url);
  return expect(c.post("/auth/login", {{"user", user}, {"password", password}}), "login " + user)
      .at("token")
      .get<std::string>();
}

double seconds_between(Instant a, Instant b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

double percentile(std::vector<double> xs, double p) {
  if (xs.empty()) return 0;
  std::sort(xs.begin(), xs.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(xs.size())));
  return xs[std::clamp<std::size_t>(rank, 1, xs.size()) - 1];
}

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("need >= 2 points");
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0;
  f.intercept = my - f.slope * mx;
  f.r2 = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

RunResult run_load(const BenchConfig& cfg) {
  if (cfg.n <= 0) throw std::invalid_argument("n must be positive");
  const std::string tag = "bench-" + random_hex(4);
  const std::string admin = login(cfg.server_url, cfg.admin_user, cfg.admin_password);
  net::JsonClient ac(cfg.server_url, admin);

  const auto online = expect(ac.get("/testbeds"), "list testbeds");
  int live = 0;
  for (const auto& tb : online) {
    if (tb.value("online", false) && tb.contains("descriptor") &&
        tb["descriptor"].value("dut_profile", "") == cfg.dut_profile) {
      ++live;
    }
  }
  if (live != cfg.testbeds) {
    throw std::runtime_error("expected " + std::to_string(cfg.testbeds) +
                             " online testbeds, found " + std::to_string(live));
  }

  const std::string password = random_hex(8);
  const std::string instructor = tag + "-instructor";
  const std::string student = tag + "-student";
  expect(ac.post("/users", {{"id", instructor}, {"password", password}}), "create instructor");
  expect(ac.post("/users", {{"id", student}, {"password", password}}), "create student");
  expect(ac.post("/courses", {{"id", tag}, {"title", tag}}), "create course");
  expect(ac.post("/courses/" + tag + "/roster", {{"user_id", instructor}, {"role", "instructor"}}),
         "enroll instructor");
  expect(ac.post("/courses/" + tag + "/roster", {{"user_id", student}, {"role", "student"}}),
         "enroll student");

  net::JsonClient ic(cfg.server_url, login(cfg.server_url, instructor, password));
  const auto deadline = std::chrono::system_clock::now() + std::chrono::hours(24);
  const auto asg = expect(ic.post("/courses/" + tag + "/assignments",
                                  {{"statement", "bench"},
                                   {"dut_profile", cfg.dut_profile},
                                   {"deadline", format_rfc3339(to_instant(deadline))}}),
                          "create assignment")
                       .at("id")
                       .get<std::string>();
  TestCase tc = fixtures::pwm_assignment().test_cases.front();
  tc.id = "bench";
  expect(ic.post("/assignments/" + asg + "/testcases", json(tc)), "add test case");

  const std::string student_token = login(cfg.server_url, student, password);
  const std::string source(fixtures::program("pwm_hw_reactive"));
  std::atomic<int> next{0};
  std::atomic<int> errors{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, std::min(cfg.client_threads, cfg.n)); ++t) {
    pool.emplace_back([&] {
      net::JsonClient sc(cfg.server_url, student_token);
      while (next.fetch_add(1) < cfg.n) {
        try {
          if (sc.post("/assignments/" + asg + "/submissions", {{"source", source}}).status != 202) {
            ++errors;
          }
        } catch (const std::exception&) {
          ++errors;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (errors > 0) throw BenchAborted(std::to_string(errors.load()) + " submissions were refused");

  const auto give_up = std::chrono::steady_clock::now() + std::chrono::duration<double>(cfg.timeout_s);
  json rows;
  for (;;) {
    rows = expect(ic.get("/assignments/" + asg + "/submissions"), "list submissions");
    int graded = 0;
    for (const auto& r : rows) {
      const auto state = r.at("state").get<std::string>();
      if (state == "failed") throw BenchAborted("submission " + r.at("id").get<std::string>() + " failed");
      graded += state == "graded";
    }
    if (graded == cfg.n) break;
    if (std::chrono::steady_clock::now() > give_up) {
      throw BenchAborted("timed out with " + std::to_string(graded) + "/" + std::to_string(cfg.n) +
                         " graded");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }

  RunResult res;
  res.n = cfg.n;
  res.testbeds = cfg.testbeds;
  res.rep = cfg.rep;
  Instant first_submit = Instant::max();
  Instant last_graded = Instant::min();
  for (const auto& r : rows) {
    const Instant s = parse_rfc3339(r.at("submitted_at").get<std::string>());
    const Instant g = parse_rfc3339(r.at("graded_at").get<std::string>());
    res.latencies_s.push_back(seconds_between(s, g));
    first_submit = std::min(first_submit, s);
    last_graded = std::max(last_graded, g);
  }
  res.mean_s = std::accumulate(res.latencies_s.begin(), res.latencies_s.end(), 0.0) /
               static_cast<double>(res.latencies_s.size());
  res.median_s = percentile(res.latencies_s, 50);
  res.p95_s = percentile(res.latencies_s, 95);
  // Millisecond timestamps: guard the degenerate single-instant case.
  res.throughput = cfg.n / std::max(1e-3, seconds_between(first_submit, last_graded));
  return res;
}

void emit_report(const std::vector<RunResult>& results, const std::filesystem::path& out_dir,
                 std::ostream& table) {
  std::filesystem::create_directories(out_dir);
  std::ofstream lat(out_dir / "latency.csv");
  std::ofstream thr(out_dir / "throughput.csv");
  std::ofstream smp(out_dir / "samples.csv");
  lat << "N,T,rep,mean_s,median_s,p95_s\n";
  thr << "N,T,rep,jobs_per_s\n";
  smp << "N,T,rep,index,latency_s\n";
  lat << std::fixed << std::setprecision(3);
  thr << std::fixed << std::setprecision(3);
  smp << std::fixed << std::setprecision(3);
  table << std::fixed << std::setprecision(3);
  table << std::setw(6) << "N" << std::setw(4) << "T" << std::setw(5) << "rep" << std::setw(10)
        << "mean_s" << std::setw(10) << "median_s" << std::setw(10) << "p95_s" << std::setw(12)
        << "jobs_per_s" << "\n";
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_t;
  for (const auto& r : results) {
    lat << r.n << "," << r.testbeds << "," << r.rep << "," << r.mean_s << "," << r.median_s << ","
        << r.p95_s << "\n";
    thr << r.n << "," << r.testbeds << "," << r.rep << "," << r.throughput << "\n";
    for (std::size_t i = 0; i < r.latencies_s.size(); ++i) {
      smp << r.n << "," << r.testbeds << "," << r.rep << "," << i << "," << r.latencies_s[i] << "\n";
    }
    table << std::setw(6) << r.n << std::setw(4) << r.testbeds << std::setw(5) << r.rep
          << std::setw(10) << r.mean_s << std::setw(10) << r.median_s << std::setw(10) << r.p95_s
          << std::setw(12) << r.throughput << "\n";
    by_t[r.testbeds].first.push_back(r.n);
    by_t[r.testbeds].second.push_back(r.mean_s);
  }
  for (const auto& [t, pts] : by_t) {
    std::set<double> distinct(pts.first.begin(), pts.first.end());
    if (distinct.size() < 2) continue;
    const auto fit = linear_fit(pts.first, pts.second);
    table << "T=" << t << ": mean latency = " << fit.slope << " * N + " << fit.intercept
          << "  (R^2 = " << fit.r2 << ")\n";
  }
}

}  // namespace embgrader::bench
