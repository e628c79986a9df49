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

// Load generator for the latency/throughput scaling experiment: fires N
// identical reference submissions at a live server with T testbeds online
// and measures submission-to-graded latency and throughput.

#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace embgrader::bench {

class BenchAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchConfig {
  std::string server_url;
  std::string admin_user = "admin";
  std::string admin_password;
  int n = 10;
  int testbeds = 1;
  double delay_s = 0.3;  // informational; coordinators carry the real delay
  int rep = 0;
  std::string dut_profile = "dut-v1";
  int client_threads = 16;
  double timeout_s = 900;
};

struct RunResult {
  int n = 0;
  int testbeds = 0;
  int rep = 0;
  std::vector<double> latencies_s;  // submission order
  double mean_s = 0;
  double median_s = 0;
  double p95_s = 0;
  double throughput = 0;  // graded per second
};

// Throws BenchAborted when a submission fails or the run times out, and
// std::runtime_error when the server is unusable.
RunResult run_load(const BenchConfig& cfg);

// Nearest-rank percentile, p in (0, 100].
double percentile(std::vector<double> xs, double p);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// latency.csv:    N,T,rep,mean_s,median_s,p95_s
// throughput.csv: N,T,rep,jobs_per_s
// samples.csv:    N,T,rep,index,latency_s
// plus a table and the per-T latency fit on `table`.
void emit_report(const std::vector<RunResult>& results, const std::filesystem::path& out_dir,
                 std::ostream& table);

}  // namespace embgrader::bench
