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

#include "embgrader/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <numeric>
#include <string>

namespace embgrader::kernels {

void check_runs(std::span<const Run> runs) {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].level > 1) {
      throw MalformedCapture("run " + std::to_string(i) + " has level " +
                             std::to_string(runs[i].level));
    }
    if (runs[i].length == 0) {
      throw MalformedCapture("run " + std::to_string(i) + " has zero length");
    }
    if (i > 0 && runs[i].level == runs[i - 1].level) {
      throw MalformedCapture("runs " + std::to_string(i - 1) + " and " + std::to_string(i) +
                             " do not alternate");
    }
  }
}

namespace serial {

std::vector<uint8_t> sample_levels(std::span<const int64_t> toggles, const SampleGrid& grid) {
  std::vector<uint8_t> out(grid.count);
  std::size_t seen = 0;
  for (uint64_t k = 0; k < grid.count; ++k) {
    const int64_t t = grid.tick(k);
    while (seen < toggles.size() && toggles[seen] <= t) ++seen;
    out[k] = static_cast<uint8_t>(seen & 1u);
  }
  return out;
}

std::vector<Run> encode_rle(std::span<const uint8_t> levels) {
  std::vector<Run> runs;
  for (const uint8_t v : levels) {
    const uint8_t bit = v ? 1 : 0;
    if (!runs.empty() && runs.back().level == bit) {
      ++runs.back().length;
    } else {
      runs.push_back({bit, 1});
    }
  }
  return runs;
}

std::vector<uint8_t> decode_rle(std::span<const Run> runs) {
  check_runs(runs);
  std::vector<uint8_t> out;
  for (const auto& r : runs) out.insert(out.end(), r.length, r.level);
  return out;
}

}  // namespace serial

namespace parallel {

namespace {

// Below this many elements the threading overhead dominates.
constexpr std::size_t kMinParallel = 1 << 14;

int chunk_count(std::size_t n) {
  if (n < kMinParallel) return 1;
  const auto by_size = static_cast<int>(n / (kMinParallel / 2));
  return std::max(1, std::min(omp_get_max_threads() * 4, by_size));
}

}  // namespace

std::vector<uint8_t> sample_levels(std::span<const int64_t> toggles, const SampleGrid& grid) {
  std::vector<uint8_t> out(grid.count);
  const int chunks = chunk_count(grid.count);
  const uint64_t per = (grid.count + chunks - 1) / static_cast<uint64_t>(chunks);

#pragma omp parallel for schedule(static) if (chunks > 1)
  for (int c = 0; c < chunks; ++c) {
    const uint64_t begin = static_cast<uint64_t>(c) * per;
    const uint64_t end = std::min<uint64_t>(grid.count, begin + per);
    if (begin >= end) continue;
    auto seen = static_cast<std::size_t>(
        std::upper_bound(toggles.begin(), toggles.end(), grid.tick(begin)) - toggles.begin());
    for (uint64_t k = begin; k < end; ++k) {
      const int64_t t = grid.tick(k);
      while (seen < toggles.size() && toggles[seen] <= t) ++seen;
      out[k] = static_cast<uint8_t>(seen & 1u);
    }
  }
  return out;
}

std::vector<Run> encode_rle(std::span<const uint8_t> levels) {
  const std::size_t n = levels.size();
  const int chunks = chunk_count(n);
  if (chunks == 1) return serial::encode_rle(levels);

  const std::size_t per = (n + chunks - 1) / static_cast<std::size_t>(chunks);
  std::vector<std::vector<Run>> partial(static_cast<std::size_t>(chunks));

#pragma omp parallel for schedule(static)
  for (int c = 0; c < chunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * per;
    const std::size_t end = std::min(n, begin + per);
    if (begin < end) partial[c] = serial::encode_rle(levels.subspan(begin, end - begin));
  }

  std::vector<Run> runs;
  for (auto& part : partial) {
    for (const auto& r : part) {
      if (!runs.empty() && runs.back().level == r.level) {
        runs.back().length += r.length;
      } else {
        runs.push_back(r);
      }
    }
  }
  return runs;
}

std::vector<uint8_t> decode_rle(std::span<const Run> runs) {
  check_runs(runs);
  std::vector<uint64_t> offsets(runs.size() + 1, 0);
  for (std::size_t i = 0; i < runs.size(); ++i) offsets[i + 1] = offsets[i] + runs[i].length;
  std::vector<uint8_t> out(offsets.back());
  const auto count = static_cast<std::int64_t>(runs.size());

#pragma omp parallel for schedule(dynamic, 64) if (out.size() >= kMinParallel)
  for (std::int64_t i = 0; i < count; ++i) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
              out.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]), runs[i].level);
  }
  return out;
}

}  // namespace parallel

}  // namespace embgrader::kernels
