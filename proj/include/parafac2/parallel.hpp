/*
 *   Copyright 2026 The parafac2 Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "parafac2/common.hpp"

namespace parafac2 {

/// Contiguous ranges [begin, end) covering [0, n). The split depends only on
/// (n, n_chunks), never on runtime thread scheduling, so any computation
/// partitioned this way is reproducible.
inline std::vector<std::pair<Index, Index>> partition_even(Index n,
                                                           int n_chunks) {
  const Index chunks = std::max<Index>(1, std::min<Index>(n_chunks, std::max<Index>(n, 1)));
  std::vector<std::pair<Index, Index>> out;
  out.reserve(static_cast<std::size_t>(chunks));
  for (Index c = 0; c < chunks; ++c) {
    const Index b = n * c / chunks;
    const Index e = n * (c + 1) / chunks;
    out.emplace_back(b, e);
  }
  return out;
}

/// Contiguous ranges covering [0, weights.size()) with roughly equal total
/// weight per range. Used to balance slice-parallel loops whose per-slice
/// cost is proportional to a known weight (e.g. the non-zero column count).
/// Deterministic function of (weights, n_chunks).
inline std::vector<std::pair<Index, Index>> partition_weighted(
    const std::vector<std::uint64_t>& weights, int n_chunks) {
  const Index n = static_cast<Index>(weights.size());
  const Index chunks = std::max<Index>(1, std::min<Index>(n_chunks, std::max<Index>(n, 1)));
  std::uint64_t total = 0;
  for (std::uint64_t w : weights) total += w;
  if (total == 0) return partition_even(n, static_cast<int>(chunks));

  std::vector<std::pair<Index, Index>> out;
  out.reserve(static_cast<std::size_t>(chunks));
  Index begin = 0;
  std::uint64_t cum = 0;
  for (Index c = 0; c < chunks; ++c) {
    // Advance until cumulative weight reaches the c+1-th fraction of total,
    // always taking at least one element and leaving one per later chunk.
    const std::uint64_t target =
        total * static_cast<std::uint64_t>(c + 1) / static_cast<std::uint64_t>(chunks);
    Index end = begin;
    while (end < n && (cum < target || end == begin) &&
           n - end > chunks - c - 1) {
      cum += weights[static_cast<std::size_t>(end)];
      ++end;
    }
    if (c + 1 == chunks) end = n;
    out.emplace_back(begin, end);
    begin = end;
  }
  return out;
}

/// Runs fn(chunk_index, begin, end) for each range. A single chunk runs
/// inline on the calling thread (strictly sequential execution); otherwise
/// one worker thread per extra chunk is spawned and joined. The first
/// exception thrown by any chunk is rethrown on the calling thread.
template <typename Fn>
void run_chunks(const std::vector<std::pair<Index, Index>>& chunks, Fn&& fn) {
  if (chunks.size() == 1) {
    fn(std::size_t{0}, chunks[0].first, chunks[0].second);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto guarded = [&](std::size_t c) {
    try {
      fn(c, chunks[c].first, chunks[c].second);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };
  std::vector<std::thread> workers;
  workers.reserve(chunks.size() - 1);
  for (std::size_t c = 1; c < chunks.size(); ++c)
    workers.emplace_back(guarded, c);
  guarded(0);
  for (std::thread& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Reduces per-chunk partial results with a fixed pairwise tree:
/// (p0+p1), (p2+p3), ... then recurse. The association order depends only
/// on the number of parts, which bounds floating-point reassociation drift
/// across thread counts and keeps any fixed thread count bit-reproducible.
template <typename T, typename Merge>
T merge_tree(std::vector<T> parts, Merge&& merge) {
  while (parts.size() > 1) {
    std::size_t out = 0;
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2)
      parts[out++] = merge(std::move(parts[i]), std::move(parts[i + 1]));
    if (parts.size() % 2 == 1) parts[out++] = std::move(parts.back());
    parts.resize(out);
  }
  return std::move(parts.front());
}

}  // namespace parafac2
