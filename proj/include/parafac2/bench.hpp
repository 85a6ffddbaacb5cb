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
#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "parafac2/common.hpp"
#include "parafac2/generator.hpp"
#include "parafac2/mttkrp.hpp"
#include "parafac2/solver.hpp"
#include "parafac2/sparse.hpp"

namespace parafac2 {

/// Peak resident set size of this process in bytes (VmHWM from
/// /proc/self/status); 0 if unavailable on this platform.
inline std::uint64_t peak_rss_bytes() {
  std::ifstream in("/proc/self/status");
  std::string key;
  while (in >> key) {
    if (key == "VmHWM:") {
      std::uint64_t kib = 0;
      in >> kib;
      return kib * 1024;
    }
    in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  }
  return 0;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct BenchCell {
  std::string kernel;  // "specialized" or "naive"
  int mode = 0;        // 1..3, or 0 for the full three-mode sweep
  std::vector<double> times_ms;
  double median_ms = 0;
  bool oom = false;                // skipped: materialization over budget
  std::uint64_t bytes_needed = 0;  // naive materialization requirement
};

struct BenchReport {
  Index subjects = 0, cols = 0, rank = 0;
  std::uint64_t nnz = 0;
  int reps = 0, threads = 1;
  std::uint64_t budget_bytes = 0;
  std::vector<BenchCell> cells;
  double specialized_sweep_ms = 0;  // median over reps of the 3-mode sweep
  double naive_sweep_ms = 0;        // 0 when any naive mode was skipped
  bool naive_oom = false;
  double speedup = 0;  // naive_sweep_ms / specialized_sweep_ms, 0 if unknown
  std::uint64_t specialized_peak_rss = 0;  // snapshot before naive runs
  std::uint64_t naive_bound_bytes = 0;     // K*J*R*8 materialization bound
  double checksum = 0;  // consumes kernel outputs so work is not elided
};

/// Times the specialized kernels against the materialized-Khatri-Rao
/// reference on the given tensor, one row per (kernel, mode) plus sweep
/// rows. The slice collection {Y_k} is built once by projecting with
/// seeded random orthonormal Q_k and seeded uniform factors. The
/// specialized sweep runs first and its peak memory is snapshotted before
/// any naive materialization. Naive cells whose precomputed materialization
/// size exceeds budget_bytes are marked out-of-memory and skipped, so the
/// harness never crashes on allocation; the naive sweep and speedup are
/// reported only when all three naive modes ran.
inline BenchReport bench_mttkrp(const IrregularTensor& X, Index rank, int reps,
                                int threads, std::uint64_t budget_bytes,
                                std::uint64_t seed) {
  if (rank < 1) throw std::invalid_argument("bench: rank must be at least 1");
  if (reps < 1) throw std::invalid_argument("bench: reps must be at least 1");
  const Index K = X.n_slices();
  const Index J = X.n_cols();

  BenchReport rep;
  rep.subjects = K;
  rep.cols = J;
  rep.rank = rank;
  rep.nnz = X.total_nnz();
  rep.reps = reps;
  rep.threads = threads;
  rep.budget_bytes = budget_bytes;
  rep.naive_bound_bytes = static_cast<std::uint64_t>(K) *
                          static_cast<std::uint64_t>(J) *
                          static_cast<std::uint64_t>(rank) * 8;

  // Build the projected collection: per-subject random orthonormal Q_k
  // (discarded immediately after use), shared seeded uniform factors.
  Rng master(seed);
  const Matrix H = random_uniform(master, rank, rank, 0.0, 1.0);
  const Matrix V = random_uniform(master, J, rank, 0.0, 1.0);
  const Matrix W = random_uniform(master, K, rank, 0.0, 1.0);
  std::vector<Matrix> packed(static_cast<std::size_t>(K));
  std::vector<std::vector<Index>> cols(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    const SparseSlice& s = X.slice(k);
    if (s.n_rows() < rank)
      throw DataError("rank exceeds observations for subject " +
                      std::to_string(k));
    Rng rng_k(substream_seed(seed, static_cast<std::uint64_t>(k) + 1));
    const Matrix Q = random_orthonormal(rng_k, s.n_rows(), rank);
    packed[static_cast<std::size_t>(k)] = project_slice(s, Q);
    cols[static_cast<std::size_t>(k)] = s.nnz_cols();
  }
  const ProjectedSlices Y =
      ProjectedSlices::from_packed(rank, J, std::move(packed), std::move(cols));

  const auto time_ms = [](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
  };

  // Specialized sweep.
  std::vector<std::vector<double>> spec_mode(3);
  std::vector<double> spec_sweep;
  for (int r = 0; r < reps; ++r) {
    double sweep = 0;
    for (int mode = 1; mode <= 3; ++mode) {
      Matrix out;
      const double ms =
          time_ms([&] { out = mttkrp(Y, H, V, W, mode, threads); });
      rep.checksum += out.sum();
      spec_mode[static_cast<std::size_t>(mode - 1)].push_back(ms);
      sweep += ms;
    }
    spec_sweep.push_back(sweep);
  }
  for (int mode = 1; mode <= 3; ++mode) {
    BenchCell cell;
    cell.kernel = "specialized";
    cell.mode = mode;
    cell.times_ms = spec_mode[static_cast<std::size_t>(mode - 1)];
    cell.median_ms = median(cell.times_ms);
    rep.cells.push_back(cell);
  }
  rep.specialized_sweep_ms = median(spec_sweep);
  {
    BenchCell sweep_cell;
    sweep_cell.kernel = "specialized";
    sweep_cell.mode = 0;
    sweep_cell.times_ms = spec_sweep;
    sweep_cell.median_ms = rep.specialized_sweep_ms;
    rep.cells.push_back(sweep_cell);
  }
  rep.specialized_peak_rss = peak_rss_bytes();

  // Naive sweep, budget-gated per mode.
  std::vector<std::vector<double>> naive_mode(3);
  bool all_naive = true;
  for (int mode = 1; mode <= 3; ++mode) {
    BenchCell cell;
    cell.kernel = "naive";
    cell.mode = mode;
    cell.bytes_needed = naive_mttkrp_bytes(K, J, rank, mode);
    if (cell.bytes_needed > budget_bytes) {
      cell.oom = true;
      all_naive = false;
    } else {
      for (int r = 0; r < reps; ++r) {
        Matrix out;
        const double ms = time_ms([&] { out = naive_mttkrp(Y, H, V, W, mode); });
        rep.checksum += out.sum();
        cell.times_ms.push_back(ms);
      }
      cell.median_ms = median(cell.times_ms);
      naive_mode[static_cast<std::size_t>(mode - 1)] = cell.times_ms;
    }
    rep.cells.push_back(cell);
  }

  BenchCell naive_sweep_cell;
  naive_sweep_cell.kernel = "naive";
  naive_sweep_cell.mode = 0;
  if (all_naive) {
    for (int r = 0; r < reps; ++r)
      naive_sweep_cell.times_ms.push_back(
          naive_mode[0][static_cast<std::size_t>(r)] +
          naive_mode[1][static_cast<std::size_t>(r)] +
          naive_mode[2][static_cast<std::size_t>(r)]);
    naive_sweep_cell.median_ms = median(naive_sweep_cell.times_ms);
    rep.naive_sweep_ms = naive_sweep_cell.median_ms;
    rep.speedup = rep.naive_sweep_ms / rep.specialized_sweep_ms;
  } else {
    naive_sweep_cell.oom = true;
    rep.naive_oom = true;
  }
  rep.cells.push_back(naive_sweep_cell);
  return rep;
}

}  // namespace parafac2
