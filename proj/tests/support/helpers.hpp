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

/*
 * Shared helpers for the test suite: independent dense evaluation of the
 * model objectives (oracles for the library's efficient formulas), seeded
 * random-instance builders, and small process/filesystem utilities for
 * exercising the command-line binary.
 */

#pragma once

#include <parafac2/parafac2.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace p2test {

using parafac2::Index;
using parafac2::Matrix;
using parafac2::Vector;

/// Relative Frobenius distance with an absolute floor of 1 in the
/// denominator, so comparisons against near-zero references stay meaningful.
inline double rel_frob(const Matrix& a, const Matrix& ref) {
  return (a - ref).norm() / std::max(1.0, ref.norm());
}

inline Matrix random_matrix(parafac2::Rng& rng, Index rows, Index cols,
                            double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(lo, hi);
  return m;
}

/// Bernoulli-occupied sparse slice with uniform values; guarantees at least
/// one stored entry so the slice is never empty.
inline parafac2::SparseSlice random_slice(parafac2::Rng& rng, Index rows,
                                          Index cols, double density,
                                          double lo = -1.0, double hi = 1.0) {
  std::vector<parafac2::Triplet> entries;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (rng.uniform() < density) entries.push_back({i, j, rng.uniform(lo, hi)});
  if (entries.empty()) {
    entries.push_back(
        {static_cast<Index>(rng.below(static_cast<std::uint64_t>(rows))),
         static_cast<Index>(rng.below(static_cast<std::uint64_t>(cols))),
         rng.uniform(0.5, 1.5)});
  }
  return parafac2::SparseSlice::from_triplets(rows, cols, entries);
}

inline parafac2::IrregularTensor random_tensor(parafac2::Rng& rng,
                                               Index n_slices, Index n_cols,
                                               Index min_rows, Index max_rows,
                                               double density, double lo = -1.0,
                                               double hi = 1.0) {
  std::vector<parafac2::SparseSlice> slices;
  slices.reserve(static_cast<std::size_t>(n_slices));
  for (Index k = 0; k < n_slices; ++k) {
    Index rows = min_rows;
    if (max_rows > min_rows)
      rows += static_cast<Index>(
          rng.below(static_cast<std::uint64_t>(max_rows - min_rows + 1)));
    slices.push_back(random_slice(rng, rows, n_cols, density, lo, hi));
  }
  return parafac2::IrregularTensor::from_slices(n_cols, std::move(slices));
}

/// Random projected-slice collection: each slice owns a random non-empty
/// ascending column subset and a dense rank x c_k block.
inline parafac2::ProjectedSlices random_projected(parafac2::Rng& rng,
                                                  Index rank, Index n_cols,
                                                  Index n_slices, double density,
                                                  double lo = -1.0,
                                                  double hi = 1.0) {
  std::vector<Matrix> packed;
  std::vector<std::vector<Index>> cols;
  for (Index k = 0; k < n_slices; ++k) {
    std::vector<Index> c;
    for (Index j = 0; j < n_cols; ++j)
      if (rng.uniform() < density) c.push_back(j);
    if (c.empty())
      c.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n_cols))));
    packed.push_back(random_matrix(rng, rank, static_cast<Index>(c.size()), lo, hi));
    cols.push_back(std::move(c));
  }
  return parafac2::ProjectedSlices::from_packed(rank, n_cols, std::move(packed),
                                                std::move(cols));
}

/// Direct dense evaluation of the inner objective on projected slices:
/// sum_k || Y_k - H diag(lambda * W(k,:)) V^T ||_F^2.
inline double dense_cp_objective(const parafac2::ProjectedSlices& y,
                                 const parafac2::CpFactors& f) {
  double total = 0.0;
  for (Index k = 0; k < y.n_slices(); ++k) {
    Vector w = f.W.row(k).transpose().cwiseProduct(f.lambda);
    Matrix model = f.H * w.asDiagonal() * f.V.transpose();
    total += (y.dense(k) - model).squaredNorm();
  }
  return total;
}

/// Direct dense evaluation of the outer residual:
/// sum_k || X_k - Q_k H diag(S(k,:)) V^T ||_F^2.
inline double dense_residual(const parafac2::IrregularTensor& x,
                             const parafac2::Parafac2Factors& f) {
  double total = 0.0;
  for (Index k = 0; k < x.n_slices(); ++k) {
    Matrix model = f.Q[static_cast<std::size_t>(k)] * f.H *
                   f.S.row(k).asDiagonal() * f.V.transpose();
    total += (x.slice(k).dense() - model).squaredNorm();
  }
  return total;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Self-cleaning unique temporary directory.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (prefix + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs a shell command, capturing stdout/stderr and the exit status.
inline CmdResult run_command(const std::string& cmd) {
  static std::atomic<unsigned> counter{0};
  const unsigned id = counter.fetch_add(1);
  const auto base =
      std::filesystem::temp_directory_path() /
      ("p2cmd_" + std::to_string(::getpid()) + "_" + std::to_string(id));
  const std::string out_path = base.string() + ".out";
  const std::string err_path = base.string() + ".err";
  const int raw = std::system((cmd + " >" + out_path + " 2>" + err_path).c_str());
  CmdResult result;
  if (raw != -1 && WIFEXITED(raw)) result.exit_code = WEXITSTATUS(raw);
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  std::error_code ec;
  std::filesystem::remove(out_path, ec);
  std::filesystem::remove(err_path, ec);
  return result;
}

}  // namespace p2test
