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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "parafac2/common.hpp"
#include "parafac2/sparse.hpp"

namespace parafac2 {

/// Orthonormal factor of a seeded Gaussian rows x cols matrix (rows >=
/// cols) via Householder QR, with column signs fixed so the R factor has a
/// non-negative diagonal. Deterministic function of the stream state.
inline Matrix random_orthonormal(Rng& rng, Index rows, Index cols) {
  if (rows < cols)
    throw std::invalid_argument("orthonormal factor needs rows >= cols");
  Matrix A(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) A(r, c) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix Q = qr.householderQ() * Matrix::Identity(rows, cols);
  for (Index c = 0; c < cols; ++c)
    if (qr.matrixQR()(c, c) < 0.0) Q.col(c) = -Q.col(c);
  return Q;
}

/// Matrix with independent uniform entries, filled column-major.
inline Matrix random_uniform(Rng& rng, Index rows, Index cols, double lo,
                             double hi) {
  Matrix A(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) A(r, c) = rng.uniform(lo, hi);
  return A;
}

struct GeneratorSpec {
  Index subjects = 1;      // K
  Index cols = 1;          // J
  Index max_rows = 1;      // I_max: rows of each slice before sparsification
  Index rank = 1;          // true model rank
  double density = 1.0;    // per-entry keep probability, in (0, 1]
  std::uint64_t seed = 0;
  bool nonneg_factors = true;  // uniform(0,1) factors; else uniform(-1,1)
};

struct GeneratedTensor {
  IrregularTensor tensor;
  Index dropped_subjects = 0;  // subjects whose slice sparsified to empty
};

/// Synthetic irregular tensor drawn from an exact rank-R model:
/// X_k = Q_k H diag(S_k) V^T with Q_k the orthonormal factor of a Gaussian
/// I_max x R matrix, and H, V, S entries uniform. Every entry of the dense
/// X_k is then kept independently with probability `density` and all-zero
/// rows are removed, so realized row counts I_k <= I_max grow with density.
/// Subjects whose slices lose every entry are dropped (counted in the
/// result); the emitted subject indices are re-packed to 0..K'-1.
///
/// Streams are pinned for reproducibility: a master stream seeded with
/// `seed` draws H, then V, then S (column-major); subject k uses the
/// substream seeded with substream_seed(seed, k+1) to draw its Gaussian
/// Q_k source (column-major) and then its sparsification mask. The mask is
/// sampled by geometric gap skipping over row-major entry positions
/// i*J + j (one uniform per kept entry); density 1 keeps every entry
/// without consuming the mask stream. Entry values never depend on the
/// mask stream.
inline GeneratedTensor generate_synthetic(const GeneratorSpec& spec) {
  if (spec.subjects < 1)
    throw std::invalid_argument("generator: subjects must be at least 1");
  if (spec.cols < 1)
    throw std::invalid_argument("generator: cols must be at least 1");
  if (spec.max_rows < 1)
    throw std::invalid_argument("generator: max_rows must be at least 1");
  if (spec.rank < 1 || spec.rank > std::min(spec.max_rows, spec.cols))
    throw std::invalid_argument(
        "generator: rank must satisfy 1 <= rank <= min(max_rows, cols)");
  if (!(spec.density > 0.0) || spec.density > 1.0)
    throw std::invalid_argument("generator: density must be in (0, 1]");

  const Index K = spec.subjects;
  const Index J = spec.cols;
  const Index I = spec.max_rows;
  const Index R = spec.rank;
  const double lo = spec.nonneg_factors ? 0.0 : -1.0;

  Rng master(spec.seed);
  const Matrix H = random_uniform(master, R, R, lo, 1.0);
  const Matrix V = random_uniform(master, J, R, lo, 1.0);
  const Matrix S = random_uniform(master, K, R, lo, 1.0);

  GeneratedTensor out;
  std::vector<SparseSlice> slices;
  slices.reserve(static_cast<std::size_t>(K));
  std::vector<Triplet> kept;
  for (Index k = 0; k < K; ++k) {
    Rng rng_k(substream_seed(spec.seed, static_cast<std::uint64_t>(k) + 1));
    const Matrix Q = random_orthonormal(rng_k, I, R);
    // Row i, column j of the dense slice is A.row(i) . V.row(j) with
    // A = Q H diag(S_k); values are computed only for kept entries.
    Matrix A(I, R);
    A.noalias() = Q * (H * S.row(k).transpose().asDiagonal());

    kept.clear();
    const std::uint64_t total =
        static_cast<std::uint64_t>(I) * static_cast<std::uint64_t>(J);
    if (spec.density >= 1.0) {
      for (Index i = 0; i < I; ++i)
        for (Index j = 0; j < J; ++j)
          kept.push_back({i, j, A.row(i).dot(V.row(j))});
    } else {
      const double log_q = std::log1p(-spec.density);
      std::uint64_t pos = 0;
      while (true) {
        const double u = 1.0 - rng_k.uniform();  // in (0, 1]
        const double gap = std::floor(std::log(u) / log_q);
        if (gap >= static_cast<double>(total)) break;
        pos += static_cast<std::uint64_t>(gap);
        if (pos >= total) break;
        const Index i = static_cast<Index>(pos / static_cast<std::uint64_t>(J));
        const Index j = static_cast<Index>(pos % static_cast<std::uint64_t>(J));
        kept.push_back({i, j, A.row(i).dot(V.row(j))});
        ++pos;
      }
    }
    if (kept.empty()) {
      ++out.dropped_subjects;
      continue;
    }
    SparseSlice full = SparseSlice::from_triplets(I, J, kept);
    if (full.nnz() == 0) {  // all kept values were exactly zero
      ++out.dropped_subjects;
      continue;
    }
    slices.push_back(filter_zero_rows(full).first);
  }
  if (slices.empty())
    throw DataError("generator: every subject sparsified to empty");
  out.tensor = IrregularTensor::from_slices(J, std::move(slices));
  return out;
}

}  // namespace parafac2
