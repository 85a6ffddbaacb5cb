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

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "parafac2/common.hpp"
#include "parafac2/kernels.hpp"
#include "parafac2/parallel.hpp"
#include "parafac2/slices.hpp"

// Matricized-tensor-times-Khatri-Rao-product kernels for the projected
// slice collection {Y_k} (K slices, each R x J, sharing the column sparsity
// of its source slice). The slices are the frontal slices of an R x J x K
// tensor; viewing the CP factors as H (mode 1, R x R), V (mode 2, J x R)
// and W (mode 3, K x R), the three mode-n MTTKRPs reduce to slice-wise
// products that never form the Khatri-Rao matrix and only touch the c_k
// non-zero columns of each slice:
//
//   mode 1:  M1       = sum_k (Y_k V) with column r scaled by W(k,r)
//   mode 2:  M2(j,:) += (Y_k(:,j)^T H) * W(k,:)   for j in nnz_cols(k)
//   mode 3:  M3(k,:)  = column-wise dot products of H and (Y_k V)
//
// Each kernel is parallel over k with per-worker accumulators merged in a
// fixed pairwise tree; a single thread runs strictly sequentially in slice
// order and is bit-reproducible.

namespace parafac2 {

namespace detail {

inline void check_factor(const Matrix& F, Index rows, Index cols,
                         const char* name) {
  if (F.rows() != rows || F.cols() != cols)
    throw std::invalid_argument(std::string("mttkrp: factor ") + name +
                                " has mismatched dimensions");
}

/// Per-slice weights (non-zero column counts): per-slice kernel cost is
/// Theta(R^2 * c_k), so balancing on c_k evens out skewed subjects.
inline std::vector<std::uint64_t> slice_weights(const ProjectedSlices& Y) {
  std::vector<std::uint64_t> w(static_cast<std::size_t>(Y.n_slices()));
  for (Index k = 0; k < Y.n_slices(); ++k)
    w[static_cast<std::size_t>(k)] =
        static_cast<std::uint64_t>(Y.n_nnz_cols(k));
  return w;
}

/// Gathers the rows of V indexed by slice k's non-zero columns into the top
/// of `buf` and returns that c_k x R view. Rows of V outside the slice's
/// column set are never read.
inline auto gather_rows(const Matrix& V, const std::vector<Index>& cols,
                        Matrix& buf) {
  const Index c = static_cast<Index>(cols.size());
  for (Index i = 0; i < c; ++i)
    buf.row(i) = V.row(cols[static_cast<std::size_t>(i)]);
  return buf.topRows(c);
}

}  // namespace detail

/// Mode-1 MTTKRP: R x R result, sum over slices of (Y_k V) with column r
/// scaled by W(k, r).
inline Matrix mttkrp_mode1(const ProjectedSlices& Y, const Matrix& V,
                           const Matrix& W, int threads = 1) {
  const Index R = Y.rank();
  detail::check_factor(V, Y.n_cols(), V.cols(), "V");
  detail::check_factor(W, Y.n_slices(), V.cols(), "W");
  const Index F = V.cols();

  const auto chunks = partition_weighted(detail::slice_weights(Y), threads);
  std::vector<Matrix> parts(chunks.size(), Matrix::Zero(R, F));
  run_chunks(chunks, [&](std::size_t c, Index begin, Index end) {
    Matrix& acc = parts[c];
    Index max_c = 0;
    for (Index k = begin; k < end; ++k)
      max_c = std::max(max_c, Y.n_nnz_cols(k));
    Matrix vbuf(max_c, F);
    Matrix prod(R, F);
    for (Index k = begin; k < end; ++k) {
      if (Y.n_nnz_cols(k) == 0) continue;
      auto vsub = detail::gather_rows(V, Y.cols(k), vbuf);
      prod.noalias() = Y.packed(k) * vsub;
      acc.array() += prod.array().rowwise() * W.row(k).array();
    }
  });
  return merge_tree(std::move(parts),
                    [](Matrix a, const Matrix& b) { a += b; return a; });
}

/// Mode-2 MTTKRP: J x R result; each non-zero column j of slice k adds
/// (Y_k(:,j)^T H) * W(k,:) to row j. Rows outside a slice's column set
/// receive no contribution from that slice.
inline Matrix mttkrp_mode2(const ProjectedSlices& Y, const Matrix& H,
                           const Matrix& W, int threads = 1) {
  const Index R = Y.rank();
  detail::check_factor(H, R, H.cols(), "H");
  detail::check_factor(W, Y.n_slices(), H.cols(), "W");
  const Index F = H.cols();

  const auto chunks = partition_weighted(detail::slice_weights(Y), threads);
  std::vector<Matrix> parts(chunks.size(), Matrix::Zero(Y.n_cols(), F));
  run_chunks(chunks, [&](std::size_t c, Index begin, Index end) {
    Matrix& acc = parts[c];
    Index max_c = 0;
    for (Index k = begin; k < end; ++k)
      max_c = std::max(max_c, Y.n_nnz_cols(k));
    Matrix tbuf(max_c, F);
    for (Index k = begin; k < end; ++k) {
      const Index ck = Y.n_nnz_cols(k);
      if (ck == 0) continue;
      tbuf.topRows(ck).noalias() = Y.packed(k).transpose() * H;
      const auto& cols = Y.cols(k);
      for (Index i = 0; i < ck; ++i)
        acc.row(cols[static_cast<std::size_t>(i)]).array() +=
            tbuf.row(i).array() * W.row(k).array();
    }
  });
  return merge_tree(std::move(parts),
                    [](Matrix a, const Matrix& b) { a += b; return a; });
}

/// Mode-3 MTTKRP: K x R result with row k the column-wise inner products of
/// H and (Y_k V). Rows are independent across k, so workers write disjoint
/// rows and no reduction is needed.
inline Matrix mttkrp_mode3(const ProjectedSlices& Y, const Matrix& H,
                           const Matrix& V, int threads = 1) {
  const Index R = Y.rank();
  detail::check_factor(H, R, H.cols(), "H");
  detail::check_factor(V, Y.n_cols(), H.cols(), "V");
  const Index F = H.cols();

  Matrix M = Matrix::Zero(Y.n_slices(), F);
  const auto chunks = partition_weighted(detail::slice_weights(Y), threads);
  run_chunks(chunks, [&](std::size_t, Index begin, Index end) {
    Index max_c = 0;
    for (Index k = begin; k < end; ++k)
      max_c = std::max(max_c, Y.n_nnz_cols(k));
    Matrix vbuf(max_c, F);
    Matrix prod(R, F);
    for (Index k = begin; k < end; ++k) {
      if (Y.n_nnz_cols(k) == 0) continue;
      auto vsub = detail::gather_rows(V, Y.cols(k), vbuf);
      prod.noalias() = Y.packed(k) * vsub;
      M.row(k) = (H.array() * prod.array()).colwise().sum();
    }
  });
  return M;
}

namespace detail {

inline void check_mttkrp_input(const ProjectedSlices& Y, const Matrix& H,
                               const Matrix& V, const Matrix& W, int mode) {
  if (mode < 1 || mode > 3)
    throw std::invalid_argument("mttkrp: mode must be 1, 2 or 3");
  const Index R = Y.rank();
  if (H.rows() != R || H.cols() != R)
    throw std::invalid_argument("mttkrp: H must be R x R");
  if (V.rows() != Y.n_cols() || V.cols() != R)
    throw std::invalid_argument("mttkrp: V must be J x R");
  if (W.rows() != Y.n_slices() || W.cols() != R)
    throw std::invalid_argument("mttkrp: W must be K x R");
}

}  // namespace detail

/// Dispatches to the specialized kernel for the requested mode after
/// validating the full factor set against the slice collection.
inline Matrix mttkrp(const ProjectedSlices& Y, const Matrix& H,
                     const Matrix& V, const Matrix& W, int mode,
                     int threads = 1) {
  detail::check_mttkrp_input(Y, H, V, W, mode);
  switch (mode) {
    case 1: return mttkrp_mode1(Y, V, W, threads);
    case 2: return mttkrp_mode2(Y, H, W, threads);
    default: return mttkrp_mode3(Y, H, V, threads);
  }
}

/// Reference MTTKRP: materializes the dense mode-n matricization of the
/// slice collection and the full Khatri-Rao product, then multiplies.
/// No sparsity exploitation — this is the oracle for testing and the
/// baseline for benchmarking, and it simply attempts the full allocation
/// on large inputs.
///
/// Matricization layout (slice element Y_k(i, j) of the R x J x K tensor):
///   mode 1: R x (J*K), column j + J*k; multiplied by khatri_rao(W, V)
///   mode 2: J x (R*K), column i + R*k; multiplied by khatri_rao(W, H)
///   mode 3: K x (R*J), column i + R*j; multiplied by khatri_rao(V, H)
inline Matrix naive_mttkrp(const ProjectedSlices& Y, const Matrix& H,
                           const Matrix& V, const Matrix& W, int mode) {
  detail::check_mttkrp_input(Y, H, V, W, mode);
  const Index R = Y.rank();
  const Index J = Y.n_cols();
  const Index K = Y.n_slices();
  switch (mode) {
    case 1: {
      Matrix unfolded(R, J * K);
      for (Index k = 0; k < K; ++k) unfolded.middleCols(k * J, J) = Y.dense(k);
      return unfolded * khatri_rao(W, V);
    }
    case 2: {
      Matrix unfolded(J, R * K);
      for (Index k = 0; k < K; ++k)
        unfolded.middleCols(k * R, R) = Y.dense(k).transpose();
      return unfolded * khatri_rao(W, H);
    }
    default: {
      Matrix unfolded(K, R * J);
      for (Index k = 0; k < K; ++k) {
        const Matrix d = Y.dense(k);  // column-major: linear index i + R*j
        unfolded.row(k) = Eigen::Map<const RowVector>(d.data(), R * J);
      }
      return unfolded * khatri_rao(V, H);
    }
  }
}

/// Bytes the naive kernel must materialize for the given shape: the dense
/// mode-n matricization plus the Khatri-Rao product plus the result
/// (transient per-slice buffers excluded). Used to decide out-of-memory
/// cells in the benchmark harness without attempting the allocation.
inline std::uint64_t naive_mttkrp_bytes(Index K, Index J, Index R, int mode) {
  const auto k = static_cast<std::uint64_t>(K);
  const auto j = static_cast<std::uint64_t>(J);
  const auto r = static_cast<std::uint64_t>(R);
  std::uint64_t unfolded = 0, krp = 0, result = 0;
  switch (mode) {
    case 1: unfolded = r * j * k; krp = k * j * r; result = r * r; break;
    case 2: unfolded = j * r * k; krp = k * r * r; result = j * r; break;
    case 3: unfolded = k * r * j; krp = j * r * r; result = k * r; break;
    default: throw std::invalid_argument("mttkrp: mode must be 1, 2 or 3");
  }
  return 8 * (unfolded + krp + result);
}

}  // namespace parafac2
