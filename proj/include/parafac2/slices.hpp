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

#include <stdexcept>
#include <utility>
#include <vector>

#include "parafac2/common.hpp"
#include "parafac2/sparse.hpp"

namespace parafac2 {

/// The projected slice collection {Y_k}: K dense R x J matrices that share
/// the column sparsity pattern of their source slices {X_k} — columns of
/// Y_k outside nnz_cols(X_k) are exactly zero.
///
/// Storage is packed: slice k keeps only its c_k non-zero columns as an
/// R x c_k block alongside the sorted column-index list. For R << J this
/// makes the working set proportional to the data's non-zeros instead of
/// K*R*J, while dense(k) reconstructs the logical R x J view on demand.
/// Immutable after construction.
class ProjectedSlices {
 public:
  ProjectedSlices() = default;

  /// Takes ownership of per-slice packed blocks (R x c_k) and their column
  /// index lists (ascending, one id per packed column).
  static ProjectedSlices from_packed(Index rank, Index n_cols,
                                     std::vector<Matrix> packed,
                                     std::vector<std::vector<Index>> cols) {
    if (rank <= 0) throw std::invalid_argument("slice rank must be positive");
    if (packed.size() != cols.size())
      throw std::invalid_argument("packed blocks and column lists differ in count");
    for (std::size_t k = 0; k < packed.size(); ++k) {
      if (packed[k].rows() != rank)
        throw std::invalid_argument("packed block row count differs from rank");
      if (packed[k].cols() != static_cast<Index>(cols[k].size()))
        throw std::invalid_argument("packed block width differs from column list");
      for (std::size_t c = 0; c < cols[k].size(); ++c) {
        if (cols[k][c] < 0 || cols[k][c] >= n_cols)
          throw std::invalid_argument("packed column index out of range");
        if (c > 0 && cols[k][c] <= cols[k][c - 1])
          throw std::invalid_argument("packed column indices must be ascending");
      }
    }
    ProjectedSlices y;
    y.rank_ = rank;
    y.n_cols_ = n_cols;
    y.packed_ = std::move(packed);
    y.cols_ = std::move(cols);
    return y;
  }

  /// Builds the collection from full dense R x J slices; the stored column
  /// set of each slice is the set of its numerically non-zero columns.
  static ProjectedSlices from_dense(Index n_cols,
                                    const std::vector<Matrix>& dense) {
    std::vector<Matrix> packed(dense.size());
    std::vector<std::vector<Index>> cols(dense.size());
    Index rank = dense.empty() ? 0 : dense.front().rows();
    for (std::size_t k = 0; k < dense.size(); ++k) {
      if (dense[k].cols() != n_cols)
        throw std::invalid_argument("dense slice column count mismatch");
      for (Index j = 0; j < n_cols; ++j)
        if (!dense[k].col(j).isZero(0.0)) cols[k].push_back(j);
      packed[k].resize(dense[k].rows(), static_cast<Index>(cols[k].size()));
      for (std::size_t c = 0; c < cols[k].size(); ++c)
        packed[k].col(static_cast<Index>(c)) = dense[k].col(cols[k][c]);
    }
    return from_packed(rank, n_cols, std::move(packed), std::move(cols));
  }

  Index rank() const { return rank_; }
  Index n_cols() const { return n_cols_; }
  Index n_slices() const { return static_cast<Index>(packed_.size()); }

  /// Packed R x c_k block of slice k (column c holds Y_k(:, cols(k)[c])).
  const Matrix& packed(Index k) const {
    return packed_[static_cast<std::size_t>(k)];
  }

  /// Ascending ids of the non-zero columns of slice k.
  const std::vector<Index>& cols(Index k) const {
    return cols_[static_cast<std::size_t>(k)];
  }

  Index n_nnz_cols(Index k) const {
    return static_cast<Index>(cols_[static_cast<std::size_t>(k)].size());
  }

  /// Full R x J view of slice k with zeros outside the stored columns.
  Matrix dense(Index k) const {
    Matrix d = Matrix::Zero(rank_, n_cols_);
    const auto& c = cols_[static_cast<std::size_t>(k)];
    const Matrix& p = packed_[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < c.size(); ++i)
      d.col(c[i]) = p.col(static_cast<Index>(i));
    return d;
  }

  /// Sum of squared stored values, slice order then column-major within
  /// each packed block; fixed order for reproducibility.
  double frobenius_sq() const {
    double acc = 0.0;
    for (const Matrix& p : packed_) acc += p.squaredNorm();
    return acc;
  }

 private:
  Index rank_ = 0;
  Index n_cols_ = 0;
  std::vector<Matrix> packed_;
  std::vector<std::vector<Index>> cols_;
};

}  // namespace parafac2
