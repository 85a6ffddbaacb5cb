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
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "parafac2/common.hpp"

namespace parafac2 {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// One subject's I_k x J sparse observation matrix, stored compressed by
/// column over the non-zero columns only. Columns absent from `nnz_cols`
/// hold no storage at all, so the footprint is independent of J for very
/// sparse slices. Immutable after construction.
class SparseSlice {
 public:
  SparseSlice() = default;

  /// Builds a slice from (row, col, value) triplets. Duplicate (row, col)
  /// pairs are summed; entries that are exactly zero (including duplicates
  /// cancelling to zero) are not stored.
  static SparseSlice from_triplets(Index n_rows, Index n_cols,
                                   std::vector<Triplet> entries) {
    if (n_rows < 0 || n_cols < 0)
      throw std::invalid_argument("slice dimensions must be non-negative");
    for (const Triplet& t : entries) {
      if (t.row < 0 || t.row >= n_rows)
        throw std::invalid_argument("slice row index out of range");
      if (t.col < 0 || t.col >= n_cols)
        throw std::invalid_argument("slice column index out of range");
    }
    std::sort(entries.begin(), entries.end(),
              [](const Triplet& a, const Triplet& b) {
                return a.col != b.col ? a.col < b.col : a.row < b.row;
              });

    SparseSlice s;
    s.n_rows_ = n_rows;
    s.n_cols_ = n_cols;
    std::size_t i = 0;
    while (i < entries.size()) {
      std::size_t j = i + 1;
      double v = entries[i].value;
      while (j < entries.size() && entries[j].col == entries[i].col &&
             entries[j].row == entries[i].row) {
        v += entries[j].value;
        ++j;
      }
      if (v != 0.0) {
        if (s.nnz_cols_.empty() || s.nnz_cols_.back() != entries[i].col) {
          s.nnz_cols_.push_back(entries[i].col);
          s.col_start_.push_back(static_cast<Index>(s.row_idx_.size()));
        }
        s.row_idx_.push_back(entries[i].row);
        s.values_.push_back(v);
      }
      i = j;
    }
    s.col_start_.push_back(static_cast<Index>(s.row_idx_.size()));
    return s;
  }

  Index n_rows() const { return n_rows_; }
  Index n_cols() const { return n_cols_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }

  /// Number of columns holding at least one stored non-zero (c_k).
  Index n_nnz_cols() const { return static_cast<Index>(nnz_cols_.size()); }

  /// Sorted indices of the columns holding at least one stored non-zero.
  const std::vector<Index>& nnz_cols() const { return nnz_cols_; }

  /// Column id of the c-th stored column.
  Index col(Index c) const { return nnz_cols_[static_cast<std::size_t>(c)]; }

  /// Entry range [begin, end) of the c-th stored column.
  std::pair<Index, Index> col_range(Index c) const {
    return {col_start_[static_cast<std::size_t>(c)],
            col_start_[static_cast<std::size_t>(c) + 1]};
  }

  Index entry_row(Index p) const { return row_idx_[static_cast<std::size_t>(p)]; }
  double entry_value(Index p) const { return values_[static_cast<std::size_t>(p)]; }

  /// Sum of squared stored values, accumulated in storage order.
  double frobenius_sq() const {
    double acc = 0.0;
    for (double v : values_) acc += v * v;
    return acc;
  }

  Matrix dense() const {
    Matrix d = Matrix::Zero(n_rows_, n_cols_);
    for (Index c = 0; c < n_nnz_cols(); ++c) {
      auto [p0, p1] = col_range(c);
      for (Index p = p0; p < p1; ++p) d(entry_row(p), col(c)) = entry_value(p);
    }
    return d;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(values_.size());
    for (Index c = 0; c < n_nnz_cols(); ++c) {
      auto [p0, p1] = col_range(c);
      for (Index p = p0; p < p1; ++p)
        out.push_back({entry_row(p), col(c), entry_value(p)});
    }
    return out;
  }

 private:
  Index n_rows_ = 0;
  Index n_cols_ = 0;
  std::vector<Index> nnz_cols_;   // sorted ascending, one per stored column
  std::vector<Index> col_start_;  // size n_nnz_cols() + 1, offsets into below
  std::vector<Index> row_idx_;    // sorted ascending within each column
  std::vector<double> values_;
};

/// Sorted indices of columns with at least one stored non-zero.
inline const std::vector<Index>& nonzero_columns(const SparseSlice& s) {
  return s.nnz_cols();
}

/// Removes all-zero rows, compacting row indices. Returns the compacted
/// slice and the map from new row index to original row index. A slice with
/// no stored entries carries no information, so it is rejected and the
/// caller decides whether to drop the subject.
inline std::pair<SparseSlice, std::vector<Index>> filter_zero_rows(
    const SparseSlice& s) {
  if (s.nnz() == 0) throw DataError("empty slice: no non-zero entries");
  std::vector<Triplet> entries = s.triplets();
  std::vector<Index> row_map;
  row_map.reserve(entries.size());
  for (const Triplet& t : entries) row_map.push_back(t.row);
  std::sort(row_map.begin(), row_map.end());
  row_map.erase(std::unique(row_map.begin(), row_map.end()), row_map.end());
  for (Triplet& t : entries) {
    t.row = static_cast<Index>(
        std::lower_bound(row_map.begin(), row_map.end(), t.row) -
        row_map.begin());
  }
  SparseSlice filtered = SparseSlice::from_triplets(
      static_cast<Index>(row_map.size()), s.n_cols(), std::move(entries));
  return {std::move(filtered), std::move(row_map)};
}

/// The collection {X_k}: K sparse slices sharing the column dimension J.
/// Immutable after construction; safe to read from many threads.
class IrregularTensor {
 public:
  IrregularTensor() = default;

  static IrregularTensor from_slices(Index n_cols,
                                     std::vector<SparseSlice> slices) {
    if (n_cols <= 0) throw DataError("tensor must have at least one column");
    if (slices.empty()) throw DataError("tensor must have at least one slice");
    IrregularTensor t;
    t.n_cols_ = n_cols;
    t.total_nnz_ = 0;
    for (std::size_t k = 0; k < slices.size(); ++k) {
      if (slices[k].n_cols() != n_cols)
        throw DataError("slice " + std::to_string(k) +
                        " column count differs from tensor column count");
      t.total_nnz_ += static_cast<std::uint64_t>(slices[k].nnz());
    }
    t.slices_ = std::move(slices);
    return t;
  }

  Index n_cols() const { return n_cols_; }
  Index n_slices() const { return static_cast<Index>(slices_.size()); }
  std::uint64_t total_nnz() const { return total_nnz_; }
  const SparseSlice& slice(Index k) const {
    return slices_[static_cast<std::size_t>(k)];
  }
  const std::vector<SparseSlice>& slices() const { return slices_; }

  Index max_rows() const {
    Index m = 0;
    for (const SparseSlice& s : slices_) m = std::max(m, s.n_rows());
    return m;
  }

 private:
  Index n_cols_ = 0;
  std::vector<SparseSlice> slices_;
  std::uint64_t total_nnz_ = 0;
};

/// Sum of squared stored values over all slices, in slice order then entry
/// order. The accumulation order is fixed so the result is reproducible.
inline double frobenius_sq(const IrregularTensor& t) {
  double acc = 0.0;
  for (Index k = 0; k < t.n_slices(); ++k) acc += t.slice(k).frobenius_sq();
  return acc;
}

}  // namespace parafac2
