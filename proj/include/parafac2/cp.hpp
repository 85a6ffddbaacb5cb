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

#include "parafac2/common.hpp"
#include "parafac2/kernels.hpp"
#include "parafac2/mttkrp.hpp"
#include "parafac2/slices.hpp"

namespace parafac2 {

/// CP factor set for the projected collection {Y_k} (an R x J x K tensor):
/// slice k is modeled as H * diag(lambda * W(k,:)) * V^T. After an ALS
/// iteration the columns of H and V are unit length; all scale lives in W,
/// and lambda holds the W column norms only when W-normalization was
/// requested (all-ones otherwise).
struct CpFactors {
  Matrix H;       // R x R, mode-1 factor
  Matrix V;       // J x R, mode-2 factor
  Matrix W;       // K x R, mode-3 factor
  Vector lambda;  // length R
};

struct CpOptions {
  bool nonneg = true;        // constrain V and W (never H) to be >= 0
  bool normalize_w = false;  // normalize W columns, recording norms in lambda
  int threads = 1;
};

namespace detail {

inline void check_cp_shapes(const ProjectedSlices& Y, const CpFactors& f) {
  const Index R = Y.rank();
  if (f.H.rows() != R || f.H.cols() != R)
    throw std::invalid_argument("cp factors: H must be R x R");
  if (f.V.rows() != Y.n_cols() || f.V.cols() != R)
    throw std::invalid_argument("cp factors: V must be J x R");
  if (f.W.rows() != Y.n_slices() || f.W.cols() != R)
    throw std::invalid_argument("cp factors: W must be K x R");
}

/// Normalizes the columns of A to unit 2-norm, scaling the matching columns
/// of B by the norms so the model is unchanged. Zero columns are left as
/// zeros and B is not scaled for them.
inline void normalize_columns_into(Matrix& A, Matrix& B) {
  for (Index r = 0; r < A.cols(); ++r) {
    const double nrm = A.col(r).norm();
    if (nrm > 0.0) {
      A.col(r) /= nrm;
      B.col(r) *= nrm;
    }
  }
}

}  // namespace detail

/// Sum of squared residuals sum_k ||Y_k - H diag(lambda * W(k,:)) V^T||_F^2,
/// evaluated without forming any R x J model slice: the cross term reduces
/// to the mode-3 MTTKRP and the model norm to a quadratic form in the
/// Gram-matrix Hadamard product.
inline double cp_objective(const ProjectedSlices& Y, const CpFactors& f,
                           int threads = 1) {
  detail::check_cp_shapes(Y, f);
  if (f.lambda.size() != Y.rank())
    throw std::invalid_argument("cp factors: lambda must have length R");
  const Matrix scaled_w =
      f.W.array().rowwise() * f.lambda.transpose().array();
  const Matrix m3 = mttkrp_mode3(Y, f.H, f.V, threads);
  const Matrix C = hadamard(gram(f.H), gram(f.V));
  const double cross = (scaled_w.array() * m3.array()).sum();
  const double model = ((scaled_w * C).array() * scaled_w.array()).sum();
  return Y.frobenius_sq() - 2.0 * cross + model;
}

/// One alternating-least-squares iteration on the slice collection, in the
/// fixed order H, V, W. Each update solves its linear subproblem exactly
/// (pseudoinverse of the Gram-Hadamard matrix, or row-wise NNLS for V and W
/// when non-negativity is requested), so the objective never increases.
///
/// If mode3_out is non-null it receives the mode-3 MTTKRP computed with the
/// final H and V, letting callers evaluate residuals without an extra pass.
inline CpFactors cp_als_iteration(const ProjectedSlices& Y, CpFactors f,
                                  const CpOptions& opts = {},
                                  Matrix* mode3_out = nullptr) {
  detail::check_cp_shapes(Y, f);
  const Index R = Y.rank();

  // Mode-1 factor: unconstrained even when non-negativity is requested for
  // V and W, since H later absorbs into the orthonormal subject factors.
  {
    const Matrix m1 = mttkrp_mode1(Y, f.V, f.W, opts.threads);
    const Matrix G = hadamard(gram(f.W), gram(f.V));
    f.H.noalias() = m1 * pinv_small(G);
    detail::normalize_columns_into(f.H, f.W);
  }

  // Mode-2 factor.
  {
    const Matrix m2 = mttkrp_mode2(Y, f.H, f.W, opts.threads);
    const Matrix G = hadamard(gram(f.W), gram(f.H));
    if (opts.nonneg)
      f.V = nnls_rowwise(G, m2, opts.threads);
    else
      f.V.noalias() = m2 * pinv_small(G);
    detail::normalize_columns_into(f.V, f.W);
  }

  // Mode-3 factor.
  {
    const Matrix m3 = mttkrp_mode3(Y, f.H, f.V, opts.threads);
    const Matrix G = hadamard(gram(f.V), gram(f.H));
    if (opts.nonneg)
      f.W = nnls_rowwise(G, m3, opts.threads);
    else
      f.W.noalias() = m3 * pinv_small(G);
    if (mode3_out) *mode3_out = m3;
  }

  f.lambda = Vector::Ones(R);
  if (opts.normalize_w) {
    for (Index r = 0; r < R; ++r) {
      const double nrm = f.W.col(r).norm();
      f.lambda(r) = nrm;
      if (nrm > 0.0) f.W.col(r) /= nrm;
    }
  }
  return f;
}

}  // namespace parafac2
