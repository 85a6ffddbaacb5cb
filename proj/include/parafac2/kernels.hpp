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
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "parafac2/common.hpp"
#include "parafac2/parallel.hpp"

namespace parafac2 {

/// Khatri-Rao (column-wise Kronecker) product of A (K x R) and B (J x R):
/// the (K*J) x R matrix whose row k*J + i equals B(i,:) scaled element-wise
/// by A(k,:). Block k is therefore B with its columns scaled by A(k,:).
inline Matrix khatri_rao(const Matrix& A, const Matrix& B) {
  if (A.cols() != B.cols())
    throw std::invalid_argument("khatri_rao: operands differ in column count");
  ensure_finite(A, "khatri_rao left operand");
  ensure_finite(B, "khatri_rao right operand");
  Matrix out(A.rows() * B.rows(), A.cols());
  for (Index k = 0; k < A.rows(); ++k)
    out.middleRows(k * B.rows(), B.rows()) =
        B.array().rowwise() * A.row(k).array();
  return out;
}

/// Element-wise (Hadamard) product of two equally shaped matrices.
inline Matrix hadamard(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw std::invalid_argument("hadamard: operands differ in shape");
  ensure_finite(A, "hadamard left operand");
  ensure_finite(B, "hadamard right operand");
  return A.cwiseProduct(B);
}

/// Gram matrix A^T A, computed via a symmetric rank update so the result is
/// exactly symmetric.
inline Matrix gram(const Matrix& A) {
  ensure_finite(A, "gram operand");
  Matrix G = Matrix::Zero(A.cols(), A.cols());
  G.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
  G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
  return G;
}

/// Moore-Penrose pseudoinverse of a small symmetric positive semidefinite
/// matrix via symmetric eigendecomposition. Eigenvalues below
/// 1e-12 * (largest eigenvalue) are treated as zero.
inline Matrix pinv_small(const Matrix& G) {
  if (G.rows() != G.cols())
    throw std::invalid_argument("pinv_small: matrix must be square");
  ensure_finite(G, "pseudoinverse operand");
  // Symmetrize defensively; inputs are Hadamard products of Gram matrices
  // and symmetric up to round-off.
  Matrix S = 0.5 * (G + G.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
  const Vector& ev = eig.eigenvalues();
  const double cutoff = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  Matrix out = Matrix::Zero(G.rows(), G.cols());
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cutoff && ev(i) > 0.0) {
      const auto v = eig.eigenvectors().col(i);
      out.selfadjointView<Eigen::Lower>().rankUpdate(v, 1.0 / ev(i));
    }
  }
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

struct EconomySvd {
  Matrix P;      // left singular vectors, m x rho
  Vector sigma;  // singular values, non-increasing, length rho
  Matrix Z;      // right singular vectors, n x rho
};

/// Thin singular value decomposition M = P * diag(sigma) * Z^T with
/// rho = min(m, n). A zero matrix yields zero singular values and
/// identity-block orthonormal factors.
inline EconomySvd economy_svd(const Matrix& M) {
  ensure_finite(M, "svd operand");
  const Index rho = std::min(M.rows(), M.cols());
  if (M.isZero(0.0)) {
    return {Matrix::Identity(M.rows(), rho), Vector::Zero(rho),
            Matrix::Identity(M.cols(), rho)};
  }
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

namespace detail {

/// Non-negative least squares for one right-hand side via active-set
/// iteration on the normal equations: minimizes x^T G x - 2 x^T b over
/// x >= 0. The passive-set subproblems are solved with the pseudoinverse so
/// singular G is handled uniformly.
inline Vector nnls_single(const Matrix& G, const Vector& b, int max_iter) {
  const Index n = G.rows();
  const double kkt_tol = 1e-10;
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  std::vector<Index> pset;
  Vector x = Vector::Zero(n);
  Vector w = b;  // negative gradient b - G x
  Vector s = Vector::Zero(n);
  int iters = 0;
  while (true) {
    Index enter = -1;
    double best = kkt_tol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best) {
        best = w(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = 1;

    while (true) {
      if (++iters > max_iter) throw NumericalError("NNLS did not converge");
      pset.clear();
      for (Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)]) pset.push_back(j);
      const Index np = static_cast<Index>(pset.size());
      Matrix Gpp(np, np);
      Vector bp(np);
      for (Index a = 0; a < np; ++a) {
        bp(a) = b(pset[static_cast<std::size_t>(a)]);
        for (Index c = 0; c < np; ++c)
          Gpp(a, c) = G(pset[static_cast<std::size_t>(a)],
                        pset[static_cast<std::size_t>(c)]);
      }
      Vector sp = pinv_small(Gpp) * bp;
      if ((sp.array() > 0.0).all()) {
        x.setZero();
        for (Index a = 0; a < np; ++a) x(pset[static_cast<std::size_t>(a)]) = sp(a);
        break;
      }
      // Step from x toward the subproblem solution until the first passive
      // coordinate hits zero, then drop every coordinate that reached zero.
      s.setZero();
      for (Index a = 0; a < np; ++a) s(pset[static_cast<std::size_t>(a)]) = sp(a);
      double alpha = std::numeric_limits<double>::infinity();
      for (Index a = 0; a < np; ++a) {
        const Index j = pset[static_cast<std::size_t>(a)];
        if (sp(a) <= 0.0) {
          const double denom = x(j) - s(j);
          const double step = denom > 0.0 ? x(j) / denom : 0.0;
          alpha = std::min(alpha, step);
        }
      }
      for (Index a = 0; a < np; ++a) {
        const Index j = pset[static_cast<std::size_t>(a)];
        x(j) += alpha * (s(j) - x(j));
      }
      const double drop_tol = 1e-14 * std::max(1.0, x.cwiseAbs().maxCoeff());
      for (Index a = 0; a < np; ++a) {
        const Index j = pset[static_cast<std::size_t>(a)];
        if (x(j) <= drop_tol) {
          x(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = 0;
        }
      }
    }
    w.noalias() = b - G * x;
  }
  return x;
}

}  // namespace detail

/// Solves min_{X >= 0} of the row-wise normal-equation objective
/// X(j,:) G X(j,:)^T - 2 X(j,:) B(j,:)^T for every row j of B, sharing the
/// same symmetric PSD matrix G across rows. Rows are independent, so the
/// result is identical for any thread count. Active-set iterations are
/// capped at max_iter per row (0 means the default 30 * R).
inline Matrix nnls_rowwise(const Matrix& G, const Matrix& B, int threads = 1,
                           int max_iter = 0) {
  if (G.rows() != G.cols())
    throw std::invalid_argument("nnls_rowwise: G must be square");
  if (B.cols() != G.rows())
    throw std::invalid_argument("nnls_rowwise: B column count must match G");
  ensure_finite(G, "nonnegative solve normal matrix");
  ensure_finite(B, "nonnegative solve right-hand side");
  const int cap = max_iter > 0 ? max_iter : 30 * static_cast<int>(G.rows());
  Matrix X(B.rows(), B.cols());
  const auto chunks =
      partition_even(B.rows(), threads > 0 ? threads : 1);
  run_chunks(chunks, [&](std::size_t, Index begin, Index end) {
    for (Index j = begin; j < end; ++j)
      X.row(j) = detail::nnls_single(G, B.row(j).transpose(), cap).transpose();
  });
  return X;
}

}  // namespace parafac2
