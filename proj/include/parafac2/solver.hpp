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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "parafac2/common.hpp"
#include "parafac2/cp.hpp"
#include "parafac2/kernels.hpp"
#include "parafac2/mttkrp.hpp"
#include "parafac2/parallel.hpp"
#include "parafac2/slices.hpp"
#include "parafac2/sparse.hpp"

// PARAFAC2 alternating least squares for an irregular tensor {X_k}:
// X_k is approximated by U_k * diag(S_k) * V^T with U_k = Q_k * H, where
// each Q_k has orthonormal columns. The coupling through a shared H makes
// the cross product U_k^T U_k = H^T H invariant across subjects. Each outer
// iteration solves the per-subject orthogonal Procrustes problems for
// {Q_k}, projects the slices to Y_k = Q_k^T X_k, and runs a single CP-ALS
// iteration on the projected collection; S_k is then read off as row k of
// the CP factor W.

namespace parafac2 {

struct SolverConfig {
  enum class Init { random, eye };

  Index rank = 1;
  int max_iters = 200;
  double tol = 1e-8;    // relative change in fit that stops the loop
  bool nonneg = true;   // non-negativity on V and the S_k (never on H)
  Init init = Init::random;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Full model state. Row k of S holds diag(S_k); the derived subject
/// factors U_k = Q_k * H are assembled on demand.
struct Parafac2Factors {
  std::vector<Matrix> Q;  // K column-orthonormal I_k x R matrices
  Matrix H;               // R x R
  Matrix S;               // K x R, row k = diag(S_k)
  Matrix V;               // J x R
  Index rank = 0;
};

struct IterationStats {
  int iter = 0;            // 1-based outer iteration index
  double residual_sq = 0;  // sum_k ||X_k - U_k S_k V^T||_F^2
  double fit = 0;          // 1 - residual_sq / ||X||_F^2
  double ms_procrustes = 0;
  double ms_project = 0;
  double ms_cp = 0;
};

struct FitTrace {
  std::vector<IterationStats> iterations;
  double total_ms = 0;
  bool converged = false;
};

/// Called once per outer iteration with the current model state; used for
/// invariant monitoring and diagnostics. Must not mutate the factors.
using IterationObserver =
    std::function<void(const Parafac2Factors&, const IterationStats&)>;

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace detail

/// Initial model state: H = identity, every S_k = ones, V per config
/// (seeded uniform [0,1) entries, or the entry-wise absolute values of the
/// leading eigenvectors of sum_k X_k^T X_k). Q is left empty — the first
/// Procrustes pass defines it.
inline Parafac2Factors initialize(const IrregularTensor& X,
                                  const SolverConfig& config) {
  const Index R = config.rank;
  if (R < 1) throw std::invalid_argument("rank must be at least 1");
  if (!(config.tol > 0.0))
    throw std::invalid_argument("convergence tolerance must be positive");
  if (config.max_iters < 1)
    throw std::invalid_argument("iteration limit must be at least 1");
  if (X.n_cols() < R)
    throw DataError("rank exceeds variables: J = " +
                    std::to_string(X.n_cols()) + " < rank " +
                    std::to_string(R));
  for (Index k = 0; k < X.n_slices(); ++k) {
    if (X.slice(k).n_rows() < R)
      throw DataError("rank exceeds observations for subject " +
                      std::to_string(k) + ": I_k = " +
                      std::to_string(X.slice(k).n_rows()) + " < rank " +
                      std::to_string(R));
  }

  Parafac2Factors f;
  f.rank = R;
  f.H = Matrix::Identity(R, R);
  f.S = Matrix::Ones(X.n_slices(), R);
  if (config.init == SolverConfig::Init::random) {
    Rng rng(config.seed);
    f.V.resize(X.n_cols(), R);
    for (Index r = 0; r < R; ++r)
      for (Index j = 0; j < X.n_cols(); ++j) f.V(j, r) = rng.uniform();
  } else {
    // Leading eigenvectors of the column Gram matrix sum_k X_k^T X_k,
    // computed over non-zero column pairs only.
    const Index J = X.n_cols();
    Matrix C = Matrix::Zero(J, J);
    for (Index k = 0; k < X.n_slices(); ++k) {
      const SparseSlice& s = X.slice(k);
      for (Index a = 0; a < s.n_nnz_cols(); ++a) {
        auto [a0, a1] = s.col_range(a);
        for (Index b = a; b < s.n_nnz_cols(); ++b) {
          auto [b0, b1] = s.col_range(b);
          double dot = 0.0;
          for (Index p = a0, q = b0; p < a1 && q < b1;) {
            if (s.entry_row(p) == s.entry_row(q)) {
              dot += s.entry_value(p) * s.entry_value(q);
              ++p, ++q;
            } else if (s.entry_row(p) < s.entry_row(q)) {
              ++p;
            } else {
              ++q;
            }
          }
          C(s.col(a), s.col(b)) += dot;
          if (a != b) C(s.col(b), s.col(a)) += dot;
        }
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(C);
    f.V.resize(J, R);
    for (Index r = 0; r < R; ++r)
      f.V.col(r) = eig.eigenvectors().col(J - 1 - r).cwiseAbs();
  }
  return f;
}

/// Optimal column-orthonormal Q_k for the current (H, S_k, V): the
/// minimizer of ||X_k - Q H diag(s) V^T||_F over orthonormal Q, obtained
/// from the thin SVD P diag(sigma) Z^T of the R x I_k matrix
/// H diag(s) (X_k V)^T as Q_k = Z P^T. The sparse product X_k V only
/// touches the stored entries of X_k.
inline Matrix procrustes_update(const SparseSlice& X_k, const Matrix& H,
                                const Vector& s, const Matrix& V) {
  const Index R = H.rows();
  if (H.cols() != R) throw std::invalid_argument("H must be square");
  if (s.size() != R || V.cols() != R || V.rows() != X_k.n_cols())
    throw std::invalid_argument("procrustes factors have mismatched shapes");
  if (X_k.n_rows() < R)
    throw std::invalid_argument("rank exceeds observations in procrustes step");

  Matrix XV = Matrix::Zero(X_k.n_rows(), R);
  for (Index c = 0; c < X_k.n_nnz_cols(); ++c) {
    const Index j = X_k.col(c);
    auto [p0, p1] = X_k.col_range(c);
    for (Index p = p0; p < p1; ++p)
      XV.row(X_k.entry_row(p)) += X_k.entry_value(p) * V.row(j);
  }
  Matrix M(R, X_k.n_rows());
  M.noalias() = (H * s.asDiagonal()) * XV.transpose();
  EconomySvd svd = economy_svd(M);
  return svd.Z * svd.P.transpose();
}

/// Projected slice Y_k = Q_k^T X_k in packed form (R x c_k over the
/// non-zero columns of X_k); cost Theta(R * nnz(X_k)).
inline Matrix project_slice(const SparseSlice& X_k,
                            const Eigen::Ref<const Matrix>& Q_k) {
  if (Q_k.rows() != X_k.n_rows())
    throw std::invalid_argument("projection: Q_k row count mismatch");
  Matrix packed = Matrix::Zero(Q_k.cols(), X_k.n_nnz_cols());
  for (Index c = 0; c < X_k.n_nnz_cols(); ++c) {
    auto [p0, p1] = X_k.col_range(c);
    for (Index p = p0; p < p1; ++p)
      packed.col(c) += X_k.entry_value(p) * Q_k.row(X_k.entry_row(p)).transpose();
  }
  return packed;
}

/// Projects every slice; the non-zero column set of each Y_k is inherited
/// from X_k by construction. Parallel over subjects, weighted by nnz.
inline ProjectedSlices project_slices(const IrregularTensor& X,
                                      const std::vector<Matrix>& Q,
                                      int threads = 1) {
  if (static_cast<Index>(Q.size()) != X.n_slices())
    throw std::invalid_argument("projection: one Q_k per slice required");
  const Index K = X.n_slices();
  const Index R = Q.empty() ? 0 : Q.front().cols();
  std::vector<Matrix> packed(static_cast<std::size_t>(K));
  std::vector<std::vector<Index>> cols(static_cast<std::size_t>(K));
  std::vector<std::uint64_t> weights(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k)
    weights[static_cast<std::size_t>(k)] =
        static_cast<std::uint64_t>(X.slice(k).nnz());
  run_chunks(partition_weighted(weights, threads),
             [&](std::size_t, Index begin, Index end) {
               for (Index k = begin; k < end; ++k) {
                 packed[static_cast<std::size_t>(k)] =
                     project_slice(X.slice(k), Q[static_cast<std::size_t>(k)]);
                 cols[static_cast<std::size_t>(k)] = X.slice(k).nnz_cols();
               }
             });
  return ProjectedSlices::from_packed(R, X.n_cols(), std::move(packed),
                                      std::move(cols));
}

/// Subject factors U_k = Q_k * H.
inline std::vector<Matrix> assemble_U(const Parafac2Factors& f) {
  std::vector<Matrix> U;
  U.reserve(f.Q.size());
  for (const Matrix& Qk : f.Q) U.push_back(Qk * f.H);
  return U;
}

/// Full PARAFAC2-ALS loop. Stops when the relative change in fit drops
/// below config.tol or after config.max_iters iterations. The residual is
/// evaluated each iteration with the efficient identity
///   sum_k( ||X_k||^2 - 2 <Y_k, H S_k V^T> + trace(Phi S_k V^T V S_k) ),
/// Phi = H^T H, which never materializes an I_k x J model slice and is
/// exact because Q_k has orthonormal columns.
inline std::pair<Parafac2Factors, FitTrace> fit_parafac2(
    const IrregularTensor& X, const SolverConfig& config,
    const IterationObserver& observer = nullptr) {
  const auto t_start = std::chrono::steady_clock::now();
  Parafac2Factors state = initialize(X, config);
  const Index K = X.n_slices();
  const Index R = config.rank;
  const double norm_x = frobenius_sq(X);
  if (!(norm_x > 0.0))
    throw DataError("tensor has no non-zero entries");

  state.Q.assign(static_cast<std::size_t>(K), Matrix());
  std::vector<std::uint64_t> weights(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k)
    weights[static_cast<std::size_t>(k)] =
        static_cast<std::uint64_t>(X.slice(k).nnz()) +
        static_cast<std::uint64_t>(X.slice(k).n_rows());

  CpFactors cp{state.H, state.V, state.S, Vector::Ones(R)};
  CpOptions cp_opts{config.nonneg, /*normalize_w=*/false, config.threads};

  FitTrace trace;
  double prev_fit = 0.0;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    IterationStats stats;
    stats.iter = iter;

    auto t0 = std::chrono::steady_clock::now();
    run_chunks(partition_weighted(weights, config.threads),
               [&](std::size_t, Index begin, Index end) {
                 for (Index k = begin; k < end; ++k)
                   state.Q[static_cast<std::size_t>(k)] = procrustes_update(
                       X.slice(k), cp.H, cp.W.row(k).transpose(), cp.V);
               });
    stats.ms_procrustes = detail::ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    const ProjectedSlices Y = project_slices(X, state.Q, config.threads);
    stats.ms_project = detail::ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    Matrix m3;
    cp = cp_als_iteration(Y, std::move(cp), cp_opts, &m3);
    state.H = cp.H;
    state.V = cp.V;
    state.S = cp.W;
    stats.ms_cp = detail::ms_since(t0);

    const double cross = (cp.W.array() * m3.array()).sum();
    const Matrix C = hadamard(gram(cp.H), gram(cp.V));
    const double model = ((cp.W * C).array() * cp.W.array()).sum();
    stats.residual_sq = std::max(0.0, norm_x - 2.0 * cross + model);
    stats.fit = 1.0 - stats.residual_sq / norm_x;
    if (!std::isfinite(stats.fit) || !std::isfinite(stats.residual_sq))
      throw NumericalError("numerical divergence at iteration " +
                           std::to_string(iter));

    trace.iterations.push_back(stats);
    if (observer) observer(state, stats);

    const double change = std::abs(stats.fit - prev_fit) /
                          std::max(prev_fit, std::numeric_limits<double>::epsilon());
    prev_fit = stats.fit;
    if (change < config.tol) {
      trace.converged = true;
      break;
    }
  }
  trace.total_ms = detail::ms_since(t_start);
  return {std::move(state), std::move(trace)};
}

}  // namespace parafac2
