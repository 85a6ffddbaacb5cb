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
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace parafac2 {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Eigen::Index;

/// Invalid or inconsistent input data (unreadable files, bad indices,
/// shape/config mismatches). Maps to exit code 2 in the CLI.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure during a solve (divergence, iteration caps exceeded).
/// Maps to exit code 3 in the CLI.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numeric kernels reject NaN/Inf operands up front; a non-finite value
/// reaching a kernel means an upstream computation overflowed, so this is
/// reported as a numerical failure rather than a usage error.
inline void ensure_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite())
    throw NumericalError(std::string(what) + ": non-finite entries");
}

// ---------------------------------------------------------------------------
// Seeded randomness with a pinned algorithm.
//
// All stochastic behaviour in the library flows through Rng, which wraps
// std::mt19937_64 (bit-exact by the C++ standard) and derives doubles with
// explicit transforms instead of std::*_distribution (whose output is
// implementation-defined). This keeps generated datasets reproducible from
// (seed, algorithm) alone.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives the seed of an independent substream, e.g. one per slice.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t idx) {
  std::uint64_t state = seed + idx * 0x9E3779B97F4A7C15ULL;
  return splitmix64(state);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller on the pinned uniform stream.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n) by rejection on the top bits.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace parafac2
