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
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "parafac2/common.hpp"
#include "parafac2/solver.hpp"
#include "parafac2/sparse.hpp"

// Text interchange formats.
//
// Coordinate tensor files: UTF-8 text. Lines whose first non-blank
// character is '#' are comments; blank lines are ignored. The first data
// line is the header "K J"; every following line is one entry
// "k i j v" with 0-based subject k in [0, K), row i within the slice
// (row counts are inferred as max i + 1 per subject), column j in [0, J)
// and a finite decimal value v. Duplicate (k, i, j) entries are summed.
// Writing always emits entries in canonical order (subject ascending, then
// column, then row) with 17 significant digits, so serialize -> parse ->
// serialize is byte-identical and values round-trip exactly.
//
// Matrix files: optional '#' comment lines, then "rows cols", then one
// line per row of space-separated values at 17 significant digits.

namespace parafac2 {

/// 17-significant-digit decimal form; round-trips a 64-bit float exactly.
inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

inline bool parse_index_field(std::string_view tok, Index& out) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return false;
  out = static_cast<Index>(v);
  return true;
}

inline bool parse_value_field(std::string_view tok, double& out) {
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

[[noreturn]] inline void parse_fail(const std::string& what, long line_no) {
  throw DataError(what + " at line " + std::to_string(line_no));
}

}  // namespace detail

struct ParsedTensor {
  IrregularTensor tensor;
  Index filtered_rows = 0;  // all-zero rows removed across all subjects
};

inline ParsedTensor parse_coordinate_stream(std::istream& in) {
  std::string line;
  long line_no = 0;
  bool have_header = false;
  Index K = 0, J = 0;
  std::vector<std::vector<Triplet>> per_subject;
  std::vector<Index> max_row;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view sv(line);
    const std::size_t first = sv.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    if (sv[first] == '#') continue;
    const auto fields = detail::split_fields(sv);

    if (!have_header) {
      if (fields.size() != 2)
        detail::parse_fail("malformed header (expected 'K J')", line_no);
      if (!detail::parse_index_field(fields[0], K) ||
          !detail::parse_index_field(fields[1], J))
        detail::parse_fail("malformed header (expected 'K J')", line_no);
      if (K <= 0) detail::parse_fail("subject count must be positive", line_no);
      if (J <= 0) detail::parse_fail("column count must be positive", line_no);
      per_subject.resize(static_cast<std::size_t>(K));
      max_row.assign(static_cast<std::size_t>(K), -1);
      have_header = true;
      continue;
    }

    if (fields.size() != 4)
      detail::parse_fail("malformed entry (expected 'k i j v')", line_no);
    Index k, i, j;
    double v;
    if (!detail::parse_index_field(fields[0], k) ||
        !detail::parse_index_field(fields[1], i) ||
        !detail::parse_index_field(fields[2], j) ||
        !detail::parse_value_field(fields[3], v))
      detail::parse_fail("malformed entry (expected 'k i j v')", line_no);
    if (k < 0 || k >= K)
      detail::parse_fail("subject index out of range", line_no);
    if (i < 0) detail::parse_fail("row index out of range", line_no);
    if (j < 0 || j >= J)
      detail::parse_fail("column index out of range", line_no);
    if (!std::isfinite(v)) detail::parse_fail("non-finite value", line_no);
    per_subject[static_cast<std::size_t>(k)].push_back({i, j, v});
    max_row[static_cast<std::size_t>(k)] =
        std::max(max_row[static_cast<std::size_t>(k)], i);
  }
  if (!have_header) throw DataError("empty file: no 'K J' header found");

  ParsedTensor out;
  std::vector<SparseSlice> slices;
  slices.reserve(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    auto& entries = per_subject[static_cast<std::size_t>(k)];
    if (entries.empty())
      throw DataError("subject " + std::to_string(k) +
                      " has no entries (empty slices are rejected)");
    SparseSlice slice = SparseSlice::from_triplets(
        max_row[static_cast<std::size_t>(k)] + 1, J, std::move(entries));
    if (slice.nnz() == 0)
      throw DataError("subject " + std::to_string(k) +
                      " has no entries after summing duplicates");
    auto [filtered, row_map] = filter_zero_rows(slice);
    out.filtered_rows += slice.n_rows() - filtered.n_rows();
    slices.push_back(std::move(filtered));
  }
  out.tensor = IrregularTensor::from_slices(J, std::move(slices));
  return out;
}

inline ParsedTensor parse_coordinate_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return parse_coordinate_stream(in);
}

/// Canonical serialization: optional comment lines, the "K J" header, then
/// entries ordered by subject, column, row.
inline void write_coordinate_stream(std::ostream& out,
                                    const IrregularTensor& t,
                                    const std::vector<std::string>& comments = {}) {
  for (const std::string& c : comments) out << "# " << c << '\n';
  out << t.n_slices() << ' ' << t.n_cols() << '\n';
  for (Index k = 0; k < t.n_slices(); ++k) {
    const SparseSlice& s = t.slice(k);
    for (Index c = 0; c < s.n_nnz_cols(); ++c) {
      auto [p0, p1] = s.col_range(c);
      for (Index p = p0; p < p1; ++p)
        out << k << ' ' << s.entry_row(p) << ' ' << s.col(c) << ' '
            << format_value(s.entry_value(p)) << '\n';
    }
  }
}

inline void write_coordinate_file(const std::string& path,
                                  const IrregularTensor& t,
                                  const std::vector<std::string>& comments = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  write_coordinate_stream(out, t, comments);
  if (!out) throw DataError("failed writing output file: " + path);
}

inline void write_matrix_stream(std::ostream& out, const Matrix& M,
                                const std::string& title) {
  out << "# " << title << '\n' << M.rows() << ' ' << M.cols() << '\n';
  for (Index r = 0; r < M.rows(); ++r) {
    for (Index c = 0; c < M.cols(); ++c) {
      if (c) out << ' ';
      out << format_value(M(r, c));
    }
    out << '\n';
  }
}

inline Matrix read_matrix_stream(std::istream& in) {
  std::string line;
  long line_no = 0;
  Index rows = -1, cols = -1;
  Matrix M;
  Index r = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view sv(line);
    const std::size_t first = sv.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    if (sv[first] == '#') continue;
    const auto fields = detail::split_fields(sv);
    if (rows < 0) {
      if (fields.size() != 2 || !detail::parse_index_field(fields[0], rows) ||
          !detail::parse_index_field(fields[1], cols) || rows < 0 || cols < 0)
        detail::parse_fail("malformed matrix header (expected 'rows cols')",
                           line_no);
      M.resize(rows, cols);
      continue;
    }
    if (r >= rows) detail::parse_fail("unexpected extra matrix row", line_no);
    if (static_cast<Index>(fields.size()) != cols)
      detail::parse_fail("wrong number of values in matrix row", line_no);
    for (Index c = 0; c < cols; ++c) {
      double v;
      if (!detail::parse_value_field(fields[static_cast<std::size_t>(c)], v))
        detail::parse_fail("malformed matrix value", line_no);
      M(r, c) = v;
    }
    ++r;
  }
  if (rows < 0) throw DataError("empty matrix file");
  if (r != rows) throw DataError("matrix file ended before all rows were read");
  return M;
}

inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open matrix file: " + path);
  return read_matrix_stream(in);
}

inline void write_matrix_file(const std::string& path, const Matrix& M,
                              const std::string& title) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  write_matrix_stream(out, M, title);
  if (!out) throw DataError("failed writing output file: " + path);
}

/// Writes the full factor set into a directory: V.txt, S.txt (row k holds
/// diag(S_k)), H.txt, one U_<k>.txt per subject (U_k = Q_k H), and
/// manifest.json listing dimensions, files and caller-supplied metadata
/// (e.g. the solver configuration). Values round-trip exactly.
inline void write_factors(const Parafac2Factors& f, const std::string& out_dir,
                          const nlohmann::json& metadata = nlohmann::json::object()) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_matrix_file((dir / "V.txt").string(), f.V,
                    "column factor V (J x R)");
  write_matrix_file((dir / "S.txt").string(), f.S,
                    "subject scales S (K x R; row k = diag(S_k))");
  write_matrix_file((dir / "H.txt").string(), f.H, "shared factor H (R x R)");
  nlohmann::json u_files = nlohmann::json::array();
  const std::vector<Matrix> U = assemble_U(f);
  for (std::size_t k = 0; k < U.size(); ++k) {
    const std::string name = "U_" + std::to_string(k) + ".txt";
    write_matrix_file((dir / name).string(), U[k],
                      "subject factor U_" + std::to_string(k) + " (I_k x R)");
    u_files.push_back(name);
  }
  nlohmann::json manifest;
  manifest["rank"] = f.rank;
  manifest["subjects"] = f.Q.size();
  manifest["columns"] = f.V.rows();
  manifest["files"] = {{"V", "V.txt"}, {"S", "S.txt"}, {"H", "H.txt"},
                       {"U", u_files}};
  manifest["prng"] = "mt19937_64; uniforms = (x >> 11) * 2^-53; normals via "
                     "Box-Muller; per-subject substreams via splitmix64";
  if (!metadata.empty()) manifest["config"] = metadata;
  std::ofstream m(dir / "manifest.json");
  if (!m) throw DataError("cannot open output file: manifest.json");
  m << manifest.dump(2) << '\n';
  if (!m) throw DataError("failed writing manifest.json");
}

/// Per-iteration trace in tab-separated form. Contains only values that are
/// deterministic for a fixed configuration and seed (no timings), so two
/// identical runs produce byte-identical files.
inline void write_trace_tsv(std::ostream& out, const FitTrace& trace) {
  out << "iter\tresidual_sq\tfit\n";
  for (const IterationStats& s : trace.iterations)
    out << s.iter << '\t' << format_value(s.residual_sq) << '\t'
        << format_value(s.fit) << '\n';
}

/// Components of subject k ordered by decreasing diag(S_k) value, ties
/// broken toward the lower component index; the first top_n are returned.
inline std::vector<std::pair<Index, double>> rank_components(const Matrix& S,
                                                             Index subject,
                                                             Index top_n) {
  if (subject < 0 || subject >= S.rows())
    throw DataError("subject index out of range: " + std::to_string(subject));
  if (top_n < 0 || top_n > S.cols())
    throw std::invalid_argument("top_n must be between 0 and the rank");
  std::vector<std::pair<Index, double>> order;
  order.reserve(static_cast<std::size_t>(S.cols()));
  for (Index r = 0; r < S.cols(); ++r) order.emplace_back(r, S(subject, r));
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  order.resize(static_cast<std::size_t>(top_n));
  return order;
}

}  // namespace parafac2
