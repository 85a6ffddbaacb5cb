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

// Command-line interface around the library: synthetic data generation,
// model fitting with restarts, per-subject component ranking, kernel
// benchmarking, and dataset summaries.
//
// Exit codes: 0 success, 1 usage error (bad flags/arguments), 2 data error
// (unreadable or malformed input, dimension/config mismatches), 3 numerical
// failure (divergence, iteration caps).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "parafac2/parafac2.hpp"

namespace {

using nlohmann::json;
using namespace parafac2;

struct GenerateArgs {
  std::int64_t subjects = 10;
  std::int64_t cols = 10;
  std::int64_t max_rows = 10;
  std::int64_t rank = 2;
  double density = 1.0;
  std::uint64_t seed = 0;
  bool nonneg_factors = true;
  std::string out;
};

GeneratorSpec to_spec(const GenerateArgs& a) {
  GeneratorSpec spec;
  spec.subjects = a.subjects;
  spec.cols = a.cols;
  spec.max_rows = a.max_rows;
  spec.rank = a.rank;
  spec.density = a.density;
  spec.seed = a.seed;
  spec.nonneg_factors = a.nonneg_factors;
  return spec;
}

void add_generator_flags(CLI::App* cmd, GenerateArgs& a) {
  cmd->add_option("--subjects", a.subjects, "Number of subjects K")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--cols", a.cols, "Number of shared columns J")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-rows", a.max_rows,
                  "Rows per slice before sparsification (I_max)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--rank-true", a.rank, "True rank of the planted model")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--density", a.density,
                  "Per-entry keep probability, in (0, 1]")
      ->check([](const std::string& s) -> std::string {
        try {
          const double d = std::stod(s);
          if (d > 0.0 && d <= 1.0) return {};
        } catch (...) {
        }
        return "density must be in (0, 1]";
      });
  cmd->add_option("--seed", a.seed, "Generator seed");
  cmd->add_flag("--nonneg-factors,!--signed-factors", a.nonneg_factors,
                "Draw factors from [0,1) (default) or [-1,1)");
}

int run_generate(const GenerateArgs& a) {
  const GeneratedTensor g = generate_synthetic(to_spec(a));
  if (g.dropped_subjects > 0)
    std::cerr << "warning: dropped " << g.dropped_subjects
              << " subject(s) whose slices sparsified to empty\n";
  std::vector<std::string> comments = {
      "synthetic irregular tensor",
      "subjects=" + std::to_string(a.subjects) + " cols=" +
          std::to_string(a.cols) + " max_rows=" + std::to_string(a.max_rows) +
          " rank_true=" + std::to_string(a.rank) + " density=" +
          format_value(a.density) + " seed=" + std::to_string(a.seed) +
          " nonneg_factors=" + (a.nonneg_factors ? "1" : "0"),
      "dropped_subjects=" + std::to_string(g.dropped_subjects),
  };
  write_coordinate_file(a.out, g.tensor, comments);
  std::cout << "wrote " << a.out << ": subjects=" << g.tensor.n_slices()
            << " cols=" << g.tensor.n_cols() << " max_rows="
            << g.tensor.max_rows() << " nnz=" << g.tensor.total_nnz() << "\n";
  return 0;
}

struct FitArgs {
  std::string input;
  std::int64_t rank = 1;
  std::int64_t max_iters = 200;
  double tol = 1e-8;
  bool nonneg = true;
  std::string init = "random";
  std::uint64_t seed = 0;
  std::int64_t threads = 1;
  std::int64_t restarts = 1;
  std::string out;
};

json trace_to_json(const FitTrace& t) {
  json iters = json::array();
  for (const IterationStats& s : t.iterations) {
    iters.push_back({{"iter", s.iter},
                     {"residual_sq", s.residual_sq},
                     {"fit", s.fit},
                     {"ms_procrustes", s.ms_procrustes},
                     {"ms_project", s.ms_project},
                     {"ms_cp", s.ms_cp}});
  }
  return {{"iterations", iters},
          {"total_ms", t.total_ms},
          {"converged", t.converged}};
}

int run_fit(const FitArgs& a) {
  const ParsedTensor parsed = parse_coordinate_file(a.input);
  if (parsed.filtered_rows > 0)
    std::cerr << "warning: removed " << parsed.filtered_rows
              << " all-zero row(s)\n";
  const IrregularTensor& X = parsed.tensor;

  SolverConfig cfg;
  cfg.rank = a.rank;
  cfg.max_iters = static_cast<int>(a.max_iters);
  cfg.tol = a.tol;
  cfg.nonneg = a.nonneg;
  cfg.init = a.init == "eye" ? SolverConfig::Init::eye
                             : SolverConfig::Init::random;
  cfg.threads = static_cast<int>(a.threads);

  json restart_reports = json::array();
  Parafac2Factors best_factors;
  FitTrace best_trace;
  int best_restart = -1;
  double best_fit = -std::numeric_limits<double>::infinity();
  for (std::int64_t r = 0; r < a.restarts; ++r) {
    cfg.seed = substream_seed(a.seed, static_cast<std::uint64_t>(r));
    auto [factors, trace] = fit_parafac2(X, cfg);
    const double fit = trace.iterations.back().fit;
    json jr = trace_to_json(trace);
    jr["restart"] = r;
    jr["seed"] = cfg.seed;
    jr["final_fit"] = fit;
    restart_reports.push_back(std::move(jr));
    if (fit > best_fit) {
      best_fit = fit;
      best_restart = static_cast<int>(r);
      best_factors = std::move(factors);
      best_trace = std::move(trace);
    }
  }

  std::cout << "fit=" << format_value(best_fit)
            << " iterations=" << best_trace.iterations.size()
            << " converged=" << (best_trace.converged ? "yes" : "no")
            << " best_restart=" << best_restart << "\n";

  if (!a.out.empty()) {
    json config = {{"input", a.input},
                   {"rank", a.rank},
                   {"max_iters", a.max_iters},
                   {"tol", a.tol},
                   {"nonneg", a.nonneg},
                   {"init", a.init},
                   {"seed", a.seed},
                   {"threads", a.threads},
                   {"restarts", a.restarts}};
    write_factors(best_factors, a.out, config);
    namespace fs = std::filesystem;
    {
      std::ofstream t(fs::path(a.out) / "trace.tsv");
      if (!t) throw DataError("cannot open output file: trace.tsv");
      write_trace_tsv(t, best_trace);
    }
    json report = {{"config", config},
                   {"data",
                    {{"subjects", X.n_slices()},
                     {"columns", X.n_cols()},
                     {"max_rows", X.max_rows()},
                     {"nnz", X.total_nnz()},
                     {"filtered_rows", parsed.filtered_rows}}},
                   {"restarts", restart_reports},
                   {"best_restart", best_restart},
                   {"best_fit", best_fit}};
    std::ofstream rep(fs::path(a.out) / "report.json");
    if (!rep) throw DataError("cannot open output file: report.json");
    rep << report.dump(2) << '\n';
  }
  return 0;
}

struct RankArgs {
  std::string factors_dir;
  std::int64_t subject = 0;
  std::int64_t top = 0;  // 0 = all components
};

int run_rank(const RankArgs& a) {
  namespace fs = std::filesystem;
  const Matrix S = read_matrix_file((fs::path(a.factors_dir) / "S.txt").string());
  const Index top = a.top == 0 ? S.cols() : static_cast<Index>(a.top);
  for (const auto& [component, score] : rank_components(S, a.subject, top))
    std::cout << component << ' ' << format_value(score) << '\n';
  return 0;
}

struct BenchArgs {
  GenerateArgs gen;
  std::int64_t rank = 0;  // 0 = use the generator's true rank
  std::int64_t reps = 3;
  std::int64_t threads = 1;
  std::int64_t budget_mb = 4096;
  std::string out;
};

int run_bench(const BenchArgs& a) {
  const GeneratedTensor g = generate_synthetic(to_spec(a.gen));
  if (g.dropped_subjects > 0)
    std::cerr << "warning: dropped " << g.dropped_subjects
              << " subject(s) whose slices sparsified to empty\n";
  const Index rank = a.rank == 0 ? static_cast<Index>(a.gen.rank)
                                 : static_cast<Index>(a.rank);
  const BenchReport rep = bench_mttkrp(
      g.tensor, rank, static_cast<int>(a.reps), static_cast<int>(a.threads),
      static_cast<std::uint64_t>(a.budget_mb) * 1024 * 1024, a.gen.seed);

  std::cout << "data: subjects=" << rep.subjects << " cols=" << rep.cols
            << " rank=" << rep.rank << " nnz=" << rep.nnz
            << " reps=" << rep.reps << " threads=" << rep.threads << "\n";
  for (const BenchCell& c : rep.cells) {
    std::cout << c.kernel << " mode="
              << (c.mode == 0 ? std::string("sweep") : std::to_string(c.mode))
              << ": ";
    if (c.oom)
      std::cout << "OoM (needs " << c.bytes_needed << " bytes > budget "
                << rep.budget_bytes << ")";
    else
      std::cout << format_value(c.median_ms) << " ms median";
    std::cout << "\n";
  }
  if (rep.naive_oom)
    std::cout << "speedup: unavailable (naive sweep OoM)\n";
  else
    std::cout << "speedup: " << format_value(rep.speedup)
              << "x (naive sweep / specialized sweep)\n";
  std::cout << "specialized peak rss: " << rep.specialized_peak_rss
            << " bytes; naive K*J*R materialization bound: "
            << rep.naive_bound_bytes << " bytes\n";

  if (!a.out.empty()) {
    json cells = json::array();
    for (const BenchCell& c : rep.cells) {
      cells.push_back({{"kernel", c.kernel},
                       {"mode", c.mode},
                       {"times_ms", c.times_ms},
                       {"median_ms", c.median_ms},
                       {"oom", c.oom},
                       {"bytes_needed", c.bytes_needed}});
    }
    json out = {{"data",
                 {{"subjects", rep.subjects},
                  {"columns", rep.cols},
                  {"rank", rep.rank},
                  {"nnz", rep.nnz}}},
                {"reps", rep.reps},
                {"threads", rep.threads},
                {"budget_bytes", rep.budget_bytes},
                {"cells", cells},
                {"specialized_sweep_ms", rep.specialized_sweep_ms},
                {"naive_sweep_ms", rep.naive_sweep_ms},
                {"naive_oom", rep.naive_oom},
                {"speedup", rep.speedup},
                {"specialized_peak_rss", rep.specialized_peak_rss},
                {"naive_bound_bytes", rep.naive_bound_bytes}};
    std::ofstream f(a.out);
    if (!f) throw DataError("cannot open output file: " + a.out);
    f << out.dump(2) << '\n';
  }
  return 0;
}

int run_info(const std::string& input) {
  const ParsedTensor parsed = parse_coordinate_file(input);
  const IrregularTensor& X = parsed.tensor;
  std::uint64_t nnz_cols_total = 0;
  for (Index k = 0; k < X.n_slices(); ++k)
    nnz_cols_total += static_cast<std::uint64_t>(X.slice(k).n_nnz_cols());
  std::cout << "subjects: " << X.n_slices() << "\n"
            << "columns: " << X.n_cols() << "\n"
            << "max rows: " << X.max_rows() << "\n"
            << "nnz: " << X.total_nnz() << "\n"
            << "mean nnz columns per slice: "
            << format_value(static_cast<double>(nnz_cols_total) /
                            static_cast<double>(X.n_slices()))
            << "\n"
            << "filtered zero rows: " << parsed.filtered_rows << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalable PARAFAC2 decomposition of sparse irregular tensors"};
  app.require_subcommand(1);

  GenerateArgs gen_args;
  auto* gen = app.add_subcommand(
      "generate", "Generate a synthetic tensor and write a coordinate file");
  add_generator_flags(gen, gen_args);
  gen->add_option("--out", gen_args.out, "Output coordinate file")->required();

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a PARAFAC2 model to a tensor");
  fit->add_option("input", fit_args.input, "Coordinate tensor file")
      ->required();
  fit->add_option("--rank", fit_args.rank, "Model rank R")
      ->required()
      ->check(CLI::PositiveNumber);
  fit->add_option("--max-iters", fit_args.max_iters, "Outer iteration cap")
      ->check(CLI::PositiveNumber);
  fit->add_option("--tol", fit_args.tol,
                  "Relative fit-change convergence threshold");
  fit->add_flag("--nonneg,!--no-nonneg", fit_args.nonneg,
                "Constrain V and the S_k to be non-negative (default on)");
  fit->add_option("--init", fit_args.init, "Initialization of V")
      ->check(CLI::IsMember({"random", "eye"}));
  fit->add_option("--seed", fit_args.seed, "Base seed (restart r uses substream r)");
  fit->add_option("--threads", fit_args.threads, "Worker thread count")
      ->check(CLI::PositiveNumber);
  fit->add_option("--restarts", fit_args.restarts,
                  "Independent restarts; the best final fit is kept")
      ->check(CLI::PositiveNumber);
  fit->add_option("--out", fit_args.out,
                  "Directory for factors, trace.tsv and report.json");

  RankArgs rank_args;
  auto* rnk = app.add_subcommand(
      "rank", "Order a subject's components by diag(S_k) from exported factors");
  rnk->add_option("--factors", rank_args.factors_dir,
                  "Directory written by 'fit --out'")
      ->required();
  rnk->add_option("--subject", rank_args.subject, "Subject index k")->required();
  rnk->add_option("--top", rank_args.top, "How many components (default: all)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand(
      "bench", "Time specialized vs naive MTTKRP kernels on generated data");
  add_generator_flags(bench, bench_args.gen);
  bench->add_option("--rank", bench_args.rank,
                    "Kernel rank (default: the generator's true rank)");
  bench->add_option("--reps", bench_args.reps, "Repetitions per cell")
      ->check(CLI::PositiveNumber);
  bench->add_option("--threads", bench_args.threads, "Worker thread count")
      ->check(CLI::PositiveNumber);
  bench->add_option("--budget-mb", bench_args.budget_mb,
                    "Memory budget for naive materialization, in MiB")
      ->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_args.out, "JSON report file");

  std::string info_input;
  auto* info = app.add_subcommand("info", "Summarize a coordinate tensor file");
  info->add_option("input", info_input, "Coordinate tensor file")->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_generate(gen_args);
    if (fit->parsed()) return run_fit(fit_args);
    if (rnk->parsed()) return run_rank(rank_args);
    if (bench->parsed()) return run_bench(bench_args);
    if (info->parsed()) return run_info(info_input);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
