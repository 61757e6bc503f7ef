/* Copyright 2026 The lmmsim Authors.
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
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lmmsim/config.hpp"
#include "lmmsim/errors.hpp"
#include "lmmsim/metrics.hpp"
#include "lmmsim/simengine.hpp"
#include "lmmsim/workload.hpp"

namespace lmmsim {

// A simulation hit an internal assertion; the partial execution trace was
// dumped for inspection.
class SimAbort : public InternalError {
 public:
  SimAbort(const std::string& what, std::string dump_path)
      : InternalError(what), dump_path_(std::move(dump_path)) {}
  const std::string& dump_path() const { return dump_path_; }

 private:
  std::string dump_path_;
};

struct ReportRow {
  Policy policy = Policy::Rserve;
  double rate = 0;
  std::uint64_t seed = 0;
  MetricsReport report;
};

struct ExperimentOutput {
  std::vector<ReportRow> rows;
  std::string report_csv_path;
  std::vector<std::string> trace_paths;
};

namespace detail {

inline std::string cell_trace_path(const std::string& output_dir,
                                   Policy policy, double rate,
                                   std::uint64_t seed) {
  return output_dir + "/trace_" + to_string(policy) + "_r" +
         format_double(rate) + "_s" + format_u64(seed) + ".json";
}

inline ReportRow run_cell(const ExperimentConfig& cfg, Policy policy,
                          double rate, std::uint64_t seed,
                          bool write_trace) {
  std::vector<RequestSpec> workload =
      cfg.workload_file ? read_workload_file(*cfg.workload_file)
                        : generate_workload(cfg.workload_config(rate, seed));
  SimConfig sc = cfg.sim;
  sc.policy = policy;
  Simulation sim(std::move(workload), sc);
  SimResult res;
  try {
    res = sim.run();
  } catch (const DependencyViolation&) {
    // Scheduler bug surface: keep the partial trace for diagnosis.
    const std::string dump = cfg.output_dir + "/failure_trace.json";
    SimResult partial;
    partial.trace = sim.trace();
    std::filesystem::create_directories(cfg.output_dir);
    export_trace(partial, dump);
    try {
      throw;
    } catch (const SimError& e) {
      throw SimAbort(std::string(e.what()) + " (trace dumped)", dump);
    }
  }
  if (write_trace) {
    export_trace(res, cell_trace_path(cfg.output_dir, policy, rate, seed));
  }
  return ReportRow{policy, rate, seed, compute_report(res, cfg.slo_ttft_ms)};
}

}  // namespace detail

// Runs the full (policies x rates x seeds) matrix and writes
// <output_dir>/report.csv. Cells are independent and deterministic, so
// parallel and serial execution produce byte-identical outputs: results are
// collected into slots indexed by cell and written in a fixed order.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg,
                                       int jobs = 1,
                                       bool write_traces = false) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);

  struct Cell {
    Policy policy;
    double rate;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (Policy p : cfg.policies)
    for (double r : cfg.rates)
      for (std::uint64_t s : cfg.seeds) cells.push_back({p, r, s});

  std::vector<ReportRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        rows[i] = detail::run_cell(cfg, cells[i].policy, cells[i].rate,
                                   cells[i].seed, write_traces);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_threads = std::min<std::size_t>(
      cells.size(), static_cast<std::size_t>(std::max(jobs, 1)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentOutput out;
  out.rows = std::move(rows);
  out.report_csv_path = cfg.output_dir + "/report.csv";
  {
    std::ofstream os(out.report_csv_path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + out.report_csv_path);
    os << report_csv_header() << '\n';
    for (const auto& row : out.rows)
      os << report_csv_row(to_string(row.policy), row.rate, row.seed,
                           row.report)
         << '\n';
  }
  if (write_traces)
    for (const auto& c : cells)
      out.trace_paths.push_back(
          detail::cell_trace_path(cfg.output_dir, c.policy, c.rate, c.seed));
  return out;
}

inline std::vector<ReportRow> read_report_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open report: " + path);
  std::string line;
  if (!std::getline(is, line) || line != report_csv_header())
    throw DataError(path + ": unexpected CSV header");
  std::vector<ReportRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const std::string where = path + " line " + format_u64(lineno);
    if (f.size() != 9) throw DataError(where + ": expected 9 fields");
    ReportRow row;
    try {
      row.policy = policy_from_string(std::string(f[0]));
    } catch (const ConfigError& e) {
      throw DataError(where + ": " + e.what());
    }
    row.rate = parse_double(f[1], where + " rate");
    row.seed = parse_u64(f[2], where + " seed");
    row.report.completed = 1;  // per-cell counts are not persisted
    row.report.mean_ttft_ms = parse_double(f[3], where + " mean_ttft_ms");
    row.report.p50_ttft_ms = parse_double(f[4], where + " p50");
    row.report.p90_ttft_ms = parse_double(f[5], where + " p90");
    row.report.p99_ttft_ms = parse_double(f[6], where + " p99");
    row.report.throughput_tok_s =
        parse_double(f[7], where + " throughput_tok_s");
    if (!f[8].empty())
      row.report.slo_attainment = parse_double(f[8], where + " slo_attainment");
    rows.push_back(row);
  }
  return rows;
}

struct CompareRow {
  double rate = 0;
  double baseline_mean_ttft_ms = 0;
  double target_mean_ttft_ms = 0;
  double ttft_reduction_pct = 0;  // positive when the target is faster
  double baseline_throughput_tok_s = 0;
  double target_throughput_tok_s = 0;
  double throughput_ratio = 0;  // target / baseline
};

// Per-rate comparison of two policies over matching (rate, seed) cells.
inline std::vector<CompareRow> compare_policies(
    const std::vector<ReportRow>& rows, Policy baseline, Policy target) {
  std::map<std::pair<double, std::uint64_t>, const ReportRow*> base_cells,
      target_cells;
  for (const auto& row : rows) {
    if (row.policy == baseline) base_cells[{row.rate, row.seed}] = &row;
    if (row.policy == target) target_cells[{row.rate, row.seed}] = &row;
  }
  if (base_cells.empty())
    throw DataError(std::string("baseline policy ") + to_string(baseline) +
                    " absent from report");
  if (target_cells.empty())
    throw DataError(std::string("target policy ") + to_string(target) +
                    " absent from report");

  std::string missing;
  for (const auto& [key, row] : base_cells)
    if (!target_cells.count(key))
      missing += " (" + std::string(to_string(target)) + ", rate=" +
                 format_double(key.first) + ", seed=" +
                 format_u64(key.second) + ")";
  for (const auto& [key, row] : target_cells)
    if (!base_cells.count(key))
      missing += " (" + std::string(to_string(baseline)) + ", rate=" +
                 format_double(key.first) + ", seed=" +
                 format_u64(key.second) + ")";
  if (!missing.empty()) throw DataError("missing report cells:" + missing);

  std::map<double, std::vector<std::pair<const ReportRow*, const ReportRow*>>>
      by_rate;
  for (const auto& [key, row] : base_cells)
    by_rate[key.first].emplace_back(row, target_cells[key]);

  std::vector<CompareRow> out;
  for (const auto& [rate, pairs] : by_rate) {
    CompareRow c;
    c.rate = rate;
    for (const auto& [b, t] : pairs) {
      c.baseline_mean_ttft_ms += b->report.mean_ttft_ms;
      c.target_mean_ttft_ms += t->report.mean_ttft_ms;
      c.baseline_throughput_tok_s += b->report.throughput_tok_s;
      c.target_throughput_tok_s += t->report.throughput_tok_s;
    }
    const double n = static_cast<double>(pairs.size());
    c.baseline_mean_ttft_ms /= n;
    c.target_mean_ttft_ms /= n;
    c.baseline_throughput_tok_s /= n;
    c.target_throughput_tok_s /= n;
    c.ttft_reduction_pct =
        c.baseline_mean_ttft_ms > 0
            ? (1.0 - c.target_mean_ttft_ms / c.baseline_mean_ttft_ms) * 100.0
            : 0;
    c.throughput_ratio = c.baseline_throughput_tok_s > 0
                             ? c.target_throughput_tok_s /
                                   c.baseline_throughput_tok_s
                             : 0;
    out.push_back(c);
  }
  return out;
}

struct BatchSizeRow {
  TokenCount batch_tokens = 0;  // kWholeRequest for the baseline sentinel
  double mean_ttft_ms = 0;
  double throughput_tok_s = 0;
};

inline std::string batch_size_label(TokenCount c) {
  return c == kWholeRequest ? "whole_request" : format_u64(c);
}

// Embedding-batch-size sweep over a fixed workload: per C value, runs
// policies[0] at rates[0] for every seed and averages. Writes
// <output_dir>/batch_size_sweep.csv.
inline std::vector<BatchSizeRow> sweep_batch_size(
    const ExperimentConfig& cfg, const std::vector<TokenCount>& values) {
  if (values.size() < 2)
    throw InputError("sweep-batch-size: need at least 2 C values");
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);

  std::vector<BatchSizeRow> rows;
  for (TokenCount c : values) {
    if (c == 0) throw ConfigError("embedding_batch_size_C: must be >= 1");
    ExperimentConfig cell_cfg = cfg;
    cell_cfg.sim.embedding_batch_tokens = c;
    BatchSizeRow row;
    row.batch_tokens = c;
    for (std::uint64_t seed : cfg.seeds) {
      const ReportRow r = detail::run_cell(
          cell_cfg, cfg.policies.front(), cfg.rates.front(), seed, false);
      row.mean_ttft_ms += r.report.mean_ttft_ms;
      row.throughput_tok_s += r.report.throughput_tok_s;
    }
    row.mean_ttft_ms /= static_cast<double>(cfg.seeds.size());
    row.throughput_tok_s /= static_cast<double>(cfg.seeds.size());
    rows.push_back(row);
  }

  const std::string csv = cfg.output_dir + "/batch_size_sweep.csv";
  std::ofstream os(csv, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + csv);
  os << "embedding_batch_size_C,mean_ttft_ms,throughput_tok_s\n";
  for (const auto& row : rows)
    os << batch_size_label(row.batch_tokens) << ','
       << format_double(row.mean_ttft_ms) << ','
       << format_double(row.throughput_tok_s) << '\n';
  return rows;
}

}  // namespace lmmsim
