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

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmmsim/config.hpp"
#include "lmmsim/experiment.hpp"
#include "lmmsim/metrics.hpp"

namespace {

constexpr int kExitUsage = 2;     // bad config / input
constexpr int kExitInternal = 3;  // simulation assertion failed

std::vector<lmmsim::TokenCount> parse_batch_values(
    const std::vector<std::string>& raw) {
  std::vector<lmmsim::TokenCount> values;
  for (const auto& v : raw) {
    if (v == "whole_request")
      values.push_back(lmmsim::kWholeRequest);
    else
      values.push_back(lmmsim::parse_u64(v, "--values entry"));
  }
  return values;
}

int cmd_run(const std::string& config_path, bool trace, int jobs,
            bool dump_config) {
  const auto cfg = lmmsim::ExperimentConfig::load(config_path);
  if (dump_config) {
    std::cout << cfg.to_json().dump(2) << '\n';
    return 0;
  }
  const auto out = lmmsim::run_experiment(cfg, jobs, trace);
  std::cout << "wrote " << out.report_csv_path << " (" << out.rows.size()
            << " rows)\n";
  for (const auto& p : out.trace_paths) std::cout << "wrote " << p << '\n';
  return 0;
}

int cmd_compare(const std::string& csv_path, const std::string& baseline,
                const std::string& target) {
  const auto rows = lmmsim::read_report_csv(csv_path);
  const auto cmp = lmmsim::compare_policies(
      rows, lmmsim::policy_from_string(baseline),
      lmmsim::policy_from_string(target));
  std::cout << target << " vs " << baseline << ":\n";
  for (const auto& c : cmp) {
    std::printf(
        "  rate %-8g mean TTFT %.3f -> %.3f ms (%+.1f%% reduction), "
        "throughput x%.3f\n",
        c.rate, c.baseline_mean_ttft_ms, c.target_mean_ttft_ms,
        c.ttft_reduction_pct, c.throughput_ratio);
  }
  return 0;
}

int cmd_sweep_batch_size(const std::string& config_path,
                         const std::vector<std::string>& raw_values) {
  const auto cfg = lmmsim::ExperimentConfig::load(config_path);
  const auto rows =
      lmmsim::sweep_batch_size(cfg, parse_batch_values(raw_values));
  std::cout << "embedding_batch_size_C,mean_ttft_ms,throughput_tok_s\n";
  for (const auto& r : rows)
    std::cout << lmmsim::batch_size_label(r.batch_tokens) << ','
              << lmmsim::format_double(r.mean_ttft_ms) << ','
              << lmmsim::format_double(r.throughput_tok_s) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for disaggregated multimodal LLM "
               "serving"};
  app.require_subcommand(1);

  std::string config_path, csv_path, baseline, target;
  std::vector<std::string> batch_values;
  bool trace = false, dump_config = false;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Run a policy x rate x seed sweep");
  run->add_option("config", config_path, "experiment config (JSON)")
      ->required();
  run->add_flag("--trace", trace, "write a Chrome trace file per sweep cell");
  run->add_option("--jobs", jobs, "parallel sweep cells")->default_val(1);
  run->add_flag("--dump-config", dump_config,
                "print the normalized config and exit");

  auto* compare = app.add_subcommand("compare",
                                     "Compare two policies from a report");
  compare->add_option("csv", csv_path, "report.csv from a run")->required();
  compare->add_option("--baseline", baseline, "baseline policy")->required();
  compare->add_option("--target", target, "target policy")->required();

  auto* sweep = app.add_subcommand("sweep-batch-size",
                                   "Sweep the embedding batch size C");
  sweep->add_option("config", config_path, "experiment config (JSON)")
      ->required();
  sweep
      ->add_option("--values", batch_values,
                   "C values, e.g. 32,128,512,1024,whole_request")
      ->required()
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, trace, jobs, dump_config);
    if (compare->parsed()) return cmd_compare(csv_path, baseline, target);
    if (sweep->parsed()) return cmd_sweep_batch_size(config_path, batch_values);
  } catch (const lmmsim::SimAbort& e) {
    std::cerr << "simulation aborted: " << e.what() << "\n"
              << "partial trace: " << e.dump_path() << '\n';
    return kExitInternal;
  } catch (const lmmsim::DependencyViolation& e) {
    std::cerr << "simulation aborted: " << e.what() << '\n';
    return kExitInternal;
  } catch (const lmmsim::InternalError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const lmmsim::SimError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return 0;
}
