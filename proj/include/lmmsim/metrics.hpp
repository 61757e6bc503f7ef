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
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmmsim/errors.hpp"
#include "lmmsim/simengine.hpp"
#include "lmmsim/util.hpp"
#include "lmmsim/workload.hpp"

namespace lmmsim {

struct MetricsReport {
  std::size_t completed = 0;
  double mean_ttft_ms = 0;
  double p50_ttft_ms = 0;
  double p90_ttft_ms = 0;
  double p99_ttft_ms = 0;
  double throughput_tok_s = 0;  // input tokens per second over the makespan
  std::optional<double> slo_attainment;
  double makespan_ms = 0;

  bool empty() const { return completed == 0; }
};

// Pure function of a finished simulation; recomputation is idempotent.
// A request's deadline is its own slo_ttft when present, otherwise the
// report-level slo; attainment is omitted when no request has a deadline.
inline MetricsReport compute_report(const SimResult& res,
                                    std::optional<double> slo_ttft_ms) {
  MetricsReport rep;
  if (res.empty()) return rep;  // empty-report marker, not an error

  std::vector<double> ttfts;
  ttfts.reserve(res.requests.size());
  double sum = 0;
  TokenCount tokens = 0;
  std::size_t with_deadline = 0, met_deadline = 0;
  for (const auto& rec : res.requests) {
    ttfts.push_back(rec.ttft_ms);
    sum += rec.ttft_ms;
    tokens += rec.prompt_tokens;
    const std::optional<double> deadline =
        rec.slo_ttft_ms ? rec.slo_ttft_ms : slo_ttft_ms;
    if (deadline) {
      ++with_deadline;
      if (rec.ttft_ms <= *deadline) ++met_deadline;
    }
  }
  std::sort(ttfts.begin(), ttfts.end());

  rep.completed = res.requests.size();
  rep.mean_ttft_ms = sum / static_cast<double>(rep.completed);
  rep.p50_ttft_ms = nearest_rank(ttfts, 50);
  rep.p90_ttft_ms = nearest_rank(ttfts, 90);
  rep.p99_ttft_ms = nearest_rank(ttfts, 99);
  rep.makespan_ms = res.makespan_ms();
  rep.throughput_tok_s = rep.makespan_ms > 0
                             ? static_cast<double>(tokens) /
                                   (rep.makespan_ms / 1000.0)
                             : 0;
  if (with_deadline > 0)
    rep.slo_attainment = static_cast<double>(met_deadline) /
                         static_cast<double>(with_deadline);
  return rep;
}

struct AttainmentCurve {
  std::vector<std::pair<double, double>> points;  // (rate, attainment)
  double coverage_area = 0;  // trapezoidal integral over the rate interval
};

inline AttainmentCurve attainment_curve(
    const std::vector<std::pair<double, MetricsReport>>& reports) {
  if (reports.size() < 2)
    throw InputError("attainment_curve: need at least 2 rate points");
  AttainmentCurve curve;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i > 0 && !(reports[i].first > reports[i - 1].first))
      throw InputError("attainment_curve: rates must be strictly increasing");
    if (!reports[i].second.slo_attainment)
      throw InputError("attainment_curve: report at rate " +
                       format_double(reports[i].first) +
                       " has no slo_attainment");
    curve.points.emplace_back(reports[i].first,
                              *reports[i].second.slo_attainment);
  }
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const auto& [r0, a0] = curve.points[i];
    const auto& [r1, a1] = curve.points[i + 1];
    curve.coverage_area += (r1 - r0) * (a0 + a1) / 2.0;
  }
  return curve;
}

// Chrome trace event format (catapult / chrome://tracing / Perfetto): one
// complete ("ph":"X") event per encode batch, transfer and per-stage chunk
// execution, timestamps in microseconds, pid = resource, tid = request.
inline nlohmann::json trace_to_json(const SimResult& res) {
  nlohmann::json events = nlohmann::json::array();

  std::vector<int> resources;
  for (const auto& ev : res.trace) resources.push_back(ev.resource);
  std::sort(resources.begin(), resources.end());
  resources.erase(std::unique(resources.begin(), resources.end()),
                  resources.end());
  for (int resource : resources) {
    std::string name;
    if (resource >= kStageResourceBase)
      name = "stage-" + format_u64(
                 static_cast<std::uint64_t>(resource - kStageResourceBase));
    else if (resource == kTransferResource)
      name = "transfer";
    else
      name = "encoder-" + format_u64(static_cast<std::uint64_t>(
                 resource - kEncoderResourceBase));
    events.push_back({{"name", "process_name"},
                      {"ph", "M"},
                      {"pid", resource},
                      {"args", {{"name", name}}}});
  }

  for (const auto& ev : res.trace) {
    nlohmann::json e = {
        {"name", ev.name},
        {"ph", "X"},
        {"ts", ev.start_ms * 1000.0},
        {"dur", ev.dur_ms * 1000.0},
        {"pid", ev.resource},
        {"tid", ev.owners.empty() ? 0 : ev.owners.front()},
        {"args", {{"tokens", ev.tokens}}},
    };
    if (ev.owners.size() > 1) e["args"]["requests"] = ev.owners;
    events.push_back(std::move(e));
  }
  return events;
}

inline void export_trace(const SimResult& res, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open trace file for write: " + path);
  os << trace_to_json(res).dump() << '\n';
  if (!os) throw IoError("trace write failed: " + path);
}

// CSV report schema shared by the experiment harness and downstream
// plotting scripts: one row per (policy, rate, seed).
inline std::string report_csv_header() {
  return "policy,rate,seed,mean_ttft_ms,p50,p90,p99,throughput_tok_s,"
         "slo_attainment";
}

inline std::string report_csv_row(const std::string& policy, double rate,
                                  std::uint64_t seed,
                                  const MetricsReport& rep) {
  std::string row = policy;
  row += ',';
  row += format_double(rate);
  row += ',';
  row += format_u64(seed);
  row += ',';
  row += format_double(rep.mean_ttft_ms);
  row += ',';
  row += format_double(rep.p50_ttft_ms);
  row += ',';
  row += format_double(rep.p90_ttft_ms);
  row += ',';
  row += format_double(rep.p99_ttft_ms);
  row += ',';
  row += format_double(rep.throughput_tok_s);
  row += ',';
  if (rep.slo_attainment) row += format_double(*rep.slo_attainment);
  return row;
}

}  // namespace lmmsim
