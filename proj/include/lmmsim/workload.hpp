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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lmmsim/errors.hpp"
#include "lmmsim/request.hpp"
#include "lmmsim/rng.hpp"
#include "lmmsim/util.hpp"

namespace lmmsim {

// Small integer distribution used by request templates.
struct IntDistribution {
  enum class Kind { Constant, Uniform };

  Kind kind = Kind::Constant;
  std::uint64_t lo = 1;  // Constant uses lo only
  std::uint64_t hi = 1;

  static IntDistribution constant(std::uint64_t v) {
    return {Kind::Constant, v, v};
  }
  static IntDistribution uniform(std::uint64_t lo, std::uint64_t hi) {
    return {Kind::Uniform, lo, hi};
  }

  std::uint64_t sample(Rng& rng) const {
    return kind == Kind::Constant ? lo : rng.uniform_int(lo, hi);
  }

  void validate(const std::string& field, std::uint64_t min_value) const {
    if (kind == Kind::Uniform && hi < lo)
      throw ConfigError(field + ": uniform hi < lo");
    if (lo < min_value)
      throw ConfigError(field + ": must be >= " + format_u64(min_value));
  }
};

// How text segments and multimodal items are interleaved in a request.
//   Alternating:   T M T M ... T M   (one text segment before each item)
//   ConsecutiveMm: M M ... M T       (all items adjacent, trailing text)
//   TextFirst:     T M M ... M       (one leading text segment)
// ConsecutiveMm and TextFirst both produce adjacent item pairs whenever a
// request has two or more items; ConsecutiveMm additionally starts with a
// multimodal item, so nothing is schedulable before the first encode.
enum class LayoutPattern { Alternating, ConsecutiveMm, TextFirst };

struct RequestTemplate {
  LayoutPattern pattern = LayoutPattern::Alternating;
  IntDistribution num_mm_items = IntDistribution::constant(1);
  IntDistribution mm_item_tokens = IntDistribution::constant(512);
  IntDistribution text_segment_tokens = IntDistribution::constant(128);

  void validate(const std::string& field) const {
    num_mm_items.validate(field + ".num_mm_items", 0);
    mm_item_tokens.validate(field + ".mm_item_tokens", 1);
    text_segment_tokens.validate(field + ".text_segment_tokens", 1);
  }

  std::vector<SegmentSpec> sample_segments(Rng& rng) const {
    const std::uint64_t n_mm = num_mm_items.sample(rng);
    std::vector<SegmentSpec> segs;
    switch (pattern) {
      case LayoutPattern::Alternating:
        for (std::uint64_t i = 0; i < n_mm; ++i) {
          segs.push_back({SegmentKind::Text, text_segment_tokens.sample(rng)});
          segs.push_back({SegmentKind::Multimodal, mm_item_tokens.sample(rng)});
        }
        if (n_mm == 0)
          segs.push_back({SegmentKind::Text, text_segment_tokens.sample(rng)});
        break;
      case LayoutPattern::ConsecutiveMm:
        for (std::uint64_t i = 0; i < n_mm; ++i)
          segs.push_back({SegmentKind::Multimodal, mm_item_tokens.sample(rng)});
        segs.push_back({SegmentKind::Text, text_segment_tokens.sample(rng)});
        break;
      case LayoutPattern::TextFirst:
        segs.push_back({SegmentKind::Text, text_segment_tokens.sample(rng)});
        for (std::uint64_t i = 0; i < n_mm; ++i)
          segs.push_back({SegmentKind::Multimodal, mm_item_tokens.sample(rng)});
        break;
    }
    return segs;
  }
};

struct WorkloadConfig {
  double arrival_rate = 1.0;  // requests per second
  double duration_s = 10.0;
  std::uint64_t seed = 0;
  std::vector<std::pair<RequestTemplate, double>> template_mix;
  std::optional<double> slo_ttft_ms;  // copied onto every request when set

  void validate() const {
    if (!(arrival_rate > 0))
      throw ConfigError("workload.arrival_rate: must be > 0");
    if (!(duration_s > 0)) throw ConfigError("workload.duration_s: must be > 0");
    if (template_mix.empty())
      throw ConfigError("workload.templates: must not be empty");
    double sum = 0;
    for (std::size_t i = 0; i < template_mix.size(); ++i) {
      const std::string field = "workload.templates[" + format_u64(i) + "]";
      template_mix[i].first.validate(field);
      if (template_mix[i].second < 0)
        throw ConfigError(field + ".probability: must be >= 0");
      sum += template_mix[i].second;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("workload.templates: probabilities sum to " +
                        format_double(sum) + ", expected 1");
  }
};

// Poisson arrivals over [0, duration], one template draw per request.
// The same config (seed included) always yields the same request list.
inline std::vector<RequestSpec> generate_workload(const WorkloadConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  std::vector<double> cumulative;
  double acc = 0;
  for (const auto& [tmpl, p] : cfg.template_mix) {
    acc += p;
    cumulative.push_back(acc);
  }

  const double mean_gap_ms = 1000.0 / cfg.arrival_rate;
  const double horizon_ms = cfg.duration_s * 1000.0;

  std::vector<RequestSpec> out;
  double t = 0;
  double prev = -1;
  for (RequestId id = 0;; ++id) {
    t += rng.exponential(mean_gap_ms);
    if (t > horizon_ms) break;
    if (t <= prev) t = prev + 1e-6;  // ties broken in id order
    prev = t;

    const std::size_t pick = rng.pick_cumulative(cumulative);
    RequestSpec req;
    req.id = id;
    req.arrival_ms = t;
    req.segments = cfg.template_mix[pick].first.sample_segments(rng);
    req.slo_ttft_ms = cfg.slo_ttft_ms;
    req.validate();
    out.push_back(std::move(req));
  }
  return out;
}

struct LayoutStats {
  std::size_t count = 0;
  double mean_total_tokens = 0;
  TokenCount p50_total_tokens = 0;
  TokenCount p90_total_tokens = 0;
  TokenCount p99_total_tokens = 0;
  double mm_token_fraction = 0;
};

// Nearest-rank percentile over a sorted vector.
template <typename T>
T nearest_rank(const std::vector<T>& sorted, double pct) {
  const std::size_t n = sorted.size();
  std::size_t rank =
      static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
  if (rank == 0) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

inline LayoutStats request_layout_stats(const std::vector<RequestSpec>& reqs) {
  if (reqs.empty()) throw InputError("request_layout_stats: empty request list");
  LayoutStats st;
  st.count = reqs.size();
  std::vector<TokenCount> totals;
  totals.reserve(reqs.size());
  TokenCount all = 0, mm = 0;
  for (const auto& r : reqs) {
    const TokenCount t = r.total_tokens();
    totals.push_back(t);
    all += t;
    mm += r.mm_tokens();
  }
  std::sort(totals.begin(), totals.end());
  st.mean_total_tokens = static_cast<double>(all) / static_cast<double>(reqs.size());
  st.p50_total_tokens = nearest_rank(totals, 50);
  st.p90_total_tokens = nearest_rank(totals, 90);
  st.p99_total_tokens = nearest_rank(totals, 99);
  st.mm_token_fraction =
      all == 0 ? 0 : static_cast<double>(mm) / static_cast<double>(all);
  return st;
}

// Workload files: one request per line, `id,arrival_ms,slo_ttft_ms|-,layout`
// with layout like T100|M500. Round-trips are lossless (shortest-exact
// double formatting on write, full precision parse on read).

inline void write_workload(std::ostream& os,
                           const std::vector<RequestSpec>& reqs) {
  for (const auto& r : reqs) {
    os << format_u64(r.id) << ',' << format_double(r.arrival_ms) << ','
       << (r.slo_ttft_ms ? format_double(*r.slo_ttft_ms) : std::string("-"))
       << ',' << format_layout(r.segments) << '\n';
  }
}

inline std::vector<RequestSpec> read_workload(std::istream& is) {
  std::vector<RequestSpec> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    const std::string where = "workload line " + format_u64(lineno);
    if (fields.size() != 4)
      throw InputError(where + ": expected 4 comma-separated fields");
    RequestSpec req;
    req.id = parse_u64(fields[0], where + " id");
    req.arrival_ms = parse_double(fields[1], where + " arrival_ms");
    if (fields[2] != "-")
      req.slo_ttft_ms = parse_double(fields[2], where + " slo_ttft_ms");
    req.segments = parse_layout(fields[3]);
    req.validate();
    out.push_back(std::move(req));
  }
  return out;
}

inline void write_workload_file(const std::string& path,
                                const std::vector<RequestSpec>& reqs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  write_workload(os, reqs);
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<RequestSpec> read_workload_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open workload file: " + path);
  return read_workload(is);
}

}  // namespace lmmsim
