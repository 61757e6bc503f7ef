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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmmsim/errors.hpp"
#include "lmmsim/util.hpp"

namespace lmmsim {

using RequestId = std::uint64_t;
using TokenIndex = std::uint64_t;
using TokenCount = std::uint64_t;
using TimeMs = double;  // virtual milliseconds

// Half-open token interval [start, end) within one request's prompt.
struct TokenRange {
  TokenIndex start = 0;
  TokenIndex end = 0;

  TokenCount length() const { return end - start; }
  bool operator==(const TokenRange&) const = default;
};

enum class SegmentKind { Text, Multimodal };

// One contiguous run of prompt tokens of a single kind. A Multimodal
// segment is one indivisible item (one image / audio clip / video unit):
// its tokens are encoded together or not at all.
struct SegmentSpec {
  SegmentKind kind = SegmentKind::Text;
  TokenCount tokens = 0;

  bool operator==(const SegmentSpec&) const = default;
};

struct RequestSpec {
  RequestId id = 0;
  TimeMs arrival_ms = 0;
  std::vector<SegmentSpec> segments;
  std::optional<double> slo_ttft_ms;

  TokenCount total_tokens() const {
    TokenCount n = 0;
    for (const auto& s : segments) n += s.tokens;
    return n;
  }

  TokenCount text_tokens() const {
    TokenCount n = 0;
    for (const auto& s : segments)
      if (s.kind == SegmentKind::Text) n += s.tokens;
    return n;
  }

  TokenCount mm_tokens() const { return total_tokens() - text_tokens(); }

  std::size_t mm_item_count() const {
    std::size_t n = 0;
    for (const auto& s : segments)
      if (s.kind == SegmentKind::Multimodal) ++n;
    return n;
  }

  // Token ranges of the multimodal items, in document order.
  std::vector<TokenRange> mm_item_ranges() const {
    std::vector<TokenRange> out;
    TokenIndex pos = 0;
    for (const auto& s : segments) {
      if (s.kind == SegmentKind::Multimodal)
        out.push_back({pos, pos + s.tokens});
      pos += s.tokens;
    }
    return out;
  }

  void validate() const {
    if (segments.empty())
      throw ConfigError("request " + format_u64(id) + ": segments empty");
    for (const auto& s : segments) {
      if (s.tokens == 0)
        throw ConfigError("request " + format_u64(id) +
                          ": segment token_count must be >= 1");
    }
  }

  bool operator==(const RequestSpec&) const = default;
};

// Layout strings look like "T100|M500|T50|M700".
inline std::string format_layout(const std::vector<SegmentSpec>& segments) {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out.push_back('|');
    out.push_back(segments[i].kind == SegmentKind::Text ? 'T' : 'M');
    out += format_u64(segments[i].tokens);
  }
  return out;
}

inline std::vector<SegmentSpec> parse_layout(std::string_view layout) {
  std::vector<SegmentSpec> segments;
  for (std::string_view tok : split(layout, '|')) {
    if (tok.size() < 2 || (tok[0] != 'T' && tok[0] != 'M'))
      throw InputError("layout: bad segment '" + std::string(tok) + "'");
    SegmentSpec seg;
    seg.kind = tok[0] == 'T' ? SegmentKind::Text : SegmentKind::Multimodal;
    seg.tokens = parse_u64(tok.substr(1), "layout segment");
    if (seg.tokens == 0)
      throw InputError("layout: zero-token segment in '" + std::string(tok) +
                       "'");
    segments.push_back(seg);
  }
  return segments;
}

}  // namespace lmmsim
