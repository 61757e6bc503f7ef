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
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "lmmsim/errors.hpp"
#include "lmmsim/request.hpp"

namespace lmmsim {

// Per-request embedding tracker.
//
// Tracks, per token position, whether an embedding is resident: text tokens
// are ready from creation (their lookup cost is negligible and modeled as
// zero), multimodal tokens become ready when their item finishes encoding.
// Prefill consumes tokens strictly left to right through a frontier; a token
// is "schedulable" when its embedding is ready and every preceding token has
// either completed prefill or is itself schedulable — i.e. the schedulable
// set is the contiguous ready run starting at the frontier.
//
// Embeddings are released exactly once, after the chunk that prefilled them
// completes (the engine decides when); live_embedding_tokens is the
// ready-but-unreleased count, the tracker's memory footprint in tokens.
// Multiplied by hidden_size it gives resident embedding scalars; no real
// payloads are ever allocated.
class EmbeddingTracker {
 public:
  EmbeddingTracker(const RequestSpec& req, std::uint32_t hidden_size)
      : request_id_(req.id),
        total_tokens_(req.total_tokens()),
        hidden_size_(hidden_size),
        ready_(total_tokens_, false),
        items_(req.mm_item_ranges()) {
    TokenIndex pos = 0;
    for (const auto& seg : req.segments) {
      if (seg.kind == SegmentKind::Text)
        for (TokenCount i = 0; i < seg.tokens; ++i) ready_[pos + i] = true;
      pos += seg.tokens;
    }
    live_ = req.text_tokens();
    peak_live_ = live_;
    advance_ready_run();
  }

  RequestId request_id() const { return request_id_; }
  TokenCount total_tokens() const { return total_tokens_; }
  std::uint32_t hidden_size() const { return hidden_size_; }
  TokenIndex prefilled_frontier() const { return frontier_; }
  TokenCount live_embedding_tokens() const { return live_; }
  TokenCount peak_live_embedding_tokens() const { return peak_live_; }
  // Resident embedding scalars; the simulator accounts bytes, it never
  // allocates payloads.
  std::uint64_t live_embedding_scalars() const {
    return live_ * hidden_size_;
  }
  TokenCount released_tokens() const { return released_; }
  std::size_t mm_item_count() const { return items_.size(); }
  bool all_encoded() const { return encoded_items_ == items_.size(); }
  bool fully_prefilled() const { return frontier_ == total_tokens_; }
  bool fully_released() const { return released_ == total_tokens_; }

  // Length of the contiguous ready run starting at the frontier.
  TokenCount schedulable_tokens() const { return ready_run_end_ - frontier_; }

  // Marks one multimodal item's embeddings resident. The range must cover
  // exactly one item and the item must not have been encoded before.
  void mark_encoded(TokenRange item_range) {
    const auto it = std::find_if(
        items_.begin(), items_.end(),
        [&](const TokenRange& r) { return r.start == item_range.start; });
    if (it == items_.end() || it->end != item_range.end) {
      throw AlignmentError("request " + format_u64(request_id_) +
                           ": encode range [" + format_u64(item_range.start) +
                           "," + format_u64(item_range.end) +
                           ") does not cover one multimodal item");
    }
    if (ready_[item_range.start]) {
      throw DoubleEncodeError("request " + format_u64(request_id_) +
                              ": range [" + format_u64(item_range.start) +
                              "," + format_u64(item_range.end) +
                              ") already encoded");
    }
    for (TokenIndex i = item_range.start; i < item_range.end; ++i)
      ready_[i] = true;
    ++encoded_items_;
    live_ += item_range.length();
    peak_live_ = std::max(peak_live_, live_);
    advance_ready_run();
  }

  // Consumes n schedulable tokens for prefill and returns the consumed
  // range. Release happens separately when the owning chunk completes.
  TokenRange advance_prefill(TokenCount n_tokens) {
    if (n_tokens == 0)
      throw InternalError("advance_prefill: zero-token advance");
    if (n_tokens > schedulable_tokens()) {
      throw DependencyViolation(
          "request " + format_u64(request_id_) + ": advance of " +
          format_u64(n_tokens) + " tokens exceeds schedulable frontier (" +
          format_u64(schedulable_tokens()) + " at token " +
          format_u64(frontier_) + ")");
    }
    const TokenRange consumed{frontier_, frontier_ + n_tokens};
    frontier_ += n_tokens;
    return consumed;
  }

  // Releases the embeddings of a prefilled range. Ranges arrive in prefill
  // order and each token is released exactly once.
  void release(TokenRange range) {
    if (range.start != released_ || range.end > frontier_)
      throw InternalError("request " + format_u64(request_id_) +
                          ": out-of-order release of [" +
                          format_u64(range.start) + "," +
                          format_u64(range.end) + ") at released frontier " +
                          format_u64(released_));
    released_ = range.end;
    live_ -= range.length();
  }

 private:
  void advance_ready_run() {
    while (ready_run_end_ < total_tokens_ && ready_[ready_run_end_])
      ++ready_run_end_;
  }

  RequestId request_id_;
  TokenCount total_tokens_;
  std::uint32_t hidden_size_;
  std::vector<bool> ready_;
  std::vector<TokenRange> items_;
  TokenIndex frontier_ = 0;
  TokenIndex released_ = 0;
  TokenIndex ready_run_end_ = 0;  // first not-ready index >= frontier_
  TokenCount live_ = 0;
  TokenCount peak_live_ = 0;
  std::size_t encoded_items_ = 0;
};

// Request id -> tracker, for requests admitted and not yet fully
// prefilled-and-released. Owned by the single-threaded simulation loop.
class TrackerRegistry {
 public:
  EmbeddingTracker& create(const RequestSpec& req, std::uint32_t hidden_size) {
    auto [it, inserted] =
        trackers_.try_emplace(req.id, EmbeddingTracker(req, hidden_size));
    if (!inserted)
      throw RegistryError("duplicate request id " + format_u64(req.id));
    return it->second;
  }

  EmbeddingTracker& get(RequestId id) {
    const auto it = trackers_.find(id);
    if (it == trackers_.end())
      throw RegistryError("unknown request id " + format_u64(id));
    return it->second;
  }

  const EmbeddingTracker* find(RequestId id) const {
    const auto it = trackers_.find(id);
    return it == trackers_.end() ? nullptr : &it->second;
  }

  bool contains(RequestId id) const { return trackers_.count(id) != 0; }
  std::size_t size() const { return trackers_.size(); }

  void erase(RequestId id) {
    if (trackers_.erase(id) == 0)
      throw RegistryError("erase of unknown request id " + format_u64(id));
  }

 private:
  std::unordered_map<RequestId, EmbeddingTracker> trackers_;
};

// Tracker creation for a newly admitted request.
inline EmbeddingTracker& create_tracker(TrackerRegistry& registry,
                                        const RequestSpec& req,
                                        std::uint32_t hidden_size) {
  req.validate();
  return registry.create(req, hidden_size);
}

}  // namespace lmmsim
