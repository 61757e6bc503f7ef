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
#include <deque>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "lmmsim/errors.hpp"
#include "lmmsim/request.hpp"

namespace lmmsim {

// Sentinel batch threshold: never reached, so a request's items all land in
// one trailing flush batch. This reproduces the encode-everything-first
// baseline where prefill waits for the whole request.
inline constexpr TokenCount kWholeRequest =
    std::numeric_limits<TokenCount>::max();

// An indivisible group of consecutive multimodal items of one request,
// dispatched to the encoder worker as a unit.
struct EncodeBatch {
  RequestId request_id = 0;
  std::vector<std::pair<std::size_t, TokenRange>> items;  // (item index, range)
  TokenCount total_tokens = 0;
  TimeMs dispatch_ms = -1;  // set at dispatch
};

// Walks a request's multimodal items left to right, buffering until at
// least batch_tokens are accumulated, then emits a batch; whatever remains
// after the walk is flushed as a final (possibly undersized) batch. Items
// are never split: a single oversized item forms a batch on its own.
inline std::vector<EncodeBatch> plan_batches(const RequestSpec& req,
                                             TokenCount batch_tokens) {
  if (batch_tokens == 0)
    throw ConfigError("embedding_batch_size_C: must be >= 1");

  std::vector<EncodeBatch> out;
  EncodeBatch buffer;
  buffer.request_id = req.id;

  TokenIndex pos = 0;
  std::size_t item_index = 0;
  for (const auto& seg : req.segments) {
    if (seg.kind == SegmentKind::Multimodal) {
      buffer.items.emplace_back(item_index++,
                                TokenRange{pos, pos + seg.tokens});
      buffer.total_tokens += seg.tokens;
      if (buffer.total_tokens >= batch_tokens) {
        out.push_back(std::move(buffer));
        buffer = EncodeBatch{};
        buffer.request_id = req.id;
      }
    }
    pos += seg.tokens;
  }
  if (!buffer.items.empty()) out.push_back(std::move(buffer));  // remainder
  return out;
}

// FIFO of planned batches across requests. Requests are batched strictly in
// arrival order and a request's batches keep their plan order, so the queue
// is a plain deque: admission appends, dispatch pops the front. A later
// request's batch never overtakes an earlier request's pending batches.
class EncoderQueue {
 public:
  void enqueue_request(std::vector<EncodeBatch> planned) {
    for (auto& b : planned) pending_.push_back(std::move(b));
  }

  // Head-of-line batch if the encoder is idle and work is pending.
  std::optional<EncodeBatch> next_dispatch(bool encoder_idle, TimeMs now) {
    if (!encoder_idle || pending_.empty()) return std::nullopt;
    EncodeBatch batch = std::move(pending_.front());
    pending_.pop_front();
    batch.dispatch_ms = now;
    return batch;
  }

  bool empty() const { return pending_.empty(); }
  std::size_t pending() const { return pending_.size(); }

 private:
  std::deque<EncodeBatch> pending_;
};

}  // namespace lmmsim
