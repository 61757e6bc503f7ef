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
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lmmsim/errors.hpp"
#include "lmmsim/tracker.hpp"

namespace lmmsim {

// Scheduling policies under comparison.
//
//   vanilla_pp   - no chunking: a request's whole prompt is one chunk,
//                  admitted only once every embedding is ready, and chunks
//                  serialize through the pipeline (next enters stage 1 after
//                  the previous exits the last stage).
//   epd_baseline - budgeted chunks through a chunked pipeline, but a request
//                  becomes schedulable only after ALL of its multimodal
//                  items are encoded (whole-request encode batches).
//   intra_only   - tracker-driven readiness with streaming encode batches,
//                  but each micro-batch draws tokens from at most one
//                  request; leftover budget goes unused.
//   rserve       - full token scheduling: one micro-batch aggregates
//                  schedulable tokens across requests under the budget.
enum class Policy { VanillaPp, EpdBaseline, IntraOnly, Rserve };

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::VanillaPp: return "vanilla_pp";
    case Policy::EpdBaseline: return "epd_baseline";
    case Policy::IntraOnly: return "intra_only";
    case Policy::Rserve: return "rserve";
  }
  return "?";
}

inline Policy policy_from_string(const std::string& name) {
  if (name == "vanilla_pp") return Policy::VanillaPp;
  if (name == "epd_baseline") return Policy::EpdBaseline;
  if (name == "intra_only") return Policy::IntraOnly;
  if (name == "rserve") return Policy::Rserve;
  throw ConfigError("policy: unknown name '" + name +
                    "' (expected vanilla_pp, epd_baseline, intra_only or "
                    "rserve)");
}

enum class PipelineMode { Cpp, Vanilla };

// Behavior bundle derived from a policy name. Immutable after construction.
struct PolicyTraits {
  Policy policy = Policy::Rserve;
  PipelineMode default_mode = PipelineMode::Cpp;
  // Schedulable tokens are 0 until every multimodal item is encoded.
  bool require_full_encode = false;
  // A micro-batch draws tokens from at most one request.
  bool single_request_chunks = false;
  // A micro-batch is one request's entire prompt (token budget not applied).
  bool whole_prompt_chunks = false;
  // Encoder batches are forced to whole-request granularity.
  bool whole_request_encode = false;
};

inline PolicyTraits select_policy(Policy policy) {
  PolicyTraits t;
  t.policy = policy;
  switch (policy) {
    case Policy::VanillaPp:
      t.default_mode = PipelineMode::Vanilla;
      t.require_full_encode = true;
      t.single_request_chunks = true;
      t.whole_prompt_chunks = true;
      t.whole_request_encode = true;
      break;
    case Policy::EpdBaseline:
      t.require_full_encode = true;
      t.whole_request_encode = true;
      break;
    case Policy::IntraOnly:
      t.single_request_chunks = true;
      break;
    case Policy::Rserve:
      break;
  }
  return t;
}

// Token slices admitted together as one chunk of pipeline work.
struct MicroBatch {
  std::vector<std::pair<RequestId, TokenRange>> slices;  // queue order
  TokenCount total_tokens = 0;
  TimeMs creation_ms = 0;
};

struct SchedulerQueues {
  std::deque<RequestId> waiting;  // FCFS arrival order between sweeps
};

// Schedulable tokens as seen by a policy: the baseline policies hide a
// request until its last item is encoded, the tracker-driven policies see
// the ready frontier directly.
inline TokenCount policy_schedulable(const PolicyTraits& traits,
                                     const EmbeddingTracker& tracker) {
  if (traits.require_full_encode && !tracker.all_encoded()) return 0;
  return tracker.schedulable_tokens();
}

// One scheduling sweep: walk the waiting queue front to back while budget
// remains, admit min(schedulable, remaining budget) tokens per request and
// advance its frontier; a request that still has unprefilled tokens is kept
// and re-enters at the queue front, in the order it was swept, so it is the
// first candidate next round. Blocked requests (no schedulable tokens)
// consume no budget and are likewise retained. Returns nullopt when nothing
// could be admitted.
inline std::optional<MicroBatch> build_microbatch(SchedulerQueues& queues,
                                                  TrackerRegistry& registry,
                                                  TokenCount budget,
                                                  const PolicyTraits& traits,
                                                  TimeMs now) {
  if (budget == 0) throw ConfigError("token_budget_B: must be >= 1");

  auto& q = queues.waiting;
  MicroBatch mb;
  mb.creation_ms = now;

  if (traits.whole_prompt_chunks) {
    // Whole prompts only: admit the earliest request whose prompt is fully
    // schedulable. Budget does not apply.
    for (std::size_t i = 0; i < q.size(); ++i) {
      EmbeddingTracker& tracker = registry.get(q[i]);
      const TokenCount t = policy_schedulable(traits, tracker);
      if (t == 0) continue;
      mb.slices.emplace_back(q[i], tracker.advance_prefill(t));
      mb.total_tokens = t;
      q.erase(q.begin() + static_cast<std::ptrdiff_t>(i));
      return mb;
    }
    return std::nullopt;
  }

  std::vector<RequestId> retained;
  TokenCount remaining = budget;
  while (!q.empty() && remaining > 0) {
    const RequestId id = q.front();
    q.pop_front();
    EmbeddingTracker& tracker = registry.get(id);
    const TokenCount t = policy_schedulable(traits, tracker);
    if (t == 0) {
      retained.push_back(id);  // blocked; zero tokens admitted
      continue;
    }
    const TokenCount take = std::min(t, remaining);
    mb.slices.emplace_back(id, tracker.advance_prefill(take));
    mb.total_tokens += take;
    remaining -= take;
    if (!tracker.fully_prefilled()) retained.push_back(id);
    if (traits.single_request_chunks) break;
  }
  q.insert(q.begin(), retained.begin(), retained.end());

  if (mb.slices.empty()) return std::nullopt;
  return mb;
}

// Encoder completion feeding back into the tracker. The request becomes
// eligible for the next sweep; an in-flight micro-batch is never preempted.
inline void on_embeddings_ready(TrackerRegistry& registry, RequestId id,
                                TokenRange item_range) {
  registry.get(id).mark_encoded(item_range);
}

}  // namespace lmmsim
