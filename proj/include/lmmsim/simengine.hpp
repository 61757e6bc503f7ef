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
#include <deque>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lmmsim/cost_model.hpp"
#include "lmmsim/encoder_sched.hpp"
#include "lmmsim/errors.hpp"
#include "lmmsim/request.hpp"
#include "lmmsim/token_sched.hpp"
#include "lmmsim/tracker.hpp"

namespace lmmsim {

// When a chunk's consumed embeddings are released: after its last pipeline
// stage (default; earlier stages still have the chunk in flight) or after
// its first stage.
enum class ReleaseAt { FirstStage, LastStage };

inline ReleaseAt release_at_from_string(const std::string& name) {
  if (name == "first_stage") return ReleaseAt::FirstStage;
  if (name == "last_stage") return ReleaseAt::LastStage;
  throw ConfigError("release_at: unknown value '" + name +
                    "' (expected first_stage or last_stage)");
}

struct SimConfig {
  Policy policy = Policy::Rserve;
  // Pipeline mode normally follows the policy; tests and sensitivity
  // studies may pin it explicitly.
  std::optional<PipelineMode> pipeline_mode;
  int stages = 4;
  TokenCount token_budget = 512;
  TokenCount embedding_batch_tokens = 1024;  // kWholeRequest = baseline
  int encoder_workers = 1;
  ReleaseAt release_at = ReleaseAt::LastStage;
  std::uint32_t hidden_size = 4096;
  CostModel cost;

  void validate() const {
    if (stages < 1) throw ConfigError("stages: must be >= 1");
    if (token_budget == 0) throw ConfigError("token_budget_B: must be >= 1");
    if (embedding_batch_tokens == 0)
      throw ConfigError("embedding_batch_size_C: must be >= 1");
    if (encoder_workers < 1)
      throw ConfigError("encoder_workers: must be >= 1");
    if (hidden_size == 0) throw ConfigError("hidden_size: must be >= 1");
    cost.validate();
  }

  PipelineMode effective_mode() const {
    return pipeline_mode ? *pipeline_mode : select_policy(policy).default_mode;
  }
};

enum class TraceKind { Encode, Transfer, Stage };

// Resource ids used as Chrome-trace pids.
inline constexpr int kEncoderResourceBase = 1;
inline constexpr int kTransferResource = 50;
inline constexpr int kStageResourceBase = 100;

struct TraceEvent {
  TraceKind kind = TraceKind::Stage;
  int resource = 0;
  std::string name;
  std::vector<RequestId> owners;  // first owner is the Chrome-trace tid
  TimeMs start_ms = 0;
  double dur_ms = 0;
  TokenCount tokens = 0;

  bool operator==(const TraceEvent&) const = default;
};

struct RequestRecord {
  RequestId id = 0;
  TimeMs arrival_ms = 0;
  TokenCount prompt_tokens = 0;
  std::optional<double> slo_ttft_ms;

  bool completed = false;
  TimeMs first_token_ms = -1;       // final prompt chunk exits the last stage
  TimeMs first_admission_ms = -1;   // first slice enters a micro-batch
  TimeMs encode_dispatch_ms = -1;   // first encode batch dispatched
  TimeMs embeddings_ready_ms = -1;  // last transfer finished

  double ttft_ms = 0;
  double queue_delay_ms = 0;
  double encode_span_ms = 0;
  double prefill_span_ms = 0;

  TokenCount released_tokens = 0;
  TokenCount peak_live_tokens = 0;
  std::vector<std::pair<std::size_t, TokenRange>> slices;  // (chunk, range)
};

struct SimResult {
  std::vector<RequestRecord> requests;  // sorted by request id
  std::vector<TraceEvent> trace;
  std::size_t chunk_count = 0;
  std::size_t encode_batch_count = 0;
  std::size_t transfer_count = 0;
  TimeMs first_arrival_ms = 0;
  TimeMs last_completion_ms = 0;

  bool empty() const { return requests.empty(); }
  double makespan_ms() const { return last_completion_ms - first_arrival_ms; }
};

// Deterministic discrete-event simulation of one workload under one policy.
//
// Three resources: encoder worker(s) draining Algorithm-1 batches FCFS, a
// pure-latency transfer link with unlimited parallelism, and an S-stage
// prefill pipeline fed by token-scheduling sweeps. A sweep runs whenever
// the pipeline can admit a chunk: when stage 1 frees (chunked mode) or the
// pipeline drains (vanilla mode), and after arrivals and embedding
// deliveries.
//
// Events at equal timestamps are ordered embedding progress first, then
// stage transitions, then arrivals (a fixed per-kind class plus a monotone
// push counter), so a sweep triggered by a freed stage sees embeddings that
// landed at the same instant, and same-instant arrivals see a settled
// state. Identical inputs give a bit-identical event order, trace and
// result.
class Simulation {
 public:
  Simulation(std::vector<RequestSpec> workload, const SimConfig& cfg)
      : cfg_(cfg), traits_(select_policy(cfg.policy)), requests_(std::move(workload)) {
    cfg_.validate();
    mode_ = cfg_.effective_mode();
    std::sort(requests_.begin(), requests_.end(),
              [](const RequestSpec& a, const RequestSpec& b) {
                if (a.arrival_ms != b.arrival_ms)
                  return a.arrival_ms < b.arrival_ms;
                return a.id < b.id;
              });
    records_.resize(requests_.size());
    for (std::size_t i = 0; i < requests_.size(); ++i) {
      const RequestSpec& r = requests_[i];
      r.validate();
      if (!index_by_id_.emplace(r.id, i).second)
        throw ConfigError("workload: duplicate request id " +
                          format_u64(r.id));
      records_[i].id = r.id;
      records_[i].arrival_ms = r.arrival_ms;
      records_[i].prompt_tokens = r.total_tokens();
      records_[i].slo_ttft_ms = r.slo_ttft_ms;
    }
    stages_.resize(static_cast<std::size_t>(cfg_.stages));
    encoder_busy_.assign(static_cast<std::size_t>(cfg_.encoder_workers),
                         false);
  }

  SimResult run() {
    if (ran_) throw InternalError("Simulation::run called twice");
    ran_ = true;

    for (std::size_t i = 0; i < requests_.size(); ++i)
      push_event(requests_[i].arrival_ms, EventKind::RequestArrival, 0, i);

    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      switch (ev.kind) {
        case EventKind::RequestArrival:
          on_arrival(ev.b);
          break;
        case EventKind::EncodeBatchDone:
          on_encode_done(ev.a, ev.b);
          break;
        case EventKind::TransferDone:
          on_transfer_done(ev.b);
          break;
        case EventKind::StageDone:
          on_stage_done(static_cast<int>(ev.a), ev.b);
          break;
        case EventKind::ChunkComplete:
          on_chunk_complete(ev.b);
          break;
      }
    }
    return finalize();
  }

  // Trace so far; still valid after run() throws, for diagnostics.
  const std::vector<TraceEvent>& trace() const { return trace_; }

 private:
  enum class EventKind {
    RequestArrival,
    EncodeBatchDone,
    TransferDone,
    StageDone,
    ChunkComplete,
  };

  static int event_class(EventKind k) {
    switch (k) {
      case EventKind::EncodeBatchDone:
      case EventKind::TransferDone:
        return 0;  // embedding progress first
      case EventKind::StageDone:
      case EventKind::ChunkComplete:
        return 1;
      case EventKind::RequestArrival:
        return 2;  // arrivals see a settled state
    }
    return 3;
  }

  struct Event {
    TimeMs time;
    int klass;
    std::uint64_t seq;
    EventKind kind;
    std::uint32_t a;   // worker or stage index
    std::uint64_t b;   // request index, batch slot or chunk id
  };

  struct EventAfter {
    bool operator()(const Event& x, const Event& y) const {
      if (x.time != y.time) return x.time > y.time;
      if (x.klass != y.klass) return x.klass > y.klass;
      return x.seq > y.seq;
    }
  };

  struct Chunk {
    std::vector<std::pair<RequestId, TokenRange>> slices;
    TokenCount total_tokens = 0;
    TimeMs created_ms = 0;
    double stage_dur_ms = 0;
    bool released = false;
  };

  struct StageState {
    bool busy = false;
    std::deque<std::size_t> pending;  // chunks done upstream, FIFO
  };

  void push_event(TimeMs time, EventKind kind, std::uint32_t a,
                  std::uint64_t b) {
    events_.push(Event{time, event_class(kind), seq_++, kind, a, b});
  }

  RequestRecord& record(RequestId id) {
    const auto it = index_by_id_.find(id);
    if (it == index_by_id_.end())
      throw InternalError("no record for request " + format_u64(id));
    return records_[it->second];
  }

  void on_arrival(std::uint64_t index) {
    const RequestSpec& req = requests_[index];
    create_tracker(registry_, req, cfg_.hidden_size);
    const TokenCount batch_tokens = traits_.whole_request_encode
                                        ? kWholeRequest
                                        : cfg_.embedding_batch_tokens;
    encoder_queue_.enqueue_request(plan_batches(req, batch_tokens));
    waiting_.waiting.push_back(req.id);
    try_dispatch_encoders();
    try_schedule();
  }

  void try_dispatch_encoders() {
    for (std::size_t w = 0; w < encoder_busy_.size(); ++w) {
      if (encoder_busy_[w]) continue;
      auto batch = encoder_queue_.next_dispatch(true, now_);
      if (!batch) return;
      const std::size_t slot = batches_.size();
      const double dur = encode_time_ms(cfg_.cost, *batch);
      RequestRecord& rec = record(batch->request_id);
      if (rec.encode_dispatch_ms < 0) rec.encode_dispatch_ms = now_;
      trace_.push_back({TraceKind::Encode,
                        kEncoderResourceBase + static_cast<int>(w),
                        "encode_r" + format_u64(batch->request_id) + "_b" +
                            format_u64(slot),
                        {batch->request_id},
                        now_,
                        dur,
                        batch->total_tokens});
      ++encode_batch_count_;
      encoder_busy_[w] = true;
      batches_.push_back(std::move(*batch));
      push_event(now_ + dur, EventKind::EncodeBatchDone,
                 static_cast<std::uint32_t>(w), slot);
    }
  }

  void on_encode_done(std::uint32_t worker, std::uint64_t slot) {
    encoder_busy_[worker] = false;
    const EncodeBatch& batch = batches_[slot];
    const double dur = transfer_time_ms(cfg_.cost, batch.total_tokens);
    trace_.push_back({TraceKind::Transfer,
                      kTransferResource,
                      "transfer_r" + format_u64(batch.request_id) + "_b" +
                          format_u64(slot),
                      {batch.request_id},
                      now_,
                      dur,
                      batch.total_tokens});
    ++transfer_count_;
    push_event(now_ + dur, EventKind::TransferDone, 0, slot);
    try_dispatch_encoders();
  }

  void on_transfer_done(std::uint64_t slot) {
    const EncodeBatch& batch = batches_[slot];
    for (const auto& [item_index, range] : batch.items)
      on_embeddings_ready(registry_, batch.request_id, range);
    record(batch.request_id).embeddings_ready_ms = now_;
    try_schedule();
  }

  bool can_admit() const {
    if (mode_ == PipelineMode::Vanilla) return in_flight_ == 0;
    return !stages_[0].busy;
  }

  void try_schedule() {
    if (waiting_.waiting.empty() || !can_admit()) return;
    auto mb = build_microbatch(waiting_, registry_, cfg_.token_budget,
                               traits_, now_);
    if (!mb) return;

    Chunk chunk;
    chunk.slices = std::move(mb->slices);
    chunk.total_tokens = mb->total_tokens;
    chunk.created_ms = now_;
    double weighted_context = 0;
    for (const auto& [id, range] : chunk.slices) {
      weighted_context += static_cast<double>(range.length()) *
                          static_cast<double>(range.start);
      RequestRecord& rec = record(id);
      if (rec.first_admission_ms < 0) rec.first_admission_ms = now_;
    }
    weighted_context /= static_cast<double>(chunk.total_tokens);
    chunk.stage_dur_ms =
        stage_time_ms(cfg_.cost, chunk.total_tokens, weighted_context);

    const std::size_t chunk_id = chunks_.size();
    for (const auto& [id, range] : chunk.slices)
      record(id).slices.emplace_back(chunk_id, range);
    chunks_.push_back(std::move(chunk));
    ++in_flight_;
    start_stage(0, chunk_id);
  }

  void start_stage(int stage, std::size_t chunk_id) {
    StageState& st = stages_[static_cast<std::size_t>(stage)];
    const Chunk& chunk = chunks_[chunk_id];
    st.busy = true;
    std::vector<RequestId> owners;
    for (const auto& [id, range] : chunk.slices) owners.push_back(id);
    trace_.push_back({TraceKind::Stage,
                      kStageResourceBase + stage,
                      "chunk" + format_u64(chunk_id) + "_s" +
                          format_u64(static_cast<std::uint64_t>(stage)),
                      std::move(owners),
                      now_,
                      chunk.stage_dur_ms,
                      chunk.total_tokens});
    push_event(now_ + chunk.stage_dur_ms, EventKind::StageDone,
               static_cast<std::uint32_t>(stage), chunk_id);
  }

  void on_stage_done(int stage, std::uint64_t chunk_id) {
    StageState& st = stages_[static_cast<std::size_t>(stage)];
    st.busy = false;
    if (stage + 1 < cfg_.stages) {
      StageState& next = stages_[static_cast<std::size_t>(stage + 1)];
      if (!next.busy)
        start_stage(stage + 1, chunk_id);
      else
        next.pending.push_back(chunk_id);
    } else {
      push_event(now_, EventKind::ChunkComplete, 0, chunk_id);
    }
    if (cfg_.release_at == ReleaseAt::FirstStage && stage == 0)
      release_chunk(chunk_id);
    if (!st.busy && !st.pending.empty()) {
      const std::size_t next_chunk = st.pending.front();
      st.pending.pop_front();
      start_stage(stage, next_chunk);
    }
    try_schedule();
  }

  void on_chunk_complete(std::uint64_t chunk_id) {
    if (cfg_.release_at == ReleaseAt::LastStage) release_chunk(chunk_id);
    for (const auto& [id, range] : chunks_[chunk_id].slices) {
      RequestRecord& rec = record(id);
      if (range.end == rec.prompt_tokens) {
        rec.first_token_ms = now_;
        rec.completed = true;
        ++completed_;
        last_completion_ = std::max(last_completion_, now_);
      }
    }
    --in_flight_;
    try_schedule();
  }

  void release_chunk(std::size_t chunk_id) {
    Chunk& chunk = chunks_[chunk_id];
    if (chunk.released)
      throw InternalError("chunk " + format_u64(chunk_id) +
                          " released twice");
    chunk.released = true;
    for (const auto& [id, range] : chunk.slices) {
      EmbeddingTracker& tracker = registry_.get(id);
      tracker.release(range);
      record(id).released_tokens += range.length();
      if (tracker.fully_prefilled() && tracker.fully_released()) {
        record(id).peak_live_tokens = tracker.peak_live_embedding_tokens();
        registry_.erase(id);
      }
    }
  }

  SimResult finalize() {
    if (completed_ != requests_.size()) {
      std::string stuck;
      for (const auto& rec : records_)
        if (!rec.completed) stuck += " " + format_u64(rec.id);
      throw InternalError("simulation quiesced with incomplete requests:" +
                          stuck);
    }
    for (RequestRecord& rec : records_) {
      if (rec.released_tokens != rec.prompt_tokens)
        throw InternalError("request " + format_u64(rec.id) + ": released " +
                            format_u64(rec.released_tokens) + " of " +
                            format_u64(rec.prompt_tokens) + " tokens");
      TokenIndex pos = 0;
      TokenCount admitted = 0;
      for (const auto& [chunk_id, range] : rec.slices) {
        if (range.start != pos)
          throw InternalError("request " + format_u64(rec.id) +
                              ": non-contiguous slice at token " +
                              format_u64(range.start));
        pos = range.end;
        admitted += range.length();
      }
      if (admitted != rec.prompt_tokens)
        throw InternalError("request " + format_u64(rec.id) + ": admitted " +
                            format_u64(admitted) + " of " +
                            format_u64(rec.prompt_tokens) + " tokens");
      rec.ttft_ms = rec.first_token_ms - rec.arrival_ms;
      rec.queue_delay_ms = rec.first_admission_ms - rec.arrival_ms;
      rec.encode_span_ms = rec.encode_dispatch_ms < 0
                               ? 0
                               : rec.embeddings_ready_ms - rec.encode_dispatch_ms;
      rec.prefill_span_ms = rec.first_token_ms - rec.first_admission_ms;
    }

    SimResult result;
    result.requests = std::move(records_);
    std::sort(result.requests.begin(), result.requests.end(),
              [](const RequestRecord& a, const RequestRecord& b) {
                return a.id < b.id;
              });
    result.trace = std::move(trace_);
    result.chunk_count = chunks_.size();
    result.encode_batch_count = encode_batch_count_;
    result.transfer_count = transfer_count_;
    if (!requests_.empty()) {
      result.first_arrival_ms = requests_.front().arrival_ms;
      result.last_completion_ms = last_completion_;
    }
    return result;
  }

  SimConfig cfg_;
  PolicyTraits traits_;
  PipelineMode mode_ = PipelineMode::Cpp;
  std::vector<RequestSpec> requests_;  // sorted by (arrival, id)
  std::vector<RequestRecord> records_;
  std::unordered_map<RequestId, std::size_t> index_by_id_;

  std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
  std::uint64_t seq_ = 0;
  TimeMs now_ = 0;
  bool ran_ = false;

  TrackerRegistry registry_;
  SchedulerQueues waiting_;
  EncoderQueue encoder_queue_;
  std::vector<EncodeBatch> batches_;
  std::vector<bool> encoder_busy_;
  std::vector<StageState> stages_;
  std::vector<Chunk> chunks_;
  std::size_t in_flight_ = 0;
  std::size_t completed_ = 0;
  TimeMs last_completion_ = 0;
  std::size_t encode_batch_count_ = 0;
  std::size_t transfer_count_ = 0;
  std::vector<TraceEvent> trace_;
};

inline SimResult run_simulation(std::vector<RequestSpec> workload,
                                const SimConfig& cfg) {
  Simulation sim(std::move(workload), cfg);
  return sim.run();
}

}  // namespace lmmsim
