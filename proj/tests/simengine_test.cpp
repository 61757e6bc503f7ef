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
#include "lmmsim/simengine.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <map>
#include <random>

#include "lmmsim/metrics.hpp"
#include "lmmsim/workload.hpp"

namespace lmmsim {
namespace {

RequestSpec make_request(RequestId id, TimeMs arrival,
                         const std::string& layout) {
  RequestSpec r;
  r.id = id;
  r.arrival_ms = arrival;
  r.segments = parse_layout(layout);
  return r;
}

SimConfig linear_prefill_config(double delta, int stages, TokenCount budget) {
  SimConfig cfg;
  cfg.policy = Policy::Rserve;
  cfg.stages = stages;
  cfg.token_budget = budget;
  cfg.embedding_batch_tokens = 512;
  cfg.cost.delta_stage_ms_per_token = delta;
  return cfg;
}

// Independent pipeline-timing oracle for a single request whose chunks are
// all ready at time 0: start(k,s) = max(finish(k,s-1), finish(k-1,s)).
double cpp_oracle_ms(const std::vector<double>& chunk_durs, int stages) {
  std::vector<std::vector<double>> finish(
      chunk_durs.size(), std::vector<double>(static_cast<std::size_t>(stages)));
  for (std::size_t k = 0; k < chunk_durs.size(); ++k) {
    for (int s = 0; s < stages; ++s) {
      const double after_prev_stage = s > 0 ? finish[k][s - 1] : 0;
      const double after_prev_chunk = k > 0 ? finish[k - 1][s] : 0;
      finish[k][s] =
          std::max(after_prev_stage, after_prev_chunk) + chunk_durs[k];
    }
  }
  return finish.back().back();
}

double vanilla_oracle_ms(const std::vector<double>& chunk_durs, int stages) {
  double t = 0;
  for (double d : chunk_durs) t += d * stages;
  return t;
}

TEST(SimEngineTest, CppClosedFormFourChunks) {
  // 4 equal chunks through 4 equal stages: (S + K - 1) d.
  auto cfg = linear_prefill_config(0.005, 4, 512);
  const double d = 0.005 * 512;
  const auto res = run_simulation({make_request(0, 0, "T2048")}, cfg);
  ASSERT_EQ(res.requests.size(), 1u);
  EXPECT_NEAR(res.requests[0].ttft_ms, 7 * d, 1e-9);
  EXPECT_EQ(res.chunk_count, 4u);

  cfg.pipeline_mode = PipelineMode::Vanilla;
  const auto res2 = run_simulation({make_request(0, 0, "T2048")}, cfg);
  EXPECT_NEAR(res2.requests[0].ttft_ms, 16 * d, 1e-9);
}

TEST(SimEngineTest, PipelineRecurrenceOracleRandomized) {
  std::mt19937 gen(31);
  for (int trial = 0; trial < 100; ++trial) {
    const TokenCount p = 1 + gen() % 4000;
    const TokenCount b = 1 + gen() % 700;
    const int stages = 1 + static_cast<int>(gen() % 5);
    const double gamma = (gen() % 3) * 0.25;
    SimConfig cfg = linear_prefill_config(0.004, stages, b);
    cfg.cost.gamma_stage_ms = gamma;

    std::vector<double> durs;
    for (TokenCount done = 0; done < p;) {
      const TokenCount chunk = std::min<TokenCount>(b, p - done);
      durs.push_back(stage_time_ms(cfg.cost, chunk, 0));
      done += chunk;
    }

    const auto req = make_request(0, 0, "T" + format_u64(p));
    const auto res = run_simulation({req}, cfg);
    EXPECT_NEAR(res.requests[0].ttft_ms, cpp_oracle_ms(durs, stages), 1e-9)
        << "p=" << p << " b=" << b << " stages=" << stages;

    cfg.pipeline_mode = PipelineMode::Vanilla;
    const auto res2 = run_simulation({req}, cfg);
    EXPECT_NEAR(res2.requests[0].ttft_ms, vanilla_oracle_ms(durs, stages),
                1e-9);
  }
}

// Two consecutive multimodal items with encode(item) == prefill(item) == e
// and a single stage: the streaming schedule prefills item 1 while item 2
// encodes, finishing at 3e; the encode-everything-first baseline needs 4e.
TEST(SimEngineTest, ConsecutiveItemsOverlapOracle) {
  SimConfig cfg;
  cfg.stages = 1;
  cfg.token_budget = 512;
  cfg.embedding_batch_tokens = 512;
  cfg.cost.beta_enc_ms_per_token = 0.01;
  cfg.cost.delta_stage_ms_per_token = 0.01;
  const double e = 0.01 * 512;
  const auto workload = {make_request(0, 0, "M512|M512")};

  cfg.policy = Policy::IntraOnly;
  const auto intra = run_simulation(workload, cfg);
  EXPECT_NEAR(intra.requests[0].ttft_ms, 3 * e, 1e-9);

  cfg.policy = Policy::Rserve;
  const auto rserve = run_simulation(workload, cfg);
  EXPECT_NEAR(rserve.requests[0].ttft_ms, 3 * e, 1e-9);

  cfg.policy = Policy::EpdBaseline;
  const auto epd = run_simulation(workload, cfg);
  EXPECT_NEAR(epd.requests[0].ttft_ms, 4 * e, 1e-9);

  EXPECT_LT(intra.requests[0].ttft_ms, epd.requests[0].ttft_ms);

  // The second chunk must start the instant item 2's embeddings land (2e).
  std::vector<const TraceEvent*> stage_events;
  for (const auto& ev : intra.trace)
    if (ev.kind == TraceKind::Stage) stage_events.push_back(&ev);
  ASSERT_EQ(stage_events.size(), 2u);
  EXPECT_NEAR(stage_events[1]->start_ms, 2 * e, 1e-9);
}

double interval_overlap_ms(const std::vector<std::pair<double, double>>& a,
                           const std::vector<std::pair<double, double>>& b) {
  double overlap = 0;
  for (const auto& [s1, e1] : a)
    for (const auto& [s2, e2] : b)
      overlap += std::max(0.0, std::min(e1, e2) - std::max(s1, s2));
  return overlap;
}

// Encoder and pipeline busy simultaneously on the same request under the
// streaming policies; never under the encode-everything-first baseline.
TEST(SimEngineTest, EncoderPrefillOverlapByPolicy) {
  SimConfig cfg;
  cfg.stages = 2;
  cfg.token_budget = 256;
  cfg.embedding_batch_tokens = 512;
  cfg.cost.alpha_enc_ms = 1;
  cfg.cost.beta_enc_ms_per_token = 0.01;
  cfg.cost.delta_stage_ms_per_token = 0.01;
  const auto workload = {make_request(0, 0, "T100|M512|M512|M512")};

  for (Policy policy : {Policy::IntraOnly, Policy::Rserve,
                        Policy::EpdBaseline}) {
    cfg.policy = policy;
    const auto res = run_simulation(workload, cfg);
    std::vector<std::pair<double, double>> encode, stage;
    for (const auto& ev : res.trace) {
      if (ev.kind == TraceKind::Encode)
        encode.push_back({ev.start_ms, ev.start_ms + ev.dur_ms});
      if (ev.kind == TraceKind::Stage)
        stage.push_back({ev.start_ms, ev.start_ms + ev.dur_ms});
    }
    const double overlap = interval_overlap_ms(encode, stage);
    if (policy == Policy::EpdBaseline)
      EXPECT_NEAR(overlap, 0.0, 1e-12);
    else
      EXPECT_GT(overlap, 0.0);
  }
}

TEST(SimEngineTest, TransferLatencyCanHurtDisaggregation) {
  SimConfig cfg;
  cfg.policy = Policy::EpdBaseline;
  cfg.stages = 2;
  cfg.cost.beta_enc_ms_per_token = 0.001;
  cfg.cost.delta_stage_ms_per_token = 0.005;
  const auto workload = {make_request(0, 0, "T100|M500")};

  cfg.cost.eps_tx_ms = 50;
  cfg.cost.zeta_tx_ms_per_token = 0.01;
  const auto remote = run_simulation(workload, cfg);
  cfg.cost.eps_tx_ms = 0;
  cfg.cost.zeta_tx_ms_per_token = 0;
  const auto colocated = run_simulation(workload, cfg);
  EXPECT_GT(remote.requests[0].ttft_ms, colocated.requests[0].ttft_ms);
}

TEST(SimEngineTest, EmptyWorkload) {
  SimConfig cfg;
  cfg.cost.delta_stage_ms_per_token = 0.005;
  const auto res = run_simulation({}, cfg);
  EXPECT_TRUE(res.empty());
  EXPECT_TRUE(res.trace.empty());
  EXPECT_EQ(res.makespan_ms(), 0.0);
}

std::vector<RequestSpec> demo_workload(std::uint64_t seed, double rate) {
  WorkloadConfig w;
  w.arrival_rate = rate;
  w.duration_s = 1.5;
  w.seed = seed;
  RequestTemplate t1;
  t1.pattern = LayoutPattern::Alternating;
  t1.num_mm_items = IntDistribution::uniform(1, 4);
  t1.mm_item_tokens = IntDistribution::uniform(100, 400);
  t1.text_segment_tokens = IntDistribution::uniform(20, 200);
  RequestTemplate t2;
  t2.pattern = LayoutPattern::ConsecutiveMm;
  t2.num_mm_items = IntDistribution::uniform(2, 5);
  t2.mm_item_tokens = IntDistribution::uniform(50, 300);
  t2.text_segment_tokens = IntDistribution::uniform(100, 500);
  RequestTemplate t3;
  t3.pattern = LayoutPattern::TextFirst;
  t3.num_mm_items = IntDistribution::constant(0);
  t3.text_segment_tokens = IntDistribution::uniform(200, 900);
  w.template_mix = {{t1, 0.5}, {t2, 0.3}, {t3, 0.2}};
  return generate_workload(w);
}

SimConfig demo_sim_config(Policy policy) {
  SimConfig cfg;
  cfg.policy = policy;
  cfg.stages = 4;
  cfg.token_budget = 512;
  cfg.embedding_batch_tokens = 256;
  cfg.cost.alpha_enc_ms = 1;
  cfg.cost.beta_enc_ms_per_token = 0.01;
  cfg.cost.eps_tx_ms = 0.2;
  cfg.cost.zeta_tx_ms_per_token = 0.001;
  cfg.cost.gamma_stage_ms = 0.5;
  cfg.cost.delta_stage_ms_per_token = 0.008;
  return cfg;
}

TEST(SimEngineTest, DeterministicAcrossRuns) {
  const auto workload = demo_workload(99, 30);
  ASSERT_GT(workload.size(), 10u);
  const auto cfg = demo_sim_config(Policy::Rserve);
  const auto a = run_simulation(workload, cfg);
  const auto b = run_simulation(workload, cfg);
  EXPECT_EQ(a.trace, b.trace);
  ASSERT_EQ(a.requests.size(), b.requests.size());
  for (std::size_t i = 0; i < a.requests.size(); ++i) {
    EXPECT_EQ(a.requests[i].ttft_ms, b.requests[i].ttft_ms);
    EXPECT_EQ(a.requests[i].slices, b.requests[i].slices);
  }
}

TEST(SimEngineTest, ResourcesNeverOverlapAndChunksFlowForward) {
  for (Policy policy : {Policy::VanillaPp, Policy::EpdBaseline,
                        Policy::IntraOnly, Policy::Rserve}) {
    const auto res = run_simulation(demo_workload(5, 40),
                                    demo_sim_config(policy));

    std::map<int, std::vector<std::pair<double, double>>> by_resource;
    for (const auto& ev : res.trace)
      by_resource[ev.resource].push_back(
          {ev.start_ms, ev.start_ms + ev.dur_ms});
    for (auto& [resource, intervals] : by_resource) {
      if (resource == kTransferResource) continue;  // unlimited parallelism
      std::sort(intervals.begin(), intervals.end());
      for (std::size_t i = 1; i < intervals.size(); ++i)
        EXPECT_GE(intervals[i].first, intervals[i - 1].second - 1e-9);
    }

    // Per chunk, stage s+1 starts no earlier than stage s ends.
    std::map<std::size_t, std::vector<std::pair<int, double>>> chunk_stages;
    for (const auto& ev : res.trace) {
      if (ev.kind != TraceKind::Stage) continue;
      std::size_t chunk = 0;
      int stage = 0;
      ASSERT_EQ(std::sscanf(ev.name.c_str(), "chunk%zu_s%d", &chunk, &stage),
                2);
      chunk_stages[chunk].push_back({stage, ev.start_ms});
    }
    for (auto& [chunk, stages] : chunk_stages) {
      std::sort(stages.begin(), stages.end());
      for (std::size_t i = 1; i < stages.size(); ++i)
        EXPECT_GE(stages[i].second, stages[i - 1].second - 1e-9);
    }
  }
}

TEST(SimEngineTest, ConservationAcrossPoliciesRandomized) {
  std::mt19937 gen(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto workload = demo_workload(1000 + trial, 10 + gen() % 60);
    for (Policy policy : {Policy::VanillaPp, Policy::EpdBaseline,
                          Policy::IntraOnly, Policy::Rserve}) {
      const auto res = run_simulation(workload, demo_sim_config(policy));
      ASSERT_EQ(res.requests.size(), workload.size());
      for (const auto& rec : res.requests) {
        EXPECT_TRUE(rec.completed);
        EXPECT_GE(rec.ttft_ms, 0.0);
        EXPECT_GE(rec.queue_delay_ms, 0.0);
        EXPECT_EQ(rec.released_tokens, rec.prompt_tokens);
      }
    }
  }
}

// Streaming with release-after-prefill keeps fewer embeddings resident
// than encode-everything-first, whose peak is the whole prompt.
TEST(SimEngineTest, TrackerMemoryBenefit) {
  SimConfig cfg;
  cfg.stages = 2;
  cfg.token_budget = 512;
  cfg.embedding_batch_tokens = 256;
  cfg.cost.alpha_enc_ms = 0.5;
  cfg.cost.beta_enc_ms_per_token = 0.01;
  cfg.cost.delta_stage_ms_per_token = 0.01;
  const auto workload = {make_request(
      0, 0, "T100|M200|M200|M200|M200|M200|M200|M200|M200|M200|M200")};

  cfg.policy = Policy::EpdBaseline;
  const auto epd = run_simulation(workload, cfg);
  EXPECT_EQ(epd.requests[0].peak_live_tokens, 2100u);

  cfg.policy = Policy::IntraOnly;
  const auto intra = run_simulation(workload, cfg);
  EXPECT_LT(intra.requests[0].peak_live_tokens,
            epd.requests[0].peak_live_tokens);
  // text + C + largest item + S*B of pipeline slack
  EXPECT_LE(intra.requests[0].peak_live_tokens, 100u + 256u + 200u + 1024u);
}

TEST(SimEngineTest, ReleaseTimingDoesNotChangeLatency) {
  const auto workload = demo_workload(3, 20);
  auto cfg = demo_sim_config(Policy::Rserve);
  const auto last = run_simulation(workload, cfg);
  cfg.release_at = ReleaseAt::FirstStage;
  const auto first = run_simulation(workload, cfg);
  ASSERT_EQ(last.requests.size(), first.requests.size());
  for (std::size_t i = 0; i < last.requests.size(); ++i) {
    EXPECT_EQ(last.requests[i].ttft_ms, first.requests[i].ttft_ms);
    EXPECT_LE(first.requests[i].peak_live_tokens,
              last.requests[i].peak_live_tokens);
  }
}

TEST(SimEngineTest, ConfigValidation) {
  SimConfig cfg;
  cfg.cost.delta_stage_ms_per_token = 0.005;
  cfg.stages = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.stages = 4;
  cfg.token_budget = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.token_budget = 512;
  EXPECT_NO_THROW(cfg.validate());

  EXPECT_THROW(run_simulation(
                   {make_request(1, 0, "T10"), make_request(1, 1, "T10")},
                   cfg),
               ConfigError);  // duplicate id
}

}  // namespace
}  // namespace lmmsim
