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
#include "lmmsim/encoder_sched.hpp"

#include <gtest/gtest.h>

#include <random>

#include "lmmsim/request.hpp"

namespace lmmsim {
namespace {

RequestSpec mm_request(RequestId id, const std::vector<TokenCount>& items) {
  RequestSpec r;
  r.id = id;
  for (TokenCount t : items) r.segments.push_back({SegmentKind::Multimodal, t});
  if (items.empty()) r.segments.push_back({SegmentKind::Text, 1});
  return r;
}

TEST(PlanBatchesTest, ThresholdCrossedAtThirdItem) {
  const auto batches = plan_batches(mm_request(1, {300, 500, 400}), 1024);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].items.size(), 3u);
  EXPECT_EQ(batches[0].total_tokens, 1200u);
}

TEST(PlanBatchesTest, LargeItemsBatchAlone) {
  const auto batches =
      plan_batches(mm_request(1, {1024, 1024, 1024, 1024, 1024}), 1024);
  ASSERT_EQ(batches.size(), 5u);
  for (const auto& b : batches) {
    EXPECT_EQ(b.items.size(), 1u);
    EXPECT_EQ(b.total_tokens, 1024u);
  }
}

TEST(PlanBatchesTest, SmallItemsFlushAsRemainder) {
  const auto batches =
      plan_batches(mm_request(1, std::vector<TokenCount>(20, 32)), 1024);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].items.size(), 20u);
  EXPECT_EQ(batches[0].total_tokens, 640u);
}

TEST(PlanBatchesTest, NoMultimodalItemsNoBatches) {
  RequestSpec r;
  r.id = 1;
  r.segments = parse_layout("T100");
  EXPECT_TRUE(plan_batches(r, 1024).empty());
}

TEST(PlanBatchesTest, ZeroThresholdRejected) {
  EXPECT_THROW(plan_batches(mm_request(1, {100}), 0), ConfigError);
}

TEST(PlanBatchesTest, WholeRequestSentinelYieldsOneBatch) {
  const auto batches =
      plan_batches(mm_request(1, {300, 500, 400, 900}), kWholeRequest);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].items.size(), 4u);
}

// Batches partition the items exactly once in document order, and every
// batch except possibly the trailing flush carries at least C tokens.
TEST(PlanBatchesTest, PartitionProperty) {
  std::mt19937 gen(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<TokenCount> items;
    const std::size_t n = gen() % 24;
    for (std::size_t i = 0; i < n; ++i) items.push_back(1 + gen() % 2048);
    const TokenCount c = trial % 10 == 0 ? kWholeRequest : 1 + gen() % 4096;

    const auto req = mm_request(1, items);
    const auto batches = plan_batches(req, c);

    std::size_t next_item = 0;
    TokenIndex next_pos = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& b = batches[bi];
      ASSERT_FALSE(b.items.empty());
      TokenCount total = 0;
      for (const auto& [index, range] : b.items) {
        EXPECT_EQ(index, next_item++);
        EXPECT_EQ(range.start, next_pos);
        next_pos = range.end;
        total += range.length();
      }
      EXPECT_EQ(total, b.total_tokens);
      if (bi + 1 < batches.size()) {
        EXPECT_GE(b.total_tokens, c);
      }
    }
    EXPECT_EQ(next_item, items.size());
    if (c == kWholeRequest && !items.empty()) {
      EXPECT_EQ(batches.size(), 1u);
    }
  }
}

TEST(EncoderQueueTest, FcfsAcrossRequests) {
  EncoderQueue q;
  q.enqueue_request(plan_batches(mm_request(1, {1024, 1024}), 1024));
  q.enqueue_request(plan_batches(mm_request(2, {512}), 1024));
  ASSERT_EQ(q.pending(), 3u);

  auto b1 = q.next_dispatch(true, 5.0);
  ASSERT_TRUE(b1);
  EXPECT_EQ(b1->request_id, 1u);
  EXPECT_EQ(b1->dispatch_ms, 5.0);

  EXPECT_FALSE(q.next_dispatch(false, 6.0));  // encoder busy

  auto b2 = q.next_dispatch(true, 7.0);
  ASSERT_TRUE(b2);
  EXPECT_EQ(b2->request_id, 1u);  // no overtaking

  auto b3 = q.next_dispatch(true, 8.0);
  ASSERT_TRUE(b3);
  EXPECT_EQ(b3->request_id, 2u);

  EXPECT_FALSE(q.next_dispatch(true, 9.0));  // empty queue
}

}  // namespace
}  // namespace lmmsim
