#include <gtest/gtest.h>

#include "vtank/error.hpp"
#include "vtank/log.hpp"
#include "vtank/task_queue.hpp"
#include "world.hpp"

using namespace vtank;
using namespace vtank::testkit;

TEST(Backoff, DoublesUpToCap) {
  RetryPolicy p;
  EXPECT_EQ(p.backoff(1), 30'000);
  EXPECT_EQ(p.backoff(2), 60'000);
  EXPECT_EQ(p.backoff(3), 120'000);
  EXPECT_EQ(p.backoff(6), 960'000);
  EXPECT_EQ(p.backoff(7), 1'800'000);
  EXPECT_EQ(p.backoff(50), 1'800'000);
  for (int k = 1; k < 60; ++k) {
    const double expected = std::min(30'000.0 * std::pow(2.0, k - 1), 1'800'000.0);
    EXPECT_EQ(p.backoff(k), static_cast<Millis>(expected)) << k;
  }
}

TEST(Queue, DedupWhilePendingOnly) {
  MemoryStore store;
  ManualClock clock;
  TaskQueue q(store, clock);
  auto a = q.enqueue(TaskKind::SubmitSimulation, {{"sim_id", "s1"}}, "s1");
  auto b = q.enqueue(TaskKind::SubmitSimulation, {{"sim_id", "s1"}}, "s1");
  EXPECT_EQ(a, b);
  EXPECT_EQ(q.pending().size(), 1u);
  q.on(TaskKind::SubmitSimulation, [](const Task&) {});
  EXPECT_EQ(q.run_due(), 1);
  q.enqueue(TaskKind::SubmitSimulation, {{"sim_id", "s1"}}, "s1");
  EXPECT_EQ(q.pending().size(), 1u);
  EXPECT_EQ(q.get(a)->attempts, 0);
  auto c = q.enqueue(TaskKind::SubmitSimulation, {{"sim_id", "s1"}});
  EXPECT_NE(a, c);
}

TEST(Queue, LeaseHidesTaskUntilTimeout) {
  MemoryStore store;
  ManualClock clock;
  TaskQueue q(store, clock);
  auto id = q.enqueue(TaskKind::ValidateGeometry, {{"geometry_id", "g"}}, "g");
  auto t = q.claim();
  ASSERT_TRUE(t);
  EXPECT_EQ(t->attempts, 1);
  EXPECT_FALSE(q.claim());
  clock.advance_ms(q.policy().visibility_timeout_ms - 1);
  EXPECT_FALSE(q.claim());
  clock.advance_ms(1);
  auto again = q.claim();
  ASSERT_TRUE(again);
  EXPECT_EQ(again->id, id);
  EXPECT_EQ(again->attempts, 2);
}

TEST(Queue, PermanentErrorsGiveUpAndReportOnce) {
  set_log_sink([](LogLevel, const std::string&) {});
  MemoryStore store;
  ManualClock clock;
  TaskQueue q(store, clock);
  int exhausted = 0;
  q.on(
      TaskKind::ValidateGeometry, [](const Task&) { fail(Errc::Validation, "bad"); },
      [&](const Task& t) {
        ++exhausted;
        EXPECT_EQ(t.state, TaskState::Failed);
        EXPECT_NE(t.last_error.find("VALIDATION"), std::string::npos);
      });
  auto id = q.enqueue(TaskKind::ValidateGeometry, {}, "x");
  EXPECT_EQ(q.run_due(), 1);
  clock.advance_ms(3'600'000);
  EXPECT_EQ(q.run_due(), 0);
  EXPECT_EQ(exhausted, 1);
  EXPECT_EQ(q.get(id)->attempts, 1);
}

TEST(Queue, TransientErrorsRetryUntilMaxAttempts) {
  set_log_sink([](LogLevel, const std::string&) {});
  MemoryStore store;
  ManualClock clock;
  RetryPolicy p;
  p.max_attempts = 4;
  TaskQueue q(store, clock, p);
  int calls = 0, exhausted = 0;
  q.on(
      TaskKind::SubmitSimulation, [&](const Task&) { ++calls, fail(Errc::Unreachable, "down"); },
      [&](const Task&) { ++exhausted; });
  auto id = q.enqueue(TaskKind::SubmitSimulation, {}, "s");
  std::vector<Millis> gaps;
  Millis last = clock.now_ms();
  for (int i = 0; i < 100 && q.get(id)->state == TaskState::Pending; ++i) {
    if (q.run_due()) {
      gaps.push_back(clock.now_ms() - last);
      last = clock.now_ms();
    }
    auto t = q.get(id);
    if (t->state == TaskState::Pending) clock.set_ms(t->next_attempt_at);
  }
  EXPECT_EQ(calls, 4);
  EXPECT_EQ(exhausted, 1);
  EXPECT_EQ(q.get(id)->state, TaskState::Failed);
  ASSERT_EQ(gaps.size(), 4u);
  EXPECT_EQ(gaps[1], 30'000);
  EXPECT_EQ(gaps[2], 60'000);
  EXPECT_EQ(gaps[3], 120'000);
}

TEST(Queue, SurvivesRestart) {
  TempDir dir("queue");
  ManualClock clock;
  std::string id;
  {
    SqliteStore store(dir.path / "q.db");
    TaskQueue q(store, clock);
    id = q.enqueue(TaskKind::SubmitSimulation, {{"sim_id", "s9"}}, "s9");
    ASSERT_TRUE(q.claim());  // then the process dies
  }
  SqliteStore store(dir.path / "q.db");
  TaskQueue q(store, clock);
  EXPECT_FALSE(q.claim());
  clock.advance_ms(q.policy().visibility_timeout_ms);
  std::string seen;
  q.on(TaskKind::SubmitSimulation, [&](const Task& t) { seen = t.payload.at("sim_id"); });
  EXPECT_EQ(q.run_due(), 1);
  EXPECT_EQ(seen, "s9");
  EXPECT_EQ(q.get(id)->state, TaskState::Done);
}
