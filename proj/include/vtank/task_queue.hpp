#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "vtank/clock.hpp"
#include "vtank/store.hpp"

namespace vtank {

enum class TaskKind { ValidateGeometry, SubmitSimulation };
const char* to_string(TaskKind k) noexcept;

enum class TaskState { Pending, Done, Failed };

struct Task {
  std::string id;
  TaskKind kind = TaskKind::ValidateGeometry;
  Json payload;
  std::string dedup_key;
  int attempts = 0;
  Millis next_attempt_at = 0;
  Millis lease_until = 0;
  TaskState state = TaskState::Pending;
  std::string last_error;
};

void to_json(Json& j, const Task& t);
void from_json(const Json& j, Task& t);

struct RetryPolicy {
  Millis base_ms = 30'000;
  Millis cap_ms = 30 * 60'000;
  int max_attempts = 50;
  Millis visibility_timeout_ms = 10 * 60'000;

  /// Delay before the attempt following failed attempt number `attempts`.
  Millis backoff(int attempts) const;
};

/// Durable at-least-once queue on the metadata store. A claimed task is
/// leased; if the worker dies the lease lapses and the task is handed out
/// again, so handlers must be idempotent.
class TaskQueue {
 public:
  using Handler = std::function<void(const Task&)>;
  /// Called once when a task gives up after max_attempts.
  using Exhausted = std::function<void(const Task&)>;

  TaskQueue(MetadataStore& store, const Clock& clock, RetryPolicy policy = {});

  /// With a dedup key, enqueueing while an equal-keyed task is pending
  /// returns the existing id instead of adding a second task.
  std::string enqueue(TaskKind kind, Json payload, const std::string& dedup_key = {});

  std::optional<Task> claim();
  void complete(const std::string& id);
  /// Records a failed attempt. Returns false when the task is exhausted.
  bool retry(const std::string& id, const std::string& error);
  void give_up(const std::string& id, const std::string& error);

  void on(TaskKind kind, Handler handler, Exhausted exhausted = {});
  /// Claims and runs at most one due task. Errors with a transient code
  /// (Unreachable, Io) are retried with backoff, anything else fails the
  /// task permanently.
  bool run_once();
  /// Runs due tasks until none is due right now.
  int run_due();

  std::optional<Task> get(const std::string& id);
  std::vector<Task> pending();
  const RetryPolicy& policy() const { return policy_; }

 private:
  MetadataStore& store_;
  const Clock& clock_;
  RetryPolicy policy_;
  std::map<TaskKind, std::pair<Handler, Exhausted>> handlers_;
};

}  // namespace vtank
