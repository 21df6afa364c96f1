#include "vtank/task_queue.hpp"

#include <algorithm>

#include "vtank/error.hpp"
#include "vtank/log.hpp"

namespace vtank {

const char* to_string(TaskKind k) noexcept {
  return k == TaskKind::ValidateGeometry ? "VALIDATE_GEOMETRY" : "SUBMIT_SIMULATION";
}

namespace {

TaskKind task_kind_from(const std::string& s) {
  if (s == "VALIDATE_GEOMETRY") return TaskKind::ValidateGeometry;
  if (s == "SUBMIT_SIMULATION") return TaskKind::SubmitSimulation;
  fail(Errc::Validation, "unknown task kind " + s);
}

const char* state_name(TaskState s) {
  switch (s) {
    case TaskState::Pending: return "PENDING";
    case TaskState::Done: return "DONE";
    case TaskState::Failed: return "FAILED";
  }
  return "?";
}

TaskState state_from(const std::string& s) {
  if (s == "DONE") return TaskState::Done;
  if (s == "FAILED") return TaskState::Failed;
  return TaskState::Pending;
}

bool transient(Errc c) { return c == Errc::Unreachable || c == Errc::Io; }

}  // namespace

void to_json(Json& j, const Task& t) {
  j = {{"id", t.id},
       {"kind", to_string(t.kind)},
       {"payload", t.payload},
       {"dedup_key", t.dedup_key},
       {"attempts", t.attempts},
       {"next_attempt_at", t.next_attempt_at},
       {"lease_until", t.lease_until},
       {"state", state_name(t.state)},
       {"last_error", t.last_error}};
}

void from_json(const Json& j, Task& t) {
  t.id = j.at("id");
  t.kind = task_kind_from(j.at("kind"));
  t.payload = j.at("payload");
  t.dedup_key = j.value("dedup_key", "");
  t.attempts = j.value("attempts", 0);
  t.next_attempt_at = j.value("next_attempt_at", Millis(0));
  t.lease_until = j.value("lease_until", Millis(0));
  t.state = state_from(j.value("state", "PENDING"));
  t.last_error = j.value("last_error", "");
}

Millis RetryPolicy::backoff(int attempts) const {
  Millis d = base_ms;
  for (int k = 1; k < attempts && d < cap_ms; ++k) d *= 2;
  return std::min(d, cap_ms);
}

TaskQueue::TaskQueue(MetadataStore& store, const Clock& clock, RetryPolicy policy)
    : store_(store), clock_(clock), policy_(policy) {}

std::string TaskQueue::enqueue(TaskKind kind, Json payload, const std::string& dedup_key) {
  std::string id;
  if (dedup_key.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "task-%06llu",
                  static_cast<unsigned long long>(store_.next_sequence(RecordKind::Task)));
    id = buf;
  } else {
    id = std::string("task-") + to_string(kind) + "-" + dedup_key;
  }
  const Millis now = clock_.now_ms();
  store_.update(RecordKind::Task, id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (cur && cur->at("state") == "PENDING") return std::nullopt;  // duplicate of a live task
    Task t;
    t.id = id;
    t.kind = kind;
    t.payload = payload;
    t.dedup_key = dedup_key;
    t.next_attempt_at = now;
    return Json(t);
  });
  return id;
}

std::optional<Task> TaskQueue::claim() {
  const Millis now = clock_.now_ms();
  std::vector<Task> due;
  for (const auto& doc : store_.list(RecordKind::Task)) {
    Task t = doc.get<Task>();
    if (t.state == TaskState::Pending && t.next_attempt_at <= now && t.lease_until <= now) due.push_back(t);
  }
  std::stable_sort(due.begin(), due.end(),
                   [](const Task& a, const Task& b) { return a.next_attempt_at < b.next_attempt_at; });
  for (const auto& candidate : due) {
    bool won = false;
    auto doc = store_.update(RecordKind::Task, candidate.id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
      if (!cur) return std::nullopt;
      Task t = cur->get<Task>();
      if (t.state != TaskState::Pending || t.next_attempt_at > now || t.lease_until > now) return std::nullopt;
      t.lease_until = now + policy_.visibility_timeout_ms;
      ++t.attempts;
      won = true;
      return Json(t);
    });
    if (won) return doc->get<Task>();
  }
  return std::nullopt;
}

void TaskQueue::complete(const std::string& id) {
  store_.update(RecordKind::Task, id, [](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur) return std::nullopt;
    Json next = *cur;
    next["state"] = "DONE";
    next["lease_until"] = 0;
    return next;
  });
}

bool TaskQueue::retry(const std::string& id, const std::string& error) {
  bool alive = true;
  const Millis now = clock_.now_ms();
  store_.update(RecordKind::Task, id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur) return std::nullopt;
    Task t = cur->get<Task>();
    t.last_error = error;
    t.lease_until = 0;
    if (t.attempts >= policy_.max_attempts) {
      t.state = TaskState::Failed;
      alive = false;
    } else {
      t.next_attempt_at = now + policy_.backoff(t.attempts);
    }
    return Json(t);
  });
  return alive;
}

void TaskQueue::give_up(const std::string& id, const std::string& error) {
  store_.update(RecordKind::Task, id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur) return std::nullopt;
    Json next = *cur;
    next["state"] = "FAILED";
    next["last_error"] = error;
    next["lease_until"] = 0;
    return next;
  });
}

void TaskQueue::on(TaskKind kind, Handler handler, Exhausted exhausted) {
  handlers_[kind] = {std::move(handler), std::move(exhausted)};
}

bool TaskQueue::run_once() {
  auto task = claim();
  if (!task) return false;
  auto h = handlers_.find(task->kind);
  if (h == handlers_.end()) {
    retry(task->id, "no handler registered");
    return true;
  }
  try {
    h->second.first(*task);
    complete(task->id);
  } catch (const Error& e) {
    const std::string msg = std::string(to_string(e.code())) + ": " + e.what();
    bool alive = transient(e.code()) ? retry(task->id, msg) : (give_up(task->id, msg), false);
    log_warn("task " + task->id + " attempt " + std::to_string(task->attempts) + " failed: " + msg);
    if (!alive && h->second.second) {
      Task t = *get(task->id);
      h->second.second(t);
    }
  } catch (const std::exception& e) {
    give_up(task->id, e.what());
    log_error("task " + task->id + " crashed: " + e.what());
    if (h->second.second) h->second.second(*get(task->id));
  }
  return true;
}

int TaskQueue::run_due() {
  int n = 0;
  while (run_once()) ++n;
  return n;
}

std::optional<Task> TaskQueue::get(const std::string& id) {
  auto doc = store_.get(RecordKind::Task, id);
  if (!doc) return std::nullopt;
  return doc->get<Task>();
}

std::vector<Task> TaskQueue::pending() {
  std::vector<Task> out;
  for (const auto& doc : store_.list(RecordKind::Task)) {
    Task t = doc.get<Task>();
    if (t.state == TaskState::Pending) out.push_back(t);
  }
  return out;
}

}  // namespace vtank
