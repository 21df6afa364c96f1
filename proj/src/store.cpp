#include "vtank/store.hpp"

#include <sqlite3.h>

#include "vtank/error.hpp"

namespace vtank {

const char* to_string(RecordKind k) noexcept {
  switch (k) {
    case RecordKind::User: return "user";
    case RecordKind::Organization: return "organization";
    case RecordKind::Geometry: return "geometry";
    case RecordKind::Simulation: return "simulation";
    case RecordKind::Machine: return "machine";
    case RecordKind::SimSetup: return "simsetup";
    case RecordKind::Session: return "session";
    case RecordKind::HelpRequest: return "help_request";
    case RecordKind::Task: return "task";
    case RecordKind::Notification: return "notification";
    case RecordKind::Idempotency: return "idempotency";
  }
  return "?";
}

// Documents are kept as their serialized text in both stores so that what
// is read back is exactly what a restart would see.

std::optional<Json> MemoryStore::get(RecordKind kind, const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = docs_.find({kind, id});
  if (it == docs_.end()) return std::nullopt;
  return Json::parse(it->second);
}

void MemoryStore::put(RecordKind kind, const std::string& id, const Json& doc) {
  std::lock_guard lock(mu_);
  docs_[{kind, id}] = doc.dump();
}

bool MemoryStore::erase(RecordKind kind, const std::string& id) {
  std::lock_guard lock(mu_);
  return docs_.erase({kind, id}) > 0;
}

std::vector<Json> MemoryStore::list(RecordKind kind) {
  std::lock_guard lock(mu_);
  std::vector<Json> out;
  for (auto it = docs_.lower_bound({kind, std::string()}); it != docs_.end() && it->first.first == kind; ++it) {
    out.push_back(Json::parse(it->second));
  }
  return out;
}

std::optional<Json> MemoryStore::update(RecordKind kind, const std::string& id, const Mutator& fn) {
  std::lock_guard lock(mu_);
  auto it = docs_.find({kind, id});
  std::optional<Json> current;
  if (it != docs_.end()) current = Json::parse(it->second);
  auto next = fn(current);
  if (!next) return current;
  docs_[{kind, id}] = next->dump();
  return next;
}

std::uint64_t MemoryStore::next_sequence(RecordKind kind) {
  std::lock_guard lock(mu_);
  return ++seq_[kind];
}

struct SqliteStore::Impl {
  sqlite3* db = nullptr;
  std::mutex mu;

  void check(int rc, const char* what) const {
    if (rc != SQLITE_OK && rc != SQLITE_DONE && rc != SQLITE_ROW) {
      fail(Errc::Io, std::string("sqlite ") + what + ": " + sqlite3_errmsg(db));
    }
  }

  void exec(const char* sql) const {
    char* err = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "?";
      sqlite3_free(err);
      fail(Errc::Io, std::string("sqlite: ") + msg);
    }
  }

  struct Stmt {
    sqlite3_stmt* s = nullptr;
    const Impl& impl;
    Stmt(const Impl& i, const char* sql) : impl(i) { impl.check(sqlite3_prepare_v2(impl.db, sql, -1, &s, nullptr), sql); }
    ~Stmt() { sqlite3_finalize(s); }
    Stmt& bind(int i, const std::string& v) {
      sqlite3_bind_text(s, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
      return *this;
    }
    bool step() {
      int rc = sqlite3_step(s);
      impl.check(rc, "step");
      return rc == SQLITE_ROW;
    }
    std::string text(int col) const {
      auto p = reinterpret_cast<const char*>(sqlite3_column_text(s, col));
      return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(s, col))) : std::string();
    }
  };

  std::optional<std::string> read(RecordKind kind, const std::string& id) const {
    Stmt st(*this, "SELECT doc FROM records WHERE kind = ?1 AND id = ?2");
    st.bind(1, to_string(kind)).bind(2, id);
    if (!st.step()) return std::nullopt;
    return st.text(0);
  }

  void write(RecordKind kind, const std::string& id, const std::string& doc) const {
    Stmt st(*this, "INSERT INTO records(kind, id, doc) VALUES (?1, ?2, ?3) "
                   "ON CONFLICT(kind, id) DO UPDATE SET doc = excluded.doc");
    st.bind(1, to_string(kind)).bind(2, id).bind(3, doc);
    st.step();
  }

  /// Runs `body` inside BEGIN IMMEDIATE ... COMMIT.
  template <class F>
  auto transaction(F&& body) {
    exec("BEGIN IMMEDIATE");
    try {
      auto result = body();
      exec("COMMIT");
      return result;
    } catch (...) {
      sqlite3_exec(db, "ROLLBACK", nullptr, nullptr, nullptr);
      throw;
    }
  }
};

SqliteStore::SqliteStore(const std::filesystem::path& path) : impl_(std::make_unique<Impl>()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (sqlite3_open_v2(path.c_str(), &impl_->db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    std::string msg = impl_->db ? sqlite3_errmsg(impl_->db) : "out of memory";
    sqlite3_close(impl_->db);
    fail(Errc::Io, "cannot open database " + path.string() + ": " + msg);
  }
  sqlite3_busy_timeout(impl_->db, 10000);
  impl_->exec("PRAGMA journal_mode=WAL");
  impl_->exec("PRAGMA synchronous=NORMAL");
  impl_->exec(
      "CREATE TABLE IF NOT EXISTS records(kind TEXT NOT NULL, id TEXT NOT NULL, doc TEXT NOT NULL, "
      "PRIMARY KEY(kind, id));"
      "CREATE TABLE IF NOT EXISTS sequences(kind TEXT PRIMARY KEY, value INTEGER NOT NULL)");
}

SqliteStore::~SqliteStore() { sqlite3_close(impl_->db); }

std::optional<Json> SqliteStore::get(RecordKind kind, const std::string& id) {
  std::lock_guard lock(impl_->mu);
  auto doc = impl_->read(kind, id);
  if (!doc) return std::nullopt;
  return Json::parse(*doc);
}

void SqliteStore::put(RecordKind kind, const std::string& id, const Json& doc) {
  std::lock_guard lock(impl_->mu);
  impl_->write(kind, id, doc.dump());
}

bool SqliteStore::erase(RecordKind kind, const std::string& id) {
  std::lock_guard lock(impl_->mu);
  Impl::Stmt st(*impl_, "DELETE FROM records WHERE kind = ?1 AND id = ?2");
  st.bind(1, to_string(kind)).bind(2, id);
  st.step();
  return sqlite3_changes(impl_->db) > 0;
}

std::vector<Json> SqliteStore::list(RecordKind kind) {
  std::lock_guard lock(impl_->mu);
  Impl::Stmt st(*impl_, "SELECT doc FROM records WHERE kind = ?1 ORDER BY id");
  st.bind(1, to_string(kind));
  std::vector<Json> out;
  while (st.step()) out.push_back(Json::parse(st.text(0)));
  return out;
}

std::optional<Json> SqliteStore::update(RecordKind kind, const std::string& id, const Mutator& fn) {
  std::lock_guard lock(impl_->mu);
  return impl_->transaction([&]() -> std::optional<Json> {
    auto text = impl_->read(kind, id);
    std::optional<Json> current;
    if (text) current = Json::parse(*text);
    auto next = fn(current);
    if (!next) return current;
    impl_->write(kind, id, next->dump());
    return next;
  });
}

std::uint64_t SqliteStore::next_sequence(RecordKind kind) {
  std::lock_guard lock(impl_->mu);
  return impl_->transaction([&] {
    Impl::Stmt up(*impl_, "INSERT INTO sequences(kind, value) VALUES (?1, 1) "
                          "ON CONFLICT(kind) DO UPDATE SET value = value + 1");
    up.bind(1, to_string(kind));
    up.step();
    Impl::Stmt get(*impl_, "SELECT value FROM sequences WHERE kind = ?1");
    get.bind(1, to_string(kind));
    get.step();
    return static_cast<std::uint64_t>(sqlite3_column_int64(get.s, 0));
  });
}

}  // namespace vtank
