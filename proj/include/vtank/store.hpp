#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace vtank {

using Json = nlohmann::json;

enum class RecordKind {
  User,
  Organization,
  Geometry,
  Simulation,
  Machine,
  SimSetup,
  Session,
  HelpRequest,
  Task,
  Notification,
  Idempotency,
};

inline constexpr RecordKind kAllRecordKinds[] = {
    RecordKind::User,    RecordKind::Organization, RecordKind::Geometry,    RecordKind::Simulation,
    RecordKind::Machine, RecordKind::SimSetup,     RecordKind::Session,     RecordKind::HelpRequest,
    RecordKind::Task,    RecordKind::Notification, RecordKind::Idempotency,
};

const char* to_string(RecordKind k) noexcept;

/// Returns the replacement document, or nullopt to leave the record as is.
using Mutator = std::function<std::optional<Json>(const std::optional<Json>&)>;

/// Metadata persistence contract: JSON documents keyed by (kind, id).
/// Every call is atomic; update() is a serialized read-modify-write.
class MetadataStore {
 public:
  virtual ~MetadataStore() = default;

  virtual std::optional<Json> get(RecordKind kind, const std::string& id) = 0;
  virtual void put(RecordKind kind, const std::string& id, const Json& doc) = 0;
  virtual bool erase(RecordKind kind, const std::string& id) = 0;
  /// All documents of a kind, ordered by id.
  virtual std::vector<Json> list(RecordKind kind) = 0;
  /// Returns the stored document after the call (nullopt if absent).
  virtual std::optional<Json> update(RecordKind kind, const std::string& id, const Mutator& fn) = 0;
  /// Monotone per-kind counter, persisted with the data.
  virtual std::uint64_t next_sequence(RecordKind kind) = 0;
};

class MemoryStore final : public MetadataStore {
 public:
  std::optional<Json> get(RecordKind kind, const std::string& id) override;
  void put(RecordKind kind, const std::string& id, const Json& doc) override;
  bool erase(RecordKind kind, const std::string& id) override;
  std::vector<Json> list(RecordKind kind) override;
  std::optional<Json> update(RecordKind kind, const std::string& id, const Mutator& fn) override;
  std::uint64_t next_sequence(RecordKind kind) override;

 private:
  std::mutex mu_;
  std::map<std::pair<RecordKind, std::string>, std::string> docs_;
  std::map<RecordKind, std::uint64_t> seq_;
};

/// SQLite-backed store; safe to share between processes (WAL, busy timeout).
class SqliteStore final : public MetadataStore {
 public:
  explicit SqliteStore(const std::filesystem::path& path);
  ~SqliteStore() override;
  SqliteStore(const SqliteStore&) = delete;
  SqliteStore& operator=(const SqliteStore&) = delete;

  std::optional<Json> get(RecordKind kind, const std::string& id) override;
  void put(RecordKind kind, const std::string& id, const Json& doc) override;
  bool erase(RecordKind kind, const std::string& id) override;
  std::vector<Json> list(RecordKind kind) override;
  std::optional<Json> update(RecordKind kind, const std::string& id, const Mutator& fn) override;
  std::uint64_t next_sequence(RecordKind kind) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Content-addressed file store: `<root>/blobs/<2-hex>/<sha256>`.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  /// Returns the digest; storing identical bytes twice is a no-op.
  std::string put(std::string_view data);
  /// Throws Error(NotFound), or Error(Integrity) if the bytes no longer
  /// match their digest.
  std::string get(const std::string& digest) const;
  bool exists(const std::string& digest) const;
  std::filesystem::path path_of(const std::string& digest) const;

 private:
  std::filesystem::path root_;
};

}  // namespace vtank
