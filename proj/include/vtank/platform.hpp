#pragma once

// The assembled service: stores, catalogue, search index, task queue,
// orchestrator and the background loops that drive them. The HTTP layer and
// the command line tool both sit on top of this.

#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "vtank/catalogue.hpp"
#include "vtank/clock.hpp"
#include "vtank/orchestrator.hpp"
#include "vtank/rangerun.hpp"
#include "vtank/search.hpp"
#include "vtank/store.hpp"
#include "vtank/task_queue.hpp"

namespace vtank {

struct PlatformConfig {
  std::filesystem::path data_dir = "vtank-data";
  std::string listen_host = "127.0.0.1";
  int port = 8080;
  /// Base URL jobs use for status callbacks; empty means they report
  /// through their status file only and the poller picks it up.
  std::string public_url;
  std::filesystem::path cli_path;  // the vtank binary as seen from the machines
  bool run_local_jobs = true;      // execute LOCAL machine queues in this process
  Millis worker_interval_ms = 200;
  Millis poll_interval_ms = 5'000;
  Millis session_ttl_ms = 12 * 3600 * 1000;
  RetryPolicy retry;
  Millis lost_job_grace_ms = 120'000;

  /// JSON file with any of the fields above, then VTANK_DATA_DIR,
  /// VTANK_LISTEN (host:port), VTANK_PUBLIC_URL and VTANK_CLI override it.
  static PlatformConfig load(const std::filesystem::path& file);
  void apply_env();
};

struct Session {
  std::string token;
  std::string user_id;
  Millis expires_at = 0;
};

struct ResultArtifact {
  std::string name;
  std::string content_type;
  std::string data;
};

class Platform {
 public:
  /// Clock defaults to the system clock; it must outlive the platform.
  explicit Platform(PlatformConfig config, const Clock* clock = nullptr);
  ~Platform();
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  const PlatformConfig& config() const { return config_; }
  const Clock& clock() const { return *clock_; }
  MetadataStore& store() { return *store_; }
  BlobStore& blobs() { return *blobs_; }
  Catalogue& catalogue() { return *cat_; }
  SearchIndex& search() { return *search_; }
  TaskQueue& queue() { return *queue_; }
  Orchestrator& orchestrator() { return *orch_; }
  Notifier& notifier() { return *notifier_; }

  // Sessions.
  Session login(const std::string& login, const std::string& password);
  void logout(const std::string& token);
  /// Throws Unauthenticated for unknown or expired tokens.
  User authenticate(const std::string& token);

  // Workflow steps that span several services.
  GeometryRecord upload_geometry(const User& user, const std::string& org_id, const std::string& name,
                                 std::string_view bytes, const std::string& file_name);
  /// Expands the range and queues every child for submission.
  std::vector<SimulationRecord> submit_range(const User& user, const std::string& base_id, const RangeSpec& spec);
  /// Stores the request and notifies the support role.
  HelpRequest help_request(const User& user, const std::string& kind, const std::string& entity_id,
                           const std::string& text);
  /// One file of an ingested result bundle, by file name (e.g.
  /// "summary.csv") or by manifest path.
  ResultArtifact result_artifact(const User& user, const std::string& sim_id, const std::string& artifact);
  std::vector<std::string> result_artifacts(const User& user, const std::string& sim_id);

  std::vector<Anomaly> consistency_check();
  /// Machines reachable, queue depth, status counts. "status" is "ok" or
  /// "degraded".
  Json health();

  /// Installs the reference setup plugin on every LOCAL machine the setup
  /// supports.
  void install_reference_plugin(const SimSetupConfig& setup);

  /// One synchronous round of background work: due tasks, local jobs, a
  /// poll. Returns the number of tasks and jobs run.
  int pump();
  /// Pumps until every listed simulation is terminal or the wall-clock
  /// budget runs out. Returns true when all finished.
  bool run_until_terminal(const std::vector<std::string>& sim_ids, Millis budget_ms);

  void start_background();
  void stop_background();

 private:
  int drain_local_machines();
  void loop(Millis interval, const std::function<void()>& body);

  PlatformConfig config_;
  std::unique_ptr<Clock> own_clock_;
  const Clock* clock_;
  std::unique_ptr<MetadataStore> store_;
  std::unique_ptr<BlobStore> blobs_;
  std::unique_ptr<Catalogue> cat_;
  std::unique_ptr<SearchIndex> search_;
  std::unique_ptr<TaskQueue> queue_;
  std::unique_ptr<Notifier> notifier_;
  std::unique_ptr<DefaultMachineRegistry> machines_;
  std::unique_ptr<Orchestrator> orch_;

  std::mutex bg_mu_;
  std::condition_variable bg_cv_;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
  std::mutex dispatch_mu_;  // one local dispatcher round at a time
};

}  // namespace vtank
