#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vtank/catalogue.hpp"
#include "vtank/scheduler.hpp"
#include "vtank/task_queue.hpp"

namespace vtank {

/// Hands out the transport and scheduler adapter for a machine. Tests
/// substitute a registry backed by mocks.
class MachineRegistry {
 public:
  virtual ~MachineRegistry() = default;
  virtual MachineTransport& transport(const MachineConfig& m) = 0;
  virtual SchedulerAdapter& scheduler(const MachineConfig& m) = 0;
};

class DefaultMachineRegistry final : public MachineRegistry {
 public:
  MachineTransport& transport(const MachineConfig& m) override;
  SchedulerAdapter& scheduler(const MachineConfig& m) override;

 private:
  struct Entry {
    MachineConfig config;
    std::unique_ptr<MachineTransport> transport;
    std::unique_ptr<SchedulerAdapter> scheduler;
  };
  Entry& entry(const MachineConfig& m);
  std::mutex mu_;
  std::map<std::string, Entry> entries_;
  std::vector<Entry> retired_;
};

/// Append-only notification log (store records plus an optional JSON-lines
/// file), standing in for mail.
class Notifier {
 public:
  Notifier(MetadataStore& store, const Clock& clock, std::filesystem::path log_file = {});
  /// Re-sending under the same key is a no-op.
  void send(const std::string& key, const std::string& to, const std::string& subject, const std::string& body);
  std::vector<Json> list();

 private:
  MetadataStore& store_;
  const Clock& clock_;
  std::filesystem::path log_file_;
};

struct OrchestratorConfig {
  std::string callback_base_url;     // empty: jobs report through their status file only
  std::filesystem::path cli_path;    // the vtank executable as seen from the machines
  Millis lost_job_grace_ms = 120'000;
};

/// Submission protocol: Created (0) -> Submitted (1, prepare job queued)
/// -> Prepared (2, simulate job queued) -> 3, 4, 5 -> Completed (6), with
/// -k marking a failure in step k. Callbacks may arrive duplicated, late or
/// out of order; the recorded history stays monotone in |step| and ends at
/// the first terminal entry.
class Orchestrator {
 public:
  Orchestrator(Catalogue& catalogue, TaskQueue& queue, MachineRegistry& machines, Notifier& notifier,
               OrchestratorConfig config);

  /// Throws NotFound, NotAuthorized, or Conflict unless the simulation is
  /// Created and runnable. Returns the task id.
  std::string request_submit(const User& user, const std::string& sim_id);
  std::string request_validation(const std::string& geometry_id);

  /// Task body: write the input and geometry to the machine and queue the
  /// prepare job. Idempotent. Throws Unreachable while the machine is down.
  void submit_simulation(const std::string& sim_id);

  /// Applies one progress report. A step-6 report first pulls the result
  /// bundle from the machine; if that fails the run is recorded as -5.
  SimulationRecord status_callback(const std::string& sim_id, int step, const std::string& message,
                                   const std::string& job_id = {});
  bool callback_token_ok(const std::string& sim_id, const std::string& token) const;
  void job_notification(const std::string& sim_id, const std::string& event, const std::string& message);

  /// Replays the job's status file, then checks the scheduler. Simulations
  /// whose job has vanished without a terminal report are marked -6 after
  /// the grace period. Unreachable machines are skipped.
  std::vector<JobHandle> poll_jobs();
  /// For the consistency checker.
  std::optional<bool> job_alive(const SimulationRecord& sim);

  const OrchestratorConfig& config() const { return config_; }

 private:
  void ingest_results(const SimulationRecord& sim);
  void sync_status_log(const SimulationRecord& sim, MachineTransport& t);

  Catalogue& cat_;
  TaskQueue& queue_;
  MachineRegistry& machines_;
  Notifier& notifier_;
  OrchestratorConfig config_;
  std::mutex lost_mu_;
  std::map<std::string, Millis> lost_since_;
};

}  // namespace vtank
