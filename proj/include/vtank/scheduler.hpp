#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vtank/catalogue.hpp"
#include "vtank/process.hpp"

namespace vtank {

struct JobScript {
  SchedulerKind scheduler = SchedulerKind::Local;
  std::string name;
  int nodes = 1;
  int tasks_per_node = 1;
  int walltime_s = 86400;
  std::string workdir;
  std::vector<std::string> body;
};

/// HH:MM:SS, hours not wrapped at 24.
std::string format_walltime(int seconds);
std::string render_job_script(const JobScript& job);

enum class JobState { Queued, Running, Done, Failed, Unknown };
const char* to_string(JobState s) noexcept;

struct JobHandle {
  std::string job_id;
  std::string machine_id;
  JobState state = JobState::Unknown;
};

/// Command and file access on one machine. Every call throws
/// Error(Unreachable) when the machine cannot be contacted.
class MachineTransport {
 public:
  virtual ~MachineTransport() = default;
  /// Runs `command` through sh on the machine.
  virtual ProcessResult exec(const std::string& command, const std::map<std::string, std::string>& env = {}) = 0;
  virtual void put_file(const std::string& path, std::string_view data) = 0;
  /// Throws Error(NotFound) for a missing file.
  virtual std::string get_file(const std::string& path) = 0;
  virtual bool exists(const std::string& path) = 0;
};

class LocalTransport final : public MachineTransport {
 public:
  ProcessResult exec(const std::string& command, const std::map<std::string, std::string>& env = {}) override;
  void put_file(const std::string& path, std::string_view data) override;
  std::string get_file(const std::string& path) override;
  bool exists(const std::string& path) override;
};

/// OpenSSH client in batch mode; exit status 255 means the connection failed.
class SshTransport final : public MachineTransport {
 public:
  SshTransport(std::string address, std::string username);
  ProcessResult exec(const std::string& command, const std::map<std::string, std::string>& env = {}) override;
  void put_file(const std::string& path, std::string_view data) override;
  std::string get_file(const std::string& path) override;
  bool exists(const std::string& path) override;

 private:
  ProcessResult ssh(const std::string& remote_command, const std::string& stdin_data = {});
  std::string target_;
};

class SchedulerAdapter {
 public:
  virtual ~SchedulerAdapter() = default;
  /// Writes `<workdir>/<name>.sh` and submits it. Returns the job id.
  virtual std::string submit(const JobScript& job) = 0;
  /// Any job ever submitted under `name` that the scheduler still knows.
  virtual std::optional<std::string> find_by_name(const std::string& name) = 0;
  virtual JobState state(const std::string& job_id) = 0;
};

/// Submits unless a job with the same name already exists; this is what
/// makes retried submissions harmless.
std::string submit_once(SchedulerAdapter& scheduler, const JobScript& job);

class PbsScheduler final : public SchedulerAdapter {
 public:
  explicit PbsScheduler(MachineTransport& t) : t_(t) {}
  std::string submit(const JobScript& job) override;
  std::optional<std::string> find_by_name(const std::string& name) override;
  JobState state(const std::string& job_id) override;

 private:
  MachineTransport& t_;
};

class SlurmScheduler final : public SchedulerAdapter {
 public:
  explicit SlurmScheduler(MachineTransport& t) : t_(t) {}
  std::string submit(const JobScript& job) override;
  std::optional<std::string> find_by_name(const std::string& name) override;
  JobState state(const std::string& job_id) override;

 private:
  MachineTransport& t_;
};

/// File-spool emulation of a batch queue for a machine reachable through
/// the local filesystem: `<root>/.sched/{jobs,queue,running,done}`.
/// Jobs are executed by LocalDispatcher in FIFO order.
class LocalScheduler final : public SchedulerAdapter {
 public:
  explicit LocalScheduler(std::filesystem::path machine_root);
  std::string submit(const JobScript& job) override;
  std::optional<std::string> find_by_name(const std::string& name) override;
  JobState state(const std::string& job_id) override;

  /// Removes every trace of a job, as if killed and purged externally.
  void forget(const std::string& job_id);
  const std::filesystem::path& spool() const { return spool_; }

 private:
  std::filesystem::path spool_;
};

class LocalDispatcher {
 public:
  explicit LocalDispatcher(std::filesystem::path machine_root, std::map<std::string, std::string> env = {});
  /// Runs the oldest queued job to completion. False when the queue is empty.
  bool run_one();
  /// Runs jobs until the queue stays empty (jobs may enqueue more jobs).
  int drain();

 private:
  std::filesystem::path spool_;
  std::map<std::string, std::string> env_;
};

std::unique_ptr<MachineTransport> make_transport(const MachineConfig& m);
std::unique_ptr<SchedulerAdapter> make_scheduler(const MachineConfig& m, MachineTransport& t);

}  // namespace vtank
