#include "vtank/scheduler.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "vtank/error.hpp"
#include "vtank/io.hpp"
#include "vtank/log.hpp"

namespace vtank {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string first_line(const std::string& s) {
  std::string t = trim(s);
  return t.substr(0, t.find('\n'));
}

std::string script_path(const JobScript& job) { return (fs::path(job.workdir) / (job.name + ".sh")).string(); }

void check_job(const JobScript& job) {
  if (job.name.empty()) fail(Errc::Validation, "job name must not be empty");
  if (job.workdir.empty()) fail(Errc::Validation, "job workdir must not be empty");
  if (job.nodes < 1 || job.tasks_per_node < 1 || job.walltime_s < 1) {
    fail(Errc::Validation, "job resources must be positive");
  }
}

ProcessResult checked(MachineTransport& t, const std::string& cmd) {
  ProcessResult r = t.exec(cmd);
  if (!r.ok()) fail(Errc::Io, "'" + cmd + "' failed: " + trim(r.err));
  return r;
}

}  // namespace

std::string format_walltime(int seconds) {
  if (seconds < 0) fail(Errc::Validation, "walltime must be >= 0");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", seconds / 3600, seconds / 60 % 60, seconds % 60);
  return buf;
}

std::string render_job_script(const JobScript& job) {
  std::ostringstream os;
  os << "#!/bin/sh\n";
  switch (job.scheduler) {
    case SchedulerKind::Pbs:
      os << "#PBS -N " << job.name << "\n"
         << "#PBS -l select=" << job.nodes << ":ncpus=" << job.tasks_per_node << "\n"
         << "#PBS -l walltime=" << format_walltime(job.walltime_s) << "\n";
      break;
    case SchedulerKind::Slurm:
      os << "#SBATCH --job-name=" << job.name << "\n"
         << "#SBATCH --nodes=" << job.nodes << "\n"
         << "#SBATCH --ntasks-per-node=" << job.tasks_per_node << "\n"
         << "#SBATCH --time=" << format_walltime(job.walltime_s) << "\n";
      break;
    case SchedulerKind::Local:
      break;
    default:
      fail(Errc::UnsupportedScheduler, "unsupported scheduler");
  }
  os << "\n"
     << "cd " << job.workdir << "\n";
  for (const auto& line : job.body) os << line << "\n";
  return os.str();
}

const char* to_string(JobState s) noexcept {
  switch (s) {
    case JobState::Queued: return "QUEUED";
    case JobState::Running: return "RUNNING";
    case JobState::Done: return "DONE";
    case JobState::Failed: return "FAILED";
    case JobState::Unknown: return "UNKNOWN";
  }
  return "?";
}

std::string submit_once(SchedulerAdapter& scheduler, const JobScript& job) {
  if (auto existing = scheduler.find_by_name(job.name)) {
    log_info("job " + job.name + " already submitted as " + *existing);
    return *existing;
  }
  return scheduler.submit(job);
}

// PBS ------------------------------------------------------------------------

std::string PbsScheduler::submit(const JobScript& job) {
  check_job(job);
  t_.put_file(script_path(job), render_job_script(job));
  auto r = checked(t_, "cd " + shell_quote(job.workdir) + " && qsub " + shell_quote(job.name + ".sh"));
  std::string id = first_line(r.out);
  if (id.empty()) fail(Errc::Io, "qsub returned no job id");
  return id;
}

std::optional<std::string> PbsScheduler::find_by_name(const std::string& name) {
  auto r = t_.exec("qselect -x -N " + shell_quote(name));
  std::string id = r.ok() ? first_line(r.out) : std::string();
  if (id.empty()) return std::nullopt;
  return id;
}

JobState PbsScheduler::state(const std::string& job_id) {
  auto r = t_.exec("qstat -x -f " + shell_quote(job_id));
  if (!r.ok()) return JobState::Unknown;
  std::string st;
  int exit_status = 0;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    line = trim(line);
    if (line.rfind("job_state = ", 0) == 0) st = line.substr(12);
    if (line.rfind("Exit_status = ", 0) == 0) exit_status = std::atoi(line.c_str() + 14);
  }
  if (st == "Q" || st == "H" || st == "W" || st == "T" || st == "S") return JobState::Queued;
  if (st == "R" || st == "E" || st == "B") return JobState::Running;
  if (st == "F" || st == "X") return exit_status == 0 ? JobState::Done : JobState::Failed;
  return JobState::Unknown;
}

// SLURM ----------------------------------------------------------------------

std::string SlurmScheduler::submit(const JobScript& job) {
  check_job(job);
  t_.put_file(script_path(job), render_job_script(job));
  auto r = checked(t_, "cd " + shell_quote(job.workdir) + " && sbatch --parsable " + shell_quote(job.name + ".sh"));
  std::string id = first_line(r.out);
  id = id.substr(0, id.find(';'));  // "<id>;<cluster>" on federated setups
  if (id.empty()) fail(Errc::Io, "sbatch returned no job id");
  return id;
}

std::optional<std::string> SlurmScheduler::find_by_name(const std::string& name) {
  auto r = t_.exec("squeue -h -n " + shell_quote(name) + " -o %i");
  std::string id = r.ok() ? first_line(r.out) : std::string();
  if (id.empty()) {
    r = t_.exec("sacct -n -X -P --name=" + shell_quote(name) + " -o JobID");
    id = r.ok() ? first_line(r.out) : std::string();
  }
  if (id.empty()) return std::nullopt;
  return id;
}

JobState SlurmScheduler::state(const std::string& job_id) {
  auto r = t_.exec("squeue -h -j " + shell_quote(job_id) + " -o %T");
  std::string st = r.ok() ? first_line(r.out) : std::string();
  if (st.empty()) {
    r = t_.exec("sacct -n -X -P -j " + shell_quote(job_id) + " -o State");
    st = r.ok() ? first_line(r.out) : std::string();
    st = st.substr(0, st.find(' '));  // "CANCELLED by 123"
  }
  if (st == "PENDING" || st == "CONFIGURING" || st == "REQUEUED") return JobState::Queued;
  if (st == "RUNNING" || st == "COMPLETING") return JobState::Running;
  if (st == "COMPLETED") return JobState::Done;
  if (st == "FAILED" || st == "CANCELLED" || st == "TIMEOUT" || st == "NODE_FAIL" || st == "OUT_OF_MEMORY" ||
      st == "PREEMPTED" || st == "BOOT_FAIL" || st == "DEADLINE") {
    return JobState::Failed;
  }
  return JobState::Unknown;
}

// LOCAL ----------------------------------------------------------------------

namespace {

std::uint64_t next_local_id(const fs::path& spool) {
  fs::create_directories(spool);
  const std::string path = (spool / "seq").string();
  int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) fail(Errc::Io, "cannot open " + path);
  ::flock(fd, LOCK_EX);
  char buf[32] = {};
  ssize_t n = ::pread(fd, buf, sizeof buf - 1, 0);
  std::uint64_t v = n > 0 ? std::strtoull(buf, nullptr, 10) : 0;
  ++v;
  std::string text = std::to_string(v);
  bool ok = ::ftruncate(fd, 0) == 0 && ::pwrite(fd, text.data(), text.size(), 0) == ssize_t(text.size());
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (!ok) fail(Errc::Io, "cannot update " + path);
  return v;
}

std::string local_id(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08llu", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

LocalScheduler::LocalScheduler(fs::path machine_root) : spool_(std::move(machine_root) / ".sched") {
  for (const char* d : {"jobs", "queue", "running", "done"}) fs::create_directories(spool_ / d);
}

std::string LocalScheduler::submit(const JobScript& job) {
  check_job(job);
  write_file(script_path(job), render_job_script(job));
  const std::string id = local_id(next_local_id(spool_));
  Json meta = {{"id", id}, {"name", job.name}, {"script", script_path(job)}, {"workdir", job.workdir}};
  write_file(spool_ / "jobs" / (id + ".json"), meta.dump());
  write_file(spool_ / "queue" / id, "");
  return id;
}

std::optional<std::string> LocalScheduler::find_by_name(const std::string& name) {
  std::vector<std::string> hits;
  for (const auto& e : fs::directory_iterator(spool_ / "jobs")) {
    if (e.path().extension() != ".json") continue;
    try {
      auto meta = Json::parse(read_file(e.path()));
      if (meta.at("name") == name) hits.push_back(meta.at("id"));
    } catch (const std::exception&) {
    }
  }
  if (hits.empty()) return std::nullopt;
  return *std::min_element(hits.begin(), hits.end());
}

JobState LocalScheduler::state(const std::string& job_id) {
  if (fs::exists(spool_ / "queue" / job_id)) return JobState::Queued;
  if (fs::exists(spool_ / "running" / job_id)) return JobState::Running;
  if (fs::exists(spool_ / "done" / job_id)) {
    return trim(read_file(spool_ / "done" / job_id)) == "0" ? JobState::Done : JobState::Failed;
  }
  return JobState::Unknown;
}

void LocalScheduler::forget(const std::string& job_id) {
  for (const char* d : {"queue", "running", "done"}) fs::remove(spool_ / d / job_id);
  fs::remove(spool_ / "jobs" / (job_id + ".json"));
}

LocalDispatcher::LocalDispatcher(fs::path machine_root, std::map<std::string, std::string> env)
    : spool_(std::move(machine_root) / ".sched"), env_(std::move(env)) {
  for (const char* d : {"jobs", "queue", "running", "done"}) fs::create_directories(spool_ / d);
}

bool LocalDispatcher::run_one() {
  std::vector<std::string> queued;
  for (const auto& e : fs::directory_iterator(spool_ / "queue")) queued.push_back(e.path().filename().string());
  std::sort(queued.begin(), queued.end());
  for (const auto& id : queued) {
    std::error_code ec;
    fs::rename(spool_ / "queue" / id, spool_ / "running" / id, ec);
    if (ec) continue;  // claimed by another dispatcher
    int code = 127;
    try {
      auto meta = Json::parse(read_file(spool_ / "jobs" / (id + ".json")));
      const fs::path workdir = meta.at("workdir").get<std::string>();
      const std::string name = meta.at("name");
      ProcessOptions o;
      o.cwd = workdir;
      o.env = env_;
      o.env["VTANK_JOB_ID"] = id;
      ProcessResult r = run_process({"sh", meta.at("script").get<std::string>()}, o);
      code = r.exit_code;
      write_file(workdir / "logs" / (name + ".out"), r.out);
      write_file(workdir / "logs" / (name + ".err"), r.err);
    } catch (const std::exception& e) {
      log_error("local job " + id + ": " + e.what());
    }
    if (fs::exists(spool_ / "running" / id)) {
      write_file(spool_ / "done" / id, std::to_string(code));
      fs::remove(spool_ / "running" / id, ec);
    }
    return true;
  }
  return false;
}

int LocalDispatcher::drain() {
  int n = 0;
  while (run_one()) ++n;
  return n;
}

// Factories ------------------------------------------------------------------

namespace {
bool is_local_address(const std::string& a) { return a.empty() || a == "localhost" || a == "127.0.0.1"; }
}  // namespace

std::unique_ptr<MachineTransport> make_transport(const MachineConfig& m) {
  if (is_local_address(m.address)) return std::make_unique<LocalTransport>();
  return std::make_unique<SshTransport>(m.address, m.username);
}

std::unique_ptr<SchedulerAdapter> make_scheduler(const MachineConfig& m, MachineTransport& t) {
  switch (m.scheduler) {
    case SchedulerKind::Pbs: return std::make_unique<PbsScheduler>(t);
    case SchedulerKind::Slurm: return std::make_unique<SlurmScheduler>(t);
    case SchedulerKind::Local:
      if (!is_local_address(m.address)) {
        fail(Errc::UnsupportedScheduler, "LOCAL scheduler needs a local machine address");
      }
      return std::make_unique<LocalScheduler>(m.root_folder);
  }
  fail(Errc::UnsupportedScheduler, "unsupported scheduler");
}

}  // namespace vtank
