#pragma once

// Everything that runs on the compute machine: the input document, the
// prepare and simulate job bodies, the reference setup plugin and the
// channel used to report progress back.

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "vtank/catalogue.hpp"
#include "vtank/parameters.hpp"

namespace vtank {

inline constexpr const char* kInpFile = "lincosim.inp";

struct InpDocument {
  std::string sim_id;
  std::string sim_name;
  std::string setup;  // plugin directory under <machine root>/setups/
  simsetup::DofMode dof_mode = simsetup::DofMode::Captive0;
  std::string geometry_file;  // relative to the workdir
  std::string geometry_digest;
  int nodes = 1;
  int tasks_per_node = 1;
  int walltime_s = 86400;
  SchedulerKind scheduler = SchedulerKind::Local;
  std::string machine_root;
  PhysicalParameters params;
  std::string callback_base_url;  // http(s)://... or empty
  std::string callback_token;
};

Json to_json(const InpDocument& inp);
/// Sorted keys, so equal documents give equal bytes.
std::string format_inp(const InpDocument& inp);
/// Throws Error(Validation) naming what is missing or malformed.
InpDocument parse_inp(std::string_view text);

std::filesystem::path sim_workdir(const std::string& machine_root, const std::string& sim_id);
std::string prepare_job_name(const std::string& sim_id);
std::string simulate_job_name(const std::string& sim_id);

/// Progress reports from a job. Every report is appended to
/// `<workdir>/logs/status.jsonl`; when the input names a callback URL it is
/// also POSTed there. The file copy lets the server catch up on reports
/// whose HTTP delivery failed.
class StatusSink {
 public:
  virtual ~StatusSink() = default;
  virtual void post(int step, const std::string& message, const std::string& job_id = {}) = 0;
  virtual void notify(const std::string& event, const std::string& message) = 0;
};

std::unique_ptr<StatusSink> make_status_sink(const std::filesystem::path& workdir, const InpDocument* inp);

struct StatusLine {
  std::string type;  // "status" or "notify"
  int step = 0;
  std::string message;
  std::string job_id;
  std::string event;
};
std::vector<StatusLine> parse_status_log(const std::string& text);

/// Prepare job: parse the input, run the setup's build_prepare script and
/// queue the simulate job. Returns a process exit code.
int run_prepare(const std::filesystem::path& workdir, const std::filesystem::path& cli_path);
/// Simulate job: geometry (3), setup run script (4), post-processing (5),
/// completion (6).
int run_simulate(const std::filesystem::path& workdir);

/// Reference setup plugin bodies, reachable as `vtank setup build-prepare`
/// and `vtank setup run`. Failures are reported on stderr as
/// "step N: <message>" and a nonzero exit.
int reference_build_prepare(const std::filesystem::path& workdir);
int reference_run(const std::filesystem::path& workdir);

/// Writes the reference setup's two scripts under `<machine_root>/setups/<name>/`.
void install_reference_setup(const std::filesystem::path& machine_root, const std::string& name,
                             const std::filesystem::path& cli_path);

/// Workdir-level pipeline without any scheduler: writes the input and the
/// geometry, then runs prepare and simulate in process. Used by
/// `vtank run --local`; the results are the same bytes a LOCAL machine
/// produces for the same inputs.
struct LocalRunResult {
  int exit_code = 0;
  int last_step = 0;
  std::string message;
};
LocalRunResult run_local_pipeline(const std::filesystem::path& workdir, std::string_view geometry_bytes,
                                  const std::string& geometry_name, const PhysicalParameters& params,
                                  simsetup::DofMode mode);

}  // namespace vtank
