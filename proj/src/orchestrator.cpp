#include "vtank/orchestrator.hpp"

#include <cstdlib>

#include "vtank/digest.hpp"
#include "vtank/error.hpp"
#include "vtank/io.hpp"
#include "vtank/job.hpp"
#include "vtank/log.hpp"
#include "vtank/results.hpp"

namespace vtank {
namespace fs = std::filesystem;

// Machines ---------------------------------------------------------------------

namespace {

// Only these fields decide how the machine is reached.
bool same_connection(const MachineConfig& a, const MachineConfig& b) {
  return a.address == b.address && a.username == b.username && a.root_folder == b.root_folder &&
         a.scheduler == b.scheduler;
}

}  // namespace

DefaultMachineRegistry::Entry& DefaultMachineRegistry::entry(const MachineConfig& m) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(m.id);
  if (it != entries_.end() && same_connection(it->second.config, m)) return it->second;
  if (it != entries_.end()) {
    // Another thread may still hold the old adapters.
    retired_.push_back(std::move(it->second));
    entries_.erase(it);
  }
  Entry e;
  e.config = m;
  e.transport = make_transport(m);
  e.scheduler = make_scheduler(m, *e.transport);
  return entries_.emplace(m.id, std::move(e)).first->second;
}

MachineTransport& DefaultMachineRegistry::transport(const MachineConfig& m) { return *entry(m).transport; }
SchedulerAdapter& DefaultMachineRegistry::scheduler(const MachineConfig& m) { return *entry(m).scheduler; }

// Notifications ----------------------------------------------------------------

Notifier::Notifier(MetadataStore& store, const Clock& clock, fs::path log_file)
    : store_(store), clock_(clock), log_file_(std::move(log_file)) {}

void Notifier::send(const std::string& key, const std::string& to, const std::string& subject,
                    const std::string& body) {
  Json doc = {{"id", key}, {"to", to}, {"subject", subject}, {"body", body}, {"created_at", clock_.now_ms()}};
  bool fresh = false;
  store_.update(RecordKind::Notification, key, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (cur) return std::nullopt;
    fresh = true;
    return doc;
  });
  if (fresh && !log_file_.empty()) append_line(log_file_, doc.dump());
}

std::vector<Json> Notifier::list() { return store_.list(RecordKind::Notification); }

// Orchestrator -------------------------------------------------------------------

Orchestrator::Orchestrator(Catalogue& catalogue, TaskQueue& queue, MachineRegistry& machines, Notifier& notifier,
                           OrchestratorConfig config)
    : cat_(catalogue), queue_(queue), machines_(machines), notifier_(notifier), config_(std::move(config)) {
  queue_.on(TaskKind::ValidateGeometry,
            [this](const Task& t) { cat_.validate_geometry(t.payload.at("geometry_id").get<std::string>()); });
  queue_.on(
      TaskKind::SubmitSimulation,
      [this](const Task& t) { submit_simulation(t.payload.at("sim_id").get<std::string>()); },
      [this](const Task& t) {
        const std::string id = t.payload.at("sim_id");
        try {
          status_callback(id, -1,
                          "submission failed after " + std::to_string(t.attempts) + " attempts: " + t.last_error);
        } catch (const Error& e) {
          log_error("cannot record submission failure for " + id + ": " + e.what());
        }
      });
}

std::string Orchestrator::request_submit(const User& user, const std::string& sim_id) {
  SimulationRecord s = cat_.get_simulation(user, sim_id);
  if (!user.member_of(s.owner_org_id)) fail(Errc::NotAuthorized, "only the owner organization may submit");
  if (s.range_header) fail(Errc::Conflict, sim_id + " is a range header; its children run instead");
  if (s.status() != SimStatus::Created) {
    fail(Errc::Conflict, sim_id + " is " + to_string(s.status()) + "; only Created simulations can be submitted");
  }
  return queue_.enqueue(TaskKind::SubmitSimulation, {{"sim_id", sim_id}}, sim_id);
}

std::string Orchestrator::request_validation(const std::string& geometry_id) {
  return queue_.enqueue(TaskKind::ValidateGeometry, {{"geometry_id", geometry_id}}, geometry_id);
}

void Orchestrator::submit_simulation(const std::string& sim_id) {
  auto sim = cat_.find_simulation(sim_id);
  if (!sim) fail(Errc::UnknownSimulation, "simulation " + sim_id + " does not exist");
  if (sim->deleted || sim->last_step() != 0) return;  // already submitted, or withdrawn

  const MachineConfig machine = cat_.get_machine(sim->machine_id);
  if (!machine.enabled) fail(Errc::Unreachable, "machine " + machine.name + " is disabled");
  const SimSetupConfig setup = cat_.get_simsetup(sim->simsetup_id);
  const auto geometry = cat_.find_geometry(sim->geometry_id);
  if (!geometry) fail(Errc::NotFound, "geometry " + sim->geometry_id + " no longer exists");

  InpDocument inp;
  inp.sim_id = sim->id;
  inp.sim_name = sim->name;
  inp.setup = setup.build_script_ref;
  inp.dof_mode = setup.dof_mode;
  std::string ext = fs::path(geometry->file_name).extension().string();
  inp.geometry_file = "geometry" + (ext.empty() ? std::string(".stl") : ext);
  inp.geometry_digest = geometry->file_ref;
  inp.nodes = machine.nodes_default;
  inp.tasks_per_node = machine.tasks_per_node;
  inp.walltime_s = machine.walltime_s;
  inp.scheduler = machine.scheduler;
  inp.machine_root = machine.root_folder;
  inp.params = sim->params;
  inp.callback_base_url = config_.callback_base_url;
  inp.callback_token = sim->callback_token;

  const fs::path workdir = sim_workdir(machine.root_folder, sim->id);
  MachineTransport& t = machines_.transport(machine);
  SchedulerAdapter& sched = machines_.scheduler(machine);
  t.put_file((workdir / kInpFile).string(), format_inp(inp));
  t.put_file((workdir / inp.geometry_file).string(), cat_.blobs().get(geometry->file_ref));

  JobScript job;
  job.scheduler = machine.scheduler;
  job.name = prepare_job_name(sim->id);
  job.nodes = 1;
  job.tasks_per_node = 1;
  job.walltime_s = std::min(machine.walltime_s, 3600);
  job.workdir = workdir.string();
  job.body = {shell_quote(config_.cli_path.string()) + " job prepare --workdir " + shell_quote(workdir.string())};
  const std::string job_id = submit_once(sched, job);
  status_callback(sim->id, 1, "Submitted", job_id);
}

namespace {

enum class Verdict { Append, Duplicate, Stale, Absorbed };

Verdict judge(int last, int step) {
  if (is_terminal_step(last)) return step == last ? Verdict::Duplicate : Verdict::Absorbed;
  if (step == last) return Verdict::Duplicate;
  if (step > 0) return step > last ? Verdict::Append : Verdict::Stale;
  return -step >= std::abs(last) ? Verdict::Append : Verdict::Stale;
}

}  // namespace

SimulationRecord Orchestrator::status_callback(const std::string& sim_id, int step, const std::string& message,
                                               const std::string& job_id) {
  if (step < -6 || step > 6) fail(Errc::Validation, "step: must be within -6..6");
  auto current = cat_.find_simulation(sim_id);
  if (!current) fail(Errc::UnknownSimulation, "simulation " + sim_id + " does not exist");

  int effective = step;
  std::string text = message;
  std::optional<std::string> results_ref;
  std::map<std::string, double> summary;
  if (step == 6 && judge(current->last_step(), 6) == Verdict::Append) {
    try {
      ingest_results(*current);
      auto latest = cat_.find_simulation(sim_id);
      results_ref = latest->results_ref;
      summary = latest->summary;
    } catch (const Error& e) {
      if (e.code() == Errc::Unreachable) throw;  // the status file replay will bring it back
      effective = -5;
      text = std::string("results ingestion failed: ") + to_string(e.code()) + ": " + e.what();
    }
  }

  const Millis now = cat_.clock().now_ms();
  Verdict verdict = Verdict::Duplicate;
  int before = 0;
  auto updated = cat_.update_simulation(sim_id, [&](SimulationRecord& r) {
    bool changed = false;
    if (!job_id.empty() && r.job_id != job_id && !is_terminal_step(r.last_step())) {
      r.job_id = job_id;
      changed = true;
    }
    before = r.last_step();
    verdict = judge(before, effective);
    if (verdict == Verdict::Append) {
      Millis ts = r.status_history.empty() ? now : std::max(now, r.status_history.back().timestamp);
      r.status_history.push_back({effective, text, ts});
      changed = true;
    }
    return changed;
  });
  if (verdict == Verdict::Stale || verdict == Verdict::Absorbed) {
    log_warn("ignored step " + std::to_string(effective) + " for " + sim_id + " after step " + std::to_string(before));
  }
  return updated;
}

bool Orchestrator::callback_token_ok(const std::string& sim_id, const std::string& token) const {
  auto s = cat_.find_simulation(sim_id);
  return s && !s->callback_token.empty() && s->callback_token == token;
}

void Orchestrator::job_notification(const std::string& sim_id, const std::string& event, const std::string& message) {
  auto s = cat_.find_simulation(sim_id);
  if (!s) fail(Errc::UnknownSimulation, "simulation " + sim_id + " does not exist");
  if (event != "start" && event != "end") fail(Errc::Validation, "event: must be start or end");
  notifier_.send("notify-" + sim_id + "-" + event, s->created_by, "[vtank] " + s->name + " " + event, message);
}

void Orchestrator::ingest_results(const SimulationRecord& sim) {
  const MachineConfig machine = cat_.get_machine(sim.machine_id);
  MachineTransport& t = machines_.transport(machine);
  const fs::path workdir = sim_workdir(machine.root_folder, sim.id);
  std::string manifest_text;
  try {
    manifest_text = t.get_file((workdir / "results" / "manifest.json").string());
  } catch (const Error& e) {
    if (e.code() == Errc::NotFound) fail(Errc::MissingArtifact, "results/manifest.json is missing");
    throw;
  }
  const auto entries = results::parse_manifest(manifest_text);
  for (const auto& required : results::required_artifacts()) {
    bool listed = false;
    for (const auto& e : entries) listed = listed || e.path == required;
    if (!listed) fail(Errc::MissingArtifact, required + " is not in the manifest");
  }
  std::map<std::string, double> summary;
  for (const auto& e : entries) {
    std::string data;
    try {
      data = t.get_file((workdir / e.path).string());
    } catch (const Error& err) {
      if (err.code() == Errc::NotFound) fail(Errc::MissingArtifact, e.path + " is missing");
      throw;
    }
    if (data.size() != e.bytes || sha256_hex(data) != e.sha256) {
      fail(Errc::Integrity, e.path + " does not match its manifest entry");
    }
    cat_.blobs().put(data);
    if (e.path == "results/summary.csv") {
      for (const auto& row : results::parse_summary(data)) summary[row.name] = row.value;
    }
  }
  const std::string ref = cat_.blobs().put(manifest_text);
  cat_.update_simulation(sim.id, [&](SimulationRecord& r) {
    if (r.results_ref == ref && r.summary == summary) return false;
    r.results_ref = ref;
    r.summary = summary;
    return true;
  });
}

void Orchestrator::sync_status_log(const SimulationRecord& sim, MachineTransport& t) {
  const MachineConfig machine = cat_.get_machine(sim.machine_id);
  const fs::path log = sim_workdir(machine.root_folder, sim.id) / "logs" / "status.jsonl";
  std::string text;
  try {
    text = t.get_file(log.string());
  } catch (const Error& e) {
    if (e.code() == Errc::NotFound) return;
    throw;
  }
  for (const auto& line : parse_status_log(text)) {
    if (line.type == "notify") {
      job_notification(sim.id, line.event, line.message);
    } else {
      status_callback(sim.id, line.step, line.message, line.job_id);
    }
  }
}

std::vector<JobHandle> Orchestrator::poll_jobs() {
  std::vector<JobHandle> out;
  const Millis now = cat_.clock().now_ms();
  const auto sims = cat_.all_simulations();
  for (const auto& machine : cat_.list_machines()) {
    if (!machine.enabled) continue;
    std::vector<SimulationRecord> active;
    for (const auto& s : sims) {
      if (s.machine_id == machine.id && !s.range_header && s.last_step() >= 1 && !is_terminal_step(s.last_step())) {
        active.push_back(s);
      }
    }
    if (active.empty()) continue;
    try {
      MachineTransport& t = machines_.transport(machine);
      SchedulerAdapter& sched = machines_.scheduler(machine);
      for (const auto& s : active) {
        sync_status_log(s, t);
        SimulationRecord cur = *cat_.find_simulation(s.id);
        if (is_terminal_step(cur.last_step()) || cur.job_id.empty()) {
          std::lock_guard lock(lost_mu_);
          lost_since_.erase(s.id);
          continue;
        }
        JobState st = sched.state(cur.job_id);
        out.push_back({cur.job_id, machine.id, st});
        if (st == JobState::Queued || st == JobState::Running) {
          std::lock_guard lock(lost_mu_);
          lost_since_.erase(s.id);
          continue;
        }
        Millis since;
        {
          std::lock_guard lock(lost_mu_);
          since = lost_since_.emplace(s.id, now).first->second;
        }
        if (now - since >= config_.lost_job_grace_ms) {
          status_callback(s.id, -6, std::string("job lost: scheduler reports ") + to_string(st) + " for job " +
                                        cur.job_id + " without a final status");
          std::lock_guard lock(lost_mu_);
          lost_since_.erase(s.id);
        }
      }
    } catch (const Error& e) {
      if (e.code() != Errc::Unreachable) throw;
      log_warn("poll: machine " + machine.name + " unreachable: " + e.what());
    }
  }
  return out;
}

std::optional<bool> Orchestrator::job_alive(const SimulationRecord& sim) {
  if (sim.job_id.empty()) return false;
  try {
    const MachineConfig machine = cat_.get_machine(sim.machine_id);
    JobState st = machines_.scheduler(machine).state(sim.job_id);
    return st == JobState::Queued || st == JobState::Running;
  } catch (const Error& e) {
    if (e.code() == Errc::Unreachable) return std::nullopt;
    throw;
  }
}

}  // namespace vtank
