#include "vtank/platform.hpp"

#include <chrono>
#include <cstdlib>

#include "vtank/digest.hpp"
#include "vtank/error.hpp"
#include "vtank/io.hpp"
#include "vtank/job.hpp"
#include "vtank/log.hpp"
#include "vtank/results.hpp"
#include "vtank/scheduler.hpp"

namespace vtank {
namespace fs = std::filesystem;

// Configuration ----------------------------------------------------------------

namespace {

void split_listen(const std::string& s, PlatformConfig& c) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos) fail(Errc::Validation, "listen: expected host:port, got '" + s + "'");
  c.listen_host = s.substr(0, colon);
  try {
    c.port = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    fail(Errc::Validation, "listen: bad port in '" + s + "'");
  }
}

bool is_local_address(const std::string& a) { return a.empty() || a == "localhost" || a == "127.0.0.1"; }

}  // namespace

PlatformConfig PlatformConfig::load(const fs::path& file) {
  PlatformConfig c;
  Json j;
  try {
    j = Json::parse(read_file(file));
  } catch (const Json::exception& e) {
    fail(Errc::Validation, file.string() + ": " + e.what());
  }
  try {
    if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("listen")) split_listen(j["listen"], c);
    c.listen_host = j.value("listen_host", c.listen_host);
    c.port = j.value("port", c.port);
    c.public_url = j.value("public_url", c.public_url);
    if (j.contains("cli_path")) c.cli_path = j["cli_path"].get<std::string>();
    c.run_local_jobs = j.value("run_local_jobs", c.run_local_jobs);
    c.worker_interval_ms = j.value("worker_interval_ms", c.worker_interval_ms);
    c.poll_interval_ms = j.value("poll_interval_ms", c.poll_interval_ms);
    c.session_ttl_ms = j.value("session_ttl_ms", c.session_ttl_ms);
    c.lost_job_grace_ms = j.value("lost_job_grace_ms", c.lost_job_grace_ms);
    if (j.contains("retry")) {
      const Json& r = j["retry"];
      c.retry.base_ms = r.value("base_ms", c.retry.base_ms);
      c.retry.cap_ms = r.value("cap_ms", c.retry.cap_ms);
      c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
      c.retry.visibility_timeout_ms = r.value("visibility_timeout_ms", c.retry.visibility_timeout_ms);
    }
  } catch (const Json::exception& e) {
    fail(Errc::Validation, file.string() + ": " + e.what());
  }
  return c;
}

void PlatformConfig::apply_env() {
  if (const char* v = std::getenv("VTANK_DATA_DIR"); v && *v) data_dir = v;
  if (const char* v = std::getenv("VTANK_LISTEN"); v && *v) split_listen(v, *this);
  if (const char* v = std::getenv("VTANK_PUBLIC_URL"); v && *v) public_url = v;
  if (const char* v = std::getenv("VTANK_CLI"); v && *v) cli_path = v;
}

// Construction -----------------------------------------------------------------

Platform::Platform(PlatformConfig config, const Clock* clock) : config_(std::move(config)) {
  if (!clock) {
    own_clock_ = std::make_unique<SystemClock>();
    clock = own_clock_.get();
  }
  clock_ = clock;
  if (config_.cli_path.empty()) {
    std::error_code ec;
    config_.cli_path = fs::read_symlink("/proc/self/exe", ec);
  }
  fs::create_directories(config_.data_dir);
  store_ = std::make_unique<SqliteStore>(config_.data_dir / "meta.db");
  blobs_ = std::make_unique<BlobStore>(config_.data_dir);
  cat_ = std::make_unique<Catalogue>(*store_, *blobs_, *clock_);
  search_ = std::make_unique<SearchIndex>(*cat_);
  queue_ = std::make_unique<TaskQueue>(*store_, *clock_, config_.retry);
  notifier_ = std::make_unique<Notifier>(*store_, *clock_, config_.data_dir / "notifications.jsonl");
  machines_ = std::make_unique<DefaultMachineRegistry>();
  orch_ = std::make_unique<Orchestrator>(
      *cat_, *queue_, *machines_, *notifier_,
      OrchestratorConfig{config_.public_url, config_.cli_path, config_.lost_job_grace_ms});
}

Platform::~Platform() { stop_background(); }

// Sessions ---------------------------------------------------------------------

namespace {

// Sessions are stored under the token's digest, so a copy of the database
// does not hand out live tokens.
std::string session_key(const std::string& token) { return sha256_hex(token); }

}  // namespace

Session Platform::login(const std::string& login, const std::string& password) {
  User u = cat_->authenticate(login, password);
  Session s{random_hex(32), u.id, clock_->now_ms() + config_.session_ttl_ms};
  store_->put(RecordKind::Session, session_key(s.token), Json{{"user_id", s.user_id}, {"expires_at", s.expires_at}});
  return s;
}

void Platform::logout(const std::string& token) { store_->erase(RecordKind::Session, session_key(token)); }

User Platform::authenticate(const std::string& token) {
  if (token.empty()) fail(Errc::Unauthenticated, "missing bearer token");
  auto doc = store_->get(RecordKind::Session, session_key(token));
  if (!doc) fail(Errc::Unauthenticated, "unknown session");
  if (doc->value("expires_at", Millis(0)) <= clock_->now_ms()) {
    store_->erase(RecordKind::Session, session_key(token));
    fail(Errc::Unauthenticated, "session expired");
  }
  User u;
  try {
    u = cat_->get_user(doc->at("user_id").get<std::string>());
  } catch (const Error&) {
    fail(Errc::Unauthenticated, "session user no longer exists");
  }
  if (!u.approved) fail(Errc::Unauthenticated, "account is not approved");
  return u;
}

// Workflow ---------------------------------------------------------------------

GeometryRecord Platform::upload_geometry(const User& user, const std::string& org_id, const std::string& name,
                                         std::string_view bytes, const std::string& file_name) {
  GeometryRecord g = cat_->create_geometry(user, org_id, name, bytes, file_name);
  orch_->request_validation(g.id);
  return g;
}

std::vector<SimulationRecord> Platform::submit_range(const User& user, const std::string& base_id,
                                                     const RangeSpec& spec) {
  auto kids = expand_range(*cat_, user, base_id, spec);
  for (const auto& k : kids) orch_->request_submit(user, k.id);
  return kids;
}

HelpRequest Platform::help_request(const User& user, const std::string& kind, const std::string& entity_id,
                                   const std::string& text) {
  HelpRequest h = cat_->create_help_request(user, kind, entity_id, text);
  notifier_->send("help-" + h.id, "support", "[vtank] help request on " + kind + " " + entity_id,
                  user.login + " wrote:\n" + text);
  return h;
}

namespace {

std::string content_type_of(const std::string& name) {
  auto ext = fs::path(name).extension().string();
  if (ext == ".csv") return "text/csv";
  if (ext == ".json") return "application/json";
  return "text/plain";
}

}  // namespace

std::vector<std::string> Platform::result_artifacts(const User& user, const std::string& sim_id) {
  SimulationRecord s = cat_->get_simulation(user, sim_id);
  if (!s.results_ref) fail(Errc::NotFound, sim_id + " has no results");
  std::vector<std::string> out{"manifest.json"};
  for (const auto& e : results::parse_manifest(blobs_->get(*s.results_ref))) {
    out.push_back(fs::path(e.path).filename().string());
  }
  return out;
}

ResultArtifact Platform::result_artifact(const User& user, const std::string& sim_id, const std::string& artifact) {
  SimulationRecord s = cat_->get_simulation(user, sim_id);
  if (!s.results_ref) fail(Errc::NotFound, sim_id + " has no results");
  const std::string manifest = blobs_->get(*s.results_ref);
  if (artifact == "manifest.json") return {artifact, "application/json", manifest};
  for (const auto& e : results::parse_manifest(manifest)) {
    if (e.path == artifact || fs::path(e.path).filename().string() == artifact) {
      const std::string name = fs::path(e.path).filename().string();
      return {name, content_type_of(name), blobs_->get(e.sha256)};
    }
  }
  fail(Errc::NotFound, "no artifact '" + artifact + "' in the results of " + sim_id);
}

std::vector<Anomaly> Platform::consistency_check() {
  return cat_->consistency_check([this](const SimulationRecord& s) { return orch_->job_alive(s); });
}

Json Platform::health() {
  Json machines = Json::array();
  bool degraded = false;
  for (const auto& m : cat_->list_machines()) {
    Json entry = {{"id", m.id}, {"name", m.name}, {"enabled", m.enabled}};
    if (m.enabled) {
      try {
        entry["reachable"] = machines_->transport(m).exec("true").ok();
      } catch (const Error& e) {
        entry["reachable"] = false;
        entry["error"] = e.what();
      }
      degraded = degraded || !entry["reachable"].get<bool>();
    }
    machines.push_back(entry);
  }
  std::map<std::string, int> counts;
  for (auto st : {SimStatus::Created, SimStatus::Running, SimStatus::Completed, SimStatus::Error,
                  SimStatus::Deleted}) {
    counts[to_string(st)] = 0;
  }
  for (const auto& s : cat_->all_simulations()) ++counts[to_string(s.status())];
  int pending = 0, failed = 0;
  for (const auto& doc : store_->list(RecordKind::Task)) {
    const std::string st = doc.value("state", "");
    pending += st == "PENDING";
    failed += st == "FAILED";
  }
  return {{"status", degraded ? "degraded" : "ok"},
          {"time", clock_->now_ms()},
          {"machines", machines},
          {"simulations", counts},
          {"tasks", {{"pending", pending}, {"failed", failed}}}};
}

void Platform::install_reference_plugin(const SimSetupConfig& setup) {
  for (const auto& id : setup.supported_machine_ids) {
    MachineConfig m = cat_->get_machine(id);
    if (m.scheduler != SchedulerKind::Local || !is_local_address(m.address)) continue;
    install_reference_setup(m.root_folder, setup.build_script_ref, config_.cli_path);
  }
}

// Background work --------------------------------------------------------------

int Platform::drain_local_machines() {
  if (!config_.run_local_jobs) return 0;
  std::lock_guard lock(dispatch_mu_);
  int n = 0;
  for (const auto& m : cat_->list_machines()) {
    if (!m.enabled || m.scheduler != SchedulerKind::Local || !is_local_address(m.address)) continue;
    try {
      n += LocalDispatcher(m.root_folder).drain();
    } catch (const std::exception& e) {
      log_error("local dispatcher on " + m.name + ": " + e.what());
    }
  }
  return n;
}

int Platform::pump() {
  int n = queue_->run_due();
  n += drain_local_machines();
  try {
    orch_->poll_jobs();
  } catch (const std::exception& e) {
    log_error(std::string("poll: ") + e.what());
  }
  return n;
}

bool Platform::run_until_terminal(const std::vector<std::string>& sim_ids, Millis budget_ms) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(budget_ms);
  for (;;) {
    pump();
    bool open = false;
    for (const auto& id : sim_ids) {
      auto s = cat_->find_simulation(id);
      open = open || (s && !is_terminal_step(s->last_step()));
    }
    if (!open) return true;
    if (std::chrono::steady_clock::now() > deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void Platform::loop(Millis interval, const std::function<void()>& body) {
  std::unique_lock lock(bg_mu_);
  while (!stopping_) {
    lock.unlock();
    try {
      body();
    } catch (const std::exception& e) {
      log_error(std::string("background: ") + e.what());
    }
    lock.lock();
    bg_cv_.wait_for(lock, std::chrono::milliseconds(interval), [this] { return stopping_; });
  }
}

void Platform::start_background() {
  std::lock_guard lock(bg_mu_);
  if (!threads_.empty()) return;
  stopping_ = false;
  threads_.emplace_back([this] { loop(config_.worker_interval_ms, [this] { queue_->run_due(); }); });
  threads_.emplace_back([this] { loop(config_.poll_interval_ms, [this] { orch_->poll_jobs(); }); });
  if (config_.run_local_jobs) {
    threads_.emplace_back([this] { loop(config_.worker_interval_ms, [this] { drain_local_machines(); }); });
  }
}

void Platform::stop_background() {
  {
    std::lock_guard lock(bg_mu_);
    stopping_ = true;
  }
  bg_cv_.notify_all();
  for (auto& t : threads_) t.join();
  threads_.clear();
}

}  // namespace vtank
