// vtank: service, administration and headless runs.
//
// Exit codes: 0 ok, 1 validation, 2 authorization, 3 I/O or machine,
// 4 solver.

#include <stdlib.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vtank/api.hpp"
#include "vtank/error.hpp"
#include "vtank/io.hpp"
#include "vtank/job.hpp"
#include "vtank/log.hpp"
#include "vtank/platform.hpp"

namespace fs = std::filesystem;
using namespace vtank;

namespace {

int exit_code(Errc code) {
  switch (code) {
    case Errc::Unauthenticated:
    case Errc::NotAuthorized:
      return 2;
    case Errc::Io:
    case Errc::Unreachable:
    case Errc::MissingArtifact:
    case Errc::Integrity:
      return 3;
    case Errc::InsufficientBuoyancy:
    case Errc::NoConvergence:
    case Errc::TrimRangeExceeded:
    case Errc::InconsistentResults:
      return 4;
    default:
      return 1;
  }
}

// Pipeline failures arrive as "CODE: message" status lines.
int exit_code_of_message(const std::string& message) {
  auto colon = message.find(':');
  if (colon != std::string::npos) {
    if (auto c = errc_from_string(message.substr(0, colon))) return exit_code(*c);
  }
  return 4;
}

struct Globals {
  std::string config_file;
  std::string data_dir;
};

PlatformConfig load_config(const Globals& g) {
  PlatformConfig cfg = g.config_file.empty() ? PlatformConfig{} : PlatformConfig::load(g.config_file);
  cfg.apply_env();
  if (!g.data_dir.empty()) cfg.data_dir = g.data_dir;
  return cfg;
}

fs::path self_path() {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::path("vtank") : p;
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

// Scratch directory for `run` without --workdir, removed on exit.
struct ScratchDir {
  fs::path path;
  ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "vtank-run-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) fail(Errc::Io, "cannot create a temporary directory");
    path = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vtank: virtual towing tank service and tools"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "JSON configuration file");
  app.add_option("--data-dir", g.data_dir, "Data directory (database, blobs, tickets)");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the web service");
  std::string listen, public_url;
  bool no_local_jobs = false;
  serve->add_option("--listen", listen, "host:port");
  serve->add_option("--public-url", public_url, "Base URL jobs use for status callbacks");
  serve->add_flag("--no-local-jobs", no_local_jobs, "Do not execute LOCAL machine queues in this process");

  // admin
  auto* admin = app.add_subcommand("admin", "Administration");
  admin->require_subcommand(1);

  auto* org = admin->add_subcommand("org", "Organizations");
  org->require_subcommand(1);
  std::string org_name, org_id, machine_id, simsetup_id, user_id;
  auto* org_create = org->add_subcommand("create", "Create an organization");
  org_create->add_option("--name", org_name)->required();
  auto* org_grant = org->add_subcommand("grant", "Authorize a machine or setup for an organization");
  org_grant->add_option("--org", org_id)->required();
  org_grant->add_option("--machine", machine_id);
  org_grant->add_option("--simsetup", simsetup_id);
  auto* org_member = org->add_subcommand("add-member", "Add a user to an organization");
  org_member->add_option("--org", org_id)->required();
  org_member->add_option("--user", user_id)->required();
  auto* org_list = org->add_subcommand("list", "List organizations");

  auto* machine = admin->add_subcommand("machine", "Compute machines");
  machine->require_subcommand(1);
  MachineConfig mc;
  std::string scheduler = "local";
  auto* m_add = machine->add_subcommand("add", "Register a machine (disabled until enabled)");
  m_add->add_option("--name", mc.name)->required();
  m_add->add_option("--address", mc.address)->default_val("localhost");
  m_add->add_option("--root", mc.root_folder)->required();
  m_add->add_option("--username", mc.username);
  m_add->add_option("--scheduler", scheduler)->default_val("local");
  m_add->add_option("--nodes", mc.nodes_default)->default_val(1);
  m_add->add_option("--tasks-per-node", mc.tasks_per_node)->default_val(1);
  m_add->add_option("--walltime", mc.walltime_s, "seconds")->default_val(86400);
  auto* m_enable = machine->add_subcommand("enable", "Enable a machine");
  m_enable->add_option("id", machine_id)->required();
  auto* m_disable = machine->add_subcommand("disable", "Disable a machine");
  m_disable->add_option("id", machine_id)->required();
  auto* m_list = machine->add_subcommand("list", "List machines");

  auto* setup_cmd = admin->add_subcommand("simsetup", "Simulation setups");
  setup_cmd->require_subcommand(1);
  SimSetupConfig sc;
  std::string dof = "1";
  std::vector<std::string> setup_machines;
  bool reference = false;
  auto* s_add = setup_cmd->add_subcommand("add", "Register a setup");
  s_add->add_option("--name", sc.name)->required();
  s_add->add_option("--dof", dof, "0, 1, 2 or the mode name")->default_val("1");
  s_add->add_option("--machine", setup_machines, "Supported machine id (repeatable)");
  s_add->add_option("--build-script", sc.build_script_ref, "Plugin directory under <root>/setups/");
  s_add->add_flag("--reference", reference, "Install the reference plugin on the LOCAL machines");
  auto* s_list = setup_cmd->add_subcommand("list", "List setups");

  auto* user = admin->add_subcommand("user", "User accounts");
  user->require_subcommand(1);
  std::string login, display_name, password;
  bool make_admin = false, approve_now = false;
  auto* u_add = user->add_subcommand("add", "Register a user");
  u_add->add_option("--login", login)->required();
  u_add->add_option("--name", display_name);
  u_add->add_option("--password", password, "Defaults to $VTANK_PASSWORD");
  u_add->add_flag("--admin", make_admin);
  u_add->add_flag("--approve", approve_now);
  auto* u_approve = user->add_subcommand("approve", "Approve a registered user");
  u_approve->add_option("id", user_id)->required();
  auto* u_list = user->add_subcommand("list", "List users");

  // run
  auto* run = app.add_subcommand("run", "Full pipeline on one hull without the service");
  std::string geometry, params_file, workdir;
  bool local = false;
  run->add_option("--geometry", geometry, "STL or OBJ file")->required()->check(CLI::ExistingFile);
  run->add_option("--params", params_file, "Physics JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--dof", dof, "0, 1 or 2")->default_val("1");
  run->add_option("--workdir", workdir, "Keep the run here (default: a temporary directory)");
  run->add_flag("--local", local, "Run in this process")->required();

  // check / monitor
  auto* check = app.add_subcommand("check", "Store checks");
  check->require_subcommand(1);
  auto* consistency = check->add_subcommand("consistency", "Report records that disagree with each other");
  auto* monitor = app.add_subcommand("monitor", "One-shot health report; nonzero exit when degraded");

  // Entry points of jobs and setup plugins on the machines.
  auto* job = app.add_subcommand("job", "Job bodies (run by the scheduler)");
  job->require_subcommand(1);
  auto* job_prepare = job->add_subcommand("prepare");
  auto* job_simulate = job->add_subcommand("simulate");
  auto* setup = app.add_subcommand("setup", "Reference setup plugin bodies");
  setup->require_subcommand(1);
  auto* setup_prepare = setup->add_subcommand("build-prepare");
  auto* setup_run = setup->add_subcommand("run");
  for (auto* c : {job_prepare, job_simulate, setup_prepare, setup_run}) {
    c->add_option("--workdir", workdir)->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*job_prepare) return run_prepare(workdir, self_path());
    if (*job_simulate) return run_simulate(workdir);
    if (*setup_prepare) return reference_build_prepare(workdir);
    if (*setup_run) return reference_run(workdir);

    if (*run) {
      PhysicalParameters params = Json::parse(read_file(params_file)).get<PhysicalParameters>();
      auto mode = simsetup::dof_mode_from_string(dof);
      std::optional<ScratchDir> tmp;
      fs::path wd = workdir;
      if (wd.empty()) wd = tmp.emplace().path;
      fs::create_directories(wd);
      auto r = run_local_pipeline(wd, read_file(geometry), fs::path(geometry).filename().string(), params, mode);
      if (r.exit_code != 0) {
        std::cerr << "step " << r.last_step << ": " << r.message << "\n";
        return exit_code_of_message(r.message);
      }
      std::cout << read_file(wd / "results" / "summary.csv");
      return 0;
    }

    if (*serve) {
      PlatformConfig cfg = load_config(g);
      std::string host = cfg.listen_host;
      int port = cfg.port;
      if (!listen.empty()) {
        auto colon = listen.rfind(':');
        if (colon == std::string::npos) fail(Errc::Validation, "--listen: expected host:port");
        host = listen.substr(0, colon);
        port = std::stoi(listen.substr(colon + 1));
      }
      if (!public_url.empty()) cfg.public_url = public_url;
      if (no_local_jobs) cfg.run_local_jobs = false;
      Platform live(cfg);
      ApiServer server(live);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      live.start_background();
      log_info("listening on " + host + ":" + std::to_string(port));
      bool ok = server.listen(host, port);
      live.stop_background();
      g_server = nullptr;
      if (!ok) fail(Errc::Io, "cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }

    Platform platform(load_config(g));
    Catalogue& cat = platform.catalogue();
    const User sys = User::system();

    if (*org_create) {
      print(cat.create_org(sys, org_name));
    } else if (*org_grant) {
      if (machine_id.empty() && simsetup_id.empty()) fail(Errc::Validation, "grant: --machine or --simsetup required");
      Organization o;
      if (!machine_id.empty()) o = cat.grant_machine(sys, org_id, machine_id);
      if (!simsetup_id.empty()) o = cat.grant_simsetup(sys, org_id, simsetup_id);
      print(o);
    } else if (*org_member) {
      print(cat.add_member(sys, user_id, org_id));
    } else if (*org_list) {
      print(cat.list_orgs(sys));
    } else if (*m_add) {
      mc.scheduler = scheduler_from_string(scheduler);
      mc.enabled = false;
      print(cat.add_machine(sys, mc));
    } else if (*m_enable || *m_disable) {
      print(cat.set_machine_enabled(sys, machine_id, static_cast<bool>(*m_enable)));
    } else if (*m_list) {
      print(cat.list_machines());
    } else if (*s_add) {
      sc.dof_mode = simsetup::dof_mode_from_string(dof);
      sc.supported_machine_ids = {setup_machines.begin(), setup_machines.end()};
      if (sc.build_script_ref.empty()) sc.build_script_ref = reference ? "reference" : sc.name;
      sc.statuses_dictionary = SimSetupConfig::reference_statuses();
      auto s = cat.add_simsetup(sys, sc);
      if (reference) platform.install_reference_plugin(s);
      print(s);
    } else if (*s_list) {
      print(cat.list_simsetups());
    } else if (*u_add) {
      if (password.empty()) {
        const char* env = std::getenv("VTANK_PASSWORD");
        if (!env || !*env) fail(Errc::Validation, "--password or VTANK_PASSWORD required");
        password = env;
      }
      User u = cat.register_user(login, display_name, password, make_admin);
      if (approve_now) u = cat.approve_user(sys, u.id);
      Json j = u;
      j.erase("password_salt");
      j.erase("password_hash");
      print(j);
    } else if (*u_approve) {
      Json j = cat.approve_user(sys, user_id);
      j.erase("password_salt");
      j.erase("password_hash");
      print(j);
    } else if (*u_list) {
      Json arr = Json::array();
      for (const auto& u : cat.list_users(sys)) {
        Json j = u;
        j.erase("password_salt");
        j.erase("password_hash");
        arr.push_back(j);
      }
      print(arr);
    } else if (*consistency) {
      auto anomalies = platform.consistency_check();
      Json arr = Json::array();
      for (const auto& a : anomalies) arr.push_back({{"kind", a.kind}, {"record_id", a.record_id}, {"message", a.message}});
      print(arr);
      return anomalies.empty() ? 0 : 1;
    } else if (*monitor) {
      Json h = platform.health();
      print(h);
      return h.value("status", "") == "ok" ? 0 : 1;
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const Json::exception& e) {
    std::cerr << "error: VALIDATION: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: IO: " << e.what() << "\n";
    return 3;
  }
}
