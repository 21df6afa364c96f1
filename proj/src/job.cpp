#include "vtank/job.hpp"

#include <sys/stat.h>

#include <regex>
#include <sstream>

#include <httplib.h>

#include "vtank/digest.hpp"
#include "vtank/error.hpp"
#include "vtank/io.hpp"
#include "vtank/log.hpp"
#include "vtank/process.hpp"
#include "vtank/results.hpp"
#include "vtank/scheduler.hpp"
#include "vtank/simsetup.hpp"

namespace vtank {
namespace fs = std::filesystem;

// Input document -------------------------------------------------------------

Json to_json(const InpDocument& d) {
  const auto& p = d.params;
  return {
      {"simulation",
       {{"id", d.sim_id}, {"name", d.sim_name}, {"setup", d.setup}, {"dof_mode", simsetup::to_string(d.dof_mode)}}},
      {"geometry", {{"file", d.geometry_file}, {"digest", d.geometry_digest}}},
      {"machine",
       {{"nodes", d.nodes},
        {"tasks_per_node", d.tasks_per_node},
        {"walltime", d.walltime_s},
        {"scheduler", to_string(d.scheduler)},
        {"root", d.machine_root}}},
      {"physics",
       {{"mass", p.mass},
        {"cog", {p.cog.x, p.cog.y, p.cog.z}},
        {"velocity", p.velocity},
        {"water_temperature", p.water_temperature},
        {"inertia", {p.inertia_diag.x, p.inertia_diag.y, p.inertia_diag.z}},
        {"water_z", p.water_z},
        {"wave_height", p.wave_height},
        {"trim_angle", p.trim_angle}}},
      {"callbacks", {{"base_url", d.callback_base_url}, {"token", d.callback_token}}},
  };
}

std::string format_inp(const InpDocument& inp) { return to_json(inp).dump(2) + "\n"; }

namespace {

Vec3 vec3_of(const Json& a, const char* what) {
  if (!a.is_array() || a.size() != 3) fail(Errc::Validation, std::string(what) + ": expected [x, y, z]");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

}  // namespace

InpDocument parse_inp(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    fail(Errc::Validation, std::string(kInpFile) + ": not valid JSON (" + e.what() + ")");
  }
  try {
    InpDocument d;
    const Json& sim = j.at("simulation");
    d.sim_id = sim.at("id");
    d.sim_name = sim.at("name");
    d.setup = sim.at("setup");
    d.dof_mode = simsetup::dof_mode_from_string(sim.at("dof_mode"));
    d.geometry_file = j.at("geometry").at("file");
    d.geometry_digest = j.at("geometry").value("digest", "");
    const Json& m = j.at("machine");
    d.nodes = m.value("nodes", 1);
    d.tasks_per_node = m.value("tasks_per_node", 1);
    d.walltime_s = m.value("walltime", 86400);
    d.scheduler = scheduler_from_string(m.value("scheduler", "LOCAL"));
    d.machine_root = m.value("root", "");
    const Json& p = j.at("physics");
    d.params.mass = p.at("mass");
    d.params.cog = vec3_of(p.at("cog"), "physics.cog");
    d.params.velocity = p.at("velocity");
    d.params.water_temperature = p.at("water_temperature");
    d.params.inertia_diag = vec3_of(p.at("inertia"), "physics.inertia");
    d.params.water_z = p.at("water_z");
    d.params.wave_height = p.at("wave_height");
    d.params.trim_angle = p.at("trim_angle");
    if (j.contains("callbacks")) {
      d.callback_base_url = j["callbacks"].value("base_url", "");
      d.callback_token = j["callbacks"].value("token", "");
    }
    if (d.sim_id.empty()) fail(Errc::Validation, "simulation.id: must not be empty");
    if (d.geometry_file.empty() || d.geometry_file.find("..") != std::string::npos) {
      fail(Errc::Validation, "geometry.file: must be a plain relative name");
    }
    return d;
  } catch (const Json::exception& e) {
    fail(Errc::Validation, std::string(kInpFile) + ": " + e.what());
  }
}

fs::path sim_workdir(const std::string& machine_root, const std::string& sim_id) {
  return fs::path(machine_root) / "sims" / sim_id;
}

std::string prepare_job_name(const std::string& sim_id) { return "prep-" + sim_id; }
std::string simulate_job_name(const std::string& sim_id) { return "sim-" + sim_id; }

// Status reporting -----------------------------------------------------------

namespace {

class JobSink final : public StatusSink {
 public:
  JobSink(fs::path workdir, const InpDocument* inp) : log_(std::move(workdir) / "logs" / "status.jsonl") {
    if (inp) {
      sim_id_ = inp->sim_id;
      url_ = inp->callback_base_url;
      token_ = inp->callback_token;
    }
  }

  void post(int step, const std::string& message, const std::string& job_id) override {
    Json line = {{"type", "status"}, {"step", step}, {"message", message}, {"job_id", job_id}};
    append_line(log_, line.dump());
    send("/simulations/" + sim_id_ + "/status", line);
  }

  void notify(const std::string& event, const std::string& message) override {
    Json line = {{"type", "notify"}, {"event", event}, {"message", message}};
    append_line(log_, line.dump());
    send("/simulations/" + sim_id_ + "/notify", line);
  }

 private:
  void send(const std::string& path, const Json& body) {
    if (url_.rfind("http://", 0) != 0 && url_.rfind("https://", 0) != 0) return;
    try {
      httplib::Client cli(url_);
      cli.set_connection_timeout(5);
      cli.set_read_timeout(30);
      httplib::Headers h = {{"Authorization", "Bearer " + token_}};
      auto res = cli.Post(path, h, body.dump(), "application/json");
      if (!res) {
        log_warn("status callback to " + url_ + path + " failed: " + httplib::to_string(res.error()));
      } else if (res->status >= 300) {
        log_warn("status callback to " + url_ + path + " answered " + std::to_string(res->status));
      }
    } catch (const std::exception& e) {
      log_warn(std::string("status callback failed: ") + e.what());
    }
  }

  fs::path log_;
  std::string sim_id_, url_, token_;
};

}  // namespace

std::unique_ptr<StatusSink> make_status_sink(const fs::path& workdir, const InpDocument* inp) {
  return std::make_unique<JobSink>(workdir, inp);
}

std::vector<StatusLine> parse_status_log(const std::string& text) {
  std::vector<StatusLine> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      Json j = Json::parse(line);
      StatusLine s;
      s.type = j.value("type", "status");
      s.step = j.value("step", 0);
      s.message = j.value("message", "");
      s.job_id = j.value("job_id", "");
      s.event = j.value("event", "");
      out.push_back(std::move(s));
    } catch (const Json::exception&) {
      // a torn last line from a job killed mid-write
    }
  }
  return out;
}

// Job bodies -----------------------------------------------------------------

namespace {

std::string last_line(const std::string& s) {
  std::string t = s;
  while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.pop_back();
  auto nl = t.rfind('\n');
  return nl == std::string::npos ? t : t.substr(nl + 1);
}

std::string describe(const std::exception& e) {
  if (auto* err = dynamic_cast<const Error*>(&e)) return std::string(to_string(err->code())) + ": " + e.what();
  return e.what();
}

/// "step N: message" on stderr selects the failing step; otherwise `fallback`.
std::pair<int, std::string> plugin_failure(const std::string& err, int fallback) {
  static const std::regex re(R"(step\s+(\d+)\s*:\s*(.*))");
  std::smatch m;
  std::string line = last_line(err);
  std::istringstream in(err);
  for (std::string l; std::getline(in, l);) {
    if (std::regex_search(l, m, re)) {
      int k = std::stoi(m[1]);
      if (k >= 1 && k <= 6) return {k, m[2]};
    }
  }
  return {fallback, line.empty() ? "setup script failed" : line};
}

fs::path setup_dir(const InpDocument& inp) { return fs::path(inp.machine_root) / "setups" / inp.setup; }

/// Runs a setup script with the workdir as its argument.
void run_setup_script(const fs::path& script, const fs::path& workdir, int step) {
  if (!fs::is_regular_file(script)) {
    fail(Errc::NotFound, "step " + std::to_string(step) + ": build script not found");
  }
  ProcessOptions o;
  o.cwd = workdir;
  ProcessResult r = run_process({"sh", script.string(), workdir.string()}, o);
  write_file(workdir / "logs" / (script.filename().string() + ".log"), r.out + r.err);
  if (!r.ok()) {
    auto [k, msg] = plugin_failure(r.err, step);
    fail(Errc::Io, "step " + std::to_string(k) + ": " + msg);
  }
}

int step_of(const std::string& message, int fallback) {
  static const std::regex re(R"(^step\s+(\d+)\s*:)");
  std::smatch m;
  if (std::regex_search(message, m, re)) return std::stoi(m[1]);
  return fallback;
}

std::string strip_step(const std::string& message) {
  static const std::regex re(R"(^step\s+\d+\s*:\s*)");
  return std::regex_replace(message, re, "");
}

std::optional<InpDocument> load_inp(const fs::path& workdir, StatusSink& sink, int step) {
  try {
    return parse_inp(read_file(workdir / kInpFile));
  } catch (const std::exception& e) {
    sink.post(-step, describe(e));
    return std::nullopt;
  }
}

simsetup::Hull load_hull(const fs::path& workdir, const InpDocument& inp) {
  return simsetup::Hull(mesh::parse_mesh(read_file(workdir / inp.geometry_file), inp.geometry_file));
}

using PluginRun = std::function<void(const fs::path& workdir, const InpDocument& inp)>;

/// Steps 3..6. Returns the last step posted.
int simulate_steps(const fs::path& workdir, const InpDocument& inp, StatusSink& sink, const PluginRun& plugin) {
  int step = 3;
  sink.notify("start", "simulation " + inp.sim_id + " started");
  try {
    simsetup::Hull hull = load_hull(workdir, inp);
    write_file(workdir / "params" / "hull.stl", mesh::to_binary_stl(hull.mesh()));
    sink.post(3, "GeometryProcessed");

    step = 4;
    plugin(workdir, inp);
    sink.post(4, "Solved");

    step = 5;
    SolveOutput out = results::read_fields(workdir / "fields");
    results::write_results_csv(results::make_result_set(out, inp.params), workdir / "results");
    results::package_results(workdir);
    sink.post(5, "PostProcessed");

    sink.post(6, "Completed");
    sink.notify("end", "simulation " + inp.sim_id + " completed");
    return 6;
  } catch (const std::exception& e) {
    std::string msg = describe(e);
    int k = step;
    if (step == 4 && step_of(e.what(), 0) != 0) {
      k = step_of(e.what(), 4);
      msg = strip_step(e.what());
    }
    sink.post(-k, msg);
    sink.notify("end", "simulation " + inp.sim_id + " failed at step " + std::to_string(k) + ": " + msg);
    return -k;
  }
}

}  // namespace

int run_prepare(const fs::path& workdir, const fs::path& cli_path) {
  fs::create_directories(workdir / "logs");
  auto file_only = make_status_sink(workdir, nullptr);
  auto inp = load_inp(workdir, *file_only, 2);
  if (!inp) return 1;
  auto sink = make_status_sink(workdir, &*inp);
  try {
    run_setup_script(setup_dir(*inp) / "build_prepare", workdir, 2);
    MachineConfig m;
    m.root_folder = inp->machine_root;
    m.scheduler = inp->scheduler;
    m.address = "localhost";
    LocalTransport t;
    auto sched = make_scheduler(m, t);
    JobScript job;
    job.scheduler = inp->scheduler;
    job.name = simulate_job_name(inp->sim_id);
    job.nodes = inp->nodes;
    job.tasks_per_node = inp->tasks_per_node;
    job.walltime_s = inp->walltime_s;
    job.workdir = workdir.string();
    job.body = {shell_quote(cli_path.string()) + " job simulate --workdir " + shell_quote(workdir.string())};
    std::string id = submit_once(*sched, job);
    sink->post(2, "Prepared", id);
    return 0;
  } catch (const std::exception& e) {
    sink->post(-2, strip_step(e.what()));
    return 1;
  }
}

int run_simulate(const fs::path& workdir) {
  fs::create_directories(workdir / "logs");
  auto file_only = make_status_sink(workdir, nullptr);
  auto inp = load_inp(workdir, *file_only, 3);
  if (!inp) return 1;
  auto sink = make_status_sink(workdir, &*inp);
  int last = simulate_steps(workdir, *inp, *sink, [](const fs::path& wd, const InpDocument& d) {
    run_setup_script(setup_dir(d) / "run", wd, 4);
  });
  return last == 6 ? 0 : 1;
}

// Reference setup ------------------------------------------------------------

int reference_build_prepare(const fs::path& workdir) {
  try {
    InpDocument inp = parse_inp(read_file(workdir / kInpFile));
    simsetup::Hull hull = load_hull(workdir, inp);
    simsetup::DerivedParameters d = simsetup::parametrize(hull, inp.params);
    for (const auto& w : d.warnings) log_warn(w);
    write_file(workdir / "params" / "derived.txt", simsetup::format_derived(d));
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "step 2: %s\n", describe(e).c_str());
    return 1;
  }
}

namespace {

void reference_solve(const fs::path& workdir, const InpDocument& inp) {
  simsetup::Hull hull = load_hull(workdir, inp);
  SolveOutput out = simsetup::solve(hull, inp.params, inp.dof_mode);
  results::write_fields(out, workdir / "fields");
}

}  // namespace

int reference_run(const fs::path& workdir) {
  try {
    reference_solve(workdir, parse_inp(read_file(workdir / kInpFile)));
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "step 4: %s\n", describe(e).c_str());
    return 1;
  }
}

void install_reference_setup(const fs::path& machine_root, const std::string& name, const fs::path& cli_path) {
  const fs::path dir = machine_root / "setups" / name;
  const std::string cli = shell_quote(cli_path.string());
  write_file(dir / "build_prepare", "#!/bin/sh\nexec " + cli + " setup build-prepare --workdir \"$1\"\n");
  write_file(dir / "run", "#!/bin/sh\nexec " + cli + " setup run --workdir \"$1\"\n");
  ::chmod((dir / "build_prepare").c_str(), 0755);
  ::chmod((dir / "run").c_str(), 0755);
}

LocalRunResult run_local_pipeline(const fs::path& workdir, std::string_view geometry_bytes,
                                  const std::string& geometry_name, const PhysicalParameters& params,
                                  simsetup::DofMode mode) {
  check_parameters(params);
  InpDocument inp;
  inp.sim_id = "local";
  inp.sim_name = "local";
  inp.setup = "reference";
  inp.dof_mode = mode;
  std::string ext = fs::path(geometry_name).extension().string();
  inp.geometry_file = "geometry" + (ext.empty() ? std::string(".stl") : ext);
  inp.geometry_digest = sha256_hex(geometry_bytes);
  inp.machine_root = workdir.string();
  inp.params = params;
  write_file(workdir / kInpFile, format_inp(inp));
  write_file(workdir / inp.geometry_file, geometry_bytes);

  auto sink = make_status_sink(workdir, &inp);
  LocalRunResult r;
  sink->post(1, "Submitted");
  if (reference_build_prepare(workdir) != 0) {
    r.last_step = -2;
    r.message = "prepare failed";
    sink->post(-2, r.message);
    r.exit_code = 1;
    return r;
  }
  sink->post(2, "Prepared");
  r.last_step = simulate_steps(workdir, inp, *sink, reference_solve);
  auto lines = parse_status_log(read_file(workdir / "logs" / "status.jsonl"));
  for (const auto& l : lines) {
    if (l.type == "status") r.message = l.message;
  }
  r.exit_code = r.last_step == 6 ? 0 : 1;
  return r;
}

}  // namespace vtank
