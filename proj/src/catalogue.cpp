#include "vtank/catalogue.hpp"

#include <algorithm>
#include <mutex>

#include "vtank/digest.hpp"
#include "vtank/error.hpp"
#include "vtank/log.hpp"

namespace vtank {
namespace {

std::mutex g_create_mu;  // name uniqueness checks within this process

template <class T>
std::optional<T> load(MetadataStore& store, RecordKind kind, const std::string& id) {
  auto doc = store.get(kind, id);
  if (!doc) return std::nullopt;
  return doc->get<T>();
}

template <class T>
std::vector<T> load_all(MetadataStore& store, RecordKind kind) {
  std::vector<T> out;
  for (const auto& doc : store.list(kind)) out.push_back(doc.get<T>());
  return out;
}

template <class T>
T value_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

User User::system() {
  User u;
  u.id = "system";
  u.login = "system";
  u.display_name = "system";
  u.approved = true;
  u.admin = true;
  return u;
}

const char* to_string(GeometryValidation v) noexcept {
  switch (v) {
    case GeometryValidation::Pending: return "PENDING";
    case GeometryValidation::Valid: return "VALID";
    case GeometryValidation::Invalid: return "INVALID";
  }
  return "?";
}

const char* to_string(Visibility v) noexcept { return v == Visibility::Public ? "PUBLIC" : "PRIVATE"; }

Visibility visibility_from_string(const std::string& s) {
  if (s == "PUBLIC") return Visibility::Public;
  if (s == "PRIVATE") return Visibility::Private;
  fail(Errc::Validation, "visibility: must be PUBLIC or PRIVATE");
}

const char* to_string(SimStatus s) noexcept {
  switch (s) {
    case SimStatus::Created: return "Created";
    case SimStatus::Running: return "Running";
    case SimStatus::Completed: return "Completed";
    case SimStatus::Error: return "Error";
    case SimStatus::Deleted: return "Deleted";
  }
  return "?";
}

SimStatus sim_status_from_string(const std::string& s) {
  for (SimStatus v : {SimStatus::Created, SimStatus::Running, SimStatus::Completed, SimStatus::Error,
                      SimStatus::Deleted}) {
    if (s == to_string(v)) return v;
  }
  fail(Errc::Validation, "unknown status '" + s + "'");
}

SimStatus status_of_step(int step) noexcept {
  if (step < 0) return SimStatus::Error;
  if (step == 0) return SimStatus::Created;
  if (step >= 6) return SimStatus::Completed;
  return SimStatus::Running;
}

SimStatus SimulationRecord::status() const {
  return deleted ? SimStatus::Deleted : status_of_step(last_step());
}

const char* to_string(SchedulerKind s) noexcept {
  switch (s) {
    case SchedulerKind::Pbs: return "PBS";
    case SchedulerKind::Slurm: return "SLURM";
    case SchedulerKind::Local: return "LOCAL";
  }
  return "?";
}

SchedulerKind scheduler_from_string(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "PBS") return SchedulerKind::Pbs;
  if (u == "SLURM") return SchedulerKind::Slurm;
  if (u == "LOCAL") return SchedulerKind::Local;
  fail(Errc::UnsupportedScheduler, "unsupported scheduler '" + s + "'");
}

std::map<int, std::string> SimSetupConfig::reference_statuses() {
  return {{0, "Created"},   {1, "Submitted"},      {2, "Prepared"},  {3, "GeometryProcessed"},
          {4, "Solved"},    {5, "PostProcessed"},  {6, "Completed"}};
}

// JSON mappings. Keys are stable; maps and sets serialize in sorted order so
// the stored text is canonical.

void to_json(Json& j, const User& v) {
  j = {{"id", v.id},
       {"login", v.login},
       {"display_name", v.display_name},
       {"password_salt", v.password_salt},
       {"password_hash", v.password_hash},
       {"approved", v.approved},
       {"admin", v.admin},
       {"organization_ids", v.organization_ids}};
}

void from_json(const Json& j, User& v) {
  v.id = j.at("id");
  v.login = j.at("login");
  v.display_name = value_or<std::string>(j, "display_name", "");
  v.password_salt = value_or<std::string>(j, "password_salt", "");
  v.password_hash = value_or<std::string>(j, "password_hash", "");
  v.approved = value_or(j, "approved", false);
  v.admin = value_or(j, "admin", false);
  v.organization_ids = value_or(j, "organization_ids", std::set<std::string>{});
}

void to_json(Json& j, const Organization& v) {
  j = {{"id", v.id},
       {"name", v.name},
       {"authorized_machine_ids", v.authorized_machine_ids},
       {"authorized_simsetup_ids", v.authorized_simsetup_ids}};
}

void from_json(const Json& j, Organization& v) {
  v.id = j.at("id");
  v.name = j.at("name");
  v.authorized_machine_ids = value_or(j, "authorized_machine_ids", std::set<std::string>{});
  v.authorized_simsetup_ids = value_or(j, "authorized_simsetup_ids", std::set<std::string>{});
}

namespace mesh {

void to_json(Json& j, const BoundingBox& b) { j = {{"min", b.min}, {"max", b.max}}; }

void from_json(const Json& j, BoundingBox& b) {
  b.min = j.at("min").get<Vec3>();
  b.max = j.at("max").get<Vec3>();
}

Json report_json(const ValidationReport& r) {
  return {{"is_valid", r.is_valid},
          {"triangle_count", r.triangle_count},
          {"edge_count", r.edge_count},
          {"boundary_edge_count", r.boundary_edge_count},
          {"nonmanifold_edge_count", r.nonmanifold_edge_count},
          {"degenerate_triangle_count", r.degenerate_triangle_count},
          {"component_count", r.component_count},
          {"orientation_consistent", r.orientation_consistent},
          {"signed_volume", r.signed_volume},
          {"self_intersection_count", r.self_intersection_count},
          {"messages", r.messages}};
}

}  // namespace mesh

void to_json(Json& j, const GeometryRecord& v) {
  j = {{"id", v.id},
       {"name", v.name},
       {"owner_org_id", v.owner_org_id},
       {"created_by", v.created_by},
       {"file_name", v.file_name},
       {"file_ref", v.file_ref},
       {"preview_ref", v.preview_ref},
       {"validation", to_string(v.validation)},
       {"report", v.report},
       {"bbox", v.bbox ? Json(*v.bbox) : Json(nullptr)},
       {"created_at", v.created_at}};
}

void from_json(const Json& j, GeometryRecord& v) {
  v.id = j.at("id");
  v.name = j.at("name");
  v.owner_org_id = j.at("owner_org_id");
  v.created_by = value_or<std::string>(j, "created_by", "");
  v.file_name = value_or<std::string>(j, "file_name", "");
  v.file_ref = value_or<std::string>(j, "file_ref", "");
  v.preview_ref = value_or<std::string>(j, "preview_ref", "");
  const std::string state = j.at("validation");
  v.validation = state == "VALID"     ? GeometryValidation::Valid
                 : state == "INVALID" ? GeometryValidation::Invalid
                                      : GeometryValidation::Pending;
  v.report = value_or(j, "report", Json(nullptr));
  v.bbox.reset();
  if (j.contains("bbox") && !j["bbox"].is_null()) v.bbox = j["bbox"].get<mesh::BoundingBox>();
  v.created_at = value_or<Millis>(j, "created_at", 0);
}

void to_json(Json& j, const StatusEntry& v) {
  j = {{"step", v.step}, {"message", v.message}, {"timestamp", v.timestamp}};
}

void from_json(const Json& j, StatusEntry& v) {
  v.step = j.at("step");
  v.message = value_or<std::string>(j, "message", "");
  v.timestamp = value_or<Millis>(j, "timestamp", 0);
}

void to_json(Json& j, const SimulationRecord& v) {
  j = {{"id", v.id},
       {"name", v.name},
       {"owner_org_id", v.owner_org_id},
       {"created_by", v.created_by},
       {"simsetup_id", v.simsetup_id},
       {"machine_id", v.machine_id},
       {"geometry_id", v.geometry_id},
       {"visibility", to_string(v.visibility)},
       {"params", v.params},
       {"status_history", v.status_history},
       {"deleted", v.deleted},
       {"range_parent_id", v.range_parent_id ? Json(*v.range_parent_id) : Json(nullptr)},
       {"range_header", v.range_header},
       {"results_ref", v.results_ref ? Json(*v.results_ref) : Json(nullptr)},
       {"summary", v.summary},
       {"job_id", v.job_id},
       {"callback_token", v.callback_token},
       {"created_at", v.created_at}};
}

void from_json(const Json& j, SimulationRecord& v) {
  v.id = j.at("id");
  v.name = j.at("name");
  v.owner_org_id = j.at("owner_org_id");
  v.created_by = value_or<std::string>(j, "created_by", "");
  v.simsetup_id = j.at("simsetup_id");
  v.machine_id = j.at("machine_id");
  v.geometry_id = j.at("geometry_id");
  v.visibility = visibility_from_string(j.at("visibility"));
  v.params = j.at("params").get<PhysicalParameters>();
  v.status_history = value_or(j, "status_history", std::vector<StatusEntry>{});
  v.deleted = value_or(j, "deleted", false);
  v.range_parent_id.reset();
  if (j.contains("range_parent_id") && !j["range_parent_id"].is_null()) v.range_parent_id = j["range_parent_id"];
  v.range_header = value_or(j, "range_header", false);
  v.results_ref.reset();
  if (j.contains("results_ref") && !j["results_ref"].is_null()) v.results_ref = j["results_ref"];
  v.summary = value_or(j, "summary", std::map<std::string, double>{});
  v.job_id = value_or<std::string>(j, "job_id", "");
  v.callback_token = value_or<std::string>(j, "callback_token", "");
  v.created_at = value_or<Millis>(j, "created_at", 0);
}

void to_json(Json& j, const MachineConfig& v) {
  j = {{"id", v.id},
       {"name", v.name},
       {"address", v.address},
       {"root_folder", v.root_folder},
       {"username", v.username},
       {"scheduler", to_string(v.scheduler)},
       {"nodes_default", v.nodes_default},
       {"tasks_per_node", v.tasks_per_node},
       {"walltime_s", v.walltime_s},
       {"enabled", v.enabled}};
}

void from_json(const Json& j, MachineConfig& v) {
  v.id = value_or<std::string>(j, "id", "");
  v.name = j.at("name");
  v.address = value_or<std::string>(j, "address", "localhost");
  v.root_folder = j.at("root_folder");
  v.username = value_or<std::string>(j, "username", "");
  v.scheduler = scheduler_from_string(value_or<std::string>(j, "scheduler", "LOCAL"));
  v.nodes_default = value_or(j, "nodes_default", 1);
  v.tasks_per_node = value_or(j, "tasks_per_node", 1);
  v.walltime_s = value_or(j, "walltime_s", 86400);
  v.enabled = value_or(j, "enabled", false);
}

void to_json(Json& j, const SimSetupConfig& v) {
  Json statuses = Json::object();
  for (const auto& [k, name] : v.statuses_dictionary) statuses[std::to_string(k)] = name;
  j = {{"id", v.id},
       {"name", v.name},
       {"dof_mode", simsetup::to_string(v.dof_mode)},
       {"default_parameters", v.default_parameters},
       {"statuses_dictionary", statuses},
       {"supported_machine_ids", v.supported_machine_ids},
       {"build_script_ref", v.build_script_ref}};
}

void from_json(const Json& j, SimSetupConfig& v) {
  v.id = value_or<std::string>(j, "id", "");
  v.name = j.at("name");
  v.dof_mode = simsetup::dof_mode_from_string(value_or<std::string>(j, "dof_mode", "SINK_1DOF"));
  v.default_parameters = value_or(j, "default_parameters", std::map<std::string, std::string>{});
  v.statuses_dictionary.clear();
  if (j.contains("statuses_dictionary")) {
    for (const auto& [k, name] : j["statuses_dictionary"].items()) {
      try {
        v.statuses_dictionary[std::stoi(k)] = name.get<std::string>();
      } catch (const std::logic_error&) {
        fail(Errc::Validation, "statuses_dictionary: key '" + k + "' is not an integer");
      }
    }
  }
  v.supported_machine_ids = value_or(j, "supported_machine_ids", std::set<std::string>{});
  v.build_script_ref = value_or<std::string>(j, "build_script_ref", "");
}

void to_json(Json& j, const HelpRequest& v) {
  j = {{"id", v.id},           {"kind", v.kind}, {"entity_id", v.entity_id}, {"user_id", v.user_id},
       {"text", v.text},       {"created_at", v.created_at}};
}

void from_json(const Json& j, HelpRequest& v) {
  v.id = j.at("id");
  v.kind = j.at("kind");
  v.entity_id = j.at("entity_id");
  v.user_id = j.at("user_id");
  v.text = j.at("text");
  v.created_at = value_or<Millis>(j, "created_at", 0);
}

Catalogue::Catalogue(MetadataStore& store, BlobStore& blobs, const Clock& clock)
    : store_(store), blobs_(blobs), clock_(clock) {}

std::string Catalogue::new_id(RecordKind kind, const char* prefix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06llu", prefix, static_cast<unsigned long long>(store_.next_sequence(kind)));
  return buf;
}

void Catalogue::require_admin(const User& actor) const {
  if (!actor.approved || !actor.admin) fail(Errc::NotAuthorized, "administrator privileges required");
}

void Catalogue::on_simulation_changed(std::function<void(const SimulationRecord&)> listener) {
  listeners_.push_back(std::move(listener));
}

void Catalogue::notify(const SimulationRecord& sim) const {
  for (const auto& l : listeners_) l(sim);
}

// Users and organizations ---------------------------------------------------

User Catalogue::register_user(const std::string& login, const std::string& display_name,
                              const std::string& password, bool admin) {
  if (blank(login)) fail(Errc::Validation, "login: must not be empty");
  if (password.empty()) fail(Errc::Validation, "password: must not be empty");
  std::lock_guard lock(g_create_mu);
  if (find_user_by_login(login)) fail(Errc::DuplicateName, "login '" + login + "' is taken");
  User u;
  u.id = new_id(RecordKind::User, "user");
  u.login = login;
  u.display_name = display_name.empty() ? login : display_name;
  u.password_salt = random_hex(16);
  u.password_hash = pbkdf2_hex(password, u.password_salt);
  u.admin = admin;
  store_.put(RecordKind::User, u.id, u);
  return u;
}

User Catalogue::approve_user(const User& actor, const std::string& user_id) {
  require_admin(actor);
  auto doc = store_.update(RecordKind::User, user_id, [](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur) return std::nullopt;
    Json next = *cur;
    next["approved"] = true;
    return next;
  });
  if (!doc) fail(Errc::NotFound, "user " + user_id + " not found");
  return doc->get<User>();
}

User Catalogue::add_member(const User& actor, const std::string& user_id, const std::string& org_id) {
  require_admin(actor);
  get_org(org_id);
  auto doc = store_.update(RecordKind::User, user_id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur) return std::nullopt;
    User u = cur->get<User>();
    if (!u.organization_ids.insert(org_id).second) return std::nullopt;
    return Json(u);
  });
  if (!doc) fail(Errc::NotFound, "user " + user_id + " not found");
  return doc->get<User>();
}

User Catalogue::authenticate(const std::string& login, const std::string& password) const {
  auto u = find_user_by_login(login);
  if (!u || pbkdf2_hex(password, u->password_salt) != u->password_hash) {
    fail(Errc::Unauthenticated, "invalid login or password");
  }
  if (!u->approved) fail(Errc::Unauthenticated, "account is awaiting approval");
  return *u;
}

User Catalogue::get_user(const std::string& user_id) const {
  auto u = load<User>(store_, RecordKind::User, user_id);
  if (!u) fail(Errc::NotFound, "user " + user_id + " not found");
  return *u;
}

std::optional<User> Catalogue::find_user_by_login(const std::string& login) const {
  for (auto& u : load_all<User>(store_, RecordKind::User)) {
    if (u.login == login) return u;
  }
  return std::nullopt;
}

std::vector<User> Catalogue::list_users(const User& actor) const {
  require_admin(actor);
  return load_all<User>(store_, RecordKind::User);
}

Organization Catalogue::create_org(const User& actor, const std::string& name) {
  require_admin(actor);
  if (blank(name)) fail(Errc::Validation, "name: must not be empty");
  std::lock_guard lock(g_create_mu);
  for (const auto& o : load_all<Organization>(store_, RecordKind::Organization)) {
    if (o.name == name) fail(Errc::DuplicateName, "organization '" + name + "' exists");
  }
  Organization o;
  o.id = new_id(RecordKind::Organization, "org");
  o.name = name;
  store_.put(RecordKind::Organization, o.id, o);
  return o;
}

Organization Catalogue::grant_machine(const User& actor, const std::string& org_id, const std::string& machine_id) {
  require_admin(actor);
  get_machine(machine_id);
  auto doc = store_.update(RecordKind::Organization, org_id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur) return std::nullopt;
    Organization o = cur->get<Organization>();
    if (!o.authorized_machine_ids.insert(machine_id).second) return std::nullopt;
    return Json(o);
  });
  if (!doc) fail(Errc::NotFound, "organization " + org_id + " not found");
  return doc->get<Organization>();
}

Organization Catalogue::grant_simsetup(const User& actor, const std::string& org_id,
                                       const std::string& simsetup_id) {
  require_admin(actor);
  get_simsetup(simsetup_id);
  auto doc = store_.update(RecordKind::Organization, org_id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur) return std::nullopt;
    Organization o = cur->get<Organization>();
    if (!o.authorized_simsetup_ids.insert(simsetup_id).second) return std::nullopt;
    return Json(o);
  });
  if (!doc) fail(Errc::NotFound, "organization " + org_id + " not found");
  return doc->get<Organization>();
}

Organization Catalogue::get_org(const std::string& org_id) const {
  auto o = load<Organization>(store_, RecordKind::Organization, org_id);
  if (!o) fail(Errc::NotFound, "organization " + org_id + " not found");
  return *o;
}

std::vector<Organization> Catalogue::list_orgs(const User& actor) const {
  auto all = load_all<Organization>(store_, RecordKind::Organization);
  if (actor.admin) return all;
  std::erase_if(all, [&](const Organization& o) { return !actor.member_of(o.id); });
  return all;
}

// Machines and setups -------------------------------------------------------

MachineConfig Catalogue::add_machine(const User& actor, MachineConfig m) {
  require_admin(actor);
  if (blank(m.name)) fail(Errc::Validation, "name: must not be empty");
  if (blank(m.root_folder)) fail(Errc::Validation, "root_folder: must not be empty");
  if (m.nodes_default < 1) fail(Errc::Validation, "nodes_default: must be >= 1");
  if (m.tasks_per_node < 1) fail(Errc::Validation, "tasks_per_node: must be >= 1");
  if (m.walltime_s < 1) fail(Errc::Validation, "walltime_s: must be >= 1");
  std::lock_guard lock(g_create_mu);
  for (const auto& other : list_machines()) {
    if (other.name == m.name) fail(Errc::DuplicateName, "machine '" + m.name + "' exists");
  }
  m.id = new_id(RecordKind::Machine, "machine");
  store_.put(RecordKind::Machine, m.id, m);
  return m;
}

MachineConfig Catalogue::set_machine_enabled(const User& actor, const std::string& machine_id, bool enabled) {
  require_admin(actor);
  auto doc = store_.update(RecordKind::Machine, machine_id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur) return std::nullopt;
    Json next = *cur;
    next["enabled"] = enabled;
    return next;
  });
  if (!doc) fail(Errc::NotFound, "machine " + machine_id + " not found");
  return doc->get<MachineConfig>();
}

MachineConfig Catalogue::get_machine(const std::string& machine_id) const {
  auto m = load<MachineConfig>(store_, RecordKind::Machine, machine_id);
  if (!m) fail(Errc::NotFound, "machine " + machine_id + " not found");
  return *m;
}

std::vector<MachineConfig> Catalogue::list_machines() const {
  return load_all<MachineConfig>(store_, RecordKind::Machine);
}

SimSetupConfig Catalogue::add_simsetup(const User& actor, SimSetupConfig s) {
  require_admin(actor);
  if (blank(s.name)) fail(Errc::Validation, "name: must not be empty");
  if (s.statuses_dictionary.empty()) s.statuses_dictionary = SimSetupConfig::reference_statuses();
  const int max_step = s.statuses_dictionary.rbegin()->first;
  for (int k = 0; k <= max_step; ++k) {
    auto it = s.statuses_dictionary.find(k);
    if (it == s.statuses_dictionary.end() || blank(it->second)) {
      fail(Errc::Validation, "statuses_dictionary: step " + std::to_string(k) + " needs a name");
    }
  }
  if (s.statuses_dictionary.begin()->first < 0) fail(Errc::Validation, "statuses_dictionary: negative step");
  if (s.build_script_ref.empty()) s.build_script_ref = s.name;
  for (const auto& m : s.supported_machine_ids) get_machine(m);
  std::lock_guard lock(g_create_mu);
  for (const auto& other : list_simsetups()) {
    if (other.name == s.name) fail(Errc::DuplicateName, "simsetup '" + s.name + "' exists");
  }
  s.id = new_id(RecordKind::SimSetup, "setup");
  store_.put(RecordKind::SimSetup, s.id, s);
  return s;
}

SimSetupConfig Catalogue::get_simsetup(const std::string& simsetup_id) const {
  auto s = load<SimSetupConfig>(store_, RecordKind::SimSetup, simsetup_id);
  if (!s) fail(Errc::NotFound, "simsetup " + simsetup_id + " not found");
  return *s;
}

std::vector<SimSetupConfig> Catalogue::list_simsetups() const {
  return load_all<SimSetupConfig>(store_, RecordKind::SimSetup);
}

// Geometries ----------------------------------------------------------------

GeometryRecord Catalogue::create_geometry(const User& user, const std::string& org_id, const std::string& name,
                                          std::string_view file_bytes, const std::string& file_name) {
  if (!user.approved || !user.member_of(org_id)) fail(Errc::NotAuthorized, "not a member of " + org_id);
  if (blank(name)) fail(Errc::Validation, "name: must not be empty");
  if (file_bytes.empty()) fail(Errc::Validation, "file: must not be empty");
  std::lock_guard lock(g_create_mu);
  for (const auto& g : load_all<GeometryRecord>(store_, RecordKind::Geometry)) {
    if (g.owner_org_id == org_id && g.name == name) {
      fail(Errc::DuplicateName, "geometry '" + name + "' exists in " + org_id);
    }
  }
  GeometryRecord g;
  g.id = new_id(RecordKind::Geometry, "geo");
  g.name = name;
  g.owner_org_id = org_id;
  g.created_by = user.id;
  g.file_name = file_name.empty() ? "geometry.stl" : std::filesystem::path(file_name).filename().string();
  g.file_ref = blobs_.put(file_bytes);
  g.created_at = clock_.now_ms();
  store_.put(RecordKind::Geometry, g.id, g);
  return g;
}

GeometryRecord Catalogue::get_geometry(const User& user, const std::string& geometry_id) const {
  auto g = find_geometry(geometry_id);
  if (!g || !user.approved || !(user.member_of(g->owner_org_id) || user.admin)) {
    fail(Errc::NotFound, "geometry " + geometry_id + " not found");
  }
  return *g;
}

std::vector<GeometryRecord> Catalogue::list_geometries(const User& user) const {
  auto all = load_all<GeometryRecord>(store_, RecordKind::Geometry);
  std::erase_if(all, [&](const GeometryRecord& g) { return !user.approved || !user.member_of(g.owner_org_id); });
  return all;
}

std::string Catalogue::geometry_file(const User& user, const std::string& geometry_id) const {
  return blobs_.get(get_geometry(user, geometry_id).file_ref);
}

std::optional<GeometryRecord> Catalogue::find_geometry(const std::string& geometry_id) const {
  return load<GeometryRecord>(store_, RecordKind::Geometry, geometry_id);
}

GeometryRecord Catalogue::validate_geometry(const std::string& geometry_id) {
  auto g = find_geometry(geometry_id);
  if (!g) fail(Errc::NotFound, "geometry " + geometry_id + " not found");
  if (g->validation != GeometryValidation::Pending) return *g;  // already done by an earlier attempt

  GeometryRecord result = *g;
  try {
    mesh::TriangleMesh m = mesh::parse_mesh(blobs_.get(g->file_ref), g->file_name);
    mesh::ValidationReport r = mesh::validate(m);
    result.report = mesh::report_json(r);
    result.bbox = mesh::bounding_box(m);
    result.preview_ref = blobs_.put(mesh::to_binary_stl(mesh::decimate(m, mesh::kPreviewTriangles)));
    result.validation = r.is_valid ? GeometryValidation::Valid : GeometryValidation::Invalid;
  } catch (const Error& e) {
    if (e.code() == Errc::Io || e.code() == Errc::NotFound) throw;  // storage trouble: let the task retry
    result.validation = GeometryValidation::Invalid;
    result.report = {{"is_valid", false}, {"messages", {std::string(to_string(e.code())) + ": " + e.what()}}};
  }
  auto doc = store_.update(RecordKind::Geometry, geometry_id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur || cur->at("validation") != "PENDING") return std::nullopt;
    return Json(result);
  });
  return doc->get<GeometryRecord>();
}

// Simulations ---------------------------------------------------------------

void Catalogue::check_draft(const User& user, const SimulationDraft& d) const {
  if (!user.approved) fail(Errc::NotAuthorized, "account not approved");
  if (!user.member_of(d.owner_org_id)) fail(Errc::NotAuthorized, "not a member of " + d.owner_org_id);
  const Organization org = get_org(d.owner_org_id);
  if (!org.authorized_simsetup_ids.count(d.simsetup_id)) {
    fail(Errc::NotAuthorized, "simsetup " + d.simsetup_id + " is not granted to " + org.id);
  }
  if (!org.authorized_machine_ids.count(d.machine_id)) {
    fail(Errc::NotAuthorized, "machine " + d.machine_id + " is not granted to " + org.id);
  }
  const SimSetupConfig setup = get_simsetup(d.simsetup_id);
  if (!setup.supported_machine_ids.count(d.machine_id)) {
    fail(Errc::NotAuthorized, "machine " + d.machine_id + " is not supported by simsetup " + setup.id);
  }
  const MachineConfig machine = get_machine(d.machine_id);
  if (!machine.enabled) fail(Errc::Validation, "machine_id: machine " + machine.id + " is disabled");
  auto g = find_geometry(d.geometry_id);
  if (!g || g->owner_org_id != d.owner_org_id) {
    fail(Errc::NotAuthorized, "geometry " + d.geometry_id + " does not belong to " + d.owner_org_id);
  }
  if (g->validation != GeometryValidation::Valid) {
    fail(Errc::GeometryNotValid, "geometry " + g->id + " is " + to_string(g->validation));
  }
  if (blank(d.name)) fail(Errc::Validation, "name: must not be empty");
  check_parameters(d.params);
}

SimulationRecord Catalogue::create_simulation(const User& user, const SimulationDraft& d) {
  check_draft(user, d);
  SimulationRecord s;
  s.id = new_id(RecordKind::Simulation, "sim");
  s.name = d.name;
  s.owner_org_id = d.owner_org_id;
  s.created_by = user.id;
  s.simsetup_id = d.simsetup_id;
  s.machine_id = d.machine_id;
  s.geometry_id = d.geometry_id;
  s.visibility = d.visibility;
  s.params = d.params;
  s.created_at = clock_.now_ms();
  s.status_history.push_back({0, "Created", s.created_at});
  s.callback_token = random_hex(24);
  store_.put(RecordKind::Simulation, s.id, s);
  notify(s);
  return s;
}

bool Catalogue::can_see(const User& user, const SimulationRecord& sim) const {
  if (!user.approved) return false;
  if (user.member_of(sim.owner_org_id)) return true;
  return sim.visibility == Visibility::Public && !sim.deleted;
}

SimulationRecord Catalogue::get_simulation(const User& user, const std::string& sim_id) const {
  auto s = find_simulation(sim_id);
  if (!s || !can_see(user, *s)) fail(Errc::NotFound, "simulation " + sim_id + " not found");
  return *s;
}

std::vector<SimulationRecord> Catalogue::list_simulations(const User& user) const {
  auto all = all_simulations();
  std::erase_if(all, [&](const SimulationRecord& s) { return !can_see(user, s); });
  return all;
}

SimulationRecord Catalogue::soft_delete(const User& user, const std::string& sim_id) {
  SimulationRecord s = get_simulation(user, sim_id);
  if (!user.member_of(s.owner_org_id)) fail(Errc::NotAuthorized, "only the owner organization may delete");
  return update_simulation(sim_id, [](SimulationRecord& r) {
    if (r.deleted) return false;
    r.deleted = true;
    return true;
  });
}

std::optional<SimulationRecord> Catalogue::find_simulation(const std::string& sim_id) const {
  return load<SimulationRecord>(store_, RecordKind::Simulation, sim_id);
}

std::vector<SimulationRecord> Catalogue::all_simulations() const {
  return load_all<SimulationRecord>(store_, RecordKind::Simulation);
}

SimulationRecord Catalogue::update_simulation(const std::string& sim_id,
                                              const std::function<bool(SimulationRecord&)>& fn) {
  bool changed = false;
  auto doc = store_.update(RecordKind::Simulation, sim_id, [&](const std::optional<Json>& cur) -> std::optional<Json> {
    if (!cur) return std::nullopt;
    SimulationRecord r = cur->get<SimulationRecord>();
    if (!fn(r)) return std::nullopt;
    changed = true;
    return Json(r);
  });
  if (!doc) fail(Errc::UnknownSimulation, "simulation " + sim_id + " does not exist");
  SimulationRecord r = doc->get<SimulationRecord>();
  if (changed) notify(r);
  return r;
}

std::vector<SimulationRecord> Catalogue::insert_simulations(std::vector<SimulationRecord> records) {
  std::vector<std::string> written;
  try {
    for (auto& r : records) {
      if (r.id.empty()) r.id = new_id(RecordKind::Simulation, "sim");
      store_.put(RecordKind::Simulation, r.id, r);
      written.push_back(r.id);
    }
  } catch (...) {
    for (const auto& id : written) store_.erase(RecordKind::Simulation, id);
    throw;
  }
  for (const auto& r : records) notify(r);
  return records;
}

// Help requests -------------------------------------------------------------

HelpRequest Catalogue::create_help_request(const User& user, const std::string& kind, const std::string& entity_id,
                                           const std::string& text) {
  if (kind == "GEOMETRY") {
    get_geometry(user, entity_id);
  } else if (kind == "SIMULATION") {
    get_simulation(user, entity_id);
  } else {
    fail(Errc::Validation, "kind: must be GEOMETRY or SIMULATION");
  }
  if (blank(text)) fail(Errc::EmptyText, "help request text is empty");
  HelpRequest h;
  h.id = new_id(RecordKind::HelpRequest, "help");
  h.kind = kind;
  h.entity_id = entity_id;
  h.user_id = user.id;
  h.text = text;
  h.created_at = clock_.now_ms();
  store_.put(RecordKind::HelpRequest, h.id, h);
  return h;
}

std::vector<HelpRequest> Catalogue::list_help_requests() const {
  return load_all<HelpRequest>(store_, RecordKind::HelpRequest);
}

// Consistency ---------------------------------------------------------------

std::vector<Anomaly> Catalogue::consistency_check(const JobLiveness& job_alive) const {
  std::vector<Anomaly> out;
  std::set<std::string> geometry_ids;
  for (const auto& g : load_all<GeometryRecord>(store_, RecordKind::Geometry)) {
    geometry_ids.insert(g.id);
    if (!blobs_.exists(g.file_ref)) {
      out.push_back({"DANGLING_GEOMETRY", g.id, "geometry file " + g.file_ref + " is missing from blob storage"});
    }
  }
  for (const auto& s : all_simulations()) {
    if (!geometry_ids.count(s.geometry_id)) {
      out.push_back({"DANGLING_GEOMETRY", s.id, "simulation references missing geometry " + s.geometry_id});
    }
    if (s.status() == SimStatus::Running) {
      std::optional<bool> alive = s.job_id.empty() ? std::optional<bool>(false) : job_alive(s);
      if (alive && !*alive) {
        out.push_back({"RUNNING_WITHOUT_JOB", s.id,
                       "status is Running but job '" + s.job_id + "' is unknown to the scheduler"});
      }
    }
    if (s.results_ref) {
      bool ok = blobs_.exists(*s.results_ref);
      if (ok) {
        try {
          for (const auto& f : Json::parse(blobs_.get(*s.results_ref)).at("files")) {
            if (!blobs_.exists(f.at("sha256").get<std::string>())) ok = false;
          }
        } catch (const std::exception&) {
          ok = false;
        }
      }
      if (!ok) out.push_back({"ORPHANED_RESULTS", s.id, "results " + *s.results_ref + " are missing or incomplete"});
    }
  }
  return out;
}

}  // namespace vtank
