#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vtank/clock.hpp"
#include "vtank/mesh.hpp"
#include "vtank/parameters.hpp"
#include "vtank/simsetup.hpp"
#include "vtank/store.hpp"

namespace vtank {

struct User {
  std::string id;
  std::string login;
  std::string display_name;
  std::string password_salt;
  std::string password_hash;
  bool approved = false;
  bool admin = false;
  std::set<std::string> organization_ids;

  bool member_of(const std::string& org_id) const { return organization_ids.count(org_id) > 0; }
  /// Trusted in-process actor used by the command line tool.
  static User system();
};

struct Organization {
  std::string id;
  std::string name;
  std::set<std::string> authorized_machine_ids;
  std::set<std::string> authorized_simsetup_ids;
};

enum class GeometryValidation { Pending, Valid, Invalid };
const char* to_string(GeometryValidation v) noexcept;

struct GeometryRecord {
  std::string id;
  std::string name;
  std::string owner_org_id;
  std::string created_by;
  std::string file_name;
  std::string file_ref;
  std::string preview_ref;
  GeometryValidation validation = GeometryValidation::Pending;
  Json report;  // ValidationReport as JSON once validated
  std::optional<mesh::BoundingBox> bbox;
  Millis created_at = 0;
};

enum class Visibility { Private, Public };
const char* to_string(Visibility v) noexcept;
Visibility visibility_from_string(const std::string& s);

struct StatusEntry {
  int step = 0;
  std::string message;
  Millis timestamp = 0;
  friend bool operator==(const StatusEntry&, const StatusEntry&) = default;
};

enum class SimStatus { Created, Running, Completed, Error, Deleted };
const char* to_string(SimStatus s) noexcept;
SimStatus sim_status_from_string(const std::string& s);
/// 0 Created, 1..5 Running, 6 Completed, negative Error.
SimStatus status_of_step(int step) noexcept;
inline bool is_terminal_step(int step) noexcept { return step == 6 || step < 0; }

struct SimulationRecord {
  std::string id;
  std::string name;
  std::string owner_org_id;
  std::string created_by;
  std::string simsetup_id;
  std::string machine_id;
  std::string geometry_id;
  Visibility visibility = Visibility::Private;
  PhysicalParameters params;
  std::vector<StatusEntry> status_history;
  bool deleted = false;
  std::optional<std::string> range_parent_id;
  bool range_header = false;
  std::optional<std::string> results_ref;
  std::map<std::string, double> summary;  // summary.csv values once ingested
  std::string job_id;
  std::string callback_token;
  Millis created_at = 0;

  int last_step() const { return status_history.empty() ? 0 : status_history.back().step; }
  SimStatus status() const;
};

enum class SchedulerKind { Pbs, Slurm, Local };
const char* to_string(SchedulerKind s) noexcept;
SchedulerKind scheduler_from_string(const std::string& s);

struct MachineConfig {
  std::string id;
  std::string name;
  std::string address;
  std::string root_folder;
  std::string username;
  SchedulerKind scheduler = SchedulerKind::Local;
  int nodes_default = 1;
  int tasks_per_node = 1;
  int walltime_s = 86400;
  bool enabled = false;
};

struct SimSetupConfig {
  std::string id;
  std::string name;
  simsetup::DofMode dof_mode = simsetup::DofMode::Sink1;
  std::map<std::string, std::string> default_parameters;
  std::map<int, std::string> statuses_dictionary;
  std::set<std::string> supported_machine_ids;
  std::string build_script_ref;  // plugin directory name under <machine root>/setups/

  /// The reference setup's step names 0..6.
  static std::map<int, std::string> reference_statuses();
};

struct HelpRequest {
  std::string id;
  std::string kind;  // GEOMETRY or SIMULATION
  std::string entity_id;
  std::string user_id;
  std::string text;
  Millis created_at = 0;
};

struct SimulationDraft {
  std::string name;
  std::string owner_org_id;
  std::string simsetup_id;
  std::string machine_id;
  std::string geometry_id;
  Visibility visibility = Visibility::Private;
  PhysicalParameters params;
};

struct Anomaly {
  std::string kind;  // RUNNING_WITHOUT_JOB, DANGLING_GEOMETRY, ORPHANED_RESULTS
  std::string record_id;
  std::string message;
};

/// Answers whether the job currently attached to a running simulation is
/// known to its scheduler; nullopt when the machine cannot be asked.
using JobLiveness = std::function<std::optional<bool>(const SimulationRecord&)>;

void to_json(Json& j, const User& v);
void from_json(const Json& j, User& v);
void to_json(Json& j, const Organization& v);
void from_json(const Json& j, Organization& v);
void to_json(Json& j, const GeometryRecord& v);
void from_json(const Json& j, GeometryRecord& v);
void to_json(Json& j, const StatusEntry& v);
void from_json(const Json& j, StatusEntry& v);
void to_json(Json& j, const SimulationRecord& v);
void from_json(const Json& j, SimulationRecord& v);
void to_json(Json& j, const MachineConfig& v);
void from_json(const Json& j, MachineConfig& v);
void to_json(Json& j, const SimSetupConfig& v);
void from_json(const Json& j, SimSetupConfig& v);
void to_json(Json& j, const HelpRequest& v);
void from_json(const Json& j, HelpRequest& v);
namespace mesh {
void to_json(Json& j, const BoundingBox& b);
void from_json(const Json& j, BoundingBox& b);
Json report_json(const ValidationReport& r);
}  // namespace mesh

/// Multi-tenant records with organization-based access control. Reads of
/// records a user may not see fail with NOT_FOUND, never with a distinct
/// "forbidden", so existence does not leak.
class Catalogue {
 public:
  Catalogue(MetadataStore& store, BlobStore& blobs, const Clock& clock);

  MetadataStore& store() { return store_; }
  BlobStore& blobs() { return blobs_; }
  const Clock& clock() const { return clock_; }

  // Users and organizations.
  User register_user(const std::string& login, const std::string& display_name, const std::string& password,
                     bool admin = false);
  User approve_user(const User& actor, const std::string& user_id);
  User add_member(const User& actor, const std::string& user_id, const std::string& org_id);
  /// Throws Error(Unauthenticated) for unknown login, bad password or
  /// unapproved accounts.
  User authenticate(const std::string& login, const std::string& password) const;
  User get_user(const std::string& user_id) const;
  std::optional<User> find_user_by_login(const std::string& login) const;
  std::vector<User> list_users(const User& actor) const;

  Organization create_org(const User& actor, const std::string& name);
  Organization grant_machine(const User& actor, const std::string& org_id, const std::string& machine_id);
  Organization grant_simsetup(const User& actor, const std::string& org_id, const std::string& simsetup_id);
  Organization get_org(const std::string& org_id) const;
  std::vector<Organization> list_orgs(const User& actor) const;

  // Machines and setups (admin).
  MachineConfig add_machine(const User& actor, MachineConfig m);
  MachineConfig set_machine_enabled(const User& actor, const std::string& machine_id, bool enabled);
  MachineConfig get_machine(const std::string& machine_id) const;
  std::vector<MachineConfig> list_machines() const;
  SimSetupConfig add_simsetup(const User& actor, SimSetupConfig s);
  SimSetupConfig get_simsetup(const std::string& simsetup_id) const;
  std::vector<SimSetupConfig> list_simsetups() const;

  // Geometries (organization-private).
  GeometryRecord create_geometry(const User& user, const std::string& org_id, const std::string& name,
                                 std::string_view file_bytes, const std::string& file_name);
  GeometryRecord get_geometry(const User& user, const std::string& geometry_id) const;
  std::vector<GeometryRecord> list_geometries(const User& user) const;
  std::string geometry_file(const User& user, const std::string& geometry_id) const;
  /// Internal: runs parse, validate and decimate and records the outcome.
  GeometryRecord validate_geometry(const std::string& geometry_id);

  // Simulations.
  SimulationRecord create_simulation(const User& user, const SimulationDraft& draft);
  /// Same checks as create_simulation without persisting.
  void check_draft(const User& user, const SimulationDraft& draft) const;
  SimulationRecord get_simulation(const User& user, const std::string& sim_id) const;
  std::vector<SimulationRecord> list_simulations(const User& user) const;
  SimulationRecord soft_delete(const User& user, const std::string& sim_id);
  bool can_see(const User& user, const SimulationRecord& sim) const;

  /// Internal access without access control.
  std::optional<SimulationRecord> find_simulation(const std::string& sim_id) const;
  std::vector<SimulationRecord> all_simulations() const;
  std::optional<GeometryRecord> find_geometry(const std::string& geometry_id) const;
  /// Serialized read-modify-write. `fn` returns false to leave the record
  /// untouched. Throws Error(UnknownSimulation).
  SimulationRecord update_simulation(const std::string& sim_id, const std::function<bool(SimulationRecord&)>& fn);
  /// Persists several new simulations at once (all or none on failure).
  std::vector<SimulationRecord> insert_simulations(std::vector<SimulationRecord> records);

  HelpRequest create_help_request(const User& user, const std::string& kind, const std::string& entity_id,
                                  const std::string& text);
  std::vector<HelpRequest> list_help_requests() const;

  std::vector<Anomaly> consistency_check(const JobLiveness& job_alive) const;

  /// Called after every simulation write.
  void on_simulation_changed(std::function<void(const SimulationRecord&)> listener);

  std::string new_id(RecordKind kind, const char* prefix);

 private:
  void require_admin(const User& actor) const;
  void notify(const SimulationRecord& sim) const;

  MetadataStore& store_;
  BlobStore& blobs_;
  const Clock& clock_;
  std::vector<std::function<void(const SimulationRecord&)>> listeners_;
};

}  // namespace vtank
