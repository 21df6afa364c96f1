#include "vtank/rangerun.hpp"

#include <algorithm>
#include <cstdio>

#include "vtank/digest.hpp"
#include "vtank/error.hpp"

namespace vtank {

RangeSpec range_spec_from_json(const Json& j) {
  try {
    RangeSpec s;
    s.parameter = scalar_parameter_from_string(j.at("parameter").get<std::string>());
    s.lo = j.at("lo").get<double>();
    s.hi = j.at("hi").get<double>();
    s.count = j.at("count").get<int>();
    return s;
  } catch (const Json::exception& e) {
    fail(Errc::Validation, std::string("range: ") + e.what());
  }
}

std::vector<double> range_values(const RangeSpec& spec) {
  std::vector<double> v;
  for (int i = 0; i < spec.count; ++i) {
    v.push_back(i == spec.count - 1 ? spec.hi : spec.lo + i * (spec.hi - spec.lo) / (spec.count - 1));
  }
  return v;
}

namespace {

void check_spec(const RangeSpec& spec, const PhysicalParameters& base) {
  if (spec.count < 2) fail(Errc::Validation, "count: must be at least 2");
  if (spec.count > 1000) fail(Errc::Validation, "count: at most 1000 points");
  if (!(spec.lo < spec.hi)) fail(Errc::Validation, "lo: must be below hi");
  for (double end : {spec.lo, spec.hi}) {
    PhysicalParameters p = base;
    set(p, spec.parameter, end);
    check_parameters(p);
  }
}

std::string child_name(const std::string& base, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_r%03d", i + 1);
  return base + buf;
}

// Which field was swept, read back from the children themselves.
std::optional<ScalarParameter> swept(const std::vector<SimulationRecord>& kids) {
  if (kids.size() < 2) return std::nullopt;
  for (auto p : {ScalarParameter::Velocity, ScalarParameter::Mass, ScalarParameter::TrimAngle, ScalarParameter::WaterZ,
                 ScalarParameter::WaterTemperature}) {
    if (get(kids.front().params, p) != get(kids.back().params, p)) return p;
  }
  return std::nullopt;
}

}  // namespace

std::vector<SimulationRecord> expand_range(Catalogue& cat, const User& user, const std::string& base_id,
                                           const RangeSpec& spec) {
  SimulationRecord base = cat.get_simulation(user, base_id);
  if (!user.member_of(base.owner_org_id)) fail(Errc::NotAuthorized, "only the owner organization may run a range");
  if (base.range_header || base.range_parent_id) fail(Errc::Conflict, base_id + " already belongs to a range");
  if (base.deleted || base.last_step() != 0) fail(Errc::Conflict, base_id + " is not in the Created state");
  check_spec(spec, base.params);

  SimulationDraft d;
  d.name = base.name;
  d.owner_org_id = base.owner_org_id;
  d.simsetup_id = base.simsetup_id;
  d.machine_id = base.machine_id;
  d.geometry_id = base.geometry_id;
  d.visibility = base.visibility;
  d.params = base.params;
  cat.check_draft(user, d);

  // Claiming the header first makes a concurrent second expansion fail.
  bool claimed = false;
  cat.update_simulation(base_id, [&](SimulationRecord& r) {
    if (r.range_header || r.deleted || r.last_step() != 0) return false;
    r.range_header = true;
    claimed = true;
    return true;
  });
  if (!claimed) fail(Errc::Conflict, base_id + " changed while the range was being created");

  const Millis now = cat.clock().now_ms();
  std::vector<SimulationRecord> kids;
  const auto values = range_values(spec);
  for (size_t i = 0; i < values.size(); ++i) {
    SimulationRecord c;
    c.name = child_name(base.name, static_cast<int>(i));
    c.owner_org_id = base.owner_org_id;
    c.created_by = user.id;
    c.simsetup_id = base.simsetup_id;
    c.machine_id = base.machine_id;
    c.geometry_id = base.geometry_id;
    c.visibility = base.visibility;
    c.params = base.params;
    set(c.params, spec.parameter, values[i]);
    c.range_parent_id = base_id;
    c.created_at = now;
    c.status_history.push_back({0, "Created", now});
    c.callback_token = random_hex(24);
    kids.push_back(std::move(c));
  }
  try {
    return cat.insert_simulations(std::move(kids));
  } catch (...) {
    cat.update_simulation(base_id, [](SimulationRecord& r) {
      r.range_header = false;
      return true;
    });
    throw;
  }
}

std::vector<SimulationRecord> family_children(const Catalogue& cat, const std::string& parent_id) {
  std::vector<SimulationRecord> kids;
  for (auto& s : cat.all_simulations()) {
    if (s.range_parent_id == parent_id) kids.push_back(std::move(s));
  }
  std::sort(kids.begin(), kids.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return kids;
}

SimStatus family_status(const std::vector<SimulationRecord>& children) {
  bool any = false, error = false, open = false;
  for (const auto& c : children) {
    if (c.deleted) continue;
    any = true;
    SimStatus s = c.status();
    error = error || s == SimStatus::Error;
    open = open || (s == SimStatus::Created || s == SimStatus::Running);
  }
  if (!any) return SimStatus::Deleted;
  if (error) return SimStatus::Error;
  return open ? SimStatus::Running : SimStatus::Completed;
}

std::vector<SeriesPoint> family_series(const Catalogue& cat, const User& user, const std::string& parent_id,
                                       const std::string& y_coord) {
  SimulationRecord parent = cat.get_simulation(user, parent_id);
  if (!parent.range_header) fail(Errc::Validation, parent_id + " is not a range header");
  auto kids = family_children(cat, parent_id);
  std::erase_if(kids, [](const SimulationRecord& s) { return s.deleted; });
  std::string pending;
  for (const auto& k : kids) {
    if (k.status() != SimStatus::Completed) {
      pending += (pending.empty() ? "" : ", ") + k.id + " (" + k.name + ": " + to_string(k.status()) + ")";
    }
  }
  if (!pending.empty()) fail(Errc::IncompleteFamily, "family " + parent_id + " is incomplete: " + pending);
  auto param = swept(kids);
  std::vector<SeriesPoint> out;
  for (const auto& k : kids) {
    auto y = coordinate_value(k, y_coord);
    if (!y) fail(Errc::MissingArtifact, k.id + " has no value for " + y_coord);
    out.push_back({k.id, param ? get(k.params, *param) : 0.0, *y});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  return out;
}

}  // namespace vtank
