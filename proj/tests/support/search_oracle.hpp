#pragma once

// Brute-force dashboard queries over a plain record list, plus a random
// record generator. Shares no code with the index.

#include <algorithm>
#include <cctype>
#include <random>

#include "world.hpp"
#include "vtank/search.hpp"

namespace vtank::testkit {

inline SimStatus oracle_status(const SimulationRecord& s) {
  if (s.deleted) return SimStatus::Deleted;
  int step = s.status_history.empty() ? 0 : s.status_history.back().step;
  if (step < 0) return SimStatus::Error;
  if (step == 0) return SimStatus::Created;
  if (step == 6) return SimStatus::Completed;
  return SimStatus::Running;
}

inline bool oracle_visible(const User& u, const SimulationRecord& s) {
  return rbac_oracle(u.approved, u.organization_ids.count(s.owner_org_id) > 0, s.visibility == Visibility::Public,
                     s.deleted);
}

inline std::optional<double> oracle_coordinate(const SimulationRecord& s, const std::string& c) {
  if (c == "velocity") return s.params.velocity;
  if (c == "mass") return s.params.mass;
  if (c == "trim_angle") return s.params.trim_angle;
  if (s.summary.count(c)) return s.summary.at(c);
  return std::nullopt;
}

inline std::vector<std::string> oracle_filter(const std::vector<SimulationRecord>& all, const User& u,
                                              const DashboardQuery& q) {
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  std::vector<SimulationRecord> hits;
  for (const auto& s : all) {
    if (!oracle_visible(u, s)) continue;
    SimStatus st = oracle_status(s);
    if (q.statuses ? !q.statuses->count(st) : st == SimStatus::Deleted) continue;
    if (q.org_id && s.owner_org_id != *q.org_id) continue;
    if (q.name_substring && lower(s.name).find(lower(*q.name_substring)) == std::string::npos) continue;
    hits.push_back(s);
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.created_at != b.created_at ? a.created_at > b.created_at : a.id < b.id;
  });
  std::vector<std::string> ids;
  for (std::size_t i = q.offset; i < hits.size() && ids.size() < q.limit; ++i) ids.push_back(hits[i].id);
  return ids;
}

inline std::vector<std::string> oracle_brush(const std::vector<SimulationRecord>& all, const User& u,
                                             const std::vector<std::string>& ids, const BrushSpec& spec) {
  std::vector<std::string> out;
  for (const auto& id : ids) {
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& s) { return s.id == id; });
    if (it == all.end() || !oracle_visible(u, *it)) continue;
    if (std::find(out.begin(), out.end(), id) != out.end()) continue;
    bool keep = true;
    for (const auto& [c, iv] : spec.intervals) {
      auto v = oracle_coordinate(*it, c);
      if (!v || *v < iv.first || *v > iv.second) keep = false;
    }
    if (keep) out.push_back(id);
  }
  return out;
}

/// Random simulation records for `w`'s organizations. KPI values come from
/// small discrete sets so interval endpoints are hit exactly.
struct RecordFuzzer {
  std::mt19937_64 rng;
  World& w;
  std::string geo_a, geo_b;

  RecordFuzzer(World& world, std::uint64_t seed) : rng(seed), w(world) {
    geo_a = w.valid_geometry(w.alice, w.org_a.id, "fz-a").id;
    geo_b = w.valid_geometry(w.bob, w.org_b.id, "fz-b").id;
  }

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

  std::string name() {
    static const char* parts[] = {"Hull", "hull", "WarpedHull", "ship", "Tanker", "_v2", "box", "KCS", "x"};
    std::string s;
    for (int i = 0, n = 1 + pick(3); i < n; ++i) s += parts[pick(9)];
    return s;
  }

  void randomize(SimulationRecord& r) {
    r.name = name();
    r.visibility = pick(2) ? Visibility::Public : Visibility::Private;
    r.deleted = pick(6) == 0;
    r.params.velocity = pick(6);
    r.params.mass = 100.0 * (1 + pick(5));
    r.params.trim_angle = pick(5) - 2;
    r.created_at = 1000 + pick(50);  // many ties
    static const int steps[] = {0, 1, 3, 5, 6, 6, 6, -2, -6};
    r.status_history = {{0, "Created", r.created_at}};
    int step = steps[pick(9)];
    if (step != 0) r.status_history.push_back({step, "", r.created_at + 1});
    r.summary.clear();
    if (step == 6) {
      for (const char* k : {"total_drag", "wsa", "p_max", "p_min", "max_wave_height", "final_trim", "final_sink"}) {
        if (pick(10)) r.summary[k] = 0.5 * pick(8);
      }
    }
  }

  SimulationRecord make() {
    SimulationRecord r;
    bool a = pick(2);
    r.owner_org_id = a ? w.org_a.id : w.org_b.id;
    r.created_by = a ? w.alice.id : w.bob.id;
    r.simsetup_id = w.setup.id;
    r.machine_id = w.machine.id;
    r.geometry_id = a ? geo_a : geo_b;
    r.params = box_params();
    randomize(r);
    return r;
  }

  DashboardQuery query() {
    DashboardQuery q;
    if (pick(2)) {
      static const char* needles[] = {"hull", "HULL", "war", "v2", "x", "ship", "kcs", "zzz", "", "ulls"};
      q.name_substring = needles[pick(10)];
    }
    if (pick(2)) {
      std::set<SimStatus> s;
      for (SimStatus st : {SimStatus::Created, SimStatus::Running, SimStatus::Completed, SimStatus::Error,
                           SimStatus::Deleted}) {
        if (pick(2)) s.insert(st);
      }
      q.statuses = s;
    }
    if (pick(3) == 0) q.org_id = pick(2) ? w.org_a.id : w.org_b.id;
    q.limit = pick(4) ? 1000 : 1 + pick(20);
    q.offset = pick(4) ? 0 : pick(30);
    return q;
  }

  BrushSpec brush_spec() {
    BrushSpec b;
    const auto& u = coordinate_universe();
    for (int i = 0, n = pick(4); i < n; ++i) {
      double lo = 0.5 * pick(8), hi = lo + 0.5 * pick(6);
      const std::string& c = u[pick(static_cast<int>(u.size()))];
      if (c == "mass") lo *= 100, hi *= 100;
      if (c == "trim_angle") lo -= 2, hi -= 2;
      b.intervals[c] = {lo, hi};
    }
    return b;
  }

  const User& user() {
    switch (pick(3)) {
      case 0: return w.alice;
      case 1: return w.bob;
      default: return w.carol;
    }
  }
};

struct EquivalenceReport {
  int queries = 0;
  int mismatches = 0;
  std::string first_mismatch;
};

/// Populates `records` random simulations, then runs `queries` rounds of
/// filter + brush against the oracles, mutating a few records between
/// rounds so the index has to follow updates.
inline EquivalenceReport search_equivalence(int records, int queries, std::uint64_t seed) {
  World w;
  SearchIndex index(*w.cat);
  RecordFuzzer fz(w, seed);
  std::vector<SimulationRecord> batch;
  for (int i = 0; i < records; ++i) batch.push_back(fz.make());
  w.cat->insert_simulations(batch);
  std::vector<std::string> ids;
  for (const auto& s : w.cat->all_simulations()) ids.push_back(s.id);

  EquivalenceReport rep;
  auto note = [&](const std::string& what) {
    if (rep.mismatches++ == 0) rep.first_mismatch = what;
  };
  for (int q = 0; q < queries; ++q) {
    for (int m = 0, n = fz.pick(4); m < n; ++m) {
      w.cat->update_simulation(ids[fz.pick(static_cast<int>(ids.size()))], [&](SimulationRecord& r) {
        fz.randomize(r);
        return true;
      });
    }
    const auto all = w.cat->all_simulations();
    const User& u = fz.user();
    DashboardQuery dq = fz.query();
    std::vector<std::string> got;
    for (const auto& s : index.filter(u, dq)) got.push_back(s.id);
    if (got != oracle_filter(all, u, dq)) note("filter round " + std::to_string(q));

    std::vector<std::string> pool;
    for (int k = 0, n = fz.pick(120); k < n; ++k) pool.push_back(ids[fz.pick(static_cast<int>(ids.size()))]);
    if (fz.pick(10) == 0) pool.push_back("sim-999999");
    BrushSpec spec = fz.brush_spec();
    if (index.brush(u, pool, spec) != oracle_brush(all, u, pool, spec)) note("brush round " + std::to_string(q));
    rep.queries += 2;
  }
  return rep;
}

}  // namespace vtank::testkit
