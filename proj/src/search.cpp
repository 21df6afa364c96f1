#include "vtank/search.hpp"

#include <algorithm>
#include <cctype>

#include "vtank/error.hpp"

namespace vtank {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::set<std::string> trigrams_of(const std::string& lowered) {
  std::set<std::string> out;
  for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) out.insert(lowered.substr(i, 3));
  return out;
}

void check_coordinate(const std::string& c) {
  const auto& u = coordinate_universe();
  if (std::find(u.begin(), u.end(), c) == u.end()) fail(Errc::UnknownCoordinate, "unknown coordinate '" + c + "'");
}

}  // namespace

const std::vector<std::string>& coordinate_universe() {
  static const std::vector<std::string> u = {"velocity", "mass",   "trim_angle", "total_drag",      "wsa",
                                             "p_max",    "p_min",  "max_wave_height", "final_trim", "final_sink"};
  return u;
}

std::optional<double> coordinate_value(const SimulationRecord& sim, const std::string& coordinate) {
  check_coordinate(coordinate);
  if (coordinate == "velocity") return sim.params.velocity;
  if (coordinate == "mass") return sim.params.mass;
  if (coordinate == "trim_angle") return sim.params.trim_angle;
  auto it = sim.summary.find(coordinate);
  if (it == sim.summary.end()) return std::nullopt;
  return it->second;
}

SearchIndex::SearchIndex(Catalogue& catalogue) : cat_(catalogue) {
  cat_.on_simulation_changed([this](const SimulationRecord& s) { upsert(s); });
  rebuild();
}

void SearchIndex::rebuild() {
  auto all = cat_.all_simulations();
  {
    std::lock_guard lock(mu_);
    records_.clear();
    trigrams_.clear();
    by_status_.clear();
    columns_.clear();
  }
  for (const auto& s : all) upsert(s);
}

void SearchIndex::erase_locked(const std::string& id) {
  auto it = records_.find(id);
  if (it == records_.end()) return;
  const SimulationRecord& s = it->second;
  for (const auto& t : trigrams_of(lower(s.name))) {
    auto p = trigrams_.find(t);
    p->second.erase(id);
    if (p->second.empty()) trigrams_.erase(p);
  }
  by_status_[s.status()].erase(id);
  for (const auto& c : coordinate_universe()) {
    auto v = coordinate_value(s, c);
    if (!v) continue;
    auto& col = columns_[c];
    auto [lo, hi] = col.equal_range(*v);
    for (auto e = lo; e != hi; ++e) {
      if (e->second == id) {
        col.erase(e);
        break;
      }
    }
  }
  records_.erase(it);
}

void SearchIndex::upsert(const SimulationRecord& s) {
  std::lock_guard lock(mu_);
  erase_locked(s.id);
  records_[s.id] = s;
  for (const auto& t : trigrams_of(lower(s.name))) trigrams_[t].insert(s.id);
  by_status_[s.status()].insert(s.id);
  for (const auto& c : coordinate_universe()) {
    if (auto v = coordinate_value(s, c)) columns_[c].emplace(*v, s.id);
  }
}

std::size_t SearchIndex::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::set<std::string> SearchIndex::name_candidates_locked(const std::string& needle) const {
  std::set<std::string> out;
  bool first = true;
  for (const auto& t : trigrams_of(needle)) {
    auto it = trigrams_.find(t);
    if (it == trigrams_.end()) return {};
    if (first) {
      out = it->second;
      first = false;
    } else {
      std::set<std::string> both;
      std::set_intersection(out.begin(), out.end(), it->second.begin(), it->second.end(),
                            std::inserter(both, both.end()));
      out.swap(both);
    }
    if (out.empty()) break;
  }
  return out;
}

std::vector<SimulationRecord> SearchIndex::filter(const User& user, const DashboardQuery& q) const {
  if (q.limit == 0) fail(Errc::Validation, "limit: must be > 0");
  std::lock_guard lock(mu_);

  std::set<SimStatus> wanted;
  if (q.statuses) {
    wanted = *q.statuses;
  } else {
    wanted = {SimStatus::Created, SimStatus::Running, SimStatus::Completed, SimStatus::Error};
  }
  std::set<std::string> ids;
  for (SimStatus st : wanted) {
    auto it = by_status_.find(st);
    if (it != by_status_.end()) ids.insert(it->second.begin(), it->second.end());
  }

  std::string needle = q.name_substring ? lower(*q.name_substring) : std::string();
  if (needle.size() >= 3) {
    auto named = name_candidates_locked(needle);
    std::set<std::string> both;
    std::set_intersection(ids.begin(), ids.end(), named.begin(), named.end(), std::inserter(both, both.end()));
    ids.swap(both);
  }

  std::vector<const SimulationRecord*> hits;
  for (const auto& id : ids) {
    const SimulationRecord& s = records_.at(id);
    if (!cat_.can_see(user, s)) continue;
    if (q.org_id && s.owner_org_id != *q.org_id) continue;
    if (!needle.empty() && lower(s.name).find(needle) == std::string::npos) continue;
    hits.push_back(&s);
  }
  std::sort(hits.begin(), hits.end(), [](const SimulationRecord* a, const SimulationRecord* b) {
    if (a->created_at != b->created_at) return a->created_at > b->created_at;
    return a->id < b->id;
  });

  std::vector<SimulationRecord> out;
  for (std::size_t i = q.offset; i < hits.size() && out.size() < q.limit; ++i) out.push_back(*hits[i]);
  return out;
}

std::vector<std::string> SearchIndex::brush(const User& user, const std::vector<std::string>& sim_ids,
                                            const BrushSpec& spec) const {
  for (const auto& [c, iv] : spec.intervals) {
    check_coordinate(c);
    if (!(iv.first <= iv.second)) fail(Errc::Validation, "interval for " + c + ": lo must be <= hi");
  }
  std::lock_guard lock(mu_);

  std::optional<std::set<std::string>> survivors;
  for (const auto& [c, iv] : spec.intervals) {
    std::set<std::string> in;
    auto col = columns_.find(c);
    if (col != columns_.end()) {
      for (auto it = col->second.lower_bound(iv.first); it != col->second.end() && it->first <= iv.second; ++it) {
        if (!survivors || survivors->count(it->second)) in.insert(it->second);
      }
    }
    survivors = std::move(in);
  }

  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& id : sim_ids) {
    auto it = records_.find(id);
    if (it == records_.end() || !cat_.can_see(user, it->second)) continue;
    if (survivors && !survivors->count(id)) continue;
    if (seen.insert(id).second) out.push_back(id);
  }
  return out;
}

std::vector<SeriesPoint> SearchIndex::compare_series(const User& user, const std::vector<std::string>& sim_ids,
                                                     const std::string& x_coord, const std::string& y_coord) const {
  check_coordinate(x_coord);
  check_coordinate(y_coord);
  std::lock_guard lock(mu_);
  std::vector<SeriesPoint> out;
  std::set<std::string> seen;
  for (const auto& id : sim_ids) {
    auto it = records_.find(id);
    if (it == records_.end() || !cat_.can_see(user, it->second) || !seen.insert(id).second) continue;
    auto x = coordinate_value(it->second, x_coord);
    auto y = coordinate_value(it->second, y_coord);
    if (x && y) out.push_back({id, *x, *y});
  }
  std::sort(out.begin(), out.end(), [](const SeriesPoint& a, const SeriesPoint& b) {
    if (a.x != b.x) return a.x < b.x;
    return a.sim_id < b.sim_id;
  });
  return out;
}

}  // namespace vtank
