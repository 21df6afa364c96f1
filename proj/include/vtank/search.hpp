#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vtank/catalogue.hpp"

namespace vtank {

struct DashboardQuery {
  std::optional<std::string> name_substring;
  std::optional<std::set<SimStatus>> statuses;  // Deleted excluded unless listed
  std::optional<std::string> org_id;
  std::size_t limit = 100;
  std::size_t offset = 0;
};

/// Closed intervals per coordinate.
struct BrushSpec {
  std::map<std::string, std::pair<double, double>> intervals;
};

struct SeriesPoint {
  std::string sim_id;
  double x = 0.0;
  double y = 0.0;
};

/// Brushable coordinates: the three sweepable inputs plus the KPIs.
const std::vector<std::string>& coordinate_universe();
/// Value of a coordinate for a record, nullopt when it has none (e.g. a
/// KPI of a simulation that never completed). Throws UnknownCoordinate.
std::optional<double> coordinate_value(const SimulationRecord& sim, const std::string& coordinate);

/// In-memory mirror of the simulation records kept current through the
/// catalogue's change listener: trigram postings on lowercase names,
/// per-status id sets and one sorted column per coordinate.
class SearchIndex {
 public:
  explicit SearchIndex(Catalogue& catalogue);

  void upsert(const SimulationRecord& sim);
  /// Drops everything and reloads from the store.
  void rebuild();

  std::vector<SimulationRecord> filter(const User& user, const DashboardQuery& query) const;
  std::vector<std::string> brush(const User& user, const std::vector<std::string>& sim_ids,
                                 const BrushSpec& spec) const;
  std::vector<SeriesPoint> compare_series(const User& user, const std::vector<std::string>& sim_ids,
                                          const std::string& x_coord, const std::string& y_coord) const;

  std::size_t size() const;

 private:
  void erase_locked(const std::string& id);
  std::set<std::string> name_candidates_locked(const std::string& needle) const;

  Catalogue& cat_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, SimulationRecord> records_;
  std::unordered_map<std::string, std::set<std::string>> trigrams_;
  std::map<SimStatus, std::set<std::string>> by_status_;
  std::map<std::string, std::multimap<double, std::string>> columns_;
};

}  // namespace vtank
