#pragma once

#include <string>
#include <vector>

#include "vtank/catalogue.hpp"
#include "vtank/parameters.hpp"
#include "vtank/search.hpp"

namespace vtank {

/// One swept parameter over an inclusive linspace of `count` points.
struct RangeSpec {
  ScalarParameter parameter = ScalarParameter::Velocity;
  double lo = 0.0;
  double hi = 0.0;
  int count = 2;
};

RangeSpec range_spec_from_json(const Json& j);  // Error(Validation)

/// Sweep values, with the endpoints exact.
std::vector<double> range_values(const RangeSpec& spec);

/// Turns a Created simulation into a family header and creates its
/// children `<name>_r001`..., all or none. The header never runs; the
/// children are ordinary Created simulations.
std::vector<SimulationRecord> expand_range(Catalogue& cat, const User& user, const std::string& base_id,
                                           const RangeSpec& spec);

/// Children of a header (deleted ones included), ordered by name.
std::vector<SimulationRecord> family_children(const Catalogue& cat, const std::string& parent_id);

/// Error if any child failed, else Running while any has not finished,
/// else Completed. Deleted children do not count; a family with none left
/// is Deleted.
SimStatus family_status(const std::vector<SimulationRecord>& children);

/// (swept value, y) per child, ascending in the swept value. Throws
/// IncompleteFamily naming the children that are not Completed.
std::vector<SeriesPoint> family_series(const Catalogue& cat, const User& user, const std::string& parent_id,
                                       const std::string& y_coord);

}  // namespace vtank
