#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vtank/fields.hpp"
#include "vtank/parameters.hpp"

namespace vtank::results {

/// Series-vs-scalar tolerance for the drag cross-check.
inline constexpr double kConsistencyTolerance = 0.01;

/// Throws Error(InconsistentResults) when the force series does not end
/// within 1% of the solver's drag.
KpiSummary extract_kpis(const SolveOutput& out);

/// Centreline plus and minus a quarter beam, ascending.
std::vector<double> default_slice_offsets(const mesh::TriangleMesh& placed);

/// Cuts the placed hull with planes y = offset. With a mask, only triangles
/// with a positive wetted fraction contribute. A plane that misses yields an
/// empty curve and a warning.
std::vector<SliceCurve> pressure_slices(const mesh::TriangleMesh& placed, const ScalarFieldOnMesh& field,
                                        const std::vector<double>& offsets,
                                        const std::vector<double>* mask = nullptr);

std::string slice_file_name(double offset);

struct SummaryRow {
  std::string name;
  double value = 0.0;
  std::string unit;
  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct ResultSet {
  std::vector<SummaryRow> summary;
  TimeSeries forces;
  TimeSeries sink;
  TimeSeries trim;
  std::vector<mesh::Polyline> waterline;
  std::vector<SliceCurve> slices;
};

ResultSet make_result_set(const SolveOutput& out, const PhysicalParameters& params);

std::vector<SummaryRow> parse_summary(const std::string& text);
std::optional<double> find_value(const std::vector<SummaryRow>& rows, const std::string& name);
KpiSummary kpis_from_summary(const std::vector<SummaryRow>& rows);

/// summary.csv, forces.csv, motion.csv, waterline.csv and one
/// slice_<offset>.csv per curve.
void write_results_csv(const ResultSet& set, const std::filesystem::path& dir);
ResultSet read_results_csv(const std::filesystem::path& dir);

/// Raw solver fields: pressure.vtk, wetted.csv, elevation.csv, series.csv,
/// solution.json.
void write_fields(const SolveOutput& out, const std::filesystem::path& dir);
/// Rebuilds the solver output (waterline recomputed, KPIs re-extracted).
SolveOutput read_fields(const std::filesystem::path& dir);

std::string to_vtk(const mesh::TriangleMesh& placed, const ScalarFieldOnMesh& field);
void parse_vtk(const std::string& text, mesh::TriangleMesh& placed, ScalarFieldOnMesh& field);

struct ManifestEntry {
  std::string path;  // relative to the sim workdir
  std::string sha256;
  std::uint64_t bytes = 0;
};

/// Writes results/manifest.json and returns its sha256, which serves as the
/// results reference. Throws Error(MissingArtifact).
std::string package_results(const std::filesystem::path& workdir);
std::vector<ManifestEntry> parse_manifest(const std::string& text);
/// Throws Error(Integrity) or Error(MissingArtifact).
void verify_manifest(const std::filesystem::path& workdir);

/// Files every complete bundle carries besides the slices.
const std::vector<std::string>& required_artifacts();

}  // namespace vtank::results
