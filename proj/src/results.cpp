#include "vtank/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "vtank/digest.hpp"
#include "vtank/error.hpp"
#include "vtank/io.hpp"
#include "vtank/log.hpp"

namespace vtank {

double ElevationGrid::sample(double px, double py) const {
  if (x.empty() || y.empty()) return 0.0;
  auto locate = [](const std::vector<double>& axis, double v, std::size_t& i, double& f) {
    if (axis.size() == 1 || v <= axis.front()) {
      i = 0;
      f = 0.0;
      return;
    }
    if (v >= axis.back()) {
      i = axis.size() - 2;
      f = 1.0;
      return;
    }
    i = static_cast<std::size_t>(std::upper_bound(axis.begin(), axis.end(), v) - axis.begin()) - 1;
    f = (v - axis[i]) / (axis[i + 1] - axis[i]);
  };
  std::size_t ix, iy;
  double fx, fy;
  locate(x, px, ix, fx);
  locate(y, py, iy, fy);
  const std::size_t ix1 = x.size() > 1 ? ix + 1 : ix;
  const std::size_t iy1 = y.size() > 1 ? iy + 1 : iy;
  const double a = at(ix, iy) * (1.0 - fx) + at(ix1, iy) * fx;
  const double b = at(ix, iy1) * (1.0 - fx) + at(ix1, iy1) * fx;
  return a * (1.0 - fy) + b * fy;
}

namespace results {
namespace {

std::vector<std::string> split(const std::string& line, char sep = ';') {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t p = line.find(sep, start);
    out.push_back(line.substr(start, p == std::string::npos ? std::string::npos : p - start));
    if (p == std::string::npos) return out;
    start = p + 1;
  }
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last) {
    if (s == "nan") return NAN;
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    fail(Errc::MalformedFile, "not a number: '" + s + "'");
  }
  return v;
}

/// Rows of a ;-separated file with a fixed header.
std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path, const std::string& header) {
  auto lines = lines_of(read_file(path));
  if (lines.empty() || lines.front() != header) {
    fail(Errc::MalformedFile, path.filename().string() + ": expected header '" + header + "'");
  }
  std::vector<std::vector<std::string>> rows;
  const std::size_t columns = split(header).size();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    rows.push_back(split(lines[i]));
    if (rows.back().size() != columns) {
      fail(Errc::MalformedFile, path.filename().string() + ": line " + std::to_string(i + 1) + " has " +
                                    std::to_string(rows.back().size()) + " fields");
    }
  }
  return rows;
}

std::string join(std::initializer_list<std::string> cells) {
  std::string out;
  for (const auto& c : cells) {
    if (!out.empty()) out += ';';
    out += c;
  }
  out += '\n';
  return out;
}

/// Limit of the last three samples by Aitken extrapolation; falls back to the
/// last sample when the sequence is not geometric enough to extrapolate.
double asymptote(const std::vector<TimeSample>& s) {
  const double last = s.back().value;
  if (s.size() < 3) return last;
  const double x0 = s[s.size() - 3].value, x1 = s[s.size() - 2].value, x2 = last;
  const double d = x2 - 2.0 * x1 + x0;
  if (d == 0.0) return last;
  const double limit = x2 - (x2 - x1) * (x2 - x1) / d;
  if (!std::isfinite(limit) || std::abs(limit - last) > kConsistencyTolerance * std::abs(last)) return last;
  return limit;
}

}  // namespace

KpiSummary extract_kpis(const SolveOutput& out) {
  const auto& placed = out.placed_mesh;
  if (out.force_series.samples.empty()) fail(Errc::InconsistentResults, "force series is empty");
  if (out.pressure.values.size() != placed.triangles.size() || out.wetted_mask.size() != placed.triangles.size()) {
    fail(Errc::InconsistentResults, "field sizes do not match the triangle count");
  }
  const double last = out.force_series.samples.back().value;
  if (std::abs(last - out.total_drag) > kConsistencyTolerance * std::abs(out.total_drag)) {
    fail(Errc::InconsistentResults, "force series ends at " + format_double(last) + " N but the solver reports " +
                                        format_double(out.total_drag) + " N");
  }

  KpiSummary k;
  k.total_drag = asymptote(out.force_series.samples);
  bool any = false;
  for (std::size_t t = 0; t < placed.triangles.size(); ++t) {
    const double w = out.wetted_mask[t];
    if (!(w > 0.0)) continue;
    k.wsa += w * mesh::triangle_area(placed, t);
    const double p = out.pressure.values[t];
    k.p_max = any ? std::max(k.p_max, p) : p;
    k.p_min = any ? std::min(k.p_min, p) : p;
    any = true;
  }
  bool on_hull = false;
  for (const auto& line : out.waterline) {
    for (const Vec3& p : line.points) {
      const double h = out.elevation.sample(p.x, p.y) - out.water_z;
      k.max_wave_height_on_hull = on_hull ? std::max(k.max_wave_height_on_hull, h) : h;
      on_hull = true;
    }
  }
  k.final_sink = out.equilibrium.sink;
  k.final_trim = out.equilibrium.trim;
  return k;
}

std::vector<double> default_slice_offsets(const mesh::TriangleMesh& placed) {
  const mesh::BoundingBox b = mesh::bounding_box(placed);
  const double c = b.center().y, q = 0.25 * b.extent().y;
  return {c - q, c, c + q};
}

std::vector<SliceCurve> pressure_slices(const mesh::TriangleMesh& placed, const ScalarFieldOnMesh& field,
                                        const std::vector<double>& offsets, const std::vector<double>* mask) {
  std::vector<SliceCurve> curves;
  for (double offset : offsets) {
    SliceCurve curve;
    curve.axis = 1;
    curve.offset = offset;
    std::vector<SlicePoint> pts;
    for (std::size_t t = 0; t < placed.triangles.size(); ++t) {
      if (mask && !((*mask)[t] > 0.0)) continue;
      const auto& tri = placed.triangles[t];
      Vec3 v[3];
      double d[3];
      for (int i = 0; i < 3; ++i) {
        v[i] = placed.vertices[tri[i]];
        d[i] = v[i].y - offset;
      }
      if (d[0] == 0.0 && d[1] == 0.0 && d[2] == 0.0) continue;  // in-plane
      std::vector<Vec3> hits;
      for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        if (d[i] == 0.0) hits.push_back(v[i]);
        if ((d[i] < 0.0 && d[j] > 0.0) || (d[i] > 0.0 && d[j] < 0.0)) {
          hits.push_back(v[i] + (v[j] - v[i]) * (d[i] / (d[i] - d[j])));
        }
      }
      if (hits.size() != 2) continue;  // touches at one vertex
      for (const Vec3& h : hits) pts.push_back({0.0, h.x, h.z, field.values[t]});
    }
    if (pts.empty()) {
      log_warn("EMPTY_SLICE: plane y=" + format_double(offset) + " misses the hull");
    }
    std::stable_sort(pts.begin(), pts.end(), [](const SlicePoint& a, const SlicePoint& b) {
      return a.x != b.x ? a.x < b.x : a.z < b.z;
    });
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) s += std::hypot(pts[i].x - pts[i - 1].x, pts[i].z - pts[i - 1].z);
      pts[i].s = s;
    }
    curve.points = std::move(pts);
    curves.push_back(std::move(curve));
  }
  return curves;
}

std::string slice_file_name(double offset) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "slice_%.6g.csv", offset == 0.0 ? 0.0 : offset);
  return buf;
}

ResultSet make_result_set(const SolveOutput& out, const PhysicalParameters& params) {
  ResultSet r;
  const KpiSummary& k = out.kpis;
  r.summary = {
      {"velocity", params.velocity, "m/s"},
      {"mass", params.mass, "kg"},
      {"trim_angle", params.trim_angle, "deg"},
      {"water_z", params.water_z, "m"},
      {"water_temperature", params.water_temperature, "degC"},
      {"total_drag", k.total_drag, "N"},
      {"wsa", k.wsa, "m2"},
      {"p_max", k.p_max, "Pa"},
      {"p_min", k.p_min, "Pa"},
      {"max_wave_height", k.max_wave_height_on_hull, "m"},
      {"final_sink", k.final_sink, "m"},
      {"final_trim", k.final_trim, "deg"},
      {"lwl", out.lwl, "m"},
      {"reynolds", out.reynolds, "-"},
      {"friction_coefficient", out.friction_coefficient, "-"},
      {"rho", out.rho, "kg/m3"},
  };
  r.forces = out.force_series;
  r.sink = out.sink_series;
  r.trim = out.trim_series;
  r.waterline = out.waterline;
  r.slices = pressure_slices(out.placed_mesh, out.pressure, default_slice_offsets(out.placed_mesh), &out.wetted_mask);
  return r;
}

std::vector<SummaryRow> parse_summary(const std::string& text) {
  auto lines = lines_of(text);
  if (lines.empty() || lines.front() != "name;value;unit") fail(Errc::MalformedFile, "summary.csv: bad header");
  std::vector<SummaryRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cells = split(lines[i]);
    if (cells.size() != 3) fail(Errc::MalformedFile, "summary.csv: line " + std::to_string(i + 1));
    rows.push_back({cells[0], to_double(cells[1]), cells[2]});
  }
  return rows;
}

std::optional<double> find_value(const std::vector<SummaryRow>& rows, const std::string& name) {
  for (const auto& r : rows) {
    if (r.name == name) return r.value;
  }
  return std::nullopt;
}

KpiSummary kpis_from_summary(const std::vector<SummaryRow>& rows) {
  auto need = [&](const char* name) {
    auto v = find_value(rows, name);
    if (!v) fail(Errc::MissingArtifact, std::string("summary.csv lacks ") + name);
    return *v;
  };
  KpiSummary k;
  k.total_drag = need("total_drag");
  k.wsa = need("wsa");
  k.p_max = need("p_max");
  k.p_min = need("p_min");
  k.max_wave_height_on_hull = need("max_wave_height");
  k.final_sink = need("final_sink");
  k.final_trim = need("final_trim");
  return k;
}

void write_results_csv(const ResultSet& set, const std::filesystem::path& dir) {
  std::string summary = "name;value;unit\n";
  for (const auto& row : set.summary) summary += join({row.name, format_double(row.value), row.unit});
  write_file(dir / "summary.csv", summary);

  std::string forces = "t;" + set.forces.name + "\n";
  for (const auto& s : set.forces.samples) forces += join({format_double(s.t), format_double(s.value)});
  write_file(dir / "forces.csv", forces);

  if (set.sink.samples.size() != set.trim.samples.size()) {
    fail(Errc::InconsistentResults, "sink and trim series differ in length");
  }
  std::string motion = "t;sink;trim\n";
  for (std::size_t i = 0; i < set.sink.samples.size(); ++i) {
    motion += join({format_double(set.sink.samples[i].t), format_double(set.sink.samples[i].value),
                    format_double(set.trim.samples[i].value)});
  }
  write_file(dir / "motion.csv", motion);

  std::string waterline = "contour;closed;x;y;z\n";
  for (std::size_t c = 0; c < set.waterline.size(); ++c) {
    for (const Vec3& p : set.waterline[c].points) {
      waterline += join({std::to_string(c), set.waterline[c].closed ? "1" : "0", format_double(p.x),
                         format_double(p.y), format_double(p.z)});
    }
  }
  write_file(dir / "waterline.csv", waterline);

  for (const auto& curve : set.slices) {
    std::string text = "s;x;z;p\n";
    for (const auto& p : curve.points) {
      text += join({format_double(p.s), format_double(p.x), format_double(p.z), format_double(p.value)});
    }
    write_file(dir / slice_file_name(curve.offset), text);
  }
}

ResultSet read_results_csv(const std::filesystem::path& dir) {
  ResultSet set;
  set.summary = parse_summary(read_file(dir / "summary.csv"));

  set.forces.name = "total_drag";
  set.forces.unit = "N";
  for (const auto& row : read_table(dir / "forces.csv", "t;total_drag")) {
    set.forces.samples.push_back({to_double(row[0]), to_double(row[1])});
  }
  set.sink = {"sink", "m", {}};
  set.trim = {"trim", "deg", {}};
  for (const auto& row : read_table(dir / "motion.csv", "t;sink;trim")) {
    const double t = to_double(row[0]);
    set.sink.samples.push_back({t, to_double(row[1])});
    set.trim.samples.push_back({t, to_double(row[2])});
  }
  std::map<std::size_t, mesh::Polyline> contours;
  for (const auto& row : read_table(dir / "waterline.csv", "contour;closed;x;y;z")) {
    auto& line = contours[std::stoul(row[0])];
    line.closed = row[1] == "1";
    line.points.push_back({to_double(row[2]), to_double(row[3]), to_double(row[4])});
  }
  for (auto& [_, line] : contours) set.waterline.push_back(std::move(line));

  std::vector<std::pair<double, std::filesystem::path>> slices;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("slice_", 0) == 0 && entry.path().extension() == ".csv") {
      slices.emplace_back(to_double(name.substr(6, name.size() - 10)), entry.path());
    }
  }
  std::sort(slices.begin(), slices.end());
  for (const auto& [offset, path] : slices) {
    SliceCurve curve;
    curve.offset = offset;
    for (const auto& row : read_table(path, "s;x;z;p")) {
      curve.points.push_back({to_double(row[0]), to_double(row[1]), to_double(row[2]), to_double(row[3])});
    }
    set.slices.push_back(std::move(curve));
  }
  return set;
}

std::string to_vtk(const mesh::TriangleMesh& placed, const ScalarFieldOnMesh& field) {
  std::string out = "# vtk DataFile Version 3.0\nvtank " + field.name + " [" + field.unit +
                    "]\nASCII\nDATASET POLYDATA\n";
  out += "POINTS " + std::to_string(placed.vertices.size()) + " double\n";
  for (const Vec3& v : placed.vertices) {
    out += format_double(v.x) + ' ' + format_double(v.y) + ' ' + format_double(v.z) + '\n';
  }
  const std::size_t n = placed.triangles.size();
  out += "POLYGONS " + std::to_string(n) + ' ' + std::to_string(4 * n) + '\n';
  for (const auto& t : placed.triangles) {
    out += "3 " + std::to_string(t[0]) + ' ' + std::to_string(t[1]) + ' ' + std::to_string(t[2]) + '\n';
  }
  out += "CELL_DATA " + std::to_string(n) + "\nSCALARS " + field.name + " double 1\nLOOKUP_TABLE default\n";
  for (double v : field.values) out += format_double(v) + '\n';
  return out;
}

void parse_vtk(const std::string& text, mesh::TriangleMesh& placed, ScalarFieldOnMesh& field) {
  std::istringstream in(text);
  std::string line;
  auto bad = [](const std::string& why) { fail(Errc::MalformedFile, "pressure.vtk: " + why); };
  if (!std::getline(in, line) || line.rfind("# vtk DataFile", 0) != 0) bad("missing header");
  std::string title;
  std::getline(in, title);
  field.unit.clear();
  if (auto lb = title.find('['), rb = title.rfind(']'); lb != std::string::npos && rb > lb) {
    field.unit = title.substr(lb + 1, rb - lb - 1);
  }
  std::string word;
  in >> word;
  if (word != "ASCII") bad("not ASCII");
  in >> word >> word;
  if (word != "POLYDATA") bad("not POLYDATA");
  std::size_t n = 0;
  in >> word >> n >> word;
  if (word != "double" && word != "float") bad("bad POINTS");
  placed = {};
  placed.vertices.resize(n);
  auto number = [&]() {
    std::string tok;
    if (!(in >> tok)) bad("truncated");
    return to_double(tok);
  };
  for (auto& v : placed.vertices) {
    v.x = number();
    v.y = number();
    v.z = number();
  }
  std::size_t nt = 0, total = 0;
  in >> word >> nt >> total;
  if (word != "POLYGONS" || total != 4 * nt) bad("only triangle POLYGONS supported");
  placed.triangles.resize(nt);
  for (auto& t : placed.triangles) {
    unsigned k = 0;
    in >> k >> t[0] >> t[1] >> t[2];
    if (!in || k != 3 || t[0] >= n || t[1] >= n || t[2] >= n) bad("bad polygon");
  }
  std::size_t nc = 0;
  in >> word >> nc;
  if (word != "CELL_DATA" || nc != nt) bad("CELL_DATA count mismatch");
  in >> word >> field.name >> word;
  std::string comps;
  in >> comps >> word >> word;  // LOOKUP_TABLE default
  field.values.resize(nc);
  for (double& v : field.values) v = number();
}

void write_fields(const SolveOutput& out, const std::filesystem::path& dir) {
  write_file(dir / "pressure.vtk", to_vtk(out.placed_mesh, out.pressure));

  std::string wetted = "triangle;fraction\n";
  for (std::size_t t = 0; t < out.wetted_mask.size(); ++t) {
    wetted += join({std::to_string(t), format_double(out.wetted_mask[t])});
  }
  write_file(dir / "wetted.csv", wetted);

  std::string elevation = "x;y;z\n";
  for (std::size_t iy = 0; iy < out.elevation.y.size(); ++iy) {
    for (std::size_t ix = 0; ix < out.elevation.x.size(); ++ix) {
      elevation += join({format_double(out.elevation.x[ix]), format_double(out.elevation.y[iy]),
                         format_double(out.elevation.at(ix, iy))});
    }
  }
  write_file(dir / "elevation.csv", elevation);

  std::string series = "t;total_drag;sink;trim\n";
  for (std::size_t i = 0; i < out.force_series.samples.size(); ++i) {
    series += join({format_double(out.force_series.samples[i].t), format_double(out.force_series.samples[i].value),
                    format_double(out.sink_series.samples.at(i).value),
                    format_double(out.trim_series.samples.at(i).value)});
  }
  write_file(dir / "series.csv", series);

  const auto& eq = out.equilibrium;
  nlohmann::json solution = {
      {"water_z", out.water_z},
      {"velocity", out.velocity},
      {"rho", out.rho},
      {"lwl", out.lwl},
      {"reynolds", out.reynolds},
      {"friction_coefficient", out.friction_coefficient},
      {"total_drag", out.total_drag},
      {"equilibrium",
       {{"sink", eq.sink},
        {"trim", eq.trim},
        {"converged", eq.converged},
        {"iterations", eq.iterations},
        {"residual_force", eq.residual_force},
        {"residual_moment", eq.residual_moment}}},
  };
  write_file(dir / "solution.json", solution.dump(2) + "\n");
}

SolveOutput read_fields(const std::filesystem::path& dir) {
  SolveOutput out;
  for (const char* f : {"pressure.vtk", "wetted.csv", "elevation.csv", "series.csv", "solution.json"}) {
    if (!std::filesystem::exists(dir / f)) fail(Errc::MissingArtifact, std::string("fields/") + f + " not found");
  }
  parse_vtk(read_file(dir / "pressure.vtk"), out.placed_mesh, out.pressure);

  auto wetted = read_table(dir / "wetted.csv", "triangle;fraction");
  out.wetted_mask.reserve(wetted.size());
  for (const auto& row : wetted) out.wetted_mask.push_back(to_double(row[1]));

  for (const auto& row : read_table(dir / "elevation.csv", "x;y;z")) {
    const double x = to_double(row[0]), y = to_double(row[1]);
    if (out.elevation.y.empty() || out.elevation.y.back() != y) out.elevation.y.push_back(y);
    if (out.elevation.y.size() == 1) out.elevation.x.push_back(x);
    out.elevation.z.push_back(to_double(row[2]));
  }
  if (out.elevation.z.size() != out.elevation.x.size() * out.elevation.y.size()) {
    fail(Errc::MalformedFile, "elevation.csv is not a rectangular grid");
  }

  out.force_series = {"total_drag", "N", {}};
  out.sink_series = {"sink", "m", {}};
  out.trim_series = {"trim", "deg", {}};
  for (const auto& row : read_table(dir / "series.csv", "t;total_drag;sink;trim")) {
    const double t = to_double(row[0]);
    out.force_series.samples.push_back({t, to_double(row[1])});
    out.sink_series.samples.push_back({t, to_double(row[2])});
    out.trim_series.samples.push_back({t, to_double(row[3])});
  }

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(dir / "solution.json"));
    out.water_z = j.at("water_z").get<double>();
    out.velocity = j.at("velocity").get<double>();
    out.rho = j.at("rho").get<double>();
    out.lwl = j.at("lwl").get<double>();
    out.reynolds = j.at("reynolds").get<double>();
    out.friction_coefficient = j.at("friction_coefficient").get<double>();
    out.total_drag = j.at("total_drag").get<double>();
    const auto& e = j.at("equilibrium");
    out.equilibrium.sink = e.at("sink").get<double>();
    out.equilibrium.trim = e.at("trim").get<double>();
    out.equilibrium.converged = e.at("converged").get<bool>();
    out.equilibrium.iterations = e.at("iterations").get<int>();
    out.equilibrium.residual_force = e.at("residual_force").get<double>();
    out.equilibrium.residual_moment = e.at("residual_moment").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::MalformedFile, std::string("solution.json: ") + ex.what());
  }

  if (!out.placed_mesh.triangles.empty()) {
    out.waterline =
        mesh::clip_below_plane(out.placed_mesh, out.water_z, {}, mesh::ClipCheck::Trusted).waterline_contour;
  }
  out.kpis = extract_kpis(out);
  return out;
}

const std::vector<std::string>& required_artifacts() {
  static const std::vector<std::string> files = {
      "results/summary.csv", "results/forces.csv",  "results/motion.csv",
      "results/waterline.csv", "fields/pressure.vtk", "fields/elevation.csv",
  };
  return files;
}

std::string package_results(const std::filesystem::path& workdir) {
  std::vector<std::string> files = required_artifacts();
  for (const auto& f : files) {
    if (!std::filesystem::is_regular_file(workdir / f)) fail(Errc::MissingArtifact, f + " not found");
  }
  std::vector<std::string> slices;
  for (const auto& entry : std::filesystem::directory_iterator(workdir / "results")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("slice_", 0) == 0) slices.push_back("results/" + name);
  }
  std::sort(slices.begin(), slices.end());
  files.insert(files.end(), slices.begin(), slices.end());

  nlohmann::json list = nlohmann::json::array();
  for (const auto& f : files) {
    const std::string data = read_file(workdir / f);
    nlohmann::json entry = {{"path", f}, {"sha256", sha256_hex(data)}, {"bytes", data.size()}};
    list.push_back(std::move(entry));
  }
  const std::string manifest = nlohmann::json{{"files", list}}.dump(2) + "\n";
  write_file(workdir / "results" / "manifest.json", manifest);
  return sha256_hex(manifest);
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  std::vector<ManifestEntry> out;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& f : doc.at("files")) {
      out.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                     f.at("bytes").get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::MalformedFile, std::string("manifest.json: ") + ex.what());
  }
  return out;
}

void verify_manifest(const std::filesystem::path& workdir) {
  const auto path = workdir / "results" / "manifest.json";
  if (!std::filesystem::exists(path)) fail(Errc::MissingArtifact, "results/manifest.json not found");
  for (const auto& e : parse_manifest(read_file(path))) {
    if (!std::filesystem::exists(workdir / e.path)) fail(Errc::MissingArtifact, e.path + " not found");
    const std::string data = read_file(workdir / e.path);
    if (data.size() != e.bytes || sha256_hex(data) != e.sha256) {
      fail(Errc::Integrity, e.path + " does not match its manifest digest");
    }
  }
}

}  // namespace results
}  // namespace vtank
