#include "vtank/simsetup.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "vtank/error.hpp"
#include "vtank/io.hpp"
#include "vtank/results.hpp"

namespace vtank::simsetup {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kMaxBisections = 200;
constexpr double kForceTolerance = 1e-6;   // fraction of m g
constexpr double kMomentTolerance = 1e-6;  // fraction of m g lwl
constexpr double kSinkWidthTolerance = 1e-12;  // fraction of bbox diagonal
constexpr double kTrimWidthTolerance = 1e-12;  // degrees

struct FluidRow {
  double celsius;
  double rho;
  double nu_e6;
};

// Fresh water. 0-40 degC: ITTC fresh water table; 45-100 degC: standard
// property tables. The 4 degC row pins the density maximum.
constexpr std::array<FluidRow, 22> kFreshWater{{
    {0.0, 999.843, 1.7920},  {4.0, 999.975, 1.5674},  {5.0, 999.967, 1.5182},
    {10.0, 999.702, 1.3063}, {15.0, 999.103, 1.1386}, {20.0, 998.207, 1.0034},
    {25.0, 997.048, 0.8926}, {30.0, 995.650, 0.8007}, {35.0, 994.035, 0.7238},
    {40.0, 992.219, 0.6585}, {45.0, 990.216, 0.6019}, {50.0, 988.039, 0.5534},
    {55.0, 985.699, 0.5113}, {60.0, 983.202, 0.4745}, {65.0, 980.557, 0.4421},
    {70.0, 977.773, 0.4134}, {75.0, 974.853, 0.3881}, {80.0, 971.801, 0.3651},
    {85.0, 968.620, 0.3448}, {90.0, 965.314, 0.3263}, {95.0, 961.885, 0.3096},
    {100.0, 958.366, 0.2945},
}};

double x_extent(const std::vector<mesh::WettedPiece>& pieces, double& x_min, double& x_max) {
  x_min = INFINITY;
  x_max = -INFINITY;
  for (const auto& piece : pieces) {
    for (const Vec3& p : piece.polygon) {
      x_min = std::min(x_min, p.x);
      x_max = std::max(x_max, p.x);
    }
  }
  return pieces.empty() ? 0.0 : x_max - x_min;
}

mesh::BoundingBox placed_box(const Hull& hull, const mesh::Attitude& att) {
  mesh::BoundingBox b{mesh::apply(att, hull.mesh().vertices.front()), mesh::apply(att, hull.mesh().vertices.front())};
  for (const Vec3& v : hull.mesh().vertices) {
    Vec3 p = mesh::apply(att, v);
    for (int a = 0; a < 3; ++a) {
      b.min[a] = std::min(b.min[a], p[a]);
      b.max[a] = std::max(b.max[a], p[a]);
    }
  }
  return b;
}

double waterline_length(const Hull& hull, double water_z, const mesh::Attitude& att) {
  auto clip = mesh::clip_below_plane(hull.mesh(), water_z, att, mesh::ClipCheck::Trusted);
  double lo, hi;
  double lwl = x_extent(clip.wetted_triangles, lo, hi);
  return lwl > 0.0 ? lwl : placed_box(hull, att).extent().x;
}

double density_for(const PhysicalParameters& p, std::optional<double> rho) {
  return rho ? *rho : fluid_properties(p.water_temperature).rho;
}

}  // namespace

const char* to_string(DofMode m) noexcept {
  switch (m) {
    case DofMode::Captive0: return "CAPTIVE_0DOF";
    case DofMode::Sink1: return "SINK_1DOF";
    case DofMode::SinkTrim2: return "SINK_TRIM_2DOF";
  }
  return "?";
}

DofMode dof_mode_from_string(const std::string& s) {
  if (s == "CAPTIVE_0DOF" || s == "0") return DofMode::Captive0;
  if (s == "SINK_1DOF" || s == "1") return DofMode::Sink1;
  if (s == "SINK_TRIM_2DOF" || s == "2") return DofMode::SinkTrim2;
  fail(Errc::Validation, "unknown dof mode '" + s + "'");
}

FluidProperties fluid_properties(double celsius) {
  if (!(celsius > 0.0 && celsius < 100.0)) {
    fail(Errc::OutOfRange, "water temperature " + format_double(celsius) + " degC outside (0, 100)");
  }
  auto hi = std::upper_bound(kFreshWater.begin(), kFreshWater.end(), celsius,
                             [](double t, const FluidRow& r) { return t < r.celsius; });
  auto lo = hi - 1;
  const double f = (celsius - lo->celsius) / (hi->celsius - lo->celsius);
  return {lo->rho + f * (hi->rho - lo->rho), (lo->nu_e6 + f * (hi->nu_e6 - lo->nu_e6)) * 1e-6};
}

double friction_coefficient(double reynolds) {
  if (!(reynolds > 1e3)) {
    fail(Errc::Validation, "Reynolds number " + format_double(reynolds) + " too low for the friction line");
  }
  const double d = std::log10(reynolds) - 2.0;
  return 0.075 / (d * d);
}

double total_resistance(double rho, double velocity, double wetted_area, double reynolds) {
  if (velocity == 0.0) return 0.0;
  return 0.5 * rho * velocity * velocity * wetted_area * friction_coefficient(reynolds) * (1.0 + kFormFactor);
}

Hull::Hull(mesh::TriangleMesh m) : mesh_(std::move(m)) {
  mesh::ValidationReport r = mesh::validate_topology(mesh_);
  if (!r.is_valid) {
    fail(Errc::InvalidMesh, "hull is not a single watertight outward volume: " +
                                (r.messages.empty() ? std::string("invalid") : r.messages.front()));
  }
  box_ = mesh::bounding_box(mesh_);
  volume_ = r.signed_volume;
}

DerivedParameters parametrize(const Hull& hull, const PhysicalParameters& params) {
  DerivedParameters d;
  const mesh::Attitude att{0.0, params.trim_angle, params.cog};
  auto clip = mesh::clip_below_plane(hull.mesh(), params.water_z, att, mesh::ClipCheck::Trusted);
  const mesh::BoundingBox placed = placed_box(hull, att);
  double lo, hi;
  d.lwl = x_extent(clip.wetted_triangles, lo, hi);
  if (!(d.lwl > 0.0)) {
    d.warnings.push_back("DRY_HULL: water_z " + format_double(params.water_z) +
                         " is below the hull; using the bounding box length");
    d.lwl = placed.extent().x;
  }
  const FluidProperties fluid = fluid_properties(params.water_temperature);
  d.rho = fluid.rho;
  d.nu = fluid.nu;
  d.re = params.velocity * d.lwl / d.nu;
  d.fr = params.velocity / std::sqrt(kGravity * d.lwl);
  d.wetted_area_init = clip.wetted_area;
  d.domain_box = placed;
  d.domain_box.max.x += 2.0 * d.lwl;  // upstream, +x is the advancing direction
  d.domain_box.min.x -= 4.0 * d.lwl;
  d.domain_box.min.y -= 1.5 * d.lwl;
  d.domain_box.max.y += 1.5 * d.lwl;
  d.domain_box.min.z -= 1.0 * d.lwl;
  d.domain_box.max.z += 1.0 * d.lwl;
  return d;
}

std::string format_derived(const DerivedParameters& d) {
  std::string out;
  auto line = [&](const char* name, double v) {
    out += name;
    out += ' ';
    out += format_double(v);
    out += '\n';
  };
  line("lwl", d.lwl);
  line("re", d.re);
  line("fr", d.fr);
  line("rho", d.rho);
  line("nu", d.nu);
  line("wetted_area_init", d.wetted_area_init);
  line("domain_min_x", d.domain_box.min.x);
  line("domain_min_y", d.domain_box.min.y);
  line("domain_min_z", d.domain_box.min.z);
  line("domain_max_x", d.domain_box.max.x);
  line("domain_max_y", d.domain_box.max.y);
  line("domain_max_z", d.domain_box.max.z);
  return out;
}

double hydrostatic_pitch_moment(const Hull& hull, double water_z, const mesh::Attitude& att, double rho) {
  auto clip = mesh::clip_below_plane(hull.mesh(), water_z, att, mesh::ClipCheck::Trusted);
  const Vec3 c = mesh::apply(att, att.cog);
  Vec3 moment;
  for (const auto& piece : clip.wetted_triangles) {
    const auto& poly = piece.polygon;
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      const Vec3& a = poly[0];
      const Vec3& b = poly[k];
      const Vec3& d = poly[k + 1];
      const Vec3 s = cross(b - a, d - a) * 0.5;  // outward area vector
      Vec3 first;  // integral of p (r - c) over the triangle, times 3 / area
      for (const Vec3& m : {(a + b) * 0.5, (b + d) * 0.5, (d + a) * 0.5}) {
        first += (m - c) * (rho * kGravity * (water_z - m.z));
      }
      // Pressure pushes along -n: dM = (r - c) x (-p n dA).
      moment -= cross(first / 3.0, s);
    }
  }
  return moment.y;
}

EquilibriumState equilibrium_0dof(const PhysicalParameters& params) {
  EquilibriumState s;
  s.sink = 0.0;
  s.trim = params.trim_angle;
  s.converged = true;
  return s;
}

EquilibriumState equilibrium_1dof(const Hull& hull, const PhysicalParameters& params, std::optional<double> rho_in,
                                  std::optional<double> initial_sink) {
  const double rho = density_for(params, rho_in);
  const double weight = params.mass * kGravity;
  if (params.mass > rho * hull.volume()) {
    fail(Errc::InsufficientBuoyancy, "mass " + format_double(params.mass) + " kg exceeds the maximum displacement " +
                                         format_double(rho * hull.volume()) + " kg of the hull");
  }
  const mesh::Attitude base{0.0, params.trim_angle, params.cog};
  const mesh::BoundingBox placed = placed_box(hull, base);
  const double height = placed.extent().z;
  const double w = params.water_z;
  const double tol_f = kForceTolerance * weight;
  const double width_tol = kSinkWidthTolerance * hull.box().diagonal();

  auto residual = [&](double sink) {
    mesh::Attitude att = base;
    att.sink = sink;
    return rho * kGravity * mesh::clip_below_plane(hull.mesh(), w, att, mesh::ClipCheck::Trusted).submerged_volume -
           weight;
  };
  auto finish = [&](double sink, double f, int iterations) {
    EquilibriumState s;
    s.sink = sink;
    s.trim = params.trim_angle;
    s.converged = true;
    s.iterations = iterations;
    s.residual_force = f;
    mesh::Attitude att = base;
    att.sink = sink;
    s.residual_moment = hydrostatic_pitch_moment(hull, w, att, rho);
    return s;
  };

  if (initial_sink) {
    double f = residual(*initial_sink);
    if (std::abs(f) <= tol_f) return finish(*initial_sink, f, 1);
  }

  double lo = w - placed.max.z - height;  // fully submerged
  double hi = w - placed.min.z + height;  // dry
  for (int it = 1; it <= kMaxBisections; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    const double f = residual(mid);
    if (std::abs(f) <= tol_f && (hi - lo <= width_tol || f == 0.0)) return finish(mid, f, it);
    if (mid <= lo || mid >= hi) break;
    if (f > 0.0) lo = mid;  // too buoyant: raise the hull
    else hi = mid;
  }
  fail(Errc::NoConvergence, "sink equilibrium did not converge");
}

EquilibriumState equilibrium_2dof(const Hull& hull, const PhysicalParameters& params, std::optional<double> rho_in) {
  const double rho = density_for(params, rho_in);
  const double lwl = waterline_length(hull, params.water_z, {0.0, params.trim_angle, params.cog});
  const double tol_m = kMomentTolerance * params.mass * kGravity * lwl;
  const double noise_m = 1e-12 * params.mass * kGravity * lwl;

  struct Eval {
    EquilibriumState sink;
    double moment;
  };
  std::optional<double> warm;
  auto evaluate = [&](double trim) {
    PhysicalParameters p = params;
    p.trim_angle = trim;
    Eval e{equilibrium_1dof(hull, p, rho, warm), 0.0};
    e.moment = e.sink.residual_moment;
    return e;
  };
  int total_iterations = 0;
  auto finish = [&](double trim, const Eval& e) {
    EquilibriumState s = e.sink;
    s.trim = trim;
    s.iterations = total_iterations;
    s.residual_moment = e.moment;
    s.converged = true;
    return s;
  };

  double lo = -kTrimLimitDeg, hi = kTrimLimitDeg;
  Eval e_lo = evaluate(lo);
  Eval e_hi = evaluate(hi);
  total_iterations = 2;
  if (std::signbit(e_lo.moment) == std::signbit(e_hi.moment)) {
    if (std::abs(e_lo.moment) <= noise_m) return finish(lo, e_lo);
    if (std::abs(e_hi.moment) <= noise_m) return finish(hi, e_hi);
    fail(Errc::TrimRangeExceeded, "pitch moment does not change sign within +/-15 degrees of trim");
  }
  for (int it = 0; it < kMaxBisections; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    Eval e = evaluate(mid);
    ++total_iterations;
    if (std::abs(e.moment) <= noise_m || (std::abs(e.moment) <= tol_m && hi - lo <= kTrimWidthTolerance)) {
      return finish(mid, e);
    }
    if (mid <= lo || mid >= hi) break;
    if (std::signbit(e.moment) == std::signbit(e_lo.moment)) {
      lo = mid;
      e_lo = e;
    } else {
      hi = mid;
    }
  }
  fail(Errc::NoConvergence, "trim equilibrium did not converge");
}

SolveOutput solve(const Hull& hull, const PhysicalParameters& params, DofMode mode) {
  check_parameters(params);
  const FluidProperties fluid = fluid_properties(params.water_temperature);
  SolveOutput out;
  out.water_z = params.water_z;
  out.velocity = params.velocity;
  out.rho = fluid.rho;

  switch (mode) {
    case DofMode::Captive0: out.equilibrium = equilibrium_0dof(params); break;
    case DofMode::Sink1: out.equilibrium = equilibrium_1dof(hull, params); break;
    case DofMode::SinkTrim2: out.equilibrium = equilibrium_2dof(hull, params); break;
  }

  const mesh::Attitude att{out.equilibrium.sink, out.equilibrium.trim, params.cog};
  out.placed_mesh = mesh::transformed(hull.mesh(), att);
  const auto& placed = out.placed_mesh;
  auto clip = mesh::clip_below_plane(placed, params.water_z, {}, mesh::ClipCheck::Trusted);
  const mesh::BoundingBox box = mesh::bounding_box(placed);

  out.wetted_mask.assign(placed.triangles.size(), 0.0);
  for (const auto& piece : clip.wetted_triangles) {
    double area = 0.0;
    for (std::size_t k = 1; k + 1 < piece.polygon.size(); ++k) {
      area += 0.5 * norm(cross(piece.polygon[k] - piece.polygon[0], piece.polygon[k + 1] - piece.polygon[0]));
    }
    out.wetted_mask[piece.triangle] = area / mesh::triangle_area(placed, piece.triangle);
  }

  double x_stern, x_bow;
  out.lwl = x_extent(clip.wetted_triangles, x_stern, x_bow);
  if (!(out.lwl > 0.0)) {
    out.lwl = box.extent().x;
    x_bow = box.max.x;
  }
  const double dynamic = 0.5 * fluid.rho * params.velocity * params.velocity;
  if (params.velocity > 0.0) {
    out.reynolds = params.velocity * out.lwl / fluid.nu;
    out.friction_coefficient = friction_coefficient(out.reynolds);
    out.total_drag = total_resistance(fluid.rho, params.velocity, clip.wetted_area, out.reynolds);
  }

  out.pressure.name = "p";
  out.pressure.unit = "Pa";
  out.pressure.values.assign(placed.triangles.size(), 0.0);
  for (std::size_t t = 0; t < placed.triangles.size(); ++t) {
    if (!(out.wetted_mask[t] > 0.0)) continue;
    const auto& tri = placed.triangles[t];
    const Vec3 c = (placed.vertices[tri[0]] + placed.vertices[tri[1]] + placed.vertices[tri[2]]) / 3.0;
    double p = fluid.rho * kGravity * std::max(0.0, params.water_z - c.z);
    if (dynamic > 0.0) {
      const double u = (c.x - x_bow) / (0.1 * out.lwl);
      p += dynamic * std::exp(-u * u);
    }
    out.pressure.values[t] = p;
  }

  const double tau = params.velocity > 0.0 ? out.lwl / params.velocity : 1.0;
  const double t_end = 10.0 * tau;
  out.force_series = {"total_drag", "N", {}};
  out.sink_series = {"sink", "m", {}};
  out.trim_series = {"trim", "deg", {}};
  for (int i = 0; i < kTimeSamples; ++i) {
    const double t = t_end * i / (kTimeSamples - 1);
    const double ramp = 1.0 - std::exp(-t / tau);
    out.force_series.samples.push_back({t, out.total_drag * ramp});
    out.sink_series.samples.push_back({t, out.equilibrium.sink * ramp});
    out.trim_series.samples.push_back({t, params.trim_angle + (out.equilibrium.trim - params.trim_angle) * ramp});
  }

  // Still water plus a damped transverse pattern trailing the bow; for
  // visualization only.
  const double amplitude = std::min(params.wave_height, 0.05 * out.lwl);
  const double wavelength =
      params.velocity > 0.0 ? 2.0 * kPi * params.velocity * params.velocity / kGravity : out.lwl;
  const double k = 2.0 * kPi / wavelength;
  const double y_center = box.center().y;
  const double half_width = 0.5 * box.extent().y + out.lwl;
  auto& grid = out.elevation;
  constexpr int nx = 81, ny = 41;
  const double x0 = box.min.x - 4.0 * out.lwl, x1 = box.max.x + 2.0 * out.lwl;
  const double y0 = box.min.y - 1.5 * out.lwl, y1 = box.max.y + 1.5 * out.lwl;
  for (int i = 0; i < nx; ++i) grid.x.push_back(x0 + (x1 - x0) * i / (nx - 1));
  for (int j = 0; j < ny; ++j) grid.y.push_back(y0 + (y1 - y0) * j / (ny - 1));
  for (double y : grid.y) {
    for (double x : grid.x) {
      const double behind = x_bow - x;
      const double decay = behind >= 0.0 ? std::exp(-behind / (2.0 * out.lwl)) : std::exp(behind / (0.25 * out.lwl));
      const double lateral = (y - y_center) / half_width;
      grid.z.push_back(params.water_z + amplitude * decay * std::cos(k * behind) * std::exp(-lateral * lateral));
    }
  }

  out.waterline = std::move(clip.waterline_contour);
  out.kpis = results::extract_kpis(out);
  return out;
}

}  // namespace vtank::simsetup
