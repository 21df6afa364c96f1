#pragma once

#include <string>
#include <vector>

#include "vtank/mesh.hpp"

namespace vtank {

struct KpiSummary {
  double total_drag = 0.0;               // N
  double p_max = 0.0;                    // Pa
  double p_min = 0.0;                    // Pa
  double max_wave_height_on_hull = 0.0;  // m
  double wsa = 0.0;                      // m^2
  double final_sink = 0.0;               // m
  double final_trim = 0.0;               // degrees

  friend bool operator==(const KpiSummary&, const KpiSummary&) = default;
};

struct TimeSample {
  double t = 0.0;
  double value = 0.0;
  friend bool operator==(const TimeSample&, const TimeSample&) = default;
};

struct TimeSeries {
  std::string name;
  std::string unit;
  std::vector<TimeSample> samples;  // t strictly increasing
};

/// Per-triangle scalar on the hull placed at its final attitude.
struct ScalarFieldOnMesh {
  std::string name;
  std::string unit;
  std::vector<double> values;
};

/// Free-surface elevation z(x, y), row-major with x varying fastest.
struct ElevationGrid {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z;

  double at(std::size_t ix, std::size_t iy) const { return z[iy * x.size() + ix]; }
  /// Bilinear interpolation, clamped to the grid.
  double sample(double px, double py) const;
};

struct SlicePoint {
  double s = 0.0;  // arclength
  double x = 0.0;
  double z = 0.0;
  double value = 0.0;
};

struct SliceCurve {
  int axis = 1;  // plane normal axis (1 = y)
  double offset = 0.0;
  std::vector<SlicePoint> points;  // s non-decreasing
};

struct EquilibriumState {
  double sink = 0.0;
  double trim = 0.0;  // degrees, bow-up positive
  bool converged = false;
  int iterations = 0;
  double residual_force = 0.0;   // N
  double residual_moment = 0.0;  // N m
};

/// Everything the reference solver produces for one run.
struct SolveOutput {
  KpiSummary kpis;
  EquilibriumState equilibrium;
  double water_z = 0.0;
  double velocity = 0.0;
  double rho = 0.0;
  double lwl = 0.0;
  double reynolds = 0.0;
  double friction_coefficient = 0.0;
  double total_drag = 0.0;  // solver scalar, cross-checked against force_series
  mesh::TriangleMesh placed_mesh;
  TimeSeries force_series;
  TimeSeries sink_series;
  TimeSeries trim_series;
  ScalarFieldOnMesh pressure;
  std::vector<double> wetted_mask;  // wetted fraction per triangle
  ElevationGrid elevation;
  std::vector<mesh::Polyline> waterline;
};

}  // namespace vtank
