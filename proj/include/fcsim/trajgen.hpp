#pragma once

// Continuous geometry for a relative path map row: key road points (Pro) at
// cycle boundaries and one cubic Bezier segment per cycle.

#include <array>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "fcsim/rcs_core.hpp"

namespace fcsim {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RoadParams {
  double v_f = 28.8;        // formation speed, m/s
  double T = 5.0;           // switching cycle, s
  double d_g = 15.0;        // one-lane following gap (slot length), m
  double lane_width = 3.5;  // m
};

/// Key road point: road coordinates and scheduled arrival time.
struct Pro {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct TrajectorySegment {
  std::array<Point2, 4> control_points;
  double arc_length = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
};

struct CurveSample {
  Point2 point;
  double heading = 0.0;  // radians from the road axis, counter-clockwise
};

/// x = head_x0 + v_F*cycle*T - x_r*d_g, y = (y_r + 0.5)*lane_width, t = cycle*T.
Pro frc_to_pro(const Frc& frc, int cycle, double head_x0, const RoadParams& road);

/// Cubic Bezier from start to end with both end tangents along the road
/// axis; the inner control points sit shape_fraction*dx from the ends.
TrajectorySegment bezier_segment(const Pro& start, const Pro& end, double shape_fraction = 1.0 / 3.0);

/// De Casteljau evaluation; u in [0, 1].
CurveSample eval_bezier(const TrajectorySegment& seg, double u);

/// Arc length from u = 0 to u (adaptive Simpson, 1e-9 relative).
double arc_length_to(const TrajectorySegment& seg, double u);

/// Parameter at which the curve reaches road coordinate x (x is monotone
/// along a forward segment). Clamped to [0, 1].
double param_at_x(const TrajectorySegment& seg, double x);

/// Parameter of the curve point closest to p.
double closest_param(const TrajectorySegment& seg, const Point2& p);

struct CompiledPlan {
  std::vector<Pro> pros;  // one per row entry
  std::vector<TrajectorySegment> segments;
  std::vector<double> lengths;  // S_1..S_n
};

/// One segment per relative step of a map row, starting at `first_cycle`.
CompiledPlan compile_plan(std::span<const Frc> row, double head_x0, const RoadParams& road,
                          int first_cycle = 0, double shape_fraction = 1.0 / 3.0);

/// CSV rows "vehicle,t,x,y,heading" sampling each segment uniformly in time.
void write_trajectory_csv(std::ostream& os, int vehicle, const CompiledPlan& plan, double dt);

}  // namespace fcsim
