#pragma once

// Vehicle-level control: kinematic bicycle model, minimum-energy
// longitudinal plan through the per-cycle waypoints, and a preview feedback
// steering law.
//
// Angles follow the kinematic model's own convention: theta is measured
// from the +y axis towards +x, so x' = v sin(theta), y' = v cos(theta) and
// driving along the road axis means theta = pi/2. A positive steer angle
// turns clockwise (towards -y). Use road_heading() for the usual
// counter-clockwise heading from the road axis.

#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "fcsim/trajgen.hpp"

namespace fcsim {

struct VehicleLimits {
  double v_min = 0.0;
  double v_max = 33.3;
  double a_min = -10.0;
  double a_max = 5.0;
  double delta_max = 40.0 * std::numbers::pi / 180.0;
  double wheelbase = 2.7;  // m
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = std::numbers::pi / 2;
};

struct ControlInput {
  double a = 0.0;
  double delta = 0.0;
};

inline double road_heading(double theta) { return std::numbers::pi / 2 - theta; }
inline double model_theta(double heading) { return std::numbers::pi / 2 - heading; }

/// Forward Euler step; a and delta are clipped to the limits and the new
/// speed is saturated to [v_min, v_max].
VehicleState step_bicycle(const VehicleState& s, const ControlInput& u, double dt,
                          const VehicleLimits& lim);

/// Raised when no acceleration sequence meets the waypoints within the
/// bounds. `segment` is the 1-based index of the first segment whose
/// waypoint cannot be met (the last one when only the end speed fails).
class InfeasiblePlan : public std::runtime_error {
 public:
  InfeasiblePlan(const std::string& what, int segment) : std::runtime_error(what), segment(segment) {}
  int segment;
};

struct LongitudinalProblem {
  std::vector<double> segments;  // S_1..S_Nt, m
  double s0 = 0.0;               // initial position; waypoints are measured from 0
  double v0 = 28.8;
  double v_end = 28.8;
  double T = 5.0;
  double dt = 0.1;
  VehicleLimits limits;
};

struct LongitudinalPlan {
  std::vector<double> accel;  // a(0..N-1)
  std::vector<double> s;      // s(0..N)
  std::vector<double> v;      // v(0..N)
  double dt = 0.1;
  int steps_per_segment = 0;
  double cost = 0.0;               // sum of a^2
  bool bounds_active = false;      // closed form violated a bound
  double constraint_residual = 0;  // worst equality or bound violation
};

/// Minimise sum a(k)^2 subject to s(k+1) = s(k) + v(k) dt, v(k+1) = v(k) +
/// a(k) dt, s(0) = s0, v(0) = v0, s(i*Nk) = S_1 + ... + S_i, v(N) = v_end and
/// the box bounds on a and v(1..N). Throws InfeasiblePlan or std::invalid_argument.
LongitudinalPlan solve_longitudinal(const LongitudinalProblem& p);

/// Plan from rest-of-formation speed: s0 = 0, v0 = v_end = v_f.
LongitudinalPlan solve_longitudinal(std::span<const double> segments, double v_f,
                                    const VehicleLimits& lim, double T, double dt);

/// Re-solve at a segment boundary from the measured state: `s_error` is the
/// measured position minus the waypoint just reached.
LongitudinalPlan replan_on_segment_boundary(std::span<const double> remaining, double s_error,
                                            double v_measured, double v_f,
                                            const VehicleLimits& lim, double T, double dt);

class TrackingLost : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LateralGains {
  double k_y = 0.2;       // rad per m of lateral offset
  double k_theta = 1.0;   // rad per rad of heading error
  double preview = 15.0;  // m ahead of the closest point
  double envelope = 7.0;  // m; larger offsets mean the track is lost
};

struct LateralErrors {
  double offset = 0.0;         // signed, positive when the vehicle is on the -y side
  double heading_error = 0.0;  // vehicle theta minus path theta at the preview point
  double closest_u = 0.0;
};

LateralErrors lateral_errors(const VehicleState& s, const TrajectorySegment& seg, double preview);

/// delta = -k_y * offset - k_theta * heading_error, clipped to +-delta_max.
double lateral_control(const VehicleState& s, const TrajectorySegment& seg, const LateralGains& g,
                       const VehicleLimits& lim);

struct TrackSample {
  double t;
  VehicleState state;
  double a;
  double delta;
  double lateral_error;  // distance to the closest curve point
};

struct TrackOptions {
  double plan_dt = 0.1;
  double sim_dt = 0.01;
  double v_f = 28.8;
  LateralGains gains;
  VehicleLimits limits;
  // Add a waypoint at the middle of every segment (half the arc length at
  // half the cycle), so the lateral and longitudinal progress stay in step.
  bool midpoints = false;
};

/// Closed-loop tracking of consecutive segments starting on the first one
/// at formation speed. The longitudinal plan is re-solved at every segment
/// boundary from the measured progress.
std::vector<TrackSample> track_segments(std::span<const TrajectorySegment> segments,
                                        const TrackOptions& opt);

}  // namespace fcsim
