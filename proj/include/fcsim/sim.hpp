#pragma once

// Lane-drop bottleneck experiment. The road is l_upstream + l_3 meters
// long; the top lanes (index >= num_lanes_down) end at x = l_upstream.
// Vehicles arrive at x = 0 and either travel in formations that move on a
// grid of slots at v_F (FormationControl) or drive with IDM car following
// and gap-acceptance lane changes (Baseline).

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcsim/control.hpp"
#include "fcsim/pathmap.hpp"
#include "fcsim/trajgen.hpp"

namespace fcsim {

enum class Mode { FormationControl, Baseline };

std::string to_string(Mode m);  // "fc" / "baseline"
Mode mode_from_string(const std::string& s);

struct IdmParams {
  double v0 = 33.3;           // desired speed, m/s
  double time_headway = 1.5;  // s
  double min_gap = 2.0;       // m
  double accel = 1.5;         // m/s^2
  double decel = 2.0;         // comfortable deceleration, m/s^2
  double delta = 4.0;
};

struct LaneChangeParams {
  double lookahead = 300.0;  // m before the lane end where merging starts
  double time_headway = 1.0;  // s, accepted lead/lag gap is min_gap + v * time_headway
};

// Akcelik instantaneous fuel model, light vehicle profile.
struct FuelParams {
  double alpha = 0.666;   // idle rate, mL/s
  double beta1 = 0.072;   // mL/kJ
  double beta2 = 0.0344;  // mL/(kJ m/s^2)
  double b1 = 0.333;      // rolling resistance, kN
  double b2 = 0.00108;    // drag, kN/(m/s)^2
  double mass = 1680.0;   // kg
};

struct FormationParams {
  int max_size = 9;
  double max_wait = 10.0;  // s after the first member arrives
};

struct HeatmapParams {
  double t_bin = 10.0;  // s
  double x_bin = 20.0;  // m
};

struct ScenarioConfig {
  int num_lanes_up = 3;
  int num_lanes_down = 2;
  double l_upstream = 1000.0;  // l_1 + l_2
  double l_3 = 200.0;
  double volume = 1500.0;  // veh/(h lane)
  double sim_duration = 600.0;
  double tick = 0.1;
  double warmup = 60.0;
  double vehicle_length = 5.0;
  double vehicle_width = 1.8;
  Mode mode = Mode::FormationControl;
  std::uint64_t seed = 1;

  RoadParams road;
  VehicleLimits limits;
  LateralGains gains;
  double plan_dt = 0.1;
  double control_dt = 0.01;
  bool midpoint_waypoints = true;  // see TrackOptions::midpoints

  FormationParams formation;
  IdmParams idm;
  LaneChangeParams lane_change;
  FuelParams fuel;
  HeatmapParams heatmap;
  double log_interval = 1.0;  // s between run-log rows; 0 disables the log

  double road_length() const { return l_upstream + l_3; }
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  std::vector<std::string> problems;  // "field: message"
};

/// Throws ConfigError listing every offending field.
void validate(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Arrivals

struct Arrival {
  double t;
  int lane;
};

/// Per-lane Poisson arrivals over [0, sim_duration), each delayed until it
/// is at least d_g / v_F behind the previous one on its lane. Sorted by
/// (t, lane).
std::vector<Arrival> spawn_vehicles(const ScenarioConfig& cfg, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Vehicle models

/// IDM acceleration. `gap` is the bumper gap to the leader (use +inf for a
/// free road) and `dv` is own speed minus the leader's.
double idm_acceleration(double v, double gap, double dv, const IdmParams& p);

/// Akcelik fuel rate in mL/s: alpha + beta1*P + beta2*M*a^2*v/1000 (a > 0)
/// with tractive power P = (b1 + b2 v^2 + M a/1000) v in kW. Idle only when
/// the tractive force is not positive.
double akcelik_fuel_rate(double v, double a, const FuelParams& p);
double akcelik_fuel(double v, double a, double dt, const FuelParams& p);  // mL

// ---------------------------------------------------------------------------
// Formation planning

/// Conflict-free assignment of `initial` to `targets` followed by hold
/// insertion.
struct Reconfiguration {
  ConflictFreeResult assignment;
  std::vector<Frc> assigned;  // target of each vehicle
  RelativePathMap map;
  std::vector<HoldEvent> holds;

  std::size_t cycles() const { return map.n_steps(); }
  std::vector<Frc> final_positions() const;
};

Reconfiguration plan_reconfiguration(std::span<const Frc> initial, std::span<const Frc> targets);

/// Interlaced targets, or a single-file platoon when there is one lane.
std::vector<Frc> formation_targets(int lanes, int vehicles);

struct FormationPlan {
  std::vector<Frc> entry;  // FRC of each member when it enters the road
  Reconfiguration forming;    // entry -> interlaced upstream structure
  Reconfiguration switching;  // -> downstream structure
  // Per member: entry FRC then one FRC per cycle up to one cycle after the
  // last move.
  std::vector<std::vector<Frc>> rows;
  double head_x0 = 0.0;   // head position when cycle 0 starts
  int switch_start = 0;   // cycle at which switching starts
  int switch_cycles = 0;  // N^t
  double l2 = 0.0;        // N^t * v_F * T
  int footprint = 1;      // slots used: max x_r + 1
  bool direct = false;     // forming skipped, entry planned straight to the downstream layout
  bool straggler = false;  // the switch cannot end before the lane end
};

/// Members enter in interlaced slots of their own lane (the j-th member of
/// lane l at x_r = 2j + l mod 2); cycle 0 starts once the last one is on the
/// road. The switch is scheduled as late as possible while still ending
/// before the head reaches l_upstream. A lone vehicle on an open lane does
/// not maneuver.
FormationPlan plan_formation(std::span<const int> lanes, const ScenarioConfig& cfg);

/// Congestion-free volume per upstream lane for the downstream formation
/// structure: occupied cells per slot * v_F / d_g, spread over the upstream
/// lanes.
double formation_capacity(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Runs

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateRun : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Heatmap {
  double t_bin = 10.0;
  double x_bin = 20.0;
  int n_t = 0;
  int n_x = 0;
  std::vector<double> sum;
  std::vector<long> count;

  void reset(double duration, double length, double t_bin, double x_bin);
  void add(double t, double x, double v);
  std::optional<double> mean(int it, int ix) const;  // nullopt for an empty cell
};

struct SafetyReport {
  long gap_violations = 0;       // same-lane bumper gap below d_g / 2
  long overlap_violations = 0;   // body overlap involving a lane-changing vehicle
  long clearance_violations = 0; // vehicle on a closed lane past l_upstream
  double min_same_lane_gap = 1e9;  // m, smallest observed bumper gap
  double min_changing_gap = 1e9;   // m, same for laterally overlapping pairs with a lane changer
  long checks = 0;  // ticks checked

  long total() const { return gap_violations + overlap_violations + clearance_violations; }
};

struct FormationStats {
  int formations = 0;
  int direct_plans = 0;
  int straggler_events = 0;
  int max_size = 0;
  int max_switch_cycles = 0;
  int sequential_holds = 0;
  double max_tracking_error = 0.0;  // m, lateral distance to the reference curve
};

struct RunMetrics {
  Mode mode = Mode::FormationControl;
  double volume = 0.0;
  std::uint64_t seed = 0;

  long spawned = 0;
  long entered = 0;
  long completed = 0;
  long on_road = 0;
  long waiting = 0;  // arrived but not yet on the road
  long measured = 0;  // completed vehicles that entered after the warm-up

  double avg_travel_time = 0.0;    // s, x = 0 to the road end
  double avg_fuel_per_100km = 0.0; // L/100km
  double avg_entry_delay = 0.0;    // s, arrival to entry
  double throughput = 0.0;         // completed veh/h

  Heatmap heatmap;
  std::optional<double> min_cell_speed_after_warmup;

  SafetyReport safety;
  long integrity_failures = 0;  // baseline overlaps
  FormationStats formation;
  double capacity = 0.0;  // formation_capacity(cfg)
};

struct LogRow {
  double t;
  int vehicle;
  int lane;
  double x;
  double y;
  double v;
  double a;
  double fuel_rate;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<LogRow> log;
};

/// One complete run. Metrics average over vehicles that entered after the
/// warm-up and finished; throws DegenerateRun if there are none and
/// SimulationError if a formation cannot be planned or tracked.
RunResult run_simulation(const ScenarioConfig& cfg);

}  // namespace fcsim
