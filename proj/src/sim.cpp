#include "fcsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

namespace fcsim {

std::string to_string(Mode m) { return m == Mode::FormationControl ? "fc" : "baseline"; }

Mode mode_from_string(const std::string& s) {
  if (s == "fc") return Mode::FormationControl;
  if (s == "baseline") return Mode::Baseline;
  throw std::invalid_argument("unknown mode '" + s + "' (expected fc or baseline)");
}

namespace {

std::string join_problems(const std::vector<std::string>& p) {
  std::string out = "invalid configuration";
  for (const auto& s : p) out += "; " + s;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> p)
    : std::invalid_argument(join_problems(p)), problems(std::move(p)) {}

void validate(const ScenarioConfig& c) {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const char* field, const char* msg) {
    if (!ok) bad.push_back(std::string(field) + ": " + msg);
  };
  auto integral_ratio = [](double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) return false;
    const double r = a / b;
    return std::abs(r - std::round(r)) <= 1e-9 * r;
  };
  need(c.num_lanes_up >= 1, "scenario.num_lanes_up", "must be at least 1");
  need(c.num_lanes_down >= 1, "scenario.num_lanes_down", "must be at least 1");
  need(c.num_lanes_down <= c.num_lanes_up, "scenario.num_lanes_down", "must not exceed num_lanes_up");
  need(c.l_upstream > 0.0, "scenario.l_upstream", "must be positive");
  need(c.l_3 >= 0.0, "scenario.l_3", "must be non-negative");
  need(c.volume > 0.0 && std::isfinite(c.volume), "scenario.volume", "must be positive");
  need(c.sim_duration > 0.0, "scenario.sim_duration", "must be positive");
  need(c.tick > 0.0, "scenario.tick", "must be positive");
  need(c.warmup >= 0.0 && c.warmup < c.sim_duration, "scenario.warmup", "must lie in [0, sim_duration)");
  need(c.vehicle_length > 0.0, "vehicle.length", "must be positive");
  need(c.vehicle_width > 0.0 && c.vehicle_width < c.road.lane_width, "vehicle.width",
       "must be positive and narrower than a lane");
  need(c.road.d_g > c.vehicle_length, "road.d_g", "must exceed the vehicle length");
  need(c.road.T > 0.0, "road.T", "must be positive");
  need(c.road.lane_width > 0.0, "road.lane_width", "must be positive");
  need(c.road.v_f > c.limits.v_min && c.road.v_f <= c.limits.v_max, "road.v_f",
       "must lie in (v_min, v_max]");
  need(c.limits.v_min >= 0.0, "limits.v_min", "must be non-negative");
  need(c.limits.a_min < 0.0, "limits.a_min", "must be negative");
  need(c.limits.a_max > 0.0, "limits.a_max", "must be positive");
  need(c.limits.delta_max > 0.0 && c.limits.delta_max < std::numbers::pi / 2, "limits.delta_max",
       "must lie in (0, 90) degrees");
  need(c.limits.wheelbase > 0.0, "limits.wheelbase", "must be positive");
  need(integral_ratio(c.road.T, c.plan_dt), "control.plan_dt", "must divide road.T");
  need(integral_ratio(c.plan_dt, c.control_dt), "control.sim_dt", "must divide control.plan_dt");
  need(c.gains.k_y >= 0.0 && c.gains.k_theta >= 0.0, "control.gains", "must be non-negative");
  need(c.gains.preview >= 0.0 && c.gains.envelope > 0.0, "control.preview",
       "preview must be non-negative and envelope positive");
  need(c.formation.max_size >= 1, "formation.max_size", "must be at least 1");
  need(c.formation.max_wait >= 0.0, "formation.max_wait", "must be non-negative");
  need(c.idm.v0 > 0.0 && c.idm.time_headway > 0.0 && c.idm.min_gap >= 0.0 && c.idm.accel > 0.0 &&
           c.idm.decel > 0.0 && c.idm.delta > 0.0,
       "idm", "parameters must be positive");
  need(c.lane_change.lookahead > 0.0, "lane_change.lookahead", "must be positive");
  need(c.lane_change.time_headway >= 0.0, "lane_change.time_headway", "must be non-negative");
  need(c.fuel.alpha >= 0.0 && c.fuel.beta1 >= 0.0 && c.fuel.beta2 >= 0.0 && c.fuel.mass > 0.0,
       "fuel", "coefficients must be non-negative and mass positive");
  need(c.heatmap.t_bin > 0.0 && c.heatmap.x_bin > 0.0, "heatmap", "bins must be positive");
  need(c.log_interval == 0.0 || c.log_interval >= c.tick, "log.interval",
       "must be 0 or at least one tick");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

std::vector<Arrival> spawn_vehicles(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  std::vector<Arrival> out;
  if (!(cfg.volume > 0.0)) return out;
  const double rate = cfg.volume / 3600.0;
  const double min_headway = cfg.road.d_g / cfg.road.v_f;
  std::exponential_distribution<double> gap(rate);
  for (int lane = 0; lane < cfg.num_lanes_up; ++lane) {
    double poisson = 0.0;
    double last = -std::numeric_limits<double>::infinity();
    for (;;) {
      poisson += gap(rng);
      const double t = std::max(poisson, last + min_headway);
      if (t >= cfg.sim_duration) break;
      out.push_back({t, lane});
      last = t;
    }
  }
  std::sort(out.begin(), out.end(), [](const Arrival& a, const Arrival& b) {
    return a.t != b.t ? a.t < b.t : a.lane < b.lane;
  });
  return out;
}

double idm_acceleration(double v, double gap, double dv, const IdmParams& p) {
  const double free = 1.0 - std::pow(std::max(v, 0.0) / p.v0, p.delta);
  if (!std::isfinite(gap)) return p.accel * free;
  const double s_star =
      p.min_gap + std::max(0.0, v * p.time_headway + v * dv / (2.0 * std::sqrt(p.accel * p.decel)));
  const double s = std::max(gap, 1e-3);
  return p.accel * (free - (s_star / s) * (s_star / s));
}

double akcelik_fuel_rate(double v, double a, const FuelParams& p) {
  const double force = p.b1 + p.b2 * v * v + p.mass * a / 1000.0;  // kN
  if (force <= 0.0 || v <= 0.0) return p.alpha;
  double rate = p.alpha + p.beta1 * force * v;
  if (a > 0.0) rate += p.beta2 * p.mass * a * a * v / 1000.0;
  return rate;
}

double akcelik_fuel(double v, double a, double dt, const FuelParams& p) {
  return akcelik_fuel_rate(v, a, p) * dt;
}

// ---------------------------------------------------------------------------

std::vector<Frc> Reconfiguration::final_positions() const {
  std::vector<Frc> out;
  for (const auto& row : map.rows) out.push_back(row.back());
  return out;
}

Reconfiguration plan_reconfiguration(std::span<const Frc> initial, std::span<const Frc> targets) {
  Reconfiguration r;
  r.assignment = conflict_free_assign(initial, targets);
  for (std::size_t i = 0; i < initial.size(); ++i) {
    r.assigned.push_back(targets[static_cast<std::size_t>(r.assignment.assignment.match[i])]);
  }
  r.map = resolve_map(build_map(initial, r.assignment.paths), r.assigned, &r.holds);
  return r;
}

std::vector<Frc> formation_targets(int lanes, int vehicles) {
  const Structure s = lanes == 1 ? Structure::Parallel : Structure::Interlaced;
  return generate_targets({s, lanes, vehicles});
}

namespace {

Reconfiguration stay(std::span<const Frc> at) {
  Reconfiguration r;
  r.assigned.assign(at.begin(), at.end());
  const std::vector<RelativePath> none(at.size());
  r.map = build_map(at, none);
  return r;
}

}  // namespace

FormationPlan plan_formation(std::span<const int> lanes, const ScenarioConfig& cfg) {
  const auto n = static_cast<int>(lanes.size());
  if (n == 0) throw MalformedInstance("formation without members");
  FormationPlan plan;
  std::vector<int> per_lane(static_cast<std::size_t>(cfg.num_lanes_up), 0);
  int max_x = 0;
  for (int l : lanes) {
    if (l < 0 || l >= cfg.num_lanes_up) throw MalformedInstance("member lane out of range");
    int& j = per_lane[static_cast<std::size_t>(l)];
    const Frc at{2 * j + l % 2, l};
    ++j;
    plan.entry.push_back(at);
    max_x = std::max(max_x, at.x_r);
  }
  plan.head_x0 = max_x * cfg.road.d_g;
  const double cycle_len = cfg.road.v_f * cfg.road.T;
  const int avail =
      static_cast<int>(std::floor((cfg.l_upstream - plan.head_x0) / cycle_len + 1e-9));

  if (n == 1) {
    const Frc& e = plan.entry.front();
    const Frc target{e.x_r, std::min(e.y_r, cfg.num_lanes_down - 1)};
    plan.forming = stay(plan.entry);
    plan.switching = plan_reconfiguration(plan.entry, std::span(&target, 1));
  } else {
    const auto up = formation_targets(cfg.num_lanes_up, n);
    const auto down = formation_targets(cfg.num_lanes_down, n);
    plan.forming = plan_reconfiguration(plan.entry, up);
    const auto formed = plan.forming.final_positions();
    plan.switching = plan_reconfiguration(formed, down);
    if (static_cast<int>(plan.forming.cycles() + plan.switching.cycles()) > avail) {
      plan.direct = true;
      plan.forming = stay(plan.entry);
      plan.switching = plan_reconfiguration(plan.entry, down);
    }
  }
  const int n_a = static_cast<int>(plan.forming.cycles());
  plan.switch_cycles = static_cast<int>(plan.switching.cycles());
  plan.l2 = plan.switch_cycles * cycle_len;
  plan.switch_start = avail - plan.switch_cycles;
  if (plan.switch_start < n_a) {
    plan.straggler = true;
    plan.switch_start = n_a;
  }

  plan.rows.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < plan.rows.size(); ++i) {
    auto& row = plan.rows[i];
    row = plan.forming.map.rows[i];
    row.resize(static_cast<std::size_t>(plan.switch_start) + 1, row.back());
    const auto& sw = plan.switching.map.rows[i];
    row.insert(row.end(), sw.begin() + 1, sw.end());
    row.push_back(row.back());
    for (const Frc& p : row) plan.footprint = std::max(plan.footprint, p.x_r + 1);
  }
  return plan;
}

double formation_capacity(const ScenarioConfig& cfg) {
  const double per_slot = cfg.num_lanes_down == 1 ? 1.0 : cfg.num_lanes_down / 2.0;
  return per_slot * cfg.road.v_f / cfg.road.d_g * 3600.0 / cfg.num_lanes_up;
}

// ---------------------------------------------------------------------------

void Heatmap::reset(double duration, double length, double tb, double xb) {
  t_bin = tb;
  x_bin = xb;
  n_t = static_cast<int>(std::ceil(duration / tb - 1e-9));
  n_x = static_cast<int>(std::ceil(length / xb - 1e-9));
  sum.assign(static_cast<std::size_t>(n_t * n_x), 0.0);
  count.assign(sum.size(), 0);
}

void Heatmap::add(double t, double x, double v) {
  const int it = static_cast<int>(std::floor(t / t_bin));
  const int ix = static_cast<int>(std::floor(x / x_bin));
  if (it < 0 || it >= n_t || ix < 0 || ix >= n_x) return;
  const auto k = static_cast<std::size_t>(it * n_x + ix);
  sum[k] += v;
  ++count[k];
}

std::optional<double> Heatmap::mean(int it, int ix) const {
  const auto k = static_cast<std::size_t>(it * n_x + ix);
  if (count[k] == 0) return std::nullopt;
  return sum[k] / static_cast<double>(count[k]);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Kinematic {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double a = 0.0;
  bool changing = false;
};

// Book-keeping shared by both modes.
struct VehicleRecord {
  double arrival = 0.0;
  double entry = kInf;
  double exit = kInf;
  double fuel = 0.0;  // mL
  bool on_road = false;
  bool done = false;
};

class Recorder {
 public:
  Recorder(const ScenarioConfig& cfg, std::size_t n_vehicles, RunResult& out)
      : cfg_(cfg), out_(out), veh_(n_vehicles) {
    out_.metrics.heatmap.reset(cfg.sim_duration, cfg.road_length(), cfg.heatmap.t_bin,
                               cfg.heatmap.x_bin);
    log_every_ = cfg.log_interval > 0.0
                     ? std::max(1L, std::lround(cfg.log_interval / cfg.tick))
                     : 0L;
  }

  VehicleRecord& at(std::size_t i) { return veh_[i]; }
  const std::vector<VehicleRecord>& all() const { return veh_; }

  // State of an on-road vehicle at tick k (before integrating to k + 1).
  void sample(long k, int id, int lane, const Kinematic& s) {
    const double t = static_cast<double>(k) * cfg_.tick;
    const double rate = akcelik_fuel_rate(s.v, s.a, cfg_.fuel);
    veh_[static_cast<std::size_t>(id)].fuel += rate * cfg_.tick;
    out_.metrics.heatmap.add(t, s.x, s.v);
    if (log_every_ > 0 && k % log_every_ == 0) {
      out_.log.push_back({t, id, lane, s.x, s.y, s.v, s.a, rate});
    }
  }

 private:
  const ScenarioConfig& cfg_;
  RunResult& out_;
  std::vector<VehicleRecord> veh_;
  long log_every_ = 0;
};

int lane_of(double y, const ScenarioConfig& cfg) {
  const int l = static_cast<int>(std::floor(y / cfg.road.lane_width));
  return std::clamp(l, 0, cfg.num_lanes_up - 1);
}

// ---------------------------------------------------------------------------
// Formation control

struct FcTrack {
  double entry = 0.0;  // time at x = 0
  int lane = 0;
  long first_tick = 0;            // tick of samples[0]
  std::vector<Kinematic> samples; // tracked window, one per tick
};

// Position of a formation vehicle at time t, given its precomputed track.
Kinematic fc_state(const FcTrack& tr, long k, double t, const ScenarioConfig& cfg) {
  Kinematic s;
  const long idx = k - tr.first_tick;
  if (tr.samples.empty() || idx < 0) {
    s.x = cfg.road.v_f * (t - tr.entry);
    s.y = (tr.lane + 0.5) * cfg.road.lane_width;
    s.v = cfg.road.v_f;
    return s;
  }
  if (idx < static_cast<long>(tr.samples.size())) return tr.samples[static_cast<std::size_t>(idx)];
  s = tr.samples.back();
  const double t_last = static_cast<double>(tr.first_tick + static_cast<long>(tr.samples.size()) - 1) * cfg.tick;
  s.x += s.v * (t - t_last);
  s.a = 0.0;
  s.changing = false;
  return s;
}

struct FcBuild {
  std::vector<FcTrack> tracks;  // by vehicle id
  FormationStats stats;
};

FcBuild build_formations(const ScenarioConfig& cfg, const std::vector<Arrival>& arrivals) {
  FcBuild out;
  out.tracks.resize(arrivals.size());
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    out.tracks[i].entry = kInf;
    out.tracks[i].lane = arrivals[i].lane;
  }
  const double slot = cfg.road.d_g / cfg.road.v_f;
  TrackOptions topt;
  topt.plan_dt = cfg.plan_dt;
  topt.sim_dt = cfg.control_dt;
  topt.v_f = cfg.road.v_f;
  topt.gains = cfg.gains;
  topt.limits = cfg.limits;
  topt.midpoints = cfg.midpoint_waypoints;

  double next_head = -kInf;  // earliest head time allowed by the previous formation
  std::size_t i = 0;
  int formation_index = 0;
  while (i < arrivals.size()) {
    std::size_t j = i;
    const double first = arrivals[i].t;
    while (j < arrivals.size() && static_cast<int>(j - i) < cfg.formation.max_size &&
           arrivals[j].t <= first + cfg.formation.max_wait) {
      ++j;
    }
    const bool full = static_cast<int>(j - i) == cfg.formation.max_size;
    const double close = full ? arrivals[j - 1].t : first + cfg.formation.max_wait;
    if (close >= cfg.sim_duration) break;

    std::vector<int> lanes;
    for (std::size_t m = i; m < j; ++m) lanes.push_back(arrivals[m].lane);
    FormationPlan plan;
    try {
      plan = plan_formation(lanes, cfg);
    } catch (const std::exception& e) {
      throw SimulationError("formation " + std::to_string(formation_index) +
                            " could not be planned: " + e.what());
    }
    const double head = std::max(close, next_head);
    next_head = head + plan.footprint * slot;
    int max_x = 0;
    for (const Frc& p : plan.entry) max_x = std::max(max_x, p.x_r);
    const double t0 = head + max_x * slot;

    auto& st = out.stats;
    ++st.formations;
    st.direct_plans += plan.direct;
    st.straggler_events += plan.straggler;
    st.max_size = std::max(st.max_size, static_cast<int>(j - i));
    st.max_switch_cycles = std::max(st.max_switch_cycles, plan.switch_cycles);
    for (const auto* r : {&plan.forming, &plan.switching}) {
      for (const auto& h : r->holds) st.sequential_holds += h.sequential;
    }

    for (std::size_t m = 0; m < plan.rows.size(); ++m) {
      FcTrack& tr = out.tracks[i + m];
      const auto& row = plan.rows[m];
      tr.entry = head + plan.entry[m].x_r * slot;
      std::size_t m0 = row.size(), m1 = 0;
      for (std::size_t c = 0; c + 1 < row.size(); ++c) {
        if (row[c] != row[c + 1]) {
          m0 = std::min(m0, c);
          m1 = c;
        }
      }
      if (m0 == row.size()) continue;
      const CompiledPlan compiled = compile_plan(row, plan.head_x0, cfg.road);
      const std::span<const TrajectorySegment> window(compiled.segments.data() + m0,
                                                      std::min(m1 + 2, compiled.segments.size()) - m0);
      std::vector<TrackSample> trace;
      try {
        trace = track_segments(window, topt);
      } catch (const std::exception& e) {
        throw SimulationError("formation " + std::to_string(formation_index) + " member " +
                              std::to_string(m) + " could not be tracked: " + e.what());
      }
      const double ts = t0 + window.front().t_start;  // global time of trace[0]
      const double te = ts + static_cast<double>(trace.size() - 1) * cfg.control_dt;
      tr.first_tick = static_cast<long>(std::ceil(ts / cfg.tick - 1e-9));
      for (long k = tr.first_tick; static_cast<double>(k) * cfg.tick <= te + 1e-9; ++k) {
        const double u = (static_cast<double>(k) * cfg.tick - ts) / cfg.control_dt;
        const auto lo = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(u))), trace.size() - 1);
        const auto hi = std::min(lo + 1, trace.size() - 1);
        const double w = std::clamp(u - static_cast<double>(lo), 0.0, 1.0);
        const VehicleState& a = trace[lo].state;
        const VehicleState& b = trace[hi].state;
        Kinematic s;
        s.x = a.x + w * (b.x - a.x);
        s.y = a.y + w * (b.y - a.y);
        s.v = a.v + w * (b.v - a.v);
        s.a = trace[lo].a;
        const auto seg = std::min(static_cast<std::size_t>(std::max(0.0, (static_cast<double>(k) * cfg.tick - ts) / cfg.road.T)),
                                  window.size() - 1);
        s.changing = window[seg].control_points[0].y != window[seg].control_points[3].y;
        tr.samples.push_back(s);
      }
      for (const auto& smp : trace) {
        st.max_tracking_error = std::max(st.max_tracking_error, smp.lateral_error);
      }
    }
    i = j;
    ++formation_index;
  }
  return out;
}

void check_safety(std::vector<std::pair<Kinematic, int>>& on_road, const ScenarioConfig& cfg,
                  SafetyReport& rep) {
  ++rep.checks;
  std::sort(on_road.begin(), on_road.end(),
            [](const auto& a, const auto& b) { return a.first.x < b.first.x; });
  const double L = cfg.vehicle_length, W = cfg.vehicle_width;
  const double min_gap = 0.5 * cfg.road.d_g;
  for (std::size_t i = 0; i < on_road.size(); ++i) {
    const Kinematic& a = on_road[i].first;
    const int la = lane_of(a.y, cfg);
    if (la >= cfg.num_lanes_down && a.x > cfg.l_upstream) ++rep.clearance_violations;
    for (std::size_t j = i + 1; j < on_road.size(); ++j) {
      const Kinematic& b = on_road[j].first;
      const double dx = b.x - a.x;
      if (dx >= 2.0 * cfg.road.d_g) break;
      if (!a.changing && !b.changing) {
        if (lane_of(b.y, cfg) != la) continue;
        rep.min_same_lane_gap = std::min(rep.min_same_lane_gap, dx - L);
        if (dx - L < min_gap) ++rep.gap_violations;
      } else if (std::abs(b.y - a.y) < W) {
        rep.min_changing_gap = std::min(rep.min_changing_gap, dx - L);
        if (dx < L) ++rep.overlap_violations;
      }
    }
  }
}

void run_fc(const ScenarioConfig& cfg, const std::vector<Arrival>& arrivals, Recorder& rec,
            RunMetrics& m) {
  FcBuild built = build_formations(cfg, arrivals);
  m.formation = built.stats;
  const long ticks = std::lround(cfg.sim_duration / cfg.tick);
  std::vector<std::pair<Kinematic, int>> on_road;
  std::vector<double> last_x(arrivals.size(), 0.0);
  for (long k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * cfg.tick;
    on_road.clear();
    for (std::size_t id = 0; id < arrivals.size(); ++id) {
      VehicleRecord& r = rec.at(id);
      const FcTrack& tr = built.tracks[id];
      if (r.done || tr.entry > t) continue;
      if (!r.on_road) {
        r.on_road = true;
        r.entry = tr.entry;
      }
      const Kinematic s = fc_state(tr, k, t, cfg);
      if (s.x >= cfg.road_length()) {
        const double t_prev = t - cfg.tick;
        const double x_prev = last_x[id];
        r.exit = t_prev + (cfg.road_length() - x_prev) / std::max(s.x - x_prev, 1e-12) * cfg.tick;
        r.done = true;
        r.on_road = false;
        continue;
      }
      last_x[id] = s.x;
      rec.sample(k, static_cast<int>(id), lane_of(s.y, cfg), s);
      on_road.emplace_back(s, static_cast<int>(id));
    }
    check_safety(on_road, cfg, m.safety);
  }
}

// ---------------------------------------------------------------------------
// Baseline: IDM with gap-acceptance merging

struct BVehicle {
  int id;
  int lane;
  double x;  // front bumper
  double v;
  double a = 0.0;
};

void run_baseline(const ScenarioConfig& cfg, const std::vector<Arrival>& arrivals, Recorder& rec,
                  RunMetrics& m) {
  const long ticks = std::lround(cfg.sim_duration / cfg.tick);
  const double L = cfg.vehicle_length;
  const IdmParams& idm = cfg.idm;
  const LaneChangeParams& lc = cfg.lane_change;
  const double b_safe = 2.0 * idm.decel;
  std::vector<std::deque<int>> pending(static_cast<std::size_t>(cfg.num_lanes_up));
  std::vector<BVehicle> road;  // kept sorted by x descending
  std::size_t next_arrival = 0;

  auto by_x = [](const BVehicle& a, const BVehicle& b) {
    return a.x != b.x ? a.x > b.x : a.id < b.id;
  };
  // Leader and follower of position x on `lane`, ignoring vehicle `self`.
  auto neighbours = [&](int lane, double x, int self) {
    const BVehicle* lead = nullptr;
    const BVehicle* lag = nullptr;
    for (const BVehicle& o : road) {
      if (o.lane != lane || o.id == self) continue;
      if (o.x >= x) {
        lead = &o;
      } else {
        lag = &o;
        break;
      }
    }
    return std::pair{lead, lag};
  };
  auto accel_for = [&](const BVehicle& self, const BVehicle* lead) {
    double a = idm_acceleration(self.v, kInf, 0.0, idm);
    if (lead) a = idm_acceleration(self.v, lead->x - L - self.x, self.v - lead->v, idm);
    if (self.lane >= cfg.num_lanes_down && self.x >= cfg.l_upstream - cfg.lane_change.lookahead) {
      a = std::min(a, idm_acceleration(self.v, cfg.l_upstream - self.x, self.v, idm));
      // Drop in behind the next vehicle on the target lane.
      const auto [t_lead, t_lag] = neighbours(self.lane - 1, self.x, self.id);
      (void)t_lag;
      if (t_lead) {
        a = std::min(a, idm_acceleration(self.v, t_lead->x - L - self.x, self.v - t_lead->v, idm));
      }
    }
    return std::clamp(a, cfg.limits.a_min, cfg.limits.a_max);
  };

  for (long k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * cfg.tick;
    while (next_arrival < arrivals.size() && arrivals[next_arrival].t <= t) {
      pending[static_cast<std::size_t>(arrivals[next_arrival].lane)].push_back(
          static_cast<int>(next_arrival));
      ++next_arrival;
    }
    // Insertion at x = 0.
    for (int lane = 0; lane < cfg.num_lanes_up; ++lane) {
      auto& q = pending[static_cast<std::size_t>(lane)];
      if (q.empty()) continue;
      const auto [lead, lag] = neighbours(lane, 0.0, -1);
      (void)lag;
      double v_ins = cfg.road.v_f;
      if (lead) {
        const double gap = lead->x - L;
        if (gap < idm.min_gap + v_ins * idm.time_headway) v_ins = std::min(v_ins, lead->v);
        if (gap < idm.min_gap + v_ins * idm.time_headway) continue;
      }
      const int id = q.front();
      q.pop_front();
      road.push_back({id, lane, 0.0, v_ins});
      std::sort(road.begin(), road.end(), by_x);
      rec.at(static_cast<std::size_t>(id)).entry = t;
      rec.at(static_cast<std::size_t>(id)).on_road = true;
    }
    // Mandatory merges off the closed lanes, front to back.
    for (auto& self : road) {
      if (self.lane < cfg.num_lanes_down || self.x < cfg.l_upstream - cfg.lane_change.lookahead) continue;
      const int target = self.lane - 1;
      const auto [lead, lag] = neighbours(target, self.x, self.id);
      if (lead && lead->x - L - self.x < idm.min_gap + self.v * lc.time_headway) continue;
      if (lag) {
        if (self.x - L - lag->x < idm.min_gap + lag->v * lc.time_headway) continue;
        const double a_lag = idm_acceleration(lag->v, self.x - L - lag->x, lag->v - self.v, idm);
        if (a_lag < -b_safe) continue;
      }
      self.lane = target;
    }
    // The nearest follower on the target lane opens a gap for the closest
    // merging vehicle ahead of it.
    std::unordered_map<int, const BVehicle*> yield_to;
    for (const BVehicle& c : road) {
      if (c.lane < cfg.num_lanes_down || c.x < cfg.l_upstream - lc.lookahead) continue;
      const auto [t_lead, t_lag] = neighbours(c.lane - 1, c.x, c.id);
      (void)t_lead;
      if (t_lag) yield_to[t_lag->id] = &c;
    }
    // Accelerations from the state at t, then one step.
    for (std::size_t i = 0; i < road.size(); ++i) {
      const BVehicle* lead = nullptr;
      for (std::size_t j = i; j-- > 0;) {
        if (road[j].lane == road[i].lane) {
          lead = &road[j];
          break;
        }
      }
      road[i].a = accel_for(road[i], lead);
      if (auto it = yield_to.find(road[i].id); it != yield_to.end()) {
        const BVehicle& c = *it->second;
        const double a_coop = idm_acceleration(road[i].v, c.x - L - road[i].x, road[i].v - c.v, idm);
        road[i].a = std::min(road[i].a, std::max(a_coop, -idm.decel));
      }
    }
    for (auto& self : road) {
      Kinematic s;
      s.x = self.x;
      s.y = (self.lane + 0.5) * cfg.road.lane_width;
      s.v = self.v;
      s.a = self.a;
      rec.sample(k, self.id, self.lane, s);
    }
    for (auto& self : road) {
      const double v_new = std::clamp(self.v + self.a * cfg.tick, 0.0, cfg.limits.v_max);
      const double x_new = self.x + 0.5 * (self.v + v_new) * cfg.tick;
      if (x_new >= cfg.road_length()) {
        VehicleRecord& r = rec.at(static_cast<std::size_t>(self.id));
        r.exit = t + (cfg.road_length() - self.x) / std::max(x_new - self.x, 1e-12) * cfg.tick;
        r.done = true;
        r.on_road = false;
      }
      self.v = v_new;
      self.x = x_new;
      if (self.lane >= cfg.num_lanes_down && self.x > cfg.l_upstream) {
        ++m.integrity_failures;
        self.x = cfg.l_upstream;
        self.v = 0.0;
      }
    }
    road.erase(std::remove_if(road.begin(), road.end(),
                              [&](const BVehicle& b) { return rec.at(static_cast<std::size_t>(b.id)).done; }),
               road.end());
    std::sort(road.begin(), road.end(), by_x);
    for (std::size_t i = 0; i < road.size(); ++i) {
      for (std::size_t j = i; j-- > 0;) {
        if (road[j].lane != road[i].lane) continue;
        if (road[j].x - L - road[i].x < 0.0) ++m.integrity_failures;
        break;
      }
    }
  }
}

}  // namespace

RunResult run_simulation(const ScenarioConfig& cfg) {
  validate(cfg);
  RunResult out;
  RunMetrics& m = out.metrics;
  m.mode = cfg.mode;
  m.volume = cfg.volume;
  m.seed = cfg.seed;
  m.capacity = formation_capacity(cfg);

  std::mt19937_64 rng(cfg.seed);
  const std::vector<Arrival> arrivals = spawn_vehicles(cfg, rng);
  Recorder rec(cfg, arrivals.size(), out);
  for (std::size_t i = 0; i < arrivals.size(); ++i) rec.at(i).arrival = arrivals[i].t;

  if (cfg.mode == Mode::FormationControl) {
    run_fc(cfg, arrivals, rec, m);
  } else {
    run_baseline(cfg, arrivals, rec, m);
  }

  m.spawned = static_cast<long>(arrivals.size());
  double tt = 0.0, fuel = 0.0, delay = 0.0;
  long delayed = 0;
  for (const VehicleRecord& r : rec.all()) {
    if (std::isfinite(r.entry)) ++m.entered;
    if (r.done) ++m.completed;
    if (r.on_road) ++m.on_road;
    if (!std::isfinite(r.entry)) ++m.waiting;
    if (std::isfinite(r.entry) && r.entry >= cfg.warmup) {
      delay += r.entry - r.arrival;
      ++delayed;
    }
    if (r.done && r.entry >= cfg.warmup) {
      ++m.measured;
      tt += r.exit - r.entry;
      fuel += r.fuel / cfg.road_length() * 100.0;  // mL per m == L per km; x100 for L/100km
    }
  }
  if (m.measured == 0) {
    throw DegenerateRun("no vehicle entered after the warm-up and completed the road");
  }
  m.avg_travel_time = tt / static_cast<double>(m.measured);
  m.avg_fuel_per_100km = fuel / static_cast<double>(m.measured);
  m.avg_entry_delay = delayed > 0 ? delay / static_cast<double>(delayed) : 0.0;
  m.throughput = static_cast<double>(m.completed) / cfg.sim_duration * 3600.0;

  const auto& hm = m.heatmap;
  for (int it = 0; it < hm.n_t; ++it) {
    if (it * hm.t_bin < cfg.warmup) continue;
    for (int ix = 0; ix < hm.n_x; ++ix) {
      if (const auto v = hm.mean(it, ix)) {
        m.min_cell_speed_after_warmup =
            std::min(m.min_cell_speed_after_warmup.value_or(kInf), *v);
      }
    }
  }
  return out;
}

}  // namespace fcsim
