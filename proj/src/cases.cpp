#include "fcsim/cases.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace fcsim {

namespace {

// Six vehicles in the three-lane interlaced structure switching to `lanes`.
CaseStudy lane_switch(const std::string& id, int lanes) {
  CaseStudy c;
  c.id = id;
  c.description = "six-vehicle interlaced formation, 3 lanes to " + std::to_string(lanes);
  c.initial = formation_targets(3, 6);
  c.targets = formation_targets(lanes, 6);
  return c;
}

}  // namespace

std::vector<std::string> case_ids() { return {"1", "2", "lanes-3to1", "lanes-3to2", "lanes-3to4"}; }

CaseStudy case_study(const std::string& id) {
  if (id == "1") {
    return {"1", "single-lane column spreading to three lanes",
            {{0, 0}, {1, 0}, {2, 0}},
            {{0, 0}, {1, 1}, {0, 2}}};
  }
  if (id == "2") {
    return {"2", "four vehicles whose optimal assignment needs a target exchange",
            {{3, 0}, {1, 1}, {0, 2}, {2, 0}},
            {{0, 0}, {1, 1}, {0, 2}, {2, 0}}};
  }
  if (id == "lanes-3to1") return lane_switch(id, 1);
  if (id == "lanes-3to2") return lane_switch(id, 2);
  if (id == "lanes-3to4") return lane_switch(id, 4);
  throw std::invalid_argument("unknown case '" + id + "'");
}

CaseResult run_case(const std::string& id, const ScenarioConfig& cfg) {
  CaseResult r;
  r.study = case_study(id);
  r.plan = plan_reconfiguration(r.study.initial, r.study.targets);
  int front = 0;
  for (const Frc& p : r.study.initial) front = std::max(front, p.x_r);
  const double head_x0 = front * cfg.road.d_g;

  TrackOptions opt;
  opt.plan_dt = cfg.plan_dt;
  opt.sim_dt = cfg.control_dt;
  opt.v_f = cfg.road.v_f;
  opt.gains = cfg.gains;
  opt.limits = cfg.limits;
  opt.midpoints = cfg.midpoint_waypoints;
  for (const auto& row : r.plan.map.rows) {
    r.reference.push_back(compile_plan(row, head_x0, cfg.road));
    r.tracked.push_back(r.reference.back().segments.empty()
                            ? std::vector<TrackSample>{}
                            : track_segments(r.reference.back().segments, opt));
  }
  return r;
}

std::string case_trajectory_csv(const CaseResult& r, double dt, int every) {
  std::ostringstream os;
  os.precision(10);
  os << "vehicle,t,x,y,heading\n";
  for (std::size_t v = 0; v < r.reference.size(); ++v) {
    write_trajectory_csv(os, static_cast<int>(v + 1), r.reference[v], dt);
  }
  os << "\nvehicle,t,x,y,v,theta,lateral_error\n";
  for (std::size_t v = 0; v < r.tracked.size(); ++v) {
    const auto& tr = r.tracked[v];
    for (std::size_t i = 0; i < tr.size(); i += static_cast<std::size_t>(std::max(every, 1))) {
      const TrackSample& s = tr[i];
      os << v + 1 << ',' << s.t << ',' << s.state.x << ',' << s.state.y << ',' << s.state.v << ','
         << s.state.theta << ',' << s.lateral_error << '\n';
    }
  }
  return os.str();
}

}  // namespace fcsim
