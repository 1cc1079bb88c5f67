#pragma once

// Named reconfiguration examples: the two worked assignment cases and
// lane-count switches of a six-vehicle interlaced formation.

#include <string>
#include <vector>

#include "fcsim/control.hpp"
#include "fcsim/sim.hpp"
#include "fcsim/trajgen.hpp"

namespace fcsim {

struct CaseStudy {
  std::string id;
  std::string description;
  std::vector<Frc> initial;
  std::vector<Frc> targets;
};

/// "1", "2", "lanes-3to1", "lanes-3to2", "lanes-3to4"
std::vector<std::string> case_ids();

/// Throws std::invalid_argument for an unknown id.
CaseStudy case_study(const std::string& id);

struct CaseResult {
  CaseStudy study;
  Reconfiguration plan;
  std::vector<CompiledPlan> reference;            // per vehicle
  std::vector<std::vector<TrackSample>> tracked;  // per vehicle, closed loop
};

/// Plans the case and tracks every vehicle's compiled row with the
/// bicycle model, the head starting at the frontmost initial slot.
CaseResult run_case(const std::string& id, const ScenarioConfig& cfg);

/// "vehicle,t,x,y,heading" for the reference curves followed by
/// "vehicle,t,x,y,v,theta,lateral_error" for the tracked states every
/// `every` control steps; two sections separated by a blank line.
std::string case_trajectory_csv(const CaseResult& r, double dt, int every);

}  // namespace fcsim
