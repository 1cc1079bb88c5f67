#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fcsim/control.hpp"
#include "qp_oracle.hpp"

using fcsim::VehicleLimits;
using fcsim::VehicleState;

namespace {

constexpr double kPi = std::numbers::pi;

// Random instance around cruise. Some are infeasible; those are compared on
// the verdict only.
oracle::LonInstance random_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dev(-20.0, 20.0);
  oracle::LonInstance in;
  const int nks[] = {5, 10, 20};
  in.nk = nks[rng() % 3];
  in.dt = 5.0 / in.nk;
  const int nt = 1 + static_cast<int>(rng() % 3);
  for (int n = 0; n < nt; ++n) in.segments.push_back(144.0 + dev(rng));
  if (rng() % 2) in.v_max = 31.0;
  if (rng() % 2) {
    in.a_max = 2.0;
    in.a_min = -2.0;
  }
  return in;
}

fcsim::LongitudinalProblem to_problem(const oracle::LonInstance& in) {
  fcsim::LongitudinalProblem p;
  p.segments = in.segments;
  p.s0 = in.s0;
  p.v0 = in.v0;
  p.v_end = in.v_end;
  p.T = 5.0;
  p.dt = in.dt;
  p.limits.v_min = in.v_min;
  p.limits.v_max = in.v_max;
  p.limits.a_min = in.a_min;
  p.limits.a_max = in.a_max;
  return p;
}

}  // namespace

TEST(Bicycle, StraightAndLongitudinal) {
  const VehicleLimits lim;
  VehicleState s{0.0, 1.75, 20.0, fcsim::model_theta(0.0)};
  const auto n = fcsim::step_bicycle(s, {0.0, 0.0}, 0.1, lim);
  EXPECT_NEAR(n.x, 2.0, 1e-12);
  EXPECT_NEAR(n.y, 1.75, 1e-12);
  EXPECT_DOUBLE_EQ(n.v, 20.0);
  s.v = 10.0;
  EXPECT_NEAR(fcsim::step_bicycle(s, {1.0, 0.0}, 0.1, lim).v, 10.1, 1e-12);
}

TEST(Bicycle, SaturatesSpeedAndInputs) {
  const VehicleLimits lim;
  VehicleState s{0, 0, 33.0, kPi / 2};
  EXPECT_DOUBLE_EQ(fcsim::step_bicycle(s, {5.0, 0.0}, 1.0, lim).v, lim.v_max);
  s.v = 0.5;
  EXPECT_DOUBLE_EQ(fcsim::step_bicycle(s, {-10.0, 0.0}, 1.0, lim).v, 0.0);
  s.v = 10.0;
  const auto a = fcsim::step_bicycle(s, {0.0, 2.0}, 0.1, lim);
  const auto b = fcsim::step_bicycle(s, {0.0, lim.delta_max}, 0.1, lim);
  EXPECT_DOUBLE_EQ(a.theta, b.theta);
}

TEST(Bicycle, ModelConvention) {
  // theta is measured from +y towards +x; positive steer turns clockwise.
  const VehicleLimits lim;
  VehicleState s{0, 0, 10.0, 0.0};
  const auto n = fcsim::step_bicycle(s, {0.0, 0.1}, 0.1, lim);
  EXPECT_NEAR(n.x, 0.0, 1e-12);
  EXPECT_NEAR(n.y, 1.0, 1e-12);
  EXPECT_GT(n.theta, 0.0);
  EXPECT_DOUBLE_EQ(fcsim::road_heading(kPi / 2), 0.0);
}

namespace {

// Distance from the Euler endpoint after a quarter turn to the exact one.
// A full revolution is useless here: the Euler chords then sum to zero.
double quarter_turn_error(double dt) {
  const VehicleLimits lim;
  const double v = 10.0, delta = 0.2;
  const double rate = v / lim.wheelbase * std::tan(delta);
  const double radius = lim.wheelbase / std::tan(delta);
  const double quarter = kPi / 2 / rate;
  const int steps = static_cast<int>(std::lround(quarter / dt));
  VehicleState s{0, 0, v, kPi / 2};
  for (int i = 0; i < steps; ++i) s = fcsim::step_bicycle(s, {0.0, delta}, quarter / steps, lim);
  return std::hypot(s.x - radius, s.y + radius);
}

}  // namespace

TEST(Bicycle, CircleTest) {
  const VehicleLimits lim;
  const double v = 10.0, delta = 0.2;
  const double rate = v / lim.wheelbase * std::tan(delta);
  const double radius = lim.wheelbase / std::tan(delta);
  const double dt = 1e-3;
  const double period = 2 * kPi / rate;
  VehicleState s{0, 0, v, kPi / 2};
  double max_radius_err = 0.0;
  // Clockwise circle: centre lies at (0, -radius).
  const int steps = static_cast<int>(std::lround(period / dt));
  for (int i = 0; i < steps; ++i) {
    const auto n = fcsim::step_bicycle(s, {0.0, delta}, dt, lim);
    EXPECT_NEAR((n.theta - s.theta) / dt, rate, 1e-9 * rate);
    s = n;
    max_radius_err = std::max(max_radius_err, std::abs(std::hypot(s.x, s.y + radius) - radius));
  }
  EXPECT_LT(max_radius_err, 0.01 * radius);
  EXPECT_NEAR(s.theta - kPi / 2, 2 * kPi, 0.01 * 2 * kPi);
}

TEST(Bicycle, FirstOrderConvergence) {
  const double e1 = quarter_turn_error(0.02), e2 = quarter_turn_error(0.01),
               e3 = quarter_turn_error(0.005);
  EXPECT_GE(e1 / e2, 1.9);
  EXPECT_GE(e2 / e3, 1.9);
}

TEST(Longitudinal, CruiseHasZeroCost) {
  const std::vector<double> S{28.8 * 5.0};
  const auto plan = fcsim::solve_longitudinal(S, 28.8, VehicleLimits{}, 5.0, 0.1);
  EXPECT_LE(plan.cost, 1e-9);
  ASSERT_EQ(plan.accel.size(), 50u);
  for (double a : plan.accel) EXPECT_NEAR(a, 0.0, 1e-9);
  EXPECT_NEAR(plan.s.back(), 144.0, 1e-9);
}

TEST(Longitudinal, ForwardThenBackStepMatchesOracle) {
  const std::vector<double> S{144.0 + 15.0, 144.0 - 15.0};
  const auto plan = fcsim::solve_longitudinal(S, 28.8, VehicleLimits{}, 5.0, 0.5);
  oracle::LonInstance in;
  in.segments = S;
  in.nk = 10;
  in.dt = 0.5;
  const auto ref = oracle::solve_full_state(in);
  ASSERT_TRUE(ref.has_value());
  EXPECT_NEAR(plan.cost, ref->cost, 1e-4 * ref->cost);
  // Speed rises above cruise to gain the first 15 m and dips below it to
  // give them back, with the sign change of the acceleration in between.
  EXPECT_GT(plan.accel.front(), 0.0);
  EXPECT_LT(plan.accel[9], 0.0);
  EXPECT_GT(*std::max_element(plan.v.begin(), plan.v.begin() + 10), 28.8 + 1.0);
  EXPECT_LT(*std::min_element(plan.v.begin() + 11, plan.v.end()), 28.8 - 1.0);
  EXPECT_NEAR(plan.s[10], 159.0, 1e-6);
  EXPECT_NEAR(plan.s[20], 288.0, 1e-6);
  EXPECT_NEAR(plan.v[20], 28.8, 1e-9);
}

TEST(Longitudinal, DynamicsHoldIdentically) {
  const std::vector<double> S{150.0, 140.0, 144.0};
  const auto p = fcsim::solve_longitudinal(S, 28.8, VehicleLimits{}, 5.0, 0.1);
  ASSERT_EQ(p.s.size(), 151u);
  EXPECT_EQ(p.s[0], 0.0);
  for (std::size_t k = 0; k + 1 < p.s.size(); ++k) {
    EXPECT_DOUBLE_EQ(p.s[k + 1], p.s[k] + p.v[k] * 0.1);
    EXPECT_DOUBLE_EQ(p.v[k + 1], p.v[k] + p.accel[k] * 0.1);
  }
  EXPECT_LT(p.constraint_residual, 1e-6);
}

TEST(Longitudinal, Errors) {
  const VehicleLimits lim;
  const std::vector<double> too_far{200.0};
  try {
    fcsim::solve_longitudinal(too_far, 28.8, lim, 5.0, 0.1);
    FAIL() << "expected infeasibility";
  } catch (const fcsim::InfeasiblePlan& e) {
    EXPECT_EQ(e.segment, 1);
  }
  const std::vector<double> second_bad{144.0, 40.0};
  try {
    fcsim::solve_longitudinal(second_bad, 28.8, lim, 5.0, 0.1);
    FAIL() << "expected infeasibility";
  } catch (const fcsim::InfeasiblePlan& e) {
    EXPECT_EQ(e.segment, 2);
  }
  const std::vector<double> ok{144.0};
  EXPECT_THROW(fcsim::solve_longitudinal(ok, 28.8, lim, 5.0, 0.3), std::invalid_argument);
  const std::vector<double> zero{0.0};
  EXPECT_THROW(fcsim::solve_longitudinal(zero, 28.8, lim, 5.0, 0.1), std::invalid_argument);
}

TEST(Longitudinal, RandomInstancesMatchOracle) {
  std::mt19937_64 rng(5);
  int with_bounds = 0, feasible = 0;
  for (int i = 0; i < 120; ++i) {
    const auto in = random_instance(rng);
    const auto ref = oracle::solve_full_state(in);
    if (!ref) {
      EXPECT_THROW(fcsim::solve_longitudinal(to_problem(in)), fcsim::InfeasiblePlan) << "instance " << i;
      continue;
    }
    ++feasible;
    const auto plan = fcsim::solve_longitudinal(to_problem(in));
    with_bounds += plan.bounds_active;
    EXPECT_NEAR(plan.cost, ref->cost, 1e-4 * std::max(ref->cost, 1e-6)) << "instance " << i;
    double cum = 0.0;
    for (std::size_t n = 0; n < in.segments.size(); ++n) {
      cum += in.segments[n];
      EXPECT_NEAR(plan.s[(n + 1) * static_cast<std::size_t>(in.nk)], cum, 1e-6);
    }
    for (std::size_t k = 0; k < plan.accel.size(); ++k) {
      EXPECT_LE(plan.accel[k], in.a_max + 1e-9);
      EXPECT_GE(plan.accel[k], in.a_min - 1e-9);
      EXPECT_LE(plan.v[k + 1], in.v_max + 1e-9);
    }
  }
  EXPECT_GT(feasible, 40);
  EXPECT_GT(with_bounds, 10);
}

TEST(Longitudinal, EqualityOnlyClosedForm) {
  // With no active bound the plan must equal the minimum-norm solution of
  // the waypoint equations, computed here with a plain normal-equation solve.
  const std::vector<double> S{150.0, 139.0};
  const double dt = 0.25, v = 28.8;
  const int nk = 20, N = 40;
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(3, N);
  Eigen::Vector3d e;
  for (int j = 0; j < nk; ++j) E(0, j) = dt * dt * (nk - 1 - j);
  for (int j = 0; j < N; ++j) E(1, j) = dt * dt * (N - 1 - j);
  E.row(2).setConstant(dt);
  e << 150.0 - nk * v * dt, 289.0 - N * v * dt, 0.0;
  const Eigen::VectorXd a = E.transpose() * (E * E.transpose()).inverse() * e;
  const auto plan = fcsim::solve_longitudinal(S, v, VehicleLimits{}, 5.0, dt);
  EXPECT_FALSE(plan.bounds_active);
  for (int j = 0; j < N; ++j) EXPECT_NEAR(plan.accel[static_cast<std::size_t>(j)], a(j), 1e-9);
}

TEST(Longitudinal, EnergyGrowsAwayFromCruise) {
  const VehicleLimits lim;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    // Scaling the whole deviation pattern up never lowers the cost.
    const std::vector<double> dir{d(rng), d(rng), d(rng)};
    double prev = -1.0;
    for (double scale : {0.0, 2.0, 4.0, 6.0, 8.0, 10.0}) {
      std::vector<double> S;
      for (double x : dir) S.push_back(144.0 + scale * x);
      const double c = fcsim::solve_longitudinal(S, 28.8, lim, 5.0, 0.5).cost;
      EXPECT_GE(c, prev - 1e-9);
      prev = c;
    }
    // One segment moved away from cruise, the others held at cruise.
    const std::size_t n = rng() % 3;
    std::vector<double> S(3, 144.0);
    prev = 0.0;
    for (int step = 1; step <= 5; ++step) {
      S[n] = 144.0 + (dir[n] >= 0 ? 3.0 : -3.0) * step;
      const double c = fcsim::solve_longitudinal(S, 28.8, lim, 5.0, 0.5).cost;
      EXPECT_GT(c, prev);
      prev = c;
    }
  }
}

TEST(Replan, ZeroErrorReproducesTail) {
  const std::vector<double> S{159.0, 129.0, 144.0};
  const auto full = fcsim::solve_longitudinal(S, 28.8, VehicleLimits{}, 5.0, 0.5);
  const std::vector<double> rest{129.0, 144.0};
  const auto tail = fcsim::replan_on_segment_boundary(rest, full.s[10] - 159.0, full.v[10], 28.8,
                                                      VehicleLimits{}, 5.0, 0.5);
  ASSERT_EQ(tail.accel.size(), 20u);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_NEAR(tail.accel[k], full.accel[10 + k], 1e-6);
}

TEST(Replan, RestoresNextWaypointAfterError) {
  const std::vector<double> rest{144.0, 144.0};
  const auto p = fcsim::replan_on_segment_boundary(rest, 0.5, 28.8, 28.8, VehicleLimits{}, 5.0, 0.1);
  EXPECT_DOUBLE_EQ(p.s[0], 0.5);
  EXPECT_NEAR(p.s[50], 144.0, 1e-6);
  EXPECT_NEAR(p.s[100], 288.0, 1e-6);
  oracle::LonInstance in;
  in.segments = rest;
  in.s0 = 0.5;
  in.nk = 50;
  in.dt = 0.1;
  const auto ref = oracle::solve_full_state(in);
  ASSERT_TRUE(ref.has_value());
  EXPECT_NEAR(p.cost, ref->cost, 1e-4 * ref->cost);
  EXPECT_THROW(fcsim::replan_on_segment_boundary(rest, -60.0, 28.8, 28.8, VehicleLimits{}, 5.0, 0.1),
               fcsim::InfeasiblePlan);
}

TEST(Lateral, LinearLawAndSaturation) {
  const auto seg = fcsim::bezier_segment({0, 1.75, 0}, {144, 1.75, 5});
  const fcsim::LateralGains g;
  const VehicleLimits lim;
  VehicleState on{50.0, 1.75, 28.8, kPi / 2};
  EXPECT_DOUBLE_EQ(fcsim::lateral_control(on, seg, g, lim), 0.0);
  // 0.5 m on the -y side of the path.
  VehicleState off{50.0, 1.25, 28.8, kPi / 2};
  EXPECT_NEAR(fcsim::lateral_control(off, seg, g, lim), -0.5 * g.k_y, 1e-12);
  VehicleState turned{50.0, 1.75, 28.8, kPi / 2 + 0.1};
  EXPECT_NEAR(fcsim::lateral_control(turned, seg, g, lim), -0.1 * g.k_theta, 1e-12);
  for (double y : {-3.0, -1.0, 1.75, 4.0, 6.0}) {
    for (double th : {0.0, 1.0, 2.0, 3.0}) {
      VehicleState s{60.0, y, 20.0, th};
      EXPECT_LE(std::abs(fcsim::lateral_control(s, seg, g, lim)), lim.delta_max + 1e-15);
    }
  }
  VehicleState lost{50.0, 12.0, 28.8, kPi / 2};
  EXPECT_THROW(fcsim::lateral_control(lost, seg, g, lim), fcsim::TrackingLost);
}

TEST(Tracking, LaneChangeSegment) {
  const fcsim::RoadParams road;
  const std::vector<fcsim::Frc> row{{1, 0}, {2, 1}};
  const auto plan = fcsim::compile_plan(row, 0.0, road);
  const auto trace = fcsim::track_segments(plan.segments, fcsim::TrackOptions{});
  double worst = 0.0;
  for (const auto& s : trace) worst = std::max(worst, s.lateral_error);
  EXPECT_LT(worst, 0.2);
  EXPECT_NEAR(trace.back().t, 5.0, 1e-9);
  EXPECT_NEAR(trace.back().state.x, plan.pros.back().x, 0.5);
}

TEST(Tracking, MultiSegmentRow) {
  const fcsim::RoadParams road;
  const std::vector<fcsim::Frc> row{{2, 0}, {1, 1}, {1, 1}, {0, 2}};
  const auto plan = fcsim::compile_plan(row, 100.0, road);
  const auto trace = fcsim::track_segments(plan.segments, fcsim::TrackOptions{});
  double worst = 0.0;
  for (const auto& s : trace) worst = std::max(worst, s.lateral_error);
  EXPECT_LT(worst, 0.2);
  EXPECT_NEAR(trace.back().state.x, plan.pros.back().x, 0.5);
  EXPECT_NEAR(trace.back().state.y, plan.pros.back().y, 0.2);
}
