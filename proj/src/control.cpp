#include "fcsim/control.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "fcsim/qp.hpp"

namespace fcsim {

VehicleState step_bicycle(const VehicleState& s, const ControlInput& u, double dt,
                          const VehicleLimits& lim) {
  const double a = std::clamp(u.a, lim.a_min, lim.a_max);
  const double delta = std::clamp(u.delta, -lim.delta_max, lim.delta_max);
  VehicleState n;
  n.x = s.x + s.v * std::sin(s.theta) * dt;
  n.y = s.y + s.v * std::cos(s.theta) * dt;
  n.v = std::clamp(s.v + a * dt, lim.v_min, lim.v_max);
  n.theta = s.theta + s.v / lim.wheelbase * std::tan(delta) * dt;
  return n;
}

namespace {

struct QpForm {
  Eigen::MatrixXd E;  // waypoint rows then the end-speed row
  Eigen::VectorXd e;
  Eigen::MatrixXd G;  // G a <= g
  Eigen::VectorXd g;
};

int steps_per_segment(double T, double dt) {
  if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("T and dt must be positive");
  const double r = T / dt;
  const long nk = std::lround(r);
  if (nk < 1 || std::abs(r - static_cast<double>(nk)) > 1e-9 * r) {
    throw std::invalid_argument("T / dt must be an integer");
  }
  return static_cast<int>(nk);
}

// First `segments` waypoints, with or without the end-speed row.
QpForm build(const LongitudinalProblem& p, int nk, std::size_t segments, bool end_speed) {
  const auto N = static_cast<Eigen::Index>(segments) * nk;
  const double dt = p.dt;
  const auto rows = static_cast<Eigen::Index>(segments) + (end_speed ? 1 : 0);
  QpForm f;
  f.E = Eigen::MatrixXd::Zero(rows, N);
  f.e.resize(rows);
  double cum = 0.0;
  for (std::size_t i = 0; i < segments; ++i) {
    cum += p.segments[i];
    const Eigen::Index ki = static_cast<Eigen::Index>(i + 1) * nk;
    for (Eigen::Index j = 0; j < ki; ++j) {
      f.E(static_cast<Eigen::Index>(i), j) = dt * dt * static_cast<double>(ki - 1 - j);
    }
    f.e(static_cast<Eigen::Index>(i)) = cum - p.s0 - static_cast<double>(ki) * p.v0 * dt;
  }
  if (end_speed) {
    f.E.row(rows - 1).setConstant(dt);
    f.e(rows - 1) = p.v_end - p.v0;
  }
  const auto& lim = p.limits;
  f.G = Eigen::MatrixXd::Zero(4 * N, N);
  f.g.resize(4 * N);
  for (Eigen::Index j = 0; j < N; ++j) {
    f.G(j, j) = 1.0;
    f.g(j) = lim.a_max;
    f.G(N + j, j) = -1.0;
    f.g(N + j) = -lim.a_min;
  }
  for (Eigen::Index k = 1; k <= N; ++k) {
    f.G.block(2 * N + k - 1, 0, 1, k).setConstant(dt);
    f.g(2 * N + k - 1) = lim.v_max - p.v0;
    f.G.block(3 * N + k - 1, 0, 1, k).setConstant(-dt);
    f.g(3 * N + k - 1) = p.v0 - lim.v_min;
  }
  return f;
}

double violation(const QpForm& f, const Eigen::VectorXd& a) {
  double worst = (f.E * a - f.e).cwiseAbs().maxCoeff();
  if (f.G.rows() > 0) worst = std::max(worst, (f.G * a - f.g).maxCoeff());
  return std::max(worst, 0.0);
}

struct QpResult {
  Eigen::VectorXd a;
  bool bounds_active = false;
};

std::optional<QpResult> solve(const QpForm& f) {
  // Equality-only minimiser first; most plans never touch a bound.
  const Eigen::MatrixXd EEt = f.E * f.E.transpose();
  const Eigen::VectorXd a0 = f.E.transpose() * EEt.ldlt().solve(f.e);
  if ((f.G * a0 - f.g).maxCoeff() <= 1e-9 && (f.E * a0 - f.e).cwiseAbs().maxCoeff() <= 1e-9) {
    return QpResult{a0, false};
  }
  auto a = qp::min_norm(f.E, f.e, f.G, f.g);
  if (!a) return std::nullopt;
  // Polish on the detected active set: re-solve with the active bounds as
  // equalities and keep the result if it stays feasible.
  const Eigen::VectorXd slack = f.g - f.G * *a;
  std::vector<Eigen::Index> act;
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    if (slack(i) < 1e-7) act.push_back(i);
  }
  Eigen::MatrixXd A(f.E.rows() + static_cast<Eigen::Index>(act.size()), f.E.cols());
  Eigen::VectorXd b(A.rows());
  A.topRows(f.E.rows()) = f.E;
  b.head(f.E.rows()) = f.e;
  for (std::size_t k = 0; k < act.size(); ++k) {
    A.row(f.E.rows() + static_cast<Eigen::Index>(k)) = f.G.row(act[k]);
    b(f.E.rows() + static_cast<Eigen::Index>(k)) = f.g(act[k]);
  }
  const Eigen::VectorXd polished = A.completeOrthogonalDecomposition().solve(b);
  if (violation(f, polished) < violation(f, *a) || violation(f, polished) < 1e-10) {
    return QpResult{polished, true};
  }
  if (violation(f, *a) > 1e-6) return std::nullopt;
  return QpResult{*a, true};
}

}  // namespace

LongitudinalPlan solve_longitudinal(const LongitudinalProblem& p) {
  if (p.segments.empty()) throw std::invalid_argument("solve_longitudinal: no segments");
  for (double s : p.segments) {
    if (!(s > 0.0)) throw std::invalid_argument("solve_longitudinal: segment lengths must be positive");
  }
  const int nk = steps_per_segment(p.T, p.dt);
  const QpForm full = build(p, nk, p.segments.size(), true);
  const auto res = solve(full);
  if (!res) {
    // Name the first waypoint that is out of reach on its own.
    int bad = static_cast<int>(p.segments.size());
    for (std::size_t i = 1; i <= p.segments.size(); ++i) {
      if (!solve(build(p, nk, i, false))) {
        bad = static_cast<int>(i);
        break;
      }
    }
    throw InfeasiblePlan("longitudinal plan infeasible: segment " + std::to_string(bad) + " (S = " +
                             std::to_string(p.segments[static_cast<std::size_t>(bad - 1)]) +
                             " m) cannot be covered within the speed and acceleration bounds",
                         bad);
  }
  LongitudinalPlan plan;
  plan.dt = p.dt;
  plan.steps_per_segment = nk;
  plan.bounds_active = res->bounds_active;
  const auto N = static_cast<std::size_t>(res->a.size());
  plan.accel.assign(res->a.data(), res->a.data() + N);
  plan.s.resize(N + 1);
  plan.v.resize(N + 1);
  plan.s[0] = p.s0;
  plan.v[0] = p.v0;
  for (std::size_t k = 0; k < N; ++k) {
    plan.s[k + 1] = plan.s[k] + plan.v[k] * p.dt;
    plan.v[k + 1] = plan.v[k] + plan.accel[k] * p.dt;
    plan.cost += plan.accel[k] * plan.accel[k];
  }
  plan.constraint_residual = violation(full, res->a);
  return plan;
}

LongitudinalPlan solve_longitudinal(std::span<const double> segments, double v_f,
                                    const VehicleLimits& lim, double T, double dt) {
  LongitudinalProblem p;
  p.segments.assign(segments.begin(), segments.end());
  p.v0 = p.v_end = v_f;
  p.T = T;
  p.dt = dt;
  p.limits = lim;
  return solve_longitudinal(p);
}

LongitudinalPlan replan_on_segment_boundary(std::span<const double> remaining, double s_error,
                                            double v_measured, double v_f,
                                            const VehicleLimits& lim, double T, double dt) {
  LongitudinalProblem p;
  p.segments.assign(remaining.begin(), remaining.end());
  p.s0 = s_error;
  p.v0 = v_measured;
  p.v_end = v_f;
  p.T = T;
  p.dt = dt;
  p.limits = lim;
  return solve_longitudinal(p);
}

LateralErrors lateral_errors(const VehicleState& s, const TrajectorySegment& seg, double preview) {
  LateralErrors out;
  out.closest_u = closest_param(seg, {s.x, s.y});
  const CurveSample c = eval_bezier(seg, out.closest_u);
  const double dx = s.x - c.point.x, dy = s.y - c.point.y;
  // Left normal of the path is (-sin h, cos h); the offset is positive on
  // the other side, matching the clockwise-positive steering convention.
  out.offset = dx * std::sin(c.heading) - dy * std::cos(c.heading);
  const double x_preview = c.point.x + preview;
  const double path_heading =
      x_preview >= seg.control_points[3].x ? 0.0 : eval_bezier(seg, param_at_x(seg, x_preview)).heading;
  out.heading_error = std::remainder(s.theta - model_theta(path_heading), 2 * std::numbers::pi);
  return out;
}

double lateral_control(const VehicleState& s, const TrajectorySegment& seg, const LateralGains& g,
                       const VehicleLimits& lim) {
  const LateralErrors e = lateral_errors(s, seg, g.preview);
  if (std::abs(e.offset) > g.envelope) {
    throw TrackingLost("lateral offset " + std::to_string(e.offset) + " m exceeds the tracking envelope");
  }
  return std::clamp(-g.k_y * e.offset - g.k_theta * e.heading_error, -lim.delta_max, lim.delta_max);
}

std::vector<TrackSample> track_segments(std::span<const TrajectorySegment> segments,
                                        const TrackOptions& opt) {
  std::vector<TrackSample> out;
  if (segments.empty()) return out;
  const double T = segments.front().t_end - segments.front().t_start;
  const int ratio = steps_per_segment(opt.plan_dt, opt.sim_dt);
  const int sim_per_segment = steps_per_segment(T, opt.sim_dt);

  VehicleState st;
  st.x = segments.front().control_points[0].x;
  st.y = segments.front().control_points[0].y;
  st.v = opt.v_f;
  st.theta = model_theta(0.0);

  std::vector<double> lengths, waypoints;
  for (const auto& s : segments) {
    lengths.push_back(s.arc_length);
    if (opt.midpoints) {
      const double half = arc_length_to(s, 0.5);
      waypoints.push_back(half);
      waypoints.push_back(s.arc_length - half);
    } else {
      waypoints.push_back(s.arc_length);
    }
  }

  std::size_t geo = 0;  // segment used for steering and progress
  double done = 0.0;    // arc length of segments before `geo`
  auto progress = [&]() {
    while (geo + 1 < segments.size() && closest_param(segments[geo], {st.x, st.y}) >= 1.0) {
      done += lengths[geo];
      ++geo;
    }
    return done + arc_length_to(segments[geo], closest_param(segments[geo], {st.x, st.y}));
  };

  double waypoint = 0.0;
  double t = segments.front().t_start;
  for (std::size_t n = 0; n < segments.size(); ++n) {
    const double s_now = progress();
    const std::size_t per = opt.midpoints ? 2 : 1;
    const LongitudinalPlan plan =
        replan_on_segment_boundary(std::span(waypoints).subspan(n * per), s_now - waypoint, st.v,
                                   opt.v_f, opt.limits, T / static_cast<double>(per), opt.plan_dt);
    for (int k = 0; k < sim_per_segment; ++k) {
      ControlInput u;
      u.a = plan.accel[static_cast<std::size_t>(k / ratio)];
      u.delta = lateral_control(st, segments[geo], opt.gains, opt.limits);
      const CurveSample c = eval_bezier(segments[geo], closest_param(segments[geo], {st.x, st.y}));
      out.push_back({t, st, u.a, u.delta, std::hypot(st.x - c.point.x, st.y - c.point.y)});
      st = step_bicycle(st, u, opt.sim_dt, opt.limits);
      t += opt.sim_dt;
      progress();
    }
    waypoint += lengths[n];
  }
  const CurveSample c = eval_bezier(segments[geo], closest_param(segments[geo], {st.x, st.y}));
  out.push_back({t, st, 0.0, 0.0, std::hypot(st.x - c.point.x, st.y - c.point.y)});
  return out;
}

}  // namespace fcsim
