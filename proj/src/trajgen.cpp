#include "fcsim/trajgen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>

namespace fcsim {

Pro frc_to_pro(const Frc& frc, int cycle, double head_x0, const RoadParams& road) {
  if (cycle < 0) throw GeometryError("frc_to_pro: negative cycle");
  const double t = cycle * road.T;
  return {head_x0 + road.v_f * t - frc.x_r * road.d_g, (frc.y_r + 0.5) * road.lane_width, t};
}

namespace {

Point2 derivative(const TrajectorySegment& seg, double u) {
  const auto& p = seg.control_points;
  const double w = 1.0 - u;
  const double a = 3 * w * w, b = 6 * w * u, c = 3 * u * u;
  return {a * (p[1].x - p[0].x) + b * (p[2].x - p[1].x) + c * (p[3].x - p[2].x),
          a * (p[1].y - p[0].y) + b * (p[2].y - p[1].y) + c * (p[3].y - p[2].y)};
}

double speed(const TrajectorySegment& seg, double u) {
  const Point2 d = derivative(seg, u);
  return std::hypot(d.x, d.y);
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15 * tol) return left + right + diff / 15;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double integrate_speed(const TrajectorySegment& seg, double u0, double u1) {
  if (u1 <= u0) return 0.0;
  auto f = [&](double u) { return speed(seg, u); };
  const double fa = f(u0), fb = f(u1), fm = f(0.5 * (u0 + u1));
  const double whole = (u1 - u0) / 6 * (fa + 4 * fm + fb);
  const double tol = 1e-10 * std::max(std::abs(whole), 1e-12);
  return simpson(f, u0, u1, fa, fm, fb, whole, tol, 40);
}

}  // namespace

TrajectorySegment bezier_segment(const Pro& start, const Pro& end, double shape_fraction) {
  const double dx = end.x - start.x;
  if (!(dx > 0.0)) {
    throw GeometryError("bezier_segment: end must lie ahead of start (dx = " + std::to_string(dx) + ")");
  }
  if (!(shape_fraction > 0.0 && shape_fraction < 0.5)) {
    throw GeometryError("bezier_segment: shape fraction must lie in (0, 0.5)");
  }
  TrajectorySegment seg;
  seg.control_points = {Point2{start.x, start.y}, Point2{start.x + shape_fraction * dx, start.y},
                        Point2{end.x - shape_fraction * dx, end.y}, Point2{end.x, end.y}};
  seg.t_start = start.t;
  seg.t_end = end.t;
  seg.arc_length = start.y == end.y ? dx : integrate_speed(seg, 0.0, 1.0);
  return seg;
}

CurveSample eval_bezier(const TrajectorySegment& seg, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::out_of_range("eval_bezier: u outside [0, 1]");
  auto lerp = [u](const Point2& a, const Point2& b) {
    return Point2{a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
  };
  const auto& p = seg.control_points;
  const Point2 a = lerp(p[0], p[1]), b = lerp(p[1], p[2]), c = lerp(p[2], p[3]);
  const Point2 d = lerp(a, b), e = lerp(b, c);
  const Point2 d1 = derivative(seg, u);
  return {lerp(d, e), std::atan2(d1.y, d1.x)};
}

double arc_length_to(const TrajectorySegment& seg, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::out_of_range("arc_length_to: u outside [0, 1]");
  if (seg.control_points[0].y == seg.control_points[3].y) return u * seg.arc_length;
  return integrate_speed(seg, 0.0, u);
}

double param_at_x(const TrajectorySegment& seg, double x) {
  const auto& p = seg.control_points;
  if (x <= p[0].x) return 0.0;
  if (x >= p[3].x) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (eval_bezier(seg, mid).point.x < x ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double closest_param(const TrajectorySegment& seg, const Point2& q) {
  // Start from the point with the same x and refine with Newton steps on
  // the squared distance.
  double u = param_at_x(seg, q.x);
  for (int i = 0; i < 8; ++i) {
    const auto& p = seg.control_points;
    const Point2 c = eval_bezier(seg, u).point;
    const Point2 d1 = derivative(seg, u);
    const double w = 1.0 - u;
    const Point2 d2{6 * w * (p[2].x - 2 * p[1].x + p[0].x) + 6 * u * (p[3].x - 2 * p[2].x + p[1].x),
                    6 * w * (p[2].y - 2 * p[1].y + p[0].y) + 6 * u * (p[3].y - 2 * p[2].y + p[1].y)};
    const double g = (c.x - q.x) * d1.x + (c.y - q.y) * d1.y;
    const double h = d1.x * d1.x + d1.y * d1.y + (c.x - q.x) * d2.x + (c.y - q.y) * d2.y;
    if (h <= 0.0) break;
    const double next = std::clamp(u - g / h, 0.0, 1.0);
    if (std::abs(next - u) < 1e-13) break;
    u = next;
  }
  return u;
}

CompiledPlan compile_plan(std::span<const Frc> row, double head_x0, const RoadParams& road,
                          int first_cycle, double shape_fraction) {
  CompiledPlan plan;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (k > 0 && !is_valid_move(row[k - 1], row[k])) {
      throw GeometryError("compile_plan: invalid relative step at column " + std::to_string(k));
    }
    plan.pros.push_back(frc_to_pro(row[k], first_cycle + static_cast<int>(k), head_x0, road));
  }
  for (std::size_t k = 1; k < plan.pros.size(); ++k) {
    plan.segments.push_back(bezier_segment(plan.pros[k - 1], plan.pros[k], shape_fraction));
    plan.lengths.push_back(plan.segments.back().arc_length);
  }
  return plan;
}

void write_trajectory_csv(std::ostream& os, int vehicle, const CompiledPlan& plan, double dt) {
  for (std::size_t n = 0; n < plan.segments.size(); ++n) {
    const auto& seg = plan.segments[n];
    const double span = seg.t_end - seg.t_start;
    const auto steps = static_cast<int>(std::lround(span / dt));
    // The shared boundary point is written once, by the later segment.
    const int last = n + 1 == plan.segments.size() ? steps : steps - 1;
    for (int i = 0; i <= last; ++i) {
      const double u = static_cast<double>(i) / steps;
      const CurveSample c = eval_bezier(seg, u);
      os << vehicle << ',' << seg.t_start + u * span << ',' << c.point.x << ',' << c.point.y << ','
         << c.heading << '\n';
    }
  }
}

}  // namespace fcsim
