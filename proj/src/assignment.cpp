#include "fcsim/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace fcsim {

bool RelativePath::contains(const Frc& p) const {
  return std::find(waypoints.begin(), waypoints.end(), p) != waypoints.end();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// O(n^3) shortest augmenting path with row/column potentials. `allowed`
// masks out cells (used for the lexicographic refinement); returns +inf
// when no perfect matching exists on the allowed cells.
double solve_lap(const CostMatrix& c, const std::vector<char>& allowed, std::vector<int>& match) {
  const std::size_t n = c.size();
  auto cost = [&](std::size_t i, std::size_t j) {
    return allowed[i * n + j] ? c(i, j) : kInf;
  };
  // 1-based arrays; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 == 0 || !std::isfinite(delta)) return kInf;
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  match.assign(n, -1);
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    match[p[j] - 1] = static_cast<int>(j - 1);
    total += c(p[j] - 1, j - 1);
  }
  return total;
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  double scale = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double c = cost(i, j);
      if (!std::isfinite(c) || c < 0.0) {
        throw MalformedInstance("cost matrix entries must be finite and nonnegative");
      }
      scale = std::max(scale, c);
    }
  }
  Assignment out;
  if (n == 0) return out;

  std::vector<char> allowed(n * n, 1);
  std::vector<int> match;
  const double best = solve_lap(cost, allowed, match);
  const double tol = 1e-9 * scale * static_cast<double>(n);

  // Fix vehicles one at a time to the lowest target index that still admits
  // an optimal completion.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!allowed[i * n + j]) continue;
      std::vector<char> trial = allowed;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != j) trial[i * n + k] = 0;
        if (k != i) trial[k * n + j] = 0;
      }
      std::vector<int> m;
      const double c = solve_lap(cost, trial, m);
      if (c <= best + tol) {
        allowed = std::move(trial);
        break;
      }
    }
  }
  out.match.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (allowed[i * n + j]) out.match[i] = static_cast<int>(j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) out.total_cost += cost(i, static_cast<std::size_t>(out.match[i]));
  return out;
}

namespace {

int sgn(int v) { return (v > 0) - (v < 0); }

// Successor order for A*: oblique toward the goal, straight in x toward the
// goal, straight in y toward the goal, then everything else by (dx, dy).
std::vector<RelativeStep> successor_order(const Frc& at, const Frc& goal) {
  const int sx = sgn(goal.x_r - at.x_r);
  const int sy = sgn(goal.y_r - at.y_r);
  std::vector<RelativeStep> order;
  order.reserve(8);
  auto push = [&](RelativeStep s) {
    if (s.dx == 0 && s.dy == 0) return;
    if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
  };
  if (sx != 0 && sy != 0) push({sx, sy});
  if (sx != 0) push({sx, 0});
  if (sy != 0) push({0, sy});
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) push({dx, dy});
  }
  return order;
}

}  // namespace

RelativePath astar_path(const Frc& start, const Frc& goal) {
  RelativePath path;
  if (start == goal) return path;

  struct Node {
    int f;
    int h;
    long seq;
    Frc at;
  };
  auto worse = [](const Node& a, const Node& b) {
    return std::tie(a.f, a.h, a.seq) > std::tie(b.f, b.h, b.seq);
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);
  std::map<Frc, int> g_cost;
  std::map<Frc, Frc> parent;
  long seq = 0;

  g_cost[start] = 0;
  open.push({chebyshev(start, goal), chebyshev(start, goal), seq++, start});
  while (!open.empty()) {
    const Node cur = open.top();
    open.pop();
    if (cur.at == goal) break;
    const int g = g_cost.at(cur.at);
    if (cur.f > g + cur.h) continue;  // stale entry
    for (const RelativeStep& s : successor_order(cur.at, goal)) {
      const Frc nb{cur.at.x_r + s.dx, cur.at.y_r + s.dy};
      if (nb.x_r < 0 || nb.y_r < 0) continue;
      const int ng = g + 1;
      auto it = g_cost.find(nb);
      if (it != g_cost.end() && it->second <= ng) continue;
      g_cost[nb] = ng;
      parent[nb] = cur.at;
      const int h = chebyshev(nb, goal);
      open.push({ng + h, h, seq++, nb});
    }
  }
  for (Frc p = goal; p != start; p = parent.at(p)) path.waypoints.push_back(p);
  std::reverse(path.waypoints.begin(), path.waypoints.end());
  return path;
}

namespace {

// Does vehicle `a` (parking on its target) block the path of vehicle `b`?
// Returns Type1, Type2 or None.
ConflictType blocking(int a, int b, std::span<const Frc> starts,
                      std::span<const RelativePath> paths, std::span<const Frc> targets) {
  const Frc& target_a = targets[static_cast<std::size_t>(a)];
  if (!paths[static_cast<std::size_t>(b)].contains(target_a)) return ConflictType::None;
  const auto steps_a = static_cast<int>(paths[static_cast<std::size_t>(a)].length());
  const int steps_b = chebyshev(starts[static_cast<std::size_t>(b)], target_a);
  return steps_a < steps_b ? ConflictType::Type1 : ConflictType::Type2;
}

}  // namespace

Conflict classify_conflict(int i, int j, std::span<const Frc> starts,
                           std::span<const RelativePath> paths,
                           std::span<const Frc> assigned_targets) {
  const ConflictType ij = blocking(i, j, starts, paths, assigned_targets);
  const ConflictType ji = blocking(j, i, starts, paths, assigned_targets);
  if (ij == ConflictType::Type1) return {ConflictType::Type1, i, j};
  if (ji == ConflictType::Type1) return {ConflictType::Type1, j, i};
  if (ij == ConflictType::Type2) return {ConflictType::Type2, i, j};
  if (ji == ConflictType::Type2) return {ConflictType::Type2, j, i};
  const auto& pi = paths[static_cast<std::size_t>(i)].waypoints;
  for (const Frc& p : pi) {
    if (paths[static_cast<std::size_t>(j)].contains(p)) {
      return {ConflictType::Type3, std::min(i, j), std::max(i, j)};
    }
  }
  return {};
}

std::size_t ConflictReport::count(ConflictType t) const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [t](const Conflict& c) { return c.type == t; }));
}

ConflictReport classify_all(std::span<const Frc> starts, std::span<const RelativePath> paths,
                            std::span<const Frc> assigned_targets) {
  ConflictReport report;
  const auto n = static_cast<int>(starts.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Conflict c = classify_conflict(i, j, starts, paths, assigned_targets);
      if (c.type != ConflictType::None) report.pairs.push_back(c);
    }
  }
  return report;
}

ConflictFreeResult conflict_free_assign(std::span<const Frc> vehicles, std::span<const Frc> targets) {
  const CostMatrix cost = cost_matrix(vehicles, targets);
  const std::size_t n = vehicles.size();

  ConflictFreeResult out;
  out.assignment = hungarian(cost);

  std::vector<Frc> assigned(n);
  out.paths.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    assigned[i] = targets[static_cast<std::size_t>(out.assignment.match[i])];
    out.paths[i] = astar_path(vehicles[i], assigned[i]);
  }

  const std::size_t guard = n * n + 1;
  for (;;) {
    const ConflictReport report = classify_all(vehicles, out.paths, assigned);
    out.type1_trace.push_back(report.count(ConflictType::Type1));
    const auto first = std::find_if(report.pairs.begin(), report.pairs.end(),
                                    [](const Conflict& c) { return c.type == ConflictType::Type1; });
    if (first == report.pairs.end()) break;
    if (static_cast<std::size_t>(out.exchanges) >= guard) {
      throw std::logic_error("conflict-free assignment did not converge");
    }
    const auto a = static_cast<std::size_t>(first->blocker);
    const auto b = static_cast<std::size_t>(first->blocked);
    std::swap(out.assignment.match[a], out.assignment.match[b]);
    std::swap(assigned[a], assigned[b]);
    out.paths[a] = astar_path(vehicles[a], assigned[a]);
    out.paths[b] = astar_path(vehicles[b], assigned[b]);
    ++out.exchanges;
  }

  out.assignment.total_cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.assignment.total_cost += cost(i, static_cast<std::size_t>(out.assignment.match[i]));
  }
  return out;
}

}  // namespace fcsim
