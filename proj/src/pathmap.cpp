#include "fcsim/pathmap.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

namespace fcsim {

RelativePathMap build_map(std::span<const Frc> initials, std::span<const RelativePath> paths) {
  if (initials.size() != paths.size()) {
    throw MalformedInstance("build_map: one path per vehicle required");
  }
  RelativePathMap map;
  std::size_t horizon = 0;
  for (const auto& p : paths) horizon = std::max(horizon, p.length());
  map.rows.reserve(initials.size());
  for (std::size_t v = 0; v < initials.size(); ++v) {
    std::vector<Frc> row;
    row.reserve(horizon + 1);
    row.push_back(initials[v]);
    row.insert(row.end(), paths[v].waypoints.begin(), paths[v].waypoints.end());
    row.resize(horizon + 1, row.back());
    map.rows.push_back(std::move(row));
  }
  return map;
}

std::string to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::RowLength: return "row-length";
    case ViolationKind::InvalidStep: return "invalid-step";
    case ViolationKind::Vertex: return "vertex";
    case ViolationKind::Swap: return "swap";
    case ViolationKind::Cross: return "cross";
  }
  return "unknown";
}

bool sweeps_conflict(const Frc& a0, const Frc& a1, const Frc& b0, const Frc& b1) {
  const double d0x = a0.x_r - b0.x_r, d0y = a0.y_r - b0.y_r;
  const double d1x = a1.x_r - b1.x_r, d1y = a1.y_r - b1.y_r;
  // L1 norm of the relative offset is piecewise linear in tau; its minimum
  // sits at an endpoint or where one component changes sign.
  std::vector<double> taus{0.0, 1.0};
  if (d1x != d0x) taus.push_back(-d0x / (d1x - d0x));
  if (d1y != d0y) taus.push_back(-d0y / (d1y - d0y));
  for (double t : taus) {
    if (t < 0.0 || t > 1.0) continue;
    const double dx = d0x + t * (d1x - d0x);
    const double dy = d0y + t * (d1y - d0y);
    if (std::abs(dx) + std::abs(dy) < 1.0) return true;
  }
  return false;
}

namespace {

struct Collision {
  ViolationKind kind;
  std::size_t step;
  int a;
  int b;
};

// Vertex collision at column s, or a swap/cross on the move (s-1) -> s.
std::optional<ViolationKind> pair_collision(const RelativePathMap& map, std::size_t s, std::size_t a,
                                            std::size_t b) {
  const Frc& a1 = map.rows[a][s];
  const Frc& b1 = map.rows[b][s];
  if (a1 == b1) return ViolationKind::Vertex;
  if (s == 0) return std::nullopt;
  const Frc& a0 = map.rows[a][s - 1];
  const Frc& b0 = map.rows[b][s - 1];
  if (a0 == b0) return std::nullopt;  // reported at s - 1
  if (a0 == b1 && b0 == a1) return ViolationKind::Swap;
  if (sweeps_conflict(a0, a1, b0, b1)) return ViolationKind::Cross;
  return std::nullopt;
}

std::optional<Collision> first_collision(const RelativePathMap& map) {
  const std::size_t n = map.n_vehicles();
  for (std::size_t s = 0; s <= map.n_steps(); ++s) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (auto k = pair_collision(map, s, a, b)) {
          return Collision{*k, s, static_cast<int>(a), static_cast<int>(b)};
        }
      }
    }
  }
  return std::nullopt;
}

void pad_and_trim(RelativePathMap& map) {
  std::size_t len = 0;
  for (const auto& r : map.rows) len = std::max(len, r.size());
  for (auto& r : map.rows) r.resize(len, r.back());
  // A trailing column in which every vehicle repeats its previous FRC is
  // redundant.
  while (len > 1) {
    const bool redundant = std::all_of(map.rows.begin(), map.rows.end(), [len](const auto& r) {
      return r[len - 1] == r[len - 2];
    });
    if (!redundant) break;
    for (auto& r : map.rows) r.pop_back();
    --len;
  }
}

// Index at which a hold must be inserted so that `row` keeps its position
// from before the move that carries it into column s. Zero when the vehicle
// has not moved at all up to s.
std::size_t hold_point(const std::vector<Frc>& row, std::size_t s) {
  std::size_t m = s;
  while (m >= 1 && row[m - 1] == row[m]) --m;
  return m;
}

void insert_hold(std::vector<Frc>& row, std::size_t at) {
  const Frc keep = row[at - 1];
  row.insert(row.begin() + static_cast<std::ptrdiff_t>(at), keep);
}

std::optional<std::size_t> pair_first_collision(const RelativePathMap& map, std::size_t a,
                                                std::size_t b) {
  for (std::size_t s = 0; s <= map.n_steps(); ++s) {
    if (pair_collision(map, s, a, b)) return s;
  }
  return std::nullopt;
}

// True when `cell` appears in the row at or after column s.
bool must_cross(const std::vector<Frc>& row, std::size_t s, const Frc& cell) {
  return std::find(row.begin() + static_cast<std::ptrdiff_t>(s), row.end(), cell) != row.end();
}


// Rows with consecutive duplicates removed: the cells each vehicle visits.
std::vector<Frc> waypoints_of(const std::vector<Frc>& row) {
  std::vector<Frc> w;
  for (const Frc& p : row) {
    if (w.empty() || w.back() != p) w.push_back(p);
  }
  return w;
}

const Frc& cell_at(const std::vector<Frc>& row, std::size_t t) {
  return t < row.size() ? row[t] : row.back();
}

bool move_collides(const Frc& a0, const Frc& a1, const Frc& b0, const Frc& b1) {
  if (a1 == b1) return true;
  if (a0 == b0) return false;
  if (a0 == b1 && b0 == a1) return true;
  return sweeps_conflict(a0, a1, b0, b1);
}

// Index of the first committed row that the move a0 -> a1 over (t-1, t)
// collides with, or -1.
int blocking_row(const std::vector<std::vector<Frc>>& rows, const std::vector<int>& committed,
                 const Frc& a0, const Frc& a1, std::size_t t) {
  for (int v : committed) {
    const auto& r = rows[static_cast<std::size_t>(v)];
    if (move_collides(a0, a1, cell_at(r, t - 1), cell_at(r, t))) return v;
  }
  return -1;
}

// Order in which vehicles are committed by the sequential planner: a vehicle
// that must pass another's start or target goes after the vehicle starting
// there and before the vehicle parking there; remaining ties (and cycles)
// go to the vehicle with the longer trip.
std::vector<int> commit_order(const std::vector<std::vector<Frc>>& ways, std::span<const Frc> targets) {
  const std::size_t n = ways.size();
  std::vector<std::vector<char>> before(n, std::vector<char>(n, 0));  // before[i][j]: i before j
  auto on_path = [&](std::size_t v, const Frc& cell) {
    return std::find(ways[v].begin() + 1, ways[v].end(), cell) != ways[v].end();
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (on_path(j, ways[i].front())) before[i][j] = 1;
      if (on_path(i, targets[j])) before[i][j] = 1;
    }
  }
  std::vector<int> order;
  std::vector<char> done(n, 0);
  auto rank = [&](std::size_t v) {
    return std::make_pair(-static_cast<int>(ways[v].size()), static_cast<int>(v));
  };
  while (order.size() < n) {
    int pick = -1;
    for (int pass = 0; pass < 2 && pick < 0; ++pass) {
      for (std::size_t v = 0; v < n; ++v) {
        if (done[v]) continue;
        bool free = true;
        for (std::size_t u = 0; pass == 0 && u < n; ++u) {
          if (!done[u] && u != v && before[u][v]) free = false;
        }
        if (free && (pick < 0 || rank(v) < rank(static_cast<std::size_t>(pick)))) {
          pick = static_cast<int>(v);
        }
      }
    }
    done[static_cast<std::size_t>(pick)] = 1;
    order.push_back(pick);
  }
  return order;
}

// Commit vehicles one at a time; each one follows its own waypoints and
// waits (breadth-first over time) around the rows already committed.
RelativePathMap sequential_resolve(const RelativePathMap& input, std::span<const Frc> targets,
                                   std::vector<HoldEvent>* trace) {
  const std::size_t n = input.n_vehicles();
  std::vector<std::vector<Frc>> ways(n);
  for (std::size_t v = 0; v < n; ++v) ways[v] = waypoints_of(input.rows[v]);
  RelativePathMap out;
  out.rows.resize(n);
  std::vector<int> committed;
  std::vector<HoldEvent> events;
  std::size_t horizon = 1;
  for (int v : commit_order(ways, targets)) {
    const auto& w = ways[static_cast<std::size_t>(v)];
    const std::size_t m = w.size() - 1;
    const std::size_t t_max = horizon + m + 1;
    // reach[t][k]: parent waypoint index + 1 at t - 1, 0 when unreachable.
    std::vector<std::vector<std::size_t>> reach(t_max + 1, std::vector<std::size_t>(m + 1, 0));
    reach[0][0] = 1;
    auto parked_ok = [&](std::size_t t) {
      for (std::size_t u = t + 1; u <= horizon; ++u) {
        if (blocking_row(out.rows, committed, w[m], w[m], u) >= 0) return false;
      }
      return true;
    };
    std::size_t finish = 0;
    bool found = m == 0 ? parked_ok(0) : false;
    for (std::size_t t = 1; t <= t_max && !found; ++t) {
      for (std::size_t k = 0; k <= m; ++k) {
        for (std::size_t from : {k, k == 0 ? k : k - 1}) {
          if (!reach[t - 1][from] || reach[t][k]) continue;
          if (blocking_row(out.rows, committed, w[from], w[k], t) >= 0) continue;
          reach[t][k] = from + 1;
        }
      }
      if (reach[t][m] && parked_ok(t)) {
        finish = t;
        found = true;
      }
    }
    if (!found) {
      throw UnresolvableMap("vehicle " + std::to_string(v + 1) +
                            " cannot reach its target around the vehicles already planned");
    }
    std::vector<Frc> row(finish + 1);
    for (std::size_t t = finish, k = m; ; --t) {
      row[t] = w[k];
      if (t == 0) break;
      const std::size_t from = reach[t][k] - 1;
      if (from == k) {
        const int by = k < m ? blocking_row(out.rows, committed, w[k], w[k + 1], t) : -1;
        events.push_back({t, t, v, by, 0, 0, ViolationKind::Vertex, false, true});
      }
      k = from;
    }
    horizon = std::max(horizon, row.size());
    out.rows[static_cast<std::size_t>(v)] = std::move(row);
    committed.push_back(v);
  }
  pad_and_trim(out);
  if (trace) trace->insert(trace->end(), events.begin(), events.end());
  return out;
}

}  // namespace

std::vector<Violation> verify_map(const RelativePathMap& map) {
  std::vector<Violation> out;
  if (map.rows.empty()) return out;
  const std::size_t len = map.rows.front().size();
  bool lengths_ok = true;
  for (std::size_t v = 0; v < map.rows.size(); ++v) {
    if (map.rows[v].size() != len || map.rows[v].empty()) {
      out.push_back({ViolationKind::RowLength, map.rows[v].size(), static_cast<int>(v), -1});
      lengths_ok = false;
    }
  }
  if (!lengths_ok || len == 0) return out;
  for (std::size_t v = 0; v < map.rows.size(); ++v) {
    for (std::size_t s = 1; s < len; ++s) {
      if (!is_valid_move(map.rows[v][s - 1], map.rows[v][s])) {
        out.push_back({ViolationKind::InvalidStep, s, static_cast<int>(v), -1});
      }
    }
  }
  for (std::size_t s = 0; s < len; ++s) {
    for (std::size_t a = 0; a < map.rows.size(); ++a) {
      for (std::size_t b = a + 1; b < map.rows.size(); ++b) {
        if (auto k = pair_collision(map, s, a, b)) {
          out.push_back({*k, s, static_cast<int>(a), static_cast<int>(b)});
        }
      }
    }
  }
  return out;
}

RelativePathMap resolve_map(const RelativePathMap& input, std::span<const Frc> targets,
                            std::vector<HoldEvent>* trace) {
  if (targets.size() != input.n_vehicles()) {
    throw MalformedInstance("resolve_map: one target per vehicle required");
  }
  for (std::size_t v = 0; v < input.n_vehicles(); ++v) {
    if (input.rows[v].empty() || input.rows[v].back() != targets[v]) {
      throw MalformedInstance("resolve_map: row " + std::to_string(v + 1) +
                              " does not end on its target");
    }
  }
  RelativePathMap map = input;
  pad_and_trim(map);
  if (map.n_vehicles() == 0) return map;
  for (std::size_t a = 0; a < map.n_vehicles(); ++a) {
    for (std::size_t b = a + 1; b < map.n_vehicles(); ++b) {
      if (map.rows[a].front() == map.rows[b].front()) {
        throw UnresolvableMap("vehicles " + std::to_string(a + 1) + " and " +
                              std::to_string(b + 1) + " share an initial FRC");
      }
    }
  }
  const std::size_t budget = map.n_vehicles() * std::max<std::size_t>(map.n_steps(), 1) * 4;
  std::vector<HoldEvent> events;

  while (auto c = first_collision(map)) {
    // Pairwise holds can cycle among three or more vehicles; past the budget
    // the map is replanned sequentially from the input.
    if (events.size() >= budget) return sequential_resolve(input, targets, trace);
    const auto a = static_cast<std::size_t>(c->a);
    const auto b = static_cast<std::size_t>(c->b);
    // Priority is fixed by the initial distance to target: the vehicle that
    // is closer waits (ties: lower index waits).
    const int rem_a = chebyshev(map.rows[a].front(), targets[a]);
    const int rem_b = chebyshev(map.rows[b].front(), targets[b]);
    std::size_t waiter = rem_a <= rem_b ? a : b;
    std::size_t other = waiter == a ? b : a;
    bool overridden = false;
    std::size_t at = hold_point(map.rows[waiter], c->step);
    // A vehicle whose target still lies ahead on the other's row has to wait
    // until the other has passed, however far back that pushes it.
    const bool waiter_blocks = must_cross(map.rows[other], c->step - 1, targets[waiter]);
    const bool other_blocks = must_cross(map.rows[waiter], c->step - 1, targets[other]);
    bool swap_roles = at == 0 || (other_blocks && !waiter_blocks);
    if (!swap_roles && !waiter_blocks && hold_point(map.rows[other], c->step) != 0) {
      // A hold that just moves the same pair's collision earlier (the other
      // vehicle drives into the cell the waiter keeps) is no progress.
      RelativePathMap trial = map;
      insert_hold(trial.rows[waiter], at);
      pad_and_trim(trial);
      const auto again = pair_first_collision(trial, a, b);
      swap_roles = again && *again <= c->step;
    }
    if (swap_roles) {
      std::swap(waiter, other);
      overridden = true;
      at = hold_point(map.rows[waiter], c->step);
      if (at == 0) return sequential_resolve(input, targets, trace);
    }
    insert_hold(map.rows[waiter], at);
    events.push_back({c->step, at, static_cast<int>(waiter), static_cast<int>(other),
                      waiter == a ? rem_a : rem_b, waiter == a ? rem_b : rem_a, c->kind, overridden,
                      false});
    pad_and_trim(map);
  }
  if (trace) trace->insert(trace->end(), events.begin(), events.end());
  return map;
}

void write_map(std::ostream& os, const RelativePathMap& map) {
  os << "# relative path map: " << map.n_vehicles() << " vehicles, " << map.n_steps()
     << " steps\n";
  for (std::size_t v = 0; v < map.rows.size(); ++v) {
    os << v + 1;
    for (const Frc& p : map.rows[v]) os << ' ' << p;
    os << '\n';
  }
}

std::string format_map(const RelativePathMap& map) {
  std::ostringstream os;
  write_map(os, map);
  return os.str();
}

RelativePathMap parse_map(std::istream& is) {
  RelativePathMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::size_t id = 0;
    if (!(ls >> id) || id != map.rows.size() + 1) {
      throw std::invalid_argument("path map line " + std::to_string(lineno) +
                                  ": expected vehicle id " + std::to_string(map.rows.size() + 1));
    }
    std::vector<Frc> row;
    char open = 0, comma = 0, close = 0;
    Frc p;
    while (ls >> open) {
      if (open != '(' || !(ls >> p.x_r >> comma >> p.y_r >> close) || comma != ',' ||
          close != ')') {
        throw std::invalid_argument("path map line " + std::to_string(lineno) +
                                    ": malformed cell");
      }
      row.push_back(p);
    }
    if (row.empty()) {
      throw std::invalid_argument("path map line " + std::to_string(lineno) + ": empty row");
    }
    map.rows.push_back(std::move(row));
  }
  return map;
}

RelativePathMap parse_map(const std::string& text) {
  std::istringstream is(text);
  return parse_map(is);
}

}  // namespace fcsim
