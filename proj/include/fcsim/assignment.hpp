#pragma once

// Vehicle-target assignment on the relative grid: optimal 0-1 matching,
// shortest relative paths, conflict classification and the conflict-free
// assignment loop that swaps targets until no vehicle parks on a path that
// another vehicle still has to traverse.

#include <optional>
#include <span>
#include <vector>

#include "fcsim/rcs_core.hpp"

namespace fcsim {

struct Assignment {
  std::vector<int> match;  // vehicle index -> target index
  double total_cost = 0.0;
};

/// Waypoints from the start (exclusive) to the goal (inclusive).
struct RelativePath {
  std::vector<Frc> waypoints;

  std::size_t length() const { return waypoints.size(); }
  bool empty() const { return waypoints.empty(); }
  bool contains(const Frc& p) const;
  friend bool operator==(const RelativePath&, const RelativePath&) = default;
};

/// Minimum-cost perfect matching (Hungarian method with potentials). Among
/// equal-cost optima the lexicographically smallest match vector wins, i.e.
/// lower vehicle indices get lower target indices.
Assignment hungarian(const CostMatrix& cost);

/// Shortest 8-connected grid path by A* with the Chebyshev heuristic. Successors are
/// generated oblique-toward-goal first, then straight in x, then straight in
/// y, then the remaining moves in (dx, dy) order, so the result is
/// reproducible.
RelativePath astar_path(const Frc& start, const Frc& goal);

enum class ConflictType { None = 0, Type1 = 1, Type2 = 2, Type3 = 3 };

struct Conflict {
  ConflictType type = ConflictType::None;
  // For types 1 and 2: `blocker` is the vehicle whose target lies on the
  // path of `blocked`. For type 3 they are just the pair in index order.
  int blocker = -1;
  int blocked = -1;
};

/// Conflict relationship between vehicles i and j. Both orderings are
/// checked; type 1 takes precedence over type 2, which takes precedence over
/// type 3 (plain path overlap).
Conflict classify_conflict(int i, int j, std::span<const Frc> starts,
                           std::span<const RelativePath> paths,
                           std::span<const Frc> assigned_targets);

struct ConflictReport {
  std::vector<Conflict> pairs;

  std::size_t count(ConflictType t) const;
};

ConflictReport classify_all(std::span<const Frc> starts, std::span<const RelativePath> paths,
                            std::span<const Frc> assigned_targets);

struct ConflictFreeResult {
  Assignment assignment;
  std::vector<RelativePath> paths;
  int exchanges = 0;
  // Type-1 pair count before each exchange, plus the final count (0).
  std::vector<std::size_t> type1_trace;
};

/// Hungarian assignment, A* paths, then repeated target exchange of the
/// first type-1 pair found (pairs scanned in ascending (i, j)) until none is
/// left. Only the two exchanged paths are replanned.
ConflictFreeResult conflict_free_assign(std::span<const Frc> vehicles, std::span<const Frc> targets);

}  // namespace fcsim
