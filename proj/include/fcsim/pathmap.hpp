#pragma once

// Relative path map: one row per vehicle holding its FRC at every planning
// step, padded to a common horizon. Collisions are resolved by making the
// vehicle that is closer to its target hold its previous position.

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcsim/assignment.hpp"
#include "fcsim/rcs_core.hpp"

namespace fcsim {

class UnresolvableMap : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RelativePathMap {
  // rows[v] = {initial, step 1, ..., step n_steps}
  std::vector<std::vector<Frc>> rows;

  std::size_t n_vehicles() const { return rows.size(); }
  std::size_t n_steps() const { return rows.empty() ? 0 : rows.front().size() - 1; }
  const Frc& at(std::size_t vehicle, std::size_t step) const { return rows[vehicle][step]; }

  friend bool operator==(const RelativePathMap&, const RelativePathMap&) = default;
};

/// Rows are {initial, path...}; short rows are padded with their final FRC.
RelativePathMap build_map(std::span<const Frc> initials, std::span<const RelativePath> paths);

enum class ViolationKind {
  RowLength,    // row shorter or longer than the others
  InvalidStep,  // consecutive cells not 8-connected neighbours
  Vertex,       // two vehicles on one FRC at the same step
  Swap,         // two vehicles exchange FRCs across one step
  Cross,        // moves whose straight-line sweeps come within one grid unit (L1)
};

std::string to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::size_t step;  // column where the offending state or move ends
  int a;
  int b;  // -1 for single-vehicle violations

  friend bool operator==(const Violation&, const Violation&) = default;
};

std::vector<Violation> verify_map(const RelativePathMap& map);

/// True when the straight-line relative motions a0->a1 and b0->b1 over the
/// same step bring the two vehicles closer than one grid unit in L1 norm.
bool sweeps_conflict(const Frc& a0, const Frc& a1, const Frc& b0, const Frc& b1);

struct HoldEvent {
  std::size_t collision_step;
  std::size_t inserted_at;
  int waiter;
  int other;                 // -1 when no single vehicle forced the hold
  int waiter_remaining;      // initial Chebyshev distance to target
  int other_remaining;
  ViolationKind kind;
  bool priority_overridden;  // the designated waiter could not usefully hold
  bool sequential;           // produced by the sequential fallback planner
};

/// Insert hold steps until the map verifies clean. Collisions are handled
/// earliest first; of the two vehicles, the one that starts closer to its
/// target waits (ties: lower index), unless its target lies ahead on the
/// other's row or its hold would only pull the collision earlier. If these
/// pairwise holds have not converged after vehicles * steps * 4 holds, the
/// input is replanned by committing vehicles one at a time, each waiting
/// around the ones already committed. Throws UnresolvableMap if two vehicles
/// share an initial FRC or the sequential planner finds no schedule.
RelativePathMap resolve_map(const RelativePathMap& map, std::span<const Frc> targets,
                            std::vector<HoldEvent>* trace = nullptr);

/// Text table: one line per vehicle, "<id> (x,y) (x,y) ...", ids from 1.
/// Lines starting with '#' are comments.
void write_map(std::ostream& os, const RelativePathMap& map);
std::string format_map(const RelativePathMap& map);
RelativePathMap parse_map(std::istream& is);
RelativePathMap parse_map(const std::string& text);

}  // namespace fcsim
