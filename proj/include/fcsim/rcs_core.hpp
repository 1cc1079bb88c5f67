#pragma once

// Relative coordinate system (RCS): the discrete grid that moves with a
// formation. x_r counts slots behind the formation head (one slot = d_g
// meters), y_r is the lane index with lane 0 at the bottom of the road.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcsim {

/// Raised when a planner instance is structurally invalid (size mismatch,
/// non-square matrix, ...).
class MalformedInstance : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Frc {
  int x_r = 0;
  int y_r = 0;

  friend constexpr bool operator==(const Frc&, const Frc&) = default;
  friend constexpr auto operator<=>(const Frc&, const Frc&) = default;
};

std::ostream& operator<<(std::ostream& os, const Frc& p);
std::string to_string(const Frc& p);

/// One relative move between two adjacent cycle boundaries. Each component
/// is limited to {-1, 0, 1}.
struct RelativeStep {
  int dx = 0;
  int dy = 0;

  friend constexpr bool operator==(const RelativeStep&, const RelativeStep&) = default;
};

constexpr bool is_valid_step(const RelativeStep& s) {
  return s.dx >= -1 && s.dx <= 1 && s.dy >= -1 && s.dy <= 1;
}

constexpr RelativeStep step_between(const Frc& from, const Frc& to) {
  return {to.x_r - from.x_r, to.y_r - from.y_r};
}

constexpr bool is_valid_move(const Frc& from, const Frc& to) {
  return is_valid_step(step_between(from, to));
}

enum class Structure { Interlaced, Parallel };

struct FormationSpec {
  Structure structure = Structure::Interlaced;
  int num_lanes = 1;
  int num_vehicles = 1;
};

/// Target points of a formation, most forward first. Interlaced formations
/// occupy the checkerboard sublattice (x_r + y_r even); parallel formations
/// fill every point. Ties on x_r go to the lower lane.
std::vector<Frc> generate_targets(const FormationSpec& spec);

/// Formation relative distance: weighted count of oblique and straight grid
/// edges on a shortest 8-connected grid path. With unit weights this is the Chebyshev
/// distance.
double frd(const Frc& a, const Frc& b, double l_s = 1.0, double l_o = 1.0);

/// Integer Chebyshev distance; the unit-weight FRD.
constexpr int chebyshev(const Frc& a, const Frc& b) {
  const int dx = a.x_r > b.x_r ? a.x_r - b.x_r : b.x_r - a.x_r;
  const int dy = a.y_r > b.y_r ? a.y_r - b.y_r : b.y_r - a.y_r;
  return dx > dy ? dx : dy;
}

/// Dense row-major square matrix of assignment costs.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
  CostMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  friend bool operator==(const CostMatrix&, const CostMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// c(i, j) = frd(vehicle_i, target_j, l_s, l_o).
CostMatrix cost_matrix(std::span<const Frc> vehicles, std::span<const Frc> targets,
                       double l_s = 1.0, double l_o = 1.0);

}  // namespace fcsim
