#include "fcsim/rcs_core.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace fcsim {

std::ostream& operator<<(std::ostream& os, const Frc& p) {
  return os << '(' << p.x_r << ',' << p.y_r << ')';
}

std::string to_string(const Frc& p) {
  std::ostringstream os;
  os << p;
  return os.str();
}

std::vector<Frc> generate_targets(const FormationSpec& spec) {
  if (spec.num_lanes < 1 || spec.num_vehicles < 1) {
    throw MalformedInstance("formation needs at least one lane and one vehicle");
  }
  std::vector<Frc> out;
  out.reserve(static_cast<std::size_t>(spec.num_vehicles));
  // Row-major walk over the grid: ascending x_r, then ascending y_r.
  for (int x = 0; static_cast<int>(out.size()) < spec.num_vehicles; ++x) {
    for (int y = 0; y < spec.num_lanes && static_cast<int>(out.size()) < spec.num_vehicles; ++y) {
      if (spec.structure == Structure::Interlaced && (x + y) % 2 != 0) continue;
      out.push_back({x, y});
    }
  }
  return out;
}

double frd(const Frc& a, const Frc& b, double l_s, double l_o) {
  const int dx = std::abs(a.x_r - b.x_r);
  const int dy = std::abs(a.y_r - b.y_r);
  const int oblique = std::min(dx, dy);
  const int straight = std::max(dx, dy) - oblique;
  return l_o * oblique + l_s * straight;
}

CostMatrix::CostMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : n_(rows.size()) {
  data_.reserve(n_ * n_);
  for (const auto& r : rows) {
    if (r.size() != n_) throw MalformedInstance("cost matrix must be square");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

CostMatrix cost_matrix(std::span<const Frc> vehicles, std::span<const Frc> targets, double l_s,
                       double l_o) {
  if (vehicles.size() != targets.size()) {
    std::ostringstream msg;
    msg << "vehicle/target count mismatch: " << vehicles.size() << " vs " << targets.size();
    throw MalformedInstance(msg.str());
  }
  CostMatrix c(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    for (std::size_t j = 0; j < targets.size(); ++j) {
      c(i, j) = frd(vehicles[i], targets[j], l_s, l_o);
    }
  }
  return c;
}

}  // namespace fcsim
