#ifndef FDIA_ATTACK_HPP
#define FDIA_ATTACK_HPP

#include <set>
#include <string>

#include "fdia/common.hpp"
#include "fdia/grid.hpp"
#include "fdia/power_flow.hpp"

namespace fdia {

/// Which state components an attack scales at its target buses.
enum class AttackMode { angle_only, magnitude_and_angle };

struct AttackSpec {
  /// External bus ids.
  std::set<int> target_buses;
  /// Relative intensity gamma: a targeted component s becomes s * (1 + gamma).
  double intensity = 0.1;
  std::uint64_t seed = 0;
  AttackMode mode = AttackMode::angle_only;
};

/// State offset c and measurement offset a = h(x + c) - h(x).
struct AttackVector {
  Vector a;
  StateVector c;
  MeasurementLayout layout;
};

/// Attack for an explicit state offset (theta/v deltas in c).
inline AttackVector attack_from_offset(const GridCase& grid, const StateVector& x, const StateVector& c) {
  if (c.v.size() != x.v.size() || c.theta.size() != x.theta.size())
    throw DataError("attack offset dimension does not match state");
  StateVector shifted = x;
  shifted.v += c.v;
  shifted.theta += c.theta;
  AttackVector out;
  out.c = c;
  out.layout = measurement_layout(grid);
  out.a = measurement_function(grid, shifted) - measurement_function(grid, x);
  return out;
}

/// Stealthy attack: scale the target buses' state entries and map the shift through
/// the case's own measurement function.
inline AttackVector construct_attack(const GridCase& grid, const StateVector& x, const AttackSpec& spec) {
  if (spec.target_buses.empty()) throw std::invalid_argument("attack needs at least one target bus");
  if (!(spec.intensity > 0.0)) throw std::invalid_argument("attack intensity must be positive");
  StateVector c;
  c.v = Vector::Zero(grid.n_bus());
  c.theta = Vector::Zero(grid.n_bus());
  c.reference = x.reference;
  for (int ext : spec.target_buses) {
    const int i = grid.internal_index(ext);
    if (i == grid.slack_bus())
      throw std::invalid_argument("attack target bus " + std::to_string(ext) + " is the slack bus");
    c.theta[i] = x.theta[i] * spec.intensity;
    if (spec.mode == AttackMode::magnitude_and_angle) c.v[i] = x.v[i] * spec.intensity;
  }
  return attack_from_offset(grid, x, c);
}

inline MeasurementVector apply_attack(const MeasurementVector& z, const AttackVector& a) {
  if (!(z.layout == a.layout)) throw DataError("attack layout does not match measurement layout");
  MeasurementVector out = z;
  out.values += a.a;
  return out;
}

}  // namespace fdia

#endif  // FDIA_ATTACK_HPP
