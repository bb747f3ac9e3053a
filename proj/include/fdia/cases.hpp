#ifndef FDIA_CASES_HPP
#define FDIA_CASES_HPP

#include <string>

#include "fdia/grid.hpp"

namespace fdia::cases {

/// Lossless three-bus demo network. Loads are chosen so the DC flows of the
/// demo state (0, -0.0106, -0.0006) rad are roughly reproduced by the AC model.
inline const char* three_bus_json() {
  return R"({
  "id": "demo3",
  "base_mva": 100.0,
  "buses": [
    {"index": 1, "kind": "slack", "p_load": 0.0, "q_load": 0.0, "p_gen": 0.0, "v_setpoint": 1.0},
    {"index": 2, "kind": "pq", "p_load": 1.30, "q_load": 0.20, "p_gen": 0.0, "v_setpoint": 1.0},
    {"index": 3, "kind": "pv", "p_load": 0.0, "q_load": 0.0, "p_gen": 0.90, "v_setpoint": 1.0}
  ],
  "branches": [
    {"from": 1, "to": 2, "r": 0.0, "x": 0.0281, "b_shunt": 0.0},
    {"from": 1, "to": 3, "r": 0.0, "x": 0.0304, "b_shunt": 0.0},
    {"from": 2, "to": 3, "r": 0.0, "x": 0.0108, "b_shunt": 0.0}
  ]
})";
}

/// IEEE 14-bus test system on a 100 MVA base. Line data are the standard
/// published values; transformer taps are neutral and the bus-9 shunt is
/// omitted because the measurement model has no tap or bus-shunt terms.
inline const char* ieee14_json() {
  return R"({
  "id": "ieee14",
  "base_mva": 100.0,
  "buses": [
    {"index": 1,  "kind": "slack", "p_load": 0.0,   "q_load": 0.0,    "p_gen": 2.324, "v_setpoint": 1.060},
    {"index": 2,  "kind": "pv",    "p_load": 0.217, "q_load": 0.127,  "p_gen": 0.400, "v_setpoint": 1.045},
    {"index": 3,  "kind": "pv",    "p_load": 0.942, "q_load": 0.190,  "p_gen": 0.0,   "v_setpoint": 1.010},
    {"index": 4,  "kind": "pq",    "p_load": 0.478, "q_load": -0.039, "p_gen": 0.0,   "v_setpoint": 1.0},
    {"index": 5,  "kind": "pq",    "p_load": 0.076, "q_load": 0.016,  "p_gen": 0.0,   "v_setpoint": 1.0},
    {"index": 6,  "kind": "pv",    "p_load": 0.112, "q_load": 0.075,  "p_gen": 0.0,   "v_setpoint": 1.070},
    {"index": 7,  "kind": "pq",    "p_load": 0.0,   "q_load": 0.0,    "p_gen": 0.0,   "v_setpoint": 1.0},
    {"index": 8,  "kind": "pv",    "p_load": 0.0,   "q_load": 0.0,    "p_gen": 0.0,   "v_setpoint": 1.090},
    {"index": 9,  "kind": "pq",    "p_load": 0.295, "q_load": 0.166,  "p_gen": 0.0,   "v_setpoint": 1.0},
    {"index": 10, "kind": "pq",    "p_load": 0.090, "q_load": 0.058,  "p_gen": 0.0,   "v_setpoint": 1.0},
    {"index": 11, "kind": "pq",    "p_load": 0.035, "q_load": 0.018,  "p_gen": 0.0,   "v_setpoint": 1.0},
    {"index": 12, "kind": "pq",    "p_load": 0.061, "q_load": 0.016,  "p_gen": 0.0,   "v_setpoint": 1.0},
    {"index": 13, "kind": "pq",    "p_load": 0.135, "q_load": 0.058,  "p_gen": 0.0,   "v_setpoint": 1.0},
    {"index": 14, "kind": "pq",    "p_load": 0.149, "q_load": 0.050,  "p_gen": 0.0,   "v_setpoint": 1.0}
  ],
  "branches": [
    {"from": 1,  "to": 2,  "r": 0.01938, "x": 0.05917, "b_shunt": 0.0528},
    {"from": 1,  "to": 5,  "r": 0.05403, "x": 0.22304, "b_shunt": 0.0492},
    {"from": 2,  "to": 3,  "r": 0.04699, "x": 0.19797, "b_shunt": 0.0438},
    {"from": 2,  "to": 4,  "r": 0.05811, "x": 0.17632, "b_shunt": 0.0340},
    {"from": 2,  "to": 5,  "r": 0.05695, "x": 0.17388, "b_shunt": 0.0346},
    {"from": 3,  "to": 4,  "r": 0.06701, "x": 0.17103, "b_shunt": 0.0128},
    {"from": 4,  "to": 5,  "r": 0.01335, "x": 0.04211, "b_shunt": 0.0},
    {"from": 4,  "to": 7,  "r": 0.0,     "x": 0.20912, "b_shunt": 0.0},
    {"from": 4,  "to": 9,  "r": 0.0,     "x": 0.55618, "b_shunt": 0.0},
    {"from": 5,  "to": 6,  "r": 0.0,     "x": 0.25202, "b_shunt": 0.0},
    {"from": 6,  "to": 11, "r": 0.09498, "x": 0.19890, "b_shunt": 0.0},
    {"from": 6,  "to": 12, "r": 0.12291, "x": 0.25581, "b_shunt": 0.0},
    {"from": 6,  "to": 13, "r": 0.06615, "x": 0.13027, "b_shunt": 0.0},
    {"from": 7,  "to": 8,  "r": 0.0,     "x": 0.17615, "b_shunt": 0.0},
    {"from": 7,  "to": 9,  "r": 0.0,     "x": 0.11001, "b_shunt": 0.0},
    {"from": 9,  "to": 10, "r": 0.03181, "x": 0.08450, "b_shunt": 0.0},
    {"from": 9,  "to": 14, "r": 0.12711, "x": 0.27038, "b_shunt": 0.0},
    {"from": 10, "to": 11, "r": 0.08205, "x": 0.19207, "b_shunt": 0.0},
    {"from": 12, "to": 13, "r": 0.22092, "x": 0.19988, "b_shunt": 0.0},
    {"from": 13, "to": 14, "r": 0.17093, "x": 0.34802, "b_shunt": 0.0}
  ]
})";
}

inline GridCase three_bus() { return load_case_string(three_bus_json(), "demo3"); }
inline GridCase ieee14() { return load_case_string(ieee14_json(), "ieee14"); }

/// Resolve a case argument: the embedded names "demo3" / "ieee14", otherwise a file path.
inline GridCase resolve(const std::string& name_or_path) {
  if (name_or_path == "demo3" || name_or_path == "3bus") return three_bus();
  if (name_or_path == "ieee14" || name_or_path == "14bus") return ieee14();
  return load_case(name_or_path);
}

}  // namespace fdia::cases

#endif  // FDIA_CASES_HPP
