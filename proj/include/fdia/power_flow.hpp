#ifndef FDIA_POWER_FLOW_HPP
#define FDIA_POWER_FLOW_HPP

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fdia/common.hpp"
#include "fdia/grid.hpp"

namespace fdia {

/// Bus voltage magnitudes and angles (radians). theta[reference] is 0 for solved states.
struct StateVector {
  Vector v;
  Vector theta;
  int reference = 0;

  int size() const { return static_cast<int>(v.size()); }
};

inline StateVector flat_state(const GridCase& c) {
  StateVector s;
  s.v = Vector::Ones(c.n_bus());
  s.theta = Vector::Zero(c.n_bus());
  s.reference = c.slack_bus();
  for (int i = 0; i < c.n_bus(); ++i)
    if (c.buses()[i].kind != BusKind::pq) s.v[i] = c.buses()[i].v_setpoint;
  return s;
}

/// Describes the measurement ordering: [P_inj(n_bus), Q_inj(n_bus), p_flow(n_branch), q_flow(n_branch)],
/// flows metered at the from-end of each branch.
struct MeasurementLayout {
  int n_bus = 0;
  int n_branch = 0;
  /// Branch endpoint list in external ids, "1-2,1-5,...".
  std::string topology;

  int size() const { return 2 * n_bus + 2 * n_branch; }
  int p_inj_offset() const { return 0; }
  int q_inj_offset() const { return n_bus; }
  int p_flow_offset() const { return 2 * n_bus; }
  int q_flow_offset() const { return 2 * n_bus + n_branch; }

  std::uint64_t fingerprint() const {
    return fnv1a(std::to_string(n_bus) + "/" + std::to_string(n_branch) + "/" + topology);
  }

  bool operator==(const MeasurementLayout&) const = default;
};

inline MeasurementLayout measurement_layout(const GridCase& c) {
  MeasurementLayout l;
  l.n_bus = c.n_bus();
  l.n_branch = c.n_branch();
  std::ostringstream os;
  bool first = true;
  for (const auto& br : c.external_branches()) {
    if (!first) os << ',';
    first = false;
    os << br.from_bus << '-' << br.to_bus;
  }
  l.topology = os.str();
  return l;
}

struct MeasurementVector {
  Vector values;
  MeasurementLayout layout;

  auto p_inj() const { return values.segment(layout.p_inj_offset(), layout.n_bus); }
  auto q_inj() const { return values.segment(layout.q_inj_offset(), layout.n_bus); }
  auto p_flow() const { return values.segment(layout.p_flow_offset(), layout.n_branch); }
  auto q_flow() const { return values.segment(layout.q_flow_offset(), layout.n_branch); }
};

enum class NoiseDistribution { uniform_bounded, gaussian };

/// Relative measurement noise: sigma is a fraction of each measurement's magnitude.
struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
  NoiseDistribution distribution = NoiseDistribution::uniform_bounded;
};

// ---------------------------------------------------------------------------
// Measurement function h(x) and its Jacobian

namespace detail {

/// Power flowing out of bus i into the line towards j, pi model.
struct EndFlow {
  double p, q;
  // partials w.r.t. theta_i, theta_j, v_i, v_j
  double dp_dti, dp_dtj, dp_dvi, dp_dvj;
  double dq_dti, dq_dtj, dq_dvi, dq_dvj;
};

inline EndFlow end_flow(double vi, double vj, double ti, double tj, double g, double b,
                        double half_shunt) {
  const double t = ti - tj;
  const double c = std::cos(t), s = std::sin(t);
  const double gc_bs = g * c + b * s;
  const double gs_bc = g * s - b * c;
  EndFlow f{};
  f.p = vi * vi * g - vi * vj * gc_bs;
  f.q = -vi * vi * (b + half_shunt) - vi * vj * gs_bc;
  f.dp_dti = vi * vj * gs_bc;
  f.dp_dtj = -f.dp_dti;
  f.dp_dvi = 2.0 * vi * g - vj * gc_bs;
  f.dp_dvj = -vi * gc_bs;
  f.dq_dti = -vi * vj * gc_bs;
  f.dq_dtj = -f.dq_dti;
  f.dq_dvi = -2.0 * vi * (b + half_shunt) - vj * gs_bc;
  f.dq_dvj = -vi * gs_bc;
  return f;
}

inline void check_state(const GridCase& c, const StateVector& x) {
  if (x.v.size() != c.n_bus() || x.theta.size() != c.n_bus())
    throw DataError("state dimension does not match case");
}

}  // namespace detail

/// Noiseless measurements h(x) in the canonical layout.
inline Vector measurement_function(const GridCase& c, const StateVector& x) {
  detail::check_state(c, x);
  const int n = c.n_bus(), nb = c.n_branch();
  Vector z = Vector::Zero(2 * n + 2 * nb);
  const auto& brs = c.branches();
  for (int k = 0; k < nb; ++k) {
    const auto& br = brs[k];
    const auto y = series_admittance(br);
    const int i = br.from_bus, j = br.to_bus;
    const auto fwd = detail::end_flow(x.v[i], x.v[j], x.theta[i], x.theta[j], y.g, y.b, 0.5 * br.b_shunt);
    const auto rev = detail::end_flow(x.v[j], x.v[i], x.theta[j], x.theta[i], y.g, y.b, 0.5 * br.b_shunt);
    z[i] += fwd.p;
    z[n + i] += fwd.q;
    z[j] += rev.p;
    z[n + j] += rev.q;
    z[2 * n + k] = fwd.p;
    z[2 * n + nb + k] = fwd.q;
  }
  return z;
}

/// Jacobian of h with respect to [theta_0..theta_{n-1}, v_0..v_{n-1}].
inline Matrix measurement_jacobian(const GridCase& c, const StateVector& x) {
  detail::check_state(c, x);
  const int n = c.n_bus(), nb = c.n_branch();
  Matrix J = Matrix::Zero(2 * n + 2 * nb, 2 * n);
  const auto& brs = c.branches();
  for (int k = 0; k < nb; ++k) {
    const auto& br = brs[k];
    const auto y = series_admittance(br);
    const int i = br.from_bus, j = br.to_bus;
    const auto fwd = detail::end_flow(x.v[i], x.v[j], x.theta[i], x.theta[j], y.g, y.b, 0.5 * br.b_shunt);
    const auto rev = detail::end_flow(x.v[j], x.v[i], x.theta[j], x.theta[i], y.g, y.b, 0.5 * br.b_shunt);
    auto add = [&](int row, int a, int b, double dta, double dtb, double dva, double dvb) {
      J(row, a) += dta;
      J(row, b) += dtb;
      J(row, n + a) += dva;
      J(row, n + b) += dvb;
    };
    add(i, i, j, fwd.dp_dti, fwd.dp_dtj, fwd.dp_dvi, fwd.dp_dvj);
    add(n + i, i, j, fwd.dq_dti, fwd.dq_dtj, fwd.dq_dvi, fwd.dq_dvj);
    add(j, j, i, rev.dp_dti, rev.dp_dtj, rev.dp_dvi, rev.dp_dvj);
    add(n + j, j, i, rev.dq_dti, rev.dq_dtj, rev.dq_dvi, rev.dq_dvj);
    add(2 * n + k, i, j, fwd.dp_dti, fwd.dp_dtj, fwd.dp_dvi, fwd.dp_dvj);
    add(2 * n + nb + k, i, j, fwd.dq_dti, fwd.dq_dtj, fwd.dq_dvi, fwd.dq_dvj);
  }
  return J;
}

/// Flow entering the line at its to-end, i.e. the to-end counterpart of the metered from-end flow.
inline std::pair<Vector, Vector> to_end_flows(const GridCase& c, const StateVector& x) {
  const int nb = c.n_branch();
  Vector p(nb), q(nb);
  for (int k = 0; k < nb; ++k) {
    const auto& br = c.branches()[k];
    const auto y = series_admittance(br);
    const int i = br.from_bus, j = br.to_bus;
    const auto rev = detail::end_flow(x.v[j], x.v[i], x.theta[j], x.theta[i], y.g, y.b, 0.5 * br.b_shunt);
    p[k] = rev.p;
    q[k] = rev.q;
  }
  return {p, q};
}

/// Add relative noise to a measurement vector in place.
inline void add_noise(Vector& z, const NoiseSpec& noise) {
  if (noise.sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
  if (noise.sigma == 0.0) return;
  Rng rng(noise.seed);
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double scale = noise.sigma * std::abs(z[k]);
    if (noise.distribution == NoiseDistribution::uniform_bounded)
      z[k] += scale * (2.0 * rng.uniform() - 1.0);
    else
      z[k] += scale * rng.normal();
  }
}

inline MeasurementVector measure(const GridCase& c, const StateVector& x, const NoiseSpec& noise) {
  MeasurementVector m;
  m.layout = measurement_layout(c);
  m.values = measurement_function(c, x);
  add_noise(m.values, noise);
  return m;
}

// ---------------------------------------------------------------------------
// Newton-Raphson power flow

struct PowerFlowOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;
  double accept = 1e-8;
};

struct PowerFlowResult {
  StateVector state;
  int iterations = 0;
  double mismatch = 0.0;
};

/// Per-bus load pair used to drive the solver; index = internal bus index.
struct BusLoads {
  Vector p;
  Vector q;
};

inline BusLoads case_loads(const GridCase& c) {
  BusLoads l{Vector(c.n_bus()), Vector(c.n_bus())};
  for (int i = 0; i < c.n_bus(); ++i) {
    l.p[i] = c.buses()[i].p_load;
    l.q[i] = c.buses()[i].q_load;
  }
  return l;
}

namespace detail {

inline void pf_unknowns(const GridCase& c, std::vector<int>& angle_buses, std::vector<int>& vmag_buses) {
  angle_buses.clear();
  vmag_buses.clear();
  for (int i = 0; i < c.n_bus(); ++i) {
    const auto kind = c.buses()[i].kind;
    if (kind != BusKind::slack) angle_buses.push_back(i);
    if (kind == BusKind::pq) vmag_buses.push_back(i);
  }
}

inline Vector pf_mismatch(const GridCase& c, const BusLoads& loads, const Vector& h,
                          const std::vector<int>& angle_buses, const std::vector<int>& vmag_buses) {
  const int n = c.n_bus();
  Vector f(angle_buses.size() + vmag_buses.size());
  int r = 0;
  for (int i : angle_buses) f[r++] = (c.buses()[i].p_gen - loads.p[i]) - h[i];
  for (int i : vmag_buses) f[r++] = -loads.q[i] - h[n + i];
  return f;
}

}  // namespace detail

/// Solve the AC power flow from a flat start. PV buses hold their setpoint magnitude;
/// reactive limits are not enforced.
inline PowerFlowResult solve_power_flow_detailed(const GridCase& c, const BusLoads& loads,
                                                 const PowerFlowOptions& opt = {}) {
  const int n = c.n_bus();
  if (loads.p.size() != n || loads.q.size() != n)
    throw DataError("load vector dimension does not match case");
  if (!loads.p.allFinite() || !loads.q.allFinite()) throw DataError("non-finite loads");

  std::vector<int> angle_buses, vmag_buses;
  detail::pf_unknowns(c, angle_buses, vmag_buses);
  PowerFlowResult res;
  res.state = flat_state(c);
  auto& x = res.state;

  Vector f = detail::pf_mismatch(c, loads, measurement_function(c, x), angle_buses, vmag_buses);
  double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
  while (norm >= opt.tolerance && res.iterations < opt.max_iterations) {
    const Matrix full = measurement_jacobian(c, x);
    const int m = static_cast<int>(f.size());
    Matrix J(m, m);
    std::vector<int> rows, cols;
    for (int i : angle_buses) rows.push_back(i);
    for (int i : vmag_buses) rows.push_back(n + i);
    for (int i : angle_buses) cols.push_back(i);
    for (int i : vmag_buses) cols.push_back(n + i);
    for (int r = 0; r < m; ++r)
      for (int k = 0; k < m; ++k) J(r, k) = full(rows[r], cols[k]);

    Eigen::PartialPivLU<Matrix> lu(J);
    if (!(lu.rcond() > 1e-14))
      throw NumericalError("power flow: singular Jacobian at iteration " + std::to_string(res.iterations));
    const Vector dx = lu.solve(f);
    int r = 0;
    for (int i : angle_buses) x.theta[i] += dx[r++];
    for (int i : vmag_buses) x.v[i] += dx[r++];
    ++res.iterations;

    f = detail::pf_mismatch(c, loads, measurement_function(c, x), angle_buses, vmag_buses);
    norm = f.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(norm) || norm > 1e6 || (x.v.array() <= 0.0).any()) break;
  }
  res.mismatch = norm;
  if (!(norm < opt.accept)) {
    std::ostringstream os;
    os << "power flow did not converge after " << res.iterations
       << " iterations (final mismatch " << norm << ")";
    throw NumericalError(os.str());
  }
  return res;
}

inline StateVector solve_power_flow(const GridCase& c, const BusLoads& loads,
                                    const PowerFlowOptions& opt = {}) {
  return solve_power_flow_detailed(c, loads, opt).state;
}

// ---------------------------------------------------------------------------
// DC model

/// One row per metered branch: +1/X at the from bus, -1/X at the to bus.
inline Matrix dc_measurement_matrix(const GridCase& c, const std::vector<int>& meter_set) {
  Matrix H = Matrix::Zero(static_cast<Eigen::Index>(meter_set.size()), c.n_bus());
  for (std::size_t r = 0; r < meter_set.size(); ++r) {
    const int k = meter_set[r];
    if (k < 0 || k >= c.n_branch()) throw DataError("meter references unknown branch " + std::to_string(k));
    const auto& br = c.branches()[k];
    H(r, br.from_bus) += 1.0 / br.x;
    H(r, br.to_bus) -= 1.0 / br.x;
  }
  return H;
}

inline Matrix dc_measurement_matrix(const GridCase& c) {
  std::vector<int> all(c.n_branch());
  for (int k = 0; k < c.n_branch(); ++k) all[k] = k;
  return dc_measurement_matrix(c, all);
}

}  // namespace fdia

#endif  // FDIA_POWER_FLOW_HPP
