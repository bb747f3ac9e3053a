#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "fdia/attack.hpp"
#include "fdia/cases.hpp"
#include "fdia/estimation.hpp"

using Catch::Approx;
using namespace fdia;

namespace {

StateVector solved14() {
  const auto c = cases::ieee14();
  return solve_power_flow(c, case_loads(c));
}

}  // namespace

TEST_CASE("zero offset gives a zero attack", "[attack]") {
  const auto c = cases::ieee14();
  const auto x = solved14();
  StateVector zero{Vector::Zero(14), Vector::Zero(14), 0};
  CHECK(attack_from_offset(c, x, zero).a.isZero());
}

TEST_CASE("attack on bus 9 is confined to its electrical neighborhood", "[attack]") {
  const auto c = cases::ieee14();
  const auto x = solved14();
  const auto atk = construct_attack(c, x, {{9}, 0.3, 1});
  const int bus9 = c.internal_index(9);
  CHECK(atk.c.theta[bus9] == Approx(0.3 * x.theta[bus9]));
  CHECK(atk.c.v.isZero());

  // expected support from the branch list: injections of bus 9 and its neighbors,
  // flows of branches touching bus 9
  std::set<int> buses{bus9};
  std::set<int> lines;
  for (int k = 0; k < c.n_branch(); ++k) {
    const auto& br = c.branches()[k];
    if (br.from_bus == bus9 || br.to_bus == bus9) {
      buses.insert(br.from_bus);
      buses.insert(br.to_bus);
      lines.insert(k);
    }
  }
  const auto layout = measurement_layout(c);
  for (int k = 0; k < layout.size(); ++k) {
    bool expected = false;
    if (k < 2 * 14) expected = buses.count(k % 14) > 0;
    else expected = lines.count((k - 28) % 20) > 0;
    INFO("measurement " << k);
    if (expected)
      CHECK(std::abs(atk.a[k]) > 1e-9);
    else
      CHECK(atk.a[k] == 0.0);
  }
}

TEST_CASE("attacked measurements leave the residual unchanged", "[attack]") {
  const auto c = cases::ieee14();
  const auto x = solved14();
  const auto z = measure(c, x, {});
  for (int bus : {2, 3, 9}) {
    for (double gamma : {0.1, 0.2, 0.3}) {
      const auto atk = construct_attack(c, x, {{bus}, gamma, 0});
      const auto za = apply_attack(z, atk);
      StateVector xa = x;
      xa.theta += atk.c.theta;
      xa.v += atk.c.v;
      const double r = (z.values - measurement_function(c, x)).norm();
      const double ra = (za.values - measurement_function(c, xa)).norm();
      CHECK(std::abs(ra - r) < 1e-10);
      // and the estimator itself finds a residual no larger than before
      const auto est = wls_estimate_ac(c, za);
      CHECK(est.residual_norm < 1e-6);
    }
  }
}

TEST_CASE("apply_attack arithmetic", "[attack]") {
  const auto c = cases::ieee14();
  const auto x = solved14();
  const auto z = measure(c, x, {0.01, 3});
  const auto atk = construct_attack(c, x, {{2}, 0.1, 0});
  AttackVector none = atk;
  none.a.setZero();
  CHECK(apply_attack(z, none).values == z.values);
  const auto za = apply_attack(z, atk);
  CHECK((za.values - atk.a - z.values).lpNorm<Eigen::Infinity>() < 1e-15);

  AttackVector wrong = atk;
  wrong.layout.n_bus = 3;
  CHECK_THROWS_AS(apply_attack(z, wrong), DataError);
}

TEST_CASE("attack magnitude grows with intensity", "[attack][property]") {
  const auto c = cases::ieee14();
  const auto x = solved14();
  for (int bus : {2, 3, 9}) {
    double last = 0.0;
    for (double gamma : {0.1, 0.2, 0.3}) {
      const double norm = construct_attack(c, x, {{bus}, gamma, 0}).a.norm();
      CHECK(norm >= last);
      last = norm;
    }
  }
}

TEST_CASE("attack argument validation", "[attack]") {
  const auto c = cases::ieee14();
  const auto x = solved14();
  CHECK_THROWS(construct_attack(c, x, {{1}, 0.1, 0}));
  CHECK_THROWS(construct_attack(c, x, {{}, 0.1, 0}));
  CHECK_THROWS(construct_attack(c, x, {{99}, 0.1, 0}));
  CHECK_THROWS(construct_attack(c, x, {{2}, 0.0, 0}));
  const auto both = construct_attack(c, x, {{9}, 0.1, 0, AttackMode::magnitude_and_angle});
  CHECK(both.c.v[c.internal_index(9)] == Approx(0.1 * x.v[c.internal_index(9)]));
}
