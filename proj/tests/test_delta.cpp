#include <doctest.h>

#include <cmath>

#include "fpbox/delta.hpp"

using namespace fpbox;

namespace {
ModelParams unit_params(double eb = -1.0) { return ModelParams::unit_kappa(1.0, eb, 0.0); }
}

TEST_CASE("phi_delta vanishes at z = E_B and rejects z >= 0") {
  ModelParams p = unit_params();
  RenormSum s = phi_delta(p, p.binding_energy);
  CHECK(s.value == 0.0);
  CHECK_THROWS_AS(phi_delta(p, 0.5), std::invalid_argument);
}

TEST_CASE("phi_delta is strictly decreasing in z on the negative axis") {
  ModelParams p = unit_params();
  double prev = phi_delta(p, -4.0).value;
  for (double z : {-3.0, -2.0, -1.5, -0.5}) {
    double cur = phi_delta(p, z).value;
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("phi_delta agrees with the high-radius oracle") {
  ModelParams p = unit_params();
  double z = -2.0;
  RenormSum s = phi_delta(p, z);
  // Direct symmetric summation; the symmetrized tail is O(1/R^2).
  for (double radius : {300.0, 900.0}) {
    double ref = 0.0;
    for (const auto& k : enumerate_ball(p, radius)) {
      double k2 = p.ksq(k);
      ref += 1.0 / (k2 - p.binding_energy) - 1.0 / (k2 - z);
    }
    double tail = 2.0 * M_PI * std::abs(z - p.binding_energy) / (radius * radius);
    CHECK(std::abs(s.value - ref) <= tail + s.error_bound);
  }
}

TEST_CASE("finite-cutoff ground state: single-mode box") {
  // Cutoff containing only k = 0: the 1x1 problem gives eigenvalue -g = E_B.
  ModelParams p = unit_params(-0.7);
  DeltaReport r = delta_ground_state_check(p, 0.5);
  CHECK(r.dim == 1);
  CHECK(r.g_n == doctest::Approx(-p.binding_energy));
  CHECK(r.eigenvalue_error < 1e-15);
}

TEST_CASE("finite-cutoff ground state at radius 4") {
  ModelParams p = unit_params();
  DeltaReport r = delta_ground_state_check(p, 4.0);
  CHECK(r.dim == 49);
  CHECK(r.eigenvalue_error < 1e-12);
  CHECK(r.eigvec_residual < 1e-10);
  CHECK(r.resolvent_residual < 1e-10);
  CHECK(r.phi_zero_residual < 1e-13);
}

TEST_CASE("ladder: exact cancellation and eigenvector convergence") {
  ModelParams p = unit_params();
  DeltaLadderReport rep = delta_ladder(p, {2.0, 4.0, 8.0, 16.0});
  REQUIRE(rep.rungs.size() == 4);
  for (const auto& r : rep.rungs) {
    CHECK(r.phi_zero_residual < 1e-13);
    CHECK(r.eigenvalue_error < 1e-12);
  }
  for (size_t i = 1; i < rep.eigvec_limit_distance.size(); ++i)
    CHECK(rep.eigvec_limit_distance[i] < rep.eigvec_limit_distance[i - 1]);
}
