#include <doctest.h>

#include <cmath>

#include "fpbox/fock.hpp"
#include "fpbox/polaron.hpp"

using namespace fpbox;
using Eigen::MatrixXd;

namespace {
ModelParams unit_params(double m = 1.0, double eb = -1.0, double mu = 0.5) {
  return ModelParams::unit_kappa(m, eb, mu);
}
}

TEST_CASE("N_mu = 1: scalar P and the bisection oracle") {
  ModelParams p = unit_params();
  // Oracle: bisect lambda * G(lambda, 0) = 1 directly.
  auto f = [&](double lam) { return lam * g_mu(p, lam, {0, 0}).value - 1.0; };
  double lo = 0.25, hi = 4.0;
  REQUIRE(f(lo) < 0.0);
  REQUIRE(f(hi) > 0.0);
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  double oracle = 0.5 * (lo + hi);

  PolaronSolution s = solve_polaron(p);
  CHECK(s.lambda_star == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(s.residual <= 1e-10);
  CHECK(std::abs(s.mu1_check) <= 1e-8);
  CHECK(s.ker_residual <= 1e-8);
  CHECK(s.coefficients.size() == 1);
  // With the Fermi sea {0} the variational space is complete: E_P = E_B.
  CHECK(std::abs(s.e_polaron - p.binding_energy) < 1e-7);
  CHECK(std::abs(s.e_polaron - p.binding_energy) <= s.propagated_error + 1e-9);
}

TEST_CASE("p_lambda matches the renorm block and mu1(P) < mu1(T)") {
  ModelParams p = unit_params(1.0, -1.0, 1.0);  // N_mu = 5
  for (double lam : {0.4, 1.0, 3.0}) {
    MatrixXd pm = p_lambda(p, lam);
    MatrixXd tm = t_lambda(p, lam);
    PolaronBlock block = phi_limit_polaron_block(p, FermiSea::from(p).e_mu - lam);
    REQUIRE(block.sea.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(pm(i, i) == doctest::Approx(block.diag[i].value - block.xi_coupling));
      for (int j = 0; j < 5; ++j)
        if (i != j) CHECK(pm(i, j) == doctest::Approx(-block.xi_coupling));
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> ep(pm, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<MatrixXd> et(tm, Eigen::EigenvaluesOnly);
    CHECK(ep.eigenvalues()(0) < et.eigenvalues()(0));
  }
}

TEST_CASE("chevy residual signs and error paths") {
  ModelParams p = unit_params();
  // Large lambda: residual positive (inverse sum shrinks).
  CHECK(chevy_residual(p, 50.0) > 0.0);
  // Small lambda with positive G (weak coupling): negative, so brackets work
  // on the scalar equation itself.
  ModelParams weak = unit_params(1.0, -0.25);
  REQUIRE(g_mu(weak, 1e-3, {0, 0}).value > 0.0);
  CHECK(chevy_residual(weak, 1e-3) < 0.0);
  // At E_B = -1 the diagonal G is negative near lambda = 0 and the scalar
  // equation loses its bracket; the mu_1-based solve is the robust route.
  CHECK(g_mu(p, 1e-3, {0, 0}).value < 0.0);
  CHECK(chevy_residual(p, 1e-3) > 0.0);
  CHECK_THROWS_AS(chevy_residual(p, -1.0), std::invalid_argument);
}

TEST_CASE("mu1(P(lambda)) is strictly increasing") {
  ModelParams p = unit_params(1.0, -1.0, 1.0);
  double prev = -1e300;
  for (double lam = 0.5; lam <= 3.0; lam += 0.25) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(p_lambda(p, lam), Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues()(0) > prev);
    prev = es.eigenvalues()(0);
  }
}

TEST_CASE("solve_polaron at N_mu = 5") {
  ModelParams p = unit_params(1.0, -1.0, 1.0);
  PolaronSolution s = solve_polaron(p);
  CHECK(s.residual <= 1e-10);
  CHECK(std::abs(s.mu1_check) <= 1e-8);
  CHECK(s.ker_residual <= 1e-8);
  CHECK(s.coefficients.size() == 5);
  CHECK(s.e_polaron < FermiSea::from(p).e_mu);

  // mu_1(phi(E)) > 0 for E < E_P on the polaron block (upper-bound side).
  for (double shift : {0.05, 0.3}) {
    MatrixXd pm = p_lambda(p, s.lambda_star + shift);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(pm, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues()(0) > 0.0);
  }
}

TEST_CASE("interlacing chain at N_mu in {1, 5}") {
  ModelParams p1 = unit_params();
  ModelParams p5 = unit_params(1.0, -1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    double lam = 0.2 * std::pow(1.35, i);
    InterlacingReport r1 = interlacing_report(p1, lam);
    CHECK(r1.mu1_strict);
    InterlacingReport r5 = interlacing_report(p5, lam);
    CHECK(r5.mu1_strict);
    CHECK(r5.chain_ok);
  }
  // Degenerate 4-fold orbit of |q| = kappa shows up in T's diagonal census.
  InterlacingReport r5 = interlacing_report(p5, 1.3);
  bool has4 = false;
  for (int m : r5.t_multiplicities) has4 = has4 || m == 4;
  CHECK(has4);
}

TEST_CASE("counting flips across E_P on the finite-cutoff sector") {
  // At N_mu = 1 the polaron bound is exact (E_P = E_B) and the finite-cutoff
  // two-body ground state sits exactly at E_B: counts flip there.
  ModelParams p = unit_params();
  auto scheme = CutoffScheme::sharp(1.0, 6.0);
  SectorBasis phys = build_sector(p, 1, SectorKind::Physical, 6.0, LatticePoint{0, 0});
  SectorBasis angel = build_sector(p, 0, SectorKind::Angel, 6.0, LatticePoint{0, 0});
  HamiltonianOperator hop = make_hamiltonian_operator(scheme, p, phys, angel);
  BsModel model;
  model.h0 = hop.h0;
  model.A = MatrixXd(hop.v).cast<std::complex<double>>();
  model.g = hop.g;
  PolaronSolution s = solve_polaron(p);
  double delta = 1e-4;
  auto below = bs_count_check(model, s.e_polaron - delta);
  auto above = bs_count_check(model, s.e_polaron + delta);
  CHECK(below.first == 0);
  CHECK(below.second == 0);
  CHECK(above.first == 1);
  CHECK(above.second == 1);
}

TEST_CASE("E_P is independent of the G evaluation radii") {
  ModelParams p = unit_params(1.0, -1.0, 1.0);
  PolaronOptions coarse;
  PolaronOptions fine;
  fine.renorm.inner_radius = 14.0;
  fine.renorm.remainder_radius = 256.0;
  PolaronSolution a = solve_polaron(p, coarse);
  PolaronSolution b = solve_polaron(p, fine);
  CHECK(std::abs(a.e_polaron - b.e_polaron) <=
        a.propagated_error + b.propagated_error + 1e-10);
}

TEST_CASE("exact diagonalization respects the polaron upper bound") {
  // N_mu = 1: ED of the two-body sector at any cutoff equals E_B <= E_P.
  ModelParams p = unit_params();
  PolaronSolution s = solve_polaron(p);
  TwoBodyReport ed = two_body_check(CutoffScheme::sharp(1.0, 8.0), p);
  CHECK(ed.eigenvalue <= s.e_polaron + 1e-6);
}
