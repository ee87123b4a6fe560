#include <doctest.h>

#include <Eigen/Dense>

#include "fpbox/schur.hpp"

using namespace fpbox;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using cplx = std::complex<double>;

namespace {

BsModel rank_one_model(std::vector<double> h0, std::vector<cplx> eta, double g) {
  BsModel m;
  m.h0 = Eigen::Map<Eigen::VectorXd>(h0.data(), h0.size());
  m.A.resize(1, (int)eta.size());
  for (int i = 0; i < (int)eta.size(); ++i) m.A(0, i) = std::conj(eta[i]);
  m.g = g;
  return m;
}

}  // namespace

TEST_CASE("phi with A = 0 is g^{-1} I") {
  BsModel m;
  m.h0 = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
  m.A = MatrixXcd::Zero(2, 4);
  m.g = 0.5;
  MatrixXcd phi = phi_of_z(m, cplx(-1.0, 0.0));
  CHECK((phi - 2.0 * MatrixXcd::Identity(2, 2)).norm() == doctest::Approx(0.0));
  // Krein resolvent reduces to R0.
  MatrixXcd r = krein_resolvent(m, cplx(-1.0, 0.0));
  for (int i = 0; i < 4; ++i) CHECK(std::abs(r(i, i) - 1.0 / (m.h0(i) + 1.0)) < 1e-15);
  CHECK(inverse_phi_identity_check(m, cplx(-1.0, 0.0)) < 1e-14);
}

TEST_CASE("rank-one phi is the scalar secular function") {
  BsModel m = rank_one_model({0.5, 1.5, 3.0}, {cplx(1, 0), cplx(0.5, 0.25), cplx(-0.75, 0.5)}, 1.25);
  cplx z(-0.8, 0.3);
  MatrixXcd phi = phi_of_z(m, z);
  cplx expected = 1.0 / 1.25;
  for (int i = 0; i < 3; ++i) expected -= std::norm(m.A(0, i)) / (m.h0(i) - z);
  CHECK(std::abs(phi(0, 0) - expected) < 1e-14);
}

TEST_CASE("krein resolvent matches direct inversion") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    BsModel m = random_bs_model(rng, 6, 3);
    cplx z(-0.7, 0.0);
    MatrixXcd h = bs_hamiltonian(m);
    MatrixXcd direct = (h - z * MatrixXcd::Identity(6, 6)).fullPivLu().inverse();
    CHECK((krein_resolvent(m, z) - direct).norm() / direct.norm() < 1e-10);
    // A genuinely complex point as well.
    cplx zc(0.4, 1.3);
    MatrixXcd directc = (h - zc * MatrixXcd::Identity(6, 6)).fullPivLu().inverse();
    CHECK((krein_resolvent(m, zc) - directc).norm() / directc.norm() < 1e-10);
  }
}

TEST_CASE("inverse phi identity on random models") {
  std::mt19937_64 rng(32);
  for (int rep = 0; rep < 5; ++rep) {
    BsModel m = random_bs_model(rng, 4, 2);
    CHECK(inverse_phi_identity_check(m, cplx(-1.0, 0.0)) < 1e-10);
  }
}

TEST_CASE("rank-one inverse phi identity") {
  BsModel m = rank_one_model({1.0, 2.0, 4.0}, {cplx(1, 0), cplx(1, 0), cplx(1, 0)}, 0.7);
  cplx z(-0.5, 0.0);
  MatrixXcd h = bs_hamiltonian(m);
  MatrixXcd hz_inv = (h - z * MatrixXcd::Identity(3, 3)).fullPivLu().inverse();
  VectorXcd eta = m.A.row(0).adjoint();
  cplx rhs = m.g + m.g * m.g * (eta.adjoint() * hz_inv * eta)(0, 0);
  MatrixXcd phi = phi_of_z(m, z);
  CHECK(std::abs(1.0 / phi(0, 0) - rhs) < 1e-12);
}

TEST_CASE("schur factorizations reconstruct the block operator") {
  std::mt19937_64 rng(33);
  BsModel zero;
  zero.h0 = Eigen::VectorXd::LinSpaced(3, 1.0, 3.0);
  zero.A = MatrixXcd::Zero(2, 3);
  zero.g = 1.0;
  auto [z1, z2] = schur_factorization_check(zero, cplx(-1.0, 0.0));
  CHECK(z1 == doctest::Approx(0.0));
  CHECK(z2 == doctest::Approx(0.0));

  for (int rep = 0; rep < 5; ++rep) {
    BsModel m = random_bs_model(rng, 5, 2);
    auto [r1, r2] = schur_factorization_check(m, cplx(-0.9, 0.2));
    CHECK(r1 < 1e-12);
    CHECK(r2 < 1e-12);
  }
  BsModel r1m = rank_one_model({1.0, 2.0}, {cplx(0.3, 0.1), cplx(1, 0)}, 2.0);
  auto [r1, r2] = schur_factorization_check(r1m, cplx(-0.4, 0.0));
  CHECK(r1 < 1e-12);
  CHECK(r2 < 1e-12);
}

TEST_CASE("phi Hermitian symmetry phi(conj z) = phi(z)^*") {
  std::mt19937_64 rng(34);
  BsModel m = random_bs_model(rng, 6, 3);
  cplx z(0.3, 0.9);
  MatrixXcd a = phi_of_z(m, std::conj(z));
  MatrixXcd b = phi_of_z(m, z).adjoint();
  CHECK((a - b).norm() < 1e-13);
}

TEST_CASE("resolvent pole and singular phi raise") {
  BsModel m = rank_one_model({1.0, 2.0}, {cplx(1, 0), cplx(1, 0)}, 1.0);
  CHECK_THROWS_WITH_AS(phi_of_z(m, cplx(1.0, 0.0)), "resolvent pole", std::runtime_error);
  // Tune g so that z = -1 is an eigenvalue: phi(-1) = 0.
  double s = 1.0 / (1.0 + 1.0) + 1.0 / (2.0 + 1.0);
  BsModel sing = rank_one_model({1.0, 2.0}, {cplx(1, 0), cplx(1, 0)}, 1.0 / s);
  CHECK_THROWS_WITH_AS(krein_resolvent(sing, cplx(-1.0, 0.0)), "z is an eigenvalue of H",
                       std::runtime_error);
}

TEST_CASE("kernel isomorphism for a tuned rank-one model") {
  double lambda = -1.0;
  double s = 1.0 / (1.0 - lambda) + 1.0 / (2.0 - lambda) + 1.0 / (5.0 - lambda);
  BsModel m = rank_one_model({1.0, 2.0, 5.0}, {cplx(1, 0), cplx(1, 0), cplx(1, 0)}, 1.0 / s);
  KernelIsoReport rep = kernel_isomorphism_check(m, lambda);
  CHECK(rep.dim_ker_h == 1);
  CHECK(rep.dim_ker_phi == 1);
  CHECK(rep.ok);
}

TEST_CASE("kernel isomorphism at a computed eigenvalue") {
  std::mt19937_64 rng(35);
  BsModel m = random_bs_model(rng, 8, 3);
  m.g = 40.0;  // strong coupling pulls eigenvalues below min(h0)
  Eigen::VectorXd ev = hermitian_eigenvalues(bs_hamiltonian(m));
  REQUIRE(ev(0) < m.h0.minCoeff());
  KernelIsoReport rep = kernel_isomorphism_check(m, ev(0));
  CHECK(rep.dim_ker_h == rep.dim_ker_phi);
  CHECK(rep.ok);
  CHECK_THROWS_AS(kernel_isomorphism_check(m, ev(0) - 0.1), std::runtime_error);
}

TEST_CASE("counting identity on random models") {
  std::mt19937_64 rng(36);
  std::uniform_int_distribution<int> dim_dist(2, 16);
  std::uniform_int_distribution<int> aux_dist(1, 6);
  int mismatches = 0;
  for (int rep = 0; rep < 25; ++rep) {
    BsModel m = random_bs_model(rng, dim_dist(rng), aux_dist(rng));
    std::uniform_real_distribution<double> e_dist(-8.0, m.h0.minCoeff() - 1e-3);
    for (int e = 0; e < 10; ++e) {
      auto [ch, cp] = bs_count_check(m, e_dist(rng));
      if (ch != cp) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("counting window edge cases") {
  BsModel m = rank_one_model({1.0, 2.0}, {cplx(1, 0), cplx(0.5, 0)}, 0.1);
  // Weak coupling: nothing below E deep in the gap.
  auto [ch, cp] = bs_count_check(m, -5.0);
  CHECK(ch == 0);
  CHECK(cp == 0);
  CHECK_THROWS_WITH_AS(bs_count_check(m, 1.5), "outside the variational window",
                       std::invalid_argument);

  // One bound state: count flips between the bound state and 0.
  double s = 1.0 / 2.0 + 1.0 / 3.0;  // phi(-1) = 0 at g = 1/s
  BsModel b = rank_one_model({1.0, 2.0}, {cplx(1, 0), cplx(1, 0)}, 1.0 / s + 0.2);
  Eigen::VectorXd ev = hermitian_eigenvalues(bs_hamiltonian(b));
  REQUIRE(ev(0) < 0.0);
  auto [c1h, c1p] = bs_count_check(b, ev(0) / 2.0);
  CHECK(c1h == 1);
  CHECK(c1p == 1);
}

TEST_CASE("phi monotonicity") {
  std::mt19937_64 rng(37);
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(-5.0 + 0.45 * i);

  // A = 0: constant eigenvalues, A* not injective.
  BsModel zero;
  zero.h0 = Eigen::VectorXd::Constant(4, 3.0);
  zero.A = MatrixXcd::Zero(2, 4);
  zero.g = 2.0;
  MonotonicityReport rz = phi_monotonicity_check(zero, grid, 1);
  CHECK(!rz.a_star_injective);
  for (double v : rz.mu_ell) CHECK(v == doctest::Approx(0.5));

  // Rank-one: strictly decreasing scalar.
  BsModel r1 = rank_one_model({1.0, 2.0, 3.0}, {cplx(1, 0), cplx(1, 0), cplx(1, 0)}, 1.0);
  MonotonicityReport rr = phi_monotonicity_check(r1, grid, 1);
  CHECK(rr.a_star_injective);
  CHECK(rr.strictly_decreasing);
  CHECK(rr.min_step > 0.0);

  // Random full-row-rank models: strict decrease for every ell.
  for (int rep = 0; rep < 3; ++rep) {
    BsModel m = random_bs_model(rng, 8, 3);
    for (int ell = 1; ell <= 3; ++ell) {
      MonotonicityReport r = phi_monotonicity_check(m, grid, ell);
      CHECK(r.a_star_injective);
      CHECK(r.strictly_decreasing);
      CHECK(r.min_step > 0.0);
    }
  }
}

TEST_CASE("phi(tau') - phi(tau) is positive semidefinite for tau' < tau") {
  std::mt19937_64 rng(38);
  for (int rep = 0; rep < 5; ++rep) {
    BsModel m = random_bs_model(rng, 10, 4);
    double tau = -0.5, taup = -2.5;
    MatrixXcd diff = phi_of_z(m, cplx(taup, 0.0)) - phi_of_z(m, cplx(tau, 0.0));
    Eigen::VectorXd ev = hermitian_eigenvalues(diff);
    CHECK(ev(0) > -1e-12);
    CHECK(ev(0) > 0.0);  // strict when A* is injective (generic here)
  }
}
