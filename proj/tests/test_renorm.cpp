#include <doctest.h>

#include <cmath>

#include "fpbox/extrapolation.hpp"
#include "fpbox/fock.hpp"
#include "fpbox/renorm.hpp"
#include "oracles.hpp"

using namespace fpbox;

namespace {
ModelParams unit_params(double m = 1.0, double eb = -1.0, double mu = 0.5) {
  return ModelParams::unit_kappa(m, eb, mu);
}
}

TEST_CASE("mu_tau cancels exactly at q=0, P2=0, tau=E_B") {
  ModelParams p = unit_params();
  RenormSum s = mu_tau(p, p.binding_energy, {0, 0}, 0.0);
  CHECK(s.value == 0.0);
  CHECK(s.error_bound < 1e-12);
}

TEST_CASE("mu_tau is increasing in -tau and in P2") {
  ModelParams p = unit_params(2.0);
  LatticePoint q{1, 1};
  double base = mu_tau(p, -1.0, q, 0.0).value;
  CHECK(mu_tau(p, -2.0, q, 0.0).value > base);
  CHECK(mu_tau(p, -1.0, q, 0.5).value > base);
  CHECK_THROWS_AS(mu_tau(p, 0.5, q, 0.0), std::invalid_argument);
}

TEST_CASE("mu_tau agrees with the 10x-radius reference") {
  struct Case {
    double m, eb, tau, p2;
    LatticePoint q;
  };
  for (const Case& c : {Case{1.0, -1.0, -2.0, 0.0, {1, 0}},
                        Case{2.5, -0.3, -0.7, 1.3, {2, 1}},
                        Case{0.7, -2.0, -4.0, 0.0, {0, 0}}}) {
    ModelParams p = unit_params(c.m, c.eb);
    RenormSum fast = mu_tau(p, c.tau, c.q, c.p2);
    RenormSum ref = testing::renorm_reference(p, c.q, c.p2 - c.tau, -1.0, 10.0 * fast.inner_radius);
    CHECK(std::abs(fast.value - ref.value) <= fast.error_bound + ref.error_bound);
    CHECK(fast.error_bound < 1e-8);
  }
}

TEST_CASE("mu_tau with non-unit kappa agrees with the reference") {
  ModelParams p = ModelParams::create(M_PI, 1.5, -0.8, 0.0);  // kappa = 2
  RenormSum fast = mu_tau(p, -1.1, {1, 0}, 0.2);
  RenormSum ref = testing::renorm_reference(p, {1, 0}, 0.2 + 1.1, -1.0, 10.0 * fast.inner_radius);
  CHECK(std::abs(fast.value - ref.value) <= fast.error_bound + ref.error_bound);
}

TEST_CASE("reference oracle is self-consistent across radii") {
  ModelParams p = unit_params();
  RenormSum r1 = testing::renorm_reference(p, {1, 0}, 2.0, -1.0, 60.0);
  RenormSum r2 = testing::renorm_reference(p, {1, 0}, 2.0, -1.0, 240.0);
  CHECK(std::abs(r1.value - r2.value) <= r1.error_bound);
  CHECK(r2.error_bound < r1.error_bound);
}

TEST_CASE("g_mu with mu < 0 reduces to mu_tau") {
  ModelParams p = ModelParams::unit_kappa(1.3, -1.0, 0.0);
  p.fermi_energy = -0.5;  // chi identically one
  for (double lam : {0.7, 2.0}) {
    RenormSum g = g_mu(p, lam, {1, 0});
    RenormSum m = mu_tau(p, -lam, {1, 0}, 0.0);
    CHECK(std::abs(g.value - m.value) <= g.error_bound + m.error_bound + 1e-14);
  }
  // q = 0, lambda = -E_B: exact cancellation.
  RenormSum zero = g_mu(p, -p.binding_energy, {0, 0});
  CHECK(zero.value == 0.0);
}

TEST_CASE("g_mu is increasing in lambda") {
  ModelParams p = unit_params();
  LatticePoint q{1, 0};
  double prev = g_mu(p, 0.5, q).value;
  for (double lam : {1.0, 2.0, 4.0}) {
    double cur = g_mu(p, lam, q).value;
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("g_mu agrees with the 10x-radius reference") {
  ModelParams p = unit_params();
  RenormSum fast = g_mu(p, 1.0, {0, 0});
  RenormSum ref = testing::renorm_reference(p, {0, 0}, 1.0, 0.5, 10.0 * fast.inner_radius);
  CHECK(std::abs(fast.value - ref.value) <= fast.error_bound + ref.error_bound);
  CHECK(fast.error_bound < 1e-9);

  // Negative shifted-argument case (M > 1 makes c < 0).
  ModelParams pm = unit_params(2.5);
  double lam_arg = 0.05 - 1.0;  // lambda - q^2 at lambda = 0.05, q = (1,0)
  RenormSum fneg = g_mu(pm, lam_arg, {1, 0});
  RenormSum rneg =
      testing::renorm_reference(pm, {1, 0}, lam_arg, 0.5, 10.0 * fneg.inner_radius);
  CHECK(std::abs(fneg.value - rneg.value) <= fneg.error_bound + rneg.error_bound);
}

TEST_CASE("g_mu rejects arguments outside the continuation window") {
  ModelParams p = unit_params();
  // lambda so negative that (1/M)(q-k)^2 + k^2 + lambda <= 0 for some k^2 > mu.
  CHECK_THROWS_WITH_AS(g_mu(p, -3.0, {0, 0}), "outside analytic continuation window",
                       std::runtime_error);
}

TEST_CASE("large-lambda growth constant") {
  for (double m : {1.0, 2.0}) {
    ModelParams p = unit_params(m);
    double expected = M_PI / (1.0 + 1.0 / m);
    for (double lam : {1e3, 1e4}) {
      double ratio = g_mu(p, lam, {0, 0}).value / std::log(lam);
      CHECK(std::abs(ratio - expected) / expected < 0.05);
    }
  }
}

TEST_CASE("mu_tau_n converges to mu_tau along the cutoff ladder") {
  ModelParams p = unit_params(1.5);
  double tau = -2.0;
  LatticePoint q{1, 0};
  double limit = mu_tau(p, tau, q, 0.0).value;
  double prev_err = 1e300;
  std::vector<double> hs, vals;
  for (double lam : {8.0, 16.0, 32.0}) {
    double v = mu_tau_n(CutoffScheme::sharp(1.0, lam), p, tau, q, 0.0);
    double err = std::abs(v - limit);
    CHECK(err < prev_err);
    prev_err = err;
    hs.push_back(1.0 / lam);
    vals.push_back(v);
  }
  CHECK(prev_err < 2e-2);
  CHECK(std::abs(richardson(hs, vals).value - limit) < 1e-3);

  // Scheme independence after extrapolation.
  std::vector<double> hg, vg;
  for (double lam : {2.0, 4.0, 8.0}) {
    vg.push_back(mu_tau_n(CutoffScheme::gaussian(1.0, lam), p, tau, q, 0.0));
    hg.push_back(1.0 / (6.0 * lam));
  }
  CHECK(std::abs(richardson(hg, vg).value - richardson(hs, vals).value) < 1e-3);
}

TEST_CASE("mu_tau_n increases with P2") {
  ModelParams p = unit_params();
  auto scheme = CutoffScheme::sharp(1.0, 6.0);
  for (double p2 : {0.5, 2.0})
    CHECK(mu_tau_n(scheme, p, -1.0, {1, 1}, p2) >= mu_tau_n(scheme, p, -1.0, {1, 1}, 0.0));
}

TEST_CASE("polaron block structure") {
  ModelParams p = unit_params();  // N_mu = 1
  double E = -1.2;
  PolaronBlock b = phi_limit_polaron_block(p, E);
  CHECK(b.sea.size() == 1);
  CHECK(b.lambda == doctest::Approx(-E));
  CHECK(b.xi_coupling == doctest::Approx(1.0 / b.lambda));
  CHECK(b.diag[0].value == doctest::Approx(g_mu(p, b.lambda, {0, 0}).value));

  // Orbit symmetry of the diagonal at N_mu = 5.
  ModelParams p5 = unit_params(1.0, -1.0, 1.0);
  PolaronBlock b5 = phi_limit_polaron_block(p5, 2.0);
  REQUIRE(b5.sea.size() == 5);
  double ref = -1.0;
  for (size_t i = 0; i < b5.sea.size(); ++i) {
    if (b5.sea[i].norm2() != 1) continue;
    if (ref == -1.0)
      ref = b5.diag[i].value;
    else
      CHECK(b5.diag[i].value == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("finite-cutoff polaron block converges to the limit form") {
  // N_mu = 1: the single block state is m_0^* a_0 |FS> = m_0^*|vac>.
  ModelParams p = unit_params();
  double E = -1.4;
  double lambda = -E;
  double limit = g_mu(p, lambda, {0, 0}).value - 1.0 / lambda;
  FockState w;  // angel label 0, no fermions
  w.extra = {0, 0};
  double prev = 1e300;
  for (double lam : {4.0, 8.0, 16.0}) {
    double v = phi_n_expectation(CutoffScheme::sharp(1.0, lam), p, E, {{w, 1.0}});
    double err = std::abs(v - limit);
    CHECK(err < 0.55 * prev);  // roughly O(1/Lambda^2)
    prev = err;
  }
  CHECK(prev < 5e-3);
}

TEST_CASE("finite-cutoff gram matches P(lambda) at N_mu = 5") {
  ModelParams p = unit_params(1.0, -1.0, 1.0);
  FermiSea sea = FermiSea::from(p);
  double lambda = 1.7;
  double E = sea.e_mu - lambda;

  // Angel states m_q^* a_q |FS>: four remaining fermions plus the angel
  // label. a_q hops over the fermions preceding q in the canonical order, so
  // the state relates to the stored (ascending) one by (-1)^index.
  std::vector<FockState> states;
  std::vector<int> sign;
  for (size_t iq = 0; iq < sea.occupied.size(); ++iq) {
    FockState s;
    s.extra = sea.occupied[iq];
    for (const auto& k : sea.occupied) {
      if (k == sea.occupied[iq]) continue;
      REQUIRE(fock_insert_fermion(s, k) != 0);
    }
    states.push_back(s);
    sign.push_back(iq % 2 == 0 ? 1 : -1);
  }

  // Limit block: P(lambda) entries in the same basis.
  Eigen::MatrixXd limit(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      limit(i, j) = -1.0 / lambda;
      if (i == j) limit(i, j) += g_mu(p, lambda - p.ksq(sea.occupied[i]), sea.occupied[i]).value;
    }

  double prev = 1e300;
  for (double lam : {4.0, 8.0, 16.0}) {
    Eigen::MatrixXd gram = phi_n_gram(CutoffScheme::sharp(1.0, lam), p, E, states);
    // a_q|FS> carries a fermion-ordering sign; undo it for the comparison.
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) gram(i, j) *= sign[i] * sign[j];
    double err = (gram - limit).cwiseAbs().maxCoeff();
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 2e-2);
}

TEST_CASE("molecule form reduces to the scalar at gamma = 0") {
  ModelParams p = unit_params();
  double E = -2.0;
  MoleculeForm form = phi_limit_molecule_form(p, E, 4.0);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(form.unknowns());
  CHECK(form.value(zero) == doctest::Approx(form.scalar.value));
  CHECK_THROWS_AS(phi_limit_molecule_form(p, p.fermi_energy + 0.6, 4.0), std::invalid_argument);
}

TEST_CASE("molecule system matrix is exactly symmetric") {
  ModelParams p5 = unit_params(1.4, -1.0, 1.0);
  MoleculeForm form = phi_limit_molecule_form(p5, -0.5, 3.0);
  Eigen::MatrixXd m;
  Eigen::VectorXd rhs;
  form.system(m, rhs);
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
}
