#include <doctest.h>

#include <cmath>
#include <random>

#include "fpbox/fock.hpp"
#include "fpbox/molecule.hpp"
#include "fpbox/polaron.hpp"

using namespace fpbox;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
ModelParams unit_params(double m = 1.0, double eb = -1.0, double mu = 0.5) {
  return ModelParams::unit_kappa(m, eb, mu);
}
}

TEST_CASE("single-unknown subsystem has the closed-form solution") {
  ModelParams p = unit_params();
  double E = -2.3;
  MoleculeForm form = phi_limit_molecule_form(p, E, 1.2);  // annulus = first shell
  REQUIRE(form.qs.size() == 1);
  MatrixXd m;
  VectorXd rhs;
  form.system(m, rhs);
  // Restricting to one (K, q) pair: gamma = -h / (d + x_KK - h).
  int id = 0;
  double gamma_toy = -form.hole[0] / (form.diag(0, 0) + form.exchange[0](0, 0) - form.hole[0]);
  CHECK(m(id, id) == doctest::Approx(form.diag(0, 0) + form.exchange[0](0, 0) - form.hole[0]));
  CHECK(-rhs(id) / m(id, id) == doctest::Approx(-gamma_toy));
}

TEST_CASE("finite-difference gradient matches the assembled system") {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> gauss(0.0, 0.2);
  for (double mu : {0.5, 1.0}) {
    ModelParams p = unit_params(1.0, -1.0, mu);
    double E = -2.0;
    MoleculeForm form = phi_limit_molecule_form(p, E, 2.5);
    MatrixXd m;
    VectorXd rhs;
    form.system(m, rhs);
    for (int trial = 0; trial < 5; ++trial) {
      VectorXd gamma(form.unknowns());
      for (int i = 0; i < gamma.size(); ++i) gamma(i) = gauss(rng);
      VectorXd grad = form.gradient(gamma);
      // System = one half of the gradient, shifted by the linear term.
      VectorXd sys = m * gamma - rhs;
      CHECK((0.5 * grad - sys).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, grad.norm()));
      // Central finite differences on the scalar form.
      double h = 1e-5;
      double max_rel = 0.0;
      for (int i = 0; i < gamma.size(); ++i) {
        VectorXd gp = gamma, gm = gamma;
        gp(i) += h;
        gm(i) -= h;
        double fd = (form.value(gp) - form.value(gm)) / (2.0 * h);
        max_rel = std::max(max_rel, std::abs(fd - grad(i)) / std::max(1.0, std::abs(grad(i))));
      }
      CHECK(max_rel < 1e-6);
    }
  }
}

TEST_CASE("scalar residual diverges at deep E and brackets the root") {
  ModelParams p = unit_params(1.0, -4.0, 0.5);
  CHECK(molecule_scalar_residual(p, -60.0, 4.0) > 0.0);
  MoleculeSolution s = solve_molecule(p, 4.0);
  REQUIRE(s.found);
  CHECK(s.sign_changes >= 1);
  CHECK(s.scalar_residual <= 1e-8);
  CHECK(s.stationarity_residual <= 1e-8);
  // The full quadratic form vanishes at the solution.
  CHECK(std::abs(s.form_value) <= 1e-7);
}

TEST_CASE("K_cap ladder is monotone nonincreasing and Cauchy") {
  ModelParams p = unit_params(1.0, -2.0, 0.5);
  MoleculeSolution s = solve_molecule(p, 8.0, {2.0, 4.0, 8.0});
  REQUIRE(s.found);
  REQUIRE(s.ladder.size() == 3);
  CHECK(s.ladder[1].second <= s.ladder[0].second + 1e-12);
  CHECK(s.ladder[2].second <= s.ladder[1].second + 1e-12);
  double gap1 = s.ladder[0].second - s.ladder[1].second;
  double gap2 = s.ladder[1].second - s.ladder[2].second;
  CHECK(gap2 < gap1);
  CHECK(s.extrapolated.has_value());
  CHECK(*s.extrapolated <= s.ladder[2].second + 1e-12);
}

TEST_CASE("exact diagonalization respects the molecule upper bound") {
  ModelParams p = unit_params();
  MoleculeSolution s = solve_molecule(p, 4.0);
  REQUIRE(s.found);
  // N = N_mu + 1 = 2 sector at a converged cutoff.
  double radius = 12.0;
  SectorBasis phys = build_sector(p, 2, SectorKind::Physical, radius, LatticePoint{0, 0});
  SectorBasis angel = build_sector(p, 1, SectorKind::Angel, radius, LatticePoint{0, 0});
  HamiltonianOperator hop =
      make_hamiltonian_operator(CutoffScheme::sharp(1.0, radius), p, phys, angel);
  GroundStateResult gs = ground_state(hop);
  CHECK(gs.energy <= s.e_molecule + 1e-6);
}

TEST_CASE("molecule form value matches the finite-cutoff expectation") {
  ModelParams p = unit_params(1.0, -2.0, 0.5);
  MoleculeSolution s = solve_molecule(p, 3.0);
  REQUIRE(s.found);

  // Assemble |M~> = m_0^*|FS> + sum gamma_K m_{-K}^* a_K^* a_0 |FS> as
  // weighted angel states and evaluate <M|phi_n(E)|M> on the untruncated
  // space along a cutoff ladder.
  std::vector<std::pair<FockState, double>> weighted;
  FockState lead;
  lead.extra = {0, 0};
  fock_insert_fermion(lead, {0, 0});
  weighted.push_back({lead, 1.0});
  for (int ik = 0; ik < (int)s.ks.size(); ++ik) {
    FockState st;
    st.extra = LatticePoint{0, 0} - s.ks[ik];
    int sg = fock_insert_fermion(st, s.ks[ik]);
    weighted.push_back({st, sg * s.gamma(ik)});
  }
  double prev = 1e300;
  for (double lam : {4.0, 8.0, 16.0}) {
    double v = phi_n_expectation(CutoffScheme::sharp(1.0, lam), p, s.e_molecule, weighted);
    double err = std::abs(v - s.form_value);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 2e-2);
}

TEST_CASE("no molecule root at very weak coupling is reported, not thrown") {
  ModelParams p = unit_params(1.0, -0.01, 0.5);
  MoleculeSolution s = solve_molecule(p, 3.0);
  CHECK(!s.found);
}

TEST_CASE("crossover sweep and strong-coupling winner") {
  ModelParams base = unit_params();
  std::vector<CrossoverRow> rows = crossover_sweep(base, {-1.0, -4.0, -16.0}, 6.0);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) CHECK(r.error.empty());

  // E_P and E_M both decrease as |E_B| grows.
  CHECK(rows[1].e_polaron < rows[0].e_polaron);
  CHECK(rows[2].e_polaron < rows[1].e_polaron);
  REQUIRE(rows[1].molecule_found);
  REQUIRE(rows[2].molecule_found);
  if (rows[0].molecule_found) CHECK(rows[1].e_molecule < rows[0].e_molecule);
  CHECK(rows[2].e_molecule < rows[1].e_molecule);

  // Molecule wins at the strongest coupling.
  CHECK(rows[2].winner == "molecule");
  CHECK(rows[2].e_polaron > rows[2].e_molecule_minus_mu);
}

TEST_CASE("per-row failures are isolated") {
  ModelParams base = unit_params();
  // K_cap below the first particle shell makes the molecule form throw.
  std::vector<CrossoverRow> rows = crossover_sweep(base, {-1.0}, 0.5);
  REQUIRE(rows.size() == 1);
  CHECK(!rows[0].error.empty());
}
