#include "fpbox/molecule.hpp"

#include <cmath>

#include "fpbox/extrapolation.hpp"
#include "fpbox/polaron.hpp"

namespace fpbox {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct SolvedPoint {
  double scalar = 0.0;
  VectorXd gamma;
  MoleculeForm form;
};

// Direct symmetric solve below 4096 unknowns, MINRES-style iteration above.
VectorXd solve_symmetric(const MatrixXd& m, const VectorXd& rhs) {
  if (m.rows() <= 4096) {
    Eigen::LDLT<MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("stationarity degenerate at E");
    VectorXd x = ldlt.solve(rhs);
    if ((m * x - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm()))
      throw std::runtime_error("stationarity degenerate at E");
    return x;
  }
  // Conjugate-residual iteration (symmetric, possibly indefinite).
  VectorXd x = VectorXd::Zero(m.rows());
  VectorXd r = rhs;
  VectorXd p = r;
  VectorXd mr = m * r;
  VectorXd mp = mr;
  double rmr = r.dot(mr);
  for (int it = 0; it < 4 * (int)m.rows(); ++it) {
    double denom = mp.squaredNorm();
    if (denom <= 0.0) break;
    double alpha = rmr / denom;
    x += alpha * p;
    r -= alpha * mp;
    if (r.norm() <= 1e-12 * std::max(1.0, rhs.norm())) break;
    VectorXd mr_new = m * r;
    double rmr_new = r.dot(mr_new);
    double beta = rmr_new / rmr;
    rmr = rmr_new;
    p = r + beta * p;
    mp = mr_new + beta * mp;
  }
  if ((m * x - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm()))
    throw std::runtime_error("iterative stationarity solve failed");
  return x;
}

SolvedPoint solve_at(const ModelParams& params, double E, double k_cap,
                     const RenormOptions& opts) {
  SolvedPoint sp;
  sp.form = phi_limit_molecule_form(params, E, k_cap, opts);
  MatrixXd m;
  VectorXd rhs;
  sp.form.system(m, rhs);
  sp.gamma = solve_symmetric(m, rhs);
  double acc = sp.form.scalar.value;
  int nq = (int)sp.form.qs.size();
  for (int ik = 0; ik < (int)sp.form.ks.size(); ++ik)
    for (int iq = 0; iq < nq; ++iq) acc += sp.form.hole[ik] * sp.gamma(sp.form.flat(ik, iq));
  sp.scalar = acc;
  return sp;
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_molecule_system(const ModelParams& params,
                                                                     double E, double k_cap,
                                                                     const RenormOptions& opts) {
  MoleculeForm form = phi_limit_molecule_form(params, E, k_cap, opts);
  MatrixXd m;
  VectorXd rhs;
  form.system(m, rhs);
  return {m, rhs};
}

double molecule_scalar_residual(const ModelParams& params, double E, double k_cap,
                                const RenormOptions& opts) {
  return solve_at(params, E, k_cap, opts).scalar;
}

namespace {

MoleculeSolution solve_single(const ModelParams& params, double k_cap,
                              const MoleculeOptions& opts, double hint_lambda = 0.0) {
  FermiSea sea = FermiSea::from(params);
  double k2 = params.kappa * params.kappa;

  MoleculeSolution sol;
  sol.k_cap = k_cap;

  auto residual_at = [&](double lambda) {
    return solve_at(params, sea.e_mu - lambda, k_cap, opts.renorm).scalar;
  };

  // Census over a geometric lambda grid; pick the largest-lambda crossing
  // (lowest E), mirroring the polaron convention. A bracket hint from a
  // previous ladder rung skips the full scan when it still brackets a root.
  double bl = 0.0, bh = 0.0;
  if (hint_lambda > 0.0) {
    double lo = 0.8 * hint_lambda, hi = 1.25 * hint_lambda;
    if ((residual_at(lo) < 0.0) != (residual_at(hi) < 0.0)) {
      bl = lo;
      bh = hi;
      sol.sign_changes = 1;
    }
  }
  if (sol.sign_changes == 0) {
    std::vector<double> grid;
    double step = std::pow(10.0, 1.0 / opts.grid_per_decade);
    for (double x = opts.lambda_lo_factor * k2; x <= opts.lambda_hi_factor * k2 * (1.0 + 1e-12);
         x *= step)
      grid.push_back(x);
    double prev = residual_at(grid[0]);
    for (size_t i = 1; i < grid.size(); ++i) {
      double cur = residual_at(grid[i]);
      if ((prev < 0.0) != (cur < 0.0)) {
        ++sol.sign_changes;
        bl = grid[i - 1];
        bh = grid[i];
      }
      prev = cur;
    }
  }
  if (sol.sign_changes == 0) {
    sol.found = false;
    return sol;
  }

  double fl = residual_at(bl);
  for (int it = 0; it < 200 && (bh - bl) > opts.tol * k2; ++it) {
    double mid = 0.5 * (bl + bh);
    double fm = residual_at(mid);
    if ((fl < 0.0) == (fm < 0.0)) {
      bl = mid;
      fl = fm;
    } else {
      bh = mid;
    }
  }
  double lambda = 0.5 * (bl + bh);

  // Secant polish.
  {
    double x0 = bl, x1 = bh;
    double f0 = residual_at(x0), f1 = residual_at(x1);
    for (int it = 0; it < 40 && f1 != f0; ++it) {
      double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
      if (!(x2 > 0.0) || !std::isfinite(x2)) break;
      x0 = x1;
      f0 = f1;
      x1 = x2;
      f1 = residual_at(x1);
      if (std::abs(x1 - x0) <= 1e-15 * std::max(1.0, x1)) break;
    }
    if (std::abs(f1) < std::abs(residual_at(lambda))) lambda = x1;
  }

  sol.found = true;
  sol.lambda = lambda;
  sol.e_molecule = sea.e_mu - lambda;

  SolvedPoint sp = solve_at(params, sol.e_molecule, k_cap, opts.renorm);
  sol.gamma = sp.gamma;
  sol.ks = sp.form.ks;
  sol.qs = sp.form.qs;
  sol.scalar_residual = std::abs(sp.scalar);
  sol.g_error_bound = sp.form.g_error;
  MatrixXd m;
  VectorXd rhs;
  sp.form.system(m, rhs);
  sol.stationarity_residual = (m * sp.gamma - rhs).cwiseAbs().maxCoeff();
  sol.form_value = sp.form.value(sp.gamma);
  return sol;
}

}  // namespace

MoleculeSolution solve_molecule(const ModelParams& params, double k_cap,
                                const std::vector<double>& ladder, const MoleculeOptions& opts) {
  MoleculeSolution sol = solve_single(params, k_cap, opts);
  if (!ladder.empty()) {
    std::vector<double> hs, es;
    double hint = 0.0;
    for (double kc : ladder) {
      MoleculeSolution s =
          (kc == k_cap && sol.found) ? sol : solve_single(params, kc, opts, hint);
      if (!s.found) continue;
      hint = s.lambda;
      sol.ladder.push_back({kc, s.e_molecule});
      hs.push_back(1.0 / kc);
      es.push_back(s.e_molecule);
    }
    if (es.size() >= 2) sol.extrapolated = richardson(hs, es).value;
  }
  return sol;
}

std::vector<CrossoverRow> crossover_sweep(const ModelParams& base,
                                          const std::vector<double>& e_b_grid, double k_cap,
                                          const MoleculeOptions& opts) {
  std::vector<CrossoverRow> rows;
  rows.reserve(e_b_grid.size());
  for (double eb : e_b_grid) {
    CrossoverRow row;
    row.e_b = eb;
    row.k_cap = k_cap;
    try {
      ModelParams p = ModelParams::create(base.box_length, base.impurity_mass, eb,
                                          base.fermi_energy);
      p.kappa = base.kappa;
      PolaronOptions popts;
      popts.renorm = opts.renorm;
      PolaronSolution ps = solve_polaron(p, popts);
      row.e_polaron = ps.e_polaron;
      row.polaron_residual = ps.residual;
      MoleculeSolution ms = solve_molecule(p, k_cap, {}, opts);
      row.molecule_found = ms.found;
      if (ms.found) {
        row.e_molecule = ms.e_molecule;
        row.e_molecule_minus_mu = ms.e_molecule - p.fermi_energy;
        row.molecule_residual = std::max(ms.scalar_residual, ms.stationarity_residual);
        row.winner = row.e_polaron < row.e_molecule_minus_mu ? "polaron" : "molecule";
      } else {
        row.winner = "polaron";
        row.flagged = true;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fpbox
