#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "fpbox/renorm.hpp"

namespace fpbox {

struct MoleculeSolution {
  bool found = false;             // false: no sign change below E_mu
  double e_molecule = 0.0;
  double lambda = 0.0;            // E_mu - E_M
  double stationarity_residual = 0.0;
  double scalar_residual = 0.0;
  double k_cap = 0.0;
  Eigen::VectorXd gamma;
  std::vector<LatticePoint> ks;
  std::vector<LatticePoint> qs;
  double form_value = 0.0;        // <M|phi(E_M)|M> with the solved gamma
  double g_error_bound = 0.0;
  int sign_changes = 0;
  std::optional<double> extrapolated;  // K_cap -> infinity estimate
  std::vector<std::pair<double, double>> ladder;  // (k_cap, E_M)
};

struct MoleculeOptions {
  double tol = 1e-9;              // times kappa^2, on the root in E
  double lambda_lo_factor = 1e-6; // scan window in lambda = E_mu - E
  double lambda_hi_factor = 1e6;
  int grid_per_decade = 6;
  // The K_cap truncation dominates the physics error, so the per-sum target
  // can sit looser than the polaron default while staying certified.
  RenormOptions renorm{3e-8, 0.0, 0.0};
};

// Stationarity system at energy E: returns (matrix, rhs) with real-symmetric
// matrix after the symmetric ordering of the flattened (K, q) index.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_molecule_system(
    const ModelParams& params, double E, double k_cap, const RenormOptions& opts = {});

// Solves the system at E and returns G_mu(E_mu-E, 0) + sum_Kq gamma h_K.
double molecule_scalar_residual(const ModelParams& params, double E, double k_cap,
                                const RenormOptions& opts = {});

// Root of the scalar residual below E_mu (largest lambda sign change),
// optionally repeated over a K_cap ladder with Richardson extrapolation.
MoleculeSolution solve_molecule(const ModelParams& params, double k_cap,
                                const std::vector<double>& ladder = {},
                                const MoleculeOptions& opts = {});

struct CrossoverRow {
  double e_b = 0.0;
  double e_polaron = 0.0;
  bool molecule_found = false;
  double e_molecule = 0.0;
  double e_molecule_minus_mu = 0.0;
  std::string winner;        // "polaron" or "molecule"
  bool flagged = false;      // winner defaulted because no molecule root
  double polaron_residual = 0.0;
  double molecule_residual = 0.0;
  double k_cap = 0.0;
  std::string error;         // per-row failure, empty on success
};

std::vector<CrossoverRow> crossover_sweep(const ModelParams& base,
                                          const std::vector<double>& e_b_grid, double k_cap,
                                          const MoleculeOptions& opts = {});

}  // namespace fpbox
