#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fpbox/renorm.hpp"

namespace fpbox {

struct PolaronSolution {
  double lambda_star = 0.0;
  double e_polaron = 0.0;   // E_mu - lambda_star
  double residual = 0.0;    // |lambda - sum_q G^{-1}|
  double mu1_check = 0.0;   // mu_1(P(lambda_star))
  double ker_residual = 0.0;
  std::vector<std::pair<LatticePoint, double>> coefficients;  // alpha~_q
  double g_error_bound = 0.0;    // max certified G error entering the solve
  double propagated_error = 0.0; // estimated |dE_P| from the G errors
  int sign_changes = 0;          // census over the bracket grid
};

struct PolaronOptions {
  double tol = 1e-10;
  double grid_lo_factor = 1e-6;  // times kappa^2
  double grid_hi_factor = 1e6;
  int grid_per_decade = 6;
  RenormOptions renorm;
};

// P(lambda) = diag(G_mu(lambda - q^2, q)) - (1/lambda) * ones.
Eigen::MatrixXd p_lambda(const ModelParams& params, double lambda,
                         const RenormOptions& opts = {});
Eigen::MatrixXd t_lambda(const ModelParams& params, double lambda,
                         const RenormOptions& opts = {});

// lambda - sum_q G_mu(lambda - q^2, q)^{-1}. Throws "polaron equation
// undefined" when a diagonal G vanishes.
double chevy_residual(const ModelParams& params, double lambda,
                      const RenormOptions& opts = {});

// Largest root of mu_1(P(lambda)) = 0 via bracketing and bisection.
PolaronSolution solve_polaron(const ModelParams& params, const PolaronOptions& opts = {});

struct InterlacingReport {
  std::vector<double> t_eigs;  // ascending
  std::vector<double> p_eigs;
  bool mu1_strict = false;     // mu_1(P) < mu_1(T)
  bool chain_ok = false;       // mu_{l-1}(T) <= mu_l(P) <= mu_l(T)
  std::vector<int> t_multiplicities;  // lattice-orbit degeneracy structure
};

InterlacingReport interlacing_report(const ModelParams& params, double lambda,
                                     const RenormOptions& opts = {});

}  // namespace fpbox
