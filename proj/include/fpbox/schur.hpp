#pragma once

#include <Eigen/Dense>
#include <complex>
#include <random>
#include <vector>

namespace fpbox {

// Finite-dimensional model H = H0 - g A*A with positive diagonal H0.
struct BsModel {
  Eigen::VectorXd h0;    // eigenvalues of H0, all >= 0
  Eigen::MatrixXcd A;    // auxiliary-space map, A.cols() == h0.size()
  double g = 1.0;

  int dim() const { return (int)h0.size(); }
  int aux_dim() const { return (int)A.rows(); }
  void validate() const;
};

struct SpectralReport {
  std::vector<double> energies;            // ascending, with multiplicities
  std::vector<double> eigvec_residuals;    // ||Hv - lambda v|| / ||v||
};

// Dense H = diag(h0) - g A^H A.
Eigen::MatrixXcd bs_hamiltonian(const BsModel& model);

// phi(z) = g^{-1} I - A (H0 - z)^{-1} A^H. Throws "resolvent pole" when z
// collides with the spectrum of H0.
Eigen::MatrixXcd phi_of_z(const BsModel& model, std::complex<double> z);

// R0(z) + R0(z) A^H phi(z)^{-1} A R0(z). Throws "z is an eigenvalue of H"
// when phi(z) is singular.
Eigen::MatrixXcd krein_resolvent(const BsModel& model, std::complex<double> z);

// Frobenius norm of phi(z)^{-1} - (g I + g^2 A (H-z)^{-1} A^H).
double inverse_phi_identity_check(const BsModel& model, std::complex<double> z);

// Reconstruction residuals of the two triangular factorizations of the block
// operator [[H0 - z, A^H], [A, g^{-1}]].
std::pair<double, double> schur_factorization_check(const BsModel& model, std::complex<double> z);

struct KernelIsoReport {
  int dim_ker_h = 0;
  int dim_ker_phi = 0;
  double forward_residual = 0.0;   // max ||phi(z) A v|| over ker(H-z) basis v
  double backward_residual = 0.0;  // max ||(H-z) R0 A^H w|| over ker phi basis w
  double independence_sigma = 0.0; // smallest singular value of mapped basis
  bool ok = false;
};

// Checks that A and R0(z)A^H implement the kernel isomorphisms at an
// eigenvalue z of H below min(h0). Throws if z is not an eigenvalue.
KernelIsoReport kernel_isomorphism_check(const BsModel& model, double z, double tol = 1e-8);

// Birman-Schwinger counting: (#eigenvalues of H < E, #negative eigenvalues of
// phi(E)). E must lie strictly below min(h0); E colliding with an eigenvalue
// of H is nudged by 1e-12 before counting.
std::pair<int, int> bs_count_check(const BsModel& model, double E);

struct MonotonicityReport {
  bool a_star_injective = false;
  bool strictly_decreasing = false;
  std::vector<double> mu_ell;       // mu_ell(phi(tau)) along the grid
  double min_step = 0.0;            // min decrease between consecutive taus
};

// mu_ell(phi(tau)) along an ascending grid below min(h0).
MonotonicityReport phi_monotonicity_check(const BsModel& model,
                                          const std::vector<double>& tau_grid, int ell);

// Seeded random well-conditioned model for the verification suites.
BsModel random_bs_model(std::mt19937_64& rng, int dim, int aux_dim);

// Ascending eigenvalues of a Hermitian matrix (Eigen solver).
Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& m);

}  // namespace fpbox
