#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fpbox/lattice.hpp"
#include "fpbox/sums.hpp"

namespace fpbox {

struct RenormOptions {
  double target_error = 1e-9;
  double inner_radius = 0.0;      // 0: chosen automatically
  double remainder_radius = 0.0;  // 0: chosen adaptively
};

// mu_tau(q, P^2) = sum_k [ 1/((1+1/M)k^2 - E_B) - 1/((1/M)(q-k)^2 + k^2 + P^2 - tau) ],
// tau < 0, P^2 >= 0. Certified truncation interval.
RenormSum mu_tau(const ModelParams& params, double tau, LatticePoint q, double P2,
                 const RenormOptions& opts = {});

// Finite-cutoff counterpart mu_{tau,n} for a concrete scheme (plain finite sum).
double mu_tau_n(const CutoffScheme& scheme, const ModelParams& params, double tau,
                LatticePoint q, double P2);

// G_mu(lambda, q) = sum_k [ 1/((1+1/M)k^2 - E_B) - chi(k^2 > mu)/((1/M)(q-k)^2 + k^2 + lambda) ].
// Throws "outside analytic continuation window" if a denominator is not positive.
RenormSum g_mu(const ModelParams& params, double lambda, LatticePoint q,
               const RenormOptions& opts = {});

// Data of the limit Birman-Schwinger quadratic form on the polaron block
// span{ m_q^* a_q |FS> : q^2 <= mu } at energy E < E_mu: diagonal entries
// G_mu(lambda - q^2, q) with lambda = E_mu - E, plus the rank-one coupling.
struct PolaronBlock {
  double lambda = 0.0;
  std::vector<LatticePoint> sea;
  std::vector<RenormSum> diag;
  double xi_coupling = 0.0;  // 1/lambda multiplying the all-ones matrix
};
PolaronBlock phi_limit_polaron_block(const ModelParams& params, double E,
                                     const RenormOptions& opts = {});

// Coefficient bundle of the molecule quadratic form at energy E < E_mu + mu:
//   F(gamma) = scalar + 2 sum h_K gamma_Kq + sum d_Kq gamma^2
//            + sum_{KLq} x_q(K,L) gamma_Lq gamma_Kq - sum_{Kpq} h_K gamma_Kq gamma_Kp.
// Index layout: gamma is flattened with iK major, iq minor.
struct MoleculeForm {
  double lambda = 0.0;                  // E_mu - E
  double mu = 0.0;
  std::vector<LatticePoint> ks;         // mu < K^2 <= K_cap^2
  std::vector<LatticePoint> qs;         // q^2 <= mu
  RenormSum scalar;                     // G_mu(lambda, 0)
  std::vector<double> hole;             // h_K
  Eigen::MatrixXd diag;                 // d(K, q), ks.size() x qs.size()
  std::vector<Eigen::MatrixXd> exchange;  // per q: x_q(K, L)
  double g_error = 0.0;                 // max certified error among G evaluations

  int unknowns() const { return (int)(ks.size() * qs.size()); }
  int flat(int ik, int iq) const { return ik * (int)qs.size() + iq; }

  double value(const Eigen::VectorXd& gamma) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& gamma) const;
  // Stationarity system M gamma = rhs (one half of the gradient shifted).
  void system(Eigen::MatrixXd& m, Eigen::VectorXd& rhs) const;
};

MoleculeForm phi_limit_molecule_form(const ModelParams& params, double E, double k_cap,
                                     const RenormOptions& opts = {});

}  // namespace fpbox
