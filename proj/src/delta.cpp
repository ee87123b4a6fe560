#include "fpbox/delta.hpp"

#include <cmath>

#include "fpbox/schur.hpp"

namespace fpbox {

RenormSum phi_delta(const ModelParams& params, double z) {
  if (!(z < 0.0)) throw std::invalid_argument("phi_delta requires z < 0");
  SeriesValue s = lattice_inv_diff(params.kappa, -params.binding_energy, -z);
  RenormSum out;
  out.value = s.value;
  out.error_bound = s.error;
  out.inner_radius = 0.0;  // fully resummed, no exact inner ball needed
  return out;
}

namespace {

BsModel delta_model(const ModelParams& params, double cutoff_radius) {
  auto ball = enumerate_ball(params, cutoff_radius);
  int n = (int)ball.size();
  BsModel m;
  m.h0.resize(n);
  m.A.resize(1, n);
  double inv_g = 0.0;
  for (int i = 0; i < n; ++i) {
    m.h0(i) = params.ksq(ball[i]);
    m.A(0, i) = 1.0;
    inv_g += 1.0 / (m.h0(i) - params.binding_energy);
  }
  m.g = 1.0 / inv_g;
  return m;
}

}  // namespace

DeltaReport delta_ground_state_check(const ModelParams& params, double cutoff_radius) {
  auto ball = enumerate_ball(params, cutoff_radius);
  BsModel model = delta_model(params, cutoff_radius);
  int n = model.dim();
  double eb = params.binding_energy;

  DeltaReport rep;
  rep.cutoff_radius = cutoff_radius;
  rep.dim = n;
  rep.g_n = model.g;

  Eigen::MatrixXcd h = bs_hamiltonian(model);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  rep.eigenvalue = es.eigenvalues()(0);
  rep.eigenvalue_error = std::abs(rep.eigenvalue - eb);

  // Reference eigenvector coefficients (k^2 - E_B)^{-1}.
  Eigen::VectorXcd ref(n);
  for (int i = 0; i < n; ++i) ref(i) = 1.0 / (model.h0(i) - eb);
  ref.normalize();
  Eigen::VectorXcd v = es.eigenvectors().col(0);
  std::complex<double> phase = ref.dot(v);
  phase /= std::abs(phase);
  rep.eigvec_residual = (v - phase * ref).norm();

  // Krein resolvent vs direct inversion at a probe point.
  double z = eb - 1.0;
  Eigen::MatrixXcd direct =
      (h - z * Eigen::MatrixXcd::Identity(n, n)).fullPivLu().inverse();
  Eigen::MatrixXcd krein = krein_resolvent(model, z);
  rep.resolvent_residual = (direct - krein).norm() / direct.norm();

  // phi_n(E_B) = g_n^{-1} - sum 1/(k^2 - E_B) = 0 by the choice of g_n.
  double phi0 = 1.0 / model.g;
  for (int i = 0; i < n; ++i) phi0 -= 1.0 / (model.h0(i) - eb);
  rep.phi_zero_residual = std::abs(phi0) * model.g;  // relative to g^{-1}
  return rep;
}

DeltaLadderReport delta_ladder(const ModelParams& params, const std::vector<double>& radii) {
  DeltaLadderReport rep;
  double eb = params.binding_energy;

  // Norm of the infinite-lattice limit coefficients (k^2-E_B)^{-1}.
  SeriesValue norm2_full = lattice_inv_sq(params.kappa, -eb);
  for (double r : radii) {
    rep.rungs.push_back(delta_ground_state_check(params, r));
    // Distance between the normalized finite-cutoff closed-form vector and
    // the normalized limit vector: both are proportional to (k^2-E_B)^{-1}
    // on the ball, so the distance comes entirely from the missing tail.
    double norm2_ball = 0.0;
    for (const auto& k : enumerate_ball(params, r)) {
      double c = 1.0 / (params.ksq(k) - eb);
      norm2_ball += c * c;
    }
    double cosang = std::sqrt(norm2_ball / norm2_full.value);
    rep.eigvec_limit_distance.push_back(std::sqrt(std::max(0.0, 2.0 * (1.0 - cosang))));
  }
  return rep;
}

}  // namespace fpbox
