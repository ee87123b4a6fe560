#include "fpbox/schur.hpp"

#include <stdexcept>

namespace fpbox {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

void BsModel::validate() const {
  if (h0.size() == 0) throw std::invalid_argument("empty model");
  if ((int)A.cols() != dim()) throw std::invalid_argument("A column count must match dim(H0)");
  if (h0.minCoeff() < 0.0) throw std::invalid_argument("H0 must be positive");
  if (!(g > 0.0)) throw std::invalid_argument("coupling must be positive");
}

Eigen::MatrixXcd bs_hamiltonian(const BsModel& model) {
  MatrixXcd h = -model.g * (model.A.adjoint() * model.A);
  h.diagonal() += model.h0.cast<cplx>();
  return h;
}

Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return es.eigenvalues();
}

namespace {

VectorXcd resolvent_diag(const BsModel& model, cplx z) {
  VectorXcd r(model.dim());
  for (int i = 0; i < model.dim(); ++i) {
    cplx d = model.h0(i) - z;
    if (std::abs(d) < 1e-14) throw std::runtime_error("resolvent pole");
    r(i) = 1.0 / d;
  }
  return r;
}

}  // namespace

Eigen::MatrixXcd phi_of_z(const BsModel& model, cplx z) {
  model.validate();
  VectorXcd r0 = resolvent_diag(model, z);
  MatrixXcd phi = -(model.A * r0.asDiagonal() * model.A.adjoint());
  phi.diagonal().array() += 1.0 / model.g;
  return phi;
}

Eigen::MatrixXcd krein_resolvent(const BsModel& model, cplx z) {
  VectorXcd r0 = resolvent_diag(model, z);
  MatrixXcd phi = phi_of_z(model, z);
  Eigen::FullPivLU<MatrixXcd> lu(phi);
  if (!lu.isInvertible()) throw std::runtime_error("z is an eigenvalue of H");
  MatrixXcd left = r0.asDiagonal() * model.A.adjoint();   // R0(z) A^H
  MatrixXcd right = model.A * r0.asDiagonal();            // A R0(z)
  MatrixXcd res = left * lu.solve(right);
  res.diagonal() += r0;
  return res;
}

double inverse_phi_identity_check(const BsModel& model, cplx z) {
  MatrixXcd phi = phi_of_z(model, z);
  Eigen::FullPivLU<MatrixXcd> lu(phi);
  if (!lu.isInvertible()) throw std::runtime_error("z is an eigenvalue of H");
  MatrixXcd phi_inv = lu.inverse();
  MatrixXcd h = bs_hamiltonian(model);
  MatrixXcd hz = h - z * MatrixXcd::Identity(model.dim(), model.dim());
  MatrixXcd rhs = model.g * model.A * hz.fullPivLu().solve(model.A.adjoint());
  rhs *= model.g;
  rhs.diagonal().array() += model.g;
  return (phi_inv - rhs).norm();
}

std::pair<double, double> schur_factorization_check(const BsModel& model, cplx z) {
  model.validate();
  int n = model.dim(), m = model.aux_dim();
  MatrixXcd block(n + m, n + m);
  block.topLeftCorner(n, n) = MatrixXcd::Zero(n, n);
  block.topLeftCorner(n, n).diagonal() = (model.h0.cast<cplx>().array() - z).matrix();
  block.topRightCorner(n, m) = model.A.adjoint();
  block.bottomLeftCorner(m, n) = model.A;
  block.bottomRightCorner(m, m) = (1.0 / model.g) * MatrixXcd::Identity(m, m);

  auto eye = [&](int k) { return MatrixXcd::Identity(k, k); };

  // [[1, gA*],[0,1]] [[H-z,0],[0,1/g]] [[1,0],[gA,1]]
  MatrixXcd l1(n + m, n + m), mid1(n + m, n + m), r1(n + m, n + m);
  l1.setZero();
  l1.topLeftCorner(n, n) = eye(n);
  l1.bottomRightCorner(m, m) = eye(m);
  l1.topRightCorner(n, m) = model.g * model.A.adjoint();
  r1 = l1.adjoint();
  // keep r1's off-diagonal as g*A (conjugate layout matches for complex g=real)
  mid1.setZero();
  mid1.topLeftCorner(n, n) =
      bs_hamiltonian(model) - z * eye(n);
  mid1.bottomRightCorner(m, m) = (1.0 / model.g) * eye(m);
  double res1 = (l1 * mid1 * r1 - block).norm();

  // [[1,0],[A R0,1]] [[H0-z,0],[0,phi]] [[1, R0 A*],[0,1]]
  VectorXcd r0 = resolvent_diag(model, z);
  MatrixXcd l2(n + m, n + m), mid2(n + m, n + m), r2(n + m, n + m);
  l2.setZero();
  l2.topLeftCorner(n, n) = eye(n);
  l2.bottomRightCorner(m, m) = eye(m);
  l2.bottomLeftCorner(m, n) = model.A * r0.asDiagonal();
  r2.setZero();
  r2.topLeftCorner(n, n) = eye(n);
  r2.bottomRightCorner(m, m) = eye(m);
  r2.topRightCorner(n, m) = r0.asDiagonal() * model.A.adjoint();
  mid2.setZero();
  mid2.topLeftCorner(n, n).diagonal() = (model.h0.cast<cplx>().array() - z).matrix();
  mid2.bottomRightCorner(m, m) = phi_of_z(model, z);
  double res2 = (l2 * mid2 * r2 - block).norm();

  return {res1, res2};
}

KernelIsoReport kernel_isomorphism_check(const BsModel& model, double z, double tol) {
  model.validate();
  if (z >= model.h0.minCoeff()) throw std::invalid_argument("z must lie below min(h0)");
  MatrixXcd h = bs_hamiltonian(model);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  VectorXd evals = es.eigenvalues();

  // Relative clustering threshold for lattice-symmetry degeneracies.
  double scale = std::max(1.0, std::abs(z));
  double band = std::max(1e-9 * scale, 1e-11);
  std::vector<int> idx;
  for (int i = 0; i < evals.size(); ++i)
    if (std::abs(evals(i) - z) <= band) idx.push_back(i);
  if (idx.empty()) throw std::runtime_error("z is not an eigenvalue of H");

  KernelIsoReport rep;
  rep.dim_ker_h = (int)idx.size();

  MatrixXcd phi = phi_of_z(model, z);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> ep(phi);
  double phi_scale = std::max(1.0, phi.norm());
  std::vector<int> pidx;
  for (int i = 0; i < ep.eigenvalues().size(); ++i)
    if (std::abs(ep.eigenvalues()(i)) <= 1e-8 * phi_scale) pidx.push_back(i);
  rep.dim_ker_phi = (int)pidx.size();

  // Forward: A maps ker(H-z) into ker(phi(z)), preserving independence.
  MatrixXcd mapped(model.aux_dim(), rep.dim_ker_h);
  for (int j = 0; j < rep.dim_ker_h; ++j) {
    VectorXcd v = es.eigenvectors().col(idx[j]);
    VectorXcd w = model.A * v;
    mapped.col(j) = w;
    rep.forward_residual = std::max(rep.forward_residual, (phi * w).norm() / std::max(w.norm(), 1e-300));
  }
  Eigen::JacobiSVD<MatrixXcd> svd(mapped);
  rep.independence_sigma = svd.singularValues().size()
                               ? svd.singularValues()(svd.singularValues().size() - 1)
                               : 0.0;

  // Backward: R0(z) A^H maps ker(phi(z)) into ker(H-z).
  VectorXcd r0 = resolvent_diag(model, z);
  for (int j : pidx) {
    VectorXcd w = ep.eigenvectors().col(j);
    VectorXcd v = r0.asDiagonal() * (model.A.adjoint() * w);
    double r = ((h - z * MatrixXcd::Identity(model.dim(), model.dim())) * v).norm() /
               std::max(v.norm(), 1e-300);
    rep.backward_residual = std::max(rep.backward_residual, r);
  }

  rep.ok = rep.dim_ker_h == rep.dim_ker_phi && rep.forward_residual <= tol &&
           rep.backward_residual <= tol && rep.independence_sigma > 1e-6;
  return rep;
}

std::pair<int, int> bs_count_check(const BsModel& model, double E) {
  model.validate();
  if (E >= model.h0.minCoeff()) throw std::invalid_argument("outside the variational window");
  VectorXd eh = hermitian_eigenvalues(bs_hamiltonian(model));

  double e_use = E;
  for (int tries = 0; tries < 8; ++tries) {
    bool collision = false;
    for (int i = 0; i < eh.size(); ++i)
      if (std::abs(eh(i) - e_use) < 1e-12) collision = true;
    if (!collision) break;
    e_use += 1e-12;
  }

  int count_h = 0;
  for (int i = 0; i < eh.size(); ++i)
    if (eh(i) < e_use) ++count_h;

  VectorXd ephi = hermitian_eigenvalues(phi_of_z(model, e_use));
  int count_phi = 0;
  for (int i = 0; i < ephi.size(); ++i)
    if (ephi(i) < -1e-10) ++count_phi;
  return {count_h, count_phi};
}

MonotonicityReport phi_monotonicity_check(const BsModel& model,
                                          const std::vector<double>& tau_grid, int ell) {
  model.validate();
  if (ell < 1 || ell > model.aux_dim()) throw std::invalid_argument("invalid ell");
  MonotonicityReport rep;
  for (size_t i = 1; i < tau_grid.size(); ++i)
    if (!(tau_grid[i] > tau_grid[i - 1])) throw std::invalid_argument("tau grid must ascend");
  if (!tau_grid.empty() && tau_grid.back() >= model.h0.minCoeff())
    throw std::invalid_argument("tau grid must stay below min(h0)");

  // A* injective iff A has full row rank.
  Eigen::JacobiSVD<MatrixXcd> svd(model.A);
  rep.a_star_injective =
      svd.rank() == model.aux_dim() &&
      svd.singularValues()(svd.singularValues().size() - 1) > 1e-10;

  rep.mu_ell.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    VectorXd ev = hermitian_eigenvalues(phi_of_z(model, tau));
    rep.mu_ell.push_back(ev(ell - 1));
  }
  rep.min_step = std::numeric_limits<double>::infinity();
  for (size_t i = 1; i < rep.mu_ell.size(); ++i)
    rep.min_step = std::min(rep.min_step, rep.mu_ell[i - 1] - rep.mu_ell[i]);
  rep.strictly_decreasing = rep.mu_ell.size() < 2 || rep.min_step > -1e-12;
  return rep;
}

BsModel random_bs_model(std::mt19937_64& rng, int dim, int aux_dim) {
  std::uniform_real_distribution<double> uh(0.5, 10.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> ug(0.5, 2.0);
  BsModel m;
  m.h0.resize(dim);
  for (int i = 0; i < dim; ++i) m.h0(i) = uh(rng);
  m.A.resize(aux_dim, dim);
  for (int i = 0; i < aux_dim; ++i)
    for (int j = 0; j < dim; ++j) m.A(i, j) = cplx(gauss(rng), gauss(rng)) / std::sqrt(2.0);
  m.g = ug(rng);
  return m;
}

}  // namespace fpbox
